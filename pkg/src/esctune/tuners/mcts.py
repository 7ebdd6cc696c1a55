"""Monte Carlo tree search over configurations, with a final greedy stage.

States are configurations and an action adds one index.  Each expansion
evaluates the new configuration for every query (issuing the what-if calls
it needs) and scores it by its percentage improvement under working costs.
Once allocation ends the final configuration comes from greedy search on
derived costs, which issues no calls.
"""
from __future__ import annotations

import math
from typing import Optional

from ..esvs import EarlyStop
from ..oracle import CoverageOracle
from ..workload import EMPTY, Workload
from .base import RunContext, TunerOptions, TuningResult


class MctsNode:
    __slots__ = ("config", "visits", "total", "children", "untried")

    def __init__(self, config: frozenset, candidates, K: int):
        self.config = config
        self.visits = 0
        self.total = 0.0
        self.children: dict = {}
        self.untried = [z for z in candidates if z not in config] if len(config) < K else []

    @property
    def mean(self) -> float:
        return self.total / self.visits if self.visits else 0.0

    def uct_child(self, c_uct: float) -> "MctsNode":
        log_n = math.log(max(self.visits, 1))
        best, best_score = None, -math.inf
        # children were expanded in ascending id order, so dict order breaks ties
        for child in self.children.values():
            score = child.total / child.visits + c_uct * math.sqrt(log_n / child.visits)
            if score > best_score:
                best, best_score = child, score
        return best


class _ThresholdStop(Exception):
    pass


class Mcts:
    algorithm = "mcts"

    def __init__(self, workload: Workload, oracle: CoverageOracle, options: TunerOptions,
                 max_iterations: Optional[int] = None):
        self.workload = workload
        self.options = options
        self.ctx = RunContext(workload, oracle, options, self.algorithm)
        self.ctx.tuner = self
        self.root = MctsNode(EMPTY, workload.index_ids, options.K)
        self.iterations = 0
        self.max_iterations = max_iterations
        self.idle_limit = max(50, 2 * len(workload.index_ids))

    def esv_starts(self) -> list:
        return [EMPTY]

    def esv_pool(self):
        return None

    def reward(self, config: frozenset) -> float:
        ctx = self.ctx
        total = sum(ctx.cost(q.id, config) for q in self.workload.queries)
        ctx.offer(config, total)
        return min(1.0, max(0.0, 1.0 - total / ctx.empty_cost))

    def _iterate(self) -> None:
        K = self.options.K
        node = self.root
        path = [node]
        while not node.untried and node.children and len(node.config) < K:
            node = node.uct_child(self.options.c_uct)
            path.append(node)
        if node.untried:
            z = node.untried.pop(0)
            child = MctsNode(node.config | {z}, self.workload.index_ids, K)
            node.children[z] = child
            node = child
            path.append(node)
        value = self.reward(node.config)
        for n in path:
            n.visits += 1
            n.total += value

    def _search(self) -> None:
        ctx = self.ctx
        idle = 0
        while not ctx.exhausted:
            if self.max_iterations is not None and self.iterations >= self.max_iterations:
                break
            before = ctx.calls
            self._iterate()
            self.iterations += 1
            idle = idle + 1 if ctx.calls == before else 0
            if idle >= self.idle_limit:
                break
            if (self.options.baseline == "threshold"
                    and ctx.improvement() >= self.options.baseline_threshold):
                raise _ThresholdStop()

    def run(self) -> TuningResult:
        ctx = self.ctx
        ctx.initialize()
        if self.options.K == 0:
            return ctx.result(EMPTY, False, "k-zero")
        try:
            self._search()
        except EarlyStop as stop:
            return ctx.result(stop.bounds.completion, True, "early-stop", stop.calls)
        except _ThresholdStop:
            return ctx.result(ctx.completion(), True, "baseline", ctx.calls)
        reason = "budget" if ctx.exhausted else "converged"
        return ctx.result(ctx.completion(), False, reason)


def run_mcts(workload: Workload, oracle: CoverageOracle, options: TunerOptions) -> TuningResult:
    return Mcts(workload, oracle, options).run()
