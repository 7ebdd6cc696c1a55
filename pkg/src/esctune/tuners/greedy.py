"""Budget-aware greedy and two-phase greedy search.

Budget is handed out first come first serve: every (query, configuration)
pair a step needs is evaluated in ascending index-id order until the budget
runs out, after which the search carries on with derived costs.
"""
from __future__ import annotations

from typing import Optional

from ..callbounds import mci_update_greedy
from ..esvs import EarlyStop
from ..oracle import CoverageOracle
from ..workload import EMPTY, Workload
from .base import RunContext, TunerOptions, TuningResult


class _GreedyBase:
    algorithm = "greedy"

    def __init__(self, workload: Workload, oracle: CoverageOracle, options: TunerOptions):
        self.workload = workload
        self.options = options
        self.ctx = RunContext(workload, oracle, options, self.algorithm)
        self.ctx.tuner = self
        self.phase = 1
        self.pool: Optional[frozenset] = None
        self.current: frozenset = EMPTY
        # (step, index id, {qid: u at selection}) for every workload-level pick
        self.trace: list = []

    def esv_starts(self) -> list:
        return [self.current] if self.phase == 2 else []

    def esv_pool(self):
        return self.pool if self.phase == 2 else None

    def _workload_greedy(self, pool, gate_whole_workload: bool) -> frozenset:
        """Greedy over ``pool`` for the whole workload, starting from the empty set."""
        ctx, w, K = self.ctx, self.workload, self.options.K
        self.phase = 2
        self.pool = frozenset(pool)
        config = EMPTY
        self.current = config
        candidates = sorted(pool)
        for k in range(1, K + 1):
            ctx.controller.on_step_boundary(2, k, ctx.calls)
            per_query = {q.id: ctx.cost(q.id, config) for q in w.queries}
            current = sum(per_query.values())
            known = ctx.cache.fully_known(config) if gate_whole_workload else None
            best, best_cost = None, current
            for z in candidates:
                if z in config:
                    continue
                total = current
                for qid in w.relevant_queries[z]:
                    c = ctx.cost(qid, config | {z})
                    if gate_whole_workload:
                        if known:
                            mci_update_greedy(config, z, qid, ctx.cache, ctx.table)
                    else:
                        mci_update_greedy(config, z, qid, ctx.cache, ctx.table)
                    total -= per_query[qid] - min(c, per_query[qid])
                if total < best_cost:
                    best, best_cost = z, total
            if best is None:
                break
            self.trace.append((k, best, {qid: ctx.table.get(qid, best)
                                         for qid in w.relevant_queries[best]}))
            config = config | {best}
            self.current = config
            ctx.offer(config)
        return config

    def run(self) -> TuningResult:
        ctx = self.ctx
        ctx.initialize()
        if self.options.K == 0:
            return ctx.result(EMPTY, False, "k-zero")
        try:
            config = self._search()
        except EarlyStop as stop:
            return ctx.result(stop.bounds.completion, True, "early-stop", stop.calls)
        except _BaselineStop:
            return ctx.result(ctx.completion(pool=self.pool), True, "baseline", ctx.calls)
        reason = "budget" if ctx.exhausted else "converged"
        return ctx.result(config, False, reason)

    def _search(self) -> frozenset:
        raise NotImplementedError


class _BaselineStop(Exception):
    pass


class PlainGreedy(_GreedyBase):
    """Workload-level greedy over every candidate, MCI table kept per query."""

    algorithm = "greedy"

    def _search(self) -> frozenset:
        return self._workload_greedy(self.workload.index_ids, gate_whole_workload=False)


class TwoPhaseGreedy(_GreedyBase):
    """Per-query greedy first, then workload greedy over the union of picks."""

    algorithm = "two-phase-greedy"

    def __init__(self, workload, oracle, options):
        super().__init__(workload, oracle, options)
        self.selections: dict = {}

    def _phase_one(self) -> frozenset:
        ctx, K = self.ctx, self.options.K
        union = set()
        for q in self.workload.queries:
            config = EMPTY
            current = ctx.cost(q.id, config)
            for _ in range(K):
                best, best_cost = None, current
                for z in sorted(q.candidate_ids - config):
                    c = ctx.cost(q.id, config | {z})
                    if c < best_cost:
                        best, best_cost = z, c
                if best is None:
                    break
                config = config | {best}
                current = best_cost
                ctx.offer(config)
            self.selections[q.id] = config
            union |= config
        return frozenset(union)

    def _search(self) -> frozenset:
        pool = self._phase_one()
        self.pool = pool
        if self.options.baseline == "phase1":
            self.phase = 2
            raise _BaselineStop()
        return self._workload_greedy(pool, gate_whole_workload=True)


def run_two_phase_greedy(workload: Workload, oracle: CoverageOracle,
                         options: TunerOptions) -> TuningResult:
    return TwoPhaseGreedy(workload, oracle, options).run()


def run_greedy(workload: Workload, oracle: CoverageOracle, options: TunerOptions) -> TuningResult:
    return PlainGreedy(workload, oracle, options).run()
