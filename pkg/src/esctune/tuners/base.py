"""Shared run state for the budget-aware tuners."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

from ..bounds import ESC_B, ESC_I, InteractionModel, esc_bounds, fast_lower_bound, \
    simulated_greedy_upper_bound
from ..callbounds import PHASE1, MciTable, apply_coverage_estimates, wii_should_skip
from ..errors import BudgetExhausted, ValidationError
from ..esvs import EsvConfig, EsvController
from ..oracle import BudgetedOracle, CostCache, CoverageOracle
from ..workload import EMPTY, FeatureSpace, Workload

ALGORITHMS = ("two-phase-greedy", "greedy", "mcts")
DEFAULT_SCHEME = {"two-phase-greedy": "heuristic", "greedy": "heuristic", "mcts": "generic"}


@dataclass
class TunerOptions:
    K: int = 20
    budget: int = 20000
    wii: str = "off"
    theta: float = 0.05
    esc: str = "off"
    esvs: Optional[str] = None
    epsilon: float = 0.05
    step: int = 100
    sigma: float = 0.5
    tau: float = 0.2
    seed: int = 0
    c_uct: float = math.sqrt(2)
    # compute bounds at every decision point without ever stopping
    monitor: bool = False
    # "phase1" (greedy) or "threshold" (mcts) stop rules used as baselines
    baseline: Optional[str] = None
    baseline_threshold: float = 0.3
    general_bound: bool = False

    def validate(self, algorithm: str) -> None:
        if algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {algorithm!r}")
        if self.K < 0:
            raise ValidationError("K must be >= 0")
        if self.wii not in ("off", "bound", "coverage"):
            raise ValidationError(f"unknown wii mode {self.wii!r}")
        if self.esc not in ("off", "b", "i"):
            raise ValidationError(f"unknown esc mode {self.esc!r}")
        if self.scheme(algorithm) == "heuristic" and algorithm == "mcts":
            raise ValidationError("the heuristic scheme needs greedy step boundaries; use generic or fixed")
        if not 0 <= self.theta < 1:
            raise ValidationError("theta must lie in [0, 1)")
        if not 0 <= self.tau <= 1:
            raise ValidationError("tau must lie in [0, 1]")
        if self.baseline not in (None, "phase1", "threshold"):
            raise ValidationError(f"unknown baseline {self.baseline!r}")

    def scheme(self, algorithm: str) -> str:
        return self.esvs or DEFAULT_SCHEME.get(algorithm, "generic")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TuningResult:
    algorithm: str
    options: TunerOptions
    config: frozenset
    calls_used: int
    call_log: list
    curve: list
    esvs: list
    esv_seconds: float
    stopped_early: bool
    reason: str
    empty_cost: float
    final_derived_cost: float
    observed_improvement: float
    skipped: list = field(default_factory=list)
    mci_csv: str = ""

    @property
    def esv_count(self) -> int:
        return len(self.esvs)


class RunContext:
    """Oracle, cache, MCI table, observed best and the ESV controller for one run."""

    def __init__(self, workload: Workload, oracle: CoverageOracle, options: TunerOptions,
                 algorithm: str):
        options.validate(algorithm)
        self.workload = workload
        self.options = options
        self.algorithm = algorithm
        self.cache = CostCache(workload)
        self.oracle = BudgetedOracle(oracle, options.budget, self.cache)
        self.table = MciTable(workload)
        self._features: Optional[FeatureSpace] = None
        self._model: Optional[InteractionModel] = None
        self.best_config: frozenset = EMPTY
        self.best_cost: Optional[float] = None
        self.empty_cost = 0.0
        self.exhausted = False
        self.skipped: list = []
        self.tuner = None
        esv = EsvConfig(epsilon=options.epsilon, scheme=options.scheme(algorithm),
                        step=options.step, sigma=options.sigma, seed=options.seed)
        lower_b = self._lower_b if options.esc == "i" else None
        self.controller = EsvController(esv, self._bounds, self.improvement, options.esc,
                                        monitor=options.monitor, lower_b_fn=lower_b)

    @property
    def features(self) -> FeatureSpace:
        if self._features is None:
            self._features = FeatureSpace(self.workload)
        return self._features

    @property
    def model(self) -> InteractionModel:
        if self._model is None:
            self._model = InteractionModel(self.workload, self.features)
        return self._model

    @property
    def calls(self) -> int:
        return self.oracle.calls_made

    def initialize(self) -> None:
        w = self.workload
        if self.options.budget < 2 * len(w.queries):
            raise ValidationError(
                f"budget {self.options.budget} cannot cover the {2 * len(w.queries)} "
                "initialization calls")
        for q in w.queries:
            self.oracle.whatif_cost(q.id, EMPTY)
        for q in w.queries:
            self.oracle.whatif_cost(q.id, q.candidate_ids)
        self.table.initialize(self.cache)
        if self.options.wii == "coverage":
            apply_coverage_estimates(self.cache, self.table, self.features)
        self.empty_cost = sum(self.cache.empty_cost(q.id) for q in w.queries)
        self.best_cost = self.empty_cost
        if self.oracle.exhausted():
            self._mark_exhausted()
        for t in range(1, self.calls + 1):
            self.controller.on_call(t)

    def _mark_exhausted(self) -> None:
        self.exhausted = True
        self.controller.disable()

    def cost(self, qid: str, config) -> float:
        """Working cost of (q, C): cached, skipped, freshly evaluated, or derived."""
        cache = self.cache
        key = cache.project(qid, config)
        val = cache.get(qid, key)
        if val is not None:
            return val
        if self.exhausted:
            return cache.derived(qid, key)
        if self.options.wii != "off" and wii_should_skip(qid, key, self.table, cache,
                                                         self.options.theta):
            d = cache.derived(qid, key)
            cache.put(qid, key, d, authoritative=False)
            self.skipped.append((qid, key, d))
            return d
        try:
            val = self.oracle.whatif_cost(qid, key)
        except BudgetExhausted:
            self._mark_exhausted()
            return cache.derived(qid, key)
        if len(key) == 1:
            (zid,) = key
            self.table.tighten(qid, zid, cache.empty_cost(qid) - val, PHASE1)
        if self.oracle.exhausted():
            self._mark_exhausted()
        self.controller.on_call(self.calls)
        return val

    def derived_workload(self, config) -> float:
        return self.cache.derived_workload(config)

    def offer(self, config, d: Optional[float] = None) -> None:
        config = frozenset(config)
        if d is None:
            d = self.cache.derived_workload(config)
        self.best_cost = self.cache.derived_workload(self.best_config)
        if d < self.best_cost:
            self.best_config, self.best_cost = config, d

    def improvement(self) -> float:
        if not self.empty_cost:
            return 0.0
        self.best_cost = self.cache.derived_workload(self.best_config)
        return max(0.0, 1.0 - self.best_cost / self.empty_cost)

    # -- verification plumbing

    def _starts(self) -> list:
        starts = [self.best_config]
        if self.tuner is not None:
            for s in self.tuner.esv_starts():
                if s not in starts:
                    starts.append(s)
        return starts

    def _pool(self):
        return None if self.tuner is None else self.tuner.esv_pool()

    def _bounds(self):
        o = self.options
        pool = self._pool()
        mode = ESC_I if o.esc == "i" else ESC_B
        return esc_bounds(self.workload, self.table, self.cache, o.K, self._starts(), mode=mode,
                          pool=pool, completion_pool=pool,
                          model=self.model if mode == ESC_I else None, tau=o.tau,
                          algo="mcts" if self.algorithm == "mcts" else "greedy",
                          general=o.general_bound)

    def _lower_b(self) -> float:
        return fast_lower_bound(self.workload, self.table, self.options.K, self.cache,
                                self._pool()).value

    def completion(self, starts=None, pool=None) -> frozenset:
        """Finish the search from the given starts on derived costs only."""
        starts = self._starts() if starts is None else starts
        best, best_cfg = None, EMPTY
        for s in starts:
            val, cfg = simulated_greedy_upper_bound(self.workload, s, self.cache,
                                                    self.options.K, pool)
            if best is None or val < best:
                best, best_cfg = val, cfg
        return best_cfg

    def result(self, config, stopped: bool, reason: str, calls: Optional[int] = None) -> TuningResult:
        config = frozenset(config)
        final = self.cache.derived_workload(config)
        observed = 1.0 - final / self.empty_cost if self.empty_cost else 0.0
        return TuningResult(
            algorithm=self.algorithm, options=self.options, config=config,
            calls_used=self.calls if calls is None else calls,
            call_log=list(self.oracle.call_log), curve=list(self.controller.curve),
            esvs=list(self.controller.esvs), esv_seconds=self.controller.esv_seconds,
            stopped_early=stopped, reason=reason, empty_cost=self.empty_cost,
            final_derived_cost=final, observed_improvement=observed,
            skipped=list(self.skipped), mci_csv=self.table.to_csv(),
        )
