"""Brute-force verification suites.

Each suite returns a :class:`Report`; :func:`run_suite` raises
:class:`VerificationFailure` carrying the counterexamples when a suite that
is expected to be clean finds violations.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .bounds import pairwise_interaction, similarity
from .errors import ValidationError, VerificationFailure
from .esvs import improvement_rate, latest_rate
from .oracle import CostCache, CoverageOracle
from .tuners import TunerOptions
from .tuners.greedy import PlainGreedy, TwoPhaseGreedy
from .workload import EMPTY, FeatureSpace, GeneratorSpec, Workload, generate_workload, preset

SUITES = ("monotone", "submodular", "derived", "theorem1", "theorem2", "rates", "interactions")


@dataclass
class Report:
    suite: str
    checked: int = 0
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        extra = "".join(f" {k}={v}" for k, v in sorted(self.details.items()))
        return f"{self.suite}: checked={self.checked} violations={len(self.violations)}{extra}"


def _random_subset(rng: random.Random, items: Sequence[str], max_size: Optional[int] = None) -> set:
    hi = len(items) if max_size is None else min(max_size, len(items))
    k = rng.randint(0, hi)
    return set(rng.sample(list(items), k))


def _tol(oracle: CoverageOracle, qid: str) -> float:
    return 1e-9 * oracle.workload.query_by_id[qid].base_cost


def check_monotone(oracle: CoverageOracle, samples: int, rng: random.Random) -> Report:
    """c(q, Y) <= c(q, X) for sampled X subset of Y."""
    w = oracle.workload
    rep = Report("monotone")
    for _ in range(samples):
        q = rng.choice(w.queries)
        omega = sorted(q.candidate_ids)
        y = _random_subset(rng, omega)
        x = _random_subset(rng, sorted(y))
        rep.checked += 1
        cx, cy = oracle.cost(q.id, x), oracle.cost(q.id, y)
        if cy > cx + _tol(oracle, q.id):
            rep.violations.append({"query": q.id, "X": sorted(x), "Y": sorted(y),
                                   "c(X)": cx, "c(Y)": cy})
    return rep


def check_submodular(oracle: CoverageOracle, samples: int, rng: random.Random) -> Report:
    """delta(q, z, Y) <= delta(q, z, X) for X subset of Y, z outside Y."""
    w = oracle.workload
    rep = Report("submodular")
    drawn = 0
    while drawn < samples:
        q = rng.choice(w.queries)
        omega = sorted(q.candidate_ids)
        if len(omega) < 1:
            continue
        z = rng.choice(omega)
        y = _random_subset(rng, [c for c in omega if c != z])
        x = _random_subset(rng, sorted(y))
        drawn += 1
        rep.checked += 1
        dx = oracle.cost(q.id, x) - oracle.cost(q.id, x | {z})
        dy = oracle.cost(q.id, y) - oracle.cost(q.id, y | {z})
        if dy > dx + _tol(oracle, q.id):
            rep.violations.append({"query": q.id, "z": z, "X": sorted(x), "Y": sorted(y),
                                   "delta(X)": dx, "delta(Y)": dy})
    return rep


def brute_force_derived(cache: CostCache, qid: str, config) -> float:
    """min over every subset S of config that the cache knows (after projection)."""
    key = sorted(cache.project(qid, config))
    best = cache.empty_cost(qid)
    for r in range(len(key) + 1):
        for subset in itertools.combinations(key, r):
            val = cache.get(qid, frozenset(subset))
            if val is not None and val < best:
                best = val
    return best


def check_derived(w: Workload, oracle: CoverageOracle, rng: random.Random,
                  max_size: int = 4, entries: int = 40) -> Report:
    """Derived cost against exhaustive subset enumeration for |C| <= max_size."""
    rep = Report("derived")
    cache = CostCache(w)
    for q in w.queries:
        cache.put(q.id, EMPTY, oracle.cost(q.id, EMPTY))
        omega = sorted(q.candidate_ids)
        for _ in range(entries):
            s = _random_subset(rng, omega, max_size)
            cache.put(q.id, s, oracle.cost(q.id, s))
    for q in w.queries:
        omega = sorted(q.candidate_ids)
        # every C up to max_size over a random slice of the candidates, plus random ones
        pool = omega if len(omega) <= 8 else rng.sample(omega, 8)
        configs = [frozenset(c) for r in range(max_size + 1)
                   for c in itertools.combinations(sorted(pool), r)]
        configs += [frozenset(_random_subset(rng, omega, max_size)) for _ in range(20)]
        for c in configs:
            rep.checked += 1
            got, want = cache.derived(q.id, c), brute_force_derived(cache, q.id, c)
            if got != want:
                rep.violations.append({"query": q.id, "C": sorted(c), "derived": got,
                                       "brute_force": want})
    return rep


def _small_instance(seed: int) -> tuple:
    rng = random.Random(seed)
    nq = rng.randint(2, 8)
    spec = GeneratorSpec(n_queries=nq, n_tables=rng.randint(1, 3),
                         columns_per_table=rng.randint(3, 5),
                         n_candidates=rng.randint(max(nq, 4), 12))
    w = generate_workload(spec, seed)
    K = rng.randint(1, 4)
    return w, K, rng


def _full_calls(cls, w: Workload, K: int) -> int:
    res = cls(w, CoverageOracle(w), TunerOptions(K=K, budget=10 ** 7)).run()
    return res.calls_used


def check_theorem1(seeds: Sequence[int]) -> Report:
    """Simulated MCI sum at every checkpoint >= MCI sum replayed from the actual greedy trace."""
    rep = Report("theorem1")
    for seed in seeds:
        w, K, rng = _small_instance(seed)
        natural = _full_calls(PlainGreedy, w, K)
        budget = rng.randint(2 * len(w.queries), max(2 * len(w.queries), natural))
        opts = TunerOptions(K=K, budget=budget, esc="b", esvs="fixed", step=1, monitor=True)
        tuner = PlainGreedy(w, CoverageOracle(w), opts)
        result = tuner.run()
        replayed = sum(sum(us.values()) for _, _, us in tuner.trace)
        oracle = CoverageOracle(w)
        realised = oracle.workload_cost(()) - oracle.workload_cost(result.config)
        for esv in result.esvs:
            rep.checked += 1
            sim = esv.bounds.simulated_sum
            if sim < replayed - 1e-9 * max(1.0, replayed):
                rep.violations.append({"seed": seed, "calls": esv.calls, "simulated": sim,
                                       "replayed": replayed, "K": K, "budget": budget})
        if realised > replayed + 1e-9 * max(1.0, replayed):
            rep.violations.append({"seed": seed, "realised": realised, "replayed": replayed})
    return rep


def check_theorem2(seeds: Sequence[int]) -> Report:
    """Two-phase greedy: L(W, C_B*) <= c(W, C_B*) at every checkpoint."""
    rep = Report("theorem2")
    for seed in seeds:
        w, K, rng = _small_instance(seed)
        natural = _full_calls(TwoPhaseGreedy, w, K)
        budget = rng.randint(2 * len(w.queries), max(2 * len(w.queries), natural))
        opts = TunerOptions(K=K, budget=budget, esc="b", esvs="fixed", step=1, monitor=True)
        result = TwoPhaseGreedy(w, CoverageOracle(w), opts).run()
        oracle = CoverageOracle(w)
        truth = oracle.workload_cost(result.config)
        for esv in result.esvs:
            rep.checked += 1
            if esv.bounds.L_final > truth * (1 + 1e-9):
                rep.violations.append({"seed": seed, "calls": esv.calls,
                                       "L": esv.bounds.L_final, "c(W,C_B*)": truth})
    return rep


def rate_signs(f: Callable[[float], float], step: int = 100, limit: int = 20000) -> list:
    """(j, r_j, l_j) for the curve f sampled on the grid step, 2*step, ..., limit."""
    out = []
    prev_b, prev_i = 0, 0.0
    f0 = f(0)
    for j, b in enumerate(range(step, limit + 1, step), start=1):
        i = f(b) - f0
        out.append((j, improvement_rate(i, b), latest_rate(i, b, prev_i, prev_b)))
        prev_b, prev_i = b, i
    return out


def check_rates(step: int = 100, limit: int = 20000) -> Report:
    """sqrt(b) gives l_j < r_j and b^2 gives l_j > r_j for every j >= 2 (l_1 = r_1)."""
    rep = Report("rates")
    for name, f, want in (("sqrt", math.sqrt, "<"), ("square", lambda b: b * b, ">")):
        for j, r, l in rate_signs(f, step, limit):
            rep.checked += 1
            if j == 1:
                ok = l == r
            else:
                ok = l < r if want == "<" else l > r
            if not ok:
                rep.violations.append({"curve": name, "j": j, "r": r, "l": l})
    return rep


def interaction_study(w: Workload, oracle: CoverageOracle, tau: float = 0.2,
                      top_queries: int = 5, top_indexes: int = 50) -> dict:
    """Pairwise interaction against similarity for the costliest queries."""
    cache = CostCache(w)
    features = FeatureSpace(w)
    pairs = []
    queries = sorted(w.queries, key=lambda q: (-q.base_cost, q.id))[:top_queries]
    for q in queries:
        cache.put(q.id, EMPTY, oracle.cost(q.id, EMPTY))
        for z in q.candidate_ids:
            cache.put(q.id, {z}, oracle.cost(q.id, {z}))
        ranked = sorted(q.candidate_ids,
                        key=lambda z: (cache.get(q.id, {z}), z))[:top_indexes]
        for z1, z2 in itertools.permutations(ranked, 2):
            cache.put(q.id, {z1, z2}, oracle.cost(q.id, {z1, z2}))
            inter = pairwise_interaction(z1, z2, q.id, cache)
            pairs.append((similarity(z1, z2, q.id, features), inter))
    above = [i for s, i in pairs if s > tau]
    below = [i for s, i in pairs if s <= tau]
    return {
        "pairs": len(pairs),
        "above": len(above),
        "below": len(below),
        "mean_above": float(np.mean(above)) if above else 0.0,
        "mean_below": float(np.mean(below)) if below else 0.0,
    }


def check_interactions(seeds: Sequence[int], spec: Optional[GeneratorSpec] = None,
                       tau: float = 0.2) -> Report:
    """Mean interaction of pairs above the similarity threshold exceeds the mean below it."""
    rep = Report("interactions")
    spec = spec or preset("default")
    agg = {"above": [], "below": []}
    for seed in seeds:
        w = generate_workload(spec, seed)
        stats = interaction_study(w, CoverageOracle(w), tau)
        rep.checked += 1
        if stats["above"] and stats["below"]:
            agg["above"].append(stats["mean_above"])
            agg["below"].append(stats["mean_below"])
    mean_above = float(np.mean(agg["above"])) if agg["above"] else 0.0
    mean_below = float(np.mean(agg["below"])) if agg["below"] else 0.0
    rep.details = {"mean_above": round(mean_above, 4), "mean_below": round(mean_below, 4)}
    if agg["above"] and not mean_above > mean_below:
        rep.violations.append(rep.details)
    return rep


def run_suite(suite: str, seeds: Sequence[int] = range(10), samples: int = 10000,
              spec: Optional[GeneratorSpec] = None, adversarial: bool = False,
              raise_on_violation: bool = True) -> Report:
    if suite not in SUITES:
        raise ValidationError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    spec = spec or preset("default")
    if suite in ("monotone", "submodular", "derived"):
        rep = Report(suite)
        for seed in seeds:
            w = generate_workload(spec, seed)
            oracle = CoverageOracle(w, adversarial=adversarial, seed=seed)
            rng = random.Random(seed)
            if suite == "monotone":
                part = check_monotone(oracle, samples, rng)
            elif suite == "submodular":
                part = check_submodular(oracle, samples, rng)
            else:
                part = check_derived(w, oracle, rng)
            rep.checked += part.checked
            rep.violations.extend(dict(v, seed=seed) for v in part.violations)
    elif suite == "theorem1":
        rep = check_theorem1(seeds)
    elif suite == "theorem2":
        rep = check_theorem2(seeds)
    elif suite == "rates":
        rep = check_rates()
    else:
        rep = check_interactions(seeds, spec)
    if raise_on_violation and rep.violations:
        raise VerificationFailure(rep.summary(), rep.violations)
    return rep
