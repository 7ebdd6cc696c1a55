"""Workload-level bounds on the cost of the final and current configurations.

Lower bounds come from simulated greedy searches over the MCI table; the
upper bound continues greedy search from the observed best configuration
using derived costs only, so none of these functions issues a what-if call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .callbounds import MciTable, ci
from .oracle import CostCache
from .workload import EMPTY, FeatureSpace, Workload

ESC_B = "EscB"
ESC_I = "EscI"


class LowerBound(NamedTuple):
    value: float
    selected: tuple
    # sum of the step scores the simulation accumulated (before clamping)
    total: float


@dataclass(frozen=True)
class WorkloadBounds:
    L_final: float
    U_current: float
    eta_L: float
    eta_U: float
    mode: str
    completion: frozenset = frozenset()
    selected: tuple = ()
    simulated_sum: float = 0.0

    @property
    def gap(self) -> float:
        return self.eta_U - self.eta_L


def _empty_total(w: Workload, cache: CostCache) -> float:
    return sum(cache.empty_cost(q.id) for q in w.queries)


def general_lower_bound(w: Workload, table: MciTable, K: int, cache: CostCache) -> float:
    """Per query, subtract the K largest u(q, z) from c(q, {})."""
    total = 0.0
    for q in w.queries:
        vals = sorted((table.get(q.id, z) for z in q.candidate_ids), reverse=True)[:K]
        total += max(0.0, cache.empty_cost(q.id) - sum(vals))
    return total


def simulated_greedy_lower_bound(w: Workload, table: MciTable, K: int, cache: CostCache,
                                 pool: Optional[Iterable[str]] = None) -> LowerBound:
    """Greedy over a frozen table picking the largest positive u(W, z).

    With the table frozen this is exactly the top-K of u(W, z); the loop
    below is kept literal so it can serve as a reference for the fast path.
    """
    candidates = sorted(w.index_ids if pool is None else pool)
    chosen: list = []
    total = 0.0
    remaining = list(candidates)
    while remaining and len(chosen) < K:
        best, best_u = None, 0.0
        for z in remaining:
            uw = sum(table.get(qid, z) for qid in w.relevant_queries[z])
            if uw > best_u:
                best, best_u = z, uw
        if best is None:
            break
        chosen.append(best)
        total += best_u
        remaining.remove(best)
    return LowerBound(max(0.0, _empty_total(w, cache) - total), tuple(chosen), total)


def fast_lower_bound(w: Workload, table: MciTable, K: int, cache: CostCache,
                     pool: Optional[Iterable[str]] = None) -> LowerBound:
    top = [z for z in table.top_k(K, pool) if table.workload_u(z) > 0]
    total = sum(sum(table.get(qid, z) for qid in w.relevant_queries[z]) for z in top)
    return LowerBound(max(0.0, _empty_total(w, cache) - total), tuple(top), total)


def simulated_greedy_upper_bound(w: Workload, start: Iterable[str], cache: CostCache, K: int,
                                 pool: Optional[Iterable[str]] = None) -> tuple:
    """Extend ``start`` greedily by derived cost while it strictly drops.

    Returns (d(W, C*), C*).
    """
    config = frozenset(start)
    candidates = sorted(w.index_ids if pool is None else pool)
    per_query = {q.id: cache.derived(q.id, config) for q in w.queries}
    current = sum(per_query.values())
    while len(config) < K:
        best, best_cost, best_delta = None, current, None
        for z in candidates:
            if z in config:
                continue
            delta = {}
            for qid in w.relevant_queries[z]:
                d = cache.derived_extend(qid, config, z, per_query[qid])
                if d < per_query[qid]:
                    delta[qid] = d
            if not delta:
                continue
            cost = current - sum(per_query[qid] - d for qid, d in delta.items())
            if cost < best_cost:
                best, best_cost, best_delta = z, cost, delta
        if best is None:
            break
        config = config | {best}
        per_query.update(best_delta)
        current = sum(per_query.values())
    return current, config


# ----------------------------------------------------------- interactions

def pairwise_interaction(z1: str, z2: str, qid: str, cache: CostCache) -> Optional[float]:
    d1 = ci(qid, {z1}, cache)
    d2 = ci(qid, {z2}, cache)
    d12 = ci(qid, {z1, z2}, cache)
    if d1 is None or d2 is None or d12 is None:
        return None
    upper, lower = d1 + d2, max(d1, d2)
    if upper == lower:
        return 0.0
    return min(1.0, max(0.0, (upper - d12) / (upper - lower)))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(1.0, max(0.0, float(a @ b) / (na * nb)))


def similarity(z: str, other, qid: str, features: FeatureSpace) -> float:
    """Cosine of query-projected vectors; ``other`` is an index id or a configuration."""
    zvec = features.projected(z, qid)
    if zvec is None:
        return 0.0
    if isinstance(other, str):
        ovec = features.projected(other, qid)
        if ovec is None:
            return 0.0
    else:
        ovec = features.projected_config(other, qid)
    return _cosine(zvec, ovec)


def _mcts_average(qid: str, z: str, u: float, cache: CostCache, features: FeatureSpace,
                  tau: float) -> float:
    known = []
    for other in sorted(cache.workload.omega(qid)):
        if other == z:
            continue
        d = ci(qid, {other}, cache)
        if d is not None and similarity(other, z, qid, features) > tau:
            known.append(d)
    if not known:
        return u
    return min(u, sum(known) / len(known))


def conditional_benefit(z: str, prev: Iterable[str], qid: str, table: MciTable,
                        cache: CostCache, features: FeatureSpace, tau: float,
                        algo: str = "greedy") -> float:
    u = table.get(qid, z)
    if similarity(z, frozenset(prev), qid, features) > tau:
        return 0.0
    if algo != "mcts" or ci(qid, {z}, cache) is not None:
        return u
    return _mcts_average(qid, z, u, cache, features, tau)


class InteractionModel:
    """Vectorised similarity lookups per query for the interaction-aware bound."""

    def __init__(self, w: Workload, features: Optional[FeatureSpace] = None):
        self.workload = w
        self.features = features or FeatureSpace(w)
        self.position = {z: i for i, z in enumerate(w.index_ids)}
        self.per_query = {}
        for q in w.queries:
            ids = sorted(q.candidate_ids)
            mat = np.stack([self.features.projected(z, q.id) for z in ids])
            norms = np.linalg.norm(mat, axis=1)
            pos = np.array([self.position[z] for z in ids], dtype=np.int64)
            self.per_query[q.id] = (ids, mat, norms, pos)

    def similarities(self, qid: str, cvec: np.ndarray) -> np.ndarray:
        ids, mat, norms, _ = self.per_query[qid]
        cn = float(np.linalg.norm(cvec))
        if cn == 0.0:
            return np.zeros(len(ids))
        denom = norms * cn
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = np.where(denom > 0, (mat @ cvec) / np.where(denom > 0, denom, 1.0), 0.0)
        return sims

    def base_scores(self, qid: str, table: MciTable, cache: CostCache, tau: float,
                    algo: str) -> np.ndarray:
        ids, mat, norms, _ = self.per_query[qid]
        u = np.array([table.get(qid, z) for z in ids])
        if algo != "mcts":
            return u
        singles = np.array([np.nan if (d := ci(qid, {z}, cache)) is None else d for z in ids])
        unknown = np.isnan(singles)
        if not unknown.any():
            return u
        out = u.copy()
        with np.errstate(invalid="ignore", divide="ignore"):
            gram = (mat @ mat.T) / np.where(np.outer(norms, norms) > 0, np.outer(norms, norms), 1.0)
        gram[np.outer(norms, norms) == 0] = 0.0
        for i in np.flatnonzero(unknown):
            mask = (gram[i] > tau) & ~unknown
            mask[i] = False
            if mask.any():
                out[i] = min(u[i], float(singles[mask].mean()))
        return out


def interaction_lower_bound(w: Workload, table: MciTable, K: int, cache: CostCache,
                            model: InteractionModel, tau: float, algo: str = "greedy",
                            pool: Optional[Iterable[str]] = None) -> LowerBound:
    """Simulated greedy where each query's score is the conditional benefit mu."""
    n = len(w.index_ids)
    allowed = np.zeros(n, dtype=bool)
    for z in (w.index_ids if pool is None else pool):
        allowed[model.position[z]] = True
    base = {q.id: model.base_scores(q.id, table, cache, tau, algo) for q in w.queries}
    cvecs = {q.id: np.zeros(model.per_query[q.id][1].shape[1]) for q in w.queries}
    chosen: list = []
    total = 0.0
    while len(chosen) < K:
        scores = np.zeros(n)
        for q in w.queries:
            ids, mat, norms, pos = model.per_query[q.id]
            mu = base[q.id]
            if cvecs[q.id].any():
                mu = np.where(model.similarities(q.id, cvecs[q.id]) > tau, 0.0, mu)
            np.add.at(scores, pos, mu)
        scores[~allowed] = -1.0
        best = int(np.argmax(scores))
        if not scores[best] > 0:
            break
        z = w.index_ids[best]
        chosen.append(z)
        total += float(scores[best])
        allowed[best] = False
        for qid in w.relevant_queries[z]:
            vec = model.features.projected(z, qid)
            np.maximum(cvecs[qid], vec, out=cvecs[qid])
    return LowerBound(max(0.0, _empty_total(w, cache) - total), tuple(chosen), total)


def interaction_mu_table(w: Workload, table: MciTable, cache: CostCache, model: InteractionModel,
                         tau: float, algo: str, prev: Iterable[str] = EMPTY) -> dict:
    """mu(q, z) for every pair given an already-selected configuration ``prev``."""
    out = {}
    prev = frozenset(prev)
    for q in w.queries:
        ids, mat, norms, pos = model.per_query[q.id]
        mu = model.base_scores(q.id, table, cache, tau, algo)
        cvec = model.features.projected_config(prev, q.id)
        if cvec.any():
            mu = np.where(model.similarities(q.id, cvec) > tau, 0.0, mu)
        for z, val in zip(ids, mu):
            out[(q.id, z)] = float(val)
    return out


def to_eta(w: Workload, cache: CostCache, lower: float, upper: float) -> tuple:
    empty = _empty_total(w, cache)
    return 1.0 - upper / empty, 1.0 - lower / empty


def esc_bounds(w: Workload, table: MciTable, cache: CostCache, K: int, starts: Sequence,
               mode: str = ESC_B, pool: Optional[Iterable[str]] = None,
               completion_pool: Optional[Iterable[str]] = None,
               model: Optional[InteractionModel] = None, tau: float = 0.2,
               algo: str = "greedy", general: bool = False) -> WorkloadBounds:
    """Both workload bounds for one verification.

    ``starts`` are configurations the upper-bound completion may begin from;
    the cheapest completion wins.  ``pool`` restricts the lower-bound
    simulation to indexes the final configuration can contain.
    """
    frozen = table.snapshot()
    best_u, best_cfg = None, EMPTY
    for s in starts:
        val, cfg = simulated_greedy_upper_bound(w, s, cache, K, completion_pool)
        if best_u is None or val < best_u:
            best_u, best_cfg = val, cfg
    if general:
        value = general_lower_bound(w, frozen, K, cache)
        lb = LowerBound(value, (), _empty_total(w, cache) - value)
    elif mode == ESC_I:
        if model is None:
            model = InteractionModel(w)
        lb = interaction_lower_bound(w, frozen, K, cache, model, tau, algo, pool)
    else:
        lb = fast_lower_bound(w, frozen, K, cache, pool)
    eta_l, eta_u = to_eta(w, cache, lb.value, best_u)
    return WorkloadBounds(lb.value, best_u, eta_l, eta_u, mode, best_cfg, lb.selected, lb.total)
