"""Call-level bounds and the table of MCI upper bounds u(q, z)."""
from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass
from typing import Iterable, Optional

from .oracle import CostCache
from .workload import EMPTY, FeatureSpace, Workload

INITIAL = "initial"
PHASE1 = "phase1-refined"
GREEDY = "greedy-refined"
ESTIMATED = "estimated"


def ci(qid: str, config: Iterable[str], cache: CostCache) -> Optional[float]:
    """Cost improvement c(q, {}) - c(q, C), or None when c(q, C) is unknown."""
    empty = cache.get(qid, EMPTY, authoritative=True)
    cost = cache.get(qid, config, authoritative=True)
    if empty is None or cost is None:
        return None
    return empty - cost


class MciTable:
    """u(q, z) for every query and each of its candidate indexes.

    Updates only ever tighten an entry.  Per-index workload sums
    ``u(W, z)`` are kept in step so the top-K lookups stay cheap.
    """

    def __init__(self, workload: Workload):
        self.workload = workload
        self.u: dict = {}
        self.provenance: dict = {}
        self.total: dict = {z: 0.0 for z in workload.index_ids}
        self.omega_ci: dict = {}

    def initialize(self, cache: CostCache) -> None:
        for q in self.workload.queries:
            empty = cache.empty_cost(q.id)
            omega_ci = ci(q.id, q.candidate_ids, cache)
            if omega_ci is None:
                omega_ci = empty
            self.omega_ci[q.id] = omega_ci
            base = max(0.0, min(empty, omega_ci))
            for zid in sorted(q.candidate_ids):
                self.u[(q.id, zid)] = base
                self.provenance[(q.id, zid)] = INITIAL
                self.total[zid] += base
            for zid in sorted(q.candidate_ids):
                single = ci(q.id, {zid}, cache)
                if single is not None:
                    self.tighten(q.id, zid, single, PHASE1)

    def get(self, qid: str, zid: str) -> float:
        return self.u.get((qid, zid), 0.0)

    def tighten(self, qid: str, zid: str, value: float, provenance: str) -> bool:
        key = (qid, zid)
        if key not in self.u:
            return False
        value = max(0.0, value)
        old = self.u[key]
        if value < old:
            self.u[key] = value
            self.provenance[key] = provenance
            self.total[zid] += value - old
            return True
        return False

    def workload_u(self, zid: str) -> float:
        return max(0.0, self.total.get(zid, 0.0))

    def recompute_totals(self) -> None:
        # guards against float drift from many incremental updates
        self.total = {z: 0.0 for z in self.workload.index_ids}
        for (qid, zid), val in self.u.items():
            self.total[zid] += val

    def top_k(self, k: int, pool: Optional[Iterable[str]] = None) -> list:
        ids = self.workload.index_ids if pool is None else sorted(pool)
        return heapq.nsmallest(k, ids, key=lambda z: (-self.workload_u(z), z))

    def snapshot(self) -> "MciTable":
        twin = MciTable.__new__(MciTable)
        twin.workload = self.workload
        twin.u = dict(self.u)
        twin.provenance = dict(self.provenance)
        twin.total = dict(self.total)
        twin.omega_ci = dict(self.omega_ci)
        return twin

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["query_id", "index_id", "u", "provenance"])
        for (qid, zid) in sorted(self.u):
            writer.writerow([qid, zid, repr(self.u[(qid, zid)]), self.provenance[(qid, zid)]])
        return buf.getvalue()


def mci_init(qid: str, zid: str, cache: CostCache) -> float:
    empty = cache.empty_cost(qid)
    omega_ci = ci(qid, cache.workload.omega(qid), cache)
    u = empty if omega_ci is None else min(empty, omega_ci)
    single = ci(qid, {zid}, cache)
    if single is not None:
        u = min(u, single)
    return max(0.0, u)


def mci_update_greedy(prev_config: frozenset, zid: str, qid: str,
                      cache: CostCache, table: MciTable) -> bool:
    """u(q, z) := c(q, C_{k-1}) - c(q, C_{k-1} + z) when both costs are known."""
    if zid in prev_config:
        return False
    before = cache.get(qid, prev_config, authoritative=True)
    after = cache.get(qid, prev_config | {zid}, authoritative=True)
    if before is None or after is None:
        return False
    return table.tighten(qid, zid, before - after, GREEDY)


def mci_update_two_phase(phase: int, prev_config: frozenset, zid: str, qid: str,
                         cache: CostCache, table: MciTable,
                         workload_known: Optional[bool] = None) -> bool:
    if phase == 1:
        single = ci(qid, {zid}, cache)
        if single is None:
            return False
        return table.tighten(qid, zid, single, PHASE1)
    if workload_known is None:
        workload_known = cache.fully_known(prev_config)
    if not workload_known:
        return False
    return mci_update_greedy(prev_config, zid, qid, cache, table)


def estimate_single_index_ci(qid: str, zid: str, cache: CostCache,
                             features: FeatureSpace) -> float:
    """Coverage estimate of ci(q, {z}) as the share of Omega_q's projected vector z covers."""
    omega_ci = ci(qid, cache.workload.omega(qid), cache)
    if omega_ci is None:
        omega_ci = cache.empty_cost(qid)
    zvec = features.projected(zid, qid)
    ovec = features.omega_projected(qid)
    denom = float(ovec @ ovec)
    if zvec is None:
        return 0.0
    if denom == 0.0:
        return omega_ci
    ratio = min(1.0, max(0.0, float(zvec @ ovec) / denom))
    return ratio * omega_ci


def apply_coverage_estimates(cache: CostCache, table: MciTable, features: FeatureSpace) -> None:
    for (qid, zid) in sorted(table.u):
        est = estimate_single_index_ci(qid, zid, cache, features)
        table.tighten(qid, zid, est, ESTIMATED)


@dataclass(frozen=True)
class CallBounds:
    L: float
    U: float


def call_lower_bound(qid: str, config: Iterable[str], table: MciTable, cache: CostCache) -> float:
    empty = cache.empty_cost(qid)
    return max(0.0, empty - sum(table.get(qid, z) for z in config))


def call_bounds(qid: str, config: Iterable[str], table: MciTable, cache: CostCache) -> CallBounds:
    config = frozenset(config)
    upper = cache.derived(qid, config)
    lower = min(call_lower_bound(qid, config, table, cache), upper)
    return CallBounds(lower, upper)


def wii_should_skip(qid: str, config: Iterable[str], table: MciTable, cache: CostCache,
                    theta: float) -> bool:
    b = call_bounds(qid, config, table, cache)
    return (b.U - b.L) <= theta * cache.empty_cost(qid)


__all__ = [
    "MciTable", "CallBounds", "ci", "mci_init", "mci_update_greedy", "mci_update_two_phase",
    "estimate_single_index_ci", "apply_coverage_estimates", "call_lower_bound", "call_bounds",
    "wii_should_skip", "INITIAL", "PHASE1", "GREEDY", "ESTIMATED",
]
