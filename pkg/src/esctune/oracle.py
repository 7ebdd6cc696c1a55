"""What-if cost oracle, budget accounting, the cost cache and derived costs.

Costs are always keyed by the *projection* of a configuration onto the
query's candidate set: an index that is not a candidate of ``q`` cannot
change its plan, so ``c(q, C) == c(q, C & omega(q))``.  Projecting before
lookup lets the cache answer many more questions without extra calls.
"""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import BudgetExhausted, ContractViolation, ValidationError
from .workload import EMPTY, Workload, format_config


class CoverageOracle:
    """Ground truth ``c(q, C) = base_cost(q) - weight(atoms covered by C)``.

    Coverage functions are monotone and submodular, so both optimizer
    assumptions the bounds rely on hold exactly.  ``adversarial=True``
    rescales every benefit by a deterministic factor in [0.9, 1.1] keyed by
    (query, configuration), which breaks both properties in small ways.
    """

    def __init__(self, workload: Workload, adversarial: bool = False, seed: int = 0):
        self.workload = workload
        self.adversarial = adversarial
        self.seed = seed
        self._memo: dict = {}

    def project(self, qid: str, config: Iterable[str]) -> frozenset:
        if not isinstance(config, frozenset):
            config = frozenset(config)
        return config & self.workload.query_by_id[qid].candidate_ids

    def benefit(self, qid: str, config: frozenset) -> float:
        q = self.workload.query_by_id[qid]
        covered = set()
        for zid in config:
            covered |= self.workload.index_by_id[zid].coverage.get(qid, EMPTY)
        gain = sum(q.atoms[a] for a in sorted(covered))
        if self.adversarial and config:
            rng = random.Random(f"{self.seed}|{qid}|{format_config(config)}")
            gain *= rng.uniform(0.9, 1.1)
        return min(max(gain, 0.0), q.base_cost)

    def cost(self, qid: str, config: Iterable[str]) -> float:
        key = (qid, self.project(qid, config))
        hit = self._memo.get(key)
        if hit is None:
            base = self.workload.query_by_id[qid].base_cost
            hit = base - self.benefit(qid, key[1])
            self._memo[key] = hit
        return hit

    def workload_cost(self, config: Iterable[str]) -> float:
        config = frozenset(config)
        return sum(self.cost(q.id, config) for q in self.workload.queries)


@dataclass(frozen=True)
class CallRecord:
    seq: int
    query_id: str
    config: frozenset
    cost: float


class CostCache:
    """Known what-if costs per query, plus derived-cost lookups.

    Entries from skipped calls (what-if interception) are marked
    non-authoritative: they feed derived costs inside a run but never
    refine MCI bounds and never count as ground truth.
    """

    def __init__(self, workload: Workload):
        self.workload = workload
        self.entries: dict = {q.id: {} for q in workload.queries}
        # qid -> index id -> list of (rest-of-config, cost) for entries containing it
        self.by_index: dict = {q.id: {} for q in workload.queries}
        self.non_authoritative: set = set()
        self._version = {q.id: 0 for q in workload.queries}
        self._omega = {q.id: q.candidate_ids for q in workload.queries}
        self._memo: dict = {}

    def project(self, qid: str, config: Iterable[str]) -> frozenset:
        if not isinstance(config, frozenset):
            config = frozenset(config)
        return config & self._omega[qid]

    def get(self, qid: str, config: Iterable[str], authoritative: bool = False) -> Optional[float]:
        key = self.project(qid, config)
        val = self.entries[qid].get(key)
        if val is not None and authoritative and (qid, key) in self.non_authoritative:
            return None
        return val

    def has(self, qid: str, config: Iterable[str], authoritative: bool = False) -> bool:
        return self.get(qid, config, authoritative) is not None

    def put(self, qid: str, config: Iterable[str], cost: float, authoritative: bool = True) -> None:
        key = self.project(qid, config)
        known = self.entries[qid]
        if key in known:
            if (qid, key) in self.non_authoritative and authoritative:
                self.non_authoritative.discard((qid, key))
                known[key] = cost
                self._reindex(qid, key, cost)
                self._version[qid] += 1
            return
        known[key] = cost
        if not authoritative:
            self.non_authoritative.add((qid, key))
        for zid in key:
            self.by_index[qid].setdefault(zid, []).append((key - {zid}, cost))
        self._version[qid] += 1

    def _reindex(self, qid, key, cost):
        for zid in key:
            rows = self.by_index[qid][zid]
            rows[:] = [(r, cost if r | {zid} == key else c) for r, c in rows]

    def empty_cost(self, qid: str) -> float:
        val = self.entries[qid].get(EMPTY)
        if val is None:
            raise ContractViolation(f"cache lacks c({qid}, {{}})")
        return val

    def derived(self, qid: str, config: Iterable[str]) -> float:
        """min over cached subsets S of config of c(q, S)."""
        key = self.project(qid, config)
        memo = self._memo.get((qid, key))
        version = self._version[qid]
        if memo is not None and memo[0] == version:
            return memo[1]
        known = self.entries[qid]
        best = self.empty_cost(qid)
        if key in known:
            best = min(best, known[key])
        if len(known) <= 2 * len(key) + 8 or len(key) > 12:
            for s, c in known.items():
                if c < best and s <= key:
                    best = c
        else:
            idx = self.by_index[qid]
            for zid in key:
                for rest, c in idx.get(zid, ()):
                    if c < best and rest <= key:
                        best = c
        self._memo[(qid, key)] = (version, best)
        return best

    def derived_extend(self, qid: str, config: frozenset, zid: str, base: float) -> float:
        """d(q, config | {z}) given base = d(q, config); only entries holding z can help."""
        if zid not in self.workload.omega(qid):
            return base
        key = self.project(qid, config)
        best = base
        for rest, c in self.by_index[qid].get(zid, ()):
            if c < best and rest <= key:
                best = c
        return best

    def derived_workload(self, config: Iterable[str]) -> float:
        config = frozenset(config)
        return sum(self.derived(q.id, config) for q in self.workload.queries)

    def fully_known(self, config: Iterable[str], authoritative: bool = True) -> bool:
        config = frozenset(config)
        return all(self.has(q.id, config, authoritative) for q in self.workload.queries)

    def n_entries(self) -> int:
        return sum(len(v) for v in self.entries.values())


class BudgetedOracle:
    """Wraps an oracle with a what-if call budget, a call log and a cache."""

    def __init__(self, inner: CoverageOracle, budget: int, cache: Optional[CostCache] = None):
        if budget < 0:
            raise ValidationError("budget must be >= 0")
        self.inner = inner
        self.budget = int(budget)
        self.cache = cache if cache is not None else CostCache(inner.workload)
        self.call_log: list = []

    @property
    def calls_made(self) -> int:
        return len(self.call_log)

    @property
    def remaining(self) -> int:
        return self.budget - len(self.call_log)

    def exhausted(self) -> bool:
        return len(self.call_log) >= self.budget

    def whatif_cost(self, qid: str, config: Iterable[str]) -> float:
        if len(self.call_log) >= self.budget:
            raise BudgetExhausted(f"budget of {self.budget} what-if calls spent")
        key = self.inner.project(qid, config)
        cost = self.inner.cost(qid, key)
        self.call_log.append(CallRecord(len(self.call_log) + 1, qid, key, cost))
        self.cache.put(qid, key, cost)
        return cost


def derived_cost(qid: str, config: Iterable[str], cache: CostCache) -> float:
    return cache.derived(qid, config)


def derived_workload_cost(w: Workload, config: Iterable[str], cache: CostCache) -> float:
    config = frozenset(config)
    return sum(cache.derived(q.id, config) for q in w.queries)


def percentage_improvement(cost_empty: float, cost_c: float, tol: float = 1e-9) -> float:
    if not cost_empty > 0:
        raise ContractViolation(f"empty-configuration cost must be > 0, got {cost_empty}")
    if cost_c > cost_empty * (1 + tol) or cost_c < -tol * cost_empty:
        raise ContractViolation(f"cost {cost_c} outside [0, {cost_empty}]")
    return min(1.0, max(0.0, 1.0 - cost_c / cost_empty))


def calls_to_csv(call_log: Iterable[CallRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["seq", "query_id", "config_members", "cost"])
    for rec in call_log:
        writer.writerow([rec.seq, rec.query_id, format_config(rec.config), repr(rec.cost)])
    return buf.getvalue()


def replay(call_log: Iterable[CallRecord], oracle: CoverageOracle) -> list:
    """Indices of log entries whose cost the oracle no longer reproduces."""
    return [r.seq for r in call_log if oracle.cost(r.query_id, r.config) != r.cost]
