"""Workloads, candidate indexes, feature vectors and the synthetic generator.

A configuration is a ``frozenset`` of index ids.  Everything that needs a
stable order (tie-breaking, CSV output, hashing into RNG seeds) goes through
:func:`canonical`, which sorts the ids.

The generator builds a coverage model: every query owns a set of weighted
*atoms*, each keyed by ``(column, position-class)``, and an index covers an
atom of a query when the column sits in the matching position of the index:

* ``lead``  - the column is the leading key column,
* ``key``   - the column is anywhere in the key,
* ``cover`` - the column is anywhere in the index (key or included).

On top of those, each query gets one ``<table>:access`` atom per table it
reads, covered by every index on that table that touches one of the query's
columns.  It stands in for the table scan an index replaces: two indexes on
the same table mostly compete for the same access path.

Indexes that share a leading column or key columns therefore cover the same
atoms, so the benefit of one is largely absorbed by the other.  Those are also
the pairs whose query-projected feature vectors are close, which reproduces the
"similar indexes interact strongly" behaviour the interaction-aware lower
bound relies on.  Because the cost is ``base - weight(covered atoms)`` the
resulting what-if cost function is monotone and submodular by construction.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, asdict
from typing import Iterable, Mapping, Optional

import numpy as np

from .errors import ValidationError

FORMAT = "esc-workload/1"
POSITION_CLASSES = ("lead", "key", "cover")
CLASS_FACTOR = {"lead": 1.0, "key": 0.35, "cover": 0.15}

Configuration = frozenset
EMPTY: frozenset = frozenset()


def canonical(config: Iterable[str]) -> tuple:
    return tuple(sorted(config))


def format_config(config: Iterable[str]) -> str:
    return ";".join(canonical(config))


def parse_config(text: str) -> frozenset:
    return frozenset(p for p in text.split(";") if p)


@dataclass(frozen=True)
class IndexableColumn:
    id: str
    table: str
    table_size_weight: float


@dataclass(frozen=True)
class CandidateIndex:
    id: str
    table: str
    key_columns: tuple
    included_columns: frozenset = frozenset()
    # query id -> atom ids of that query this index covers
    coverage: Mapping[str, frozenset] = field(default_factory=dict)

    @property
    def columns(self) -> frozenset:
        return frozenset(self.key_columns) | self.included_columns


@dataclass(frozen=True)
class Query:
    id: str
    base_cost: float
    referenced_columns: Mapping[str, float]
    candidate_ids: frozenset
    atoms: Mapping[str, float]


class Workload:
    """Queries, candidate indexes and indexable columns, with id lookups."""

    def __init__(self, queries, indexes, columns):
        self.queries = tuple(queries)
        self.indexes = tuple(sorted(indexes, key=lambda z: z.id))
        self.columns = tuple(columns)
        self.query_by_id = {q.id: q for q in self.queries}
        self.index_by_id = {z.id: z for z in self.indexes}
        self.column_by_id = {c.id: c for c in self.columns}
        self.column_position = {c.id: i for i, c in enumerate(self.columns)}
        self.index_ids = tuple(z.id for z in self.indexes)
        self.query_ids = tuple(q.id for q in self.queries)
        # index id -> ids of queries it is a candidate for (ascending)
        rel: dict = {z.id: [] for z in self.indexes}
        for q in self.queries:
            for zid in q.candidate_ids:
                if zid in rel:
                    rel[zid].append(q.id)
        self.relevant_queries = {k: tuple(sorted(v)) for k, v in rel.items()}
        validate_workload(self)

    def omega(self, qid: str) -> frozenset:
        return self.query_by_id[qid].candidate_ids

    def empty_cost(self) -> float:
        return sum(q.base_cost for q in self.queries)

    def __eq__(self, other):
        return isinstance(other, Workload) and to_dict(self) == to_dict(other)

    def __repr__(self):
        return (f"Workload(queries={len(self.queries)}, indexes={len(self.indexes)}, "
                f"columns={len(self.columns)})")


def validate_workload(w: Workload) -> None:
    if not w.queries:
        raise ValidationError("workload has no queries")
    if len(w.query_by_id) != len(w.queries):
        raise ValidationError("duplicate query ids")
    if len(w.index_by_id) != len(w.indexes):
        raise ValidationError("duplicate index ids")
    if len(w.column_by_id) != len(w.columns):
        raise ValidationError("duplicate column ids")
    for c in w.columns:
        if not c.table_size_weight > 0:
            raise ValidationError(f"column {c.id}: table_size_weight must be > 0")
    for z in w.indexes:
        if not z.key_columns:
            raise ValidationError(f"index {z.id}: empty key")
        if len(set(z.key_columns)) != len(z.key_columns):
            raise ValidationError(f"index {z.id}: duplicate key columns")
        if set(z.key_columns) & set(z.included_columns):
            raise ValidationError(f"index {z.id}: included columns overlap the key")
        for col in z.columns:
            if col not in w.column_by_id:
                raise ValidationError(f"index {z.id}: unknown column {col}")
            if w.column_by_id[col].table != z.table:
                raise ValidationError(f"index {z.id}: column {col} is not on table {z.table}")
        for qid, atoms in z.coverage.items():
            q = w.query_by_id.get(qid)
            if q is None:
                raise ValidationError(f"index {z.id}: coverage names unknown query {qid}")
            if z.id not in q.candidate_ids:
                raise ValidationError(f"index {z.id}: covers {qid} but is not its candidate")
            missing = set(atoms) - set(q.atoms)
            if missing:
                raise ValidationError(f"index {z.id}: unknown atoms {sorted(missing)} for {qid}")
    for q in w.queries:
        if not q.base_cost > 0:
            raise ValidationError(f"query {q.id}: base_cost must be > 0")
        if not q.candidate_ids:
            raise ValidationError(f"query {q.id}: no candidate indexes")
        for zid in q.candidate_ids:
            if zid not in w.index_by_id:
                raise ValidationError(f"query {q.id}: unknown candidate {zid}")
        for col, weight in q.referenced_columns.items():
            if col not in w.column_by_id:
                raise ValidationError(f"query {q.id}: unknown column {col}")
            if weight < 0:
                raise ValidationError(f"query {q.id}: negative column weight")
        if any(v < 0 for v in q.atoms.values()):
            raise ValidationError(f"query {q.id}: negative atom weight")
        if sum(q.atoms.values()) > q.base_cost * (1 + 1e-12):
            raise ValidationError(f"query {q.id}: atom weights exceed base cost")


# ---------------------------------------------------------------- features

def featurize_query(q: Query, w: Workload) -> np.ndarray:
    vec = np.zeros(len(w.columns))
    counts: dict = {}
    for zid in q.candidate_ids:
        for col in w.index_by_id[zid].columns:
            counts[col] = counts.get(col, 0) + 1
    for col in q.referenced_columns:
        if col not in w.column_position:
            raise ValidationError(f"query {q.id}: unresolved column {col}")
        weight = w.column_by_id[col].table_size_weight
        vec[w.column_position[col]] = weight * (1 + counts.get(col, 0))
    return vec


def featurize_index(z: CandidateIndex, w: Workload) -> np.ndarray:
    vec = np.zeros(len(w.columns))
    for k, col in enumerate(z.key_columns):
        vec[w.column_position[col]] = 0.5 ** k
    for col in z.included_columns:
        vec[w.column_position[col]] = 0.25
    return vec


def featurize_configuration(config: Iterable[str], w: Workload) -> np.ndarray:
    vec = np.zeros(len(w.columns))
    for zid in config:
        np.maximum(vec, featurize_index(w.index_by_id[zid], w), out=vec)
    return vec


class FeatureSpace:
    """Precomputed query-projected index vectors for fast similarity lookups.

    For a query ``q`` every vector is restricted to the columns ``q``
    references; all other entries vanish under the projection anyway.
    """

    def __init__(self, w: Workload):
        self.workload = w
        self._proj: dict = {}
        self._norm: dict = {}
        self._omega_vec: dict = {}
        for q in w.queries:
            qvec = featurize_query(q, w)
            support = np.flatnonzero(qvec)
            qs = qvec[support]
            proj = {}
            norms = {}
            for zid in sorted(q.candidate_ids):
                v = featurize_index(w.index_by_id[zid], w)[support] * qs
                proj[zid] = v
                norms[zid] = float(np.linalg.norm(v))
            self._proj[q.id] = proj
            self._norm[q.id] = norms
            if proj:
                self._omega_vec[q.id] = np.max(np.stack(list(proj.values())), axis=0)
            else:
                self._omega_vec[q.id] = np.zeros(len(support))

    def projected(self, zid: str, qid: str) -> Optional[np.ndarray]:
        return self._proj[qid].get(zid)

    def projected_config(self, config: Iterable[str], qid: str) -> np.ndarray:
        proj = self._proj[qid]
        vecs = [proj[z] for z in config if z in proj]
        if not vecs:
            return np.zeros(len(self._omega_vec[qid]))
        return np.max(np.stack(vecs), axis=0)

    def omega_projected(self, qid: str) -> np.ndarray:
        return self._omega_vec[qid]


# --------------------------------------------------------------- generator

@dataclass
class GeneratorSpec:
    n_queries: int = 10
    n_tables: int = 3
    columns_per_table: int = 6
    candidates_per_query: int = 3
    # exact total number of candidates; overrides candidates_per_query
    n_candidates: Optional[int] = None
    max_tables_per_query: int = 2
    max_key_columns: int = 3
    max_included_columns: int = 2
    base_cost_range: tuple = (10.0, 1000.0)
    max_improvement_fraction: float = 0.8
    # weight of the per-(query, table) access atom every index on the table covers
    access_weight: float = 1.0

    def validate(self) -> None:
        if self.n_queries < 1:
            raise ValidationError("n_queries must be >= 1")
        if self.n_tables < 1 or self.columns_per_table < 1:
            raise ValidationError("need at least one table with one column")
        if self.candidates_per_query < 1 and not self.n_candidates:
            raise ValidationError("candidates_per_query must be >= 1")
        if self.n_candidates is not None and self.n_candidates < self.n_queries:
            raise ValidationError("n_candidates must be >= n_queries")
        if self.max_key_columns < 1 or self.max_tables_per_query < 1:
            raise ValidationError("max_key_columns and max_tables_per_query must be >= 1")
        if self.max_included_columns < 0:
            raise ValidationError("max_included_columns must be >= 0")
        lo, hi = self.base_cost_range
        if not 0 < lo <= hi:
            raise ValidationError("base_cost_range must satisfy 0 < lo <= hi")
        if self.access_weight < 0:
            raise ValidationError("access_weight must be >= 0")
        if not 0 <= self.max_improvement_fraction <= 1:
            raise ValidationError("max_improvement_fraction must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: Mapping) -> "GeneratorSpec":
        data = dict(data)
        data.pop("preset", None)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown generator spec fields: {sorted(unknown)}")
        if "base_cost_range" in data:
            data["base_cost_range"] = tuple(data["base_cost_range"])
        spec = cls(**data)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base_cost_range"] = list(self.base_cost_range)
        return d


PRESETS = {
    "default": GeneratorSpec(),
    "small": GeneratorSpec(n_queries=4, n_tables=2, columns_per_table=4, candidates_per_query=3),
    "tpch-like": GeneratorSpec(
        n_queries=22, n_tables=8, columns_per_table=8, candidates_per_query=8,
        n_candidates=168, max_tables_per_query=3,
    ),
}


def preset(name: str) -> GeneratorSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return GeneratorSpec.from_dict(spec.to_dict())


def _coverage_atoms(key: tuple, included: frozenset, referenced, table: str = "",
                    access: bool = False) -> set:
    atoms = set()
    if access and any(c in referenced for c in key + tuple(included)):
        atoms.add(f"{table}:access")
    if key[0] in referenced:
        atoms.add(f"{key[0]}:lead")
    for col in key:
        if col in referenced:
            atoms.add(f"{col}:key")
            atoms.add(f"{col}:cover")
    for col in included:
        if col in referenced:
            atoms.add(f"{col}:cover")
    return atoms


def generate_workload(spec: GeneratorSpec, seed: int) -> Workload:
    spec.validate()
    rng = random.Random(seed)

    tables = [f"t{i}" for i in range(spec.n_tables)]
    table_cols = {t: [f"{t}_c{j}" for j in range(spec.columns_per_table)] for t in tables}
    columns = []
    for t in tables:
        size = round(math.exp(rng.uniform(0.0, math.log(10.0))), 6)
        columns.extend(IndexableColumn(c, t, size) for c in table_cols[t])

    lo, hi = spec.base_cost_range
    qids = [f"q{i:02d}" for i in range(spec.n_queries)]
    q_tables: dict = {}
    q_refs: dict = {}
    q_base: dict = {}
    for qid in qids:
        n_t = rng.randint(1, min(spec.max_tables_per_query, len(tables)))
        chosen = sorted(rng.sample(tables, n_t))
        refs = {}
        for t in chosen:
            n_c = rng.randint(min(2, len(table_cols[t])), min(4, len(table_cols[t])))
            for col in sorted(rng.sample(table_cols[t], n_c)):
                refs[col] = round(rng.uniform(0.5, 2.0), 3)
        q_tables[qid] = chosen
        q_refs[qid] = refs
        q_base[qid] = lo * (hi / lo) ** rng.random()

    # round-robin candidate generation, deduplicated by column layout
    layouts: dict = {}
    order: list = []
    own = {qid: 0 for qid in qids}
    target = spec.n_candidates
    per_query = spec.candidates_per_query

    def draw(qid):
        t = rng.choice(q_tables[qid])
        cols = [c for c in q_refs[qid] if c.startswith(t + "_")]
        k = rng.randint(1, min(spec.max_key_columns, len(cols)))
        key = tuple(rng.sample(cols, k))
        rest = [c for c in cols if c not in key]
        n_inc = rng.randint(0, min(spec.max_included_columns, len(rest)))
        inc = set(rng.sample(rest, n_inc))
        others = [c for c in table_cols[t] if c not in key and c not in inc and c not in cols]
        if others and len(inc) < spec.max_included_columns and rng.random() < 0.3:
            inc.add(rng.choice(others))
        return t, key, frozenset(inc)

    exhausted = set()
    while True:
        progressed = False
        for qid in qids:
            if target is not None and len(order) >= target:
                break
            if target is None and own[qid] >= per_query:
                continue
            if qid in exhausted:
                continue
            for _ in range(30):
                layout = draw(qid)
                if layout not in layouts:
                    layouts[layout] = f"z{len(order):03d}"
                    order.append(layout)
                    own[qid] += 1
                    progressed = True
                    break
            else:
                exhausted.add(qid)
        done = (len(order) >= target) if target is not None else all(
            own[q] >= per_query or q in exhausted for q in qids)
        if done or not progressed:
            break
    if target is not None and len(order) < target:
        raise ValidationError(
            f"could not generate {target} distinct candidates; only {len(order)} layouts exist")

    coverage = {layouts[lay]: {} for lay in order}
    q_atoms: dict = {qid: set() for qid in qids}
    for lay in order:
        t, key, inc = lay
        zid = layouts[lay]
        for qid in qids:
            if t not in q_tables[qid]:
                continue
            atoms = _coverage_atoms(key, inc, q_refs[qid], t, spec.access_weight > 0)
            if atoms:
                coverage[zid][qid] = frozenset(atoms)
                q_atoms[qid] |= atoms

    queries = []
    for qid in qids:
        atoms = sorted(q_atoms[qid])
        raw = {}
        for a in atoms:
            col, cls = a.rsplit(":", 1)
            if cls == "access":
                ref = spec.access_weight * sum(
                    v for c, v in q_refs[qid].items() if c.startswith(col + "_"))
            else:
                ref = q_refs[qid][col] * CLASS_FACTOR[cls]
            raw[a] = ref * rng.lognormvariate(0.0, 0.75)
        total = sum(raw.values())
        share = spec.max_improvement_fraction * rng.uniform(0.5, 1.0)
        scale = share * q_base[qid] / total if total > 0 else 0.0
        weights = {a: v * scale for a, v in raw.items()}
        cands = frozenset(z for z, cov in coverage.items() if qid in cov)
        queries.append(Query(qid, q_base[qid], q_refs[qid], cands, weights))

    # a query whose referenced tables got no usable index still needs one candidate
    indexes = []
    for lay in order:
        t, key, inc = lay
        zid = layouts[lay]
        indexes.append(CandidateIndex(zid, t, key, inc, coverage[zid]))
    orphans = [q for q in queries if not q.candidate_ids]
    if orphans:
        raise ValidationError(f"queries without candidates: {[q.id for q in orphans]}")
    return Workload(queries, indexes, columns)


# ------------------------------------------------------------------- JSON

def to_dict(w: Workload) -> dict:
    return {
        "format": FORMAT,
        "columns": [
            {"id": c.id, "table": c.table, "table_size_weight": c.table_size_weight}
            for c in w.columns
        ],
        "queries": [
            {
                "id": q.id,
                "base_cost": q.base_cost,
                "referenced_columns": dict(sorted(q.referenced_columns.items())),
                "candidate_ids": sorted(q.candidate_ids),
                "atoms": dict(sorted(q.atoms.items())),
            }
            for q in w.queries
        ],
        "indexes": [
            {
                "id": z.id,
                "table": z.table,
                "key_columns": list(z.key_columns),
                "included_columns": sorted(z.included_columns),
                "coverage": {qid: sorted(a) for qid, a in sorted(z.coverage.items())},
            }
            for z in w.indexes
        ],
    }


def from_dict(data: Mapping) -> Workload:
    if data.get("format") != FORMAT:
        raise ValidationError(f"expected format {FORMAT!r}, got {data.get('format')!r}")
    try:
        columns = [IndexableColumn(c["id"], c["table"], float(c["table_size_weight"]))
                   for c in data["columns"]]
        queries = [
            Query(q["id"], float(q["base_cost"]),
                  {k: float(v) for k, v in q["referenced_columns"].items()},
                  frozenset(q["candidate_ids"]),
                  {k: float(v) for k, v in q["atoms"].items()})
            for q in data["queries"]
        ]
        indexes = [
            CandidateIndex(z["id"], z["table"], tuple(z["key_columns"]),
                           frozenset(z.get("included_columns", ())),
                           {qid: frozenset(a) for qid, a in z.get("coverage", {}).items()})
            for z in data["indexes"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed workload file: {exc}") from exc
    return Workload(queries, indexes, columns)


def dumps(w: Workload) -> str:
    return json.dumps(to_dict(w), indent=1, sort_keys=True) + "\n"


def save(w: Workload, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(w))


def load(path) -> Workload:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(data)
