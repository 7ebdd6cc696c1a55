import random

from hypothesis import given, settings, strategies as st

from esctune.callbounds import (ESTIMATED, GREEDY, INITIAL, PHASE1, MciTable, apply_coverage_estimates,
                                call_bounds, ci, estimate_single_index_ci, mci_init,
                                mci_update_greedy, mci_update_two_phase, wii_should_skip)
from esctune.oracle import CostCache, CoverageOracle
from esctune.workload import EMPTY, FeatureSpace, GeneratorSpec, generate_workload


def _seeded_cache(w, oracle):
    cache = CostCache(w)
    for q in w.queries:
        cache.put(q.id, EMPTY, oracle.cost(q.id, EMPTY))
        cache.put(q.id, q.candidate_ids, oracle.cost(q.id, q.candidate_ids))
    return cache


def test_initial_bound_on_running_example(example):
    o = CoverageOracle(example)
    cache = _seeded_cache(example, o)
    table = MciTable(example)
    table.initialize(cache)
    # min(c(q, {}), ci(q, Omega_q)) = min(100, 50)
    assert table.get("q1", "z1") == 50.0 == mci_init("q1", "z1", cache)
    assert table.provenance[("q1", "z1")] == INITIAL
    cache.put("q1", {"z1"}, 70.0)
    assert mci_update_two_phase(1, EMPTY, "z1", "q1", cache, table)
    assert table.get("q1", "z1") == 30.0
    assert table.provenance[("q1", "z1")] == PHASE1


def test_greedy_refinement_on_running_example(example):
    o = CoverageOracle(example)
    cache = _seeded_cache(example, o)
    table = MciTable(example)
    table.initialize(cache)
    cache.put("q1", {"z1"}, 70.0)
    # c(q, {z1}) - c(q, {z1, z2}) = 70 - 50
    assert mci_update_greedy(frozenset({"z1"}), "z2", "q1", cache, table)
    assert table.get("q1", "z2") == 20.0
    assert table.provenance[("q1", "z2")] == GREEDY
    # phase two refuses to refine while c(W, C_{k-1}) is not fully known
    table2 = MciTable(example)
    table2.initialize(cache)
    assert not mci_update_two_phase(2, frozenset({"z1"}), "z2", "q1", cache, table2,
                                    workload_known=False)
    assert table2.get("q1", "z2") == 50.0


def test_tighten_only_lowers_and_clamps(example):
    table = MciTable(example)
    table.initialize(_seeded_cache(example, CoverageOracle(example)))
    assert not table.tighten("q1", "z1", 80.0, PHASE1)
    assert table.tighten("q1", "z1", -5.0, PHASE1)
    assert table.get("q1", "z1") == 0.0
    assert table.workload_u("z1") == 0.0


def test_table_csv_and_top_k(example):
    table = MciTable(example)
    table.initialize(_seeded_cache(example, CoverageOracle(example)))
    table.tighten("q1", "z1", 10.0, PHASE1)
    assert table.top_k(1) == ["z2"]
    assert table.to_csv().splitlines()[0] == "query_id,index_id,u,provenance"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_phase_one_bounds_dominate_every_marginal_gain(seed):
    """u(q, z) from singleton costs bounds delta(q, z, C) for every C under submodularity."""
    rng = random.Random(seed)
    w = generate_workload(GeneratorSpec(n_queries=3, n_candidates=9), seed % 200)
    o = CoverageOracle(w)
    cache = _seeded_cache(w, o)
    for q in w.queries:
        for z in q.candidate_ids:
            if rng.random() < 0.6:
                cache.put(q.id, {z}, o.cost(q.id, {z}))
    table = MciTable(w)
    table.initialize(cache)
    for q in w.queries:
        ids = sorted(q.candidate_ids)
        for _ in range(10):
            c = frozenset(z for z in ids if rng.random() < 0.4)
            for z in ids:
                gain = o.cost(q.id, c) - o.cost(q.id, c | {z})
                assert table.get(q.id, z) >= gain - 1e-9 * q.base_cost


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_call_bounds_bracket_the_true_cost(seed):
    rng = random.Random(seed)
    w = generate_workload(GeneratorSpec(n_queries=3, n_candidates=9), seed % 200)
    o = CoverageOracle(w)
    cache = _seeded_cache(w, o)
    for q in w.queries:
        for z in q.candidate_ids:
            if rng.random() < 0.5:
                cache.put(q.id, {z}, o.cost(q.id, {z}))
    table = MciTable(w)
    table.initialize(cache)
    for q in w.queries:
        c = frozenset(z for z in sorted(q.candidate_ids) if rng.random() < 0.5)
        b = call_bounds(q.id, c, table, cache)
        truth = o.cost(q.id, c)
        assert b.L <= truth + 1e-9 * q.base_cost
        assert b.U >= truth - 1e-9 * q.base_cost
        if wii_should_skip(q.id, c, table, cache, 0.05):
            assert b.U - b.L <= 0.05 * q.base_cost


def test_ci_needs_authoritative_costs(example):
    cache = CostCache(example)
    cache.put("q1", EMPTY, 100.0)
    assert ci("q1", {"z1"}, cache) is None
    cache.put("q1", {"z1"}, 70.0, authoritative=False)
    assert ci("q1", {"z1"}, cache) is None
    cache.put("q1", {"z1"}, 70.0)
    assert ci("q1", {"z1"}, cache) == 30.0


def test_coverage_estimates_stay_within_omega(example):
    o = CoverageOracle(example)
    cache = _seeded_cache(example, o)
    fs = FeatureSpace(example)
    for z in ("z1", "z2"):
        est = estimate_single_index_ci("q1", z, cache, fs)
        assert 0.0 <= est <= 50.0
    table = MciTable(example)
    table.initialize(cache)
    apply_coverage_estimates(cache, table, fs)
    assert table.get("q1", "z1") <= 50.0
    assert table.provenance[("q1", "z1")] in (INITIAL, ESTIMATED)
