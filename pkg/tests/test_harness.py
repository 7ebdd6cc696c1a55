import csv
import io
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from esctune import harness
from esctune.errors import ValidationError
from esctune.harness import (VARIANTS, evaluate, evaluate_dirs, ground_truth_options, load_run,
                             result_dict, savings_percent, sweep, tune, write_run)
from esctune.oracle import CoverageOracle
from esctune.tuners import TunerOptions
from esctune.workload import generate_workload, preset


@pytest.fixture(scope="module")
def w():
    return generate_workload(preset("small"), 4)


@pytest.fixture(scope="module")
def opts():
    return TunerOptions(K=3, budget=400, step=10, epsilon=0.05)


def test_savings_anchor():
    assert savings_percent(1000, 2700) == pytest.approx(62.962962, abs=1e-4)
    assert savings_percent(2700, 2700) == 0.0
    with pytest.raises(ValidationError):
        savings_percent(10, 0)


@given(st.integers(0, 10 ** 6), st.integers(1, 10 ** 6))
def test_savings_stay_in_range(b, b_tilde):
    assert 0.0 <= savings_percent(b, b_tilde) <= 100.0


def test_identical_runs_lose_nothing(w, opts):
    gt = tune(w, "two-phase-greedy", opts)
    m = evaluate(gt, gt, w)
    assert m.improvement_loss == 0.0 and m.savings == 0.0 and not m.stopped_early


def test_ground_truth_must_match(w, opts):
    gt = tune(w, "two-phase-greedy", opts)
    other = tune(w, "two-phase-greedy", replace(opts, K=2))
    with pytest.raises(ValidationError):
        evaluate(other, gt, w)
    seeded = tune(w, "two-phase-greedy", replace(opts, seed=9))
    with pytest.raises(ValidationError):
        evaluate(seeded, gt, w)
    stopped = tune(w, "two-phase-greedy", replace(opts, esc="b"))
    with pytest.raises(ValidationError):
        evaluate(gt, stopped, w)
    assert ground_truth_options(replace(opts, esc="i", monitor=True)).esc == "off"


def test_evaluation_from_artifacts_matches_memory(tmp_path, w, opts):
    run = tune(w, "two-phase-greedy", replace(opts, esc="b"))
    gt = tune(w, "two-phase-greedy", opts)
    write_run(run, w, tmp_path / "run")
    write_run(gt, w, tmp_path / "gt")
    assert evaluate_dirs(str(tmp_path / "run"), str(tmp_path / "gt")) == evaluate(run, gt, w)
    data, w2, calls = load_run(str(tmp_path / "run"))
    assert data == result_dict(run, w) | {"esv_seconds": data["esv_seconds"]}
    assert w2 == w and calls == run.call_log
    for name in ("curve.csv", "calls.csv", "summary.csv", "mci.csv", "result.json"):
        assert (tmp_path / "run" / name).exists()


def test_evaluation_does_not_touch_the_runs(w, opts):
    run = tune(w, "two-phase-greedy", replace(opts, esc="b"))
    gt = tune(w, "two-phase-greedy", opts)
    before = (len(run.call_log), len(gt.call_log), run.config, gt.config)
    oracle = CoverageOracle(w)
    evaluate(run, gt, w, oracle)
    assert before == (len(run.call_log), len(gt.call_log), run.config, gt.config)


def test_load_run_rejects_other_directories(tmp_path):
    with pytest.raises(ValidationError):
        load_run(str(tmp_path))
    (tmp_path / "result.json").write_text('{"format": "x"}')
    with pytest.raises(ValidationError):
        load_run(str(tmp_path))


def test_sweep_rows_and_determinism(w, opts):
    text = sweep(w, "two-phase-greedy", opts, [0.01, 0.05], [0, 1])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2 * 2 * len(VARIANTS)
    assert {r["variant"] for r in rows} == set(VARIANTS)
    for r in rows:
        assert 0.0 <= float(r["savings"]) <= 100.0
    assert sweep(w, "two-phase-greedy", opts, [0.01, 0.05], [0, 1]) == text


def test_empty_sweep_is_just_a_header(w, opts):
    text = sweep(w, "mcts", opts, [0.05], [])
    assert text == ",".join(harness.SWEEP_HEADER) + "\n"
    timed = sweep(w, "mcts", opts, [0.05], [], timing=True)
    assert timed.rstrip().endswith("esv_seconds")


def test_unknown_variant(w, opts):
    with pytest.raises(ValidationError):
        harness.variant_options("nope", opts, "mcts", 0.05)
