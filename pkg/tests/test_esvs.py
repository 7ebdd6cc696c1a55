import math

import pytest
from hypothesis import given, strategies as st

from esctune.bounds import WorkloadBounds
from esctune.errors import ContractViolation, ValidationError
from esctune.esvs import (INVOKE, RECORD, SKIP_CONVEX, SKIP_FAST, SKIP_FLAT, SKIP_HISTORY,
                          CurveRow, EarlyStop, EsvConfig, EsvController, check_early_stop,
                          curve_to_csv, generic_decision, improvement_rate,
                          invocation_probability, latest_rate, projected_improvement, refine_cap,
                          significance)
from esctune.verify import rate_signs


def _bounds(eta_l, eta_u):
    return WorkloadBounds(100 * (1 - eta_u), 100 * (1 - eta_l), eta_l, eta_u, "EscB")


def test_rates_and_projection():
    assert improvement_rate(0.4, 200) == 0.002
    assert latest_rate(0.4, 200, 0.3, 100) == pytest.approx(0.001)
    assert projected_improvement(0.4, 200, 0.001, 300) == pytest.approx(0.5)


def test_significance():
    assert significance(0.2, 0.6, 0.5) == pytest.approx(0.25)
    assert significance(0.2, 0.6, 0.2) == pytest.approx(1.0)
    assert significance(0.5, 0.5, 0.5) == 1.0


def test_generic_decision_branches():
    # convex history: no test possible
    assert generic_decision(0.3, 200, 0.001, 0.002, 0.4, 300, 0.5) == (SKIP_CONVEX, None)
    # faster than the optimistic projection
    assert generic_decision(0.3, 200, 0.002, 0.001, 0.6, 300, 0.5)[0] == SKIP_FAST
    # below the pessimistic projection
    assert generic_decision(0.3, 200, 0.002, 0.001, 0.35, 300, 0.5)[0] == INVOKE
    # between the projections: sigma decides
    d, sig = generic_decision(0.3, 200, 0.002, 0.001, 0.48, 300, 0.5)
    assert d == SKIP_FLAT and sig == pytest.approx(0.2)
    d, sig = generic_decision(0.3, 200, 0.002, 0.001, 0.42, 300, 0.5)
    assert d == INVOKE and sig == pytest.approx(0.8)


def test_invocation_probability():
    assert invocation_probability(None, 0.05) == 1.0
    assert invocation_probability(_bounds(0.3, 0.32), 0.05) == 1.0
    assert invocation_probability(_bounds(0.3, 0.5), 0.05) == pytest.approx(0.25)


def test_check_early_stop():
    assert check_early_stop(_bounds(0.30, 0.34), 0.05)
    assert not check_early_stop(_bounds(0.30, 0.36), 0.05)
    with pytest.raises(ContractViolation):
        check_early_stop(_bounds(0.4, 0.3), 0.05)
    assert check_early_stop(_bounds(0.4, 0.3), 0.05, strict=False)


def test_refine_cap():
    assert refine_cap(0.6, 0.4, 100) == pytest.approx(0.002)
    assert refine_cap(0.3, 0.4, 100) == 0.0


def test_config_validation():
    for bad in (dict(epsilon=0), dict(scheme="x"), dict(step=0), dict(sigma=1.0)):
        with pytest.raises(ValidationError):
            EsvConfig(**bad).validate()


def _controller(scheme, bounds, mode="b", monitor=False, step=10):
    # dyadic increments keep the linear curve's rates exact
    curve = iter(range(1, 10 ** 6))
    return EsvController(EsvConfig(epsilon=0.05, scheme=scheme, step=step), lambda: bounds,
                         lambda: 2.0 ** -6 * next(curve), mode, monitor=monitor)


def test_fixed_scheme_verifies_every_grid_point_and_stops():
    ctl = _controller("fixed", _bounds(0.1, 0.5))
    for t in range(1, 31):
        ctl.on_call(t)
    assert ctl.esv_count == 3
    assert [r.decision for r in ctl.curve] == [INVOKE] * 3
    tight = _controller("fixed", _bounds(0.48, 0.5))
    with pytest.raises(EarlyStop) as stop:
        for t in range(1, 31):
            tight.on_call(t)
    assert stop.value.calls == 10 and tight.curve[-1].stopped


def test_monitor_never_stops_and_off_only_records():
    ctl = _controller("fixed", _bounds(0.48, 0.5), monitor=True)
    for t in range(1, 51):
        ctl.on_call(t)
    assert ctl.esv_count == 5 and not any(e.stop for e in ctl.esvs)
    off = _controller("fixed", _bounds(0.48, 0.5), mode="off")
    for t in range(1, 51):
        off.on_call(t)
    assert off.esv_count == 0 and len(off.curve) == 5


def test_generic_scheme_needs_history():
    ctl = _controller("generic", _bounds(0.1, 0.5), step=8)
    ctl.on_call(8)
    assert ctl.curve[0].decision == SKIP_HISTORY
    # a linear curve is never strictly concave, so nothing is invoked
    for t in range(9, 101):
        ctl.on_call(t)
    assert ctl.esv_count == 0
    assert {r.decision for r in ctl.curve[1:]} == {SKIP_CONVEX}


def test_heuristic_scheme_verifies_at_step_boundaries_only():
    ctl = _controller("heuristic", _bounds(0.1, 0.5))
    for t in range(1, 31):
        ctl.on_call(t)
    assert ctl.esv_count == 0 and all(r.decision == RECORD for r in ctl.curve)
    ctl.on_step_boundary(1, 1, 30)
    assert ctl.esv_count == 0
    ctl.on_step_boundary(2, 1, 30)
    assert ctl.esv_count == 1


def test_curve_csv_format():
    rows = [CurveRow(100, 0.5, 0.005, 0.004, INVOKE, 0.7, 1.0, 0.4, 0.6, False),
            CurveRow(200, 0.6, None, None, RECORD, stopped=True)]
    assert curve_to_csv(rows).splitlines() == [
        "calls,I,r,l,decision,sigma,lambda,etaL,etaU,stopped",
        "100,0.5,0.005,0.004,invoke,0.7,1.0,0.4,0.6,0",
        "200,0.6,,,record,,,,,1",
    ]


@given(st.floats(0.1, 0.9), st.integers(1, 500))
def test_concave_power_curves_fall_behind_their_average_rate(p, step):
    for j, r, l in rate_signs(lambda b: b ** p, step, 20 * step):
        assert l == r if j == 1 else l < r


@given(st.floats(1.1, 3.0), st.integers(1, 500))
def test_convex_power_curves_outpace_their_average_rate(p, step):
    for j, r, l in rate_signs(lambda b: b ** p, step, 20 * step):
        assert l == r if j == 1 else l > r


def test_sqrt_and_square_rates():
    assert all(l < r for j, r, l in rate_signs(math.sqrt) if j >= 2)
    assert all(l > r for j, r, l in rate_signs(lambda b: b * b) if j >= 2)
