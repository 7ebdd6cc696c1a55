import random

import pytest

from esctune.errors import ValidationError, VerificationFailure
from esctune.oracle import CoverageOracle
from esctune.verify import (SUITES, check_monotone, check_rates, check_submodular, check_theorem1,
                            check_theorem2, run_suite)
from esctune.workload import generate_workload, preset


@pytest.mark.parametrize("suite", SUITES)
def test_suites_pass_on_the_coverage_oracle(suite):
    rep = run_suite(suite, seeds=range(3), samples=300)
    assert rep.ok and rep.checked > 0
    assert rep.summary().startswith(f"{suite}: checked=")


def test_adversarial_oracle_is_caught():
    w = generate_workload(preset("default"), 0)
    bad = CoverageOracle(w, adversarial=True)
    assert check_submodular(bad, 2000, random.Random(0)).violations
    with pytest.raises(VerificationFailure) as exc:
        run_suite("submodular", seeds=[0], samples=2000, adversarial=True)
    assert exc.value.counterexamples


def test_honest_oracle_is_clean():
    w = generate_workload(preset("default"), 0)
    o = CoverageOracle(w)
    assert check_monotone(o, 500, random.Random(1)).ok
    assert check_submodular(o, 500, random.Random(1)).ok


def test_theorem_checks_on_a_few_seeds():
    assert check_theorem1(range(5)).ok
    assert check_theorem2(range(5)).ok
    assert check_rates().checked == 400


def test_unknown_suite():
    with pytest.raises(ValidationError):
        run_suite("nope")
