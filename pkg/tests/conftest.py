import pytest

from esctune.workload import (CandidateIndex, GeneratorSpec, IndexableColumn, Query, Workload,
                              generate_workload)

# acceptance lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def running_example() -> Workload:
    """One query of cost 100 with atoms a (30) and b (20); z1 covers a, z2 covers a and b."""
    cols = [IndexableColumn("t.a", "t", 1.0), IndexableColumn("t.b", "t", 1.0)]
    q = Query("q1", 100.0, {"t.a": 1.0, "t.b": 1.0}, frozenset({"z1", "z2"}),
              {"a": 30.0, "b": 20.0})
    z1 = CandidateIndex("z1", "t", ("t.a",), frozenset(), {"q1": frozenset({"a"})})
    z2 = CandidateIndex("z2", "t", ("t.a", "t.b"), frozenset(), {"q1": frozenset({"a", "b"})})
    return Workload([q], [z1, z2], cols)


@pytest.fixture
def example():
    return running_example()


@pytest.fixture(scope="session")
def small_workload():
    return generate_workload(GeneratorSpec(n_queries=5, n_tables=2, columns_per_table=4,
                                           n_candidates=10), 3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
