"""Acceptance suite: one test per criterion, printing one line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.  The full suite takes on the order of 15-25 minutes;
the expensive benchmark artifacts are computed once and shared.
"""

import os

import pytest

from alefsi import acceptance


@pytest.fixture(scope="module")
def cache():
    return {}


@pytest.fixture
def report(request):
    # write through pytest's terminal reporter so the per-criterion lines
    # show up even for passing tests (plain print is captured)
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(line):
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        else:
            print(line)

    return emit


def check(fn, cache, report):
    res = fn(cache)
    report(res.line())
    assert res.passed, res.line()


def test_criterion_01_block_ldu_exactness(cache, report):
    check(acceptance.criterion_1, cache, report)


def test_criterion_02_jacobian_consistency(cache, report):
    check(acceptance.criterion_2, cache, report)


def test_criterion_03_newton_iteration_counts(cache, report):
    check(acceptance.criterion_3, cache, report)


def test_criterion_04_preconditioner_effectiveness(cache, report):
    check(acceptance.criterion_4, cache, report)


def test_criterion_05_rest_state_and_incompressibility(cache, report):
    check(acceptance.criterion_5, cache, report)


def test_criterion_06_mesh_admissibility(cache, report):
    check(acceptance.criterion_6, cache, report)


def test_criterion_07_planar_symmetry_3d(cache, report):
    check(acceptance.criterion_7, cache, report)


def test_criterion_08_partition_quality(cache, report):
    check(acceptance.criterion_8, cache, report)


@pytest.mark.xfail(
    (os.cpu_count() or 1) < 2,
    reason="thread-scaling speedup needs more than one CPU",
    strict=False,
)
def test_criterion_09_scaling_and_fluid_dominance(cache, report):
    check(acceptance.criterion_9, cache, report)


def test_criterion_10_solid_schur_elimination(cache, report):
    check(acceptance.criterion_10, cache, report)


def test_fast_criteria_are_deterministic():
    for fn in (acceptance.criterion_1, acceptance.criterion_10):
        a, b = fn({}), fn({})
        assert a.passed == b.passed
        assert a.detail == b.detail
