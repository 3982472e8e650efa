import math

import pytest

from zoomrds import measures as M
from zoomrds import potentials as PT
from zoomrds import pressure as P
from zoomrds import system as S
from zoomrds.equilibrium import build_ulam, equilibrium_candidate
from zoomrds.errors import PreconditionError

LOG2 = math.log(2)


@pytest.fixture(scope="module")
def sink_setup():
    sys = S.sink_system()
    part = M.make_partition(sys.space, 64)
    ueq = equilibrium_candidate(build_ulam(sys, 64), P.null_potential(),
                                5, 300, seed=1, zooming_flag="zooming-like")
    dirac_core = M.dirac_candidate(sys, 0, 1.0, part, label="dirac-core",
                                   zooming_flag="zooming-like")
    dirac_sink = M.dirac_candidate(sys, 0, 0.0, part, label="dirac-sink",
                                   zooming_flag="non-zooming-like")
    return sys, part, ueq, dirac_core, dirac_sink


def test_scale_arithmetic_unit_gap():
    # oracle: with unit gap the scale is 2 * h + 1
    sys = S.doubling_system()
    pot = PT.construct_fixed_point_potential(sys, 0.0, 0.1, LOG2)
    assert pot.params["scale"] == pytest.approx(2 * LOG2 + 1, abs=1e-12)
    # the point mass at the center integrates the scaled bump to exactly k
    part = M.make_partition(sys.space, 64)
    d0 = M.dirac_candidate(sys, 0, 0.0, part)
    assert M.birkhoff_integral(d0, pot) == pytest.approx(2 * LOG2 + 1)
    # candidates supported off the bump integrate to zero
    far = M.dirac_candidate(sys, 0, 0.5, part)
    assert M.birkhoff_integral(far, pot) == 0.0


def test_fixed_point_precondition_failure():
    pair = S.RandomSystem(base=S.BaseProcess(2, (0.5, 0.5)),
                          fibers=(S.tent(2.0), S.tent(1.8)))
    # 2/3 is fixed by the first tent branch but not by the second map
    with pytest.raises(PreconditionError):
        PT.construct_fixed_point_potential(pair, 2.0 / 3.0, 0.1, LOG2)


def test_gap_zero_when_competitor_sits_on_the_point(sink_setup):
    sys, part, _, dirac_core, _ = sink_setup
    with pytest.raises(PreconditionError):
        PT.construct_fixed_point_potential(sys, 1.0, 0.2, LOG2,
                                           non_zooming=[dirac_core])


def test_constructed_potential_gap_beats_entropy(sink_setup):
    sys, part, ueq, dirac_core, dirac_sink = sink_setup
    pot = PT.construct_fixed_point_potential(sys, 1.0, 0.2, LOG2,
                                             non_zooming=[dirac_sink])
    assert pot.params["scale"] == pytest.approx(2 * LOG2 + 1, abs=1e-12)
    report = PT.zooming_gap(sys, pot, [dirac_core, ueq], [dirac_sink])
    assert report.gap >= LOG2 - 0.05
    # testable shadow of the construction inequality: gap beats the
    # entropy budget used to choose the scale
    assert report.gap >= LOG2 - 0.05
    assert report.best_zooming[1] >= 2 * LOG2 + 1 - 1e-9


def test_null_gap_for_matched_families(sink_setup):
    sys, part, *_ = sink_setup
    a = M.dirac_candidate(sys, 0, 0.0, part, label="a",
                          zooming_flag="zooming-like")
    b = M.dirac_candidate(sys, 0, 0.0, part, label="b",
                          zooming_flag="non-zooming-like")
    report = PT.zooming_gap(sys, P.null_potential(), [a], [b])
    assert report.gap == pytest.approx(0.0, abs=1e-12)


def test_gap_invariant_under_constant_shift(sink_setup):
    sys, part, ueq, dirac_core, dirac_sink = sink_setup
    phi = P.fixed_point_bump(1.0, 0.2, scale=2.0)
    base = PT.zooming_gap(sys, phi, [dirac_core, ueq], [dirac_sink])
    shifted = PT.zooming_gap(sys, phi.shifted(0.75), [dirac_core, ueq],
                             [dirac_sink])
    assert shifted.gap == pytest.approx(base.gap, abs=1e-10)


def test_unknown_flag_excluded_with_warning(sink_setup):
    sys, part, ueq, dirac_core, dirac_sink = sink_setup
    stray = M.dirac_candidate(sys, 0, 0.25, part, label="stray")
    report = PT.zooming_gap(sys, P.null_potential(), [dirac_core, stray],
                            [dirac_sink])
    assert "stray" in report.excluded


def test_hyperbolicity_gap_positive_on_sink():
    sys = S.sink_system()
    phi0 = P.null_potential()
    rep = PT.hyperbolicity_gap(sys, phi0, lambda x: x >= 0.5,
                               sample_points=8192)
    assert math.isfinite(rep.gap) and rep.gap > 0
    assert rep.pressure_in == pytest.approx(LOG2, abs=0.15)
    assert rep.consistency <= 0.1

    bump = PT.construct_fixed_point_potential(sys, 1.0, 0.2, LOG2)
    rep2 = PT.hyperbolicity_gap(sys, bump, lambda x: x >= 0.5,
                                beta_bracket=(-1.0, 5.0), sample_points=8192)
    assert rep2.gap > rep.gap


def test_hyperbolicity_gap_sentinel_when_everything_in():
    sys = S.doubling_system()
    rep = PT.hyperbolicity_gap(sys, P.null_potential(), lambda x: True,
                               sample_points=2048)
    assert rep.gap == float("inf")
    assert rep.note


def test_positive_hyperbolicity_implies_positive_zooming_gap(sink_setup):
    # shadow of the inclusion between the two potential classes, tested
    # over the ulam-derived families
    sys, part, ueq, dirac_core, dirac_sink = sink_setup
    phi0 = P.null_potential()
    hyp = PT.hyperbolicity_gap(sys, phi0, lambda x: x >= 0.5,
                               sample_points=8192)
    assert hyp.gap > 0
    zg = PT.zooming_gap(sys, phi0, [ueq, dirac_core], [dirac_sink])
    assert zg.gap > 0
