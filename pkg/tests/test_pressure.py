import math

import numpy as np
import pytest

from zoomrds import measures as M
from zoomrds import pressure as P
from zoomrds import system as S
from zoomrds.equilibrium import build_ulam, equilibrium_candidate
from zoomrds.errors import DomainError, ResolutionError

LOG2 = math.log(2)
LOG3 = math.log(3)
DEFAULT_EPS = [2.0 ** -4, 2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8]
DEFAULT_N = [4, 6, 8, 10, 12]


def test_separated_single_point_for_huge_eps():
    # with eps beyond the diameter no pair separates: log 1 = 0
    sys = S.doubling_system()
    word = S.sample_base(sys.base, 1, 1, seed=0)[0]
    val = P.separated_pressure(sys, P.null_potential(), 1, 0.6, word,
                               grid=4096)
    assert val == pytest.approx(0.0, abs=1e-12)


def test_separated_doubling_counts_branches():
    # oracle: the full 2-branch map has 2^n inverse branches, all mutually
    # separated (preimage gap 1/2), so the null sum is n log 2 exactly
    sys = S.doubling_system()
    word = S.sample_base(sys.base, 10, 1, seed=0)[0]
    val = P.separated_pressure(sys, P.null_potential(), 10, 2.0 ** -6, word,
                               grid=1024)
    assert val / 10 == pytest.approx(LOG2, abs=0.05)
    assert val == pytest.approx(10 * LOG2, abs=1e-9)


def test_separated_constant_shift_is_exact():
    sys = S.doubling_system()
    word = S.sample_base(sys.base, 10, 1, seed=0)[0]
    base = P.separated_pressure(sys, P.null_potential(), 10, 2.0 ** -6,
                                word, grid=1024)
    shifted = P.separated_pressure(sys, P.constant_per_symbol([0.3]), 10,
                                   2.0 ** -6, word, grid=1024)
    assert shifted == pytest.approx(base + 10 * 0.3, abs=1e-9)


def test_greedy_path_matches_certified_fast_path():
    # forcing the greedy pass on the doubling map (as if preimages could
    # merge) must reproduce the certified-count result exactly
    import dataclasses
    base = S.doubling()
    wary = dataclasses.replace(base, preimage_gap=0.0)
    sys_fast = S.deterministic_system(base)
    sys_slow = S.deterministic_system(wary)
    word = S.sample_base(sys_fast.base, 9, 1, seed=0)[0]
    fast = P.separated_pressure(sys_fast, P.null_potential(), 9, 2.0 ** -5,
                                word, grid=1024)
    slow = P.separated_pressure(sys_slow, P.null_potential(), 9, 2.0 ** -5,
                                word, grid=1024)
    assert slow == pytest.approx(fast, abs=1e-12)


def test_separated_grid_resolution_error():
    sys = S.doubling_system()
    word = S.sample_base(sys.base, 4, 1, seed=0)[0]
    with pytest.raises(ResolutionError):
        P.separated_pressure(sys, P.null_potential(), 4, 2.0 ** -6, word,
                             grid=16)


def test_separated_greedy_prunes_tent_fold_pairs():
    # tent preimages can approach each other near the fold; the greedy
    # result stays within the branch-count bound
    sys = S.deterministic_system(S.tent(2.0))
    word = S.sample_base(sys.base, 8, 1, seed=0)[0]
    val = P.separated_pressure(sys, P.null_potential(), 8, 2.0 ** -5, word,
                               grid=1024)
    assert val <= 8 * LOG2 + 1e-9
    assert val / 8 == pytest.approx(LOG2, abs=0.1)


def test_pressure_estimate_doubling():
    sys = S.doubling_system()
    est = P.pressure_estimate(sys, P.null_potential(), DEFAULT_EPS,
                              DEFAULT_N, 50, seed=1)
    assert est.value == pytest.approx(LOG2, abs=0.05)
    assert est.n_used == 12 and est.eps_used == 2.0 ** -8
    assert len(est.table) == 25
    # the constant -log 2 cancels the entropy: pressure 0
    neutralised = P.pressure_estimate(sys, P.constant_per_symbol([-LOG2]),
                                      DEFAULT_EPS, DEFAULT_N, 20, seed=1)
    assert neutralised.value == pytest.approx(0.0, abs=0.05)


def test_pressure_estimate_random_mix_matches_branch_count_oracle():
    sys = S.random_doubling_tripling()
    est = P.pressure_estimate(sys, P.null_potential(), DEFAULT_EPS,
                              DEFAULT_N, 50, seed=1)
    assert est.value == pytest.approx((LOG2 + LOG3) / 2, abs=0.05)
    # oracle: same seeded words, value per word is the mean of per-symbol
    # log branch counts
    words = S.sample_base(sys.base, 12, 50, seed=1)
    oracle = np.mean([np.mean([LOG2 if s == 0 else LOG3 for s in w])
                      for w in words])
    assert est.value == pytest.approx(float(oracle), abs=1e-9)


def test_pressure_constant_shift_within_twice_se():
    sys = S.random_doubling_tripling()
    base = P.pressure_estimate(sys, P.null_potential(),
                               [2.0 ** -4, 2.0 ** -6], [4, 8], 20, seed=2)
    for c in (-1.0, 0.5, 1.0):
        shifted = P.pressure_estimate(sys, P.constant_per_symbol([c, c]),
                                      [2.0 ** -4, 2.0 ** -6], [4, 8], 20,
                                      seed=2)
        assert abs(shifted.value - base.value - c) <= 2 * (base.se + 1e-12)


def test_pressure_monotone_in_potential():
    sys = S.doubling_system()
    lo = P.pressure_estimate(sys, P.null_potential(),
                             [2.0 ** -4, 2.0 ** -6], [4, 8], 10, seed=3)
    hi = P.pressure_estimate(sys, P.coordinate_potential(),
                             [2.0 ** -4, 2.0 ** -6], [4, 8], 10, seed=3)
    assert lo.value <= hi.value + 2 * (lo.se + hi.se + 1e-12)


def test_pressure_schedule_validation():
    sys = S.doubling_system()
    with pytest.raises(DomainError):
        P.pressure_estimate(sys, P.null_potential(), [0.1, 0.2], [4, 8],
                            5, seed=0)
    with pytest.raises(DomainError):
        P.pressure_estimate(sys, P.null_potential(), [0.2, 0.1], [8, 4],
                            5, seed=0)


def test_caratheodory_cross_checks_separated():
    sys = S.doubling_system()
    cara = P.caratheodory_pressure(sys, P.null_potential(), P.classify_all,
                                   eps=0.25, n_min=2,
                                   beta_bracket=(-1.0, 3.0), word_count=2,
                                   seed=3)
    assert abs(cara - LOG2) <= 0.1
    tri = S.tripling_system()
    cara3 = P.caratheodory_pressure(tri, P.null_potential(), P.classify_all,
                                    eps=0.25, n_min=2,
                                    beta_bracket=(-1.0, 3.0), word_count=2,
                                    seed=3)
    assert abs(cara3 - LOG3) <= 0.1


def test_caratheodory_empty_classifier_sentinel():
    sys = S.doubling_system()
    val = P.caratheodory_pressure(sys, P.null_potential(), P.classify_none,
                                  eps=0.25, n_min=2,
                                  beta_bracket=(-1.0, 3.0), word_count=1,
                                  seed=0)
    assert val == float("-inf")


def test_caratheodory_constant_shift():
    sys = S.doubling_system()
    kw = dict(eps=0.25, n_min=2, beta_bracket=(-1.0, 4.0), word_count=2,
              seed=3, sample_points=8192)
    a = P.caratheodory_pressure(sys, P.null_potential(), P.classify_all, **kw)
    b = P.caratheodory_pressure(sys, P.constant_per_symbol([0.9]),
                                P.classify_all, **kw)
    assert abs(b - a - 0.9) <= 0.1


def test_variational_check_doubling():
    sys = S.doubling_system()
    est = P.pressure_estimate(sys, P.null_potential(), DEFAULT_EPS,
                              DEFAULT_N, 20, seed=4)
    part = M.make_partition(sys.space, 64)
    ulam = equilibrium_candidate(build_ulam(sys, 64), P.null_potential(),
                                 10, 200, seed=5, label="lebesgue-ulam")
    dirac = M.dirac_candidate(sys, 0, 0.0, part, label="dirac-0")
    report = P.variational_check(sys, P.null_potential(), [ulam, dirac],
                                 est, tol=0.05)
    assert report.passed
    values = dict((e[0], e[3]) for e in report.entries)
    assert values["lebesgue-ulam"] == pytest.approx(LOG2, abs=0.05)
    assert values["dirac-0"] == pytest.approx(0.0, abs=1e-9)
    assert report.best_label == "lebesgue-ulam"
    assert abs(report.gap) <= 0.05


def test_variational_check_random_mix_ulam_candidate():
    sys = S.random_doubling_tripling()
    est = P.pressure_estimate(sys, P.null_potential(), DEFAULT_EPS,
                              DEFAULT_N, 30, seed=4)
    ulam = equilibrium_candidate(build_ulam(sys, 64), P.null_potential(),
                                 30, 200, seed=5, label="ulam")
    report = P.variational_check(sys, P.null_potential(), [ulam], est,
                                 tol=0.05)
    value = report.entries[0][3]
    assert value == pytest.approx((LOG2 + LOG3) / 2, abs=0.07)
    assert report.passed


def test_dirac_never_exceeds_pressure():
    sys = S.doubling_system()
    est = P.pressure_estimate(sys, P.null_potential(), [2.0 ** -6], [8],
                              10, seed=6)
    part = M.make_partition(sys.space, 32)
    dirac = M.dirac_candidate(sys, 0, 0.0, part, label="d0")
    report = P.variational_check(sys, P.null_potential(), [dirac], est,
                                 tol=0.05)
    assert report.entries[0][3] <= est.value + 0.05
