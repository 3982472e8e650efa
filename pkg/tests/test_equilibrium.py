import math

import numpy as np
import pytest

from zoomrds import equilibrium as E
from zoomrds import pressure as P
from zoomrds import system as S
from zoomrds.errors import DomainError

LOG2 = math.log(2)
LOG3 = math.log(3)


def test_doubling_four_cell_rows():
    model = E.build_ulam(S.doubling_system(), 4)
    expected = np.array([
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
    ])
    assert np.allclose(model.matrices[0], expected, atol=1e-12)


def test_tent_rows_mirror_doubling():
    model = E.build_ulam(S.deterministic_system(S.tent(2.0)), 4)
    doubling = E.build_ulam(S.doubling_system(), 4).matrices[0]
    tent = model.matrices[0]
    assert np.allclose(tent[:2], doubling[:2], atol=1e-12)
    assert np.allclose(tent[2:], doubling[:2][::-1], atol=1e-12)


def test_identity_map_gives_identity_matrix():
    model = E.build_ulam(S.deterministic_system(S.identity_map()), 8)
    assert np.allclose(model.matrices[0], np.eye(8), atol=1e-12)


def test_rows_stochastic_and_supported_on_images():
    for sys in (S.random_doubling_tripling(), S.quadratic_system(2.0),
                S.neutral_system(), S.sink_system()):
        model = E.build_ulam(sys, 32)
        for s in range(sys.base.size):
            assert np.allclose(model.matrices[s].sum(axis=1), 1.0,
                               atol=1e-10)
            # every positive entry is backed by a branch-image overlap
            fm = sys.fiber(s)
            centers = model.partition.centers()
            width = model.partition.width
            for i, j in zip(*np.nonzero(model.matrices[s] > 1e-12)):
                xs = np.linspace(centers[i] - width / 2 + 1e-9,
                                 centers[i] + width / 2 - 1e-9, 64)
                ys = fm.apply_array(xs)
                cell_lo = model.partition.lo + j * width
                hit = np.any((ys >= cell_lo - 1e-9)
                             & (ys <= cell_lo + width + 1e-9))
                assert hit, (s, i, j)


def test_cocycle_pressure_doubling_exact():
    model = E.build_ulam(S.doubling_system(), 64)
    val = E.cocycle_pressure(model, P.null_potential(), 10, 200, seed=5)
    assert val == pytest.approx(LOG2, abs=1e-6)


def test_cocycle_pressure_needs_length_ten():
    model = E.build_ulam(S.doubling_system(), 8)
    with pytest.raises(DomainError):
        E.cocycle_pressure(model, P.null_potential(), 5, 5, seed=0)


def test_cocycle_normalizer_equals_branch_count_per_step():
    # oracle: for full-branch linear maps every normaliser equals the
    # branch count exactly, so the pressure is the word-average of logs
    sys = S.random_doubling_tripling()
    model = E.build_ulam(sys, 32)
    weighted = model.weighted(P.null_potential())
    word = S.sample_base(sys.base, 50, 1, seed=6)[0]
    rho = np.full(32, 1.0 / 32)
    for s in word:
        rho = rho @ weighted[int(s)]
        z = rho.sum()
        assert z == pytest.approx(2.0 if s == 0 else 3.0, abs=1e-9)
        rho /= z


def test_cocycle_pressure_random_mix():
    model = E.build_ulam(S.random_doubling_tripling(), 64)
    val = E.cocycle_pressure(model, P.null_potential(), 200, 500, seed=5)
    assert val == pytest.approx((LOG2 + LOG3) / 2, abs=0.01)


def test_cocycle_constant_shift_exact():
    model = E.build_ulam(S.random_doubling_tripling(), 64)
    phi = P.null_potential()
    a = E.cocycle_pressure(model, phi, 20, 100, seed=5)
    b = E.cocycle_pressure(model, phi.shifted(0.7), 20, 100, seed=5)
    assert b - a == pytest.approx(0.7, abs=1e-9)


def test_deterministic_cocycle_equals_leading_eigenvalue():
    # oracle: numpy eigendecomposition of the weighted matrix
    sys = S.doubling_system()
    model = E.build_ulam(sys, 64)
    bump = P.fixed_point_bump(0.0, 0.1, scale=2.0, circle=True)
    val = E.cocycle_pressure(model, bump, 3, 400, seed=1)
    lead = max(abs(np.linalg.eigvals(model.weighted(bump)[0])))
    assert val == pytest.approx(math.log(lead), abs=1e-9)


def test_equilibrium_uniform_for_full_linear_branches():
    model = E.build_ulam(S.doubling_system(), 64)
    cand = E.equilibrium_candidate(model, P.null_potential(), 10, 300,
                                   seed=2)
    assert np.max(np.abs(cand.weights[0] - 1.0 / 64)) <= 1e-8
    model3 = E.build_ulam(S.tripling_system(), 81)
    cand3 = E.equilibrium_candidate(model3, P.null_potential(), 10, 300,
                                    seed=2)
    assert np.max(np.abs(cand3.weights[0] - 1.0 / 81)) <= 1e-8


def test_equilibrium_bump_matches_eigen_oracle():
    sys = S.doubling_system()
    model = E.build_ulam(sys, 64)
    bump = P.fixed_point_bump(0.0, 0.1, scale=3.0, circle=True)
    cand = E.equilibrium_candidate(model, bump, 10, 500, seed=7)
    oracle = E.leading_eigen_weights(model.weighted(bump)[0])
    assert np.max(np.abs(cand.weights[0] - oracle)) <= 1e-8
    # mass concentrates near the bump centre (circle cell 0 and its mirror)
    near = cand.weights[0][:4].sum() + cand.weights[0][-4:].sum()
    assert near > 0.9


def test_stationarity_defect_small_at_256_cells():
    for sys, phi in (
        (S.doubling_system(), P.null_potential()),
        (S.random_doubling_tripling(), P.null_potential()),
        (S.doubling_system(),
         P.fixed_point_bump(0.0, 0.1, scale=2.0, circle=True)),
    ):
        model = E.build_ulam(sys, 256)
        cand = E.equilibrium_candidate(model, phi, 20, 300, seed=8)
        assert E.stationarity_defect(model, phi, cand) <= 0.01


def test_free_energy_nearly_attains_cocycle_pressure():
    from zoomrds.measures import birkhoff_integral, entropy_estimate
    for sys in (S.doubling_system(), S.random_doubling_tripling()):
        model = E.build_ulam(sys, 64)
        for phi in (P.null_potential(),
                    P.fixed_point_bump(0.0, 0.1, scale=3.0, circle=True)):
            coc = E.cocycle_pressure(model, phi, 30, 300, seed=2)
            cand = E.equilibrium_candidate(model, phi, 30, 300, seed=2)
            h = entropy_estimate(cand, sys, 64, 12, 30, seed=3).value
            value = h + birkhoff_integral(cand, phi)
            assert value >= coc - 0.1


def test_support_overlap_of_identical_candidates():
    model = E.build_ulam(S.doubling_system(), 32)
    a = E.equilibrium_candidate(model, P.null_potential(), 5, 100, seed=0)
    b = E.equilibrium_candidate(model, P.null_potential(), 5, 100, seed=1)
    assert E.support_overlap(a, b) == pytest.approx(1.0)


def test_degenerate_row_flagged():
    # a plateau branch maps a whole cell onto one value
    fm = S.piecewise_linear([0.0, 0.5, 1.0], [0.0, 2.0], [0.25, -1.0])
    model = E.build_ulam(S.deterministic_system(fm), 8)
    assert any(s == 0 and cell < 4 for s, cell in model.degenerate)
    for s, cell in model.degenerate:
        assert model.matrices[s][cell].sum() == pytest.approx(1.0)
