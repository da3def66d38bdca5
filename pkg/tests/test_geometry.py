"""Tests for metric-measure spaces, ball fits, and chaining distances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from holderclt import geometry as ge
from holderclt.errors import DegenerateError, DomainError, InputError, NonFiniteError
from holderclt.orlicz import EmpiricalSample, YoungFunction, orlicz_norm_batch
from holderclt.sampling import stream_normals


@pytest.fixture(scope="module")
def grid33():
    return ge.MetricMeasureSpace.uniform_grid(33)


@pytest.fixture(scope="module")
def grid2048():
    return ge.MetricMeasureSpace.uniform_grid(2048)


def test_ball_measure_grid_count():
    sp = ge.MetricMeasureSpace.uniform_grid(101)
    assert ge.ball_measure(sp, 50, 0.25) == pytest.approx(51 / 101, abs=1e-15)
    assert ge.ball_measure(sp, 3, 2.0) == pytest.approx(1.0, abs=1e-12)
    assert ge.ball_measure(sp, 7, 0.0) == pytest.approx(1 / 101, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(min_value=0, max_value=1.5), r2=st.floats(min_value=0, max_value=1.5))
def test_ball_measure_monotone_in_radius(r1, r2):
    sp = ge.MetricMeasureSpace.uniform_grid(17)
    lo, hi = sorted((r1, r2))
    assert ge.ball_measure(sp, 5, lo) <= ge.ball_measure(sp, 5, hi) + 1e-15


def test_space_validation_rejects_bad_inputs():
    pts = np.array([0.0, 0.5, 1.0])
    with pytest.raises(InputError):
        ge.MetricMeasureSpace.from_points(np.array([0.0, 0.5, 1.5]))
    good = ge.MetricMeasureSpace.from_points(pts)
    with pytest.raises(InputError):
        ge.MetricMeasureSpace(points=good.points, dist=good.dist,
                              weights=np.array([0.5, 0.2, 0.2]))
    asym = good.dist.copy()
    asym[0, 1] = 0.9
    with pytest.raises(InputError):
        ge.MetricMeasureSpace(points=good.points, dist=asym, weights=good.weights)
    bad_tri = np.array([[0.0, 1.0, 0.1], [1.0, 0.0, 0.1], [0.1, 0.1, 0.0]])
    with pytest.raises(InputError):
        ge.MetricMeasureSpace(points=good.points, dist=bad_tri, weights=good.weights)


def test_space_allows_pseudometric():
    pts = np.array([0.0, 0.5, 1.0])
    D = np.zeros((3, 3))
    sp = ge.MetricMeasureSpace(points=pts, dist=D, weights=np.full(3, 1 / 3))
    assert sp.diameter == 0.0


def test_space_text_roundtrip(tmp_path):
    sp = ge.MetricMeasureSpace.uniform_grid(9, dim=2)
    path = tmp_path / "space.mms"
    ge.save_space(sp, path)
    back = ge.load_space(path)
    assert np.array_equal(back.points, sp.points)
    assert np.array_equal(back.dist, sp.dist)
    assert np.array_equal(back.weights, sp.weights)
    text = path.read_text()
    assert text.startswith("mmspace 1\n")
    path.write_text(text.replace("mmspace 1", "mmspace 99", 1))
    with pytest.raises(InputError):
        ge.load_space(path)


def test_ball_exponent_line_grid():
    fit = ge.fit_ball_exponent(ge.MetricMeasureSpace.uniform_grid(1024))
    assert fit.theta == pytest.approx(2.0, rel=0.05)
    assert fit.c_theta == pytest.approx(1.0, rel=0.05)
    assert fit.residual <= 0.0


def test_ball_exponent_square_grid():
    sp = ge.MetricMeasureSpace.uniform_grid(64, dim=2)
    fit = ge.fit_ball_exponent(sp)
    assert fit.theta == pytest.approx(4.0, rel=0.05)
    assert fit.c_theta == pytest.approx(16.0 / np.pi ** 2, rel=0.05)
    assert fit.residual <= 0.0


def test_ball_exponent_bound_holds_on_fresh_radii():
    sp = ge.MetricMeasureSpace.uniform_grid(512)
    fit = ge.fit_ball_exponent(sp)
    fresh = np.geomspace(fit.radii[0] * 1.07, fit.radii[-1] / 1.07, 31)
    for r in fresh:
        m2 = min(ge.ball_measure(sp, x, r) for x in range(0, sp.n, 37)) ** 2
        assert m2 >= r ** fit.theta / fit.c_theta / 1.05


def test_ball_exponent_degenerate_space():
    with pytest.raises(DegenerateError):
        ge.fit_ball_exponent(ge.MetricMeasureSpace.from_points(np.array([0.5])))


def test_v_functional_hand_sum():
    sp = ge.MetricMeasureSpace.from_points(np.array([0.0, 0.5, 1.0]),
                                           weights=[0.2, 0.3, 0.5])
    v = ge.v_functional(np.array([1.0, 4.0, 2.0]), YoungFunction.power(2), sp.dist, sp)
    # 2 * (0.2*0.3*6^2 + 0.2*0.5*1^2 + 0.3*0.5*4^2)
    assert v == pytest.approx(9.32, abs=1e-12)


def test_v_functional_constant_is_zero(grid33):
    v = ge.v_functional(np.full(grid33.n, 1.7), YoungFunction.power(4),
                        grid33.dist, grid33)
    assert v == 0.0


def test_v_functional_callable_matches_array():
    sp = ge.MetricMeasureSpace.from_points(np.linspace(0, 1, 5))
    rng = np.random.default_rng(2)
    F = rng.standard_normal((40, 5))
    phi = YoungFunction.power(2)
    v_arr = ge.v_functional(F, phi, sp.dist, sp)

    def inc(i, j):
        return EmpiricalSample.uniform(np.abs(F[:, i] - F[:, j]))

    v_call = ge.v_functional(inc, phi, sp.dist, sp)
    assert v_call == pytest.approx(v_arr, rel=1e-12)


def test_v_functional_of_luxemburg_distance_below_one():
    # normalizing increments by their own Luxemburg norm caps each term at 1
    sp = ge.MetricMeasureSpace.from_points(np.linspace(0, 1, 12))
    rng = np.random.default_rng(5)
    F = np.cumsum(rng.standard_normal((200, 12)) * 0.1, axis=1)
    phi = YoungFunction.power(4)
    iu = np.triu_indices(sp.n, k=1)
    incs = np.abs(F[:, iu[0]] - F[:, iu[1]]).T
    norms = orlicz_norm_batch(incs, np.full(F.shape[0], 1.0 / F.shape[0]), phi)
    D = np.zeros((sp.n, sp.n))
    D[iu] = norms
    D += D.T
    v = ge.v_functional(F, phi, D, sp.with_distance(D))
    assert 0.0 < v <= 1.0


def test_v_functional_zero_distance_guard():
    pts = np.array([0.0, 0.0, 1.0])
    D = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    sp = ge.MetricMeasureSpace(points=pts, dist=D, weights=np.full(3, 1 / 3))
    with pytest.raises(NonFiniteError):
        ge.v_functional(np.array([0.0, 1.0, 2.0]), YoungFunction.power(2), D, sp)


def test_w_distance_matches_continuum_quadrature(grid2048):
    sp = grid2048
    phi = YoungFunction.power(4)
    i1 = int(round(0.375 * (sp.n - 1)))
    i2 = int(round(0.625 * (sp.n - 1)))
    x1, x2 = sp.points[i1, 0], sp.points[i2, 0]
    delta = x2 - x1

    def m_cont(r, x):
        return min(x + r, 1.0) - max(x - r, 0.0)

    oracle = 6.0 * sum(
        quad(lambda r: (4.0 / m_cont(r, x) ** 2) ** 0.25, 0, delta)[0]
        for x in (x1, x2)
    )
    got = ge.w_distance(sp, phi, None, 1.0, i1, i2)
    assert got == pytest.approx(oracle, rel=0.02)


def test_tau_distance_matches_endpoint_closed_form(grid2048):
    sp = grid2048
    phi = YoungFunction.power(4)
    j = int(round(0.25 * (sp.n - 1)))
    delta = sp.points[j, 0]
    # ball measure from the 0 endpoint is r, so the integrand is r^{-1/4}
    closed = delta ** 0.75 / 0.75
    assert ge.tau_distance(sp, phi, None, 0, j) == pytest.approx(closed, rel=0.02)


def test_w_and_tau_basic_properties(grid33):
    phi = YoungFunction.power(4)
    W = ge.w_matrix(grid33, phi, None, 1.0)
    T = ge.tau_matrix(grid33, phi, None)
    assert np.array_equal(W, W.T)
    assert np.all(np.diag(W) == 0)
    assert ge.w_distance(grid33, phi, None, 1.0, 3, 17) == pytest.approx(W[3, 17], abs=0)
    assert ge.tau_distance(grid33, phi, None, 3, 17) == pytest.approx(T[3, 17], abs=0)
    assert ge.max_triangle_violation(W) <= 1e-9 * W.max()
    assert ge.max_triangle_violation(T) <= 1e-9 * T.max()


def test_tau_monotone_in_separation(grid33):
    phi = YoungFunction.power(4)
    taus = [ge.tau_distance(grid33, phi, None, 0, j) for j in range(1, grid33.n)]
    assert np.all(np.diff(taus) >= -1e-12)


def test_classify_uniform_grid_is_majorizing(grid33):
    rep = ge.classify_measure(grid33, YoungFunction.power(4), None, 1.0)
    assert rep.weakly_majorizing and rep.minorizing and rep.majorizing
    assert np.isfinite(rep.sup_w) and rep.sup_w > 0
    assert rep.infinite_w_pairs == ()


def test_classify_single_atom_trivially_majorizing():
    sp = ge.MetricMeasureSpace.from_points(np.array([0.5]))
    rep = ge.classify_measure(sp, YoungFunction.power(4), None, 1.0)
    assert rep.weakly_majorizing and rep.minorizing and rep.majorizing
    assert rep.sup_w == 0.0


def test_classify_zero_mass_region_fails_with_witnesses():
    pts = np.linspace(0, 1, 21)
    wts = np.ones(21)
    wts[8:13] = 0.0
    wts /= wts.sum()
    sp = ge.MetricMeasureSpace.from_points(pts, weights=wts)
    rep = ge.classify_measure(sp, YoungFunction.exp_linear(), None, 1.0)
    assert not rep.minorizing and not rep.majorizing
    assert len(rep.infinite_w_pairs) > 0


def test_classification_implications_hold():
    spaces = [
        ge.MetricMeasureSpace.uniform_grid(17),
        ge.MetricMeasureSpace.from_points(np.array([0.1, 0.4, 0.9]),
                                          weights=[0.6, 0.0, 0.4]),
    ]
    for sp in spaces:
        for phi in (YoungFunction.power(3), YoungFunction.exp_linear()):
            rep = ge.classify_measure(sp, phi, None, 1.0)
            if rep.majorizing:
                assert rep.minorizing
            if rep.minorizing:
                assert rep.weakly_majorizing


@pytest.mark.parametrize("beta", [0.4, 0.5])
def test_embedding_detects_power_compression(grid33, beta):
    D = grid33.dist
    diag = ge.embedding_check(D, D ** beta)
    assert diag.embedded


def test_embedding_rejects_identity_and_scaling(grid33):
    D = grid33.dist
    assert not ge.embedding_check(D, D).embedded
    assert not ge.embedding_check(D, 2.0 * D).embedded
    profile = ge.embedding_check(D, 2.0 * D).profile
    assert np.allclose(profile, 0.5)


def test_embedding_pair_filter_restricts_pairs(grid33):
    D = grid33.dist
    keep = D <= 0.5
    diag = ge.embedding_check(D, D ** 0.4, pair_filter=keep)
    assert diag.eps_levels[0] <= 0.5 * (1 + 1e-12)


def test_lipschitz_audit_constant_and_smooth_paths(grid33):
    phi = YoungFunction.power(4)
    rep = ge.arnold_imkeller_audit(np.full(grid33.n, 3.2), grid33, phi)
    assert rep.violations == 0 and rep.worst_ratio == 0.0
    smooth = np.sin(2 * np.pi * grid33.points[:, 0])
    rep2 = ge.arnold_imkeller_audit(smooth, grid33, phi)
    assert rep2.violations == 0
    assert rep2.worst_ratio < 1.0


def test_lipschitz_audit_brownian_ensemble():
    n, reps = 257, 100
    sp = ge.MetricMeasureSpace.uniform_grid(n)
    h = 1.0 / (n - 1)
    Z = stream_normals(seed=7, stream=0, start=0, count=reps, words_per_replica=n - 1)
    B = np.concatenate([np.zeros((reps, 1)), np.cumsum(np.sqrt(h) * Z, axis=1)], axis=1)
    rep = ge.arnold_imkeller_audit(B, sp, YoungFunction.power(4))
    assert rep.violations == 0
    assert rep.pairs_checked == reps * n * (n - 1) // 2
    assert rep.worst_ratio < 0.5


def test_w_requires_positive_v(grid33):
    with pytest.raises(DomainError):
        ge.w_matrix(grid33, YoungFunction.power(4), None, 0.0)
