"""Tests for moment-weighted norms, fundamental functions, and tail bounds."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from holderclt import grand_lebesgue as gl
from holderclt.errors import (
    DomainError,
    EmptySupportError,
    KramerViolationError,
    NoCommonSupportError,
    NotInvertibleError,
    SupportBelowThetaError,
)
from holderclt.orlicz import ConvexSymbol
from holderclt.sampling import stream_normals

# sup over the clamped grid [1.001, 512] of gaussian_moment(p)/sqrt(p),
# attained at the left edge; dense-grid oracle value
GAUSS_SQRT_P_SUP = 0.797712180


def test_gaussian_moment_closed_values():
    assert gl.gaussian_moment(2.0) == pytest.approx(1.0, rel=1e-12)
    assert gl.gaussian_moment(4.0) == pytest.approx(3.0 ** 0.25, rel=1e-12)
    assert gl.gaussian_moment(1.0) == pytest.approx(np.sqrt(2.0 / np.pi), rel=1e-12)


def test_degenerate_weight_recovers_moment_norm():
    x = np.random.default_rng(0).standard_normal(5000)
    emp = gl.MomentFunction.from_samples(x)
    for r in (1.5, 2.0, 3.7):
        exact = float(np.mean(np.abs(x) ** r) ** (1.0 / r))
        got = gl.gpsi_norm(emp, gl.PsiFunction.degenerate(r))
        assert got == pytest.approx(exact, abs=1e-12 * (1 + exact))


def test_constant_variable_norm_is_c_over_inf_weight():
    c = 2.5
    got = gl.gpsi_norm(gl.MomentFunction.constant(c), gl.PsiFunction.power(0.5))
    assert got == pytest.approx(c / np.sqrt(1.0 * (1 + 1e-3)), rel=1e-9)


def test_standard_normal_sqrt_p_weight_matches_grid_oracle():
    got = gl.gpsi_norm(gl.MomentFunction.gaussian(), gl.PsiFunction.power(0.5))
    assert got == pytest.approx(GAUSS_SQRT_P_SUP, rel=1e-6)


def test_growing_ratio_into_margin_flags_infinite():
    const = gl.MomentFunction.constant(1.0)
    assert gl.gpsi_norm(const, gl.PsiFunction.power(-1.0)) == np.inf
    # gaussian p-norm grows like sqrt(p), so p^0.4 weight cannot hold it
    assert gl.gpsi_norm(gl.MomentFunction.gaussian(), gl.PsiFunction.power(0.4)) == np.inf


def test_empty_support_after_margin_clamp_raises():
    with pytest.raises(EmptySupportError):
        gl.PsiFunction.power(0.5, a=2.0, b=2.001)


def test_weight_outside_support_is_infinite():
    psi = gl.PsiFunction.power(0.5, a=2.0, b=8.0)
    assert psi(1.5) == np.inf
    assert psi(9.0) == np.inf
    assert np.isfinite(psi(4.0))


def test_support_must_start_at_one():
    with pytest.raises(DomainError):
        gl.PsiFunction.power(0.5, a=0.5)


@settings(max_examples=40, deadline=None)
@given(
    e1=st.floats(min_value=0.5, max_value=2.0),
    e2=st.floats(min_value=0.5, max_value=2.0),
)
def test_norm_antitone_in_weight(e1, e2):
    lo, hi = sorted((e1, e2))
    mg = gl.MomentFunction.gaussian()
    n_small = gl.gpsi_norm(mg, gl.PsiFunction.power(lo))
    n_big = gl.gpsi_norm(mg, gl.PsiFunction.power(hi))
    assert n_small >= n_big * (1 - 1e-9)


@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(min_value=1e-3, max_value=1e3))
def test_norm_homogeneous_in_scale(sigma):
    psi = gl.PsiFunction.power(0.5)
    base = gl.gpsi_norm(gl.MomentFunction.gaussian(), psi)
    scaled = gl.gpsi_norm(gl.MomentFunction.gaussian(sigma), psi)
    assert scaled == pytest.approx(sigma * base, rel=1e-9)


@pytest.mark.parametrize("q", [2.0, 3.0, 5.0])
@pytest.mark.parametrize("delta", [1e-4, 1e-6])
def test_fundamental_function_analytic_maximizer(q, delta):
    psi = gl.PsiFunction.power(1.0 / q)
    want = (np.e * q * np.log(1.0 / delta)) ** (-1.0 / q)
    assert gl.fundamental_function(psi, delta) == pytest.approx(want, rel=1e-9)


def test_fundamental_function_at_delta_one():
    psi = gl.PsiFunction.power(1.0 / 3.0)
    want = 1.0 / float(psi.fn(psi.grid).min())
    assert gl.fundamental_function(psi, 1.0) == pytest.approx(want, rel=1e-9)


def test_fundamental_function_degenerate_weight():
    assert gl.fundamental_function(gl.PsiFunction.degenerate(4.0), 0.3) == pytest.approx(
        0.3 ** 0.25, rel=1e-12
    )


def test_fundamental_function_monotone_and_bounded():
    psi = gl.PsiFunction.power(0.5)
    inf_psi = float(psi.fn(psi.grid).min())
    p_hi = float(psi.grid[-1])
    deltas = np.geomspace(1e-8, 1.0, 25)
    vals = [gl.fundamental_function(psi, d) for d in deltas]
    assert np.all(np.diff(vals) >= -1e-12)
    for d, v in zip(deltas, vals):
        assert v <= d ** (1.0 / p_hi) / inf_psi * (1 + 1e-9)


@pytest.mark.parametrize("delta", [0.0, -0.5, 1.0001])
def test_fundamental_function_domain_guard(delta):
    with pytest.raises(DomainError):
        gl.fundamental_function(gl.PsiFunction.power(0.5), delta)


def test_natural_psi_singleton_and_scaling():
    fam = [gl.MomentFunction.gaussian(s) for s in (0.3, 1.0, 0.7)]
    nat = gl.natural_psi(fam)
    ps = np.array([1.5, 2.0, 4.0, 16.0])
    assert np.allclose(nat(ps), gl.gaussian_moment(ps), rtol=1e-12)
    single = gl.natural_psi([gl.MomentFunction.gaussian(0.4)])
    assert np.allclose(single(ps), 0.4 * gl.gaussian_moment(ps), rtol=1e-12)


def test_natural_psi_ignores_zero_member():
    nat = gl.natural_psi([gl.MomentFunction.constant(0.0), gl.MomentFunction.gaussian()])
    assert nat(4.0) == pytest.approx(float(gl.gaussian_moment(4.0)), rel=1e-12)


def test_natural_psi_disjoint_supports_raise():
    m1 = gl.MomentFunction(fn=lambda p: np.ones(np.shape(p)), a=1.0, b=2.0)
    m2 = gl.MomentFunction(fn=lambda p: np.ones(np.shape(p)), a=3.0, b=4.0)
    with pytest.raises(NoCommonSupportError):
        gl.natural_psi([m1, m2])
    with pytest.raises(NoCommonSupportError):
        gl.natural_psi([])


def test_theta_rescaling_formula():
    psi = gl.PsiFunction.power(0.5, a=2.0)
    assert gl.psi_theta(psi, 1.0)(4.0) == pytest.approx(8.0 / 3.0, rel=1e-12)


def test_theta_rescaling_zero_is_identity():
    psi = gl.PsiFunction.power(0.5)
    assert gl.psi_theta(psi, 0.0) is psi


def test_theta_rescaling_support_guard():
    with pytest.raises(SupportBelowThetaError):
        gl.psi_theta(gl.PsiFunction.power(0.5), 1.0)
    with pytest.raises(SupportBelowThetaError):
        gl.psi_theta(gl.PsiFunction.power(0.5, a=2.0), 2.0)


def test_theta_rescaling_degenerate():
    pd = gl.psi_theta(gl.PsiFunction.degenerate(4.0), 2.0)
    assert pd.degenerate_at == 4.0
    assert pd.fn(np.array([4.0]))[0] == pytest.approx(2.0, rel=1e-12)


def test_rosenthal_weight_formula():
    psi = gl.PsiFunction.power(0.5, a=2.0)
    got = gl.psi_rosenthal(psi)(4.0)
    want = 2.0 * gl.ROSENTHAL_CONSTANT * 4.0 / (np.e * np.log(4.0))
    assert got == pytest.approx(want, rel=1e-12)
    degen = gl.psi_rosenthal(gl.PsiFunction.degenerate(4.0))
    assert degen.fn(np.array([4.0]))[0] == pytest.approx(
        gl.ROSENTHAL_CONSTANT * 4.0 / (np.e * np.log(4.0)), rel=1e-12
    )


@pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
def test_exponential_norm_of_gaussian_is_sigma(sigma):
    tau = gl.bphi_norm(gl.gaussian_mgf(sigma), ConvexSymbol.quadratic())
    assert tau == pytest.approx(sigma, rel=1e-9)


def test_exponential_norm_of_zero_variable():
    assert gl.bphi_norm(gl.empirical_mgf(np.zeros(8)), ConvexSymbol.quadratic()) == 0.0


def test_exponential_norm_flags_heavy_sample():
    # one huge outlier overflows the sample mgf at large grid lambda
    sample = np.array([-1.0, -1.0, 2.0, 100.0])
    with pytest.raises(KramerViolationError):
        gl.bphi_norm(gl.empirical_mgf(sample), ConvexSymbol.quadratic())


def test_weight_from_quadratic_symbol():
    psi = gl.psi_from_phi(ConvexSymbol.quadratic())
    for p in (2.1, 8.0, 100.0):
        assert psi(p) == pytest.approx(np.sqrt(p / 2.0), rel=1e-9)


def test_weight_from_power_symbol():
    q = 4.0
    psi = gl.psi_from_phi(ConvexSymbol(fn=lambda t: t ** q / q, name="quartic"))
    for p in (2.5, 7.0, 64.0):
        assert psi(p) == pytest.approx(p / (q * p) ** (1.0 / q), rel=1e-9)


def test_weight_symbol_inverse_identity():
    phi = ConvexSymbol.quadratic()
    lam_star = 2.5
    p = float(phi(lam_star))
    psi = gl.psi_from_phi(phi)
    assert psi(p) * lam_star == pytest.approx(p, rel=1e-9)


def test_weight_from_bounded_symbol_raises():
    grid = np.linspace(0.0, 1.0, 50)
    flat = ConvexSymbol.from_tabulation(grid, 0.5 * grid ** 2)
    with pytest.raises(NotInvertibleError):
        gl.psi_from_phi(flat)


def test_tail_bound_subgaussian_closed_form():
    # conjugate of (p/2) log p peaks at p = e^{2x-1}, giving exp(-z^2/(2e)) decay
    psi = gl.PsiFunction.power(0.5)
    for z in (2.0, 5.0, 20.0):
        want = min(1.0, 2.0 * np.exp(-np.exp(2.0 * np.log(z) - 1.0) / 2.0))
        assert gl.tail_bound(psi, 1.0, z) == pytest.approx(want, rel=1e-9)


def test_tail_bound_boundary_clamps_to_one():
    assert gl.tail_bound(gl.PsiFunction.power(0.5), 1.0, 1.0) == 1.0


def test_tail_bound_domain_guard():
    with pytest.raises(DomainError):
        gl.tail_bound(gl.PsiFunction.power(0.5), 1.0, 0.5)
    with pytest.raises(DomainError):
        gl.tail_bound(gl.PsiFunction.power(0.5), 0.0, 1.0)


def test_tail_bound_dominates_normal_tails():
    psi = gl.PsiFunction.power(0.5)
    norm = gl.gpsi_norm(gl.MomentFunction.gaussian(), psi)
    draws = stream_normals(seed=20260823, stream=0, start=0, count=1,
                           words_per_replica=10 ** 6)[0]
    zs = np.linspace(1.0, 4.0, 13)
    bounds = gl.tail_bound(psi, 1.0, zs)
    emp = np.array([(np.abs(draws) / norm > z).mean() for z in zs])
    exact = erfc(zs * norm / np.sqrt(2.0))
    assert np.all(emp <= bounds + 1e-3)
    assert np.all(exact <= bounds)


def test_young_reconstruction_matches_quadratic_growth():
    # weight sqrt(p/2) should rebuild a function growing like exp(u^2/e)
    psi = gl.psi_from_phi(ConvexSymbol.quadratic())
    young = gl.young_from_psi(psi)
    for u in (10.0, 20.0):
        ratio = np.log1p(float(young(np.array([u]))[0])) * np.e / u ** 2
        assert ratio == pytest.approx(1.0, rel=1e-2)


def test_young_reconstruction_continuity_and_custom_constant():
    psi = gl.psi_from_phi(ConvexSymbol.quadratic())
    young = gl.young_from_psi(psi)
    left = float(young(np.array([2.999]))[0])
    right = float(young(np.array([3.001]))[0])
    assert right == pytest.approx(left, rel=1e-2)
    custom = gl.young_from_psi(psi, quadratic_constant=5.0)
    # u = 1.5 is a tabulation knot, so the quadratic branch is exact there
    assert float(custom(np.array([1.5]))[0]) == pytest.approx(5.0 * 1.5 ** 2, rel=1e-9)


@pytest.mark.parametrize("sigma", [0.25, 1.0, 4.0])
def test_exponential_and_weight_norms_agree_for_gaussians(sigma):
    phi = ConvexSymbol.quadratic()
    psi = gl.psi_from_phi(phi)
    tau = gl.bphi_norm(gl.gaussian_mgf(sigma), phi)
    gnorm = gl.gpsi_norm(gl.MomentFunction.gaussian(sigma), psi)
    assert 0.1 <= tau / gnorm <= 10.0


def test_empirical_moments_match_direct_computation():
    x = np.random.default_rng(7).standard_normal(4000)
    emp = gl.MomentFunction.from_samples(x)
    for p in (1.5, 4.0, 12.0):
        want = float(np.mean(np.abs(x) ** p) ** (1.0 / p))
        assert emp(p) == pytest.approx(want, rel=1e-10)


def test_empirical_moment_standard_errors_shrink():
    rng = np.random.default_rng(11)
    small = gl.MomentFunction.from_samples(rng.standard_normal(2000))
    big = gl.MomentFunction.from_samples(rng.standard_normal(50000))
    p = np.array([4.0])
    assert small.standard_error(p)[0] > 0
    assert big.standard_error(p)[0] < small.standard_error(p)[0]
    assert big.replicas == 50000


def test_moment_monotonicity_validation():
    gl.MomentFunction.gaussian().validate_monotone()
    x = np.random.default_rng(3).standard_normal(20000)
    gl.MomentFunction.from_samples(x).validate_monotone()
    decreasing = gl.MomentFunction(fn=lambda p: 1.0 / np.asarray(p, dtype=float))
    with pytest.raises(DomainError):
        decreasing.validate_monotone()
