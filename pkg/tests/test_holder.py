"""Tests for grid-field moduli, Holder norms, and Sobolev-type audits."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.integrate import dblquad

from holderclt import holder as ho
from holderclt.errors import DegenerateError, DomainError, InputError
from holderclt.sampling import stream_normals


def line_field(n=101):
    return ho.GridField.from_function(lambda x: x, n)


def product_field(n=17):
    return ho.GridField.from_function(lambda a, b: a * b, (n, n))


def test_grid_field_validation():
    with pytest.raises(InputError):
        ho.GridField.from_values([1.0])
    with pytest.raises(InputError):
        ho.GridField.from_values([[1.0, np.inf], [0.0, 1.0]])
    f = ho.GridField.from_values(np.zeros((3, 4)))
    assert f.dim == 2 and f.shape == (3, 4)
    assert f.points().shape == (12, 2)


def test_modulus_identity_field():
    f = line_field(101)
    assert ho.modulus(f, 0.25) == pytest.approx(0.25, abs=1e-12)
    # 0.237 is not a grid distance, the modulus steps down to 23 cells
    assert ho.modulus(f, 0.237) == pytest.approx(0.23, abs=1e-12)
    assert ho.modulus(f, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert ho.modulus(f, 0.0) == 0.0


def test_modulus_constant_field():
    c = ho.GridField.from_values(np.full(31, 4.2))
    for delta in (0.0, 0.1, 1.0):
        assert ho.modulus(c, delta) == 0.0


def test_modulus_pseudometric_admits_all_pairs():
    f = ho.GridField.from_values([0.0, 5.0, 1.0])
    assert ho.modulus(f, 0.0, dist=np.zeros((3, 3))) == pytest.approx(5.0)


def test_holder_norm_identity_and_root():
    rep = ho.holder_norm(line_field(101))
    assert rep.norm == pytest.approx(2.0, abs=1e-12)
    assert rep.ratio_sup == pytest.approx(1.0, abs=1e-12)
    assert not rep.separable

    g = ho.GridField.from_function(np.sqrt, 101)
    x = g.points()[:, 0]
    droot = np.sqrt(np.abs(x[:, None] - x[None, :]))
    rep2 = ho.holder_norm(g, dist=droot)
    # |sqrt x - sqrt y| <= sqrt|x - y| with equality against 0
    assert rep2.ratio_sup == pytest.approx(1.0, abs=1e-12)
    assert rep2.norm == pytest.approx(2.0, abs=1e-12)


def test_holder_norm_constant_and_degenerate():
    rep = ho.holder_norm(ho.GridField.from_values(np.full(11, 2.5)))
    assert rep.norm == pytest.approx(2.5)
    assert rep.ratio_sup == 0.0
    assert rep.separable
    with pytest.raises(DegenerateError):
        ho.holder_norm(ho.GridField.from_values([1.0, 2.0, 3.0]),
                       dist=np.zeros((3, 3)))


def test_holder_profile_decays_under_compressed_distance():
    f = line_field(129)
    x = f.points()[:, 0]
    gaps = np.abs(x[:, None] - x[None, :])
    rep = ho.holder_norm(f, dist=gaps ** 0.4)
    assert rep.separable
    assert rep.profile[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(rep.profile) < 0)


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.float64, (9,), elements=st.floats(-5, 5)),
       hnp.arrays(np.float64, (9,), elements=st.floats(-5, 5)),
       st.floats(-3, 3))
def test_holder_norm_axioms(u, v, c):
    fu = ho.GridField.from_values(u)
    fv = ho.GridField.from_values(v)
    nu = ho.holder_norm(fu).norm
    nv = ho.holder_norm(fv).norm
    ns = ho.holder_norm(ho.GridField.from_values(u + v)).norm
    nc = ho.holder_norm(ho.GridField.from_values(c * u)).norm
    assert ns <= nu + nv + 1e-9
    assert nc == pytest.approx(abs(c) * nu, rel=1e-12, abs=1e-12)


def test_rectangle_difference_corner_formula():
    rng = np.random.default_rng(1)
    F = ho.GridField.from_values(rng.standard_normal((5, 5)))
    v = F.values
    got = ho.rectangle_difference(F, (0.25, 0.0), (0.75, 1.0))
    want = v[3, 4] - v[1, 4] - v[3, 0] + v[1, 0]
    assert got == pytest.approx(want, abs=1e-15)


def test_rectangle_difference_closed_forms():
    F = product_field(17)
    assert ho.rectangle_difference(F, (0.25, 0.5), (0.75, 1.0)) == \
        pytest.approx(0.25, abs=1e-14)
    sep = ho.GridField.from_function(lambda a, b: np.sin(a) + b ** 2, (9, 9))
    assert ho.rectangle_difference(sep, (0.0, 0.0), (1.0, 1.0)) == 0.0
    H = ho.GridField.from_function(lambda a, b, c: a * b * c, (9, 9, 9))
    got = ho.rectangle_difference(H, (0.25, 0.0, 0.5), (0.75, 0.5, 1.0))
    assert got == pytest.approx(0.125, abs=1e-14)


def test_rectangle_difference_off_grid_point_rejected():
    with pytest.raises(InputError):
        ho.rectangle_difference(product_field(17), (0.3, 0.0), (1.0, 1.0))


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.float64, (4, 4), elements=st.floats(-3, 3)),
       hnp.arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_rectangle_difference_linear(u, v):
    x, y = (0.0, 1 / 3), (1.0, 2 / 3)
    bu = ho.rectangle_difference(ho.GridField.from_values(u), x, y)
    bv = ho.rectangle_difference(ho.GridField.from_values(v), x, y)
    bs = ho.rectangle_difference(ho.GridField.from_values(u + v), x, y)
    assert bs == pytest.approx(bu + bv, abs=1e-12)


def test_rectangle_difference_axis_swap_flips_sign():
    rng = np.random.default_rng(3)
    F = ho.GridField.from_values(rng.standard_normal((5, 5, 5)))
    a = ho.rectangle_difference(F, (0.0, 0.25, 0.5), (1.0, 0.75, 1.0))
    b = ho.rectangle_difference(F, (1.0, 0.25, 0.5), (0.0, 0.75, 1.0))
    assert a == pytest.approx(-b, abs=1e-14)


def test_rectangle_difference_fewer_coordinates_vanishes():
    G = ho.GridField.from_function(lambda a, b, c: a * c, (5, 5, 5))
    assert ho.rectangle_difference(G, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0)) == 0.0


def test_rectangle_difference_matches_mixed_partial_integral():
    F = ho.GridField.from_function(lambda a, b: np.sin(a * b), (33, 33))
    x1, x2, y1, y2 = 0.25, 0.125, 0.875, 0.75
    box = ho.rectangle_difference(F, (x1, x2), (y1, y2))
    val, err = dblquad(lambda t, s: np.cos(s * t) - s * t * np.sin(s * t),
                       x1, y1, x2, y2)
    assert box == pytest.approx(val, abs=max(1e-10, 10 * err))


def test_rectangle_modulus_product_field():
    F = product_field(17)
    assert ho.rectangle_modulus(F, [0.5, 0.25]) == pytest.approx(0.125, abs=1e-14)
    assert ho.rectangle_modulus(F, [0.0, 0.5]) == 0.0
    assert ho.rectangle_modulus(F, [1.0, 1.0]) == pytest.approx(1.0, abs=1e-14)
    C = ho.GridField.from_values(np.full((9, 9), 3.3))
    assert ho.rectangle_modulus(C, [1.0, 1.0]) == 0.0


def test_rectangle_holder_norm_product_field():
    F = product_field(17)
    rep = ho.rectangle_holder_norm(F, ho.ModulusSpec.rectangle_power([1, 1]))
    assert rep.ratio_sup == pytest.approx(1.0, abs=1e-12)
    assert rep.norm == pytest.approx(2.0, abs=1e-12)
    assert not rep.separable
    rep2 = ho.rectangle_holder_norm(F, ho.ModulusSpec.rectangle_power([0.5, 0.5]))
    # ratio sqrt(d1 d2) peaks at delta = (1, 1)
    assert rep2.ratio_sup == pytest.approx(1.0, abs=1e-12)
    assert rep2.separable


def test_rectangle_holder_norm_constant():
    C = ho.GridField.from_values(np.full((9, 9), 1.25))
    rep = ho.rectangle_holder_norm(C, ho.ModulusSpec.rectangle_power([1, 1]))
    assert rep.norm == pytest.approx(1.25)
    assert rep.ratio_sup == 0.0


def test_rectangle_holder_norm_rejects_bad_moduli():
    F = product_field(9)
    with pytest.raises(InputError):
        ho.rectangle_holder_norm(F, ho.ModulusSpec.uniform_power(1.0))
    vanishing = ho.ModulusSpec(kind="rectangle",
                               fn=lambda d: max(d[0] - 0.5, 0.0) * d[1])
    with pytest.raises(DegenerateError):
        ho.rectangle_holder_norm(F, vanishing)


def test_modulus_spec_validation():
    ho.ModulusSpec.rectangle_power([0.5, 1.0]).validate(dim=2)
    ho.ModulusSpec.uniform_power(0.5).validate()
    with pytest.raises(DegenerateError):
        ho.ModulusSpec(kind="rectangle",
                       fn=lambda d: max(d[0] - 0.5, 0.0) * d[1]).validate(dim=2)
    with pytest.raises(InputError):
        ho.ModulusSpec(kind="rectangle", fn=lambda d: float(np.sum(d))
                       ).validate(dim=2)


@settings(max_examples=20, deadline=None)
@given(hnp.arrays(np.float64, (7, 7), elements=st.floats(-4, 4)),
       hnp.arrays(np.float64, (7, 7), elements=st.floats(-4, 4)))
def test_rectangle_holder_norm_axioms(u, v):
    om = ho.ModulusSpec.rectangle_power([0.5, 0.5])
    nu = ho.rectangle_holder_norm(ho.GridField.from_values(u), om).norm
    nv = ho.rectangle_holder_norm(ho.GridField.from_values(v), om).norm
    ns = ho.rectangle_holder_norm(ho.GridField.from_values(u + v), om).norm
    nc = ho.rectangle_holder_norm(ho.GridField.from_values(-2.5 * u), om).norm
    assert ns <= nu + nv + 1e-9
    assert nc == pytest.approx(2.5 * nu, rel=1e-12, abs=1e-12)


def closed_form_line_norm(alpha, p):
    s = (1.0 - alpha) * p
    return (2.0 / (s * (s + 1.0))) ** (1.0 / p)


@pytest.mark.parametrize("alpha,p", [(0.5, 4.0), (0.25, 8.0)])
def test_fractional_sobolev_identity_field(alpha, p):
    f = line_field(257)
    got = ho.fractional_sobolev_norm(f, alpha, p)
    assert got == pytest.approx(closed_form_line_norm(alpha, p), rel=5e-4)


def test_fractional_sobolev_refines_with_resolution():
    want = closed_form_line_norm(0.5, 4.0)
    errs = [abs(ho.fractional_sobolev_norm(line_field(n), 0.5, 4.0) - want)
            for n in (65, 257, 1025)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_fractional_sobolev_constant_and_separable():
    assert ho.fractional_sobolev_norm(
        ho.GridField.from_values(np.full(33, 2.0)), 0.5, 4.0) == 0.0
    # additive fields have vanishing box differences, so the d >= 2
    # seminorm cannot see them
    sep = ho.GridField.from_function(lambda a, b: a + b, (17, 17))
    assert ho.fractional_sobolev_norm(sep, (0.6, 0.6), 4.0) == 0.0
    prod = product_field(17)
    assert ho.fractional_sobolev_norm(prod, (0.6, 0.6), 4.0) > 0.0


def test_fractional_sobolev_exponent_guards():
    f = line_field(33)
    for alpha, p in ((0.5, 2.0), (0.5, 1.5), (1.2, 4.0), (0.0, 4.0), (-0.1, 4.0)):
        with pytest.raises(DomainError):
            ho.fractional_sobolev_norm(f, alpha, p)


def test_grr_coefficient_values():
    assert ho.grr_coefficient(0.5, 4.0) == pytest.approx(24 * np.sqrt(2), rel=1e-12)
    got = ho.grr_coefficient((0.5, 0.5), 4.0)
    assert got == pytest.approx((24 * np.sqrt(2)) ** 2, rel=1e-12)
    with pytest.raises(DomainError):
        ho.grr_coefficient(0.2, 4.0)


def test_grr_audit_identity_and_constant():
    rep = ho.grr_audit(line_field(201), 0.5, 4.0)
    assert rep.violations == 0
    assert rep.worst_ratio < 0.1
    repc = ho.grr_audit(ho.GridField.from_values(np.full(64, 3.0)), 0.5, 4.0)
    assert repc.violations == 0
    assert repc.worst_ratio == 0.0 and repc.sobolev_norm == 0.0


def test_grr_audit_brownian_paths():
    n, reps = 513, 50
    h = 1.0 / (n - 1)
    Z = stream_normals(seed=11, stream=0, start=0, count=reps,
                       words_per_replica=n - 1)
    B = np.concatenate([np.zeros((reps, 1)),
                        np.cumsum(np.sqrt(h) * Z, axis=1)], axis=1)
    rep = ho.grr_audit_paths(B, 0.4, 8.0)
    assert rep.violations == 0
    assert rep.pairs_checked == reps * n * (n - 1) // 2
    assert rep.worst_ratio < 0.5


def test_grr_audit_paths_agrees_with_single():
    rng = np.random.default_rng(9)
    path = np.cumsum(rng.standard_normal(129)) * 0.1
    one = ho.grr_audit(ho.GridField.from_values(path), 0.4, 8.0)
    many = ho.grr_audit_paths(path[None, :], 0.4, 8.0)
    assert one.violations == many.violations
    assert one.worst_ratio == pytest.approx(many.worst_ratio, rel=1e-12)
    assert one.sobolev_norm == pytest.approx(many.sobolev_norm, rel=1e-12)


def test_grr_audit_two_dimensional_lattice():
    rep = ho.grr_audit(product_field(33), (0.6, 0.6), 8.0)
    assert rep.violations == 0
    assert 0.0 < rep.worst_ratio < 1.0


def test_field_roundtrip_and_header_guard(tmp_path):
    rng = np.random.default_rng(4)
    F = ho.GridField.from_values(rng.standard_normal((4, 6)))
    p = tmp_path / "field.grid"
    ho.save_field(F, p)
    back = ho.load_field(p)
    assert np.array_equal(back.values, F.values)
    p.write_text(p.read_text().replace("gridfield 1", "gridfield 7", 1))
    with pytest.raises(InputError):
        ho.load_field(p)


def test_profile_csv_roundtrip(tmp_path):
    p = tmp_path / "profile.csv"
    deltas = np.array([1.0, 0.5, 0.25])
    vals = np.array([0.9, 0.4, 0.15])
    ho.save_profile_csv(p, deltas, vals, header=("delta", "ratio"))
    body = np.genfromtxt(p, delimiter=",", names=True)
    assert np.array_equal(body["delta"], deltas)
    assert np.array_equal(body["ratio"], vals)
    with pytest.raises(InputError):
        ho.save_profile_csv(p, deltas, vals[:2])
