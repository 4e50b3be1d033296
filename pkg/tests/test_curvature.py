import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from igcurv import curvature as cv
from igcurv import manifold_zoo as mz
from igcurv.chart_core import ALGEBRAIC_TOL, DIFFERENTIAL_TOL, scale_floor
from igcurv.connections import equiaffine_shift, metric_density

import naive
from builders import harmonic_cubic_bundle

# ---------------------------------------------------------------- oracles
# [DERIVED] sphere of radius r: scalar curvature 2 / r^2, Ricci = g / r^2.
# [TRIVIAL] Euclidean space: every curvature component is 0.
# [DERIVED] Gaussian family: the exponential and mixture connections are flat.
# [DERIVED] central-difference residuals drop by 4 when h halves.

SPLIT_FORMS = ("split_average", "split_primal", "dual_split_average", "dual_split_primal",
               "difference_average", "difference_primal", "sum")


def pt_of(kind, dim=3, seed=3, index=0):
    b = mz.random_bundle(kind, dim, seed)
    return b, cv.CurvaturePoint(b, b.points(index + 1, seed)[index])


def floored(pt, fn, *args):
    mag = max(np.abs(pt.dg).max(), np.abs(pt.gamma).max(), np.abs(pt.dgamma).max())
    with scale_floor(mag):
        return fn(pt, *args)


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("theta", [0.4, 1.2, 2.5])
def test_sphere_scalar(radius, theta):
    b = mz.sphere(radius)
    pt = cv.CurvaturePoint(b, [theta, 0.3])
    assert pt.scalar == pytest.approx(2.0 / radius**2, abs=1e-12)
    assert np.allclose(pt.ric, pt.g / radius**2, atol=1e-12)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_euclidean_is_flat(dim):
    b = mz.euclidean(dim)
    pt = cv.CurvaturePoint(b, b.points(1, 0)[0])
    assert np.abs(pt.R).max() == 0.0
    assert np.abs(pt.ric).max() == 0.0


@pytest.mark.parametrize("kind", mz.RANDOM_KINDS)
def test_riemann_matches_loop_reference(kind):
    b, pt = pt_of(kind)
    assert np.allclose(naive.riemann(pt.gamma, pt.dgamma), pt.R, atol=1e-12)
    assert np.allclose(naive.ricci(pt.R), pt.ric, atol=1e-12)
    assert naive.scalar(pt.R, pt.g) == pytest.approx(pt.scalar, abs=1e-11)


@pytest.mark.parametrize("kind", ["statistical", "general"])
def test_riemann_from_differenced_coefficients(kind):
    b, pt = pt_of(kind)
    dgamma = naive.fd(b.nabla, pt.p, 1e-5)
    assert np.allclose(naive.riemann(pt.gamma, dgamma), pt.R, atol=1e-7)


def test_gaussian_endpoints_flat_average_curved(gaussian):
    for x in gaussian.points(10, 0):
        pt = cv.CurvaturePoint(gaussian, x)
        assert np.abs(pt.R).max() <= 1e-12
        assert np.abs(pt.R_star).max() <= 1e-12
        assert np.abs(pt.R0).max() >= 1e-3


@given(st.integers(0, 10_000), st.sampled_from(mz.RANDOM_KINDS))
def test_curvature_antisymmetry_and_duality(seed, kind):
    b, pt = pt_of(kind, 2, seed)
    assert floored(pt, lambda p: cv.curvature_antisymmetry_residual(p.R)) <= ALGEBRAIC_TOL
    assert floored(pt, cv.duality_curvature_from_point) <= ALGEBRAIC_TOL


def test_metric_antisymmetry_needs_metric_connection():
    s = mz.sphere(1.0)
    pt = cv.CurvaturePoint(s, [1.0, 0.2])
    assert cv.metric_curvature_antisymmetry_residual(pt.g, pt.R) <= 1e-14
    _, q = pt_of("statistical")
    assert cv.metric_curvature_antisymmetry_residual(q.g, q.R) > 1e-3


@pytest.mark.parametrize("kind,mode", [
    ("general", "general"), ("pre_statistical", "general"), ("dual_quasi", "general"),
    ("recovered", "general"), ("statistical", "statistical"), ("statistical", "general"),
    ("quasi_statistical", "quasi_statistical"), ("quasi_statistical", "general"),
])
@pytest.mark.parametrize("level", ["riemann", "ricci"])
def test_decompositions(kind, mode, level):
    fn = cv.decomposition_residuals_at if level == "riemann" else cv.ricci_decomposition_residuals_at
    for seed in range(3):
        _, pt = pt_of(kind, 3, seed)
        res = floored(pt, fn, mode)
        assert set(res) == set(SPLIT_FORMS)
        assert max(res.values()) <= ALGEBRAIC_TOL, res


def test_torsion_terms_are_needed():
    _, pt = pt_of("general")
    res = floored(pt, cv.decomposition_residuals_at, "statistical")
    assert max(res.values()) > 1e-3


@pytest.mark.parametrize("kind", ["statistical", "quasi_statistical", "general"])
def test_ricci_parts(kind):
    mode = kind if kind != "general" else "general"
    _, pt = pt_of(kind)
    assert max(floored(pt, cv.ricci_parts_residuals_at, mode).values()) <= ALGEBRAIC_TOL


@pytest.mark.parametrize("kind", ["statistical", "quasi_statistical"])
def test_torsion_free_ricci_parts(kind):
    _, pt = pt_of(kind)
    assert max(floored(pt, cv.quasi_ricci_parts_residuals_at).values()) <= ALGEBRAIC_TOL


def test_statistical_scalar_and_antisymmetry():
    _, pt = pt_of("statistical")
    assert max(floored(pt, cv.statistical_ricci_antisymmetry_at).values()) <= ALGEBRAIC_TOL
    assert max(floored(pt, cv.scalar_difference_residuals_at).values()) <= ALGEBRAIC_TOL


def test_scalar_difference_opposite_sign_rejected():
    _, pt = pt_of("statistical")
    assert max(floored(pt, cv.scalar_difference_residuals_at, True).values()) > 1e-3


@pytest.mark.parametrize("u,v,divergence_free", [
    ({(0, 0): 0.7}, {(0, 0): -0.4}, True),
    ({(1, 0): 0.7, (0, 0): 0.2}, {(0, 1): -0.4}, False),
])
def test_traceless_difference_forms(u, v, divergence_free):
    b = harmonic_cubic_bundle(u, v)
    for x in b.points(4, 0):
        pt = cv.CurvaturePoint(b, x)
        assert cv.right_trace_vanishes(pt)
        assert np.abs(pt.R).max() > 1e-2
        assert max(floored(pt, cv.right_traceless_residuals_at).values()) <= ALGEBRAIC_TOL
        assert floored(pt, cv.quasi_right_traceless_residual_at) <= ALGEBRAIC_TOL
        if divergence_free:
            assert max(floored(pt, cv.divergence_free_residuals_at).values()) <= ALGEBRAIC_TOL
            assert floored(pt, cv.conjugate_symmetry_residual_at) <= ALGEBRAIC_TOL


def test_random_bundles_are_not_traceless():
    _, pt = pt_of("statistical")
    assert not cv.right_trace_vanishes(pt)
    assert cv.conjugate_symmetry_residual_at(pt) is None


@given(st.integers(0, 10_000), st.floats(-2.5, 2.5), st.sampled_from(mz.RANDOM_KINDS))
def test_alpha_routes_agree(seed, alpha, kind):
    _, pt = pt_of(kind, 2, seed)
    assert floored(pt, cv.alpha_riemann_residual_at, alpha) <= ALGEBRAIC_TOL
    assert floored(pt, cv.alpha_ricci_residual_at, alpha) <= ALGEBRAIC_TOL


def test_alpha_endpoints():
    b, pt = pt_of("quasi_statistical")
    assert np.array_equal(cv.alpha_riemann(b, 1, pt.p), pt.R)
    assert np.array_equal(cv.alpha_riemann(b, -1, pt.p), pt.R_star)
    assert np.allclose(cv.alpha_ricci(b, 1, pt.p).ricci.tensor, pt.ric, atol=1e-14)


@pytest.mark.parametrize("kind", ["statistical", "quasi_statistical", "general"])
@pytest.mark.parametrize("which", ["nabla", "nabla_star"])
def test_bianchi_identities(kind, which):
    b, pt = pt_of(kind)
    conn = getattr(b, which)
    res = cv.bianchi_residuals(conn, pt.p, 1e-4, b.domain)
    assert res["first"] <= DIFFERENTIAL_TOL and res["second"] <= DIFFERENTIAL_TOL


def test_bianchi_converges_at_second_order():
    b, pt = pt_of("general")
    r = [cv.bianchi_residuals(b.nabla, pt.p, h, b.domain)["first"] for h in (1e-2, 5e-3)]
    assert 0.2 <= r[1] / r[0] <= 0.3


@pytest.mark.parametrize("kind", ["general", "quasi_statistical", "dual_quasi"])
@pytest.mark.parametrize("which", ["nabla", "nabla_star"])
def test_ricci_antisymmetry_forms(kind, which):
    b, pt = pt_of(kind)
    res = cv.ricci_antisymmetry_residuals(getattr(b, which), b.g, pt.p, 1e-4, b.domain)
    assert max(res.values()) <= DIFFERENTIAL_TOL, res


def test_ricci_antisymmetry_equiaffine_variant():
    b, pt = pt_of("general")
    shifted = equiaffine_shift(b.nabla, metric_density(b.g))
    res = cv.ricci_antisymmetry_residuals(shifted, b.g, pt.p, 1e-4, b.domain, equiaffine=True)
    assert res["torsion_form"] <= DIFFERENTIAL_TOL
    raw = cv.ricci_antisymmetry_residuals(b.nabla, b.g, pt.p, 1e-4, b.domain, equiaffine=True)
    assert raw["torsion_form"] > 1e-3


@pytest.mark.parametrize("alpha", [-0.7, 0.0, 0.4, 1.6])
def test_alpha_ricci_antisymmetry(alpha):
    b, pt = pt_of("general")
    assert cv.alpha_ricci_antisymmetry(b, alpha, pt.p, 1e-4) <= DIFFERENTIAL_TOL
