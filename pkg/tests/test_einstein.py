import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from igcurv import einstein as ei
from igcurv import manifold_zoo as mz
from igcurv.chart_core import ALGEBRAIC_TOL, DIFFERENTIAL_TOL, scale_floor
from igcurv.curvature import CurvaturePoint
from igcurv.errors import AlphaSingular, KindMismatch

# ---------------------------------------------------------------- oracles
# [DERIVED] 2D Einstein tensors vanish identically (Ric = R g / 2 for Levi-Civita).
# [DERIVED] flat FLRW-like chart -dt^2 + t^2 dx^2 in 4D: scalar 6/t^2 for a(t) = t.
# [DERIVED] trace of G is (1 - n/2) R.
# [TRIVIAL] alpha-Einstein at alpha = +-1 is G or G*.


def point(kind, dim=3, seed=4):
    b = mz.random_bundle(kind, dim, seed)
    return b, CurvaturePoint(b, b.points(1, seed)[0])


def floored(pt, fn, *args):
    mag = max(np.abs(pt.dg).max(), np.abs(pt.gamma).max(), np.abs(pt.dgamma).max())
    with scale_floor(mag):
        return fn(pt, *args)


def test_sphere_einstein_vanishes():
    b = mz.sphere(1.0)
    assert np.abs(ei.einstein_tensor(b, p=[1.0, 0.5]).tensor).max() <= 1e-14


@pytest.mark.parametrize("t", [0.7, 1.0, 1.8])
def test_cosmology_scalar(t):
    b = mz.diagonal_cosmo()
    pt = CurvaturePoint(b, [t, 0.1, -0.2, 0.3])
    assert pt.scalar == pytest.approx(6.0 / t**2, rel=1e-12)
    assert np.abs(ei.levi_civita_einstein_divergence(b, pt.p, 1e-4)).max() <= 1e-6


@pytest.mark.parametrize("kind", mz.RANDOM_KINDS)
def test_einstein_trace_and_symmetry(kind):
    _, pt = point(kind)
    for which, scal in ((ei.NABLA, pt.scalar), (ei.NABLA_STAR, pt.scalar_star)):
        g = ei.einstein_at(pt, which)
        assert np.allclose(g, g.T, rtol=0, atol=1e-14)
        assert np.einsum("ij,ij->", pt.g_inv, g) == pytest.approx((1 - 1.5) * scal, abs=1e-11)


@given(st.integers(0, 10_000), st.floats(-2, 2), st.sampled_from(mz.RANDOM_KINDS))
def test_alpha_einstein_routes(seed, alpha, kind):
    _, pt = point(kind, 2, seed)
    assert floored(pt, ei.alpha_einstein_residual_at, alpha) <= ALGEBRAIC_TOL
    assert floored(pt, ei.h_routes_residual_at) <= ALGEBRAIC_TOL


def test_alpha_einstein_endpoints():
    b, pt = point("quasi_statistical")
    assert np.array_equal(ei.alpha_einstein(b, 1, pt.p).tensor, ei.einstein_at(pt))
    assert np.array_equal(ei.alpha_einstein(b, -1, pt.p).tensor,
                          ei.einstein_at(pt, ei.NABLA_STAR))
    assert ei.alpha_einstein(b, 0.3, pt.p).source == "alpha(0.3)"
    with pytest.raises(ValueError):
        ei.alpha_einstein_at(pt, 0.3, "sideways")
    with pytest.raises(ValueError):
        ei.h_tensor_at(pt, "sideways")


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.4, 2.0])
@pytest.mark.parametrize("kind", ["statistical", "general"])
def test_stress_energy_round_trip(alpha, kind):
    _, pt = point(kind)
    assert floored(pt, ei.stress_energy_round_trip_at, alpha) <= ALGEBRAIC_TOL
    assert floored(pt, ei.stress_energy_round_trip_at, alpha, 1.0, "alternate") > 1e-3


def test_stress_energy_callable_matter_and_singular():
    b, pt = point("statistical")
    t = np.eye(3)
    fixed = ei.effective_stress_energy(b, 0.5, t, pt.p)
    assert np.allclose(fixed, ei.effective_stress_energy(b, 0.5, lambda x: t, pt.p))
    with pytest.raises(AlphaSingular):
        ei.effective_stress_energy(b, -1, t, pt.p)
    with pytest.raises(ValueError):
        ei.effective_stress_energy(b, 0.5, t, pt.p, form="other")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_statistical_divergences(seed):
    b = mz.random_bundle("statistical", 3, seed)
    rep = ei.einstein_divergence_statistical(b, b.points(1, seed)[0], 1e-4)
    assert set(rep.residuals) == {"nabla_G", "nabla_star_G_star", "nabla_star_G", "nabla_G_star"}
    assert rep.worst <= DIFFERENTIAL_TOL


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_quasi_divergences(seed):
    b = mz.random_bundle("quasi_statistical", 3, seed)
    rep = ei.einstein_divergence_quasi(b, b.points(1, seed)[0], 1e-4)
    assert rep.worst <= DIFFERENTIAL_TOL
    assert np.abs(rep.torsion_term).max() > 1e-6


def test_divergence_kind_checks(general3, stat3):
    with pytest.raises(KindMismatch):
        ei.einstein_divergence_statistical(general3, general3.points(1, 0)[0])
    with pytest.raises(KindMismatch):
        ei.einstein_divergence_quasi(stat3, stat3.points(1, 0)[0])


def test_divergence_second_order():
    b, pt = point("quasi_statistical")
    r = [ei.einstein_divergence_quasi(b, pt.p, h).residuals["nabla_star_G_star"]
         for h in (1e-2, 5e-3)]
    assert 0.2 <= r[1] / r[0] <= 0.3


@pytest.mark.parametrize("alpha", [-0.6, 0.0, 0.5])
@pytest.mark.parametrize("kind", ["statistical", "general"])
def test_alpha_divergence_blend(alpha, kind):
    b, pt = point(kind)
    d = ei.alpha_einstein_divergence(b, alpha, pt.p, 1e-4)
    assert d.residual <= DIFFERENTIAL_TOL
    assert d.alternate_residual > 1e-3
