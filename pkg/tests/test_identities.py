import numpy as np
import pytest

from igcurv import identities as I
from igcurv import manifold_zoo as mz
from igcurv.chart_core import scale_floor
from igcurv.connections import connection_bundle
from igcurv.curvature import scalar_difference_residuals_at

from builders import harmonic_cubic_bundle

# [TRIVIAL] the registry is a fixed list; every identity passes on valid bundles.

CONDITIONAL = ("right_traceless_ricci", "divergence_free_ricci", "quasi_right_traceless_ricci",
               "conjugate_symmetry", "metric_einstein_divergence")


def test_registry_shape():
    names = list(I.REGISTRY)
    assert names[0] == "connection_duality"
    assert len(names) >= 40
    assert len(set(names)) == len(names)
    for idn in I.REGISTRY.values():
        assert idn.cls in (I.ALGEBRAIC, I.DIFFERENTIAL)
        assert idn.anchor
        assert idn.tolerance == I.TOLERANCE[idn.cls]
        assert set(idn.kinds) <= set(I.ALL_KINDS)


def run(bundle, count=4, h=1e-4):
    pts = bundle.points(count, 0)
    out = {}
    for idn in I.identities_for(bundle):
        out[idn.name] = I.evaluate(idn, bundle, pts, h)
    return out


BUNDLES = {
    "sphere": lambda: mz.sphere(1.0),
    "gaussian": mz.gaussian_family,
    "cosmo": mz.diagonal_cosmo,
    "euclidean": lambda: mz.euclidean(3),
    **{f"random_{k}": (lambda k=k: mz.random_bundle(k, 3, 21)) for k in mz.RANDOM_KINDS},
}


@pytest.mark.parametrize("name", sorted(BUNDLES))
def test_every_applicable_identity_passes(name):
    bundle = BUNDLES[name]()
    for ident, (worst, used) in run(bundle).items():
        if used:
            assert worst <= I.REGISTRY[ident].tolerance, (ident, worst)
        else:
            assert ident in CONDITIONAL, ident


def test_conditional_identities_exercised():
    results = run(harmonic_cubic_bundle({(0, 0): 0.7}, {(0, 0): -0.4}))
    for ident in CONDITIONAL[:4]:
        worst, used = results[ident]
        assert used == 4 and worst <= I.REGISTRY[ident].tolerance
    worst, used = run(mz.sphere(1.0))["metric_einstein_divergence"]
    assert used == 4 and worst <= I.REGISTRY["metric_einstein_divergence"].tolerance


def test_kind_filters():
    names = {i.name for i in I.identities_for(mz.random_bundle("general", 2, 0))}
    assert "einstein_divergence" not in names
    assert "connection_duality" in names
    stat = {i.name for i in I.identities_for(mz.random_bundle("statistical", 2, 0))}
    assert {"scalar_difference", "einstein_divergence"} <= stat


def test_corrupted_dual_fails_duality_first(general3):
    broken = connection_bundle(general3.g, general3.nabla, star=general3.nabla)
    failing = [name for name, (worst, used) in run(broken).items()
               if used and worst > I.REGISTRY[name].tolerance]
    assert failing[0] == "connection_duality"


def test_scale_floor_does_not_hide_wrong_formulas(stat3):
    ctx = I.Context(stat3, stat3.points(1, 0)[0], 1e-4)
    with scale_floor(ctx.magnitude):
        assert max(scalar_difference_residuals_at(ctx.pt, True).values()) > 1e-3


def test_magnitude_positive_on_flat():
    ctx = I.Context(mz.euclidean(2), np.zeros(2), 1e-4)
    assert ctx.magnitude == 0.0
    worst, used = I.evaluate(I.REGISTRY["curvature_duality"], ctx.bundle, [np.zeros(2)])
    assert used == 1 and worst == 0.0
