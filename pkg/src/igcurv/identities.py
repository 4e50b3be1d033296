"""Registry of every identity the verifier checks, with its evaluator and tolerance class.

An evaluator receives a Context (bundle, point, FD step) and returns a
relative residual, or None when the identity's hypothesis fails at that point.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chart_core import ALGEBRAIC_TOL, DIFFERENTIAL_TOL, relative_residual, scale_floor
from .connections import (
    GENERAL,
    PRE_STATISTICAL,
    QUASI_STATISTICAL,
    STATISTICAL,
    alpha_connection,
    dual_connection,
    duality_residual_from_point,
    nonmetricity_from_jets,
    pre_statistical_conditions,
    quasi_statistical_residuals,
    statistical_conditions,
    torsion_from_gamma,
)
from . import curvature as cv
from . import einstein as ei

ALGEBRAIC = "algebraic"
DIFFERENTIAL = "differential"
TOLERANCE = {ALGEBRAIC: ALGEBRAIC_TOL, DIFFERENTIAL: DIFFERENTIAL_TOL}

ALL_KINDS = (GENERAL, PRE_STATISTICAL, STATISTICAL, QUASI_STATISTICAL)
TORSION_FREE = (STATISTICAL, QUASI_STATISTICAL)
TEST_ALPHAS = (0.5, -0.3)


class Context:
    """One bundle at one point, with curvature data computed on first use."""

    def __init__(self, bundle, x, h=None):
        self.bundle = bundle
        self.x = np.asarray(x, dtype=float)
        self.h = h

    @cached_property
    def pt(self):
        return cv.CurvaturePoint(self.bundle, self.x)

    @cached_property
    def magnitude(self):
        """Characteristic size of the jets at the point: |dg|, |Gamma|, |dGamma|, |Gamma|^2."""
        pt = self.pt
        gam = max(float(np.max(np.abs(pt.gamma))), float(np.max(np.abs(pt.gamma_star))))
        dgam = max(float(np.max(np.abs(pt.dgamma))), float(np.max(np.abs(pt.dgamma_star))))
        return max(float(np.max(np.abs(pt.dg))), gam, dgam, gam * gam)

    @property
    def torsion_mode(self):
        kind = self.bundle.kind
        return kind if kind in TORSION_FREE else "general"

    @cached_property
    def divergence(self):
        if self.bundle.kind == STATISTICAL:
            return ei.einstein_divergence_statistical(self.bundle, self.x, self.h)
        return ei.einstein_divergence_quasi(self.bundle, self.x, self.h)

    @cached_property
    def bianchi(self):
        return cv.bianchi_residuals(self.bundle.nabla, self.x, self.h, self.bundle.domain)

    @cached_property
    def bianchi_star(self):
        return cv.bianchi_residuals(self.bundle.nabla_star, self.x, self.h, self.bundle.domain)

    @cached_property
    def ricci_anti(self):
        return cv.ricci_antisymmetry_residuals(self.bundle.nabla, self.bundle.g, self.x, self.h,
                                               self.bundle.domain)

    @cached_property
    def ricci_anti_star(self):
        return cv.ricci_antisymmetry_residuals(self.bundle.nabla_star, self.bundle.g, self.x,
                                               self.h, self.bundle.domain)


@dataclass(frozen=True)
class Identity:
    name: str
    anchor: str
    cls: str
    evaluate: object
    kinds: tuple = ALL_KINDS

    @property
    def tolerance(self):
        return TOLERANCE[self.cls]

    def applies_to(self, bundle):
        return bundle.kind in self.kinds


def _dual_involution(c):
    b = c.bundle
    twice = dual_connection(b.g, dual_connection(b.g, b.nabla))(c.x)
    return relative_residual(twice - c.pt.gamma, c.pt.gamma, c.pt.gamma_star)


def _average_metricity(c):
    pt = c.pt
    c0 = nonmetricity_from_jets(pt.g, pt.dg, pt.gamma0)
    return relative_residual(c0, pt.C, pt.dg)


def _alpha_nonmetricity(c):
    pt = c.pt
    worst = 0.0
    for alpha in TEST_ALPHAS:
        ca = nonmetricity_from_jets(pt.g, pt.dg, pt.alpha_jet(alpha)[0])
        worst = max(worst, relative_residual(ca - alpha * pt.C, ca, pt.C))
    return worst


def _difference_from_cubic(c):
    pt = c.pt
    k = np.einsum("mj,ijk->mki", pt.g_inv, pt.C)
    return relative_residual(pt.K - k, pt.K, k)


def _split(form, ricci_level=False):
    def run(c):
        fn = cv.ricci_decomposition_residuals_at if ricci_level else cv.decomposition_residuals_at
        return fn(c.pt, c.torsion_mode)[form]
    return run


def _max_over_alphas(fn):
    return lambda c: max(fn(c.pt, a) for a in TEST_ALPHAS)


def _einstein_trace(c):
    pt = c.pt
    worst = 0.0
    for which, scal in ((ei.NABLA, pt.scalar), (ei.NABLA_STAR, pt.scalar_star)):
        tr = float(np.einsum("ij,ij->", pt.g_inv, ei.einstein_at(pt, which)))
        expected = (1.0 - pt.n / 2.0) * scal
        worst = max(worst, relative_residual(np.array([tr - expected]), np.array([scal])))
    return worst


def _chain_pre(c):
    flags = set(pre_statistical_conditions(c.pt).values())
    return 0.0 if len(flags) == 1 else 1.0


def _chain_statistical(c):
    count = sum(statistical_conditions(c.pt).values())
    return 0.0 if count in (0, 1, 4) else 1.0


def _chain_quasi(c):
    return max(quasi_statistical_residuals(c.pt).values())


def _traceless(fn, form):
    def run(c):
        if not cv.right_trace_vanishes(c.pt):
            return None
        return fn(c.pt)[form] if form else fn(c.pt)
    return run


def _divergence_free(c):
    pt = c.pt
    div0 = np.einsum("jmij->mi", pt.DK0)
    if not cv.right_trace_vanishes(pt) or np.max(np.abs(div0)) > ALGEBRAIC_TOL * max(
            1.0, float(np.max(np.abs(pt.dK)))):
        return None
    return max(cv.divergence_free_residuals_at(pt).values())


def _conjugate_symmetry(c):
    return cv.conjugate_symmetry_residual_at(c.pt)


def _levi_civita_divergence(c):
    pt = c.pt
    if np.max(np.abs(pt.C)) > ALGEBRAIC_TOL * max(1.0, float(np.max(np.abs(pt.dg)))):
        return None
    div = ei.levi_civita_einstein_divergence(c.bundle, c.x, c.h)
    return relative_residual(div, pt.R, ei.einstein_at(pt))


def _alpha_divergence(c):
    d = ei.alpha_einstein_divergence(c.bundle, 0.5, c.x, c.h)
    return d.closed_residual if d.closed_residual is not None else d.residual


def _alpha_ricci_antisymmetry(c):
    return cv.alpha_ricci_antisymmetry(c.bundle, 0.4, c.x, c.h)


def _alpha_torsion_blend(c):
    pt = c.pt
    worst = 0.0
    for alpha in TEST_ALPHAS:
        ta = torsion_from_gamma(pt.alpha_jet(alpha)[0])
        a, b = (1 + alpha) / 2, (1 - alpha) / 2
        worst = max(worst, relative_residual(ta - a * pt.T - b * pt.T_star, ta, pt.T, pt.T_star))
    return worst


def _alpha_midpoint(c):
    b = c.bundle
    mid = alpha_connection(b.nabla, b.nabla_star, 0.2)(c.x)
    ends = 0.5 * (alpha_connection(b.nabla, b.nabla_star, -0.3)(c.x)
                  + alpha_connection(b.nabla, b.nabla_star, 0.7)(c.x))
    return relative_residual(mid - ends, mid, ends)


_SPLIT_ANCHORS = {
    "split_average": "R = R0 - 1/2 Alt nabla0 K + 1/4 KK - 1/2 T0.K",
    "split_primal": "R = R0 - 1/2 Alt nabla K - 1/4 KK - 1/2 T.K",
    "dual_split_average": "R* = R0 + 1/2 Alt nabla0 K + 1/4 KK + 1/2 T0.K",
    "dual_split_primal": "R* = R0 + 1/2 Alt nabla K + 3/4 KK + 1/2 T.K",
    "difference_average": "R - R* = -Alt nabla0 K - T0.K",
    "difference_primal": "R - R* = -Alt nabla K - KK - T.K",
    "sum": "R + R* = 2 R0 + 1/2 KK",
}


def _build():
    ids = [
        Identity("connection_duality", "d_k g_ij = g_mi Gamma^m_jk + g_mj Gamma*^m_ik", ALGEBRAIC,
                 lambda c: duality_residual_from_point(c.pt)),
        Identity("dual_involution", "(nabla*)* = nabla", ALGEBRAIC, _dual_involution),
        Identity("average_metricity", "nabla0 g = 0", ALGEBRAIC, _average_metricity),
        Identity("alpha_nonmetricity", "nabla(a) g = a C", ALGEBRAIC, _alpha_nonmetricity),
        Identity("alpha_torsion_blend", "T(a) = (1+a)/2 T + (1-a)/2 T*", ALGEBRAIC,
                 _alpha_torsion_blend),
        Identity("alpha_affine", "nabla((a1+a2)/2) = (nabla(a1) + nabla(a2))/2", ALGEBRAIC,
                 _alpha_midpoint),
        Identity("difference_from_cubic", "K^m_ki = g^mj C_ijk", ALGEBRAIC,
                 _difference_from_cubic),
        Identity("curvature_antisymmetry", "R_m^k_ji = -R_m^k_ij", ALGEBRAIC,
                 lambda c: cv.curvature_antisymmetry_residual(c.pt.R)),
        Identity("curvature_duality", "g(R(X,Y)Z,W) + g(Z, R*(X,Y)W) = 0", ALGEBRAIC,
                 lambda c: cv.duality_curvature_from_point(c.pt)),
    ]
    for form, anchor in _SPLIT_ANCHORS.items():
        ids.append(Identity(f"riemann_{form}", anchor, ALGEBRAIC, _split(form)))
    for form, anchor in _SPLIT_ANCHORS.items():
        ids.append(Identity(f"ricci_{form}", "contracted: " + anchor, ALGEBRAIC,
                            _split(form, ricci_level=True)))
    ids += [
        Identity("ricci_parts", "symmetric and antisymmetric parts of Ric and Ric*", ALGEBRAIC,
                 lambda c: max(cv.ricci_parts_residuals_at(c.pt, c.torsion_mode).values())),
        Identity("quasi_ricci_parts", "Ric parts of a torsion-free nabla in nabla-form",
                 ALGEBRAIC, lambda c: max(cv.quasi_ricci_parts_residuals_at(c.pt).values()),
                 TORSION_FREE),
        Identity("statistical_ricci_antisymmetry", "R_mi - R_im = 1/2 (K^j_mj|i - K^j_ij|m)",
                 ALGEBRAIC, lambda c: max(cv.statistical_ricci_antisymmetry_at(c.pt).values()),
                 (STATISTICAL,)),
        Identity("scalar_difference", "R - R* = -trace_g(Div K - nabla Tr_2 K)", ALGEBRAIC,
                 lambda c: max(cv.scalar_difference_residuals_at(c.pt).values()),
                 (STATISTICAL,)),
        Identity("right_traceless_ricci", "Ric forms when Tr_1 K = 0", ALGEBRAIC,
                 _traceless(lambda pt: max(cv.right_traceless_residuals_at(pt).values()), None)),
        Identity("divergence_free_ricci", "Ric parts when Tr_1 K = 0 and Div0 K = 0", ALGEBRAIC,
                 _divergence_free),
        Identity("quasi_right_traceless_ricci", "Ric - Ric^T for torsion-free nabla, Tr_1 K = 0",
                 ALGEBRAIC, _traceless(cv.quasi_right_traceless_residual_at, None), TORSION_FREE),
        Identity("conjugate_symmetry", "R = R* implies g(R(X,Y)W,Z) = -g(R(X,Y)Z,W)", ALGEBRAIC,
                 _conjugate_symmetry),
        Identity("alpha_riemann_routes", "R(a) = (1+a)/2 R + (1-a)/2 R* + (1-a^2)/4 KK'",
                 ALGEBRAIC, _max_over_alphas(cv.alpha_riemann_residual_at)),
        Identity("alpha_ricci_routes", "Ric(a) = (1+a)/2 Ric + (1-a)/2 Ric* + (1-a^2)/4 kappa",
                 ALGEBRAIC, _max_over_alphas(cv.alpha_ricci_residual_at)),
        Identity("h_tensor_routes", "H = kappa_(ij) - 1/2 g kappa, two expansions", ALGEBRAIC,
                 lambda c: ei.h_routes_residual_at(c.pt)),
        Identity("alpha_einstein_routes", "G(a) = (1+a)/2 G + (1-a)/2 G* + (1-a^2)/4 H",
                 ALGEBRAIC, _max_over_alphas(ei.alpha_einstein_residual_at)),
        Identity("stress_energy_round_trip", "G = kappa T_eff iff G(a) = kappa T", ALGEBRAIC,
                 _max_over_alphas(ei.stress_energy_round_trip_at)),
        Identity("einstein_trace", "g^ij G_ij = (1 - n/2) R", ALGEBRAIC, _einstein_trace),
        Identity("pre_statistical_chain", "T = T* iff C symmetric iff T0 = T iff K symmetric",
                 ALGEBRAIC, _chain_pre),
        Identity("statistical_chain", "any two of T = 0, T* = 0, C symmetric, nabla0 = LC",
                 ALGEBRAIC, _chain_statistical),
        Identity("torsion_free_chain", "T = 0 iff C antisymmetry = g(T*) iff T* = 2 T0 "
                 "iff Alt K = T*", ALGEBRAIC, _chain_quasi, TORSION_FREE),
        # differential class
        Identity("bianchi_first", "cyclic nabla R + T.R = 0", DIFFERENTIAL,
                 lambda c: c.bianchi["first"]),
        Identity("bianchi_second", "cyclic nabla T = cyclic R - cyclic T.T", DIFFERENTIAL,
                 lambda c: c.bianchi["second"]),
        Identity("dual_bianchi_first", "cyclic nabla* R* + T*.R* = 0", DIFFERENTIAL,
                 lambda c: c.bianchi_star["first"]),
        Identity("dual_bianchi_second", "cyclic nabla* T* = cyclic R* - cyclic T*.T*",
                 DIFFERENTIAL, lambda c: c.bianchi_star["second"]),
        Identity("ricci_antisymmetry_torsion", "R_ij - R_ji = nabla_k T^k_ji - d_[i Tr Gamma_j]",
                 DIFFERENTIAL, lambda c: c.ricci_anti["torsion_form"]),
        Identity("ricci_antisymmetry_trace", "R_kj - R_jk + g^is R_isjk = T.T + traced nabla T",
                 DIFFERENTIAL, lambda c: c.ricci_anti["trace_form"]),
        Identity("dual_ricci_antisymmetry_torsion", "as above for nabla*", DIFFERENTIAL,
                 lambda c: c.ricci_anti_star["torsion_form"]),
        Identity("dual_ricci_antisymmetry_trace", "as above for nabla*", DIFFERENTIAL,
                 lambda c: c.ricci_anti_star["trace_form"]),
        Identity("alpha_ricci_antisymmetry", "Ric(a) antisymmetry by blended torsion terms",
                 DIFFERENTIAL, _alpha_ricci_antisymmetry),
        Identity("einstein_divergence", "nabla^i G_ij closed form", DIFFERENTIAL,
                 lambda c: c.divergence.residuals["nabla_G"], TORSION_FREE),
        Identity("dual_einstein_divergence", "nabla*^i G*_ij closed form (torsion terms)",
                 DIFFERENTIAL, lambda c: c.divergence.residuals["nabla_star_G_star"],
                 TORSION_FREE),
        Identity("mixed_einstein_divergence", "nabla*^i G_ij closed form", DIFFERENTIAL,
                 lambda c: c.divergence.residuals["nabla_star_G"], TORSION_FREE),
        Identity("dual_mixed_einstein_divergence", "nabla^i G*_ij closed form", DIFFERENTIAL,
                 lambda c: c.divergence.residuals["nabla_G_star"], TORSION_FREE),
        Identity("alpha_einstein_divergence", "nabla(a)^i G(a)_ij blend", DIFFERENTIAL,
                 _alpha_divergence),
        Identity("metric_einstein_divergence", "nabla^i G_ij = 0 for Levi-Civita", DIFFERENTIAL,
                 _levi_civita_divergence),
    ]
    names = [i.name for i in ids]
    assert len(names) == len(set(names))
    return {i.name: i for i in ids}


REGISTRY = _build()


def identities_for(bundle, names=None):
    """Registered identities applicable to the bundle's kind, in registry order."""
    chosen = REGISTRY.values() if names is None else [REGISTRY[n] for n in names]
    return [i for i in chosen if i.applies_to(bundle)]


def evaluate(identity, bundle, points, h=None, contexts=None):
    """Max residual over points and the number of points where the hypothesis held."""
    worst, used = 0.0, 0
    for k, x in enumerate(points):
        ctx = contexts[k] if contexts is not None else Context(bundle, x, h)
        with scale_floor(ctx.magnitude):
            r = identity.evaluate(ctx)
        if r is None:
            continue
        used += 1
        worst = max(worst, float(r))
    return worst, used
