"""Einstein tensors, the K-quadratic H tensor, divergence formulas and the effective source.

Divergences contract the derivative direction with the first slot:
(nabla^i F)_j = g^is nabla_s F_ij, both lower slots carried by the acting
connection. Field derivatives come from central differences of the field
recomputed at stencil points.
"""

from dataclasses import dataclass

import numpy as np

from .chart_core import as_point, relative_residual
from .connections import QUASI_STATISTICAL, STATISTICAL, alpha_weights
from .curvature import CurvaturePoint, field_gradient, ricci
from .errors import AlphaSingular, KindMismatch

NABLA = "nabla"
NABLA_STAR = "nabla_star"


@dataclass(frozen=True)
class EinsteinValue:
    tensor: np.ndarray
    source: str


def einstein_from_ricci(ric, g, g_inv):
    """G_ij = R_(ij) - 1/2 g_ij R."""
    sym = 0.5 * (ric + ric.T)
    return sym - 0.5 * g * float(np.einsum("ij,ij->", g_inv, ric))


def _ricci_of(pt, which):
    if which == NABLA:
        return pt.ric
    if which == NABLA_STAR:
        return pt.ric_star
    raise ValueError(f"unknown connection {which!r}")


def einstein_at(pt, which=NABLA):
    return einstein_from_ricci(_ricci_of(pt, which), pt.g, pt.g_inv)


def einstein_tensor(bundle, which=NABLA, p=None):
    pt = CurvaturePoint(bundle, p)
    return EinsteinValue(einstein_at(pt, which), which)


def h_tensor_at(pt, route="symmetrized"):
    """H_ij = kappa_(ij) - 1/2 g_ij kappa from the K-quadratic Ricci correction.

    ``route="expanded"`` rebuilds kappa_(ij) from the explicit K.K - Tr.K
    expression; that expression equals twice the symmetrization, so it is halved.
    """
    if route == "symmetrized":
        kt = pt.kappa_tensor
        sym = 0.5 * (kt + kt.T)
    elif route == "expanded":
        K, tr = pt.K, pt.tr1K
        twice = (np.einsum("lim,mlj->ij", K, K) + np.einsum("mjl,lmi->ij", K, K)
                 - np.einsum("m,mji->ij", tr, K) - np.einsum("m,mij->ij", tr, K))
        sym = 0.5 * twice
    else:
        raise ValueError(f"unknown route {route!r}")
    return sym - 0.5 * pt.g * float(np.einsum("ij,ij->", pt.g_inv, sym))


def h_tensor(bundle, p, route="symmetrized"):
    return h_tensor_at(CurvaturePoint(bundle, p), route)


def _alpha_label(alpha):
    return f"alpha({alpha:g})"


def alpha_einstein_at(pt, alpha, route="blend"):
    """Einstein tensor of the alpha-connection.

    ``blend``: (1+a)/2 G + (1-a)/2 G* + (1-a^2)/4 H.
    ``direct``: Einstein tensor of the Ricci tensor of the alpha-connection itself.
    """
    if route == "blend":
        a, b = alpha_weights(alpha)
        c = (1.0 - alpha * alpha) / 4.0
        return a * einstein_at(pt) + b * einstein_at(pt, NABLA_STAR) + c * h_tensor_at(pt)
    if route == "direct":
        r = pt.alpha_riemann_direct(alpha)
        return einstein_from_ricci(ricci(r).tensor, pt.g, pt.g_inv)
    raise ValueError(f"unknown route {route!r}")


def alpha_einstein(bundle, alpha, p, route="blend"):
    if alpha == 1:
        return EinsteinValue(einstein_tensor(bundle, NABLA, p).tensor, _alpha_label(alpha))
    if alpha == -1:
        return EinsteinValue(einstein_tensor(bundle, NABLA_STAR, p).tensor, _alpha_label(alpha))
    return EinsteinValue(alpha_einstein_at(CurvaturePoint(bundle, p), alpha, route),
                         _alpha_label(alpha))


def alpha_einstein_residual_at(pt, alpha):
    """Blend against direct route for the alpha-Einstein tensor."""
    blend = alpha_einstein_at(pt, alpha, "blend")
    direct = alpha_einstein_at(pt, alpha, "direct")
    return relative_residual(blend - direct, blend, direct, einstein_at(pt),
                             einstein_at(pt, NABLA_STAR))


def h_routes_residual_at(pt):
    a = h_tensor_at(pt, "symmetrized")
    b = h_tensor_at(pt, "expanded")
    return relative_residual(a - b, a, b, pt.kappa_tensor)


# ------------------------------------------------------------------ divergences

def _gamma_of(pt, which):
    if which == NABLA:
        return pt.gamma
    if which == NABLA_STAR:
        return pt.gamma_star
    a, b = alpha_weights(which)
    return a * pt.gamma + b * pt.gamma_star


def _nonmetricity_of(pt, which):
    if which == NABLA:
        return pt.C
    if which == NABLA_STAR:
        return pt.C_star
    a, b = alpha_weights(which)
    return a * pt.C + b * pt.C_star


def divergence_rank2(field, bundle, p, which=NABLA, h=None, pt=None):
    """g^is nabla_s F_ij for a rank-2 lower field ``field(q) -> (n, n)``."""
    x = as_point(p, bundle.dim)
    pt = pt or CurvaturePoint(bundle, x)
    gamma = _gamma_of(pt, which)
    f = np.asarray(field(x))
    df = field_gradient(field, x, bundle.domain, h)               # d_s F_ij at [i, j, s]
    cov = (df - np.einsum("mis,mj->ijs", gamma, f) - np.einsum("mjs,im->ijs", gamma, f))
    return np.einsum("is,ijs->j", pt.g_inv, cov)


def scalar_gradient(field, bundle, p, h=None):
    return field_gradient(field, as_point(p, bundle.dim), bundle.domain, h)


def _point_field(bundle, fn):
    return lambda q: fn(CurvaturePoint(bundle, q))


def _einstein_field(bundle, which):
    return _point_field(bundle, lambda pt: einstein_at(pt, which))


def _metric_terms(pt, which):
    """(nabla^i g_ij) and (nabla_h g^ls) for the acting connection."""
    c = _nonmetricity_of(pt, which)                                # nabla_k g_ij at [k, i, j]
    div_g = np.einsum("is,sij->j", pt.g_inv, c)
    d_ginv = -np.einsum("la,sb,hab->hls", pt.g_inv, pt.g_inv, c)  # nabla_h g^ls at [h, l, s]
    return div_g, d_ginv


@dataclass(frozen=True)
class DivergenceReport:
    """Left sides (direct divergences), right sides (closed forms) and residuals."""

    lhs: dict
    rhs: dict
    residuals: dict
    torsion_term: np.ndarray = None

    @property
    def worst(self):
        return max(self.residuals.values())


def _pure_rhs(bundle, pt, which, h, quasi):
    """Closed form of the divergence of the Einstein tensor of ``which`` by that connection."""
    if which == NABLA:
        r, ric, ric_o, scal = pt.R, pt.ric, pt.ric_star, pt.scalar
    else:
        r, ric, ric_o, scal = pt.R_star, pt.ric_star, pt.ric, pt.scalar_star
    mixed = _point_field(bundle, lambda q: (q.ric_star - q.ric.T) if which == NABLA
                         else (q.ric - q.ric_star.T))
    div_mixed = divergence_rank2(mixed, bundle, pt.p, which, h, pt)
    div_g, d_ginv = _metric_terms(pt, which)
    terms = [div_mixed,
             div_g * scal,
             np.einsum("hls,lhsj->j", d_ginv, r),
             np.einsum("jls,ls->j", d_ginv, ric),
             np.einsum("hhs,sj->j", d_ginv, ric_o)]
    total = -0.5 * sum(terms)
    extra = np.zeros(pt.n)
    if quasi and which == NABLA_STAR:
        t = pt.T_star
        g_inv = pt.g_inv
        extra = 0.5 * (np.einsum("ls,lhrj,rhs->j", g_inv, r, t)
                       - np.einsum("ls,lr,rsj->j", g_inv, ric, t)
                       + np.einsum("ls,lhrs,rjh->j", g_inv, r, t))
    return total + extra, terms, extra


def _mixed_rhs(bundle, pt, which_conn, which_g, h):
    """nabla'^i G_ij = nabla'^i R_(ij) - 1/2 (nabla'^i g_ij) R - 1/2 d_j R."""
    attr = "ric" if which_g == NABLA else "ric_star"
    sattr = "scalar" if which_g == NABLA else "scalar_star"
    sym = _point_field(bundle, lambda q: 0.5 * (getattr(q, attr) + getattr(q, attr).T))
    scal = _point_field(bundle, lambda q: getattr(q, sattr))
    div_sym = divergence_rank2(sym, bundle, pt.p, which_conn, h, pt)
    div_g, _ = _metric_terms(pt, which_conn)
    dscal = scalar_gradient(scal, bundle, pt.p, h)
    s = getattr(pt, sattr)
    terms = [div_sym, div_g * s, dscal]
    return div_sym - 0.5 * div_g * s - 0.5 * dscal, terms


def _divergence_report(bundle, p, h, quasi):
    x = as_point(p, bundle.dim)
    pt = CurvaturePoint(bundle, x)
    g_field = _einstein_field(bundle, NABLA)
    gs_field = _einstein_field(bundle, NABLA_STAR)
    lhs = {
        "nabla_G": divergence_rank2(g_field, bundle, x, NABLA, h, pt),
        "nabla_star_G_star": divergence_rank2(gs_field, bundle, x, NABLA_STAR, h, pt),
        "nabla_star_G": divergence_rank2(g_field, bundle, x, NABLA_STAR, h, pt),
        "nabla_G_star": divergence_rank2(gs_field, bundle, x, NABLA, h, pt),
    }
    rhs, residuals = {}, {}
    torsion_term = np.zeros(bundle.dim)
    for key, which in (("nabla_G", NABLA), ("nabla_star_G_star", NABLA_STAR)):
        value, terms, extra = _pure_rhs(bundle, pt, which, h, quasi)
        if which == NABLA_STAR:
            torsion_term = extra
        rhs[key] = value
        residuals[key] = relative_residual(lhs[key] - value, lhs[key], *terms, extra,
                                           pt.R if which == NABLA else pt.R_star)
    for key, conn, src in (("nabla_star_G", NABLA_STAR, NABLA), ("nabla_G_star", NABLA, NABLA_STAR)):
        value, terms = _mixed_rhs(bundle, pt, conn, src, h)
        rhs[key] = value
        residuals[key] = relative_residual(lhs[key] - value, lhs[key], *terms)
    return DivergenceReport(lhs, rhs, residuals, torsion_term)


def einstein_divergence_statistical(bundle, p, h=None):
    """Direct divergences of G and G* against their closed forms (torsion-free pair)."""
    if bundle.kind != STATISTICAL:
        raise KindMismatch(f"statistical divergence formulas need a statistical bundle, "
                           f"got {bundle.kind!r}")
    return _divergence_report(bundle, p, h, quasi=False)


def einstein_divergence_quasi(bundle, p, h=None):
    """As the statistical case, with torsion-curvature terms in the dual formula."""
    if bundle.kind != QUASI_STATISTICAL:
        raise KindMismatch(f"quasi-statistical divergence formulas need a quasi-statistical "
                           f"bundle, got {bundle.kind!r}")
    return _divergence_report(bundle, p, h, quasi=True)


def levi_civita_einstein_divergence(bundle, p, h=None):
    """|nabla^i G_ij| for a metric connection, relative to the curvature scale."""
    x = as_point(p, bundle.dim)
    pt = CurvaturePoint(bundle, x)
    div = divergence_rank2(_einstein_field(bundle, NABLA), bundle, x, NABLA, h, pt)
    return div


@dataclass(frozen=True)
class AlphaDivergence:
    direct: np.ndarray
    blend: np.ndarray
    alternate: np.ndarray
    residual: float
    alternate_residual: float
    closed: np.ndarray = None
    closed_residual: float = None


def alpha_einstein_divergence(bundle, alpha, p, h=None):
    """Divergence of the alpha-Einstein tensor by the alpha-connection, three ways.

    ``direct``: FD divergence of the alpha-Einstein field.
    ``blend``: a^2 nabla G + ab (nabla* G + nabla G*) + b^2 nabla* G*
    + (1-a^2)/4 (a nabla H + b nabla* H), with a, b the alpha weights.
    ``alternate``: the same with (1-a^2)/4 (nabla H + nabla* H), kept for comparison.
    ``closed`` (torsion-free nabla only): the blend with the four Einstein
    divergences replaced by their closed forms. The plain blend is exact for any
    linear difference scheme, so only this route carries an O(h^2) error.
    """
    x = as_point(p, bundle.dim)
    pt = CurvaturePoint(bundle, x)
    a, b = alpha_weights(alpha)
    c = (1.0 - alpha * alpha) / 4.0
    ga = _point_field(bundle, lambda q: alpha_einstein_at(q, alpha, "blend"))
    direct = divergence_rank2(ga, bundle, x, alpha, h, pt)
    g_f = _einstein_field(bundle, NABLA)
    gs_f = _einstein_field(bundle, NABLA_STAR)
    h_f = _point_field(bundle, h_tensor_at)

    def div(field, which):
        return divergence_rank2(field, bundle, x, which, h, pt)

    d = {
        "G": div(g_f, NABLA), "sG": div(g_f, NABLA_STAR),
        "Gs": div(gs_f, NABLA), "sGs": div(gs_f, NABLA_STAR),
        "H": div(h_f, NABLA), "sH": div(h_f, NABLA_STAR),
    }
    common = a * a * d["G"] + a * b * (d["sG"] + d["Gs"]) + b * b * d["sGs"]
    blend = common + c * (a * d["H"] + b * d["sH"])
    alternate = common + c * (d["H"] + d["sH"])
    scale = list(d.values()) + [direct]
    closed = closed_residual = None
    if bundle.kind in (STATISTICAL, QUASI_STATISTICAL):
        rhs = _divergence_report(bundle, x, h, bundle.kind == QUASI_STATISTICAL).rhs
        closed = (a * a * rhs["nabla_G"] + a * b * (rhs["nabla_star_G"] + rhs["nabla_G_star"])
                  + b * b * rhs["nabla_star_G_star"] + c * (a * d["H"] + b * d["sH"]))
        closed_residual = relative_residual(direct - closed, *scale, *rhs.values())
    return AlphaDivergence(direct, blend, alternate,
                           relative_residual(direct - blend, *scale),
                           relative_residual(direct - alternate, *scale),
                           closed, closed_residual)


# ------------------------------------------------------------- effective source

def _matter_at(t_matter, x):
    return np.asarray(t_matter(x) if callable(t_matter) else t_matter, dtype=float)


def effective_stress_energy_at(pt, alpha, t_matter, kappa=1.0, form="consistent"):
    """Source for G_ij = kappa T_eff that is equivalent to G^(alpha)_ij = kappa T_ij.

    ``consistent``: 2/(1+a) T - (1/kappa) [(1-a)/(1+a) G* + (1-a)/2 H].
    ``alternate``: 2/(1+a) T - (1/kappa) [(1-a^2) G* - (1+a)^2 (1-a)/2 H], which
    does not invert the alpha field equation and is kept as a diagnostic.
    """
    if alpha == -1:
        raise AlphaSingular("the effective source needs alpha != -1")
    t = _matter_at(t_matter, pt.p)
    gs = einstein_at(pt, NABLA_STAR)
    hh = h_tensor_at(pt)
    if form == "consistent":
        geo = (1.0 - alpha) / (1.0 + alpha) * gs + 0.5 * (1.0 - alpha) * hh
    elif form == "alternate":
        geo = (1.0 - alpha * alpha) * gs - 0.5 * (1.0 + alpha) ** 2 * (1.0 - alpha) * hh
    else:
        raise ValueError(f"unknown form {form!r}")
    return 2.0 / (1.0 + alpha) * t - geo / kappa


def effective_stress_energy(bundle, alpha, t_matter, p, kappa=1.0, form="consistent"):
    if alpha == -1:
        raise AlphaSingular("the effective source needs alpha != -1")
    return effective_stress_energy_at(CurvaturePoint(bundle, p), alpha, t_matter, kappa, form)


def stress_energy_round_trip_at(pt, alpha, kappa=1.0, form="consistent"):
    """Take T = G^(alpha)/kappa, form T_eff, and compare kappa T_eff with G."""
    g_alpha = alpha_einstein_at(pt, alpha)
    t = g_alpha / kappa
    t_eff = effective_stress_energy_at(pt, alpha, t, kappa, form)
    g = einstein_at(pt)
    return relative_residual(kappa * t_eff - g, g, g_alpha, einstein_at(pt, NABLA_STAR))


def stress_energy_round_trip(bundle, alpha, p, kappa=1.0, form="consistent"):
    if alpha == -1:
        raise AlphaSingular("the effective source needs alpha != -1")
    return stress_energy_round_trip_at(CurvaturePoint(bundle, p), alpha, kappa, form)


__all__ = [
    "EinsteinValue", "DivergenceReport", "AlphaDivergence", "einstein_tensor", "h_tensor",
    "alpha_einstein", "einstein_divergence_statistical", "einstein_divergence_quasi",
    "alpha_einstein_divergence", "effective_stress_energy", "stress_energy_round_trip",
    "divergence_rank2",
]
