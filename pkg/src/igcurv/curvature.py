"""Riemann, Ricci and scalar curvature of affine connections, with identity residuals.

Storage: ``R[m, k, j, i]`` holds R(d_j, d_i) d_m = R[m, k, j, i] d_k, so
R_m^k_ji = d_j Gamma^k_mi - d_i Gamma^k_mj + Gamma^h_mi Gamma^k_hj - Gamma^h_mj Gamma^k_hi.
Ricci is R_mi = R[m, j, j, i]. Covariant derivatives append the
direction index last: ``D[k, m, i, j]`` = K^k_{mi|j}.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chart_core import ALGEBRAIC_TOL, LOWER, UPPER, as_point, default_step, relative_residual
from .errors import DomainEscape
from .connections import (
    QUASI_STATISTICAL,
    STATISTICAL,
    ConnectionPoint,
    alpha_weights,
    torsion_from_gamma,
)

KVAR = (UPPER, LOWER, LOWER)
RVAR = (LOWER, UPPER, LOWER, LOWER)


def riemann_from_jet(gamma, dgamma):
    """Curvature components from connection coefficients and their derivatives."""
    x = np.einsum("kmij->mkji", dgamma) + np.einsum("hmi,khj->mkji", gamma, gamma)
    return x - np.swapaxes(x, 2, 3)


def riemann(conn, p):
    """R_m^k_ji of ``conn`` at ``p``."""
    return riemann_from_jet(*conn.jet(p))


def ricci_tensor(r):
    return np.einsum("mjji->mi", r)


@dataclass(frozen=True)
class RicciValue:
    tensor: np.ndarray
    symmetric: np.ndarray
    scalar: float


def ricci(r, g_inv=None):
    """Ricci tensor, its symmetric part and (when g_inv is given) the scalar."""
    t = ricci_tensor(r)
    sym = 0.5 * (t + t.T)
    scalar = float(np.einsum("ij,ij->", g_inv, t)) if g_inv is not None else float("nan")
    return RicciValue(t, sym, scalar)


def riemann_christoffel(g, r):
    """R(X, Y, Z, V) = g(R(Z, V) Y, X), stored RC[x, y, z, v]."""
    return np.einsum("xk,ykzv->xyzv", g, r)


def covariant_derivative(t, dt, gamma, variance):
    """nabla_j t with one connection term per slot; direction index appended last."""
    letters = "abcdefgh"[: t.ndim]
    out = np.array(dt, dtype=float, copy=True)
    for s, v in enumerate(variance):
        src = letters[:s] + "p" + letters[s + 1:]
        if v == UPPER:
            out += np.einsum(f"{letters[s]}pz,{src}->{letters}z", gamma, t)
        else:
            out -= np.einsum(f"p{letters[s]}z,{src}->{letters}z", gamma, t)
    return out


def field_gradient(evaluate, p, domain=None, h=None):
    """Central differences of an arbitrary tensor-valued function, direction last."""
    x = as_point(p)
    parts = []
    for a in range(x.shape[0]):
        step = (h if h is not None else default_step()) * max(1.0, abs(float(x[a])))
        e = np.zeros_like(x)
        e[a] = step
        for q in (x + e, x - e):
            if domain is not None and not domain.contains(q):
                raise DomainEscape(f"stencil point {q.tolist()} lies outside the chart domain", q)
        parts.append((np.asarray(evaluate(x + e)) - np.asarray(evaluate(x - e))) / (2.0 * step))
    return np.stack(parts, axis=-1)


def _terms_residual(lhs, rhs):
    """Relative residual of sum(lhs) - sum(rhs); each side is a list of arrays."""
    res = sum(lhs) - sum(rhs)
    return relative_residual(res, *lhs, *rhs)


class CurvaturePoint(ConnectionPoint):
    """Connection jets at a point plus every curvature quantity built from them."""

    @cached_property
    def R(self):
        return riemann_from_jet(self.gamma, self.dgamma)

    @cached_property
    def R_star(self):
        return riemann_from_jet(self.gamma_star, self.dgamma_star)

    @cached_property
    def R0(self):
        return riemann_from_jet(self.gamma0, self.dgamma0)

    @cached_property
    def ric(self):
        return ricci_tensor(self.R)

    @cached_property
    def ric_star(self):
        return ricci_tensor(self.R_star)

    @cached_property
    def ric0(self):
        return ricci_tensor(self.R0)

    @cached_property
    def scalar(self):
        return float(np.einsum("ij,ij->", self.g_inv, self.ric))

    @cached_property
    def scalar_star(self):
        return float(np.einsum("ij,ij->", self.g_inv, self.ric_star))

    @cached_property
    def DK0(self):
        """K^k_{mi|j} with respect to the average connection."""
        return covariant_derivative(self.K, self.dK, self.gamma0, KVAR)

    @cached_property
    def DK(self):
        """K^k_{mi|j} with respect to nabla."""
        return covariant_derivative(self.K, self.dK, self.gamma, KVAR)

    @cached_property
    def KK(self):
        """K^l_mi K^k_lj - K^l_mj K^k_li in curvature slot order."""
        q = np.einsum("lmi,klj->mkji", self.K, self.K)
        return q - np.swapaxes(q, 2, 3)

    @cached_property
    def tr1K(self):
        return np.einsum("kik->i", self.K)

    @cached_property
    def tr2K(self):
        return np.einsum("kki->i", self.K)

    def alpha_riemann_direct(self, alpha):
        return riemann_from_jet(*self.alpha_jet(alpha))

    @cached_property
    def KK_alpha(self):
        """K(Y, K(X, Z)) - K(X, K(Y, Z)) with X = d_i, Y = d_j, Z = d_l, slots [l, k, i, j]."""
        q = np.einsum("mli,kmj->lkij", self.K, self.K)
        return q - np.swapaxes(q, 2, 3)

    @cached_property
    def kappa_tensor(self):
        """Contraction of the alpha-curvature correction: K^m_li K^i_mj - K^m_lj K^i_mi."""
        return (np.einsum("mli,imj->lj", self.K, self.K)
                - np.einsum("mlj,imi->lj", self.K, self.K))

    def alpha_riemann_blend(self, alpha):
        a, b = alpha_weights(alpha)
        return a * self.R + b * self.R_star + (1.0 - alpha * alpha) / 4.0 * self.KK_alpha


def curvature_at(bundle, p):
    return CurvaturePoint(bundle, p)


# ---------------------------------------------------------------- algebraic identities

def curvature_antisymmetry_residual(r):
    """R_m^k_ji + R_m^k_ij, which vanishes for every connection."""
    return relative_residual(r + np.swapaxes(r, 2, 3), r)


def metric_curvature_antisymmetry_residual(g, r):
    """R(X,Y,Z,V) + R(Y,X,Z,V); vanishes only for metric connections."""
    rc = riemann_christoffel(g, r)
    return relative_residual(rc + np.swapaxes(rc, 0, 1), rc)


def duality_curvature_from_point(pt):
    """g(R(X,Y)Z, W) + g(R*(X,Y)W, Z) in lowered form."""
    rc = riemann_christoffel(pt.g, pt.R)
    rcs = riemann_christoffel(pt.g, pt.R_star)
    return relative_residual(rc + np.swapaxes(rcs, 0, 1), rc, rcs)


def duality_curvature_residual(bundle, p):
    return duality_curvature_from_point(curvature_at(bundle, p))


def _torsion_pair(pt, torsion_mode):
    """Torsions used in the primal-based and average-based forms."""
    zero = np.zeros_like(pt.T)
    if torsion_mode == "general":
        return pt.T, pt.T0
    if torsion_mode == STATISTICAL:
        return zero, zero
    if torsion_mode == QUASI_STATISTICAL:
        return zero, 0.5 * pt.T_star
    raise ValueError(f"unknown torsion mode {torsion_mode!r}")


def decomposition_terms(pt, torsion_mode="general"):
    t, t0 = _torsion_pair(pt, torsion_mode)

    def alt(d):
        return np.einsum("kmij->mkji", d) - np.einsum("kmji->mkji", d)

    return {
        "A0": alt(pt.DK0),
        "A": alt(pt.DK),
        "KK": pt.KK,
        "TK0": np.einsum("lji,kml->mkji", t0, pt.K),
        "TK": np.einsum("lji,kml->mkji", t, pt.K),
    }


def _split_identities(R, Rs, R0, A0, A, KK, TK0, TK):
    return {
        "split_average": _terms_residual([R], [R0, -0.5 * A0, 0.25 * KK, -0.5 * TK0]),
        "split_primal": _terms_residual([R], [R0, -0.5 * A, -0.25 * KK, -0.5 * TK]),
        "dual_split_average": _terms_residual([Rs], [R0, 0.5 * A0, 0.25 * KK, 0.5 * TK0]),
        "dual_split_primal": _terms_residual([Rs], [R0, 0.5 * A, 0.75 * KK, 0.5 * TK]),
        "difference_average": _terms_residual([R, -Rs], [-A0, -TK0]),
        "difference_primal": _terms_residual([R, -Rs], [-A, -KK, -TK]),
        "sum": _terms_residual([R, Rs], [2.0 * R0, 0.5 * KK]),
    }


def decomposition_residuals_at(pt, torsion_mode="general"):
    """Curvature of nabla and nabla* through the average connection and K."""
    d = decomposition_terms(pt, torsion_mode)
    return _split_identities(pt.R, pt.R_star, pt.R0, d["A0"], d["A"], d["KK"],
                             d["TK0"], d["TK"])


def decomposition_residuals(bundle, p, torsion_mode="general"):
    return decomposition_residuals_at(curvature_at(bundle, p), torsion_mode)


def ricci_terms(pt, torsion_mode="general"):
    """Ricci-level pieces written directly with contracted indices."""
    t, t0 = _torsion_pair(pt, torsion_mode)
    K = pt.K
    return {
        "div0": np.einsum("jmij->mi", pt.DK0),     # K^j_{mi|j}
        "trd0": np.einsum("jmji->mi", pt.DK0),     # K^j_{mj|i}
        "div": np.einsum("jmij->mi", pt.DK),
        "trd": np.einsum("jmji->mi", pt.DK),
        "P": np.einsum("lmi,jlj->mi", K, K),       # K^l_mi K^j_lj
        "Q": np.einsum("lmj,jli->mi", K, K),       # K^l_mj K^j_li
        "TK0": np.einsum("lji,jml->mi", t0, K),    # T0^l_ji K^j_ml
        "TK": np.einsum("lji,jml->mi", t, K),
    }


def ricci_decomposition_residuals_at(pt, torsion_mode="general"):
    """Ricci tensors of nabla and nabla* through the average connection and K."""
    r = ricci_terms(pt, torsion_mode)
    return _split_identities(pt.ric, pt.ric_star, pt.ric0, r["div0"] - r["trd0"],
                             r["div"] - r["trd"], r["P"] - r["Q"], r["TK0"], r["TK"])


def ricci_parts_residuals_at(pt, torsion_mode="general"):
    """Antisymmetric and symmetric parts of both Ricci tensors (average-connection form)."""
    r = ricci_terms(pt, torsion_mode)
    ric, rics, ric0 = pt.ric, pt.ric_star, pt.ric0
    out = {}
    for label, sgn in (("antisymmetric", -1.0), ("symmetric", 1.0)):
        def part(x, sgn=sgn):
            return x + sgn * x.T
        div = part(r["div0"]) - part(r["trd0"])
        quad = part(r["P"]) - part(r["Q"])
        tk = part(r["TK0"])
        out[f"ricci_{label}"] = _terms_residual(
            [part(ric)], [part(ric0), -0.5 * div, 0.25 * quad, -0.5 * tk])
        out[f"dual_ricci_{label}"] = _terms_residual(
            [part(rics)], [part(ric0), 0.5 * div, 0.25 * quad, 0.5 * tk])
    return out


def right_trace_vanishes(pt, tol=ALGEBRAIC_TOL):
    """Tr_1(K) and its first derivatives vanish at the point."""
    scale = max(1.0, float(np.max(np.abs(pt.K))), float(np.max(np.abs(pt.dK))))
    dtr = np.einsum("kika->ia", pt.dK)
    return float(max(np.max(np.abs(pt.tr1K)), np.max(np.abs(dtr)))) <= tol * scale


def right_traceless_residuals_at(pt):
    """Ricci formulas that assume Tr_1(K) = 0 (meaningful only when it holds)."""
    r = ricci_terms(pt)
    ric, rics, ric0, Q = pt.ric, pt.ric_star, pt.ric0, r["Q"]
    div0, div, TK0, TK = r["div0"], r["div"], r["TK0"], r["TK"]
    return {
        "split_average": _terms_residual([ric], [ric0, -0.5 * div0, -0.25 * Q, -0.5 * TK0]),
        "split_primal": _terms_residual([ric], [ric0, -0.5 * div, 0.25 * Q, -0.5 * TK]),
        "dual_split_average": _terms_residual([rics], [ric0, 0.5 * div0, -0.25 * Q, 0.5 * TK0]),
        "dual_split_primal": _terms_residual([rics], [ric0, 0.5 * div, -0.75 * Q, 0.5 * TK]),
        "difference_average": _terms_residual([ric, -rics], [-div0, -TK0]),
        "difference_primal": _terms_residual([ric, -rics], [-div, Q, -TK]),
        "sum": _terms_residual([ric, rics], [2.0 * ric0, -0.5 * Q]),
        "antisymmetric": _terms_residual(
            [ric, -ric.T], [ric0, -ric0.T, -0.5 * (div0 - div0.T), 0.25 * (Q.T - Q),
                            -0.5 * (TK0 - TK0.T)]),
        "dual_antisymmetric": _terms_residual(
            [rics, -rics.T], [ric0, -ric0.T, 0.5 * (div0 - div0.T), 0.25 * (Q.T - Q),
                              0.5 * (TK0 - TK0.T)]),
        "symmetric": _terms_residual(
            [ric, ric.T], [ric0, ric0.T, -0.5 * (div0 + div0.T), -0.25 * (Q.T + Q),
                           -0.5 * (TK0 + TK0.T)]),
        "dual_symmetric": _terms_residual(
            [rics, rics.T], [ric0, ric0.T, 0.5 * (div0 + div0.T), -0.25 * (Q.T + Q),
                             0.5 * (TK0 + TK0.T)]),
    }


def divergence_free_residuals_at(pt):
    """Ricci parts when Tr_1(K) = 0 and the average-connection divergence of K vanish."""
    r = ricci_terms(pt)
    ric, rics, ric0, Q, TK0 = pt.ric, pt.ric_star, pt.ric0, r["Q"], r["TK0"]
    return {
        "antisymmetric": _terms_residual(
            [ric, -ric.T], [ric0, -ric0.T, 0.25 * (Q.T - Q), -0.5 * (TK0 - TK0.T)]),
        "dual_antisymmetric": _terms_residual(
            [rics, -rics.T], [ric0, -ric0.T, 0.25 * (Q.T - Q), 0.5 * (TK0 - TK0.T)]),
        "symmetric": _terms_residual(
            [ric, ric.T], [ric0, ric0.T, -0.25 * (Q.T + Q), -0.5 * (TK0 + TK0.T)]),
        "dual_symmetric": _terms_residual(
            [rics, rics.T], [ric0, ric0.T, -0.25 * (Q.T + Q), 0.5 * (TK0 + TK0.T)]),
    }


def quasi_ricci_parts_residuals_at(pt):
    """Symmetric and antisymmetric Ricci parts of a torsion-free nabla (primal form)."""
    r = ricci_terms(pt, QUASI_STATISTICAL)
    ric, rics, ric0 = pt.ric, pt.ric_star, pt.ric0
    div, trd, P, Q = r["div"], r["trd"], r["P"], r["Q"]
    out = {}
    for label, sgn in (("antisymmetric", -1.0), ("symmetric", 1.0)):
        def part(x, sgn=sgn):
            return x + sgn * x.T
        out[f"ricci_{label}"] = _terms_residual(
            [part(ric)], [part(ric0), -0.5 * part(div), 0.5 * part(trd), -0.25 * part(P),
                          0.25 * part(Q)])
        out[f"dual_ricci_{label}"] = _terms_residual(
            [part(rics)], [part(ric0), 0.5 * part(div), -0.5 * part(trd), 0.75 * part(P),
                           -0.75 * part(Q)])
    return out


def quasi_right_traceless_residual_at(pt):
    """Antisymmetric Ricci part of a torsion-free nabla when Tr_1(K) = 0."""
    r = ricci_terms(pt, QUASI_STATISTICAL)
    ric, ric0, div, Q = pt.ric, pt.ric0, r["div"], r["Q"]
    return _terms_residual([ric, -ric.T],
                           [ric0, -ric0.T, -0.5 * (div - div.T), 0.25 * (Q - Q.T)])


def statistical_ricci_antisymmetry_at(pt):
    """R_mi - R_im = 1/2 (K^j_{mj|i} - K^j_{ij|m}) and the opposite sign for R*."""
    trd0 = np.einsum("jmji->mi", pt.DK0)
    half = 0.5 * (trd0 - trd0.T)
    return {
        "primal": _terms_residual([pt.ric, -pt.ric.T], [half]),
        "dual": _terms_residual([pt.ric_star, -pt.ric_star.T], [-half]),
    }


def scalar_difference_terms(pt):
    """Pieces of R - R* traced from the Ricci difference formula."""
    g_inv, K = pt.g_inv, pt.K
    div0 = np.einsum("mi,jmij->", g_inv, pt.DK0)
    trd0 = np.einsum("mi,jmji->", g_inv, pt.DK0)
    div = np.einsum("mi,jmij->", g_inv, pt.DK)
    trd = np.einsum("mi,jmji->", g_inv, pt.DK)
    trace_k = np.einsum("mi,lmi->l", g_inv, K)
    cross = float(trace_k @ pt.tr1K)
    tr3 = np.einsum("mi,lmj,jli->", g_inv, K, K)
    return div0, trd0, div, trd, cross, tr3


def scalar_difference_residuals_at(pt, alternate=False):
    """R - R* = -trace_g(Div K - nabla Tr_2 K), in average and primal forms.

    ``alternate=True`` evaluates the opposite-sign variant instead, kept as a
    diagnostic: it fails whenever the scalar curvatures differ.
    """
    d = pt.scalar - pt.scalar_star
    div0, trd0, div, trd, cross, tr3 = scalar_difference_terms(pt)
    scale = [np.array([pt.scalar]), np.array([pt.scalar_star])]
    if alternate:
        avg = div0 - trd0
        prim = (div - trd) - cross - tr3
    else:
        avg = -(div0 - trd0)
        prim = -(div - trd) - cross + tr3
    return {
        "average": relative_residual(np.array([d - avg]), *scale, np.array([div0, trd0])),
        "primal": relative_residual(np.array([d - prim]), *scale,
                                    np.array([div, trd, cross, tr3])),
    }


def conjugate_symmetry_residual_at(pt, tol=ALGEBRAIC_TOL):
    """If R = R* at the point, g(R(X,Y)W, Z) + g(R(X,Y)Z, W) vanishes; else None."""
    if relative_residual(pt.R - pt.R_star, pt.R, pt.R_star) > tol:
        return None
    rc = riemann_christoffel(pt.g, pt.R)
    return relative_residual(rc + np.swapaxes(rc, 0, 1), rc)


def alpha_riemann(bundle, alpha, p):
    """Curvature of the alpha-connection, computed directly from its coefficients."""
    return curvature_at(bundle, p).alpha_riemann_direct(alpha)


def alpha_riemann_residual_at(pt, alpha):
    direct = pt.alpha_riemann_direct(alpha)
    a, b = alpha_weights(alpha)
    c = (1.0 - alpha * alpha) / 4.0
    return _terms_residual([direct], [a * pt.R, b * pt.R_star, c * pt.KK_alpha])


def alpha_riemann_residual(bundle, alpha, p):
    """Direct alpha-curvature against the blend of R, R* and the K-quadratic."""
    return alpha_riemann_residual_at(curvature_at(bundle, p), alpha)


@dataclass(frozen=True)
class AlphaRicciValue:
    ricci: RicciValue
    kappa_tensor: np.ndarray
    kappa: float


def alpha_ricci_at(pt, alpha):
    """Blend route: (1+a)/2 Ric + (1-a)/2 Ric* + (1-a^2)/4 kappa_tensor."""
    a, b = alpha_weights(alpha)
    c = (1.0 - alpha * alpha) / 4.0
    kt = pt.kappa_tensor
    t = a * pt.ric + b * pt.ric_star + c * kt
    scalar = float(np.einsum("ij,ij->", pt.g_inv, t))
    kappa = float(np.einsum("ij,ij->", pt.g_inv, kt))
    return AlphaRicciValue(RicciValue(t, 0.5 * (t + t.T), scalar), kt, kappa)


def alpha_ricci(bundle, alpha, p):
    return alpha_ricci_at(curvature_at(bundle, p), alpha)


def alpha_ricci_residual_at(pt, alpha):
    """Contraction of the direct alpha-curvature against the blend route."""
    direct = ricci(pt.alpha_riemann_direct(alpha), pt.g_inv)
    blend = alpha_ricci_at(pt, alpha)
    a, b = alpha_weights(alpha)
    c = (1.0 - alpha * alpha) / 4.0
    tensor = _terms_residual([direct.tensor], [a * pt.ric, b * pt.ric_star,
                                               c * blend.kappa_tensor])
    scalar = relative_residual(np.array([direct.scalar - blend.ricci.scalar]),
                               np.array([direct.scalar]), np.array([a * pt.scalar]),
                               np.array([b * pt.scalar_star]), np.array([c * blend.kappa]))
    return max(tensor, scalar)


# ------------------------------------------------------------- differential identities

def _torsion_field(conn):
    return lambda q: torsion_from_gamma(conn(q))


def fd_covariant_derivative(evaluate, p, gamma, variance, domain, h=None):
    """nabla of a tensor field whose partial derivatives come from central differences."""
    x = as_point(p)
    return covariant_derivative(evaluate(x), field_gradient(evaluate, x, domain, h), gamma, variance)


def bianchi_residuals(conn, p, h=None, domain=None):
    """Cyclic identities for nabla R and nabla T, with their torsion terms.

    ``first``: sum_cyc (nabla_i R)_l^h_jk + R_l^h_rk T^r_ij + ... = 0.
    ``second``: sum_cyc (nabla_i T)^l_jk = sum_cyc R_k^l_ij - sum_cyc T^m_ij T^l_mk.
    Derivatives of R and T are central differences of the fields.
    """
    x = as_point(p, conn.dim)
    domain = domain or conn.domain
    gamma, dgamma = conn.jet(x)
    r = riemann_from_jet(gamma, dgamma)
    t = torsion_from_gamma(gamma)

    dr = fd_covariant_derivative(lambda q: riemann(conn, q), x, gamma, RVAR, domain, h)
    cyc_r = (np.einsum("lhjki->lhijk", dr) + np.einsum("lhkij->lhijk", dr)
             + np.einsum("lhijk->lhijk", dr))
    tr = (np.einsum("rij,lhrk->lhijk", t, r) + np.einsum("rjk,lhri->lhijk", t, r)
          + np.einsum("rki,lhrj->lhijk", t, r))
    scale_r = [cyc_r, tr, r * max(1.0, float(np.max(np.abs(gamma))))]
    first = relative_residual(cyc_r + tr, *scale_r)

    dt = fd_covariant_derivative(_torsion_field(conn), x, gamma, KVAR, domain, h)
    cyc_t = (np.einsum("ljki->lijk", dt) + np.einsum("lkij->lijk", dt)
             + np.einsum("lijk->lijk", dt))
    cyc_rr = (np.einsum("klij->lijk", r) + np.einsum("iljk->lijk", r)
              + np.einsum("jlki->lijk", r))
    tt = (np.einsum("mij,lmk->lijk", t, t) + np.einsum("mjk,lmi->lijk", t, t)
          + np.einsum("mki,lmj->lijk", t, t))
    second = relative_residual(cyc_t - cyc_rr + tt, cyc_t, cyc_rr, tt, r)
    return {"first": first, "second": second}


def trace_gradient(conn, p, domain=None, h=None, which="gamma"):
    """d_i of Gamma^k_jk (or T^k_jk), stored [j, i]."""
    def tr(q):
        gamma = conn(q)
        if which == "torsion":
            gamma = torsion_from_gamma(gamma)
        return np.einsum("jkk->j", np.moveaxis(gamma, 0, 2))
    return field_gradient(tr, as_point(p, conn.dim), domain or conn.domain, h)


def ricci_antisymmetry_terms(conn, p, h=None, domain=None):
    """LHS R_ij - R_ji and the pieces of its torsion/trace expansion."""
    x = as_point(p, conn.dim)
    domain = domain or conn.domain
    gamma, dgamma = conn.jet(x)
    ric = ricci_tensor(riemann_from_jet(gamma, dgamma))
    dt = fd_covariant_derivative(_torsion_field(conn), x, gamma, KVAR, domain, h)
    div_t = np.einsum("kjik->ij", dt)                 # nabla_k T^k_ji
    dtr = trace_gradient(conn, x, domain, h)           # d_i Gamma^k_jk at [j, i]
    dtr_t = trace_gradient(conn, x, domain, h, "torsion")
    return {
        "lhs": ric - ric.T,
        "div_t": div_t,
        "trace_term": dtr - dtr.T,                    # d_i Gamma^k_jk - d_j Gamma^k_ik
        "torsion_trace_term": dtr_t - dtr_t.T,
        "dt": dt,
        "gamma": gamma,
        "riemann": riemann_from_jet(gamma, dgamma),
    }


def ricci_antisymmetry_residuals(conn, g_field, p, h=None, domain=None, equiaffine=False):
    """Ricci antisymmetry through the divergence of torsion, and its trace variant.

    ``torsion_form``: R_ij - R_ji = nabla_k T^k_ji - (d_i Gamma^k_jk - d_j Gamma^k_ik),
    the trace taken over the direction slot.
    ``trace_form``: R_kj - R_jk + g^is R_isjk = T-quadratic + traced nabla T terms.
    With ``equiaffine=True`` (Tr_2 Gamma a gradient) the trace term is replaced by
    +(d_i T^k_jk - d_j T^k_ik).
    """
    x = as_point(p, conn.dim)
    d = ricci_antisymmetry_terms(conn, x, h, domain)
    lhs = d["lhs"]
    if equiaffine:
        form = relative_residual(lhs - d["div_t"] - d["torsion_trace_term"],
                                 lhs, d["div_t"], d["torsion_trace_term"], d["riemann"])
    else:
        form = relative_residual(lhs - d["div_t"] + d["trace_term"],
                                 lhs, d["div_t"], d["trace_term"], d["riemann"])
    g = g_field(x)
    g_inv = np.linalg.inv(g)
    r = d["riemann"]
    ric = ricci_tensor(r)
    rc = riemann_christoffel(g, r)
    # left[k, j] = R_kj - R_jk + g^is R_isjk
    left = ric - ric.T + np.einsum("is,isjk->kj", g_inv, rc)
    t = torsion_from_gamma(d["gamma"])
    dt = d["dt"]
    quad = (np.einsum("mij,imk->kj", t, t) + np.einsum("mjk,imi->kj", t, t)
            + np.einsum("mki,imj->kj", t, t))
    traced = (np.einsum("ijki->kj", dt) + np.einsum("ikij->kj", dt)
              + np.einsum("iijk->kj", dt))
    trace_form = relative_residual(left - quad - traced, left, quad, traced, r)
    return {"torsion_form": form, "trace_form": trace_form}


def ricci_antisymmetry_residual(conn, g_field, p, h=None, domain=None):
    """Worst of the torsion and trace forms of the Ricci antisymmetry identity."""
    return max(ricci_antisymmetry_residuals(conn, g_field, p, h, domain).values())


def alpha_ricci_antisymmetry(bundle, alpha, p, h=None):
    """R^(a)_ij - R^(a)_ji against the blended torsion-divergence and trace terms."""
    x = as_point(p, bundle.dim)
    dom = bundle.domain
    a, b = alpha_weights(alpha)
    conn_a = bundle.alpha(alpha)
    ric = ricci_tensor(riemann(conn_a, x))
    lhs = ric - ric.T
    gamma = bundle.nabla(x)
    gamma_s = bundle.nabla_star(x)
    t_field = _torsion_field(bundle.nabla)
    ts_field = _torsion_field(bundle.nabla_star)

    def div(field, gam):
        return np.einsum("kjik->ij", fd_covariant_derivative(field, x, gam, KVAR, dom, h))

    dtr = trace_gradient(bundle.nabla, x, dom, h)
    dtr_s = trace_gradient(bundle.nabla_star, x, dom, h)
    terms = [a * a * div(t_field, gamma),
             a * b * (div(t_field, gamma_s) + div(ts_field, gamma)),
             b * b * div(ts_field, gamma_s),
             -a * (dtr - dtr.T), -b * (dtr_s - dtr_s.T)]
    return relative_residual(lhs - sum(terms), lhs, *terms, ric)
