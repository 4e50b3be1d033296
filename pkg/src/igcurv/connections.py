"""Affine connections: torsion, nonmetricity, duals, averages and alpha-families.

Index convention: ``gamma[k, i, j]`` is the coefficient of d_k in
nabla_{d_j} d_i, so the direction index comes last. Derivative axes of
jets are appended after the tensor slots.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chart_core import (
    ALGEBRAIC_TOL,
    DIFFERENTIAL_TOL,
    LOWER,
    UPPER,
    Box,
    ChartField,
    TensorComponents,
    as_point,
    inverse_metric,
    log_sqrt_det_gradient,
    metric_at,
    relative_residual,
)
from .errors import (
    CubicSymmetryViolation,
    DimensionMismatch,
    NonpositiveVolume,
    VarianceMismatch,
)

GENERAL = "general"
PRE_STATISTICAL = "pre_statistical"
STATISTICAL = "statistical"
QUASI_STATISTICAL = "quasi_statistical"
KINDS = (GENERAL, PRE_STATISTICAL, STATISTICAL, QUASI_STATISTICAL)

SYMMETRIC_LAST_TWO = "symmetric_last_two"
TOTALLY_SYMMETRIC = "totally_symmetric"

CONNECTION_VARIANCE = (UPPER, LOWER, LOWER)


class ConnectionField:
    """Connection coefficients as a field, with exact or differenced jets."""

    def __init__(self, dim, jet, domain=None, name="connection"):
        self.dim = int(dim)
        self._jet = jet
        self.domain = domain
        self.name = name

    @classmethod
    def from_field(cls, field, name=None):
        if field.rank != 3:
            raise VarianceMismatch("connection coefficients need rank 3")
        return cls(field.dim, field.jet, field.domain, name or field.name)

    def jet(self, p):
        x = as_point(p, self.dim)
        gamma, dgamma = self._jet(x)
        return np.asarray(gamma, float), np.asarray(dgamma, float)

    def __call__(self, p):
        return self.jet(p)[0]

    @property
    def gamma(self):
        """The coefficients as a rank-3 ChartField."""
        return ChartField(self.dim, CONNECTION_VARIANCE, self.__call__,
                          domain=self.domain, jet=self.jet, name=self.name)


def metric_jet(g_field, p):
    """(g, dg, ddg, g_inv, dg_inv) with dg_inv = -g^-1 dg g^-1."""
    g, dg, ddg = g_field.jet2(p)
    g_inv = inverse_metric(g)
    dg_inv = -np.einsum("lp,pqa,qi->lia", g_inv, dg, g_inv)
    return g, dg, ddg, g_inv, dg_inv


def christoffel_lowered(dg):
    """Gamma_{i,jk} = 1/2 (d_k g_ij + d_j g_ik - d_i g_jk), direction k last."""
    return 0.5 * (dg + np.swapaxes(dg, 1, 2) - np.transpose(dg, (2, 0, 1)))


def _levi_civita_jet(g_field, x):
    g, dg, ddg, g_inv, dg_inv = metric_jet(g_field, x)
    low = christoffel_lowered(dg)
    dlow = 0.5 * (ddg + np.swapaxes(ddg, 1, 2) - np.transpose(ddg, (2, 0, 1, 3)))
    gamma = np.einsum("li,ijk->ljk", g_inv, low)
    dgamma = np.einsum("lia,ijk->ljka", dg_inv, low) + np.einsum("li,ijka->ljka", g_inv, dlow)
    return gamma, dgamma


def levi_civita_connection(g_field):
    return ConnectionField(g_field.dim, lambda x: _levi_civita_jet(g_field, x),
                           g_field.domain, "levi_civita")


def levi_civita(g_field, p):
    """Levi-Civita coefficients at ``p``."""
    return _levi_civita_jet(g_field, as_point(p, g_field.dim))[0]


def nonmetricity_from_jets(g, dg, gamma):
    """C_kij = d_k g_ij - g_mi Gamma^m_jk - g_mj Gamma^m_ik, stored C[k, i, j]."""
    a = np.einsum("mi,mjk->kij", g, gamma)
    return np.transpose(dg, (2, 0, 1)) - a - np.swapaxes(a, 1, 2)


def nonmetricity_jet(g, dg, ddg, gamma, dgamma):
    c = nonmetricity_from_jets(g, dg, gamma)
    a = np.einsum("mia,mjk->kija", dg, gamma) + np.einsum("mi,mjka->kija", g, dgamma)
    dc = np.transpose(ddg, (2, 0, 1, 3)) - a - np.swapaxes(a, 1, 2)
    return c, dc


def nonmetricity(g_field, conn, p):
    """Cubic form C(X, Y, Z) = (nabla_X g)(Y, Z) at ``p``, stored C[k, i, j]."""
    x = as_point(p, g_field.dim)
    g, dg = g_field.jet(x)
    return nonmetricity_from_jets(g, dg, conn(x))


def torsion_from_gamma(gamma):
    """T^i_kl = Gamma^i_lk - Gamma^i_kl = T(d_k, d_l)^i."""
    return np.swapaxes(gamma, 1, 2) - gamma


def torsion(conn, p=None):
    """Torsion components; ``conn`` may be a ConnectionField or a coefficient array."""
    gamma = conn if p is None else conn(p)
    return torsion_from_gamma(np.asarray(gamma, float))


def difference_from_cubic(g_inv, c):
    """K^m_ki = g^mj C_ijk."""
    return np.einsum("mj,ijk->mki", g_inv, c)


def _dual_jet(g_field, conn, x):
    g, dg, ddg, g_inv, dg_inv = metric_jet(g_field, x)
    gamma, dgamma = conn.jet(x)
    c, dc = nonmetricity_jet(g, dg, ddg, gamma, dgamma)
    k = difference_from_cubic(g_inv, c)
    dk = np.einsum("mja,ijk->mkia", dg_inv, c) + np.einsum("mj,ijka->mkia", g_inv, dc)
    return gamma + k, dgamma + dk


def dual_connection(g_field, conn):
    """Connection with X g(Y, Z) = g(nabla_X Y, Z) + g(Y, nabla*_X Z)."""
    if g_field.dim != conn.dim:
        raise DimensionMismatch("metric and connection dimensions differ")
    return ConnectionField(conn.dim, lambda x: _dual_jet(g_field, conn, x),
                           conn.domain or g_field.domain, f"dual({conn.name})")


def blend_connections(a, conn, b, other, name=None):
    """Coefficient-wise a * conn + b * other (a connection when a + b = 1)."""
    if conn.dim != other.dim:
        raise DimensionMismatch("connections of different dimension")

    def jet(x):
        g1, d1 = conn.jet(x)
        g2, d2 = other.jet(x)
        return a * g1 + b * g2, a * d1 + b * d2

    return ConnectionField(conn.dim, jet, conn.domain or other.domain,
                           name or f"{a:g}*{conn.name}+{b:g}*{other.name}")


def alpha_weights(alpha):
    return 0.5 * (1.0 + alpha), 0.5 * (1.0 - alpha)


def alpha_connection(conn, conn_star, alpha):
    """(1+alpha)/2 nabla + (1-alpha)/2 nabla*; alpha = +-1 returns the inputs."""
    if alpha == 1:
        return conn
    if alpha == -1:
        return conn_star
    a, b = alpha_weights(alpha)
    return blend_connections(a, conn, b, conn_star, f"alpha({alpha:g})")


def average_connection(conn, conn_star):
    return blend_connections(0.5, conn, 0.5, conn_star, "average")


def difference_tensor(conn, conn_star, p):
    """K^k_ij = Gamma*^k_ij - Gamma^k_ij."""
    if conn.dim != conn_star.dim:
        raise DimensionMismatch("connections of different dimension")
    return conn_star(p) - conn(p)


def _check_trace_input(t):
    if isinstance(t, TensorComponents):
        if t.variance != CONNECTION_VARIANCE:
            raise VarianceMismatch(f"trace needs (upper, lower, lower), got {t.variance}")
        return t.data
    t = np.asarray(t, float)
    if t.ndim != 3:
        raise VarianceMismatch(f"trace needs a rank-3 tensor, got rank {t.ndim}")
    return t


def trace_right(t):
    """Tr_1(K)_i = K^k_ik, the trace over the direction slot."""
    return np.einsum("kik->i", _check_trace_input(t))


def trace_left(t):
    """Tr_2(K)_i = K^k_ki."""
    return np.einsum("kki->i", _check_trace_input(t))


def _cubic_connection_jet(g_field, c_field, x):
    g, dg, ddg, g_inv, dg_inv = metric_jet(g_field, x)
    c, dc = c_field.jet(x)
    low = christoffel_lowered(dg)
    dlow = 0.5 * (ddg + np.swapaxes(ddg, 1, 2) - np.transpose(ddg, (2, 0, 1, 3)))
    # S_{i,jk} = 1/2 (C_ijk - C_kij - C_jki) is symmetric in (j, k) whenever
    # C is symmetric in its last two slots, and has nonmetricity exactly C.
    s = 0.5 * (c - np.transpose(c, (1, 2, 0)) - np.transpose(c, (2, 0, 1)))
    ds = 0.5 * (dc - np.transpose(dc, (1, 2, 0, 3)) - np.transpose(dc, (2, 0, 1, 3)))
    gamma = np.einsum("li,ijk->ljk", g_inv, low + s)
    dgamma = (np.einsum("lia,ijk->ljka", dg_inv, low + s)
              + np.einsum("li,ijka->ljka", g_inv, dlow + ds))
    return gamma, dgamma


def cubic_connection(g_field, c_field):
    """Torsion-free connection whose nonmetricity is the given cubic form."""
    return ConnectionField(g_field.dim, lambda x: _cubic_connection_jet(g_field, c_field, x),
                           g_field.domain, "cubic")


def cubic_symmetry_defect(c, mode):
    """Largest symmetry violation of C with the offending index triple."""
    candidates = [np.abs(c - np.swapaxes(c, 1, 2))]
    if mode == TOTALLY_SYMMETRIC:
        candidates.append(np.abs(c - np.swapaxes(c, 0, 1)))
    defect = np.max(candidates, axis=0)
    triple = tuple(int(i) for i in np.unravel_index(np.argmax(defect), defect.shape))
    return float(defect[triple]), triple


@dataclass(frozen=True)
class GeometryBundle:
    """A metric with a connection and its dual, the unit of analysis."""

    g: ChartField
    nabla: ConnectionField
    nabla_star: ConnectionField
    domain: Box
    kind: str = GENERAL
    name: str = "bundle"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown bundle kind {self.kind!r}")
        if not self.g.dim == self.nabla.dim == self.nabla_star.dim == self.domain.dim:
            raise DimensionMismatch("bundle components have different dimensions")

    @property
    def dim(self):
        return self.g.dim

    def average(self):
        return average_connection(self.nabla, self.nabla_star)

    def alpha(self, alpha):
        return alpha_connection(self.nabla, self.nabla_star, alpha)

    def points(self, count=20, seed=0):
        return self.domain.sample(count, seed)

    def at(self, p):
        return ConnectionPoint(self, p)


class ConnectionPoint:
    """Jets of the metric and of both connections at one point, with derived data."""

    def __init__(self, bundle, p):
        self.bundle = bundle
        self.p = as_point(p, bundle.dim)
        self.n = bundle.dim
        self.g, self.dg, self.ddg, self.g_inv, self.dg_inv = metric_jet(bundle.g, self.p)
        self.gamma, self.dgamma = bundle.nabla.jet(self.p)
        self.gamma_star, self.dgamma_star = bundle.nabla_star.jet(self.p)

    @cached_property
    def K(self):
        return self.gamma_star - self.gamma

    @cached_property
    def dK(self):
        return self.dgamma_star - self.dgamma

    @cached_property
    def C(self):
        return nonmetricity_from_jets(self.g, self.dg, self.gamma)

    @cached_property
    def C_star(self):
        return nonmetricity_from_jets(self.g, self.dg, self.gamma_star)

    @cached_property
    def T(self):
        return torsion_from_gamma(self.gamma)

    @cached_property
    def T_star(self):
        return torsion_from_gamma(self.gamma_star)

    @cached_property
    def gamma0(self):
        return 0.5 * (self.gamma + self.gamma_star)

    @cached_property
    def dgamma0(self):
        return 0.5 * (self.dgamma + self.dgamma_star)

    @cached_property
    def T0(self):
        return torsion_from_gamma(self.gamma0)

    @cached_property
    def levi_civita(self):
        return np.einsum("li,ijk->ljk", self.g_inv, christoffel_lowered(self.dg))

    def alpha_jet(self, alpha):
        if alpha == 1:
            return self.gamma, self.dgamma
        if alpha == -1:
            return self.gamma_star, self.dgamma_star
        a, b = alpha_weights(alpha)
        return a * self.gamma + b * self.gamma_star, a * self.dgamma + b * self.dgamma_star


def duality_residual_from_point(pt):
    """d_k g_ij - g_mi Gamma^m_jk - g_mj Gamma*^m_ik, relative."""
    a = np.einsum("mi,mjk->kij", pt.g, pt.gamma)
    b = np.einsum("mj,mik->kij", pt.g, pt.gamma_star)
    dg = np.transpose(pt.dg, (2, 0, 1))
    return relative_residual(dg - a - b, dg, a, b)


def alpha_torsion(bundle, alpha, p):
    """(1+alpha)/2 T + (1-alpha)/2 T*."""
    a, b = alpha_weights(alpha)
    x = as_point(p, bundle.dim)
    return a * torsion(bundle.nabla, x) + b * torsion(bundle.nabla_star, x)


def statistical_pair_from_cubic(g_field, c_field, mode=TOTALLY_SYMMETRIC, domain=None,
                                check_points=20, seed=0, name=None):
    """Bundle (g, nabla, nabla*) whose nabla is torsion-free with nonmetricity C.

    ``totally_symmetric`` gives a statistical bundle, ``symmetric_last_two``
    a quasi-statistical one (all torsion sits in the dual).
    """
    if mode not in (SYMMETRIC_LAST_TWO, TOTALLY_SYMMETRIC):
        raise ValueError(f"unknown cubic mode {mode!r}")
    if g_field.dim != c_field.dim:
        raise DimensionMismatch("metric and cubic dimensions differ")
    domain = domain or g_field.domain or Box.cube(g_field.dim)
    for x in domain.sample(check_points, seed):
        c = c_field(x)
        defect, triple = cubic_symmetry_defect(c, mode)
        if defect > ALGEBRAIC_TOL * max(1.0, float(np.max(np.abs(c)))):
            raise CubicSymmetryViolation(
                f"cubic form breaks {mode} symmetry at index {triple} "
                f"by {defect:.3e} at {x.tolist()}", triple, defect)
    nabla = cubic_connection(g_field, c_field)
    star = dual_connection(g_field, nabla)
    kind = STATISTICAL if mode == TOTALLY_SYMMETRIC else QUASI_STATISTICAL
    return GeometryBundle(g_field, nabla, star, domain, kind, name or f"cubic_{kind}")


def levi_civita_bundle(g_field, domain=None, name="levi_civita"):
    lc = levi_civita_connection(g_field)
    return GeometryBundle(g_field, lc, dual_connection(g_field, lc),
                          domain or g_field.domain, STATISTICAL, name)


def connection_bundle(g_field, conn, domain=None, kind=GENERAL, name="general", star=None):
    """Bundle from an arbitrary connection; the dual is derived unless supplied."""
    star = star if star is not None else dual_connection(g_field, conn)
    return GeometryBundle(g_field, conn, star, domain or g_field.domain, kind, name)


def _log_density_jet(lambda_field, x):
    lam, dlam, ddlam = lambda_field.jet2(x)
    lam = float(lam)
    if not lam > 0:
        raise NonpositiveVolume(f"volume density {lam!r} at {x.tolist()} is not positive")
    dlog = dlam / lam
    return dlog, ddlam / lam - np.outer(dlog, dlog)


def equiaffine_shift(conn, lambda_field, name=None):
    """Projective change of ``conn`` that makes lambda dx^1...dx^n parallel.

    Adds delta^k_i v_j + delta^k_j v_i, which leaves the torsion unchanged
    and moves Tr_2 by (n + 1) v.
    """
    n = conn.dim
    eye = np.eye(n)

    def jet(x):
        gamma, dgamma = conn.jet(x)
        dlog, ddlog = _log_density_jet(lambda_field, x)
        v = (dlog - np.einsum("kki->i", gamma)) / (n + 1)
        dv = (ddlog - np.einsum("kkia->ia", dgamma)) / (n + 1)
        shift = np.einsum("ki,j->kij", eye, v) + np.einsum("kj,i->kij", eye, v)
        dshift = np.einsum("ki,ja->kija", eye, dv) + np.einsum("kj,ia->kija", eye, dv)
        return gamma + shift, dgamma + dshift

    return ConnectionField(n, jet, conn.domain, name or f"equiaffine({conn.name})")


def _fd_log_gradient(lambda_field, x, h=None):
    def log_lam(q):
        lam = float(lambda_field(q))
        if not lam > 0:
            raise NonpositiveVolume(f"volume density {lam!r} at {q.tolist()} is not positive")
        return np.log(lam)

    log_field = ChartField(lambda_field.dim, (), log_lam, lambda_field.domain,
                           lambda_field.fd_step, name="log_lambda")
    return log_field.fd_gradient(x, h)


def equiaffine_residuals(conn, g_field, lambda_field, p, h=None):
    """Both forms of the parallel-volume condition, as relative residuals.

    ``trace``: d_i log lambda - Gamma^k_ki.
    ``difference``: Tr_2(K)_i - 2 d_i log(sqrt|g| / lambda), K from the g-dual.
    """
    x = as_point(p, conn.dim)
    dlog = _fd_log_gradient(lambda_field, x, h)
    gamma = conn(x)
    tr2 = np.einsum("kki->i", gamma)
    k = dual_connection(g_field, conn)(x) - gamma
    tr2k = np.einsum("kki->i", k)
    dvol = log_sqrt_det_gradient(g_field, x, route="contraction")
    return {
        "trace": relative_residual(dlog - tr2, dlog, tr2),
        "difference": relative_residual(tr2k - 2.0 * (dvol - dlog), tr2k, dvol, dlog),
    }


def equiaffine_residual(conn, g_field, lambda_field, p, h=None):
    """Worst of the two parallel-volume residuals; ~0 iff lambda is parallel."""
    return max(equiaffine_residuals(conn, g_field, lambda_field, p, h).values())


def metric_density(g_field, power=0.5):
    """|det g|^power as a scalar field (derivatives by central differences)."""
    return ChartField(g_field.dim, (), lambda x: abs(np.linalg.det(g_field(x))) ** power,
                      g_field.domain, g_field.fd_step, name=f"|g|^{power:g}")


def density_product(*factors, domain=None):
    """Scalar field prod f_i(x)^p_i from (field, power) pairs."""
    dim = factors[0][0].dim
    domain = domain or factors[0][0].domain

    def evaluate(x):
        out = 1.0
        for field, power in factors:
            value = float(field(x))
            if not value > 0:
                raise NonpositiveVolume(f"density factor {field.name} is {value!r} at {x.tolist()}")
            out *= value ** power
        return out

    return ChartField(dim, (), evaluate, domain, name="density_product")


def metric_volume_residuals(conn, g_field, p, h=None):
    """Three equivalent statements that nabla preserves the metric volume form.

    ``parallel``: d_i sqrt|g| - sqrt|g| Tr_2(Gamma)_i from a differenced volume;
    ``trace``: Tr_2(Gamma)_i - d_i log sqrt|g| from the metric jet;
    ``difference``: Tr_2(K)_i, K taken against the g-dual of ``conn``.
    """
    x = as_point(p, conn.dim)
    vol = metric_density(g_field)
    dvol = vol.fd_gradient(x, h)
    v = float(vol(x))
    gamma = conn(x)
    tr2 = np.einsum("kki->i", gamma)
    dlog = log_sqrt_det_gradient(g_field, x, route="contraction")
    k = dual_connection(g_field, conn)(x) - gamma
    tr2k = np.einsum("kki->i", k)
    return {
        "parallel": relative_residual(dvol - v * tr2, dvol, v * tr2),
        "trace": relative_residual(tr2 - dlog, tr2, dlog),
        "difference": relative_residual(tr2k, tr2k, gamma),
    }


def validate_bundle(bundle, count=20, seed=0):
    """Largest violation of the duality and kind invariants over sample points."""
    worst = {"duality": 0.0, "torsion": 0.0, "cubic_symmetry": 0.0, "metric": 0.0}
    for x in bundle.points(count, seed):
        metric_at(bundle.g, x)
        pt = bundle.at(x)
        worst["duality"] = max(worst["duality"], duality_residual_from_point(pt))
        scale = max(1.0, float(np.max(np.abs(pt.gamma))))
        if bundle.kind in (STATISTICAL, QUASI_STATISTICAL):
            worst["torsion"] = max(worst["torsion"], float(np.max(np.abs(pt.T))) / scale)
        if bundle.kind in (STATISTICAL, PRE_STATISTICAL):
            c = pt.C
            defect, _ = cubic_symmetry_defect(c, TOTALLY_SYMMETRIC)
            worst["cubic_symmetry"] = max(worst["cubic_symmetry"],
                                          defect / max(1.0, float(np.max(np.abs(c)))))
    return worst


def bundle_is_valid(bundle, count=20, seed=0, tol=ALGEBRAIC_TOL):
    return all(v <= tol for v in validate_bundle(bundle, count, seed).values())



def _small(value, scale_terms, tol=ALGEBRAIC_TOL):
    """``value`` vanishes relative to the magnitude of ``scale_terms`` (floored at 1)."""
    scale = max([1.0] + [float(np.max(np.abs(t))) for t in scale_terms])
    return float(np.max(np.abs(value))) <= tol * scale


def pre_statistical_conditions(pt, tol=ALGEBRAIC_TOL):
    """Four conditions that are equivalent on any bundle.

    T = T*; C totally symmetric; T of the average connection equals T; K symmetric.
    """
    ref = (pt.gamma, pt.gamma_star)
    k_anti = pt.K - np.swapaxes(pt.K, 1, 2)
    return {
        "equal_torsions": _small(pt.T - pt.T_star, ref, tol),
        "cubic_totally_symmetric": _small(pt.C - np.swapaxes(pt.C, 0, 1), ref + (pt.dg,), tol),
        "average_torsion_equal": _small(pt.T0 - pt.T, ref, tol),
        "difference_symmetric": _small(k_anti, ref, tol),
    }


def quasi_statistical_residuals(pt):
    """Residuals of four conditions equivalent to T = 0 on any bundle.

    T = 0; C(X,Y,Z) - C(Y,X,Z) = g(T*(X,Y), Z); T* = 2 T0; K(X,Y) - K(Y,X) = T*(X,Y).
    """
    ref = (pt.gamma, pt.gamma_star)
    c_anti = pt.C - np.swapaxes(pt.C, 0, 1)                     # [x, y, z]
    g_ts = np.einsum("zm,mxy->xyz", pt.g, pt.T_star)
    k_anti = np.swapaxes(pt.K, 1, 2) - pt.K                     # K(X,Y) - K(Y,X) at [m, x, y]
    return {
        "torsion_free": relative_residual(pt.T, *ref),
        "cubic_antisymmetry": relative_residual(c_anti - g_ts, c_anti, g_ts, *ref),
        "dual_torsion_doubles_average": relative_residual(pt.T_star - 2.0 * pt.T0, pt.T_star,
                                                          *ref),
        "difference_antisymmetry": relative_residual(k_anti - pt.T_star, k_anti, *ref),
    }


def statistical_conditions(pt, tol=ALGEBRAIC_TOL):
    """T = 0, T* = 0, C totally symmetric, average connection = Levi-Civita.

    Any two of these imply the other two.
    """
    ref = (pt.gamma, pt.gamma_star)
    return {
        "torsion_free": _small(pt.T, ref, tol),
        "dual_torsion_free": _small(pt.T_star, ref, tol),
        "cubic_totally_symmetric": _small(pt.C - np.swapaxes(pt.C, 0, 1), ref + (pt.dg,), tol),
        "average_is_levi_civita": _small(pt.gamma0 - pt.levi_civita, ref, tol),
    }


__all__ = [
    "ALGEBRAIC_TOL", "DIFFERENTIAL_TOL", "ConnectionField", "GeometryBundle",
    "ConnectionPoint", "levi_civita", "levi_civita_connection", "nonmetricity",
    "torsion", "dual_connection", "difference_tensor", "average_connection",
    "alpha_connection", "alpha_torsion", "statistical_pair_from_cubic",
    "trace_right", "trace_left", "equiaffine_residual", "equiaffine_residuals",
    "equiaffine_shift", "blend_connections", "cubic_connection",
    "metric_density", "density_product", "metric_volume_residuals",
    "pre_statistical_conditions", "quasi_statistical_residuals", "statistical_conditions",
]
