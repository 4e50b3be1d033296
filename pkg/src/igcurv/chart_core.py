"""Chart points, tensor fields, central differences and pointwise metric algebra.

Every tensor is a dense numpy array with one axis per slot. When a field
carries derivatives ("jets"), the derivative axes are appended LAST, so
``d[..., a]`` is the partial derivative along coordinate ``a`` and
``dd[..., a, b]`` the second derivative along ``a`` and ``b``.
"""

import os
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import (
    AsymmetricMetric,
    DimensionMismatch,
    DomainEscape,
    SingularMetric,
)

ALGEBRAIC_TOL = 1e-9
DIFFERENTIAL_TOL = 5e-5
RESIDUAL_FLOOR = 1e-12
_scale_floor = ContextVar("scale_floor", default=RESIDUAL_FLOOR)
DEFAULT_STEP = 1e-4
STEP_ENV = "IGCURV_DEFAULT_H"

UPPER = "upper"
LOWER = "lower"


def default_step():
    """Base finite-difference step, overridable through ``IGCURV_DEFAULT_H``."""
    raw = os.environ.get(STEP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_STEP
    h = float(raw)
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"{STEP_ENV} must be a positive number, got {raw!r}")
    return h


def as_point(p, dim=None):
    """Coerce ``p`` to a finite float vector, optionally checking its length."""
    x = np.asarray(p, dtype=float).reshape(-1)
    if dim is not None and x.shape[0] != dim:
        raise DimensionMismatch(f"point has {x.shape[0]} coordinates, chart has {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite chart point {x.tolist()}")
    return x


@dataclass(frozen=True)
class ChartPoint:
    """A point of an n-dimensional chart, 2 <= n <= 4."""

    coords: tuple

    def __post_init__(self):
        x = as_point(self.coords)
        if not 2 <= x.shape[0] <= 4:
            raise DimensionMismatch(f"chart dimension must be 2..4, got {x.shape[0]}")
        object.__setattr__(self, "coords", tuple(float(v) for v in x))

    @property
    def dim(self):
        return len(self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned coordinate box."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi)
        if lo.shape != hi.shape:
            raise DimensionMismatch("box bounds have different lengths")
        if np.any(hi <= lo):
            raise ValueError(f"empty box {lo.tolist()} .. {hi.tolist()}")
        object.__setattr__(self, "lo", tuple(lo.tolist()))
        object.__setattr__(self, "hi", tuple(hi.tolist()))

    @classmethod
    def cube(cls, dim, lo=-1.0, hi=1.0):
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self):
        return len(self.lo)

    def contains(self, p):
        x = np.asarray(p, dtype=float)
        return bool(np.all(x >= np.asarray(self.lo)) and np.all(x <= np.asarray(self.hi)))

    def shrink(self, fraction):
        """Box with each side pulled in by ``fraction`` of its width."""
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        pad = fraction * (hi - lo)
        return Box(tuple(lo + pad), tuple(hi - pad))

    def sample(self, count, seed=0, margin=0.05):
        """Deterministic scrambled Halton points inside the shrunk box."""
        inner = self.shrink(margin)
        sampler = qmc.Halton(d=self.dim, scramble=True, seed=seed)
        unit = sampler.random(count)
        return qmc.scale(unit, inner.lo, inner.hi)


@dataclass(frozen=True)
class TensorComponents:
    """Components of a tensor at a point together with slot variances."""

    data: np.ndarray
    variance: tuple

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        variance = tuple(self.variance)
        if data.ndim != len(variance):
            raise ValueError(f"rank {data.ndim} does not match variance {variance}")
        if data.ndim > 4:
            raise ValueError("ranks above 4 are not supported")
        if data.ndim and len(set(data.shape)) != 1:
            raise DimensionMismatch(f"non-square component array {data.shape}")
        if any(v not in (UPPER, LOWER) for v in variance):
            raise ValueError(f"unknown variance flags {variance}")
        if not np.all(np.isfinite(data)):
            raise ValueError("non-finite tensor components")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "variance", variance)

    @property
    def rank(self):
        return self.data.ndim

    @property
    def dim(self):
        return self.data.shape[0] if self.data.ndim else 0


def _central(evaluate, x, axis, h, domain):
    step = np.zeros_like(x)
    step[axis] = h
    plus, minus = x + step, x - step
    if domain is not None:
        for q in (plus, minus):
            if not domain.contains(q):
                raise DomainEscape(
                    f"stencil point {q.tolist()} lies outside the chart domain", q
                )
    return (evaluate(plus) - evaluate(minus)) / (2.0 * h)


class ChartField:
    """A smooth tensor field on a chart.

    ``evaluator(x)`` returns the components at ``x``. Optional ``jet`` and
    ``jet2`` callables return exact derivatives ``(value, d)`` and
    ``(value, d, dd)``; when absent, central differences are used.
    """

    def __init__(self, dim, variance, evaluator, domain=None, fd_step=None,
                 jet=None, jet2=None, name="field"):
        if fd_step is not None and not fd_step > 0:
            raise ValueError("fd_step must be positive")
        if domain is not None and domain.dim != dim:
            raise DimensionMismatch("field and domain dimensions differ")
        self.dim = int(dim)
        self.variance = tuple(variance)
        self.evaluator = evaluator
        self.domain = domain
        self.fd_step = fd_step
        self._jet = jet
        self._jet2 = jet2
        self.name = name

    @property
    def rank(self):
        return len(self.variance)

    @property
    def has_exact_jet(self):
        return self._jet is not None or self._jet2 is not None

    def __call__(self, p):
        x = as_point(p, self.dim)
        value = np.asarray(self.evaluator(x), dtype=float)
        expected = (self.dim,) * self.rank
        if value.shape != expected:
            raise DimensionMismatch(f"{self.name}: shape {value.shape}, expected {expected}")
        if not np.all(np.isfinite(value)):
            raise ValueError(f"{self.name}: non-finite components at {x.tolist()}")
        return value

    def components(self, p):
        return TensorComponents(self(p), self.variance)

    def step(self, p, axis, h=None):
        """Per-axis step h * max(1, |x_axis|)."""
        base = h if h is not None else (self.fd_step or default_step())
        return base * max(1.0, abs(float(p[axis])))

    def fd_gradient(self, p, h=None, evaluate=None):
        """Central differences along every axis, stacked on a trailing axis."""
        x = as_point(p, self.dim)
        evaluate = evaluate or self
        parts = [_central(evaluate, x, a, self.step(x, a, h), self.domain)
                 for a in range(self.dim)]
        return np.stack(parts, axis=-1)

    def jet(self, p, h=None):
        """Value and first derivatives."""
        x = as_point(p, self.dim)
        if self._jet is not None:
            value, d = self._jet(x)
            return np.asarray(value, float), np.asarray(d, float)
        if self._jet2 is not None:
            value, d, _ = self._jet2(x)
            return np.asarray(value, float), np.asarray(d, float)
        return self(x), self.fd_gradient(x, h)

    def jet2(self, p, h=None):
        """Value, first and second derivatives (second ones symmetrized)."""
        x = as_point(p, self.dim)
        if self._jet2 is not None:
            value, d, dd = self._jet2(x)
            return np.asarray(value, float), np.asarray(d, float), np.asarray(dd, float)
        value, d = self.jet(x, h)
        dd = self.fd_gradient(x, h, evaluate=lambda q: self.jet(q, h)[1])
        dd = 0.5 * (dd + np.swapaxes(dd, -1, -2))
        return value, d, dd


def partial_derivative(field, p, axis, h=None):
    """Central difference of ``field`` along ``axis`` at ``p``.

    Raises DomainEscape when ``p +- h e_axis`` leaves the field's domain.
    """
    x = as_point(p, field.dim)
    if not 0 <= axis < field.dim:
        raise IndexError(f"axis {axis} out of range for dimension {field.dim}")
    return _central(field, x, axis, field.step(x, axis, h), field.domain)


@dataclass(frozen=True)
class MetricAtPoint:
    g: np.ndarray
    g_inv: np.ndarray
    det_g: float
    sqrt_abs_det: float
    signature: tuple


def inverse_metric(g):
    """Inverse of a symmetric matrix through pivoted LU, re-symmetrized."""
    inv = np.linalg.inv(g)
    return 0.5 * (inv + inv.T)


def metric_at(g_field, p):
    """Validated metric, inverse, determinant and signature at ``p``."""
    g = g_field(p) if callable(g_field) else np.asarray(g_field, float)
    scale = max(1.0, float(np.max(np.abs(g))))
    asym = float(np.max(np.abs(g - g.T)))
    if asym > 1e-12 * scale:
        raise AsymmetricMetric(f"metric asymmetry {asym:.3e} at {np.asarray(p).tolist()}")
    g = 0.5 * (g + g.T)
    det = float(np.linalg.det(g))
    if not abs(det) >= 1e-14 * scale ** g.shape[0]:
        raise SingularMetric(f"|det g| = {abs(det):.3e} at {np.asarray(p).tolist()}")
    g_inv = inverse_metric(g)
    signature = tuple(int(s) for s in np.sign(np.linalg.eigvalsh(g)))
    return MetricAtPoint(g, g_inv, det, float(np.sqrt(abs(det))), signature)


def log_sqrt_det_gradient(g_field, p, route="contraction", h=None):
    """d_i log sqrt|g|, either as 1/2 g^pq d_i g_pq or by differencing log sqrt|g|."""
    x = as_point(p, g_field.dim)
    if route == "contraction":
        g, dg = g_field.jet(x, h)
        g_inv = metric_at(g, x).g_inv
        return 0.5 * np.einsum("pq,pqi->i", g_inv, dg)
    if route == "fd":
        def log_vol(q):
            return np.log(metric_at(g_field(q), q).sqrt_abs_det)
        return np.array([_central(log_vol, x, a, g_field.step(x, a, h), g_field.domain)
                         for a in range(g_field.dim)])
    raise ValueError(f"unknown route {route!r}")


def relative_residual(residual, *terms):
    """max|residual| over the largest magnitude among the terms, floored."""
    num = float(np.max(np.abs(residual))) if np.size(residual) else 0.0
    scale = max((float(np.max(np.abs(t))) for t in terms if np.size(t)), default=0.0)
    return num / max(scale, _scale_floor.get())


@contextmanager
def scale_floor(value):
    """Within the block, relative residuals never divide by less than value.

    Used to measure identities whose two sides both vanish (flat or
    torsion-free cases) against the size of the geometry instead of roundoff.
    """
    token = _scale_floor.set(max(float(value), RESIDUAL_FLOOR))
    try:
        yield
    finally:
        _scale_floor.reset(token)


def _monomial_jets(x, exps):
    """Monomials prod_a x_a^e_a with their exact gradients and Hessians."""
    e = exps.astype(float)
    xa = x[None, :]
    f = np.where(exps > 0, xa ** np.maximum(e, 0), 1.0)
    df = np.where(exps > 0, e * xa ** np.maximum(e - 1, 0), 0.0)
    ddf = np.where(exps > 1, e * (e - 1) * xa ** np.maximum(e - 2, 0), 0.0)
    nterms, n = exps.shape
    m = np.prod(f, axis=1)
    dm = np.empty((nterms, n))
    ddm = np.empty((nterms, n, n))
    for a in range(n):
        rest = np.prod(np.delete(f, a, axis=1), axis=1)
        dm[:, a] = df[:, a] * rest
        ddm[:, a, a] = ddf[:, a] * rest
        for b in range(a + 1, n):
            rest2 = np.prod(np.delete(f, [a, b], axis=1), axis=1)
            ddm[:, a, b] = ddm[:, b, a] = df[:, a] * df[:, b] * rest2
    return m, dm, ddm


def polynomial_field(exponents, coefficients, variance, domain=None, name="polynomial"):
    """Tensor field sum_t coefficients[t] * x^exponents[t] with exact jets.

    ``exponents`` has shape (terms, n); ``coefficients`` has shape
    (terms, n, ..., n) matching ``variance``.
    """
    exps = np.asarray(exponents, dtype=int)
    coefs = np.asarray(coefficients, dtype=float)
    if exps.ndim != 2 or coefs.shape[0] != exps.shape[0]:
        raise ValueError("exponents and coefficients disagree on the number of terms")
    if np.any(exps < 0):
        raise ValueError("negative exponents are not polynomial")
    n = exps.shape[1]
    if coefs.shape[1:] != (n,) * len(variance):
        raise DimensionMismatch(f"coefficient shape {coefs.shape[1:]} for dimension {n}")

    def jet2(x):
        m, dm, ddm = _monomial_jets(x, exps)
        value = np.tensordot(m, coefs, axes=(0, 0))
        d = np.moveaxis(np.tensordot(dm, coefs, axes=(0, 0)), 0, -1)
        dd = np.moveaxis(np.tensordot(ddm, coefs, axes=(0, 0)), (0, 1), (-2, -1))
        return value, d, dd

    def evaluate(x):
        m, _, _ = _monomial_jets(x, exps)
        return np.tensordot(m, coefs, axes=(0, 0))

    field = ChartField(n, variance, evaluate, domain=domain, jet2=jet2, name=name)
    field.exponents = exps
    field.coefficients = coefs
    return field


def with_domain(field, domain):
    """Same field restricted to a new domain box."""
    return ChartField(field.dim, field.variance, field.evaluator, domain=domain,
                      fd_step=field.fd_step, jet=field._jet, jet2=field._jet2,
                      name=field.name)
