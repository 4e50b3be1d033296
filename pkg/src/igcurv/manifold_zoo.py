"""Built-in geometries, seeded random bundles and JSON manifold documents."""

import itertools
import json
import math
import re
from pathlib import Path

import numpy as np

from .chart_core import ALGEBRAIC_TOL, LOWER, UPPER, Box, ChartField, polynomial_field
from .connections import (
    GENERAL,
    PRE_STATISTICAL,
    QUASI_STATISTICAL,
    STATISTICAL,
    SYMMETRIC_LAST_TWO,
    TOTALLY_SYMMETRIC,
    ConnectionField,
    GeometryBundle,
    connection_bundle,
    cubic_symmetry_defect,
    difference_from_cubic,
    levi_civita_bundle,
    levi_civita_connection,
    metric_jet,
    statistical_pair_from_cubic,
    validate_bundle,
)
from .errors import (
    CubicSymmetryViolation,
    GenerationFailure,
    NonpositiveParameter,
    ParseError,
    ValidationError,
)

QUADRATURE_NODES = 64
MAX_RETRIES = 10
LOAD_CHECK_POINTS = 50

DUAL_QUASI = "dual_quasi"
RECOVERED = "recovered"
RANDOM_KINDS = (STATISTICAL, QUASI_STATISTICAL, GENERAL, PRE_STATISTICAL, DUAL_QUASI, RECOVERED)


# ------------------------------------------------------------------ Gaussian family

def gaussian_moments(nodes=QUADRATURE_NODES):
    """Second and third moments of the standardized score (z, z^2 - 1) of N(0, 1)."""
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    s = np.stack([z, z * z - 1.0])
    m2 = np.einsum("q,iq,jq->ij", w, s, s)
    m3 = np.einsum("q,iq,jq,kq->ijk", w, s, s, s)
    return m2, m3


def gaussian_family(nodes=QUADRATURE_NODES):
    """Normal densities in the chart (mu, sigma) with Fisher metric and skewness cubic.

    The score of log p is (z/sigma, (z^2 - 1)/sigma) with z = (x - mu)/sigma,
    so g = M2 / sigma^2 and C = M3 / sigma^3 with M2, M3 from quadrature.
    nabla is the alpha = 1 (exponential) connection and nabla* the alpha = -1 one.
    """
    m2, m3 = gaussian_moments(nodes)
    domain = Box(np.array([-1.0, 0.5]), np.array([1.0, 2.0]))

    def g_jet2(x):
        s = x[1]
        d = np.zeros((2, 2, 2))
        dd = np.zeros((2, 2, 2, 2))
        d[..., 1] = -2.0 * m2 / s**3
        dd[..., 1, 1] = 6.0 * m2 / s**4
        return m2 / s**2, d, dd

    def c_jet(x):
        s = x[1]
        d = np.zeros((2, 2, 2, 2))
        d[..., 1] = -3.0 * m3 / s**4
        return m3 / s**3, d

    g = ChartField(2, (LOWER, LOWER), lambda x: g_jet2(x)[0], domain, jet2=g_jet2,
                   name="fisher_metric")
    c = ChartField(2, (LOWER,) * 3, lambda x: c_jet(x)[0], domain, jet=c_jet,
                   name="skewness")
    return statistical_pair_from_cubic(g, c, TOTALLY_SYMMETRIC, domain, name="gaussian_family")


# ---------------------------------------------------------------- classical charts

def sphere(radius=1.0):
    """Round sphere of the given radius in (theta, phi), Levi-Civita on both sides."""
    radius = float(radius)
    if not radius > 0:
        raise NonpositiveParameter(f"sphere radius must be positive, got {radius}")
    r2 = radius * radius
    domain = Box(np.array([0.1, -math.pi]), np.array([math.pi - 0.1, math.pi]))

    def jet2(x):
        th = x[0]
        s, c = math.sin(th), math.cos(th)
        g = np.diag([r2, r2 * s * s])
        d = np.zeros((2, 2, 2))
        dd = np.zeros((2, 2, 2, 2))
        d[1, 1, 0] = 2.0 * r2 * s * c
        dd[1, 1, 0, 0] = 2.0 * r2 * (c * c - s * s)
        return g, d, dd

    g = ChartField(2, (LOWER, LOWER), lambda x: jet2(x)[0], domain, jet2=jet2,
                   name=f"sphere({radius:g})")
    return levi_civita_bundle(g, domain, name=f"sphere(radius={radius:g})")


def euclidean(dim=3):
    dim = int(dim)
    if dim < 1:
        raise NonpositiveParameter(f"dimension must be positive, got {dim}")
    domain = Box.cube(dim)
    g = polynomial_field(np.zeros((1, dim), int), np.eye(dim)[None], (LOWER, LOWER), domain,
                         name="euclidean")
    return levi_civita_bundle(g, domain, name=f"euclidean(dim={dim})")


def _power_scale(power):
    def jet(t):
        return t**power, power * t ** (power - 1), power * (power - 1) * t ** (power - 2)
    return jet


def diagonal_cosmo(scale_fn=None, scale_jet=None, power=1.0):
    """Lorentzian metric diag(-1, a(t)^2, a(t)^2, a(t)^2) on t in [0.5, 2], x in [-1, 1]^3.

    ``scale_jet(t) -> (a, a', a'')`` gives exact derivatives; with only
    ``scale_fn`` they come from central differences. Default a(t) = t^power.
    """
    domain = Box(np.array([0.5, -1.0, -1.0, -1.0]), np.array([2.0, 1.0, 1.0, 1.0]))
    if scale_jet is None and scale_fn is None:
        scale_jet = _power_scale(float(power))
    for t in np.linspace(domain.lo[0], domain.hi[0], 33):
        a = scale_jet(t)[0] if scale_jet is not None else scale_fn(t)
        if not a > 0:
            raise NonpositiveParameter(f"scale factor must be positive, got {a} at t={t:g}")

    def metric(x):
        a = scale_jet(x[0])[0] if scale_jet is not None else scale_fn(x[0])
        return np.diag([-1.0, a * a, a * a, a * a])

    jet2 = None
    if scale_jet is not None:
        def jet2(x):
            a, da, dda = scale_jet(x[0])
            d = np.zeros((4, 4, 4))
            dd = np.zeros((4, 4, 4, 4))
            for i in range(1, 4):
                d[i, i, 0] = 2.0 * a * da
                dd[i, i, 0, 0] = 2.0 * (da * da + a * dda)
            return metric(x), d, dd

    g = ChartField(4, (LOWER, LOWER), metric, domain, jet2=jet2, name="cosmo_metric")
    return levi_civita_bundle(g, domain, name="diagonal_cosmo")


# ------------------------------------------------------------------ random bundles

def exponent_table(dim, degree):
    """All exponent tuples of total degree <= ``degree``, in a fixed order."""
    return np.array([e for e in itertools.product(range(degree + 1), repeat=dim)
                     if sum(e) <= degree], dtype=int)


def random_metric(rng, dim, domain):
    """g = A(x) A(x)^T + 2 I with A affine, entries in [-0.3, 0.3]."""
    e1 = exponent_table(dim, 1)
    a = rng.uniform(-0.3, 0.3, (len(e1), dim, dim))
    exps, coefs = [], []
    for (i, ea), (j, eb) in itertools.product(enumerate(e1), repeat=2):
        exps.append(ea + eb)
        coefs.append(a[i] @ a[j].T)
    exps.append(np.zeros(dim, int))
    coefs.append(2.0 * np.eye(dim))
    return polynomial_field(np.array(exps), np.array(coefs), (LOWER, LOWER), domain,
                            name="random_metric")


def symmetrize_cubic(coefs, mode):
    """Symmetrize stacked cubic coefficients (terms, n, n, n) as required by ``mode``."""
    if mode == TOTALLY_SYMMETRIC:
        perms = list(itertools.permutations(range(3)))
        return sum(np.transpose(coefs, (0,) + tuple(1 + np.array(p))) for p in perms) / 6.0
    return 0.5 * (coefs + np.swapaxes(coefs, 2, 3))


def random_cubic(rng, dim, domain, mode):
    e2 = exponent_table(dim, 2)
    c = symmetrize_cubic(rng.uniform(-0.5, 0.5, (len(e2), dim, dim, dim)), mode)
    return polynomial_field(e2, c, (LOWER,) * 3, domain, name=f"random_cubic_{mode}")


def _shifted_connection(base, shift_field, scale=1.0, name="shifted"):
    """Coefficients base + scale * g^-1-free shift given directly as (1,2) components."""
    def jet(x):
        gamma, dgamma = base.jet(x)
        s, ds = shift_field.jet(x)
        return gamma + scale * s, dgamma + scale * ds
    return ConnectionField(base.dim, jet, base.domain, name)


def _raised_shift(g_field, low_field, name):
    """(1,2) field g^{mi} L_{i,jk} with exact first derivatives."""
    def jet(x):
        g, dg, ddg, g_inv, dg_inv = metric_jet(g_field, x)
        low, dlow = low_field.jet(x)
        return (np.einsum("mi,ijk->mjk", g_inv, low),
                np.einsum("mia,ijk->mjka", dg_inv, low) + np.einsum("mi,ijka->mjka", g_inv, dlow))
    return ChartField(g_field.dim, (UPPER, LOWER, LOWER), lambda x: jet(x)[0], g_field.domain,
                      jet=jet, name=name)


def _difference_field(g_field, c_field):
    """K^m_ki = g^mj C_ijk as a field with exact jets."""
    def jet(x):
        g, dg, ddg, g_inv, dg_inv = metric_jet(g_field, x)
        c, dc = c_field.jet(x)
        return (difference_from_cubic(g_inv, c),
                np.einsum("mja,ijk->mkia", dg_inv, c) + np.einsum("mj,ijka->mkia", g_inv, dc))
    return ChartField(g_field.dim, (UPPER, LOWER, LOWER), lambda x: jet(x)[0], g_field.domain,
                      jet=jet, name="difference")


def _antisymmetric_lowered(rng, dim, domain):
    """(0,3) polynomial field L_{mik}, degree 1, antisymmetric in its first two slots.

    Raised into the coefficients it leaves the nonmetricity unchanged but still
    carries torsion, also in 2D where totally antisymmetric 3-forms vanish.
    """
    e1 = exponent_table(dim, 1)
    raw = rng.uniform(-0.4, 0.4, (len(e1), dim, dim, dim))
    return polynomial_field(e1, 0.5 * (raw - raw.transpose(0, 2, 1, 3)), (LOWER,) * 3, domain,
                            name="antisymmetric")


def _generate(kind, dim, rng, domain):
    g = random_metric(rng, dim, domain)
    if kind == STATISTICAL:
        return statistical_pair_from_cubic(g, random_cubic(rng, dim, domain, TOTALLY_SYMMETRIC),
                                           TOTALLY_SYMMETRIC, domain, name="random_statistical")
    if kind in (QUASI_STATISTICAL, DUAL_QUASI):
        b = statistical_pair_from_cubic(g, random_cubic(rng, dim, domain, SYMMETRIC_LAST_TWO),
                                        SYMMETRIC_LAST_TWO, domain, name="random_quasi")
        if kind == DUAL_QUASI:
            return GeometryBundle(g, b.nabla_star, b.nabla, domain, GENERAL, "random_dual_quasi")
        return b
    lc = levi_civita_connection(g)
    if kind == PRE_STATISTICAL:
        # LC - 1/2 g^-1 C plus a metric-compatible shift: C stays totally symmetric.
        c = random_cubic(rng, dim, domain, TOTALLY_SYMMETRIC)
        base = _shifted_connection(lc, _difference_field(g, c), -0.5, "pre_base")
        conn = _shifted_connection(base, _raised_shift(g, _antisymmetric_lowered(rng, dim, domain),
                                                      "antisymmetric"), 1.0, "pre_statistical")
        return connection_bundle(g, conn, domain, PRE_STATISTICAL, "random_pre_statistical")
    if kind == RECOVERED:
        # nabla = LC - K/2, nabla* = LC + K/2 from a last-two-symmetric cubic.
        k = _difference_field(g, random_cubic(rng, dim, domain, SYMMETRIC_LAST_TWO))
        conn = _shifted_connection(lc, k, -0.5, "recovered")
        star = _shifted_connection(lc, k, 0.5, "recovered_dual")
        return GeometryBundle(g, conn, star, domain, GENERAL, "random_recovered")
    if kind == GENERAL:
        e1 = exponent_table(dim, 1)
        b = polynomial_field(e1, rng.uniform(-0.3, 0.3, (len(e1), dim, dim, dim)),
                             (UPPER, LOWER, LOWER), domain, name="random_shift")
        conn = _shifted_connection(lc, b, 1.0, "random_general")
        return connection_bundle(g, conn, domain, GENERAL, "random_general")
    raise ValueError(f"unknown bundle kind {kind!r}; expected one of {RANDOM_KINDS}")


def _acceptable(bundle, kind, seed):
    worst = validate_bundle(bundle, 20, seed)
    if max(worst.values()) > ALGEBRAIC_TOL:
        return False
    if kind == QUASI_STATISTICAL:
        pts = bundle.points(20, seed)
        return max(float(np.max(np.abs(bundle.at(x).T_star))) for x in pts) >= 1e-3
    return True


def random_bundle(kind=STATISTICAL, dim=2, seed=0):
    """Seeded random bundle of the requested kind on [-1, 1]^dim.

    Kinds beyond the three standard ones (pre_statistical, dual_quasi,
    recovered) exist to exercise the equivalence chains.
    """
    if kind not in RANDOM_KINDS:
        raise ValueError(f"unknown bundle kind {kind!r}; expected one of {RANDOM_KINDS}")
    dim = int(dim)
    if not 2 <= dim <= 4:
        raise ValueError(f"random bundles support dimensions 2..4, got {dim}")
    domain = Box.cube(dim)
    for attempt in range(MAX_RETRIES):
        rng = np.random.default_rng([int(seed), attempt])
        try:
            bundle = _generate(kind, dim, rng, domain)
        except (np.linalg.LinAlgError, CubicSymmetryViolation):
            continue
        if _acceptable(bundle, kind, seed):
            return bundle
    raise GenerationFailure(f"no valid {kind} bundle in dimension {dim} for seed {seed} "
                            f"after {MAX_RETRIES} attempts")


# ------------------------------------------------------------------ documents

BUILTINS = {
    "gaussian_family": lambda **kw: gaussian_family(**_typed(kw, nodes=int)),
    "sphere": lambda **kw: sphere(**_typed(kw, radius=float)),
    "euclidean": lambda **kw: euclidean(**_typed(kw, dim=int)),
    "diagonal_cosmo": lambda **kw: diagonal_cosmo(**_typed(kw, power=float)),
    "random": lambda **kw: random_bundle(**_typed(kw, kind=str, dim=int, seed=int)),
}


def _typed(params, **types):
    out = {}
    for key, value in params.items():
        if key not in types:
            raise ParseError(f"unknown parameter {key!r}; expected one of {sorted(types)}",
                             f"$.{key}")
        try:
            out[key] = types[key](value)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad value {value!r}: {exc}", f"$.{key}") from None
    return out


def parse_builtin(text):
    """'name' or 'name:key=value,key=value' to a document dict."""
    name, _, rest = text.partition(":")
    doc = {"name": name.strip()}
    if rest.strip():
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ParseError(f"expected key=value, got {item!r}", text)
            doc[key.strip()] = value.strip()
    return doc


def _exponent(text, dim, where):
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    if len(parts) == 1 and len(parts[0]) == dim and parts[0].isdigit() and dim > 1:
        parts = list(parts[0])
    try:
        exps = [int(p) for p in parts]
    except ValueError:
        raise ParseError(f"exponent {text!r} is not a list of integers", where) from None
    if len(exps) != dim or any(e < 0 for e in exps):
        raise ParseError(f"exponent {text!r} needs {dim} non-negative integers", where)
    return tuple(exps)


def _index(text, rank, dim, where):
    try:
        idx = tuple(int(p) for p in re.split(r"[,\s]+", str(text).strip()) if p)
    except ValueError:
        raise ParseError(f"component {text!r} is not an index tuple", where) from None
    if len(idx) != rank or any(not 0 <= i < dim for i in idx):
        raise ParseError(f"component {text!r} needs {rank} indices in 0..{dim - 1}", where)
    return idx


def _polynomial_terms(terms, where, dim):
    if not isinstance(terms, dict):
        raise ParseError("polynomial must map exponent strings to coefficients", where)
    out = {}
    for key, coef in terms.items():
        if not isinstance(coef, (int, float)) or isinstance(coef, bool):
            raise ParseError(f"coefficient {coef!r} is not a number", f"{where}.{key}")
        out[_exponent(key, dim, f"{where}.{key}")] = float(coef)
    return out


def _tensor_polynomial(components, rank, dim, variance, domain, where, name):
    """{index string: {exponent string: coefficient}} to a polynomial field."""
    if not isinstance(components, dict):
        raise ParseError("expected an object of components", where)
    table = {}
    for key, terms in components.items():
        idx = _index(key, rank, dim, f"{where}.{key}")
        for exp, coef in _polynomial_terms(terms, f"{where}.{key}", dim).items():
            table.setdefault(exp, np.zeros((dim,) * rank))[idx] += coef
    if not table:
        table[(0,) * dim] = np.zeros((dim,) * rank)
    exps = sorted(table)
    return polynomial_field(np.array(exps), np.array([table[e] for e in exps]), variance, domain,
                            name=name)


def _require(doc, key, where):
    if key not in doc:
        raise ParseError(f"missing required key {key!r}", where)
    return doc[key]


def _metric_from(doc, dim, domain):
    spec = _require(doc, "metric", "$")
    if not isinstance(spec, dict):
        raise ParseError("metric must be an object", "$.metric")
    kind = _require(spec, "kind", "$.metric")
    if kind == "diag":
        entries = _require(spec, "entries", "$.metric")
        if not isinstance(entries, list) or len(entries) != dim:
            raise ParseError(f"diag metric needs {dim} entries", "$.metric.entries")
        comps = {f"{i},{i}": e for i, e in enumerate(entries)}
        return _tensor_polynomial(comps, 2, dim, (LOWER, LOWER), domain, "$.metric.entries",
                                  "metric")
    if kind == "polynomial":
        terms = _require(spec, "terms", "$.metric")
        field = _tensor_polynomial(terms, 2, dim, (LOWER, LOWER), domain, "$.metric.terms",
                                   "metric")
        coefs = field.coefficients
        upper = np.triu(np.ones((dim, dim), bool), 1)
        lower_given = np.any(np.abs(np.where(upper.T, coefs, 0.0)) > 0)
        upper_given = np.any(np.abs(np.where(upper, coefs, 0.0)) > 0)
        if lower_given and upper_given:
            if not np.allclose(coefs, np.swapaxes(coefs, 1, 2), rtol=0, atol=1e-14):
                raise ValidationError("metric symmetry", "off-diagonal components disagree")
            sym = coefs
        else:
            sym = coefs + np.swapaxes(coefs, 1, 2) - np.einsum("tii->ti", coefs)[..., None] \
                * np.eye(dim)
        return polynomial_field(field.exponents, sym, (LOWER, LOWER), domain, name="metric")
    raise ParseError(f"unknown metric kind {kind!r}; expected 'diag' or 'polynomial'",
                     "$.metric.kind")


def _domain_from(doc, dim):
    raw = doc.get("domain")
    if raw is None:
        return Box.cube(dim)
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("domain must be a list of [lo, hi] pairs", "$.domain") from None
    if arr.shape != (dim, 2):
        raise ParseError(f"domain needs {dim} [lo, hi] pairs", "$.domain")
    if np.any(arr[:, 0] >= arr[:, 1]):
        raise ValidationError("domain nonempty", "every lo must be below its hi")
    return Box(arr[:, 0], arr[:, 1])


def _check_metric(g, domain):
    for x in domain.sample(LOAD_CHECK_POINTS, 0):
        m = g(x)
        if not np.all(np.isfinite(m)):
            raise ValidationError("metric finite", f"at {x.tolist()}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if abs(np.linalg.det(m)) < 1e-10 * scale**len(x):
            raise ValidationError("metric invertible", f"near-singular at {x.tolist()}")


def bundle_from_document(doc):
    """Build a bundle from a parsed manifold document (dict)."""
    if not isinstance(doc, dict):
        raise ParseError("manifold document must be a JSON object", "$")
    if "name" in doc and "metric" not in doc:
        params = {k: v for k, v in doc.items() if k != "name"}
        name = doc["name"]
        if name not in BUILTINS:
            raise ParseError(f"unknown built-in {name!r}; expected one of {sorted(BUILTINS)}",
                             "$.name")
        return BUILTINS[name](**params)
    dim = _require(doc, "dim", "$")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError("dim must be a positive integer", "$.dim")
    domain = _domain_from(doc, dim)
    g = _metric_from(doc, dim, domain)
    _check_metric(g, domain)
    label = str(doc.get("name", "document"))

    if "connection" in doc:
        conn = ConnectionField.from_field(_tensor_polynomial(
            doc["connection"], 3, dim, (UPPER, LOWER, LOWER), domain, "$.connection",
            "connection"))
        star = None
        if "dual_connection" in doc:
            star = ConnectionField.from_field(_tensor_polynomial(
                doc["dual_connection"], 3, dim, (UPPER, LOWER, LOWER), domain,
                "$.dual_connection", "dual_connection"))
        return connection_bundle(g, conn, domain, GENERAL, label, star)

    cubic = doc.get("cubic", "zero")
    if cubic == "zero":
        return levi_civita_bundle(g, domain, label)
    if not isinstance(cubic, dict):
        raise ParseError("cubic must be 'zero' or an object", "$.cubic")
    terms = _require(cubic, "terms", "$.cubic")
    c = _tensor_polynomial(terms, 3, dim, (LOWER,) * 3, domain, "$.cubic.terms", "cubic")
    symmetry = cubic.get("symmetry")
    if symmetry not in (None, TOTALLY_SYMMETRIC, SYMMETRIC_LAST_TWO):
        raise ParseError(f"unknown cubic symmetry {symmetry!r}", "$.cubic.symmetry")
    coefs = c.coefficients
    scale = max(1.0, float(np.max(np.abs(coefs))))
    for t in coefs:
        defect, triple = cubic_symmetry_defect(t, SYMMETRIC_LAST_TWO)
        if defect > ALGEBRAIC_TOL * scale:
            raise ValidationError("cubic last-two symmetry",
                                  f"C{list(triple)} differs from its last-two transpose by "
                                  f"{defect:.3e}")
    total = all(cubic_symmetry_defect(t, TOTALLY_SYMMETRIC)[0] <= ALGEBRAIC_TOL * scale
                for t in coefs)
    if symmetry == TOTALLY_SYMMETRIC and not total:
        raise ValidationError("cubic total symmetry", "declared totally symmetric but is not")
    mode = symmetry or (TOTALLY_SYMMETRIC if total else SYMMETRIC_LAST_TWO)
    return statistical_pair_from_cubic(g, c, mode, domain, name=label)


def load_spec(document):
    """Bundle from a dict, a JSON string, a path to a JSON file, or a built-in name.

    Built-in names accept parameters as 'sphere:radius=2'.
    """
    if isinstance(document, dict):
        return bundle_from_document(document)
    if isinstance(document, Path) or (isinstance(document, str)
                                      and document.strip().endswith(".json")):
        path = Path(document)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc.strerror}", str(path)) from None
        return bundle_from_document(_parse_json(text, str(path)))
    text = str(document).strip()
    if text.startswith("{"):
        return bundle_from_document(_parse_json(text, "<string>"))
    return bundle_from_document(parse_builtin(text))


def _parse_json(text, source):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{source}:{exc.lineno}:{exc.colno}") from None


__all__ = [
    "gaussian_family", "gaussian_moments", "sphere", "euclidean", "diagonal_cosmo",
    "random_bundle", "load_spec", "parse_builtin", "bundle_from_document", "RANDOM_KINDS",
    "BUILTINS",
]
