"""Bundles with special structure used only by the tests."""

import numpy as np

from igcurv import connections as cn
from igcurv.chart_core import LOWER, Box, polynomial_field


def flat_metric(dim):
    return polynomial_field([[0] * dim], [np.eye(dim)], (LOWER, LOWER), Box.cube(dim))


def harmonic_cubic_bundle(u, v):
    """Statistical bundle on flat R^2 whose cubic has both traces identically zero.

    C_000 = u, C_011 = -u, C_111 = v, C_001 = -v (totally symmetric), with
    u, v given as {exponent: coefficient}. Constant u, v also make Div0 K vanish.
    """
    exps = sorted(set(u) | set(v))
    coefs = []
    for e in exps:
        a, b = u.get(e, 0.0), v.get(e, 0.0)
        c = np.zeros((2, 2, 2))
        c[0, 0, 0] = a
        c[0, 1, 1] = c[1, 0, 1] = c[1, 1, 0] = -a
        c[1, 1, 1] = b
        c[0, 0, 1] = c[0, 1, 0] = c[1, 0, 0] = -b
        coefs.append(c)
    cf = polynomial_field(exps, coefs, (LOWER,) * 3, Box.cube(2))
    return cn.statistical_pair_from_cubic(flat_metric(2), cf, name="harmonic_cubic")
