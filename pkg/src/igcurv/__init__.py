"""Curvature, Einstein tensors and identity checks for dual affine connections on charts."""

from .chart_core import Box, ChartField, polynomial_field, relative_residual
from .connections import (
    GeometryBundle,
    alpha_connection,
    connection_bundle,
    dual_connection,
    equiaffine_shift,
    levi_civita_bundle,
    statistical_pair_from_cubic,
)
from .curvature import CurvaturePoint, ricci, riemann
from .einstein import alpha_einstein, einstein_tensor, h_tensor
from .errors import IgcurvError
from .identities import REGISTRY
from .manifold_zoo import (
    diagonal_cosmo,
    euclidean,
    gaussian_family,
    load_spec,
    random_bundle,
    sphere,
)

__all__ = [
    "Box", "ChartField", "polynomial_field", "relative_residual", "GeometryBundle",
    "alpha_connection", "connection_bundle", "dual_connection", "equiaffine_shift",
    "levi_civita_bundle", "statistical_pair_from_cubic", "CurvaturePoint", "ricci", "riemann",
    "alpha_einstein", "einstein_tensor", "h_tensor", "IgcurvError", "REGISTRY",
    "diagonal_cosmo", "euclidean", "gaussian_family", "load_spec", "random_bundle", "sphere",
]
