"""Closed curves of prescribed geodesic curvature on conformal 2-spheres.

Solvers and certification tools for the equation D_t v = |v|_g k(x) J v on
(S^2, e^phi g_can): spectral discretization of loops, gauge-fixed Newton,
magnetic-flow shooting, homotopy continuation from the round-sphere circle
family, and a verification suite (length bounds, Gauss-Bonnet, rotation
index, embeddedness classification).
"""

from .errors import MagloopError
from .fields import FieldPair, SphericalField, field_infimum, homotopy_fields
from .geometry import ConformalMetric, SpherePoint, TangentVector
from .loops import DiscreteLoop

__all__ = [
    "MagloopError",
    "FieldPair",
    "SphericalField",
    "field_infimum",
    "homotopy_fields",
    "ConformalMetric",
    "SpherePoint",
    "TangentVector",
    "DiscreteLoop",
]

__version__ = "0.1.0"
