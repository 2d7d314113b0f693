"""Numerical potential theory on singular area-minimizing cones over products of spheres."""

from conelab.cone_geometry import ConePoint, ConeSpec, Pencil, STransform, make_cone
from conelab.radial_calculus import GreenEvaluator, OperatorSpec, indicial_roots

__all__ = [
    "ConePoint",
    "ConeSpec",
    "GreenEvaluator",
    "OperatorSpec",
    "Pencil",
    "STransform",
    "indicial_roots",
    "make_cone",
]

__version__ = "0.1.0"
