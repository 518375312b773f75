"""Exact deformation quantization: Moyal, Kontsevich and Fedosov star-products."""

from .algebra_core import LambdaSeries, ParseError, Poly, Scalar, parse_expression
from .deformation import StarProduct, associativity_defect, star_apply
from .moyal import FlatSymplectic, moyal_product, moyal_star, ordered_product
from .polydiff import PoissonStructure, PolyDiffOp, PolyVector

__version__ = "0.1.0"
