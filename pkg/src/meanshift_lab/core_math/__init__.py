from .interpolation import MonotoneGridFunction, invert_monotone
from .quadrature import Quadrature, integrate
from .weights import WeightFamily, WeightFunction, weight_eval

__all__ = [
    "MonotoneGridFunction",
    "Quadrature",
    "WeightFamily",
    "WeightFunction",
    "integrate",
    "invert_monotone",
    "weight_eval",
]
