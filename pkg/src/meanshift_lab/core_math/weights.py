"""Symmetric log-concave weight densities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InvalidParam

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class WeightFamily(str, Enum):
    NORMAL = "normal"
    DOUBLE_EXPONENTIAL = "dexp"


# Integer codes shared with the compiled kernels.
FAMILY_CODES = {WeightFamily.NORMAL: 0, WeightFamily.DOUBLE_EXPONENTIAL: 1}


@dataclass(frozen=True)
class WeightFunction:
    """A normal (sd ``scale``) or Laplace (scale ``b``) density centred at 0.

    Every evaluation goes through ``|x|`` so ``w(x) == w(-x)`` holds bitwise.
    """

    family: WeightFamily
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "family", WeightFamily(self.family))
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidParam(f"weight scale must be positive and finite, got {self.scale!r}")

    @classmethod
    def normal(cls, sigma: float = 1.0) -> "WeightFunction":
        return cls(WeightFamily.NORMAL, float(sigma))

    @classmethod
    def double_exponential(cls, b: float = 1.0) -> "WeightFunction":
        return cls(WeightFamily.DOUBLE_EXPONENTIAL, float(b))

    @classmethod
    def parse(cls, spec: str) -> "WeightFunction":
        """Parse ``normal:<sigma>`` or ``dexp:<b>``."""
        name, sep, value = spec.strip().partition(":")
        if not sep:
            raise InvalidParam(f"weight spec {spec!r} must look like 'normal:<sigma>' or 'dexp:<b>'")
        try:
            scale = float(value)
        except ValueError:
            raise InvalidParam(f"weight scale {value!r} is not a number") from None
        aliases = {"normal": WeightFamily.NORMAL, "gauss": WeightFamily.NORMAL,
                   "dexp": WeightFamily.DOUBLE_EXPONENTIAL, "laplace": WeightFamily.DOUBLE_EXPONENTIAL}
        if name.lower() not in aliases:
            raise InvalidParam(f"unknown weight family {name!r}")
        return cls(aliases[name.lower()], scale)

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    def spec(self) -> str:
        return f"{self.family.value}:{self.scale!r}"

    def __call__(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        s = self.scale
        if self.family is WeightFamily.NORMAL:
            out = np.exp(-0.5 * (a / s) ** 2) / (s * _SQRT_2PI)
        else:
            out = np.exp(-a / s) / (2.0 * s)
        return out if out.ndim else float(out)

    def log(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        s = self.scale
        if self.family is WeightFamily.NORMAL:
            out = -0.5 * (a / s) ** 2 - math.log(s * _SQRT_2PI)
        else:
            out = -a / s - math.log(2.0 * s)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """dw/dx; for the Laplace density the value at 0 is taken as 0."""
        x = np.asarray(x, dtype=float)
        if self.family is WeightFamily.NORMAL:
            out = -x / self.scale**2 * self(x)
        else:
            out = -np.sign(x) / self.scale * self(x)
        return out if np.ndim(out) else float(out)

    def standard_deviation(self) -> float:
        if self.family is WeightFamily.NORMAL:
            return self.scale
        return math.sqrt(2.0) * self.scale


def weight_eval(w: WeightFunction, x):
    return w(x)
