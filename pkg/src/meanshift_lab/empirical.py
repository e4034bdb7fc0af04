"""Samples, sampling distributions, empirical CDFs and seeded RNG streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import DataParseError, InvalidParam


class DistributionFamily(str, Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"
    STUDENT_T = "t"


@dataclass(frozen=True)
class SamplingDistribution:
    """Normal(mean, sd), Uniform(lo, hi) or StudentT(df); all symmetric about their mean."""

    family: DistributionFamily
    params: tuple[float, ...]

    def __post_init__(self):
        fam = DistributionFamily(self.family)
        object.__setattr__(self, "family", fam)
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if fam is DistributionFamily.NORMAL:
            if len(p) != 2 or not p[1] > 0:
                raise InvalidParam("Normal needs (mean, sd) with sd > 0")
        elif fam is DistributionFamily.UNIFORM:
            if len(p) != 2 or not p[0] < p[1]:
                raise InvalidParam("Uniform needs (lo, hi) with lo < hi")
        elif len(p) != 1 or not p[0] > 0:
            raise InvalidParam("StudentT needs df > 0")
        if not all(math.isfinite(v) for v in p):
            raise InvalidParam("distribution parameters must be finite")

    @classmethod
    def normal(cls, mean: float = 0.0, sd: float = 1.0):
        return cls(DistributionFamily.NORMAL, (mean, sd))

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0):
        return cls(DistributionFamily.UNIFORM, (lo, hi))

    @classmethod
    def student_t(cls, df: float = 3.0):
        return cls(DistributionFamily.STUDENT_T, (df,))

    @classmethod
    def parse(cls, spec: str) -> "SamplingDistribution":
        """``normal``, ``normal:<mean>,<sd>``, ``uniform:<lo>,<hi>``, ``t:<df>``."""
        name, _, rest = spec.strip().partition(":")
        name = name.lower()
        try:
            args = tuple(float(v) for v in rest.split(",")) if rest else ()
        except ValueError:
            raise InvalidParam(f"bad distribution parameters in {spec!r}") from None
        if name in ("normal", "norm", "gauss"):
            return cls.normal(*args) if args else cls.normal()
        if name in ("uniform", "unif"):
            return cls.uniform(*args) if args else cls.uniform()
        if name in ("t", "student", "studentt", "student-t"):
            return cls.student_t(*args) if args else cls.student_t()
        raise InvalidParam(f"unknown distribution {name!r}")

    def spec(self) -> str:
        return f"{self.family.value}:" + ",".join(repr(v) for v in self.params)

    @property
    def mean(self) -> float:
        if self.family is DistributionFamily.UNIFORM:
            return 0.5 * (self.params[0] + self.params[1])
        if self.family is DistributionFamily.NORMAL:
            return self.params[0]
        return 0.0

    @property
    def frozen(self):
        p = self.params
        if self.family is DistributionFamily.NORMAL:
            return stats.norm(loc=p[0], scale=p[1])
        if self.family is DistributionFamily.UNIFORM:
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        return stats.t(df=p[0])

    def pdf(self, x):
        return self.frozen.pdf(x)

    def cdf(self, x):
        return self.frozen.cdf(x)

    def ppf(self, u):
        return self.frozen.ppf(u)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.family is DistributionFamily.NORMAL:
            return p[0] + p[1] * rng.standard_normal(n)
        if self.family is DistributionFamily.UNIFORM:
            return p[0] + (p[1] - p[0]) * rng.random(n)
        # Exact construction: normal over sqrt(chi-square / df).
        z = rng.standard_normal(n)
        chi2 = 2.0 * rng.standard_gamma(0.5 * p[0], n)
        return z / np.sqrt(chi2 / p[0])


@dataclass(frozen=True)
class RngSeed:
    """A (seed, stream) pair mapped to an independent Philox stream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise InvalidParam(f"{name} must be an unsigned 64-bit integer")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def stream(self, stream_id: int) -> "RngSeed":
        return RngSeed(self.seed, stream_id)


@dataclass(frozen=True)
class Sample:
    values: np.ndarray
    sorted_flag: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 1:
            raise InvalidParam("a sample needs at least one value")
        if not np.all(np.isfinite(v)):
            raise InvalidParam("sample values must be finite")
        if self.sorted_flag and np.any(np.diff(v) < 0):
            raise InvalidParam("sorted_flag set but values are not nondecreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    def sorted(self) -> "Sample":
        return self if self.sorted_flag else Sample(np.sort(self.values), True)


@dataclass(frozen=True)
class EmpiricalCdf:
    sorted_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.sort(np.array(self.sorted_values, dtype=float).ravel())
        if v.size < 1:
            raise InvalidParam("empirical CDF needs at least one point")
        v.setflags(write=False)
        object.__setattr__(self, "sorted_values", v)

    @classmethod
    def from_sample(cls, s: Sample | np.ndarray) -> "EmpiricalCdf":
        return cls(s.values if isinstance(s, Sample) else s)

    @property
    def n(self) -> int:
        return self.sorted_values.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self.sorted_values, x, side="right") / self.n
        return float(out) if out.ndim == 0 else out


def draw_sample(d: SamplingDistribution, n: int, rng: RngSeed | np.random.Generator) -> Sample:
    if n < 1:
        raise InvalidParam("sample size must be >= 1")
    gen = rng.generator() if isinstance(rng, RngSeed) else rng
    return Sample(d.sample(gen, int(n)))


def ecdf_eval(F: EmpiricalCdf, x):
    return F(x)


def z_process_eval(F_emp: EmpiricalCdf, F_pop, x, n: int | None = None):
    """sqrt(n) * (F_emp(x) - F_pop(x)); ``n`` defaults to the sample size."""
    n = F_emp.n if n is None else n
    return math.sqrt(n) * (np.asarray(F_emp(x)) - np.asarray(F_pop(x)))


def median(s: Sample | np.ndarray) -> float:
    v = s.values if isinstance(s, Sample) else np.asarray(s, dtype=float)
    return float(np.median(v))


def read_sample(path: str | Path) -> Sample:
    """One number per line; blank lines and ``#`` comments are ignored."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise DataParseError(f"cannot parse {text!r} as a number", lineno) from None
            if not math.isfinite(v):
                raise DataParseError(f"non-finite value {text!r}", lineno)
            values.append(v)
    if not values:
        raise DataParseError("no data values found")
    return Sample(np.array(values))


def write_sample(path: str | Path, values, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for v in np.asarray(values, dtype=float):
            fh.write(f"{float(v)!r}\n")
