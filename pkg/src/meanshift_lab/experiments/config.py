"""Experiment configuration with a flat JSON schema whose keys mirror the CLI flags."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from ..core_math.weights import WeightFunction
from ..empirical import DistributionFamily, SamplingDistribution
from ..errors import InvalidParam
from ..process import ConvergenceConfig


class Study(str, Enum):
    QQ = "qq"
    MSE = "mse"
    CONSISTENCY = "consistency"
    LEMMA3 = "lemma3"
    CLT = "clt"


ESTIMATOR_KINDS = ("mean", "median", "blurring", "nonblurring", "fixed-point")

# Desk-scale defaults and the large-scale budgets behind --full.
_DEFAULTS = {
    Study.MSE: dict(n_list=(400,), replicates=2000),
    Study.QQ: dict(n_list=(400,), replicates=500),
    Study.CONSISTENCY: dict(n_list=(100, 400, 1600), replicates=200),
    Study.LEMMA3: dict(n_list=(20, 50, 200), replicates=1),
    Study.CLT: dict(n_list=(2000,), replicates=4000),
}
_FULL = {
    Study.MSE: dict(n_list=tuple(k * k for k in range(10, 31, 2)), replicates=10000),
    Study.QQ: dict(n_list=(400,), replicates=500),
    Study.CONSISTENCY: dict(n_list=(100, 400, 1600, 10000), replicates=1000),
    Study.LEMMA3: dict(n_list=(20, 50, 200, 2000), replicates=10),
    Study.CLT: dict(n_list=(2000,), replicates=4000),
}

# Flat keys accepted in JSON config files; each one is also a CLI flag.
CONFIG_KEYS = ("dist", "weight", "n", "m", "seed", "kinds", "tol", "max_iter", "t", "probes")


def default_kinds(study: Study, dist: SamplingDistribution) -> tuple[str, ...]:
    if study is Study.MSE:
        return ("mean", "blurring", "nonblurring", "median")
    if study is Study.QQ:
        ref = "median" if dist.family is DistributionFamily.STUDENT_T else "mean"
        return ("blurring", "nonblurring", ref)
    return ("blurring", "nonblurring")


@dataclass(frozen=True)
class ExperimentConfig:
    study: Study
    distribution: SamplingDistribution = field(default_factory=SamplingDistribution.normal)
    weight: WeightFunction = field(default_factory=WeightFunction.normal)
    n_list: tuple[int, ...] | None = None  # None: study default
    replicates: int | None = None
    seed: int = 12345
    kinds: tuple[str, ...] = ()
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    t_list: tuple[int, ...] = (1, 2)
    probes: int = 100

    def __post_init__(self):
        study = Study(self.study)
        object.__setattr__(self, "study", study)
        defaults = _DEFAULTS[study]
        if self.n_list is None:
            object.__setattr__(self, "n_list", defaults["n_list"])
        if self.replicates is None:
            object.__setattr__(self, "replicates", defaults["replicates"])
        if not self.kinds:
            object.__setattr__(self, "kinds", default_kinds(study, self.distribution))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "kinds", tuple(str(k) for k in self.kinds))
        object.__setattr__(self, "t_list", tuple(int(t) for t in self.t_list))
        if int(self.replicates) < 1:
            raise InvalidParam("replicates must be >= 1")
        if not self.n_list:
            raise InvalidParam("n_list must be nonempty")
        if any(n < 1 for n in self.n_list):
            raise InvalidParam("sample sizes must be >= 1")
        bad = [k for k in self.kinds if k not in ESTIMATOR_KINDS]
        if bad:
            raise InvalidParam(f"unknown estimator kinds {bad}; choose from {ESTIMATOR_KINDS}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParam("seed must be an unsigned 64-bit integer")
        if self.probes < 1:
            raise InvalidParam("probes must be >= 1")
        if study is Study.CLT and (not self.t_list or min(self.t_list) < 1):
            raise InvalidParam("CLT iteration indices must be >= 1")
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def full_scale(cls, study: Study | str, **kwargs) -> "ExperimentConfig":
        study = Study(study)
        merged = {**_FULL[study], **{k: v for k, v in kwargs.items() if v is not None}}
        return cls(study, **merged)

    @property
    def target(self) -> float:
        """True location the estimates are scored against."""
        return self.distribution.mean

    def to_mapping(self) -> dict:
        return {
            "study": self.study.value,
            "dist": self.distribution.spec(),
            "weight": self.weight.spec(),
            "n": list(self.n_list),
            "m": self.replicates,
            "seed": self.seed,
            "kinds": list(self.kinds),
            "tol": self.convergence.tol,
            "max_iter": self.convergence.max_iter,
            "t": list(self.t_list),
            "probes": self.probes,
        }

    @classmethod
    def from_mapping(cls, data: dict, study: Study | str | None = None) -> "ExperimentConfig":
        data = dict(data)
        study = Study(study if study is not None else data.pop("study", None) or "mse")
        data.pop("study", None)
        unknown = set(data) - set(CONFIG_KEYS)
        if unknown:
            raise InvalidParam(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        if "dist" in data:
            kwargs["distribution"] = SamplingDistribution.parse(str(data["dist"]))
        if "weight" in data:
            kwargs["weight"] = WeightFunction.parse(str(data["weight"]))
        if "n" in data:
            n = data["n"]
            kwargs["n_list"] = tuple(n) if isinstance(n, (list, tuple)) else (n,)
        if "m" in data:
            kwargs["replicates"] = data["m"]
        if "seed" in data:
            kwargs["seed"] = data["seed"]
        if "kinds" in data:
            k = data["kinds"]
            kwargs["kinds"] = tuple(k.split(",")) if isinstance(k, str) else tuple(k)
        conv = {}
        if "tol" in data:
            conv["tol"] = float(data["tol"])
        if "max_iter" in data:
            conv["max_iter"] = int(data["max_iter"])
        if conv:
            kwargs["convergence"] = ConvergenceConfig(**conv)
        if "t" in data:
            t = data["t"]
            kwargs["t_list"] = tuple(t) if isinstance(t, (list, tuple)) else (t,)
        if "probes" in data:
            kwargs["probes"] = int(data["probes"])
        try:
            return cls(study, **kwargs)
        except (TypeError, ValueError) as exc:
            raise InvalidParam(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_mapping(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str, study: Study | str | None = None) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParam(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidParam("config JSON must be an object")
        return cls.from_mapping(data, study)

    @classmethod
    def load(cls, path: str | Path, study: Study | str | None = None) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"), study)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)
