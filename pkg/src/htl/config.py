"""Experiment configuration: a JSON document with a small, flat key set.

Example::

    {
      "distribution": {"family": "exact_pareto", "alpha": 0.7, "x_min": 1.0},
      "counting": {"kind": "poisson", "lambda": 1.0, "averaging": "D"},
      "case": "1",
      "target": "T",
      "t_ladder": [100, 1000, 10000],
      "replications": 100000,
      "seed": 2024,
      "laplace_grid": {"r": [0.25, 0.5, 1, 2], "s": [0, 0.5, 1, 2]},
      "out": "htl_out",
      "tolerances": {"z": 4.0, "eps_final": 0.01},
      "case3b_lt": "corrected",
      "threads": 1
    }

Command-line flags override file keys; ``HTL_SEED`` overrides the seed only.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

from htl.counting import CountingProcessModel
from htl.distributions import ParetoTypeModel
from htl.limits import CASES, TARGETS, check_regime

DEFAULT_SEED = 2024
DEFAULT_T_LADDER = (100.0, 1000.0, 10000.0)
DEFAULT_R_GRID = (0.25, 0.5, 1.0, 2.0)
DEFAULT_S_GRID = (0.0, 0.5, 1.0, 2.0)

DEFAULT_TOLERANCES = {
    "z": 4.0,                 # SE multiplier for statistical noise allowances
    "eps_final": 0.01,        # max |emp - theo| of the LT at the last t; None: not gated
    "median_rel": 0.10,       # constant-limit cases: relative error of the median
    "var_rel": 0.15,          # case 6: relative error of the delta-method variances
    "ks_max": 0.02,           # case 6: KS distance against the limit law
    "consistency_rel": 0.02,  # case 5: mean of N*T against mu_2/mu_1^2
    "ks_stability": 0.03,     # case 5: KS between the last two ladder points
    "tail_slope_abs": 0.2,    # case 5: right-tail slope against -alpha/2
    "tail_fraction": 0.01,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    distribution: dict
    counting: dict
    case: str
    target: str = "T"
    t_ladder: list = field(default_factory=lambda: list(DEFAULT_T_LADDER))
    replications: int = 100_000
    seed: int = DEFAULT_SEED
    laplace_grid: dict = field(default_factory=lambda: {"r": list(DEFAULT_R_GRID),
                                                        "s": list(DEFAULT_S_GRID)})
    out: str = "htl_out"
    tolerances: dict = field(default_factory=dict)
    case3b_lt: str = "corrected"
    threads: int = 1
    reference_replications: Optional[int] = None

    def __post_init__(self):
        self.case = str(self.case)
        self.t_ladder = [float(t) for t in self.t_ladder]
        self.replications = int(self.replications)
        self.seed = int(self.seed)
        self.threads = int(self.threads)
        self.tolerances = {**DEFAULT_TOLERANCES, **(self.tolerances or {})}

    # -- derived models ----------------------------------------------------
    @property
    def dist_model(self) -> ParetoTypeModel:
        return ParetoTypeModel.from_dict(self.distribution)

    @property
    def counting_model(self) -> CountingProcessModel:
        return CountingProcessModel.from_dict(self.counting)

    def validate(self) -> "ExperimentConfig":
        """Check every hypothesis of the requested case before any simulation."""
        if self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {CASES}")
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}")
        if self.case3b_lt not in ("corrected", "s_free"):
            raise ConfigError("case3b_lt must be 'corrected' or 's_free'")
        if not self.t_ladder or any(t <= 1 for t in self.t_ladder):
            raise ConfigError("t_ladder must contain values > 1")
        if list(self.t_ladder) != sorted(self.t_ladder):
            raise ConfigError("t_ladder must be increasing")
        if self.replications < 2:
            raise ConfigError("replications must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            dist = self.dist_model
            counting = self.counting_model
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        try:
            check_regime(dist, self.case)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.case == "5" and counting.averaging != "p":
            raise ConfigError("case 5 requires p-averaging (set counting.averaging = \"p\")")
        if self.case == "5" and len(self.t_ladder) < 2:
            raise ConfigError("case 5 needs at least two ladder points for the stability check")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"distribution", "counting", "case"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes)


def seed_from_env(default: int) -> int:
    raw = os.environ.get("HTL_SEED")
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"HTL_SEED must be an integer, got {raw!r}") from None


PRESETS = {
    "pareto07-poisson": {
        "distribution": {"family": "exact_pareto", "alpha": 0.7},
        "counting": {"kind": "poisson", "lambda": 1.0},
        "case": "1",
    },
    "pareto07-mixed": {
        "distribution": {"family": "exact_pareto", "alpha": 0.7},
        "counting": {"kind": "mixed_poisson_gamma", "gamma_shape": 3.0, "gamma_rate": 3.0},
        "case": "1",
    },
    "pareto2-deterministic": {
        "distribution": {"family": "exact_pareto", "alpha": 2.0},
        "counting": {"kind": "deterministic"},
        "case": "4b",
        "replications": 10_000,
        # the LT converges at a logarithmic rate here; the median and IQR are the gates
        "tolerances": {"eps_final": None},
    },
    "pareto5-poisson": {
        "distribution": {"family": "exact_pareto", "alpha": 5.0},
        "counting": {"kind": "poisson", "lambda": 1.0},
        "case": "6",
        "t_ladder": [2000.0],
        "replications": 20_000,
    },
    "pareto3-poisson": {
        "distribution": {"family": "exact_pareto", "alpha": 3.0},
        "counting": {"kind": "poisson", "lambda": 1.0, "averaging": "p"},
        "case": "5",
        "t_ladder": [5000.0, 10000.0],
        "replications": 100_000,
    },
    "logpert1-poisson": {
        "distribution": {"family": "log_perturbed", "alpha": 1.0, "rho": 1.0},
        "counting": {"kind": "poisson", "lambda": 1.0},
        "case": "2",
        "replications": 20_000,
    },
    "pareto15-mixed": {
        "distribution": {"family": "exact_pareto", "alpha": 1.5},
        "counting": {"kind": "mixed_poisson_gamma", "gamma_shape": 3.0, "gamma_rate": 3.0},
        "case": "3b",
        "replications": 20_000,
    },
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    data = json.loads(json.dumps(PRESETS[name]))
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
