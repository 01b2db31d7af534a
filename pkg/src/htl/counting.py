"""Counting processes N(t) that average in time, and their mixing laws.

Only the marginal N(t) at a single time is ever sampled; no paths are stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from htl._numerics import DIVERGENT, is_finite
from htl.distributions import ParetoTypeModel, moment

DEGENERATE = "degenerate"
GAMMA = "gamma"

DETERMINISTIC = "deterministic"
POISSON = "poisson"
MIXED_POISSON_GAMMA = "mixed_poisson_gamma"
RENEWAL = "renewal"
KINDS = (DETERMINISTIC, POISSON, MIXED_POISSON_GAMMA, RENEWAL)

DEFAULT_RENEWAL_CAP = 10**9


class CountingCapExceeded(RuntimeError):
    """A renewal simulation produced more arrivals than the configured cap."""


@dataclass(frozen=True)
class MixingLaw:
    """Law of the time-average limit Lambda: a point mass or a gamma(shape, rate)."""

    kind: str
    lam: float = 1.0
    shape: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind == DEGENERATE:
            if not self.lam > 0:
                raise ValueError("degenerate mixing requires lambda > 0")
        elif self.kind == GAMMA:
            if not (self.shape > 0 and self.rate > 0):
                raise ValueError("gamma mixing requires shape > 0 and rate > 0")
        else:
            raise ValueError(f"unknown mixing kind {self.kind!r}")

    @classmethod
    def degenerate(cls, lam: float) -> "MixingLaw":
        return cls(DEGENERATE, lam=float(lam))

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "MixingLaw":
        return cls(GAMMA, shape=float(shape), rate=float(rate))

    @property
    def is_degenerate(self) -> bool:
        return self.kind == DEGENERATE

    def mean(self) -> float:
        return self.lam if self.is_degenerate else self.shape / self.rate

    def laplace(self, theta):
        return mixing_laplace(self, theta)

    def inverse_mean(self):
        return mixing_inverse_mean(self)

    def sample(self, rng: np.random.Generator, size=None):
        if self.is_degenerate:
            return np.full(size, self.lam) if size is not None else self.lam
        return rng.gamma(self.shape, 1.0 / self.rate, size)


def mixing_laplace(law: MixingLaw, theta):
    """E exp(-theta * Lambda)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be >= 0")
    if law.is_degenerate:
        out = np.exp(-theta * law.lam)
    else:
        out = np.exp(-law.shape * np.log1p(theta / law.rate))
    return float(out) if out.ndim == 0 else out


def mixing_inverse_mean(law: MixingLaw):
    """E[1/Lambda], DIVERGENT for gamma shape <= 1."""
    if law.is_degenerate:
        return 1.0 / law.lam
    if law.shape <= 1:
        return DIVERGENT
    return law.rate / (law.shape - 1.0)


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def mean(self) -> float:
        return 1.0 / self.rate

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.rate, size)


Interarrival = Union[Exponential, ParetoTypeModel]


@dataclass(frozen=True)
class CountingProcessModel:
    """A counting process together with its averaging mode ("D" or "p")."""

    kind: str
    lam: float = 1.0
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    interarrival: Optional[Interarrival] = None
    averaging: str = "D"
    renewal_cap: int = DEFAULT_RENEWAL_CAP

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown counting kind {self.kind!r}; expected one of {KINDS}")
        if self.averaging not in ("D", "p"):
            raise ValueError("averaging must be 'D' or 'p'")
        if self.kind == POISSON and not self.lam > 0:
            raise ValueError("poisson intensity must be positive")
        if self.kind == MIXED_POISSON_GAMMA:
            MixingLaw.gamma(self.gamma_shape, self.gamma_rate)
        if self.kind == RENEWAL:
            if self.interarrival is None:
                raise ValueError("renewal process requires an interarrival law")
            if isinstance(self.interarrival, ParetoTypeModel):
                if not is_finite(moment(self.interarrival, 1.0)):
                    raise ValueError("renewal interarrivals need a finite mean")

    @classmethod
    def deterministic(cls, **kw) -> "CountingProcessModel":
        return cls(DETERMINISTIC, **kw)

    @classmethod
    def poisson(cls, lam: float, **kw) -> "CountingProcessModel":
        return cls(POISSON, lam=float(lam), **kw)

    @classmethod
    def mixed_poisson_gamma(cls, shape: float, rate: float, **kw) -> "CountingProcessModel":
        return cls(MIXED_POISSON_GAMMA, gamma_shape=float(shape), gamma_rate=float(rate), **kw)

    @classmethod
    def renewal(cls, interarrival: Interarrival, **kw) -> "CountingProcessModel":
        return cls(RENEWAL, interarrival=interarrival, **kw)

    @property
    def mixing(self) -> MixingLaw:
        if self.kind == DETERMINISTIC:
            return MixingLaw.degenerate(1.0)
        if self.kind == POISSON:
            return MixingLaw.degenerate(self.lam)
        if self.kind == MIXED_POISSON_GAMMA:
            return MixingLaw.gamma(self.gamma_shape, self.gamma_rate)
        if isinstance(self.interarrival, Exponential):
            mean = self.interarrival.mean()
        else:
            mean = moment(self.interarrival, 1.0)
        return MixingLaw.degenerate(1.0 / mean)

    def sample_count(self, t: float, rng: np.random.Generator, size=None, method: str = "gamma-poisson"):
        return sample_count(self, t, rng, size, method=method)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "averaging": self.averaging}
        if self.kind == POISSON:
            out["lambda"] = self.lam
        elif self.kind == MIXED_POISSON_GAMMA:
            out.update(gamma_shape=self.gamma_shape, gamma_rate=self.gamma_rate)
        elif self.kind == RENEWAL:
            ia = self.interarrival
            if isinstance(ia, Exponential):
                out["renewal_interarrival"] = {"family": "exponential", "rate": ia.rate}
            else:
                out["renewal_interarrival"] = ia.to_dict()
            out["renewal_cap"] = self.renewal_cap
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "CountingProcessModel":
        known = {"kind", "lambda", "gamma_shape", "gamma_rate", "renewal_interarrival",
                 "averaging", "renewal_cap"}
        unknown = set(spec) - known
        if unknown:
            raise ValueError(f"unknown counting keys: {sorted(unknown)}")
        kind = str(spec.get("kind", "")).strip().lower().replace("-", "_")
        kind = {"homogeneous_poisson": POISSON, "mixedpoissongamma": MIXED_POISSON_GAMMA,
                "mixed_poisson": MIXED_POISSON_GAMMA}.get(kind, kind)
        kw = {"averaging": spec.get("averaging", "D")}
        if "renewal_cap" in spec:
            kw["renewal_cap"] = int(spec["renewal_cap"])
        if kind == POISSON:
            return cls.poisson(float(spec.get("lambda", 1.0)), **kw)
        if kind == MIXED_POISSON_GAMMA:
            return cls.mixed_poisson_gamma(spec["gamma_shape"], spec["gamma_rate"], **kw)
        if kind == RENEWAL:
            ia = dict(spec.get("renewal_interarrival") or {})
            if str(ia.get("family", "")).lower() == "exponential":
                inter: Interarrival = Exponential(float(ia.get("rate", 1.0)))
            else:
                inter = ParetoTypeModel.from_dict(ia)
            return cls.renewal(inter, **kw)
        return cls(kind, **kw)


def sample_count(model: CountingProcessModel, t: float, rng: np.random.Generator, size=None,
                 method: str = "gamma-poisson"):
    """Draw N(t).

    ``method`` selects the mixed Poisson route: "gamma-poisson" draws Lambda then
    a Poisson count, "negative-binomial" draws the equivalent negative binomial.
    """
    if not t >= 0:
        raise ValueError("t must be >= 0")
    shape = () if size is None else size
    if model.kind == DETERMINISTIC:
        out = np.full(shape, math.floor(t), dtype=np.int64)
    elif model.kind == POISSON:
        out = rng.poisson(model.lam * t, shape)
    elif model.kind == MIXED_POISSON_GAMMA:
        a, b = model.gamma_shape, model.gamma_rate
        if method == "gamma-poisson":
            lam = rng.gamma(a, 1.0 / b, shape)
            out = rng.poisson(lam * t)
        elif method == "negative-binomial":
            out = rng.negative_binomial(a, b / (b + t), shape)
        else:
            raise ValueError(f"unknown method {method!r}")
    else:
        out = _renewal_counts(model, t, rng, int(np.prod(shape, dtype=np.int64)))
        out = out.reshape(shape)
    out = np.asarray(out, dtype=np.int64)
    return int(out) if size is None else out


def _renewal_counts(model: CountingProcessModel, t: float, rng: np.random.Generator,
                    reps: int) -> np.ndarray:
    """Number of partial sums of i.i.d. interarrivals that are <= t."""
    ia = model.interarrival
    mean = ia.mean() if isinstance(ia, Exponential) else moment(ia, 1.0)
    counts = np.zeros(reps, dtype=np.int64)
    clock = np.zeros(reps)
    active = np.arange(reps)
    total = 0
    while active.size:
        remaining = np.max(t - clock[active])
        chunk = int(min(max(16, 1.1 * remaining / mean + 4.0 * math.sqrt(remaining / mean + 1)),
                        2**22 // max(active.size, 1) + 16))
        gaps = ia.sample(rng, (active.size, chunk))
        times = clock[active, None] + np.cumsum(gaps, axis=1)
        arrived = np.sum(times <= t, axis=1)
        counts[active] += arrived
        total += int(arrived.sum())
        if total > model.renewal_cap:
            raise CountingCapExceeded(
                f"renewal simulation exceeded the cap of {model.renewal_cap} arrivals")
        clock[active] = times[:, -1]
        active = active[arrived == chunk]
    return counts
