"""Pareto-type claim-size laws.

Three families with tail ``1 - F(x) = x**-alpha * ell(x)``:

``exact_pareto``
    ``(x / x_min)**-alpha``; ``ell`` is the constant ``x_min**alpha``.
``log_perturbed``
    ``(x / x_min)**-alpha * (1 + log(x / x_min))**rho``. With ``alpha = 1`` and
    ``rho < -1`` the mean is finite although ``alpha = 1``.
``hall``
    ``C x**-alpha (1 + D x**-beta)``; ``x_min`` is the point where this
    expression equals one and is derived, not supplied.

All work is done on the log scale ``y = log(x / x_min)`` where the tails are
smooth and strictly decreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from htl._numerics import DIVERGENT, BracketError, bisect, bisect_decreasing_vec

EXACT_PARETO = "exact_pareto"
LOG_PERTURBED = "log_perturbed"
HALL = "hall"
FAMILIES = (EXACT_PARETO, LOG_PERTURBED, HALL)

_FAMILY_ALIASES = {
    "exactpareto": EXACT_PARETO,
    "exact_pareto": EXACT_PARETO,
    "pareto": EXACT_PARETO,
    "logperturbed": LOG_PERTURBED,
    "log_perturbed": LOG_PERTURBED,
    "hall": HALL,
}


def canonical_family(name: str) -> str:
    key = str(name).strip().lower().replace("-", "_")
    if key not in _FAMILY_ALIASES:
        raise ValueError(f"unknown family {name!r}; expected one of {FAMILIES}")
    return _FAMILY_ALIASES[key]


@dataclass(frozen=True)
class ParetoTypeModel:
    """Immutable claim-size model.

    ``x_min`` is ignored for the Hall family, where it is solved from
    ``C x**-alpha (1 + D x**-beta) = 1``.
    """

    alpha: float
    family: str = EXACT_PARETO
    x_min: float = 1.0
    rho: float = 0.0
    hall_C: float = 1.0
    hall_D: float = 0.0
    hall_beta: float = 1.0
    _log_x_min: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be a finite positive number")
        if self.family == HALL:
            if not self.hall_C > 0:
                raise ValueError("hall_C must be positive")
            if not self.hall_beta > 0:
                raise ValueError("hall_beta must be positive")
            object.__setattr__(self, "x_min", _hall_support_start(self))
            D, a, b = self.hall_D, self.alpha, self.hall_beta
            # d/dx log-tail < 0 on [x_min, inf) iff alpha + D (alpha+beta) x^-beta > 0;
            # the x^-beta term is largest at x_min.
            if a + D * (a + b) * self.x_min ** (-b) <= 0:
                raise ValueError("Hall constants give a non-monotone tail")
        else:
            if not (self.x_min > 0 and math.isfinite(self.x_min)):
                raise ValueError("x_min must be a finite positive number")
            if self.family == LOG_PERTURBED and self.rho > self.alpha:
                raise ValueError("log_perturbed requires rho <= alpha for a monotone tail")
        object.__setattr__(self, "_log_x_min", math.log(self.x_min))

    # -- tail on the log scale -------------------------------------------
    def log_survival_y(self, y):
        """log(1 - F) at x = x_min * exp(y), y >= 0 (array-friendly)."""
        y = np.asarray(y, dtype=float)
        if self.family == EXACT_PARETO:
            return -self.alpha * y
        if self.family == LOG_PERTURBED:
            return -self.alpha * y + self.rho * np.log1p(y)
        log_x = self._log_x_min + y
        return (math.log(self.hall_C) - self.alpha * log_x
                + np.log1p(self.hall_D * np.exp(-self.hall_beta * log_x)))

    def survival(self, x):
        return survival(self, x)

    def quantile(self, u):
        return quantile(self, u)

    def sample(self, rng, size=None):
        return sample(self, rng, size)

    def moment(self, beta):
        return moment(self, beta)

    def ell(self, x):
        return ell(self, x)

    def ell_tilde(self, x):
        return ell_tilde(self, x)

    def to_dict(self) -> dict:
        out = {"family": self.family, "alpha": self.alpha, "x_min": self.x_min}
        if self.family == LOG_PERTURBED:
            out["rho"] = self.rho
        if self.family == HALL:
            out.update(hall_C=self.hall_C, hall_D=self.hall_D, hall_beta=self.hall_beta)
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "ParetoTypeModel":
        known = {"family", "alpha", "x_min", "rho", "hall_C", "hall_D", "hall_beta"}
        unknown = set(spec) - known
        if unknown:
            raise ValueError(f"unknown distribution keys: {sorted(unknown)}")
        if "alpha" not in spec:
            raise ValueError("distribution spec requires 'alpha'")
        kwargs = {k: spec[k] for k in known if k in spec and spec[k] is not None}
        for k in kwargs:
            if k != "family":
                kwargs[k] = float(kwargs[k])
        return cls(**kwargs)


def _hall_support_start(model: ParetoTypeModel) -> float:
    C, D, a, b = model.hall_C, model.hall_D, model.alpha, model.hall_beta

    def log_tail(log_x: float) -> float:
        inner = 1.0 + D * math.exp(-b * log_x)
        if inner <= 0:
            return -math.inf
        return math.log(C) - a * log_x + math.log(inner)

    # Tail is eventually decreasing to -inf in log_x; find the largest crossing of 0.
    hi = 1.0
    while log_tail(hi) >= 0:
        hi *= 2.0
        if hi > 1e4:
            raise BracketError("cannot locate Hall support start")
    # With D < 0 the expression peaks at an interior point, so scan downwards.
    grid = np.linspace(hi, -60.0, 4001)
    above = [g for g in grid if log_tail(g) >= 0]
    if not above:
        raise ValueError("Hall constants never reach survival 1")
    lo = above[0]
    return math.exp(bisect(log_tail, lo, hi, rtol=1e-15))


# -- tails and quantiles ---------------------------------------------------

def survival(model: ParetoTypeModel, x):
    """1 - F(x); exactly 1 on [0, x_min]."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("survival is defined for x >= 0")
    with np.errstate(divide="ignore"):
        y = np.log(np.maximum(x, model.x_min)) - model._log_x_min
    out = np.exp(model.log_survival_y(np.maximum(y, 0.0)))
    out = np.where(x <= model.x_min, 1.0, out)
    return float(out) if out.ndim == 0 else out


def quantile(model: ParetoTypeModel, u):
    """x with survival(x) = u, for u in (0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)) or np.any(u > 1):
        raise ValueError("quantile requires 0 < u <= 1")
    log_u = np.log(u)
    if model.family == EXACT_PARETO:
        y = -log_u / model.alpha
    else:
        y = bisect_decreasing_vec(model.log_survival_y, np.atleast_1d(log_u)).reshape(u.shape)
        y = np.where(u == 1.0, 0.0, y)
    out = model.x_min * np.exp(y)
    return float(out) if out.ndim == 0 else out


def sample(model: ParetoTypeModel, rng: np.random.Generator, size=None):
    """Inversion sampling, X = quantile(U) with U uniform on (0, 1]."""
    u = 1.0 - rng.random(size)
    if model.family == EXACT_PARETO:
        return model.x_min * u ** (-1.0 / model.alpha)
    return quantile(model, u)


# -- moments ---------------------------------------------------------------

def moment(model: ParetoTypeModel, beta: float):
    """E X**beta, or DIVERGENT.

    Uses mu_beta = beta * int_0^inf x**(beta-1) (1 - F(x)) dx, split at x_min.
    """
    beta = float(beta)
    if not beta > 0:
        raise ValueError("beta must be positive")
    a, xm = model.alpha, model.x_min
    if beta > a:
        return DIVERGENT
    if model.family == EXACT_PARETO:
        if beta == a:
            return DIVERGENT
        return xm ** beta * a / (a - beta)
    if model.family == HALL:
        if beta == a:
            return DIVERGENT
        C, D, b = model.hall_C, model.hall_D, model.hall_beta
        tail = C * (xm ** (beta - a) / (a - beta) + D * xm ** (beta - a - b) / (a + b - beta))
        return xm ** beta + beta * tail
    rho = model.rho
    if beta == a:
        # int_0^inf (1+y)^rho dy converges iff rho < -1
        if rho >= -1:
            return DIVERGENT
        return xm ** beta * (1.0 - beta / (rho + 1.0))
    c = a - beta
    val, _ = integrate.quad(lambda y: math.exp(-c * y) * (1.0 + y) ** rho, 0.0, math.inf,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return xm ** beta * (1.0 + beta * val)


def variance(model: ParetoTypeModel):
    m2 = moment(model, 2.0)
    if m2 is DIVERGENT:
        return DIVERGENT
    m1 = moment(model, 1.0)
    return m2 - m1 * m1


# -- slowly varying parts --------------------------------------------------

def ell(model: ParetoTypeModel, x):
    """Slowly varying factor survival(x) * x**alpha; zero below x_min."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("ell requires x > 0")
    y = np.maximum(np.log(x) - model._log_x_min, 0.0)
    out = np.exp(model.log_survival_y(y) + model.alpha * (model._log_x_min + y))
    out = np.where(x < model.x_min, 0.0, out)
    return float(out) if out.ndim == 0 else out


def ell_tilde(model: ParetoTypeModel, x):
    """int_{x_min}^x ell(u)/u du, in closed form for every family."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("ell_tilde requires x > 0")
    xm, a = model.x_min, model.alpha
    L = np.maximum(np.log(x) - model._log_x_min, 0.0)
    if model.family == EXACT_PARETO:
        out = xm ** a * L
    elif model.family == LOG_PERTURBED:
        rho = model.rho
        if rho == -1.0:
            out = xm ** a * np.log1p(L)
        else:
            out = xm ** a * np.expm1((rho + 1.0) * np.log1p(L)) / (rho + 1.0)
    else:
        C, D, b = model.hall_C, model.hall_D, model.hall_beta
        xx = np.maximum(x, xm)
        out = C * (L + D * (xm ** (-b) - xx ** (-b)) / b)
    return float(out) if np.ndim(out) == 0 else out


def ell_tilde_quadrature(model: ParetoTypeModel, x: float) -> float:
    """Quadrature route to ell_tilde (integration in log x), for cross-checks."""
    if x <= model.x_min:
        return 0.0
    upper = math.log(x) - model._log_x_min
    val, _ = integrate.quad(lambda y: ell(model, model.x_min * math.exp(y)), 0.0, upper,
                            epsabs=0.0, epsrel=1e-11, limit=200)
    return val
