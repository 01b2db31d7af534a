"""Deterministic normalizing sequences.

Each sequence is pinned as the exact root of its defining equation:

* ``a_t``:  ``t * survival(a_t) = 1``
* ``a'_t``: ``t * ell_tilde(a'_t) = a'_t**kappa`` (kappa = 1 or 2), largest root
* ``c_t``:  ``t * c_t**(-alpha/2) * ell(sqrt(c_t)) = 1``, then
  ``ell_star = c_t * t**(-2/alpha)`` and ``b_t = t**(1-2/alpha) / ell_star``
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from htl._numerics import is_finite, root_decreasing
from htl.distributions import EXACT_PARETO, ParetoTypeModel, ell, ell_tilde, moment

RTOL = 1e-12


class RegimeError(ValueError):
    """Model parameters fall outside the hypotheses of the requested normalization."""


@dataclass(frozen=True)
class NormalizerTable:
    t: float
    a_t: float
    case_id: str = ""
    a_prime_t: Optional[float] = None
    c_t: Optional[float] = None
    ell_star_t: Optional[float] = None
    b_t: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def solve_a(model: ParetoTypeModel, t: float) -> float:
    """Root of t * survival(x) = 1."""
    if not t > 1:
        raise ValueError("solve_a requires t > 1")
    if model.family == EXACT_PARETO:
        return model.x_min * t ** (1.0 / model.alpha)
    log_t = math.log(t)
    # work in y = log(x / x_min): log t + log_survival(y) = 0, decreasing in y
    f = lambda y: log_t + float(model.log_survival_y(y))
    y = root_decreasing(f, start=_tiny_start(f), rtol=RTOL)
    return model.x_min * math.exp(y)


def _tiny_start(f) -> float:
    y = 1e-12
    while f(y) <= 0 and y > 1e-300:
        y *= 1e-3
    return y


def solve_a_prime(model: ParetoTypeModel, t: float, kappa: int) -> float:
    """Largest root of t * ell_tilde(x) = x**kappa.

    Requires the moment of order kappa to be infinite so that ell_tilde diverges.
    """
    if kappa not in (1, 2):
        raise ValueError("kappa must be 1 or 2")
    if not t > 1:
        raise ValueError("solve_a_prime requires t > 1")
    if model.alpha != kappa or is_finite(moment(model, float(kappa))):
        raise RegimeError(
            f"a'_t with kappa={kappa} requires alpha={kappa} and an infinite moment of order {kappa}")
    log_t = math.log(t)

    def h(log_x: float) -> float:
        lt = ell_tilde(model, math.exp(log_x))
        if lt <= 0:
            return -math.inf
        return log_t + math.log(lt) - kappa * log_x

    # h starts at -inf on the support start, rises, then decreases to -inf; step
    # geometrically in x until h is positive, then bracket the downward crossing.
    log_xm = math.log(model.x_min)
    step = math.log(2.0)
    k = 1
    while h(log_xm + k * step) <= 0:
        k += 1
        if k > 1100:
            raise RegimeError(f"t={t} too small: t*ell_tilde(x) never exceeds x**{kappa}")
    lo = k * step
    g = lambda z: h(log_xm + z)
    z = root_decreasing(lambda z: g(lo * z), start=1.0, rtol=1e-15) * lo
    return math.exp(log_xm + z)


def solve_case5(model: ParetoTypeModel, t: float) -> tuple[float, float, float]:
    """(c_t, ell_star_t, b_t) for the finite-variance, infinite-fourth-moment regime."""
    a = model.alpha
    if not t > 1:
        raise ValueError("solve_case5 requires t > 1")
    in_regime = 2 < a < 4 or (a == 2 and is_finite(moment(model, 2.0)))
    if not in_regime:
        raise RegimeError("c_t requires alpha in (2,4), or alpha=2 with mu_2 < inf")
    if model.family == EXACT_PARETO:
        c_t = model.x_min ** 2 * t ** (2.0 / a)
    else:
        log_t = math.log(t)
        # t * x^{-a/2} ell(sqrt x) = t * survival(sqrt x) above x_min**2
        f = lambda log_x: log_t - 0.5 * a * log_x + math.log(ell(model, math.exp(0.5 * log_x)))
        lo = 2.0 * math.log(model.x_min)
        z = root_decreasing(lambda z: f(lo + z), start=_tiny_start(lambda z: f(lo + z)), rtol=RTOL)
        c_t = math.exp(lo + z)
    ell_star = c_t * t ** (-2.0 / a)
    b_t = t ** (1.0 - 2.0 / a) / ell_star
    return c_t, ell_star, b_t


def normalizer_table(model: ParetoTypeModel, t: float, case_id: str) -> NormalizerTable:
    """All sequences a given case needs at time t."""
    case_id = str(case_id)
    a_t = solve_a(model, t)
    kw = {}
    if case_id == "2":
        kw["a_prime_t"] = solve_a_prime(model, t, 1)
    elif case_id in ("4a", "4b"):
        kw["a_prime_t"] = solve_a_prime(model, t, 2)
    elif case_id == "5":
        c_t, ell_star, b_t = solve_case5(model, t)
        kw.update(c_t=c_t, ell_star_t=ell_star, b_t=b_t)
    return NormalizerTable(t=float(t), a_t=a_t, case_id=case_id, **kw)


def residuals(model: ParetoTypeModel, table: NormalizerTable) -> dict:
    """Relative residuals of every defining equation present in ``table``."""
    from htl.distributions import survival

    t = table.t
    out = {"a_t": abs(t * survival(model, table.a_t) - 1.0)}
    if table.a_prime_t is not None:
        kappa = 1 if table.case_id == "2" else 2
        x = table.a_prime_t
        out["a_prime_t"] = abs(t * ell_tilde(model, x) / x ** kappa - 1.0)
    if table.c_t is not None:
        c = table.c_t
        out["c_t"] = abs(t * c ** (-model.alpha / 2) * ell(model, math.sqrt(c)) - 1.0)
    return out
