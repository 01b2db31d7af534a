"""Small numerical helpers shared across modules: a divergence tag and
bracketing/bisection root finders."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np


class Divergent:
    """Tag for an infinite moment.

    Deliberately supports no arithmetic, so an infinite moment can never
    silently flow into a formula.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DIVERGENT"

    def __bool__(self) -> bool:
        return True

    def __reduce__(self):
        return (Divergent, ())


DIVERGENT = Divergent()


def is_finite(value) -> bool:
    return not isinstance(value, Divergent)


def require_finite(name: str, value) -> float:
    if isinstance(value, Divergent):
        raise ValueError(f"{name} is infinite")
    return float(value)


class BracketError(RuntimeError):
    pass


# Doubling from a positive start; 2**1100 overshoots the float range, so the
# cap is hit before overflow produces garbage.
MAX_DOUBLINGS = 1100


def bisect(f: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-12,
           max_iter: int = 400) -> float:
    """Bisection on [lo, hi] where f(lo) and f(hi) have opposite signs.

    Stops when hi - lo <= rtol * |midpoint|.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * abs(mid) or mid in (lo, hi):
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def root_decreasing(f: Callable[[float], float], start: float, rtol: float = 1e-12) -> float:
    """Root of a function that is positive at ``start`` and eventually negative.

    The bracket is grown geometrically (start * 2**k), then bisected.
    """
    if not start > 0:
        raise ValueError("start must be positive")
    lo = start
    if f(lo) <= 0:
        if f(lo) == 0:
            return lo
        raise BracketError("function is not positive at the start of the bracket")
    hi = lo
    for _ in range(MAX_DOUBLINGS):
        hi = lo * 2.0
        if not math.isfinite(hi):
            break
        if f(hi) <= 0:
            return bisect(f, lo, hi, rtol=rtol)
        lo = hi
    raise BracketError("bracket expansion exceeded the magnitude cap")


def bisect_decreasing_vec(g: Callable[[np.ndarray], np.ndarray], target: np.ndarray,
                          abs_tol: float = 1e-14, max_iter: int = 200) -> np.ndarray:
    """Solve g(y) = target elementwise for y >= 0, g strictly decreasing.

    Requires g(0) >= target. The upper bracket doubles until g(hi) < target.
    """
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    for _ in range(MAX_DOUBLINGS):
        grow = g(hi) >= target
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, hi * 2.0, hi)
    else:
        raise BracketError("bracket expansion exceeded the magnitude cap")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        above = g(mid) >= target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= abs_tol * (1.0 + hi)):
            break
    return 0.5 * (lo + hi)
