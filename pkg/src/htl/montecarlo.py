"""Monte Carlo ensembles of (N(t), sum X, sum X^2) and the statistics built on them."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from htl.counting import CountingProcessModel, sample_count
from htl.distributions import ParetoTypeModel, sample
from htl.limits import LimitLawSpec, TARGETS, lt_limit
from htl.normalizers import NormalizerTable

# -- ensembles -------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSample:
    """One replication: claim count and the first two power sums."""

    n: int
    s1: float
    s2: float

    def __post_init__(self):
        if self.n == 0 and (self.s1 != 0 or self.s2 != 0):
            raise ValueError("an empty replication must have zero sums")

    @property
    def T(self) -> float:
        return self.s2 / self.s1 ** 2 if self.n else 0.0

    @property
    def C(self) -> float:
        return self.s2 / self.s1 if self.n else 0.0


@dataclass
class Ensemble:
    """Struct-of-arrays view of many replications.

    Sums are held in extended precision; heavy tails with alpha <= 1 produce
    squares far beyond what a double-precision running sum handles gracefully.
    """

    n: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    t: float = math.nan

    def __len__(self) -> int:
        return len(self.n)

    def __getitem__(self, i: int) -> EnsembleSample:
        return EnsembleSample(int(self.n[i]), float(self.s1[i]), float(self.s2[i]))

    @property
    def nonempty(self) -> np.ndarray:
        return self.n > 0

    @property
    def n_skipped(self) -> int:
        return int(np.sum(self.n == 0))

    def T(self) -> np.ndarray:
        """s2 / s1**2 on non-empty replications (extended precision)."""
        m = self.nonempty
        return self.s2[m] / self.s1[m] ** 2

    def C(self) -> np.ndarray:
        m = self.nonempty
        return self.s2[m] / self.s1[m]


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _simulate_range(dist, counting, t, seed, start, stop, n_out, s1_out, s2_out):
    for r in range(start, stop):
        rng = replication_rng(seed, r)
        n = sample_count(counting, t, rng)
        n_out[r] = n
        if n == 0:
            s1_out[r] = 0.0
            s2_out[r] = 0.0
            continue
        x = sample(dist, rng, n)
        # squares formed in extended precision too: no overflow for small alpha,
        # and a single claim gives s2 == s1**2 exactly
        xl = x.astype(np.longdouble)
        s1_out[r] = np.sum(xl)
        s2_out[r] = np.sum(xl * xl)


def simulate_ensemble(dist: ParetoTypeModel, counting: CountingProcessModel, t: float,
                      replications: int, seed: int, threads: int = 1) -> Ensemble:
    """Simulate ``replications`` independent copies of (N(t), sum X, sum X^2).

    Replication r draws from its own stream derived from (seed, r), and each
    worker writes a disjoint slice, so the result does not depend on ``threads``.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    n = np.zeros(replications, dtype=np.int64)
    s1 = np.zeros(replications, dtype=np.longdouble)
    s2 = np.zeros(replications, dtype=np.longdouble)
    args = (dist, counting, t, int(seed))
    if threads == 1:
        _simulate_range(*args, 0, replications, n, s1, s2)
    else:
        bounds = np.linspace(0, replications, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_simulate_range, *args, int(lo), int(hi), n, s1, s2)
                       for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            for fut in futures:
                fut.result()
    return Ensemble(n, s1, s2, float(t))


# -- statistics ------------------------------------------------------------


@dataclass
class StatisticSeries:
    case_id: str
    t: float
    values: np.ndarray
    n_skipped: int
    target: str = "T"

    @property
    def replications(self) -> int:
        return len(self.values) + self.n_skipped


def _need(norms: NormalizerTable, name: str) -> float:
    value = getattr(norms, name)
    if value is None:
        raise ValueError(f"normalizer {name} missing for case {norms.case_id}")
    return value


def risk_arrays(ens: Ensemble) -> dict:
    """Sample mean, variance, CoV and dispersion for non-empty replications.

    Negative sample variances (rounding on near-constant samples) are clamped to
    zero; ``clamped`` counts them.
    """
    m = ens.nonempty
    n = ens.n[m].astype(np.longdouble)
    s1, s2 = ens.s1[m], ens.s2[m]
    xbar = s1 / n
    var = s2 / n - xbar * xbar
    clamped = var < 0
    var = np.where(clamped, 0.0, var)
    return {
        "n": ens.n[m],
        "xbar": xbar,
        "var": var,
        "cov": np.sqrt(var) / xbar,
        "disp": var / xbar,
        "T": s2 / s1 ** 2,
        "C": s2 / s1,
        "clamped": int(clamped.sum()),
    }


def risk_statistics(sample_: EnsembleSample):
    """(cov_hat, d_hat, T, C) for one replication, or None when n = 0."""
    if sample_.n == 0 or sample_.s1 <= 0:
        return None
    xbar = sample_.s1 / sample_.n
    var = max(sample_.s2 / sample_.n - xbar * xbar, 0.0)
    return math.sqrt(var) / xbar, var / xbar, sample_.T, sample_.C


def statistic(case_id: str, ens: Ensemble, t: float, norms: NormalizerTable,
              spec: Optional[LimitLawSpec] = None, target: str = "T") -> StatisticSeries:
    """Normalized statistic of each non-empty replication.

    ``target`` picks the ratio itself ("T"), the sample coefficient of variation
    ("cov") or the sample dispersion ("disp"), each with its own scaling.
    """
    case_id = str(case_id)
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    risk = risk_arrays(ens)
    n = risk["n"].astype(np.longdouble)
    T = risk["T"]
    t = float(t)
    if case_id in ("1", "2", "3a", "3b"):
        a = _need(norms, "a_t")
    if case_id in ("2", "4a", "4b"):
        ap = _need(norms, "a_prime_t")

    if target == "T":
        scale = {
            "1": lambda: 1.0,
            "2": lambda: (ap / a) ** 2,
            "3a": lambda: (n / a) ** 2,
            "3b": lambda: (t / a) ** 2,
            "4a": lambda: (n / ap) ** 2,
            "4b": lambda: (t / ap) ** 2,
        }
        if case_id in scale:
            values = scale[case_id]() * T
        elif case_id in ("5", "6"):
            centred = n * T - spec.ratio_target()
            values = (_need(norms, "b_t") if case_id == "5" else math.sqrt(t)) * centred
        else:
            raise ValueError(f"unknown case {case_id!r}")
    elif target == "cov":
        cov = risk["cov"]
        scale = {
            "1": lambda: 1.0 / np.sqrt(n),
            "2": lambda: (ap / a) / np.sqrt(n),
            "3a": lambda: np.sqrt(n) / a,
            "3b": lambda: (t / a) / np.sqrt(n),
            "4a": lambda: np.sqrt(n) / ap,
            "4b": lambda: (t / ap) / np.sqrt(n),
        }
        if case_id in scale:
            values = scale[case_id]() * cov
        else:
            centred = cov - spec.cov_target()
            values = (_need(norms, "b_t") if case_id == "5" else math.sqrt(t)) * centred
    else:
        disp = risk["disp"]
        scale = {
            "1": lambda: 1.0 / a,
            "2": lambda: ap / a ** 2,
            "3a": lambda: n / a ** 2,
            "3b": lambda: t / a ** 2,
            "4a": lambda: n / ap ** 2,
            "4b": lambda: t / ap ** 2,
        }
        if case_id in scale:
            values = scale[case_id]() * disp
        else:
            centred = disp - spec.disp_target()
            values = (_need(norms, "b_t") if case_id == "5" else math.sqrt(t)) * centred
    values = np.asarray(values, dtype=np.float64)
    values = np.broadcast_to(values, T.shape).copy()
    return StatisticSeries(case_id, t, values, ens.n_skipped, target)


# -- Laplace transforms ----------------------------------------------------


def laplace_pairs(case_id: str, ens: Ensemble, norms: NormalizerTable):
    """(squares, sums) pair whose joint transform the case's limit describes.

    Empty replications contribute (0, 0) where the pair is defined for them and
    are dropped where the sum is divided by N.
    """
    case_id = str(case_id)
    t = ens.t
    s1 = ens.s1.astype(np.float64)
    s2 = ens.s2
    if case_id in ("1", "2", "3a", "3b"):
        sq = s2 / np.longdouble(norms.a_t) ** 2
    elif case_id in ("4a", "4b"):
        sq = s2 / np.longdouble(_need(norms, "a_prime_t")) ** 2
    else:
        raise ValueError(f"case {case_id} has no Laplace pair")
    sq = np.asarray(sq, dtype=np.float64)
    if case_id == "1":
        return sq, s1 / norms.a_t
    if case_id == "2":
        return sq, s1 / norms.a_prime_t
    if case_id in ("3b", "4b"):
        return sq, s1 / t
    m = ens.nonempty
    return sq[m], s1[m] / ens.n[m]


@dataclass
class LaplaceComparison:
    grid: list
    lt_theoretical: np.ndarray
    lt_empirical: np.ndarray
    std_error: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.lt_empirical - self.lt_theoretical)

    @property
    def max_abs_deviation(self) -> float:
        return float(np.max(self.deviation))

    @property
    def max_deviation_in_se_units(self) -> float:
        dev = self.deviation
        se = self.std_error
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, dev / se, np.where(dev > 0, np.inf, 0.0))
        return float(np.max(z))

    def rows(self):
        for (r, s), th, em, se in zip(self.grid, self.lt_theoretical, self.lt_empirical,
                                      self.std_error):
            yield r, s, float(th), float(em), float(se)


def make_grid(r_values: Sequence[float], s_values: Sequence[float]) -> list:
    return [(float(r), float(s)) for r in r_values for s in s_values]


def empirical_laplace(u: np.ndarray, v: np.ndarray, grid: Sequence[tuple]):
    """Mean of exp(-r u - s v) per grid point and its standard error.

    Means use exactly rounded summation (math.fsum) so the result is
    independent of summation order.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size == 0 or u.shape != v.shape:
        raise ValueError("pairs must be non-empty and aligned")
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("pairs must be nonnegative")
    k = u.size
    means = np.empty(len(grid))
    ses = np.empty(len(grid))
    for i, (r, s) in enumerate(grid):
        e = np.exp(-(r * u + s * v))
        mean = math.fsum(e) / k
        if k > 1:
            var = math.fsum((e - mean) ** 2) / (k - 1)
        else:
            var = 0.0
        means[i] = mean
        ses[i] = math.sqrt(var / k)
    return means, ses


def compare_laplace(spec: LimitLawSpec, u: np.ndarray, v: np.ndarray,
                    grid: Sequence[tuple]) -> LaplaceComparison:
    emp, se = empirical_laplace(u, v, grid)
    theo = np.array([lt_limit(spec, r, s) for r, s in grid])
    return LaplaceComparison(list(grid), theo, emp, se)


# -- distances and tails ---------------------------------------------------


def ks_distance(values: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup |F_n - F| against an analytic CDF."""
    x = np.sort(np.asarray(values, dtype=float))
    k = x.size
    if k == 0:
        raise ValueError("values must be non-empty")
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, k + 1) / k - f
    lower = f - np.arange(0, k) / k
    return float(max(upper.max(), lower.max(), 0.0))


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    """sup |F_a - F_b| between two empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def tail_slope(values: np.ndarray, top_fraction: float = 0.01) -> float:
    """Slope of log empirical survival against log value over the top fraction.

    For a tail P[X > x] ~ x**-p the slope estimates -p.
    """
    x = np.sort(np.asarray(values, dtype=float))[::-1]
    k = max(int(round(top_fraction * x.size)), 10)
    top = x[:k]
    if np.any(top <= 0):
        raise ValueError("top order statistics must be positive")
    surv = np.arange(1, k + 1) / x.size
    slope, _ = np.polyfit(np.log(top), np.log(surv), 1)
    return float(slope)


# -- Case 6 delta-method check ---------------------------------------------


def case6_delta_check(dist: ParetoTypeModel, counting: CountingProcessModel,
                      t_ladder: Sequence[float], reps: int, seed: int, threads: int = 1,
                      ensembles: Optional[dict] = None) -> dict:
    """Empirical variances of the n-normalized centred statistics against their
    delta-method targets, for each t of the ladder."""
    spec = LimitLawSpec.from_models(dist, counting.mixing, "6")
    from htl.limits import case6_variances

    targets = case6_variances(spec)
    rows = []
    for t in t_ladder:
        ens = (ensembles or {}).get(t) or simulate_ensemble(dist, counting, t, reps, seed, threads)
        risk = risk_arrays(ens)
        root_n = np.sqrt(risk["n"].astype(np.float64))
        centred = {
            "T": root_n * np.asarray(risk["n"] * risk["T"] - spec.ratio_target(), dtype=float),
            "cov": root_n * np.asarray(risk["cov"] - spec.cov_target(), dtype=float),
            "disp": root_n * np.asarray(risk["disp"] - spec.disp_target(), dtype=float),
        }
        row = {"t": float(t), "replications": reps, "skipped": ens.n_skipped}
        for key, vals in centred.items():
            emp = float(np.var(vals, ddof=1))
            row[f"var_{key}"] = emp
            row[f"target_{key}"] = targets[key]
            row[f"rel_err_{key}"] = abs(emp - targets[key]) / targets[key] if targets[key] else emp
        rows.append(row)
    return {"case": "6", "targets": targets, "rows": rows,
            "note": "uniform integrability of the scaled estimators is assumed, not tested"}
