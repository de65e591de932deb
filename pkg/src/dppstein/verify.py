"""Monte-Carlo check that simulated normal-approximation distances sit under
the explicit bound.

For each window side ``n`` the harness simulates ``R`` patterns on
``[0, n]^d``, evaluates the functional, standardizes it with the Monte-Carlo
mean and standard deviation, measures the L1 and Kolmogorov distances of the
empirical law to N(0, 1), and evaluates the bound at estimated
``(M, kappa, gamma)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .kernels import LaguerreGaussianSpec, fit_decay_envelope
from .sampler import (
    DEFAULT_KMAX_CAP,
    PointPattern,
    Window,
    count_in_box,
    sample_many,
    spectral_truncation,
)
from .statistics import LocalStatistic, cube_contributions, interior_index_set, subset_terms
from .stein_bounds import BoundInputs, BoundReport, kolmogorov_from_wasserstein, rate_exponent, wasserstein_bound

__all__ = [
    "ExperimentConfig",
    "ReplicationData",
    "MomentEstimates",
    "ExperimentRow",
    "VerificationReport",
    "empirical_wasserstein_to_normal",
    "empirical_kolmogorov_to_normal",
    "simulate",
    "estimate_moments",
    "run_experiment",
    "count_covariance",
    "negative_association_check",
    "interior_approximation_check",
]

MIN_REPLICATIONS = 100
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# distances to N(0, 1)


def _npdf(t):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(t))


def _G(t):
    # antiderivative of Phi vanishing at -inf
    return t * special.ndtr(t) + _npdf(t)


def empirical_wasserstein_to_normal(samples) -> float:
    """Exact ``int |F_R(t) - Phi(t)| dt`` for the empirical CDF ``F_R``.

    On each gap between order statistics ``F_R`` equals ``k / R``; the
    integrand changes sign at most once, at ``Phi^{-1}(k / R)``, and
    ``t Phi(t) + phi(t)`` integrates ``Phi`` in closed form.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    R = len(x)
    if R < 2:
        raise ValueError("need at least two samples")
    left = _G(x[0])
    right = _npdf(x[-1]) - x[-1] * special.ndtr(-x[-1])
    a, b = x[:-1], x[1:]
    p = np.arange(1, R) / R
    c = np.clip(special.ndtri(p), a, b)
    Ga, Gb, Gc = _G(a), _G(b), _G(c)
    mid = p * (c - a) - (Gc - Ga) + (Gb - Gc) - p * (b - c)
    return float(left + right + mid.sum())


def empirical_kolmogorov_to_normal(samples) -> float:
    """``sup_t |F_R(t) - Phi(t)|``, attained at an order statistic."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    R = len(x)
    if R < 2:
        raise ValueError("need at least two samples")
    F = special.ndtr(x)
    k = np.arange(1, R + 1)
    return float(max(np.max(np.abs(k / R - F)), np.max(np.abs((k - 1) / R - F))))


# ---------------------------------------------------------------------------
# configuration and simulation


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: LaguerreGaussianSpec
    statistic: LocalStatistic
    n_list: tuple
    replications: int
    seed: int
    lambda_envelope: float = 1.0
    kmax_cap: int = DEFAULT_KMAX_CAP
    workers: int = 1

    def __post_init__(self):
        n_list = tuple(int(n) for n in self.n_list)
        if not n_list:
            raise ValueError("n_list must be nonempty")
        if any(n < 1 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ValueError("n_list must be increasing positive integers")
        object.__setattr__(self, "n_list", n_list)
        if self.replications < 2:
            raise ValueError("need at least two replications")
        if not self.lambda_envelope > 0:
            raise ValueError("lambda_envelope must be positive")

    def seed_index(self, n: int, rep: int) -> int:
        """Replication index of ``rep`` at side ``n``; disjoint across the n list."""
        return self.n_list.index(n) * self.replications + rep


@dataclass
class ReplicationData:
    """Per-replication functionals at one window side ``n``."""

    n: int
    f: np.ndarray  # f(X cap [0, n]^d)
    cubes: np.ndarray  # (R, K) interior cube functionals f_{C_i}
    interior: np.ndarray  # (K, d)

    @property
    def f_interior(self) -> np.ndarray:
        return self.cubes.sum(axis=1)


def _replication_row(stat, pattern, interior_keys):
    vals, _ = subset_terms(stat, pattern.points)
    contrib = cube_contributions(stat, pattern)
    return float(vals.sum()), [contrib.get(k, 0.0) for k in interior_keys]


def simulate(config: ExperimentConfig, n: int, patterns: Sequence[PointPattern] | None = None) -> ReplicationData:
    """Simulate ``config.replications`` patterns on ``[0, n]^d`` and evaluate the functionals."""
    d = config.kernel.d
    interior = interior_index_set(n, config.statistic.tau, d)
    if patterns is None:
        window = Window(d, float(n))
        trunc = spectral_truncation(config.kernel, window, kmax_cap=config.kmax_cap)
        indices = [config.seed_index(n, r) for r in range(config.replications)]
        patterns = sample_many(config.kernel, window, config.seed, indices, trunc, config.workers)
    keys = list(map(tuple, interior.tolist()))
    f = np.empty(len(patterns))
    cubes = np.empty((len(patterns), len(keys)))
    for i, p in enumerate(patterns):
        f[i], cubes[i] = _replication_row(config.statistic, p, keys)
    return ReplicationData(n=n, f=f, cubes=cubes, interior=interior)


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentEstimates:
    n: int
    sigma2_hat: float
    sigma2_stderr: float
    mean_per_cube: float
    mean_per_cube_stderr: float
    M_hat: float
    M_stderr: float
    degenerate: bool


def _moments_at(data: ReplicationData) -> MomentEstimates:
    f = data.f
    R = len(f)
    s2 = float(f.var(ddof=1))
    dev = f - f.mean()
    m4 = float(np.mean(dev**4))
    s2_se = math.sqrt(max(m4 - np.mean(dev**2) ** 2, 0.0) / R)
    cubes = data.cubes
    mean_cube = float(cubes.mean())
    per_rep = cubes.mean(axis=1)
    mean_se = float(per_rep.std(ddof=1) / math.sqrt(R))
    abs3 = np.abs(cubes - mean_cube) ** 3
    m3 = abs3.mean(axis=0)
    j = int(np.argmax(m3))
    M = float(m3[j] ** (1.0 / 3.0))
    se3 = float(abs3[:, j].std(ddof=1) / math.sqrt(R))
    M_se = float(se3 / (3.0 * m3[j] ** (2.0 / 3.0))) if m3[j] > 0 else 0.0
    return MomentEstimates(data.n, s2, s2_se, mean_cube, mean_se, M, M_se, degenerate=not s2 > 0)


def estimate_moments(config: ExperimentConfig, data_per_n: dict[int, ReplicationData]) -> dict:
    """Per-``n`` moment estimates plus the bound inputs shared by every ``n``.

    ``gamma_hat`` is ``sigma2_hat / n^d`` at the largest ``n``. The bound
    inputs add three-standard-error margins in the conservative direction:
    ``M`` is raised, ``gamma`` lowered.
    """
    d = config.kernel.d
    per_n = {n: _moments_at(data_per_n[n]) for n in sorted(data_per_n)}
    n_top = max(per_n)
    top = per_n[n_top]
    gamma_hat = float(top.sigma2_hat / n_top**d)
    gamma_bound = float((top.sigma2_hat - 3.0 * top.sigma2_stderr) / n_top**d)
    M_hat = float(max(m.M_hat for m in per_n.values()))
    M_bound = float(max(m.M_hat + 3.0 * m.M_stderr for m in per_n.values()))
    return {
        "per_n": per_n,
        "gamma_hat": gamma_hat,
        "gamma_bound": gamma_bound,
        "M_hat": M_hat,
        "M_bound": M_bound,
    }


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    sigma2_hat: float
    sigma2_stderr: float
    mean_per_cube: float
    M_hat: float
    gamma_hat: float
    w1_empirical: float
    kolmogorov_empirical: float
    kolmogorov_consistent: bool
    bound: BoundReport | None
    dominated: bool
    flag: str | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bound"] = None if self.bound is None else self.bound.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentRow":
        data = dict(data)
        if data.get("bound") is not None:
            data["bound"] = BoundReport.from_dict(data["bound"])
        return cls(**data)


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple
    slope: float | None
    rate_exponent: float
    bound_inputs: dict
    w_samples: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def all_dominated(self) -> bool:
        return all(r.dominated for r in self.rows)

    def row(self, n: int) -> ExperimentRow:
        return next(r for r in self.rows if r.n == n)

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "slope": self.slope,
            "rate_exponent": self.rate_exponent,
            "bound_inputs": dict(self.bound_inputs),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationReport":
        return cls(
            rows=tuple(ExperimentRow.from_dict(r) for r in data["rows"]),
            slope=data["slope"],
            rate_exponent=data["rate_exponent"],
            bound_inputs=dict(data["bound_inputs"]),
        )


def run_experiment(config: ExperimentConfig, data_per_n: dict[int, ReplicationData] | None = None) -> VerificationReport:
    """Full pipeline over ``config.n_list``.

    A row whose variance is degenerate (or whose lowered ``gamma`` is not
    positive) carries a flag and no bound; the other rows are unaffected.
    """
    if config.replications < MIN_REPLICATIONS:
        raise ValueError(f"distance estimation needs at least {MIN_REPLICATIONS} replications")
    config.kernel.require_valid()
    d = config.kernel.d
    if data_per_n is None:
        data_per_n = {n: simulate(config, n) for n in config.n_list}
    est = estimate_moments(config, data_per_n)
    env = fit_decay_envelope(config.kernel, config.lambda_envelope)
    bound_ok = est["gamma_bound"] > 0 and est["M_bound"] > 0
    rows, samples = [], {}
    R = config.replications
    for n in config.n_list:
        mom = est["per_n"][n]
        data = data_per_n[n]
        if mom.degenerate:
            rows.append(ExperimentRow(
                n=n, sigma2_hat=mom.sigma2_hat, sigma2_stderr=mom.sigma2_stderr,
                mean_per_cube=mom.mean_per_cube, M_hat=mom.M_hat, gamma_hat=est["gamma_hat"],
                w1_empirical=float("nan"), kolmogorov_empirical=float("nan"),
                kolmogorov_consistent=False, bound=None, dominated=False,
                flag="degenerate variance",
            ))
            continue
        w = (data.f - data.f.mean()) / math.sqrt(mom.sigma2_hat)
        samples[n] = w
        w1 = empirical_wasserstein_to_normal(w)
        ks = empirical_kolmogorov_to_normal(w)
        consistent = ks <= kolmogorov_from_wasserstein(w1) + 2.0 / R
        bound, flag = None, None
        if bound_ok:
            bound = wasserstein_bound(BoundInputs(
                d=d, M=est["M_bound"], kappa=env.kappa, lam=env.lam, gamma=est["gamma_bound"], n=n,
            ))
        else:
            flag = "variance rate not positive after margin"
        rows.append(ExperimentRow(
            n=n, sigma2_hat=mom.sigma2_hat, sigma2_stderr=mom.sigma2_stderr,
            mean_per_cube=mom.mean_per_cube, M_hat=mom.M_hat, gamma_hat=est["gamma_hat"],
            w1_empirical=w1, kolmogorov_empirical=ks, kolmogorov_consistent=bool(consistent),
            bound=bound, dominated=bool(bound is not None and w1 <= bound.total), flag=flag,
        ))
    usable = [r for r in rows if r.w1_empirical > 0 and math.isfinite(r.w1_empirical)]
    slope = None
    if len(usable) >= 2:
        slope = float(np.polyfit(np.log([r.n for r in usable]), np.log([r.w1_empirical for r in usable]), 1)[0])
    inputs = {
        "M_hat": est["M_hat"], "M": est["M_bound"], "kappa": env.kappa, "lambda": env.lam,
        "gamma_hat": est["gamma_hat"], "gamma": est["gamma_bound"],
    }
    return VerificationReport(tuple(rows), slope, rate_exponent(d), inputs, samples)


# ---------------------------------------------------------------------------
# side checks


def _boxes_overlap(a, b) -> bool:
    (alo, ahi), (blo, bhi) = [(np.asarray(lo, float), np.asarray(hi, float)) for lo, hi in (a, b)]
    return bool(np.all(alo < bhi) and np.all(blo < ahi))


@dataclass(frozen=True)
class CovarianceCheck:
    cov_hat: float
    stderr: float
    passed: bool


def count_covariance(patterns: Sequence[PointPattern], box_a, box_b) -> CovarianceCheck:
    """Sample covariance of half-open box counts; passes when ``cov <= 3 stderr``."""
    if _boxes_overlap(box_a, box_b):
        raise ValueError("boxes must be disjoint")
    na = np.array([count_in_box(p, box_a) for p in patterns], dtype=float)
    nb = np.array([count_in_box(p, box_b) for p in patterns], dtype=float)
    R = len(na)
    if R < 2:
        raise ValueError("need at least two patterns")
    prod = (na - na.mean()) * (nb - nb.mean())
    cov = float(prod.sum() / (R - 1))
    se = float(prod.std(ddof=1) / math.sqrt(R))
    return CovarianceCheck(cov, se, cov <= 3.0 * se)


def negative_association_check(config: ExperimentConfig, box_a, box_b, side: float | None = None) -> CovarianceCheck:
    """Simulate on ``[0, side]^d`` (default: largest ``n``) and test count covariance."""
    if _boxes_overlap(box_a, box_b):
        raise ValueError("boxes must be disjoint")
    d = config.kernel.d
    side = float(max(config.n_list) if side is None else side)
    window = Window(d, side)
    for lo, hi in (box_a, box_b):
        if np.any(np.asarray(lo) < 0) or np.any(np.asarray(hi) > side):
            raise ValueError("boxes must lie inside the window")
    trunc = spectral_truncation(config.kernel, window, kmax_cap=config.kmax_cap)
    patterns = sample_many(config.kernel, window, config.seed, range(config.replications), trunc, config.workers)
    return count_covariance(patterns, box_a, box_b)


@dataclass(frozen=True)
class InteriorRow:
    n: int
    var_diff_hat: float
    ratio_to_n_pow_dminus1: float


@dataclass(frozen=True)
class InteriorCheck:
    rows: tuple
    spread: float
    passed: bool


def interior_approximation_check(config: ExperimentConfig, data_per_n: dict[int, ReplicationData] | None = None) -> InteriorCheck:
    """Variance of ``f(X cap [0, n]^d) - f_interior(X)`` against ``n^{d-1}``.

    Passes when the ratio varies by less than a factor 3 across ``n_list``.
    """
    if len(config.n_list) < 2:
        raise ValueError("need at least two window sides")
    d = config.kernel.d
    if data_per_n is None:
        data_per_n = {n: simulate(config, n) for n in config.n_list}
    rows = []
    for n in config.n_list:
        data = data_per_n[n]
        v = float(np.var(data.f - data.f_interior, ddof=1))
        rows.append(InteriorRow(n, v, v / n ** (d - 1)))
    ratios = np.array([r.ratio_to_n_pow_dminus1 for r in rows])
    if np.all(ratios == 0):
        spread = 1.0
    elif np.any(ratios == 0):
        spread = math.inf
    else:
        spread = float(ratios.max() / ratios.min())
    return InteriorCheck(tuple(rows), spread, spread < 3.0)

