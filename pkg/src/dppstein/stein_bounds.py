"""Explicit L1 (Wasserstein) normal-approximation bound for block sums of
associated point processes, with its supporting inequalities.

Inputs are the dimension ``d``, a uniform third-moment bound ``M`` on the
cube variables, a decay envelope ``kappa * exp(-lam * r)`` for the
covariance density and a variance rate ``gamma`` with
``Var(S_n) >= gamma * n^d``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

__all__ = [
    "BoundInputs",
    "BoundReport",
    "mu_nu",
    "theta",
    "constants",
    "rate_exponent",
    "optimal_block_length",
    "wasserstein_bound",
    "relaxed_rate",
    "rio_cov_bound",
    "alpha_mixing_bound",
    "weighted_geom_sum",
    "symmetric_geom_sum",
    "kolmogorov_from_wasserstein",
    "KOLMOGOROV_DENSITY_CONSTANT",
]

# sup of the standard normal density; used in the Kolmogorov comparison
KOLMOGOROV_DENSITY_CONSTANT = 1.0 / math.sqrt(2.0 * math.pi)

_SINGULAR = 1e-8
# Within this distance of 1 the closed forms cancel catastrophically
# (the numerator of the weighted sum is O((n (w-1))^2)); direct summation is
# exact to rounding and costs O(n).
_CANCELLATION = 0.05


def mu_nu(lam: float) -> tuple[float, float]:
    """``(e^{2 lam/3}, e^{lam}) / (e^{lam/3} - 1)^2``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    denom = math.expm1(lam / 3.0) ** 2
    return math.exp(2.0 * lam / 3.0) / denom, math.exp(lam) / denom


def _spread(d: int, lam: float) -> float:
    mu, nu = mu_nu(lam)
    return (4.0 * mu + 2.0 * nu) ** d - (2.0 * nu) ** d


def _check(d, M, kappa, gamma, lam):
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    if not (M > 0 and kappa > 0 and gamma > 0 and lam > 0):
        raise ValueError("M, kappa, gamma and lambda must be positive")


def theta(d: int, M: float, kappa: float, gamma: float, lam: float) -> float:
    _check(d, M, kappa, gamma, lam)
    inner = (math.sqrt(2.0 * gamma) * kappa ** (1.0 / 3.0) * _spread(d, lam)
             / (18.0 ** (d + 1) * math.sqrt(math.pi) * d * M))
    return lam / 3.0 * inner ** (1.0 / (2 * d + 1))


def constants(d: int, M: float, kappa: float, gamma: float, lam: float) -> tuple[float, float, float]:
    """The three prefactors ``(C1, C2, C3)`` of the bound."""
    _check(d, M, kappa, gamma, lam)
    e = 1.0 / (2 * d + 1)
    # C1 assembled in logs: M^{4d+3} and the spread^{2d} overflow quickly
    log_c1 = e * (
        math.log(9.0) + d * math.log(36.0) + (4 * d + 3) * math.log(M)
        + 2 * d * math.log(_spread(d, lam))
        - (2 * d + 1.5) * math.log(gamma) - d * math.log(math.pi)
    )
    C1 = math.exp(log_c1) * ((2 * d) ** (-2 * d * e) + 2.0 * (2 * d) ** e)
    th = theta(d, M, kappa, gamma, lam)
    C2 = 3.0 * 6.0**d * kappa ** (1.0 / 3.0) * M**2 * th ** (4.0 * d / 3.0) / (math.sqrt(math.pi) * gamma)
    C3 = 2.0 ** (d + 1) * kappa ** (2.0 / 3.0) * M / math.sqrt(gamma)
    return C1, C2, C3


def rate_exponent(d: int) -> float:
    return d / (4 * d + 2)


def _l0(d, M, kappa, gamma, lam, n) -> float:
    inner = (math.sqrt(2.0 * gamma) * kappa ** (1.0 / 3.0) * _spread(d, lam) * n ** (d / 2.0)
             / (18.0 ** (d + 1) * math.sqrt(math.pi) * M))
    return inner ** (1.0 / (2 * d + 1))


def optimal_block_length(d: int, M: float, kappa: float, gamma: float, lam: float, n: int) -> int:
    """``floor(l_0)``, the block side minimising the polynomial part of the bound.

    Returns 0 when ``n`` is too small for any block; callers decide how to
    report that (see :func:`wasserstein_bound`).
    """
    _check(d, M, kappa, gamma, lam)
    if n < 1:
        raise ValueError("n must be a positive integer")
    return int(math.floor(_l0(d, M, kappa, gamma, lam, n)))


@dataclass(frozen=True)
class BoundInputs:
    d: int
    M: float
    kappa: float
    lam: float
    gamma: float
    n: int

    def __post_init__(self):
        _check(self.d, self.M, self.kappa, self.gamma, self.lam)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")


@dataclass(frozen=True)
class BoundReport:
    d: int
    n: int
    mu: float
    nu: float
    theta: float
    C1: float
    C2: float
    C3: float
    l_star: int
    l_star_optimal: bool
    term1: float
    term2: float
    term3: float
    total: float
    rate_exponent: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundReport":
        return cls(**data)


def wasserstein_bound(inputs: BoundInputs) -> BoundReport:
    """Evaluate all constants and the three terms of the bound at ``inputs.n``.

    If the optimal block length floors to 0 the report carries
    ``l_star = 1`` and ``l_star_optimal = False``; the terms are still
    evaluated from the closed-form constants.
    """
    d, M, kappa, lam, gamma, n = (inputs.d, inputs.M, inputs.kappa, inputs.lam, inputs.gamma, inputs.n)
    mu, nu = mu_nu(lam)
    th = theta(d, M, kappa, gamma, lam)
    C1, C2, C3 = constants(d, M, kappa, gamma, lam)
    l_star = optimal_block_length(d, M, kappa, gamma, lam, n)
    optimal = l_star >= 1
    b = rate_exponent(d)
    nb = n**b
    log_n = math.log(n)
    term1 = C1 / nb
    term2 = math.exp(math.log(C2) + d * (4 * d + 1) / (6 * d + 3) * log_n - th * nb)
    term3 = math.exp(math.log(C3) + 7 * d / 6 * log_n - 2 * th * nb)
    return BoundReport(
        d=d, n=n, mu=mu, nu=nu, theta=th, C1=C1, C2=C2, C3=C3,
        l_star=l_star if optimal else 1, l_star_optimal=optimal,
        term1=term1, term2=term2, term3=term3, total=term1 + term2 + term3,
        rate_exponent=b,
    )


@dataclass(frozen=True)
class RelaxedRate:
    valid: bool
    exponent: float


def relaxed_rate(d: int, s) -> RelaxedRate:
    """Rate ``n^{-exponent}`` when the variance only grows like ``n^s``.

    Exact rational arithmetic, so ``s = d`` reproduces :func:`rate_exponent`
    bit for bit and the boundary ``s = (4d+2) d / (4d+3)`` is classified
    correctly.
    """
    if d < 1 or not s > 0:
        raise ValueError("need d >= 1 and s > 0")
    s_q = Fraction(s)
    threshold = Fraction(4 * d + 2, 4 * d + 3) * d
    exponent = Fraction(4 * d + 3, 4 * d + 2) * s_q - d
    return RelaxedRate(valid=s_q > threshold, exponent=float(exponent))


def rio_cov_bound(alpha: float, p: float, q: float, normX: float, normY: float) -> float:
    """``alpha^{1/r} ||X||_p ||Y||_q`` with ``1/p + 1/q + 1/r = 1``; ``p``, ``q`` may be ``inf``."""
    if not 0.0 <= alpha <= 0.25:
        raise ValueError("an alpha-mixing coefficient lies in [0, 1/4]")
    if p < 1 or q < 1:
        raise ValueError("p and q must be at least 1")
    if normX < 0 or normY < 0:
        raise ValueError("norms must be nonnegative")
    inv_r = 1.0 - 1.0 / p - 1.0 / q
    if inv_r < 0:
        raise ValueError(f"infeasible exponents: 1/p + 1/q = {1.0 / p + 1.0 / q:g} > 1")
    factor = 1.0 if inv_r == 0 else alpha**inv_r
    return factor * normX * normY


def alpha_mixing_bound(a: float, b: float, c: float, env) -> float:
    """``a b kappa exp(-lambda c)``: mixing between sets of volume ``a``, ``b`` at distance ``c``."""
    if not (a > 0 and b > 0) or c < 0:
        raise ValueError("need a, b > 0 and c >= 0")
    return a * b * float(env(c))


def weighted_geom_sum(n: int, w: float) -> float:
    """``sum_{k=1}^{n-1} (n-k) w^k``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if abs(w - 1.0) <= max(_SINGULAR, _CANCELLATION):
        return float(sum((n - k) * w**k for k in range(1, n)))
    return w * ((n - 1) - n * w + w**n) / (w - 1.0) ** 2


def symmetric_geom_sum(n: int, v: float) -> float:
    """``n + sum_{a=1}^{n-1} (n-a) (v^a + v^{-a})``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if abs(v - 1.0) <= _SINGULAR:
        return float(n + sum((n - a) * (v**a + v**-a) for a in range(1, n)))
    # expm1/log1p keep v^n - 1 accurate to rounding near v = 1
    h = v - 1.0
    return v ** (1 - n) * (math.expm1(n * math.log1p(h)) / h) ** 2


def kolmogorov_from_wasserstein(w1: float) -> float:
    """Kolmogorov distance to N(0, 1) implied by an L1 distance ``w1``.

    Uses ``sqrt(2 c w1)`` with ``c = (2 pi)^{-1/2}``, the maximum of the
    standard normal density.
    """
    if w1 < 0:
        raise ValueError("w1 must be nonnegative")
    return math.sqrt(2.0 * KOLMOGOROV_DENSITY_CONSTANT * w1)
