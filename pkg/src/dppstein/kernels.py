"""Laguerre-Gaussian kernels for stationary determinantal point processes.

The family is indexed by an order ``m``, a length scale ``alpha``, an
intensity ``rho`` and a dimension ``d``::

    C(z) = rho / binom(m-1+d/2, m-1) * L_{m-1}^{d/2}(|z/alpha|^2 / m) * exp(-|z/alpha|^2 / m)

A process with this kernel exists iff ``alpha <= max_intensity_alpha(m, rho, d)``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, optimize, special

from .errors import InvalidKernelError

__all__ = [
    "LaguerreGaussianSpec",
    "DecayEnvelope",
    "SpectralDensity",
    "VarianceCondition",
    "laguerre",
    "binom_real",
    "kernel_value",
    "max_intensity_alpha",
    "covariance_D",
    "pair_correlation",
    "fit_decay_envelope",
    "spectral_density",
    "sufficient_variance_condition",
]

# Relative slack when comparing a spectral density against the eigenvalue
# ceiling 1.
EIGENVALUE_TOL = 1e-9


def binom_real(a: float, k: float) -> float:
    """Binomial coefficient ``C(a, k)`` for real ``a >= k >= 0`` via log-gamma."""
    if k < 0 or a < k:
        raise ValueError(f"binom_real needs a >= k >= 0, got a={a}, k={k}")
    return math.exp(math.lgamma(a + 1) - math.lgamma(k + 1) - math.lgamma(a - k + 1))


def laguerre(n: int, s: float, x):
    """Generalized Laguerre polynomial ``L_n^s(x)`` by the three-term recurrence.

    Parameters
    ----------
    n : int
        Degree, ``n >= 0``.
    s : float
        Shape parameter (any real).
    x : float or numpy.ndarray
        Evaluation points.

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``x``.
    """
    if n < 0:
        raise ValueError("laguerre degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + s - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + s - x) * cur - (k + s) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


@dataclass(frozen=True)
class LaguerreGaussianSpec:
    """Parameters of one Laguerre-Gaussian kernel.

    ``alpha`` is in window length units, ``rho`` in points per unit volume.
    """

    m: int
    alpha: float
    rho: float
    d: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def alpha_max(self) -> float:
        return max_intensity_alpha(self.m, self.rho, self.d)

    @property
    def valid(self) -> bool:
        return self.alpha <= self.alpha_max

    @property
    def strictly_valid(self) -> bool:
        return self.alpha < self.alpha_max

    @property
    def normalizer(self) -> float:
        return binom_real(self.m - 1 + self.d / 2, self.m - 1)

    def require_valid(self):
        if not self.valid:
            raise InvalidKernelError(
                f"alpha={self.alpha:.6g} exceeds the existence maximum "
                f"alpha_max={self.alpha_max:.6g} "
                "(need alpha <= [binom(m-1+d/2, m-1) / (rho (m pi)^(d/2))]^(1/d))"
            )

    def radial(self, t):
        """Kernel as a function of the Euclidean norm ``t = |z|``."""
        u = np.square(np.asarray(t, dtype=float) / self.alpha) / self.m
        return self.rho / self.normalizer * laguerre(self.m - 1, self.d / 2, u) * np.exp(-u)

    def to_dict(self) -> dict:
        return {"m": self.m, "alpha": self.alpha, "rho": self.rho, "d": self.d}


def kernel_value(spec: LaguerreGaussianSpec, z):
    """Evaluate ``C(z)`` for displacement vectors ``z`` of shape ``(..., d)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != spec.d:
        raise ValueError(f"displacement has trailing dimension {z.shape[-1]}, expected {spec.d}")
    return spec.radial(np.linalg.norm(z, axis=-1))


def max_intensity_alpha(m: int, rho: float, d: int) -> float:
    """Largest ``alpha`` for which the Laguerre-Gaussian DPP exists."""
    if m < 1 or rho <= 0 or d < 1:
        raise ValueError("max_intensity_alpha needs m >= 1, rho > 0, d >= 1")
    b = binom_real(m - 1 + d / 2, m - 1)
    return (b / (rho * (m * math.pi) ** (d / 2))) ** (1.0 / d)


def covariance_D(spec: LaguerreGaussianSpec, x, y):
    """Covariance density ``rho_2(x, y) - rho^2 = -C(x - y)^2`` (always <= 0)."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return -np.square(kernel_value(spec, diff))


def pair_correlation(spec: LaguerreGaussianSpec, r):
    """Theoretical pair correlation ``g(r) = 1 - C(r)^2 / rho^2``."""
    return 1.0 - np.square(spec.radial(r) / spec.rho)


# ---------------------------------------------------------------------------
# decay envelope


@dataclass(frozen=True)
class DecayEnvelope:
    """Certified bound ``sup_{|x-y|_inf >= r} |D(x, y)| <= kappa * exp(-lambda * r)``."""

    kappa: float
    lam: float

    def __call__(self, r):
        return self.kappa * np.exp(-self.lam * np.asarray(r, dtype=float))

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "lambda": self.lam}


def _tail_majorant(values: np.ndarray) -> np.ndarray:
    """Running supremum from the right: ``E[i] = max(values[i:])``."""
    return np.maximum.accumulate(values[::-1])[::-1]


def _envelope_certified(spec, env, n_grid=200, span=20.0) -> bool:
    r = np.linspace(0.0, span * spec.alpha, n_grid)
    t = np.linspace(0.0, (span + 10.0) * spec.alpha * math.sqrt(spec.m), 20 * n_grid)
    tail = np.append(_tail_majorant(np.square(spec.radial(t))), 0.0)
    # E(r) = max(C(r)^2, sup of C^2 over grid points beyond r)
    beyond = np.searchsorted(t, r, side="left")
    E = np.maximum(np.square(spec.radial(r)), tail[beyond])
    return bool(np.all(E <= env(r) + 1e-12))


def fit_decay_envelope(spec: LaguerreGaussianSpec, lam: float = 1.0) -> DecayEnvelope:
    """Smallest ``kappa`` such that ``C(t)^2 <= kappa * exp(-lam * t)`` for all ``t >= 0``.

    Because ``sup_r E(r) e^{lam r}`` with ``E`` the decreasing majorant of
    ``C^2`` equals ``sup_t C(t)^2 e^{lam t}``, it is enough to maximise the
    latter. Dense radial grid first, then bounded scalar refinement around the
    best grid cell.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    scale = spec.alpha * math.sqrt(spec.m)
    t_hi = max(12.0 * scale, lam * spec.m * spec.alpha**2)

    def log_obj(t):
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(np.abs(spec.radial(t))) + lam * t

    for _ in range(30):
        t = np.linspace(0.0, t_hi, 20001)
        vals = log_obj(t)
        k = int(np.argmax(vals))
        if k < len(t) - 50:
            break
        t_hi *= 2.0
    else:
        raise RuntimeError("decay envelope search did not converge")

    lo, hi = t[max(k - 1, 0)], t[min(k + 1, len(t) - 1)]
    best = vals[k]
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda s: -float(log_obj(s)), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-13 * max(1.0, hi)},
        )
        best = max(best, -res.fun)
    kappa = math.exp(best)
    env = DecayEnvelope(kappa=kappa, lam=float(lam))
    if not _envelope_certified(spec, env):
        raise RuntimeError("decay envelope failed certification")
    return env


# ---------------------------------------------------------------------------
# spectral density


@dataclass(frozen=True)
class SpectralDensity:
    """Fourier transform ``phi(xi) = int C(z) exp(-2 pi i xi.z) dz`` of a kernel.

    ``support_radius`` is the frequency norm beyond which ``phi`` is treated
    as zero (below ``1e-18`` times its peak).
    """

    spec: LaguerreGaussianSpec
    mode: str
    radial: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    sup: float

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.spec.d:
            raise ValueError(f"frequency has trailing dimension {xi.shape[-1]}, expected {self.spec.d}")
        return self.radial(np.linalg.norm(xi, axis=-1))

    def total_mass(self) -> float:
        """``int phi`` over R^d by radial quadrature; equals ``C(0) = rho``."""
        d = self.spec.d
        area = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
        val, _ = integrate.quad(
            lambda q: float(self.radial(np.array(q))) * q ** (d - 1),
            0.0, self.support_radius, limit=400,
        )
        return area * val


def _radial_fourier(spec: LaguerreGaussianSpec, q: float, t_max: float) -> float:
    d = spec.d
    if q == 0.0:
        area = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
        val, _ = integrate.quad(lambda t: spec.radial(t) * t ** (d - 1), 0.0, t_max, limit=400)
        return area * val
    nu = d / 2 - 1
    val, _ = integrate.quad(
        lambda t: spec.radial(t) * special.jv(nu, 2 * math.pi * q * t) * t ** (d / 2),
        0.0, t_max, limit=800, epsabs=1e-15, epsrel=1e-12,
    )
    return 2 * math.pi * q ** (-nu) * val


@functools.lru_cache(maxsize=64)
def spectral_density(spec: LaguerreGaussianSpec, n_grid: int = 513) -> SpectralDensity:
    """Spectral density of ``spec``; closed form for ``m = 1``, numeric Hankel transform otherwise.

    Raises
    ------
    InvalidKernelError
        If the density exceeds 1 anywhere it was evaluated (the integral
        operator would have eigenvalues above 1).
    """
    a, d, m = spec.alpha, spec.d, spec.m
    if m == 1:
        amp = spec.rho * math.pi ** (d / 2) * a**d
        coef = (math.pi * a) ** 2

        def radial(q):
            return amp * np.exp(-coef * np.square(np.asarray(q, dtype=float)))

        # amp * exp(-coef q^2) < 1e-18 * amp beyond this radius
        q_cut = math.sqrt(41.5) / (math.pi * a)
        sd = SpectralDensity(spec, "closed-form", radial, q_cut, amp)
    else:
        t_max = 9.0 * a * math.sqrt(m)
        peak = _radial_fourier(spec, 0.0, t_max)
        # walk outwards until the transform drops under quadrature noise
        q_cut = 1.0 / (math.pi * a)
        while abs(_radial_fourier(spec, q_cut, t_max)) > 1e-13 * peak:
            q_cut *= 1.25
        q = np.linspace(0.0, q_cut, n_grid)
        vals = np.array([_radial_fourier(spec, float(qq), t_max) for qq in q])
        if vals.min() < -1e-10 * peak:
            raise RuntimeError("numeric spectral density went negative beyond quadrature noise")
        spline = interpolate.CubicSpline(q, vals)

        def radial(qq, _spline=spline, _cut=q_cut):
            qq = np.asarray(qq, dtype=float)
            out = np.where(qq <= _cut, _spline(np.minimum(qq, _cut)), 0.0)
            return np.clip(out, 0.0, None)

        sd = SpectralDensity(spec, "numeric-radial-transform", radial, q_cut, float(vals.max()))
    if sd.sup > 1.0 + EIGENVALUE_TOL:
        raise InvalidKernelError(
            f"spectral density peaks at {sd.sup:.6g} > 1: kernel operator has eigenvalues "
            f"outside [0, 1] (alpha={a:.6g} > alpha_max={spec.alpha_max:.6g})"
        )
    return sd


# ---------------------------------------------------------------------------
# variance sufficiency


@dataclass(frozen=True)
class VarianceCondition:
    lower_estimate: float
    error_bound: float
    satisfied: bool


def _gauss_tensor(d, nodes, lo, hi):
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * w
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return pts, wts


def sufficient_variance_condition(spec: LaguerreGaussianSpec, stat, n: float, nodes: int | None = None) -> VarianceCondition:
    """Estimate ``n^{-d} int_{[0,n]^{dp}} g det[K(x_i, x_j)]`` for subset size ``p <= 2``.

    The statistic must be translation invariant and supported on subsets of a
    single size ``p = stat.support_size``. For ``p = 2`` the double integral
    is reduced to an integral over the displacement ``z`` weighted by the
    overlap fraction ``prod_j (1 - |z_j| / n)``. The error bound is the gap
    between two Gauss-Legendre resolutions.
    """
    if not spec.strictly_valid:
        raise InvalidKernelError(
            f"variance sufficiency needs alpha < alpha_max strictly "
            f"(alpha={spec.alpha:.6g}, alpha_max={spec.alpha_max:.6g})"
        )
    p = stat.support_size
    if p not in (1, 2):
        raise ValueError(f"only subset sizes 1 and 2 are supported, got {p}")
    d = spec.d
    if p == 1:
        # g({x}) for stationary g does not depend on x; average over a coarse grid anyway
        pts, wts = _gauss_tensor(d, 8, 0.0, float(n))
        est = float(np.sum(wts * stat.single_values(pts)) * spec.rho / float(n) ** d)
        return VarianceCondition(est, 0.0, est > 0.0)

    reach = min(stat.tau, float(n))
    if nodes is None:
        nodes = {1: 4096, 2: 512, 3: 96}.get(d, max(8, int(2e6 ** (1 / d))))

    def quad(k):
        z, w = _gauss_tensor(d, k, -reach, reach)
        origin = np.zeros_like(z)
        g = stat.pair_values(origin, z)
        overlap = np.prod(np.clip(1.0 - np.abs(z) / n, 0.0, None), axis=-1)
        dens = spec.rho**2 - np.square(kernel_value(spec, z))
        return float(np.sum(w * g * dens * overlap))

    coarse, fine = quad(nodes // 2), quad(nodes)
    err = abs(fine - coarse)
    return VarianceCondition(fine, err, bool(fine > err and fine > 0.0))
