"""Approximate simulation of stationary DPPs on ``[0, L]^d``.

The kernel is replaced by its periodic Fourier approximation on the window::

    K(x, y) = L^{-d} sum_k phi(k / L) exp(2 pi i k.(x - y) / L)

whose eigenvalues ``phi(k / L)`` select basis functions by independent
Bernoulli draws. The resulting projection DPP is sampled point by point with
the Gram-Schmidt conditional density, using uniform proposals (the basis
functions have constant modulus, so the proposal dominates exactly).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidKernelError, SamplingError, TruncationError
from .kernels import EIGENVALUE_TOL, LaguerreGaussianSpec, spectral_density

__all__ = [
    "Window",
    "PointPattern",
    "SeedSpec",
    "SpectralTruncation",
    "spectral_truncation",
    "sample_projection_dpp",
    "sample_dpp",
    "sample_many",
    "empirical_intensity",
    "PCFEstimate",
    "empirical_pcf",
    "binned_theoretical_pcf",
    "count_in_box",
]

TRUNCATION_TOL = 1e-3
DEFAULT_KMAX_CAP = 512
NEGATIVE_GUARD = -1e-9


@dataclass(frozen=True)
class Window:
    d: int
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError("window side must be positive")
        if self.d < 1:
            raise ValueError("window dimension must be >= 1")

    @property
    def volume(self) -> float:
        return float(self.side) ** self.d

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        return np.all((pts >= 0.0) & (pts <= self.side), axis=-1)


@dataclass(frozen=True)
class PointPattern:
    window: Window
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.window.d)
        if not np.all(self.window.contains(pts)):
            raise ValueError("pattern has points outside its window")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def is_simple(self) -> bool:
        return len(np.unique(self.points, axis=0)) == len(self.points)


@dataclass(frozen=True)
class SeedSpec:
    """``(master, index)`` names an independent random stream."""

    master: int
    index: int = 0

    def __post_init__(self):
        if not 0 <= self.master < 2**64:
            raise ValueError("master seed must be an unsigned 64-bit integer")
        if self.index < 0:
            raise ValueError("replication index must be nonnegative")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.master, spawn_key=(self.index,))))


@dataclass(frozen=True)
class SpectralTruncation:
    """Retained frequencies ``|k|_inf <= k_max`` and their eigenvalues."""

    window: Window
    k_max: int
    freqs: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    tail_fraction: float = 0.0

    @property
    def expected_count(self) -> float:
        return float(self.eigenvalues.sum())


def _lattice(K: int, d: int) -> np.ndarray:
    axis = np.arange(-K, K + 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def spectral_truncation(spec: LaguerreGaussianSpec, window: Window, tol: float = TRUNCATION_TOL,
                        kmax_cap: int = DEFAULT_KMAX_CAP) -> SpectralTruncation:
    """Smallest cube of frequencies holding all but ``tol`` of the spectral mass.

    Raises
    ------
    InvalidKernelError
        If any eigenvalue exceeds ``1 + 1e-9``.
    TruncationError
        If the tolerance needs ``k_max > kmax_cap``.
    """
    if window.d != spec.d:
        raise ValueError("window and kernel dimensions differ")
    spec.require_valid()
    sd = spectral_density(spec)
    L = window.side
    K_all = int(math.ceil(sd.support_radius * L)) + 1
    if K_all > 4 * kmax_cap:
        K_all = 4 * kmax_cap
    freqs = _lattice(K_all, spec.d)
    lam = sd(freqs / L)
    if lam.max() > 1.0 + EIGENVALUE_TOL:
        raise InvalidKernelError(f"eigenvalue {lam.max():.6g} exceeds 1; kernel operator not contractive")
    shell = np.max(np.abs(freqs), axis=-1)
    per_shell = np.bincount(shell, weights=lam, minlength=K_all + 1)
    total = per_shell.sum()
    tail = total - np.cumsum(per_shell)
    ok = np.nonzero(tail < tol * total)[0]
    if len(ok) == 0 or ok[0] > kmax_cap:
        raise TruncationError(
            f"spectral tail cannot be brought below {tol:g} of the total mass with k_max <= {kmax_cap}"
        )
    K = int(ok[0])
    keep = shell <= K
    lam_k = np.clip(lam[keep], 0.0, 1.0)
    return SpectralTruncation(window, K, freqs[keep], lam_k, float(tail[K] / total))


def sample_projection_dpp(freqs: np.ndarray, side: float, rng: np.random.Generator,
                          max_batch: int = 256) -> np.ndarray:
    """Sample the projection DPP spanned by ``exp(2 pi i k.x / side)`` for the given ``k``.

    Points are added one at a time. With ``v(x)`` the vector of basis values
    and ``Q`` an orthonormal basis of ``span{v(x_1), ..., v(x_i)}``, the next
    point has density proportional to ``|v(x)|^2 - |Q^H v(x)|^2``; as
    ``|v(x)|^2 = N`` everywhere, uniform proposals accepted with probability
    ``1 - |Q^H v(x)|^2 / N`` are exact.
    """
    freqs = np.asarray(freqs, dtype=float)
    N, d = freqs.shape
    pts = np.empty((N, d))
    if N == 0:
        return pts
    Q = np.zeros((N, N), dtype=complex)
    scale = 2.0 * math.pi / side
    for i in range(N):
        batch = min(max_batch, max(4, int(math.ceil(2.0 * N / (N - i)))))
        while True:
            cand = rng.uniform(0.0, side, size=(batch, d))
            u = rng.uniform(size=batch)
            V = np.exp(1j * scale * (cand @ freqs.T))
            if i:
                C = V @ Q[:, :i].conj()
                resid = N - np.sum(np.abs(C) ** 2, axis=1)
            else:
                C = None
                resid = np.full(batch, float(N))
            ratio = resid / N
            if ratio.min() < NEGATIVE_GUARD:
                raise SamplingError(f"negative conditional intensity {ratio.min():.3g}")
            ratio = np.clip(ratio, 0.0, 1.0)
            hits = np.nonzero(u < ratio)[0]
            if len(hits):
                j = hits[0]
                break
        pts[i] = cand[j]
        w = V[j].copy()
        if i:
            w -= Q[:, :i] @ C[j]
            w -= Q[:, :i] @ (Q[:, :i].conj().T @ w)  # second pass for orthogonality
        Q[:, i] = w / np.linalg.norm(w)
    return pts


def sample_dpp(spec: LaguerreGaussianSpec, window: Window, seed: SeedSpec,
               truncation: SpectralTruncation | None = None) -> PointPattern:
    """One approximate DPP realization on ``window`` from the stream ``seed``."""
    if truncation is None:
        truncation = spectral_truncation(spec, window)
    rng = seed.generator()
    chosen = rng.uniform(size=len(truncation.eigenvalues)) < truncation.eigenvalues
    pts = sample_projection_dpp(truncation.freqs[chosen], window.side, rng)
    return PointPattern(window, pts)


def _sample_task(args):
    spec, window, master, index, truncation = args
    return sample_dpp(spec, window, SeedSpec(master, index), truncation)


def sample_many(spec: LaguerreGaussianSpec, window: Window, master: int, indices: Sequence[int],
                truncation: SpectralTruncation | None = None, workers: int = 1) -> list[PointPattern]:
    """Independent realizations for each replication index, returned in index order."""
    if truncation is None:
        truncation = spectral_truncation(spec, window)
    tasks = [(spec, window, master, int(i), truncation) for i in indices]
    if workers <= 1:
        return [_sample_task(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sample_task, tasks, chunksize=8))


# ---------------------------------------------------------------------------
# moment estimators


def _common_window(patterns) -> Window:
    if not patterns:
        raise ValueError("need at least one pattern")
    w = patterns[0].window
    if any(p.window != w for p in patterns):
        raise ValueError("patterns must share a window")
    return w


def empirical_intensity(patterns: Sequence[PointPattern]) -> tuple[float, float]:
    """Mean count per unit volume and its standard error across replications."""
    w = _common_window(patterns)
    dens = np.array([len(p) for p in patterns], dtype=float) / w.volume
    se = float(dens.std(ddof=1) / math.sqrt(len(dens))) if len(dens) > 1 else float("nan")
    return float(dens.mean()), se


def count_in_box(pattern: PointPattern, box) -> int:
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    return int(np.sum(np.all((pattern.points >= lo) & (pattern.points < hi), axis=-1)))


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class PCFEstimate:
    edges: np.ndarray
    g_hat: np.ndarray
    stderr: np.ndarray
    n_used: np.ndarray  # patterns contributing to each bin


def empirical_pcf(patterns: Sequence[PointPattern], edges) -> PCFEstimate:
    """Translation-corrected pair correlation, averaged over replications.

    Per replication, ordered pairs at distance in a bin are weighted by
    ``1 / |W cap (W + x - y)|`` and divided by ``N (N - 1) / |W|^2`` times the
    shell volume. Patterns with fewer than two points carry no pair
    information and are skipped; bins with no contributing pattern report NaN.
    """
    w = _common_window(patterns)
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 3:
        raise ValueError("need at least two bins")
    if np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise ValueError("bin edges must be nonnegative and strictly increasing")
    if edges[-1] > w.side * math.sqrt(w.d):
        raise ValueError("bin range exceeds the window diameter")
    d, L = w.d, w.side
    shells = _unit_ball_volume(d) * (edges[1:] ** d - edges[:-1] ** d)
    rows = []
    for p in patterns:
        n = len(p)
        if n < 2:
            continue
        pts = p.points
        i, j = np.triu_indices(n, k=1)
        diff = np.abs(pts[i] - pts[j])
        dist = np.linalg.norm(diff, axis=-1)
        sel = (dist >= edges[0]) & (dist < edges[-1])
        overlap = np.prod(L - diff[sel], axis=-1)
        bins = np.searchsorted(edges, dist[sel], side="right") - 1
        weighted = np.bincount(bins, weights=2.0 / overlap, minlength=len(shells))
        rho2 = n * (n - 1) / w.volume**2
        rows.append(weighted / (rho2 * shells))
    nb = len(shells)
    if not rows:
        nan = np.full(nb, np.nan)
        return PCFEstimate(edges, nan, nan.copy(), np.zeros(nb, dtype=int))
    G = np.array(rows)
    R = len(G)
    se = G.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full(nb, np.nan)
    return PCFEstimate(edges, G.mean(axis=0), se, np.full(nb, R))


def binned_theoretical_pcf(spec: LaguerreGaussianSpec, edges) -> np.ndarray:
    """Shell-volume average of ``1 - C(r)^2 / rho^2`` over each bin."""
    from scipy import integrate

    from .kernels import pair_correlation

    edges = np.asarray(edges, dtype=float)
    d = spec.d
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        num, _ = integrate.quad(lambda r: float(pair_correlation(spec, r)) * r ** (d - 1), a, b)
        out.append(num * d / (b**d - a**d))
    return np.array(out)
