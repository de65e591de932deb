"""Locally supported functionals ``f(Y) = sum_{S subset Y} g(S)`` and block sums.

Subsets are enumerated up to size ``p_max`` among points whose pairwise
sup-norm distance is at most ``tau``, using a cell grid of cell size ``tau``.
Unit cubes ``C_i`` are half-open, ``prod_j [i_j - 1/2, i_j + 1/2)``, so every
point and every barycenter belongs to exactly one cube.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import EmptyInteriorError

__all__ = [
    "LocalStatistic",
    "BlockDecomposition",
    "register_statistic",
    "neighbor_pairs",
    "subset_terms",
    "eval_functional",
    "cube_contributions",
    "covering_indices",
    "interior_index_set",
    "restricted_functional",
    "block_decompose",
    "cube_variables",
    "block_sums",
]


@dataclass(frozen=True)
class _Evaluator:
    single: Callable | None = None  # points (k, d) -> (k,)
    pair: Callable | None = None  # xa (k, d), xb (k, d), params -> (k,)
    subset: Callable | None = None  # one subset (s, d), params -> float
    support_size: int | None = None
    p_max: int = 2


_REGISTRY: dict[str, _Evaluator] = {}


def register_statistic(name, *, single=None, pair=None, subset=None, support_size=None, p_max=2):
    """Register a subset function ``g`` under ``name``.

    ``single(points)`` and ``pair(xa, xb, stat)`` are vectorized evaluators
    for subsets of size 1 and 2; ``subset(points, stat)`` handles larger sets
    one at a time. Any evaluator left as ``None`` means ``g = 0`` on subsets
    of that size.
    """
    _REGISTRY[name] = _Evaluator(single, pair, subset, support_size, p_max)


def _euclid(xa, xb):
    return np.linalg.norm(np.asarray(xb) - np.asarray(xa), axis=-1)


register_statistic(
    "count", single=lambda pts: np.ones(len(pts)), support_size=1, p_max=1
)
register_statistic(
    "pair_indicator",
    pair=lambda xa, xb, st: (_euclid(xa, xb) <= st.r).astype(float),
    support_size=2,
)
register_statistic(
    "pair_weight",
    pair=lambda xa, xb, st: np.exp(-np.square(_euclid(xa, xb) / st.r)),
    support_size=2,
)
register_statistic("zero", support_size=1, p_max=1)


@dataclass(frozen=True)
class LocalStatistic:
    """A bounded subset function ``g`` of finite range ``tau``.

    ``kind`` names a registered evaluator (``count``, ``pair_indicator``,
    ``pair_weight`` and ``zero`` are built in). Pair kinds depend on the
    Euclidean distance and use ``r`` as threshold or scale; it must not
    exceed ``tau``. The wrapper enforces ``g(S) = 0`` when the sup-norm
    diameter of ``S`` exceeds ``tau`` or ``|S| > p_max``, and checks
    ``|g| <= g_bound`` on every evaluation.
    """

    kind: str
    tau: float
    p_max: int | None = None
    r: float | None = None
    g_bound: float = 1.0

    def __post_init__(self):
        if self.kind not in _REGISTRY:
            raise ValueError(f"unknown statistic kind {self.kind!r}; registered: {sorted(_REGISTRY)}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.p_max is None:
            object.__setattr__(self, "p_max", self.evaluator.p_max)
        if self.p_max < 1:
            raise ValueError("p_max must be at least 1")
        if self.kind in ("pair_indicator", "pair_weight"):
            if self.r is None or not self.r > 0:
                raise ValueError(f"{self.kind} needs a positive r")
            if self.r > self.tau:
                raise ValueError("r must not exceed the interaction range tau")
        if not self.g_bound > 0:
            raise ValueError("g_bound must be positive")

    @property
    def evaluator(self) -> _Evaluator:
        return _REGISTRY[self.kind]

    @property
    def support_size(self) -> int | None:
        return self.evaluator.support_size

    def _checked(self, vals):
        vals = np.asarray(vals, dtype=float)
        if vals.size and np.max(np.abs(vals)) > self.g_bound * (1 + 1e-12):
            raise ValueError(f"statistic {self.kind!r} exceeded its declared bound g_bound={self.g_bound}")
        return vals

    def single_values(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ev = self.evaluator
        if ev.single is None:
            return np.zeros(len(points))
        return self._checked(ev.single(points))

    def pair_values(self, xa, xb) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(xa, dtype=float))
        xb = np.atleast_2d(np.asarray(xb, dtype=float))
        ev = self.evaluator
        if ev.pair is None or self.p_max < 2:
            return np.zeros(len(xa))
        vals = self._checked(ev.pair(xa, xb, self))
        in_range = np.max(np.abs(xb - xa), axis=-1) <= self.tau
        return np.where(in_range, vals, 0.0)

    def __call__(self, subset) -> float:
        """``g(S)`` for a single subset given as an ``(s, d)`` array."""
        S = np.atleast_2d(np.asarray(subset, dtype=float))
        s = len(S)
        if s == 0 or s > self.p_max:
            return 0.0
        if s == 1:
            return float(self.single_values(S)[0])
        if np.max(np.ptp(S, axis=0)) > self.tau:
            return 0.0
        if s == 2:
            return float(self.pair_values(S[:1], S[1:])[0])
        ev = self.evaluator
        if ev.subset is None:
            return 0.0
        return float(self._checked([ev.subset(S, self)])[0])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tau": self.tau, "p_max": self.p_max, "r": self.r, "g_bound": self.g_bound}


# ---------------------------------------------------------------------------
# subset enumeration


def neighbor_pairs(points, tau: float) -> np.ndarray:
    """All index pairs ``(i, j)``, ``i < j``, with ``|x_i - x_j|_inf <= tau``.

    Cell grid with cell side ``tau``: a point only needs comparing against
    the ``3^d`` cells around its own.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    d = pts.shape[1]
    cells = np.floor(pts / tau).astype(np.int64)
    buckets: dict[tuple, list[int]] = {}
    for i, c in enumerate(map(tuple, cells)):
        buckets.setdefault(c, []).append(i)
    buckets = {c: np.array(v) for c, v in buckets.items()}
    offsets = list(itertools.product((-1, 0, 1), repeat=d))
    out = []
    for c, members in buckets.items():
        for off in offsets:
            other = buckets.get(tuple(a + b for a, b in zip(c, off)))
            if other is None:
                continue
            ii, jj = np.meshgrid(members, other, indexing="ij")
            ii, jj = ii.ravel(), jj.ravel()
            keep = ii < jj
            ii, jj = ii[keep], jj[keep]
            close = np.max(np.abs(pts[ii] - pts[jj]), axis=-1) <= tau
            out.append(np.stack([ii[close], jj[close]], axis=-1))
    if not out:
        return np.empty((0, 2), dtype=np.int64)
    pairs = np.concatenate(out)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def _cliques(n, pairs, size):
    """Index tuples of the given size whose members are pairwise adjacent."""
    nbrs = [set() for _ in range(n)]
    for i, j in pairs:
        nbrs[i].add(j)
    result = []

    def extend(clique, candidates):
        if len(clique) == size:
            result.append(tuple(clique))
            return
        for v in sorted(candidates):
            extend(clique + [v], candidates & nbrs[v])

    for i in range(n):
        extend([i], nbrs[i])
    return result


def subset_terms(stat: LocalStatistic, points) -> tuple[np.ndarray, np.ndarray]:
    """Values ``g(S)`` and barycenters for every subset that can be nonzero.

    Returns
    -------
    values : (K,) array
    barycenters : (K, d) array
    """
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1] if pts.ndim == 2 else 0
    if len(pts) == 0:
        return np.zeros(0), np.zeros((0, d))
    vals = [stat.single_values(pts)]
    bary = [pts]
    if stat.p_max >= 2:
        pairs = neighbor_pairs(pts, stat.tau)
        if len(pairs):
            vals.append(stat.pair_values(pts[pairs[:, 0]], pts[pairs[:, 1]]))
            bary.append(0.5 * (pts[pairs[:, 0]] + pts[pairs[:, 1]]))
        if stat.p_max >= 3 and stat.evaluator.subset is not None:
            for size in range(3, stat.p_max + 1):
                for idx in _cliques(len(pts), pairs, size):
                    S = pts[list(idx)]
                    vals.append(np.array([stat(S)]))
                    bary.append(S.mean(axis=0, keepdims=True))
    return np.concatenate(vals), np.concatenate(bary)


def _in_box(points, box):
    if box is None:
        return np.ones(len(points), dtype=bool)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    return np.all((points >= lo) & (points <= hi), axis=-1)


def eval_functional(stat: LocalStatistic, pattern, region=None) -> float:
    """``f(X cap region) = sum_{S subset X cap region} g(S)``.

    ``pattern`` is a :class:`~dppstein.sampler.PointPattern` or an
    ``(N, d)`` array; ``region`` is a closed box ``(lo, hi)`` or ``None``
    for the whole pattern.
    """
    pts = _points_of(pattern)
    pts = pts[_in_box(pts, region)]
    vals, _ = subset_terms(stat, pts)
    return float(vals.sum())


def _points_of(pattern) -> np.ndarray:
    return np.asarray(getattr(pattern, "points", pattern), dtype=float)


def cube_of(points) -> np.ndarray:
    """Integer index of the half-open unit cube containing each point."""
    return np.floor(np.asarray(points, dtype=float) + 0.5).astype(np.int64)


def cube_contributions(stat: LocalStatistic, pattern) -> dict[tuple, float]:
    """``{i: f_{C_i}(X)}``, grouping subsets by the cube of their barycenter."""
    vals, bary = subset_terms(stat, _points_of(pattern))
    out: dict[tuple, float] = {}
    if len(vals) == 0:
        return out
    keys, inverse = np.unique(cube_of(bary), axis=0, return_inverse=True)
    sums = np.bincount(inverse.ravel(), weights=vals, minlength=len(keys))
    for k, v in zip(map(tuple, keys.tolist()), sums):
        out[k] = float(v)
    return out


def covering_indices(side: float, d: int) -> np.ndarray:
    """All cube indices whose cube meets ``[0, side]^d``."""
    hi = int(math.floor(side + 0.5))
    axis = np.arange(0, hi + 1)
    return np.array(list(itertools.product(axis, repeat=d)), dtype=np.int64).reshape(-1, d)


def interior_index_set(n: float, tau: float, d: int) -> np.ndarray:
    """Indices ``i`` whose sup-norm ``tau``-dilated cube lies inside ``[0, n]^d``.

    Returned as an ``(K, d)`` integer array in lexicographic order.
    """
    if not n > 2 * (tau + 0.5):
        raise EmptyInteriorError(
            f"no interior cubes: need n > 2 (tau + 1/2), got n={n}, tau={tau}"
        )
    lo = math.ceil(0.5 + tau - 1e-12)
    hi = math.floor(n - 0.5 - tau + 1e-12)
    axis = np.arange(lo, hi + 1)
    return np.array(list(itertools.product(axis, repeat=d)), dtype=np.int64).reshape(-1, d)


def restricted_functional(stat: LocalStatistic, pattern, interior) -> float:
    """Sum of ``g(S)`` over subsets whose barycenter lies in one of the ``interior`` cubes."""
    interior = np.asarray(interior, dtype=np.int64)
    if interior.size == 0:
        return 0.0
    wanted = set(map(tuple, interior.reshape(len(interior), -1).tolist()))
    contrib = cube_contributions(stat, pattern)
    return float(sum(v for k, v in contrib.items() if k in wanted))


# ---------------------------------------------------------------------------
# block decomposition


@dataclass(frozen=True)
class BlockDecomposition:
    """Partition of ``{1..n}^d`` into ``m^d`` blocks with ``n = (m-1) l + r``."""

    n: int
    l: int
    m: int
    r: int
    d: int = 1
    blocks: Mapping[tuple, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def axis_range(self, i: int) -> range:
        """Coordinates covered along one axis by block coordinate ``i`` (1-based)."""
        if i < self.m:
            return range((i - 1) * self.l + 1, i * self.l + 1)
        return range((self.m - 1) * self.l + 1, (self.m - 1) * self.l + self.r + 1)

    def is_main(self, index: tuple) -> bool:
        return all(i < self.m for i in index) or self.r == self.l


def block_decompose(n: int, l: int, d: int = 1) -> BlockDecomposition:
    if not 1 <= l <= n:
        raise ValueError(f"block length must satisfy 1 <= l <= n, got l={l}, n={n}")
    m = -(-n // l)  # ceil
    r = n - (m - 1) * l
    dec = BlockDecomposition(n=n, l=l, m=m, r=r, d=d)
    blocks = {}
    for idx in itertools.product(range(1, m + 1), repeat=d):
        ranges = [dec.axis_range(i) for i in idx]
        blocks[idx] = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, d)
    object.__setattr__(dec, "blocks", blocks)
    return dec


def cube_variables(stat: LocalStatistic, pattern, indices, mean_per_cube: float) -> dict[tuple, float]:
    """Centered cube functionals ``Y_i = f_{C_i}(X) - mean_per_cube``."""
    contrib = cube_contributions(stat, pattern)
    idx = np.asarray(indices, dtype=np.int64)
    idx = idx.reshape(len(idx), -1) if idx.size else idx.reshape(0, 1)
    return {k: contrib.get(k, 0.0) - mean_per_cube for k in map(tuple, idx.tolist())}


@dataclass(frozen=True)
class BlockSums:
    xi: dict
    S: float
    W: float


def block_sums(decomposition: BlockDecomposition, Y, sigma: float) -> BlockSums:
    """Block totals ``xi_i = sum_{t in D_i} Y_t``, their sum ``S_n`` and ``W_n = S_n / sigma``.

    ``Y`` maps index tuples ``t in {1..n}^d`` to values, or is an array of
    shape ``(n,) * d`` indexed by ``t - 1``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if isinstance(Y, Mapping):
        get = lambda t: Y[tuple(t)]  # noqa: E731
    else:
        arr = np.asarray(Y, dtype=float)
        get = lambda t: arr[tuple(np.asarray(t) - 1)]  # noqa: E731
    xi = {}
    for key, members in decomposition.blocks.items():
        xi[key] = float(sum(get(t) for t in members.tolist()))
    S = float(sum(xi.values()))
    return BlockSums(xi=xi, S=S, W=S / sigma)
