"""Brownian paths on dyadic grids with exact coarsening.

Each path is sampled once at its finest resolution. Increments are keyed by
(seed, path, step, coordinate) through a Philox counter stream, so any single
draw can be recomputed without generating the ones before it. Coarser levels
are strided views of the finest prefix sums W(j/n), which makes every
coarsening chain bitwise consistent: ``coarsen(coarsen(g, 2), 2)`` and
``coarsen(g, 4)`` read the very same W values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridMisaligned, OffGridQuery
from .model import as_integer

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53
HEADER = struct.Struct("<8sIdQQQ")
MAGIC = b"SDDEBW1\x00"


def _steps(n: int, T: float) -> int:
    N = as_integer(n * T)
    if N is None or n < 1:
        raise GridMisaligned(f"n*T = {n}*{T!r} is not a positive integer")
    return N


def _normals_from_words(words: np.ndarray) -> np.ndarray:
    # Box-Muller on consecutive word pairs; cosine branch only, so normal q
    # depends on words 2q and 2q+1 alone.
    w = words.reshape(-1, 2)
    u1 = ((w[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_M53
    u2 = (w[:, 1] >> np.uint64(11)).astype(np.float64) * _TWO_M53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _stream(seed: int, path: int) -> np.random.Philox:
    return np.random.Philox(key=[seed & _MASK64, path & _MASK64])


def standard_normals(seed: int, path: int, count: int) -> np.ndarray:
    """First ``count`` standard normals of the (seed, path) stream."""
    words = _stream(seed, path).random_raw(2 * count)
    return _normals_from_words(words)


def standard_normal_at(seed: int, path: int, index: int) -> float:
    """Normal number ``index`` of the (seed, path) stream, computed directly."""
    bg = _stream(seed, path)
    bg.advance(index // 2)  # one Philox block = 4 words = 2 normals
    words = bg.random_raw(4)
    off = 2 * (index % 2)
    return float(_normals_from_words(words[off:off + 2])[0])


def increment_at(seed: int, path: int, step: int, coord: int, m: int, n: int) -> float:
    """The increment a path sampled at resolution n has at (step, coord)."""
    return standard_normal_at(seed, path, step * m + coord) / np.sqrt(n)


@dataclass(frozen=True, eq=False)
class BrownianGrid:
    """W on the grid j/n, j = 0..n*T, for one path or a batch of paths.

    ``W`` has shape (N+1, m) for a single path or (P, N+1, m) for a batch,
    where ``path`` is then a tuple of P path indices.
    """

    m: int
    T: float
    n: int
    seed: int | None
    path: int | tuple[int, ...]
    root_n: int
    _root: np.ndarray = field(repr=False)

    @property
    def stride(self) -> int:
        return self.root_n // self.n

    @property
    def level(self) -> int:
        """Number of halvings from the sampled resolution (0 = finest)."""
        return self.stride.bit_length() - 1

    @property
    def steps(self) -> int:
        return round(self.n * self.T)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def batched(self) -> bool:
        return isinstance(self.path, tuple)

    @property
    def W(self) -> np.ndarray:
        return self._root[..., :: self.stride, :]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.W, axis=-2)

    def W_at_level(self, n: int) -> np.ndarray:
        """Prefix sums on the grid of width 1/n (any n dividing root_n)."""
        if n < 1 or self.root_n % n:
            raise OffGridQuery(f"resolution {n} is not available from a path sampled at {self.root_n}")
        _steps(n, self.T)
        return self._root[..., :: self.root_n // n, :]

    def same_noise(self, other: BrownianGrid) -> bool:
        return (
            self.seed == other.seed
            and self.path == other.path
            and self.m == other.m
            and (self._root is other._root or np.array_equal(self._root, other._root))
        )

    @classmethod
    def from_increments(cls, increments, T: float, n: int, seed=None, path=0) -> BrownianGrid:
        """Wrap explicit increments (shape (N, m) or (P, N, m))."""
        dW = np.asarray(increments, dtype=float)
        N = _steps(n, T)
        if dW.ndim < 2 or dW.shape[-2] != N:
            raise GridMisaligned(f"expected {N} increments along axis -2, got shape {dW.shape}")
        W = np.zeros(dW.shape[:-2] + (N + 1, dW.shape[-1]))
        np.cumsum(dW, axis=-2, out=W[..., 1:, :])
        W.setflags(write=False)
        if dW.ndim == 3 and not isinstance(path, tuple):
            path = tuple(range(dW.shape[0]))
        return cls(dW.shape[-1], float(T), int(n), seed, path, int(n), W)


def sample_path(m: int, T: float, n_fine: int, seed: int, path: int = 0) -> BrownianGrid:
    """One path of m-dimensional Brownian motion at resolution n_fine."""
    N = _steps(n_fine, T)
    z = standard_normals(seed, path, N * m).reshape(N, m)
    return BrownianGrid.from_increments(z / np.sqrt(n_fine), T, n_fine, seed, path)


def sample_paths(m: int, T: float, n_fine: int, seed: int, paths: Sequence[int]) -> BrownianGrid:
    """A batch of independent paths; path p equals ``sample_path(..., path=p)``."""
    N = _steps(n_fine, T)
    paths = tuple(int(p) for p in paths)
    z = np.empty((len(paths), N, m))
    for i, p in enumerate(paths):
        z[i] = standard_normals(seed, p, N * m).reshape(N, m)
    return BrownianGrid.from_increments(z / np.sqrt(n_fine), T, n_fine, seed, paths)


def select_paths(g: BrownianGrid, index) -> BrownianGrid:
    """Sub-batch (or single path when ``index`` is an int) of a batched grid."""
    if not g.batched:
        raise ValueError("grid is not batched")
    root = g._root[index]
    path = g.path[index] if isinstance(index, int) else tuple(np.asarray(g.path)[index].tolist())
    return BrownianGrid(g.m, g.T, g.n, g.seed, path, g.root_n, root)


def coarsen(g: BrownianGrid, r: int) -> BrownianGrid:
    """Sum groups of r consecutive increments (W sampled every r points)."""
    if r < 1 or g.n % r:
        raise GridMisaligned(f"factor {r} does not divide n={g.n}")
    n = g.n // r
    _steps(n, g.T)
    return BrownianGrid(g.m, g.T, n, g.seed, g.path, g.root_n, g._root)


def refine(g: BrownianGrid, r: int) -> BrownianGrid:
    """Return to a finer level of the same sampled path.

    Only resolutions down to the one originally sampled exist; going finer
    would need bridge sampling, which is not provided.
    """
    if r < 1 or g.stride % r:
        raise GridMisaligned(
            f"cannot refine n={g.n} by {r}: path was sampled at n={g.root_n}"
        )
    return BrownianGrid(g.m, g.T, g.n * r, g.seed, g.path, g.root_n, g._root)


def value_at(g: BrownianGrid, t: float) -> np.ndarray:
    """W(t) for a grid time t."""
    if not (0.0 <= t <= g.T * (1 + 1e-12)):
        raise OffGridQuery(f"t={t!r} outside [0, {g.T!r}]")
    j = as_integer(t * g.n)
    if j is None:
        raise OffGridQuery(f"t={t!r} is not on the grid of width 1/{g.n}")
    return g.W[..., j, :].copy()


def write_binary(g: BrownianGrid, dest) -> None:
    """Header {magic, m, T, n, seed, path} then little-endian float64 increments."""
    if g.batched:
        raise ValueError("binary dump holds a single path")
    seed = 0 if g.seed is None else g.seed & _MASK64
    data = HEADER.pack(MAGIC, g.m, g.T, g.n, seed, g.path & _MASK64)
    data += np.ascontiguousarray(g.increments, dtype="<f8").tobytes()
    with open(dest, "wb") as fh:
        fh.write(data)


def read_binary(src) -> BrownianGrid:
    with open(src, "rb") as fh:
        raw = fh.read()
    magic, m, T, n, seed, path = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not an sdde Brownian dump")
    incr = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(-1, m)
    return BrownianGrid.from_increments(incr, T, n, seed, path)
