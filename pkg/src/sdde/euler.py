"""Explicit Euler scheme for SDDEs with frozen state and delayed arguments.

On the grid t_j = j/n the scheme advances

    X(t_{j+1}) = X(t_j) + beta(t_j, Y(t_j), X(t_j)) / n
                        + alpha(t_j, Y(t_j), X(t_j)) dW_j

with Y(t_j) = (X(delta_1(t_j)), ..., X(delta_k(t_j))) read from the history
(xi for negative times, earlier grid values otherwise). Between grid points
the path is the continuous-time interpolant driven by the finer noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .brownian import BrownianGrid
from .errors import (
    DelayGridMisaligned,
    GridMisaligned,
    IncomparablePaths,
    NumericalBlowup,
    OffGridDelay,
    OffGridQuery,
)
from .model import SddeModel, as_integer

BLOWUP_THRESHOLD = 1e12


@dataclass(frozen=True)
class GridMap:
    """kappa(t) = floor(n t) / n."""

    n: int

    def index(self, t: float) -> int:
        j = as_integer(self.n * t)
        return j if j is not None else math.floor(self.n * t)

    def kappa(self, t: float) -> float:
        return self.index(t) / self.n


@dataclass(frozen=True, eq=False)
class EulerPath:
    """Grid values of the scheme for one path or a batch of paths.

    ``values``: (N+1, d) or (P, N+1, d). ``drift`` and ``diffusion`` hold the
    frozen coefficients of every step and drive the continuous interpolant.
    ``blowup_step`` is -1 for healthy paths.
    """

    model: SddeModel
    n: int
    values: np.ndarray
    noise: BrownianGrid
    drift: np.ndarray | None = field(default=None, repr=False)
    diffusion: np.ndarray | None = field(default=None, repr=False)
    blowup_step: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.values.shape[-2] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) / self.n

    @property
    def blown(self) -> np.ndarray:
        return self.blowup_step >= 0

    def values_on_grid(self, n_eval: int) -> np.ndarray:
        return values_on_grid(self, n_eval)


def check_alignment(model: SddeModel, n: int) -> int:
    """Validate n against tau and T; return the number of steps n*T."""
    if as_integer(n * model.tau) is None:
        raise DelayGridMisaligned(
            f"n*tau = {n}*{model.tau!r} is not an integer; choose n with n*tau in N"
        )
    N = as_integer(n * model.T)
    if N is None:
        raise GridMisaligned(f"n*T = {n}*{model.T!r} is not an integer")
    return N


def delay_plan(model: SddeModel, n: int, N: int, interpolate: str | None = None):
    """Where each delayed argument comes from, per delay and step.

    Entry ``plan[i][j]`` is an int grid index, a history vector (ndarray of
    shape (d,)) for negative times, or ``(lo, w)`` for linear interpolation
    between grid indices lo and lo + 1.
    """
    plan = []
    for spec in model.delays:
        row = []
        for j in range(N):
            pos = spec.grid_index(j, n)
            if pos < 0:
                row.append(model.initial(spec.raw(j / n)))
            elif isinstance(pos, int):
                row.append(pos)
            elif interpolate == "linear":
                lo = math.floor(pos)
                row.append((lo, pos - lo))
            else:
                raise OffGridDelay(
                    f"delta({j / n!r}) = {pos / n!r} is off the 1/{n} grid "
                    "(pass interpolate='linear' to allow interpolation)"
                )
            last = row[-1]
            top = last if isinstance(last, int) else (last[0] + 1 if isinstance(last, tuple) else -1)
            if top > j:
                raise OffGridDelay(f"delay at step {j} reads future index {top}")
        plan.append(row)
    return plan


def _gather(X, src, j):
    if isinstance(src, int):
        return X[..., src, :]
    if isinstance(src, tuple):
        lo, w = src
        return (1.0 - w) * X[..., lo, :] + w * X[..., lo + 1, :]
    return src


def integrate(
    model: SddeModel,
    noise: BrownianGrid,
    n: int,
    *,
    interpolate: str | None = None,
    on_blowup: str = "raise",
    keep_coefficients: bool = True,
) -> EulerPath:
    """Run the Euler scheme at resolution n on (a coarsening of) ``noise``.

    ``on_blowup='mask'`` records the failing step per path instead of
    raising; the remaining steps of that path are NaN.
    """
    N = check_alignment(model, n)
    if noise.n % n:
        raise GridMisaligned(f"n={n} does not divide the noise resolution {noise.n}")
    if noise.m != model.m:
        raise ValueError(f"noise has m={noise.m}, model needs m={model.m}")
    W = noise.W_at_level(n)
    if W.shape[-2] < N + 1:
        raise GridMisaligned(f"noise covers T={noise.T!r} < model T={model.T!r}")
    dW = np.diff(W[..., : N + 1, :], axis=-2)
    batch = dW.shape[:-2]
    d, m, k = model.d, model.m, model.k
    h = 1.0 / n
    plan = delay_plan(model, n, N, interpolate)

    X = np.empty(batch + (N + 1, d))
    X[..., 0, :] = model.initial(0.0)
    drift = np.empty(batch + (N, d)) if keep_coefficients else None
    diffusion = np.empty(batch + (N, d, m)) if keep_coefficients else None
    blowup = np.full(batch, -1, dtype=np.int64)
    y = np.empty(batch + (k, d))
    masked = on_blowup == "mask"

    with np.errstate(all="ignore" if masked else "warn"):
        for j in range(N):
            t = j / n
            for i in range(k):
                y[..., i, :] = _gather(X, plan[i][j], j)
            x = X[..., j, :]
            b = model.beta(t, y, x)
            a = model.alpha(t, y, x)
            new = x + b * h + np.matmul(a, dW[..., j, :, None])[..., 0]
            bad = ~(
                np.isfinite(new).all(axis=-1)
                & (np.linalg.norm(new, axis=-1) <= BLOWUP_THRESHOLD)
                & np.isfinite(b).all(axis=-1)
                & np.isfinite(a).all(axis=(-2, -1))
            )
            fresh = bad & (blowup < 0)
            if fresh.any():
                if not masked:
                    raise NumericalBlowup(
                        f"{model.label}: non-finite or |X| > {BLOWUP_THRESHOLD:g} at step {j} (t={t!r})",
                        step=j,
                    )
                blowup[fresh] = j
            if masked and bad.any():
                new[bad] = np.nan
            X[..., j + 1, :] = new
            if keep_coefficients:
                drift[..., j, :] = b
                diffusion[..., j, :, :] = a

    for arr in (X, drift, diffusion, blowup):
        if arr is not None:
            arr.setflags(write=False)
    return EulerPath(model, n, X, noise, drift, diffusion, blowup)


def values_on_grid(path: EulerPath, n_eval: int) -> np.ndarray:
    """Continuous interpolant at k / n_eval for k = 0..n_eval*T.

    Off the scheme's own grid this is the frozen-coefficient step
    X(kappa) + beta*(t - kappa) + alpha*(W(t) - W(kappa)), not a linear
    interpolation.
    """
    if n_eval % path.n:
        raise OffGridQuery(f"evaluation resolution {n_eval} is not a multiple of n={path.n}")
    r = n_eval // path.n
    N = path.steps
    if r == 1:
        return path.values
    if path.drift is None:
        raise OffGridQuery("path was integrated without keep_coefficients")
    W = path.noise.W_at_level(n_eval)[..., : N * r + 1, :]
    ks = np.arange(N * r + 1)
    js = np.minimum(ks // r, N - 1)
    dt = (ks - js * r) / n_eval
    dW = W - W[..., js * r, :]
    out = (
        path.values[..., js, :]
        + path.drift[..., js, :] * dt[:, None]
        + np.matmul(path.diffusion[..., js, :, :], dW[..., None])[..., 0]
    )
    out[..., ::r, :] = path.values
    return out


def eval_continuous(path: EulerPath, t: float) -> np.ndarray:
    """X_n(t) for t in [-C, T]; needs fine noise at t when t is off-grid."""
    model = path.model
    if t < -model.C * (1 + 1e-12) or t > model.T * (1 + 1e-12):
        raise OffGridQuery(f"t={t!r} outside [-C, T]")
    batch = path.values.shape[:-2]
    if t < 0:
        return np.broadcast_to(model.initial(t), batch + (model.d,)).copy()
    j = as_integer(t * path.n)
    if j is not None:
        return path.values[..., j, :].copy()
    kf = as_integer(t * path.noise.root_n)
    if kf is None:
        raise OffGridQuery(f"no noise resolves t={t!r} (finest grid 1/{path.noise.root_n})")
    if path.drift is None:
        raise OffGridQuery("path was integrated without keep_coefficients")
    j = GridMap(path.n).index(t)
    W = path.noise.W_at_level(path.noise.root_n)
    dW = W[..., kf, :] - W[..., j * (path.noise.root_n // path.n), :]
    return (
        path.values[..., j, :]
        + path.drift[..., j, :] * (t - j / path.n)
        + np.matmul(path.diffusion[..., j, :, :], dW[..., None])[..., 0]
    )


def sup_error(a, b, eval_grid_n: int) -> np.ndarray | float:
    """max over the evaluation grid (t <= model horizon) of |a(t) - b(t)|.

    Works for any pair of paths exposing ``model``, ``noise`` and
    ``values_on_grid`` (Euler paths and reference paths). Returns one value
    per path of a batch.
    """
    if a.model.label != b.model.label:
        raise IncomparablePaths(f"models differ: {a.model.label!r} vs {b.model.label!r}")
    if not a.noise.same_noise(b.noise):
        raise IncomparablePaths("paths are driven by different noise")
    for p in (a, b):
        if eval_grid_n < p.n or eval_grid_n % p.n:
            raise OffGridQuery(f"evaluation grid 1/{eval_grid_n} does not contain grid 1/{p.n}")
    K = math.floor(a.model.horizon * eval_grid_n + 1e-9)
    va = a.values_on_grid(eval_grid_n)[..., : K + 1, :]
    vb = b.values_on_grid(eval_grid_n)[..., : K + 1, :]
    err = np.linalg.norm(va - vb, axis=-1).max(axis=-1)
    return float(err) if np.ndim(err) == 0 else err
