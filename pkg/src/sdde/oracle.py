"""Reference solutions used in place of the unknown exact solution.

For coefficients that do not depend on the current state, the equation is
solved interval by interval on [i tau, (i+1) tau]: the delayed arguments
there only involve already computed values, so X is a plain quadrature,

    X(t) = X(i tau) + int beta(s, Y(s)) ds + int alpha(s, Y(s)) dW(s),

with the trapezoidal rule for ds and increment pairing for dW. Otherwise the
reference is the Euler scheme on the finest noise grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brownian import BrownianGrid
from .errors import OffGridDelay, OffGridQuery, OracleUnavailable
from .euler import check_alignment, integrate
from .model import SddeModel

EXACT_STEPS = "exact_steps"
FINE_EULER = "fine_euler"


@dataclass(frozen=True, eq=False)
class ReferencePath:
    model: SddeModel
    n: int
    values: np.ndarray
    noise: BrownianGrid
    provenance: str
    blowup_step: np.ndarray | None = None

    @property
    def seed(self):
        return self.noise.seed

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[-2]) / self.n

    def values_on_grid(self, n_eval: int) -> np.ndarray:
        if self.n % n_eval:
            raise OffGridQuery(f"reference grid 1/{self.n} does not contain 1/{n_eval}")
        return self.values[..., :: self.n // n_eval, :]


def _delayed(model, X, n, js, limit):
    """Delayed arguments at steps ``js`` as an array (..., len(js), k, d).

    Grid indices above ``limit`` are not known yet; they are left unset and
    flagged in the returned (len(js), k) mask.
    """
    batch = X.shape[:-2]
    y = np.empty(batch + (len(js), model.k, model.d))
    late = np.zeros((len(js), model.k), dtype=bool)
    for i, spec in enumerate(model.delays):
        for s, j in enumerate(js):
            pos = spec.grid_index(int(j), n)
            if pos < 0:
                y[..., s, i, :] = model.initial(spec.raw(j / n))
            elif not isinstance(pos, int):
                raise OffGridDelay(f"delta({j / n!r}) is off the 1/{n} grid")
            elif pos > limit:
                late[s, i] = True
            else:
                y[..., s, i, :] = X[..., pos, :]
    return y, late


def method_of_steps(model: SddeModel, noise: BrownianGrid) -> ReferencePath:
    """Stepwise quadrature solution at the noise resolution (state-free models)."""
    if not model.coeffs.x_free:
        raise OracleUnavailable(f"{model.label}: coefficients depend on the current state")
    n = noise.n
    N = check_alignment(model, n)
    q = round(n * model.tau)
    dW = np.diff(noise.W[..., : N + 1, :], axis=-2)
    batch = dW.shape[:-2]
    X = np.empty(batch + (N + 1, model.d))
    X[..., 0, :] = model.initial(0.0)
    h = 1.0 / n
    for lo in range(0, N, q):
        hi = min(lo + q, N)
        js = np.arange(lo, hi)
        t_left = js / n
        t_right = (js + 1) / n
        y_left, late = _delayed(model, X, n, js, lo)
        if late.any():
            raise OffGridDelay("delay reaches past the start of its interval")
        y_right, late = _delayed(model, X, n, js + 1, lo)
        # At the interval end a piecewise-constant delay jumps to the new
        # lattice point; the integrand's left limit there is the old value.
        y_right[..., late, :] = y_left[..., late, :]
        x0 = np.zeros(batch + (len(js), model.d))
        b_left = model.beta(t_left, y_left, x0)
        b_right = model.beta(t_right, y_right, x0)
        a_left = model.alpha(t_left, y_left, x0)
        incr = 0.5 * h * (b_left + b_right) + np.matmul(a_left, dW[..., lo:hi, :, None])[..., 0]
        X[..., lo + 1 : hi + 1, :] = X[..., lo : lo + 1, :] + np.cumsum(incr, axis=-2)
    X.setflags(write=False)
    return ReferencePath(model, n, X, noise, EXACT_STEPS, np.full(batch, -1, dtype=np.int64))


def fine_reference(model: SddeModel, noise: BrownianGrid, n_ref: int | None = None,
                   on_blowup: str = "raise") -> ReferencePath:
    """Euler scheme at the noise resolution, tagged as a fine-grid reference."""
    n_ref = noise.n if n_ref is None else n_ref
    if n_ref != noise.n:
        raise ValueError(f"n_ref={n_ref} must equal the noise resolution {noise.n}")
    path = integrate(model, noise, n_ref, on_blowup=on_blowup, keep_coefficients=False)
    return ReferencePath(model, n_ref, path.values, noise, FINE_EULER, path.blowup_step)


def reference(model: SddeModel, noise: BrownianGrid, kind: str = "auto",
              on_blowup: str = "raise") -> ReferencePath:
    """``kind``: 'exact' (method of steps), 'fine' (fine Euler), or 'auto'."""
    if kind == "exact" or (kind == "auto" and model.coeffs.x_free):
        return method_of_steps(model, noise)
    if kind not in ("auto", "fine"):
        raise ValueError(f"unknown reference kind {kind!r}")
    return fine_reference(model, noise, on_blowup=on_blowup)
