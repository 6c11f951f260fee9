"""Sampled checks of the structural conditions on the coefficients.

Every probe draws (t, y, x) from a scrambled Halton sequence over the
radius-R box (y in the R-ball of R^{k*d}, x in the R-ball of R^d; the growth
condition lets x range over 4R). Pair-based ratios alternate between
independent partners and adversarial partners at distance ~1e-6, half of the
latter along coordinate axes, since uniform pairs alone underestimate
Lipschitz-type suprema.

Results certify "holds on sample" only. Time-dependent bounds are collapsed
to constants over [0, T].
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from .model import SddeModel

ADVERSARIAL_STEP = 1e-6
LADDER = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
LADDER_DROP = 1e-4


@dataclass
class ConditionResult:
    name: str
    holds_on_sample: bool
    estimated_constant: float | None = None
    worst_witness: dict | None = None
    components: dict = field(default_factory=dict)
    detail: str = ""


@dataclass
class ConditionReport:
    label: str
    R: float
    N: int
    seed: int
    conditions: dict[str, ConditionResult]

    def __getitem__(self, name: str) -> ConditionResult:
        return self.conditions[name]

    def to_dict(self) -> dict:
        return {
            "model": self.label,
            "R": self.R,
            "N": self.N,
            "seed": self.seed,
            "certification": "holds_on_sample",
            "conditions": {k: asdict(v) for k, v in self.conditions.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def _halton(dims: int, N: int, seed: int) -> np.ndarray:
    return qmc.Halton(d=dims, scramble=True, seed=seed).random(N)


def _to_ball(u: np.ndarray, radius: float) -> np.ndarray:
    """Map cube coordinates in [0,1)^q to the open radius ball (radial squash)."""
    z = (2.0 * u - 1.0) * radius
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    scale = np.where(norm >= radius, radius * (1 - 1e-12) / np.maximum(norm, 1e-300), 1.0)
    return z * scale


def _clip_ball(z: np.ndarray, radius: float) -> np.ndarray:
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    return np.where(norm >= radius, z * (radius * (1 - 1e-12) / np.maximum(norm, 1e-300)), z)


class _Probe:
    """Quasi-random base points and partners for one model/box."""

    def __init__(self, model: SddeModel, R: float, N: int, seed: int, x_radius: float | None = None):
        if R <= 0 or N < 1:
            raise ValueError("need R > 0 and N >= 1")
        self.model, self.R, self.N, self.seed = model, float(R), int(N), int(seed)
        d, k = model.d, model.k
        self.ny, self.nx = k * d, d
        q = self.ny + self.nx
        self.x_radius = self.R if x_radius is None else x_radius
        # columns: t | y | x | partner y | partner x | direction selector
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            u = _halton(1 + 2 * q + 1, self.N, self.seed)
        self.t = u[:, 0] * model.T
        self.y = _to_ball(u[:, 1 : 1 + self.ny], self.R)
        self.x = _to_ball(u[:, 1 + self.ny : 1 + q], self.x_radius)
        self._py = _to_ball(u[:, 1 + q : 1 + q + self.ny], self.R)
        self._px = _to_ball(u[:, 1 + q + self.ny : 1 + 2 * q], self.x_radius)
        self._sel = u[:, -1]

    def beta(self, y, x):
        return self.model.beta(self.t, y.reshape(-1, self.model.k, self.model.d), x)

    def alpha(self, y, x):
        return self.model.alpha(self.t, y.reshape(-1, self.model.k, self.model.d), x)

    def partners(self, move_y: bool, move_x: bool):
        """Partner points: even indices independent, odd adversarial."""
        idx = np.arange(self.N)
        y2 = self._py.copy() if move_y else self.y.copy()
        x2 = self._px.copy() if move_x else self.x.copy()
        adv = idx % 2 == 1
        dims = (self.ny if move_y else 0) + (self.nx if move_x else 0)
        # random direction from the partner coordinates, or an axis
        raw = np.concatenate(
            ([self._py - self.y] if move_y else []) + ([self._px - self.x] if move_x else []), axis=-1
        )
        axis = np.minimum((self._sel * dims).astype(int), dims - 1)
        use_axis = (idx // 2) % 2 == 1
        direction = raw.copy()
        direction[use_axis] = 0.0
        direction[use_axis, axis[use_axis]] = 1.0
        norm = np.linalg.norm(direction, axis=-1, keepdims=True)
        direction = np.where(norm > 0, direction / np.maximum(norm, 1e-300), 1.0 / math.sqrt(dims))
        step = ADVERSARIAL_STEP * max(1.0, self.R) * direction
        col = 0
        if move_y:
            y2[adv] = _clip_ball(self.y[adv] + step[adv, : self.ny], self.R)
            col = self.ny
        if move_x:
            x2[adv] = _clip_ball(self.x[adv] + step[adv, col : col + self.nx], self.x_radius)
        return y2, x2

    def witness(self, i: int, y2=None, x2=None) -> dict:
        w = {"t": float(self.t[i]), "y": self.y[i].tolist(), "x": self.x[i].tolist()}
        if y2 is not None:
            w["y_partner"] = y2[i].tolist()
        if x2 is not None:
            w["x_partner"] = x2[i].tolist()
        return w


def _fro(a):
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def _max_ratio(name, probe, ratio, y2=None, x2=None, extra=None) -> ConditionResult:
    # -inf marks degenerate pairs (identical points) and is skipped
    bad = np.isnan(ratio) | (ratio == np.inf)
    if bad.any():
        i = int(np.argmax(bad))
        return ConditionResult(name, False, math.inf, probe.witness(i, y2, x2),
                               detail="non-finite coefficient value or ratio")
    i = int(np.argmax(ratio))
    return ConditionResult(name, True, float(ratio[i]), probe.witness(i, y2, x2), components=extra or {})


def probe_bounds(model: SddeModel, R: float, N: int, seed: int = 0) -> tuple[ConditionResult, ConditionResult]:
    """Boundedness on the R-box: sup|beta| (C2) and sup(|beta| + |alpha|) (A1)."""
    p = _Probe(model, R, N, seed)
    with np.errstate(all="ignore"):
        b = np.linalg.norm(p.beta(p.y, p.x), axis=-1)
        a = _fro(p.alpha(p.y, p.x))
    c2 = _max_ratio("C2", p, b)
    c2.detail = c2.detail or "integrability in t not testable from samples; bounded on [0, T]"
    return c2, _max_ratio("A1", p, b + a)


def probe_growth(model: SddeModel, R: float, N: int, seed: int = 0) -> ConditionResult:
    """(2 x.beta + |alpha|^2) / (1 + |x|^2) with |y| <= R and |x| <= 4R."""
    p = _Probe(model, R, N, seed, x_radius=4 * R)
    with np.errstate(all="ignore"):
        b = p.beta(p.y, p.x)
        a = p.alpha(p.y, p.x)
        ratio = (2 * np.sum(p.x * b, axis=-1) + _fro(a) ** 2) / (1 + np.sum(p.x**2, axis=-1))
    return _max_ratio("C4", p, ratio)


def probe_monotonicity_C3(model: SddeModel, R: float, N: int, seed: int = 0) -> ConditionResult:
    """[2(x - z).(beta(x) - beta(z)) + |alpha(x) - alpha(z)|^2] / |x - z|^2."""
    p = _Probe(model, R, N, seed)
    _, z = p.partners(move_y=False, move_x=True)
    with np.errstate(all="ignore"):
        db = p.beta(p.y, p.x) - p.beta(p.y, z)
        da = p.alpha(p.y, p.x) - p.alpha(p.y, z)
        dx = p.x - z
        ratio = (2 * np.sum(dx * db, axis=-1) + _fro(da) ** 2) / np.sum(dx**2, axis=-1)
    keep = np.sum(dx**2, axis=-1) > 0
    ratio = np.where(keep, ratio, -np.inf)
    return _max_ratio("C3", p, ratio, x2=z)


def probe_lipschitz(model: SddeModel, R: float, N: int, seed: int = 0) -> ConditionResult:
    """Local Lipschitz constant: max of the drift ratio
    |beta - beta'| / (|y - y'| + |x - x'|) and the diffusion ratio
    |alpha - alpha'|^2 / (|y - y'|^2 + |x - x'|^2)."""
    p = _Probe(model, R, N, seed)
    y2, x2 = p.partners(move_y=True, move_x=True)
    with np.errstate(all="ignore"):
        db = np.linalg.norm(p.beta(p.y, p.x) - p.beta(y2, x2), axis=-1)
        da = _fro(p.alpha(p.y, p.x) - p.alpha(y2, x2))
        ny = np.linalg.norm(p.y - y2, axis=-1)
        nx = np.linalg.norm(p.x - x2, axis=-1)
        keep = (ny + nx) > 0
        drift = np.where(keep, db / (ny + nx), -np.inf)
        diff = np.where(keep, da**2 / (ny**2 + nx**2), -np.inf)
    res_b = _max_ratio("A2_drift", p, drift, y2, x2)
    res_a = _max_ratio("A2_diffusion", p, diff, y2, x2)
    worst = res_b if (res_b.estimated_constant or 0) >= (res_a.estimated_constant or 0) else res_a
    return ConditionResult(
        "A2",
        res_b.holds_on_sample and res_a.holds_on_sample,
        max(res_b.estimated_constant, res_a.estimated_constant),
        worst.worst_witness,
        {"drift": res_b.estimated_constant, "diffusion": res_a.estimated_constant},
        detail=f"R={R:g}; constants grow with R when coefficients are only locally Lipschitz",
    )


def probe_onesided(model: SddeModel, R: float, N: int, seed: int = 0) -> ConditionResult:
    """One-sided constant in x, 2(x - x').(beta(y,x) - beta(y,x')) / |x - x'|^2,
    and Lipschitz constant of beta in y at fixed x."""
    p = _Probe(model, R, N, seed)
    _, x2 = p.partners(move_y=False, move_x=True)
    y2, _ = p.partners(move_y=True, move_x=False)
    with np.errstate(all="ignore"):
        dx = p.x - x2
        nx2 = np.sum(dx**2, axis=-1)
        one = 2 * np.sum(dx * (p.beta(p.y, p.x) - p.beta(p.y, x2)), axis=-1) / nx2
        one = np.where(nx2 > 0, one, -np.inf)
        ny = np.linalg.norm(p.y - y2, axis=-1)
        lip = np.linalg.norm(p.beta(p.y, p.x) - p.beta(y2, p.x), axis=-1) / ny
        lip = np.where(ny > 0, lip, -np.inf)
    rx = _max_ratio("A3_x", p, one, x2=x2)
    ry = _max_ratio("A3_y", p, lip, y2=y2)
    worst = rx if rx.estimated_constant >= ry.estimated_constant else ry
    return ConditionResult(
        "A3",
        rx.holds_on_sample and ry.holds_on_sample,
        max(rx.estimated_constant, ry.estimated_constant),
        worst.worst_witness,
        {"x_onesided": rx.estimated_constant, "y_lipschitz": ry.estimated_constant},
    )


def _ladder(name, model, R, N, seed, move_y: bool, with_alpha: bool) -> ConditionResult:
    """Sup of the coefficient change over pairs at distance eps, eps shrinking.

    Each rung uses the N sampled pairs plus a zoom: the worst pair of the
    previous rung is cut into ten segments of the new length, so a jump
    found at one rung is tracked down to the smallest one.
    """
    p = _Probe(model, R, N, seed)
    dims = p.ny if move_y else p.nx
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(p.N, dims))
    u /= np.maximum(np.linalg.norm(u, axis=-1, keepdims=True), 1e-300)
    k, d = model.k, model.d

    def change(t, y, x, start, step):
        # start: (M, dims) base coordinates, step: (M, dims) displacement
        y1, x1 = (start, x) if move_y else (y, start)
        y2, x2 = (start + step, x) if move_y else (y, start + step)
        b1 = model.beta(t, y1.reshape(-1, k, d), x1)
        b2 = model.beta(t, y2.reshape(-1, k, d), x2)
        out = np.linalg.norm(b2 - b1, axis=-1)
        if with_alpha:
            out = out + _fro(model.alpha(t, y2.reshape(-1, k, d), x2) - model.alpha(t, y1.reshape(-1, k, d), x1))
        return out

    rungs = []
    zoom = None  # (t, y, x, start, direction, length) of the previous worst pair
    with np.errstate(all="ignore"):
        for eps in LADDER:
            base = p.y if move_y else p.x
            diff = change(p.t, p.y, p.x, base, eps * u)
            i = int(np.nanargmax(diff)) if np.isfinite(diff).any() else 0
            best = (float(diff[i]), (p.t[i], p.y[i], p.x[i], base[i], u[i]))
            if zoom is not None:
                t, y, x, start, direc, length = zoom
                offs = np.arange(max(1, round(length / eps)))[:, None] * eps
                M = len(offs)
                zd = change(
                    np.full(M, t), np.broadcast_to(y, (M, y.size)), np.broadcast_to(x, (M, x.size)),
                    start + offs * direc, np.broadcast_to(eps * direc, (M, dims)),
                )
                j = int(np.nanargmax(zd)) if np.isfinite(zd).any() else 0
                if not np.isfinite(zd).all():
                    diff = np.append(diff, np.inf)
                if zd[j] > best[0]:
                    best = (float(zd[j]), (t, y, x, start + offs[j] * direc, direc))
            rungs.append(max(float(np.max(diff)), best[0]))
            zoom = (*best[1], eps)
    holds = bool(np.isfinite(rungs).all() and rungs[-1] <= LADDER_DROP * rungs[0])
    return ConditionResult(
        name, holds, None, None, {f"{eps:g}": r for eps, r in zip(LADDER, rungs)},
        detail=f"sup difference per rung; holds if last <= {LADDER_DROP:g} x first",
    )


def probe_continuity_C1(model: SddeModel, R: float, N: int, seed: int = 0) -> ConditionResult:
    """beta continuous in x (sampled ladder of shrinking perturbations)."""
    return _ladder("C1", model, R, N, seed, move_y=False, with_alpha=False)


def probe_continuity_C5(model: SddeModel, R: float, N: int, seed: int = 0) -> ConditionResult:
    """beta and alpha continuous in y uniformly over x in the R-box."""
    return _ladder("C5", model, R, N, seed, move_y=True, with_alpha=True)


def probe_all(model: SddeModel, R: float, N: int, seed: int = 0) -> ConditionReport:
    c2, a1 = probe_bounds(model, R, N, seed)
    results = [
        probe_continuity_C1(model, R, N, seed),
        c2,
        probe_monotonicity_C3(model, R, N, seed),
        probe_growth(model, R, N, seed),
        probe_continuity_C5(model, R, N, seed),
        a1,
        probe_lipschitz(model, R, N, seed),
        probe_onesided(model, R, N, seed),
    ]
    return ConditionReport(model.label, float(R), int(N), int(seed), {r.name: r for r in results})
