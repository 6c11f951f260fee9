"""Model description for stochastic delay differential equations.

The equation is

    dX(t) = beta(t, Y(t), X(t)) dt + alpha(t, Y(t), X(t)) dW(t),
    X(t) = xi(t) on [-C, 0],

with Y(t) = (X(delta_1(t)), ..., X(delta_k(t))) and every delay bounded by
-C <= delta_i(t) <= floor(t / tau) * tau.

Coefficient callables are vectorised over leading batch axes:

    beta(t, y, x)  -> (..., d)       y: (..., k, d), x: (..., d)
    alpha(t, y, x) -> (..., d, m)

``t`` is a float or an array broadcastable to the batch shape.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import DelayBoundViolation

# Relative slack for lattice arithmetic on floats (t / tau close to an integer).
LATTICE_TOL = 1e-9

Coefficient = Callable[[object, np.ndarray, np.ndarray], np.ndarray]


def lattice_floor(t: float, tau: float) -> int:
    """floor(t / tau), snapping values within LATTICE_TOL of an integer."""
    q = t / tau
    r = round(q)
    if abs(q - r) < LATTICE_TOL:
        return int(r)
    return math.floor(q)


def as_integer(x: float, tol: float = LATTICE_TOL) -> int | None:
    """Return ``round(x)`` if x is (numerically) integral, else None."""
    r = round(x)
    if abs(x - r) <= tol * max(1.0, abs(x)):
        return int(r)
    return None


@dataclass(frozen=True)
class DelaySpec:
    """One delay function delta(t).

    ``fixed``: t - tau.  ``piecewise_constant``: floor(t / tau) * tau.
    ``custom``: an arbitrary nondecreasing ``func`` with history depth C.
    """

    kind: Literal["fixed", "piecewise_constant", "custom"]
    tau: float
    C: float
    func: Callable[[float], float] | None = field(default=None, compare=False)

    @classmethod
    def fixed(cls, tau: float) -> DelaySpec:
        return cls("fixed", float(tau), float(tau))

    @classmethod
    def piecewise_constant(cls, tau: float, C: float = 0.0) -> DelaySpec:
        return cls("piecewise_constant", float(tau), float(C))

    @classmethod
    def custom(cls, func: Callable[[float], float], tau: float, C: float) -> DelaySpec:
        return cls("custom", float(tau), float(C), func)

    def raw(self, t: float) -> float:
        """delta(t) without any bound checking."""
        if self.kind == "fixed":
            return t - self.tau
        if self.kind == "piecewise_constant":
            return lattice_floor(t, self.tau) * self.tau
        return float(self.func(t))

    def upper_bound(self, t: float) -> float:
        return lattice_floor(t, self.tau) * self.tau

    def grid_index(self, j: int, n: int) -> int | float:
        """Position of delta(j/n) on the grid of width 1/n.

        Returns an int when delta(j/n) is a grid point, else the float
        position ``delta(j/n) * n``. Requires ``n * tau`` integral for the
        analytic kinds (checked by the caller).
        """
        if self.kind == "fixed":
            return j - round(n * self.tau)
        if self.kind == "piecewise_constant":
            q = round(n * self.tau)
            return (j // q) * q
        pos = float(self.func(j / n)) * n
        k = as_integer(pos)
        return pos if k is None else k


def eval_delay(spec: DelaySpec, t: float) -> float:
    """delta(t), checked against -C <= delta(t) <= floor(t / tau) * tau."""
    value = spec.raw(t)
    if spec.kind == "custom":
        slack = LATTICE_TOL * max(1.0, abs(t))
        if not (-spec.C - slack <= value <= spec.upper_bound(t) + slack):
            raise DelayBoundViolation(
                f"delta({t!r}) = {value!r} outside [{-spec.C!r}, {spec.upper_bound(t)!r}]"
            )
    return value


@dataclass(frozen=True)
class InitialSegment:
    """Deterministic history xi on [-C, 0].

    ``func(t)`` (or ``func(t, seed)`` when ``seed`` is set) must accept a
    float and return something convertible to shape (d,).
    """

    C: float
    d: int
    func: Callable = field(compare=False)
    seed: int | None = None

    @classmethod
    def constant(cls, value, C: float, d: int = 1) -> InitialSegment:
        v = np.broadcast_to(np.asarray(value, dtype=float), (d,)).copy()
        return cls(float(C), d, lambda t: v)

    def __call__(self, t: float) -> np.ndarray:
        out = self.func(t) if self.seed is None else self.func(t, self.seed)
        return np.asarray(out, dtype=float).reshape(self.d)


@dataclass(frozen=True)
class CoefficientField:
    d: int
    m: int
    k: int
    beta: Coefficient = field(compare=False)
    alpha: Coefficient = field(compare=False)
    # Declares that beta and alpha ignore the current state x; enables the
    # method-of-steps oracle.
    x_free: bool = False


@dataclass(frozen=True)
class SddeModel:
    coeffs: CoefficientField
    delays: tuple[DelaySpec, ...]
    initial: InitialSegment
    T: float
    label: str
    # Condition class for the rate theorem: "A2" (local Lipschitz) or "A3"
    # (one-sided in x). Used for default diagnostic exponents only.
    condition_class: str = "A2"
    # Horizon before extension to a multiple of tau; None if not extended.
    T_original: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "delays", tuple(self.delays))
        if len(self.delays) != self.coeffs.k:
            raise ValueError(f"{len(self.delays)} delays given for k={self.coeffs.k}")
        if self.initial.d != self.coeffs.d:
            raise ValueError("initial segment dimension differs from d")
        if self.T <= 0:
            raise ValueError("T must be positive")

    @property
    def tau(self) -> float:
        return self.delays[0].tau

    @property
    def C(self) -> float:
        return self.initial.C

    @property
    def d(self) -> int:
        return self.coeffs.d

    @property
    def m(self) -> int:
        return self.coeffs.m

    @property
    def k(self) -> int:
        return self.coeffs.k

    @property
    def horizon(self) -> float:
        """The horizon the user asked for (before any extension)."""
        return self.T if self.T_original is None else self.T_original

    def beta(self, t, y, x) -> np.ndarray:
        return self.coeffs.beta(t, y, x)

    def alpha(self, t, y, x) -> np.ndarray:
        return self.coeffs.alpha(t, y, x)

    def horizon_is_aligned(self) -> bool:
        return as_integer(self.T / self.tau) is not None


def normalize_horizon(model: SddeModel) -> SddeModel:
    """Extend T to the next multiple of tau, switching coefficients off after T.

    The extended coefficients are beta * 1{t <= T} and alpha * 1{t <= T}, so
    on [0, T] the solution (and any left-point scheme) is unchanged.
    """
    if model.horizon_is_aligned():
        return model
    T = model.T
    T_ext = math.ceil(T / model.tau - LATTICE_TOL) * model.tau
    beta, alpha = model.coeffs.beta, model.coeffs.alpha

    def on(t):
        return np.asarray(np.asarray(t) <= T, dtype=float)

    def beta_ext(t, y, x):
        return beta(t, y, x) * on(t)[..., None]

    def alpha_ext(t, y, x):
        return alpha(t, y, x) * on(t)[..., None, None]

    coeffs = dataclasses.replace(model.coeffs, beta=beta_ext, alpha=alpha_ext)
    return dataclasses.replace(model, coeffs=coeffs, T=T_ext, T_original=T)


@dataclass
class CheckResult:
    check: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    label: str
    checks: list[CheckResult]
    model: SddeModel | None = None  # the (possibly horizon-extended) model checked

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps([dataclasses.asdict(c) for c in self.checks], indent=2)


def validate_model(model: SddeModel, probes: int = 1000, seed: int = 0) -> ValidationReport:
    """Sample-based sanity checks; failures are reported, never raised."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    checks = []

    if model.horizon_is_aligned():
        checks.append(CheckResult("horizon", True, f"T={model.T!r} is a multiple of tau"))
    else:
        T0 = model.T
        model = normalize_horizon(model)
        checks.append(
            CheckResult("horizon", True, f"T={T0!r} extended to {model.T!r} with indicator cut-off")
        )

    taus = {d.tau for d in model.delays}
    checks.append(CheckResult("shared_tau", len(taus) == 1, f"tau values {sorted(taus)}"))
    deep = [d.C for d in model.delays if d.C > model.C + LATTICE_TOL]
    checks.append(
        CheckResult("history_depth", not deep, f"delay depths {deep} exceed C={model.C!r}" if deep else "")
    )

    ts = np.sort(np.concatenate([rng.uniform(0.0, model.T, probes), [0.0, model.T]]))
    for i, spec in enumerate(model.delays):
        vals = np.array([spec.raw(float(t)) for t in ts])
        upper = np.array([spec.upper_bound(float(t)) for t in ts])
        slack = LATTICE_TOL * np.maximum(1.0, ts)
        bad = (vals < -model.C - slack) | (vals > upper + slack)
        detail = ""
        if bad.any():
            j = int(np.argmax(bad))
            detail = f"delta_{i + 1}({ts[j]!r}) = {vals[j]!r}, bound [{-model.C!r}, {upper[j]!r}]"
        checks.append(CheckResult(f"delay_bound[{i + 1}]", not bad.any(), detail))
        drops = np.diff(vals) < -LATTICE_TOL
        detail = f"decrease after t={ts[int(np.argmax(drops))]!r}" if drops.any() else ""
        checks.append(CheckResult(f"delay_monotone[{i + 1}]", not drops.any(), detail))

    d, k = model.d, model.k
    t = rng.uniform(0.0, model.T, probes)
    y = rng.uniform(-1.0, 1.0, (probes, k, d))
    x = rng.uniform(-1.0, 1.0, (probes, d))
    with np.errstate(all="ignore"):
        b = np.asarray(model.beta(t, y, x))
        a = np.asarray(model.alpha(t, y, x))
    shape_ok = b.shape == (probes, d) and a.shape == (probes, d, model.m)
    checks.append(
        CheckResult("coefficient_shapes", shape_ok, f"beta {b.shape}, alpha {a.shape}")
    )
    finite = shape_ok and bool(np.isfinite(b).all() and np.isfinite(a).all())
    checks.append(CheckResult("coefficients_finite", finite, "probe box [-1, 1]"))

    xi = np.array([model.initial(float(s)) for s in np.linspace(-model.C, 0.0, 65)])
    checks.append(CheckResult("initial_finite", bool(np.isfinite(xi).all()), ""))
    # Continuity spot check: the largest jump between neighbours on a
    # refining grid must shrink with the spacing.
    jumps = []
    for count in (64, 4096):
        grid = np.linspace(-model.C, 0.0, count + 1)
        vals = np.array([model.initial(float(s)) for s in grid])
        jumps.append(float(np.linalg.norm(np.diff(vals, axis=0), axis=-1).max()))
    cont = jumps[-1] <= 0.1 * jumps[0] or jumps[-1] < 1e-9
    checks.append(CheckResult("initial_continuity", bool(cont), f"max neighbour jumps {jumps}"))

    return ValidationReport(model.label, checks, model)
