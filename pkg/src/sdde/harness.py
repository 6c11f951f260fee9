"""Coupled-level convergence experiments.

Every path p gets one Brownian sample at the reference resolution n_ref,
keyed by (seed, p). The reference solution and the Euler scheme at every
level n_l = n0 * 2**l are all driven by that sample (coarsened), so
e[p, l] = sup_t |X_ref(t) - X_{n_l}(t)| measures discretisation error only.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .brownian import sample_paths
from .errors import ConfigError
from .euler import integrate, sup_error
from .model import SddeModel, as_integer, normalize_horizon, validate_model
from .models import builtin
from .oracle import reference

QUANTILES = (25, 50, 75, 99)
DEFAULT_KAPPA = {"A2": 0.4, "A3": 0.2}
# Levels closer than this factor to n_ref are left out of the rate fit.
REF_EXCLUSION = 4
MEMORY_BUDGET = 512 * 2**20


@dataclass
class RateExperimentConfig:
    model: str
    n0: int = 8
    levels: int = 7
    paths: int = 200
    ref_multiplier: int = 16
    seed: int = 1
    eps: tuple[float, ...] = (0.05,)
    kappa: float | None = None
    reference: str = "auto"
    chunk_size: int = 256
    threads: int = 1

    @property
    def level_ns(self) -> list[int]:
        return [self.n0 * 2**l for l in range(self.levels)]

    @property
    def n_ref(self) -> int:
        return self.ref_multiplier * self.level_ns[-1]

    def check(self, model: SddeModel) -> None:
        if self.levels < 3:
            raise ConfigError("levels must be >= 3 for a rate fit")
        if self.paths < 1 or self.n0 < 1:
            raise ConfigError("paths and n0 must be positive")
        if self.ref_multiplier < 1:
            raise ConfigError("ref_multiplier must be >= 1")
        if as_integer(self.n0 * model.tau) is None:
            raise ConfigError(f"n0*tau = {self.n0}*{model.tau!r} must be an integer")
        if as_integer(self.n0 * model.T) is None:
            raise ConfigError(f"n0*T = {self.n0}*{model.T!r} must be an integer")
        if any(e < 0 for e in self.eps):
            raise ConfigError("eps values must be nonnegative")
        if self.reference not in ("auto", "exact", "fine"):
            raise ConfigError(f"reference must be auto|exact|fine, got {self.reference!r}")


@dataclass
class RateReport:
    model: str
    levels: list[int]
    errors: np.ndarray  # (P, L); NaN rows for excluded (blown-up) paths
    n_ref: int | None = None
    seed: int | None = None
    provenance: str | None = None
    blowup_paths: list[int] = field(default_factory=list)
    eps: tuple[float, ...] = ()
    kappa: float | None = None

    @property
    def healthy(self) -> np.ndarray:
        return self.errors[np.isfinite(self.errors).all(axis=1)]

    @property
    def fit_levels(self) -> list[int]:
        if self.n_ref is None:
            return list(self.levels)
        return [n for n in self.levels if n * REF_EXCLUSION <= self.n_ref]

    def quantiles(self) -> dict[int, dict[str, float]]:
        e = self.healthy
        return {
            n: {f"q{q}": float(np.percentile(e[:, l], q)) for q in QUANTILES}
            for l, n in enumerate(self.levels)
        }

    def gamma_hat(self, drop_top: int = 0) -> float | None:
        return fit_rate(self, drop_top)

    def to_dict(self) -> dict:
        g = self.gamma_hat()
        out = {
            "model": self.model,
            "levels": list(self.levels),
            "n_ref": self.n_ref,
            "seed": self.seed,
            "paths": int(self.errors.shape[0]),
            "reference": self.provenance,
            "blowups": len(self.blowup_paths),
            "blowup_paths": list(self.blowup_paths),
            "gamma_hat": g,
            "gamma_flag": "ok" if g is not None else "undefined (zero errors or too few levels)",
            "fit_levels": self.fit_levels,
            "quantiles": {str(n): q for n, q in self.quantiles().items()},
            "exceedance": {repr(e): exceedance_table(self, e)["p"] for e in self.eps},
        }
        if self.kappa is not None:
            out["as_bound"] = as_rate_diagnostic(self, self.kappa)
        out["errors"] = [[None if not math.isfinite(v) else float(v) for v in row] for row in self.errors]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def quantile_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", *(f"q{q}" for q in QUANTILES), *(f"exceedance@{e!r}" for e in self.eps)])
        quant = self.quantiles()
        exc = [exceedance_table(self, e)["p"] for e in self.eps]
        for l, n in enumerate(self.levels):
            w.writerow([n, *(repr(quant[n][f"q{q}"]) for q in QUANTILES), *(repr(p[l]) for p in exc)])
        return buf.getvalue()


def fit_rate(report: RateReport, drop_top: int = 0) -> float | None:
    """Least-squares slope of median log error against -log n.

    None when fewer than two levels remain or some median error is zero.
    """
    use = [l for l, n in enumerate(report.levels) if n in report.fit_levels]
    if drop_top:
        use = use[:-drop_top]
    e = report.healthy
    if len(use) < 2 or e.shape[0] == 0:
        return None
    with np.errstate(divide="ignore"):
        med = np.median(np.log(e[:, use]), axis=0)
    if not np.isfinite(med).all():
        return None
    x = -np.log(np.asarray(report.levels, dtype=float)[use])
    slope = np.polyfit(x, med, 1)[0]
    return float(slope)


def exceedance_table(report: RateReport, eps: float) -> dict:
    """Fraction of paths with sup error > eps per level, plus a trend flag.

    The trend is nonincreasing if no level exceeds its predecessor by more
    than 2 * sqrt(p (1 - p) / P), p the pooled pair mean.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    e = report.healthy
    P = e.shape[0]
    p = (e > eps).mean(axis=0) if P else np.full(len(report.levels), np.nan)
    ok = True
    for a, b in zip(p[:-1], p[1:]):
        pool = 0.5 * (a + b)
        tol = 2 * math.sqrt(pool * (1 - pool) / P) if P else 0.0
        if b > a + tol:
            ok = False
    return {"eps": eps, "levels": list(report.levels), "p": [float(v) for v in p], "nonincreasing": ok}


def as_rate_diagnostic(report: RateReport, kappa: float) -> dict:
    """Per-path zeta(kappa) = max_l n_l**kappa * e[p, l] and its stability.

    If the error is O(n**-gamma) for some gamma > kappa, zeta stays bounded
    and is attained at coarse levels; the 99th-percentile ratio of zeta over
    the top half of the levels to zeta over the bottom half stays near or
    below 1. Growth is flagged when that ratio exceeds 1 and most paths
    attain zeta at the finest level.
    """
    e = report.healthy
    L = len(report.levels)
    n = np.asarray(report.levels, dtype=float)
    scaled = e * n**kappa
    zeta = scaled.max(axis=1)
    half = L // 2
    bottom = scaled[:, :half].max(axis=1)
    top = scaled[:, L - half:].max(axis=1)
    q_bottom = float(np.percentile(bottom, 99))
    q_top = float(np.percentile(top, 99))
    ratio = q_top / q_bottom if q_bottom > 0 else (math.nan if q_top == 0 else math.inf)
    argmax = scaled.argmax(axis=1)
    at_top = float(np.mean(argmax == L - 1))
    zeta_short = scaled[:, :-1].max(axis=1)
    grows = bool(np.median(zeta) > np.median(zeta_short))
    return {
        "kappa": kappa,
        "zeta_p50": float(np.percentile(zeta, 50)),
        "zeta_p99": float(np.percentile(zeta, 99)),
        "stability_ratio": ratio,
        "argmax_level_counts": np.bincount(argmax, minlength=L).tolist(),
        "fraction_at_finest": at_top,
        "grows_with_levels": grows,
        "growth_flag": bool(ratio > 1 and at_top >= 0.5),
    }


def summarize(levels, errors, *, n_ref=None, eps=(), kappa=None, model="synthetic",
              seed=None, provenance=None, blowup_paths=()) -> RateReport:
    """Build a report from an error matrix (P, L)."""
    return RateReport(model, list(levels), np.asarray(errors, dtype=float), n_ref, seed,
                      provenance, list(blowup_paths), tuple(eps), kappa)


def _chunk(model: SddeModel, cfg: RateExperimentConfig, paths: list[int]):
    noise = sample_paths(model.m, model.T, cfg.n_ref, cfg.seed, paths)
    ref = reference(model, noise, cfg.reference, on_blowup="mask")
    err = np.empty((len(paths), cfg.levels))
    blown = ref.blowup_step >= 0
    for l, n in enumerate(cfg.level_ns):
        path = integrate(model, noise, n, on_blowup="mask")
        blown |= path.blown
        err[:, l] = sup_error(path, ref, cfg.n_ref)
    err[blown] = np.nan
    return err, blown, ref.provenance


def _threads(requested: int) -> int:
    cap = os.environ.get("SDDE_THREADS")
    n = max(1, requested)
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def run_convergence(cfg: RateExperimentConfig, model: SddeModel | None = None) -> RateReport:
    model = builtin(cfg.model) if model is None else model
    report = validate_model(model, probes=256, seed=cfg.seed)
    if not report.passed:
        failed = [c.check for c in report.checks if not c.passed]
        raise ConfigError(f"model {model.label!r} failed validation: {failed}")
    model = normalize_horizon(model)
    cfg.check(model)

    per_path = (cfg.n_ref * model.T + 1) * 8 * (2 * model.m + 2 * model.d * (1 + model.m))
    chunk = max(1, min(cfg.chunk_size, int(MEMORY_BUDGET // per_path)))
    batches = [list(range(i, min(i + chunk, cfg.paths))) for i in range(0, cfg.paths, chunk)]
    workers = _threads(cfg.threads)
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda b: _chunk(model, cfg, b), batches))
    else:
        results = [_chunk(model, cfg, b) for b in batches]

    errors = np.concatenate([r[0] for r in results])
    blown = np.concatenate([r[1] for r in results])
    kappa = cfg.kappa if cfg.kappa is not None else DEFAULT_KAPPA.get(model.condition_class, 0.2)
    return summarize(
        cfg.level_ns, errors, n_ref=cfg.n_ref, eps=cfg.eps, kappa=kappa, model=model.label,
        seed=cfg.seed, provenance=results[0][2], blowup_paths=np.flatnonzero(blown).tolist(),
    )


def config_dict(cfg: RateExperimentConfig) -> dict:
    d = asdict(cfg)
    d["eps"] = list(cfg.eps)
    return d
