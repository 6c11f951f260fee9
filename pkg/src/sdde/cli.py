"""Command line entry point: simulate | converge | probe | list-models.

Each command reads an optional JSON config; command-line flags override its
top-level keys. Exit codes: 0 success, 2 input/validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import models
from .brownian import sample_path
from .conditions import probe_all
from .errors import ConfigError, GridMisaligned, NumericalBlowup, SddeError, UnknownModel
from .euler import integrate
from .export import loglog_svg, path_csv
from .harness import RateExperimentConfig, exceedance_table, fit_rate, run_convergence

_SEED = {"type": "integer", "minimum": 0}

SCHEMAS = {
    "simulate": {
        "type": "object",
        "additionalProperties": False,
        "required": ["model", "n"],
        "properties": {
            "model": {"type": "string"},
            "n": {"type": "integer", "minimum": 1},
            "seed": _SEED,
            "path": {"type": "integer", "minimum": 0},
            "out": {"type": "string"},
            "format": {"enum": ["csv", "json"]},
        },
    },
    "converge": {
        "type": "object",
        "additionalProperties": False,
        "required": ["model"],
        "properties": {
            "model": {"type": "string"},
            "n0": {"type": "integer", "minimum": 1},
            "levels": {"type": "integer", "minimum": 3},
            "paths": {"type": "integer", "minimum": 1},
            "ref_multiplier": {"type": "integer", "minimum": 1},
            "seed": _SEED,
            "eps": {"type": "array", "items": {"type": "number", "minimum": 0}},
            "kappa": {"type": ["number", "null"]},
            "reference": {"enum": ["auto", "exact", "fine"]},
            "chunk_size": {"type": "integer", "minimum": 1},
            "threads": {"type": "integer", "minimum": 1},
            "out": {"type": "string"},
            "format": {"enum": ["csv", "json", "svg"]},
        },
    },
    "probe": {
        "type": "object",
        "additionalProperties": False,
        "required": ["model"],
        "properties": {
            "model": {"type": "string"},
            "R": {"type": "number", "exclusiveMinimum": 0},
            "N": {"type": "integer", "minimum": 1},
            "seed": _SEED,
            "out": {"type": "string"},
            "format": {"enum": ["json"]},
        },
    },
}

DEFAULTS = {
    "simulate": {"seed": 0, "path": 0, "format": "csv"},
    "converge": {"out": ".", "format": "json"},
    "probe": {"R": 2.0, "N": 100000, "seed": 0, "format": "json"},
}


def load_config(spec: str | None) -> dict:
    """Read a JSON config from a path, or a bundled config by name."""
    if spec is None:
        return {}
    p = Path(spec)
    if p.is_file():
        text = p.read_text()
    else:
        name = spec if spec.endswith(".json") else spec + ".json"
        res = resources.files("sdde") / "configs" / name
        if not res.is_file():
            raise ConfigError(f"config {spec!r} is neither a file nor a bundled config")
        text = res.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {spec!r} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    cfg.update(load_config(getattr(args, "config", None)))
    flags = {
        "model": args.model,
        "seed": args.seed,
        "out": args.out,
        "format": args.format,
    }
    if command == "simulate":
        flags["n"] = args.n
        flags["path"] = args.path_index
    elif command == "converge":
        flags["n0"] = args.n
        flags["threads"] = args.threads
        flags["paths"] = args.paths
    elif command == "probe":
        flags["R"] = args.R
        flags["N"] = args.N
    cfg.update({k: v for k, v in flags.items() if v is not None})
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid {command} config: {exc.message}") from None
    return cfg


def _write(dest: str | None, text: str) -> None:
    if dest is None or dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).parent.mkdir(parents=True, exist_ok=True)
        Path(dest).write_text(text)


def cmd_simulate(cfg: dict) -> int:
    model = models.builtin(cfg["model"])
    n = cfg["n"]
    noise = sample_path(model.m, model.T, n, cfg["seed"], cfg["path"])
    path = integrate(model, noise, n)
    if cfg["format"] == "json":
        text = json.dumps(
            {"model": model.label, "n": n, "seed": cfg["seed"], "path": cfg["path"],
             "t": path.times.tolist(), "X": path.values.tolist()},
            indent=2,
        ) + "\n"
    else:
        text = path_csv(path.times, path.values, model.label, n, cfg["seed"], cfg["path"])
    _write(cfg.get("out"), text)
    return 0


def cmd_converge(cfg: dict) -> int:
    keys = set(RateExperimentConfig.__dataclass_fields__)
    exp = RateExperimentConfig(**{k: v for k, v in cfg.items() if k in keys})
    if "eps" in cfg:
        exp.eps = tuple(cfg["eps"])
    report = run_convergence(exp)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{report.model}.report.json").write_text(report.to_json() + "\n")
    (out / f"{report.model}.quantiles.csv").write_text(report.quantile_csv())
    q = report.quantiles()
    if cfg["format"] == "svg":
        svg = loglog_svg(
            report.levels,
            [q[n]["q50"] for n in report.levels],
            [q[n]["q25"] for n in report.levels],
            [q[n]["q75"] for n in report.levels],
            title=report.model,
            slope=report.gamma_hat(),
        )
        (out / f"{report.model}.loglog.svg").write_text(svg)

    g = fit_rate(report)
    print(f"model {report.model}: gamma_hat = {'undefined' if g is None else format(g, '.4f')}"
          f" over levels {report.fit_levels} (reference {report.provenance}, n_ref {report.n_ref})")
    for e in report.eps:
        tab = exceedance_table(report, e)
        probs = " ".join(f"{p:.4f}" for p in tab["p"])
        trend = "nonincreasing" if tab["nonincreasing"] else "NOT nonincreasing"
        print(f"P(sup error > {e:g}) by level: {probs} ({trend})")
    if report.blowup_paths:
        print(f"warning: {len(report.blowup_paths)} path(s) blew up and were excluded", file=sys.stderr)
    return 0


def cmd_probe(cfg: dict) -> int:
    model = models.builtin(cfg["model"])
    report = probe_all(model, cfg["R"], cfg["N"], cfg["seed"])
    _write(cfg.get("out"), report.to_json() + "\n")
    return 0


def cmd_list(args) -> int:
    listing = models.list_models()
    if args.format == "json":
        print(json.dumps(listing, indent=2))
    else:
        for label, desc in listing.items():
            print(f"{label:20s} {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats):
        p.add_argument("--config", help="JSON config file or bundled config name")
        p.add_argument("--model")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=formats)

    p = sub.add_parser("simulate", help="integrate one path and write it as CSV")
    common(p, ["csv", "json"])
    p.add_argument("--n", type=int, help="steps per unit time")
    p.add_argument("--path-index", type=int, help="noise path index (default 0)")

    p = sub.add_parser("converge", help="coupled-level convergence experiment")
    common(p, ["csv", "json", "svg"])
    p.add_argument("--n", type=int, help="coarsest level n0")
    p.add_argument("--paths", type=int)
    p.add_argument("--threads", type=int)

    p = sub.add_parser("probe", help="sampled condition checks")
    common(p, ["json"])
    p.add_argument("--R", type=float, help="box radius")
    p.add_argument("--N", type=int, help="number of probes")

    p = sub.add_parser("list-models", help="show registered models")
    p.add_argument("--format", choices=["text", "json"], default="text")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-models":
            return cmd_list(args)
        cfg = resolve(args.command, args)
        return {"simulate": cmd_simulate, "converge": cmd_converge, "probe": cmd_probe}[args.command](cfg)
    except NumericalBlowup as exc:
        print(f"error: numerical blow-up: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, GridMisaligned, UnknownModel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SddeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
