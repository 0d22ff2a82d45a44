"""Command line front end.

    emdisc {validate,transform-check,simulate,convergence,occupation}
           --config CONFIG.json [--seed S] [--threads T] [--out-dir DIR]
           [--override key=value ...]

Exit codes: 0 success, 2 inadmissible problem, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .analysis import StudyConfig, fit_rate, run_study
from .randomness import SeedSpec, generate_path
from .schemes import em_continuous_on_fine, transformed_em_continuous_on_fine
from .sde_model import problem_from_dict, validate
from .transform import build_transform, g, g_inverse, g_prime, g_second, transformed_problem

log = logging.getLogger("emdisc")

KINDS = ("validate", "transform-check", "simulate", "convergence", "occupation")
EXIT_OK, EXIT_INADMISSIBLE, EXIT_CONFIG = 0, 2, 3

_STUDY_KEYS = {f.name for f in fields(StudyConfig)}
_EXTRA_KEYS = {
    "kind": str, "problem": dict, "metric": str, "xi": list, "grid": dict,
    "path_index": int, "n": int, "include_transformed": bool, "zero_tol": float,
    "outputs": dict,
}
_GRID_KEYS = {"lo", "hi", "points"}
_OUTPUT_KEYS = {"csv", "json"}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> None:
    """Apply ``a.b.c=value`` to a nested config; the key must already be legal."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, value = item.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-object")
    node[parts[-1]] = _parse_value(value)


def load_config(path, overrides=(), seed=None) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for item in overrides:
        apply_override(cfg, item)
    if seed is not None:
        cfg["seed"] = seed
    unknown = set(cfg) - _STUDY_KEYS - set(_EXTRA_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    if "problem" not in cfg:
        raise ConfigError("config needs a 'problem' entry")
    if set(cfg.get("grid", {})) - _GRID_KEYS:
        raise ConfigError(f"unknown grid key(s): {sorted(set(cfg['grid']) - _GRID_KEYS)}")
    if set(cfg.get("outputs", {})) - _OUTPUT_KEYS:
        raise ConfigError(f"unknown output key(s): {sorted(set(cfg['outputs']) - _OUTPUT_KEYS)}")
    return cfg


def study_config(cfg: dict) -> StudyConfig:
    kw = {k: cfg[k] for k in _STUDY_KEYS if k in cfg}
    if "q" in kw and kw["q"] in ("inf", "Infinity", None):
        kw["q"] = math.inf
    try:
        return StudyConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _csv(header, columns) -> str:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _out(cfg, out_dir: Path, kind: str, default: str) -> Path:
    return out_dir / cfg.get("outputs", {}).get(kind, default)


def cmd_validate(cfg, problem, args, out_dir):
    report = validate(problem, float(cfg.get("zero_tol", 1e-12)))
    print(report.summary())
    return EXIT_OK if report.admissible else EXIT_INADMISSIBLE


def cmd_transform_check(cfg, problem, args, out_dir):
    t = build_transform(problem, float(cfg.get("nu_fraction", 0.5)))
    grid = cfg.get("grid", {})
    if t.is_identity:
        lo, hi = problem.x0 - 1.0, problem.x0 + 1.0
    else:
        lo, hi = min(t.xi) - 2 * t.nu, max(t.xi) + 2 * t.nu
    x = np.linspace(float(grid.get("lo", lo)), float(grid.get("hi", hi)),
                    int(grid.get("points", 401)))
    gx = g(t, x)
    cols = [x, gx, g_prime(t, x), g_second(t, x), g_inverse(t, gx)]
    path = _out(cfg, out_dir, "csv", "transform_check.csv")
    _write(path, _csv(["x", "G", "G_prime", "G_second", "G_inv_G"], cols))
    err = float(np.max(np.abs(cols[4] - x)))
    print(f"nu={t.nu!r} gprime_min={t.gprime_min!r} gprime_max={t.gprime_max!r} "
          f"max_roundtrip_error={err!r}")
    return EXIT_OK


def cmd_simulate(cfg, problem, args, out_dir):
    n = int(cfg.get("n", cfg.get("n_list", [16])[0]))
    sc = study_config({**cfg, "n_list": [n]})
    path = generate_path(SeedSpec(sc.seed), int(cfg.get("path_index", 0)), sc.n_fine)
    cont = em_continuous_on_fine(problem, path, n)
    t_grid = np.arange(sc.n_fine + 1) / sc.n_fine
    header, cols = ["t", "x_em"], [t_grid, cont.values]
    if cfg.get("include_transformed", False):
        t = build_transform(problem, sc.nu_fraction)
        tp = transformed_problem(t, problem)
        header.append("x_transformed_em")
        cols.append(transformed_em_continuous_on_fine(problem, tp, t, path, n).values)
    _write(_out(cfg, out_dir, "csv", "simulate.csv"), _csv(header, cols))
    print(f"n={n} n_fine={sc.n_fine} x_1={float(cont.values[-1])!r}")
    return EXIT_OK


def cmd_convergence(cfg, problem, args, out_dir):
    sc = study_config(cfg)
    metric = cfg.get("metric", "final")
    if metric not in ("final", "sup", "lq"):
        raise ConfigError(f"metric must be final, sup or lq, got {metric!r}")
    table = run_study(sc, problem, (metric,), workers=args.threads).table(metric)
    _write(_out(cfg, out_dir, "csv", "convergence.csv"), table.to_csv())
    summary = {"metric": metric, "p": sc.p, "q": str(sc.q) if math.isinf(sc.q) else sc.q,
               "scheme": sc.scheme, "reference": sc.reference, "seed": sc.seed, "M": sc.M}
    try:
        rf = fit_rate(table)
    except ValueError as exc:
        summary["rate_fit"] = None
        print(f"no rate fit: {exc}")
    else:
        summary["rate_fit"] = rf.to_dict()
        print(f"slope={rf.slope:.4f} r2={rf.r_squared:.4f}")
    _write(_out(cfg, out_dir, "json", "convergence.json"), _dump_json(summary))
    return EXIT_OK


def cmd_occupation(cfg, problem, args, out_dir):
    sc = study_config(cfg)
    xi = cfg.get("xi")
    if xi is None and problem.drift.k == 0:
        raise ConfigError("occupation needs a drift breakpoint or an explicit 'xi' list")
    res = run_study(sc, problem, ("occupation",), xi=xi, workers=args.threads)
    table = res.occupation_table()
    _write(_out(cfg, out_dir, "csv", "occupation.csv"), table.to_csv())
    fits = {}
    for level in res.xi:
        entry = {}
        for kind in ("mean", "pmean"):
            try:
                entry[kind] = fit_rate(table.error_table(level, kind)).to_dict()
            except ValueError:
                entry[kind] = None
        fits[repr(level)] = entry
    _write(_out(cfg, out_dir, "json", "occupation.json"),
           _dump_json({"p": sc.p, "M": sc.M, "seed": sc.seed, "rate_fits": fits}))
    first = fits[repr(res.xi[0])]["mean"]
    print(f"xi={res.xi[0]!r} mean slope=" + (f"{first['slope']:.4f}" if first else "n/a"))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "transform-check": cmd_transform_check,
    "simulate": cmd_simulate,
    "convergence": cmd_convergence,
    "occupation": cmd_occupation,
}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="emdisc", description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1,
                    help="worker threads; never changes results")
    ap.add_argument("--out-dir", default=".")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, args.override, args.seed)
        if cfg.get("kind", args.kind) != args.kind:
            raise ConfigError(f"config is for {cfg['kind']!r}, not {args.kind!r}")
        try:
            problem = problem_from_dict(cfg["problem"])
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad problem: {exc}") from exc
        if args.kind != "validate":
            report = validate(problem, float(cfg.get("zero_tol", 1e-12)))
            if not report.admissible:
                print(report.summary())
                return EXIT_INADMISSIBLE
        log.info("running %s from %s", args.kind, args.config)
        return COMMANDS[args.kind](cfg, problem, args, Path(args.out_dir))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
