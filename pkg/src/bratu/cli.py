"""Command-line front end.

Exit codes: 0 success, 2 numerical failure, 3 usage or configuration error.
Every output file gets a ``<out>.meta.json`` sidecar echoing the full
configuration and package version.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, analytic
from . import continuation as cont
from . import discretize as disc
from . import scan as scanmod
from .config import ConfigError, RunConfig, check_finite, default_target, load_config
from .errors import BratuError, DomainError, StepFailure

log = logging.getLogger("bratu")

EXIT_OK = 0
EXIT_NUMERICAL = 2
EXIT_USAGE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    """17 significant digits: round-trips any double."""
    return format(float(x), ".17g")


def _meta_path(out: Path) -> Path:
    return out.with_name(out.name + ".meta.json")


def _write_meta(out: Path, command: str, cfg: RunConfig, started: float, **extra):
    meta = {
        "tool": "bratu",
        "version": __version__,
        "command": command,
        "config": cfg.to_mapping(),
        "config_text": cfg.to_text(),
        "wall_time_s": time.perf_counter() - started,
    }
    meta.update(extra)
    _meta_path(out).write_text(json.dumps(meta, indent=2, default=str) + "\n")


def _scheme_meta(scheme: disc.Scheme) -> dict:
    meta = {"kind": scheme.kind.value}
    if scheme.is_fe:
        meta["fe_quadrature"] = f"{scheme.fe_quadrature_points}-point Gauss-Legendre per element"
    return meta


# ---------------------------------------------------------------- arguments


def _continuation_flags(p):
    p.add_argument("--scheme", choices=["fd", "fe"])
    p.add_argument("--target-ustar", type=float)
    p.add_argument("--ds", type=float)
    p.add_argument("--ds-min", type=float)
    p.add_argument("--ds-max", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--fe-quad", type=int, choices=[2, 3, 4])
    p.add_argument("--newton-tol", type=float)
    p.add_argument("--newton-max-iters", type=int)
    p.add_argument("--critical-bisection-tol", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bratu", description="Continuation and critical points of the 1D Bratu problem.")
    parser.add_argument("--version", action="version", version=f"bratu {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("branch", help="trace the solution branch to CSV")
    _continuation_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("critical", help="locate and classify critical points (JSON)")
    _continuation_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("table", help="spurious bifurcation point per N (CSV)")
    _continuation_flags(p)
    p.add_argument("--n-list")
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("analytic", help="sample the exact branch (CSV)")
    p.add_argument("--alpha-max", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--out")
    p.add_argument("--critical", action="store_true", help="print the fold as JSON")
    p.add_argument("--config")

    p = sub.add_parser("scan", help="alpha-scan for kernels of the linearised operator")
    p.add_argument("--form", choices=["original", "legendre"])
    p.add_argument("--n", type=int)
    p.add_argument("--alpha-min", type=float)
    p.add_argument("--alpha-max", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    return parser


_NOT_CONFIG = {"command", "config", "critical", "verbose"}


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values = load_config(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if key in _NOT_CONFIG or value is None:
            continue
        values[key] = value
    return RunConfig.from_mapping(values)


def _require_out(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise ConfigError("--out is required")
    return Path(cfg.out)


def _target(cfg: RunConfig, n: int) -> float:
    target = default_target(n) if cfg.target_ustar is None else cfg.target_ustar
    check_finite("target_ustar", target)
    return target


# ---------------------------------------------------------------- commands


def cmd_branch(cfg: RunConfig) -> int:
    out = _require_out(cfg)
    scheme = cfg.scheme_obj()
    grid = cfg.grid()
    target = cfg.target_ustar if cfg.target_ustar is not None else 10.0
    check_finite("target_ustar", target)
    ccfg = cfg.continuation(target)
    started = time.perf_counter()
    status, error = "ok", None
    try:
        trace = cont.trace_branch(scheme, grid, ccfg)
    except StepFailure as exc:
        trace, status, error = exc.trace, "failed", str(exc)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "s", "lambda", "u_star", "mu_min", "neg_count", "newton_iters"])
        for i, p in enumerate(trace):
            w.writerow([i, fmt(p.s), fmt(p.lam), fmt(p.u_star), fmt(p.mu_min), p.neg_count, p.newton_iters])
    _write_meta(
        out, "branch", cfg, started,
        scheme=_scheme_meta(scheme), n_elements=grid.n_elements,
        accepted_points=len(trace), status=status, error=error,
        stop_reason=getattr(trace, "stop_reason", None),
    )
    return EXIT_OK if status == "ok" else EXIT_NUMERICAL


def critical_record(p: cont.CriticalPoint) -> dict:
    return {
        "kind": p.kind.value,
        "lambda0": p.lam,
        "u_star": p.u_star,
        "mu": p.mu,
        "sigma_hat": p.sigma_hat,
        "antisymmetry_index": p.antisymmetry_index,
        "sawtooth_fraction": p.sawtooth_fraction,
        "ambiguous": p.ambiguous,
        "converged": p.converged,
        "s": p.s,
        "eigenvector": [float(v) for v in p.psi],
    }


def find_critical(scheme, grid, ccfg):
    """Trace then locate; returns (points, trace, error message or None)."""
    try:
        trace = cont.trace_branch(scheme, grid, ccfg)
        error = None
    except StepFailure as exc:
        trace, error = exc.trace, str(exc)
    points = cont.locate_critical_points(trace, scheme, grid, ccfg)
    return points, trace, error


def cmd_critical(cfg: RunConfig) -> int:
    out = _require_out(cfg)
    scheme = cfg.scheme_obj()
    grid = cfg.grid()
    ccfg = cfg.continuation(_target(cfg, grid.n_elements))
    started = time.perf_counter()
    points, trace, error = find_critical(scheme, grid, ccfg)
    out.write_text(json.dumps([critical_record(p) for p in points], indent=2) + "\n")
    _write_meta(
        out, "critical", cfg, started,
        scheme=_scheme_meta(scheme), n_elements=grid.n_elements,
        accepted_points=len(trace), critical_points=len(points),
        status="ok" if error is None else "failed", error=error,
    )
    return EXIT_OK if error is None else EXIT_NUMERICAL


def table_row(scheme: disc.Scheme, n: int, ccfg: cont.ContinuationConfig) -> dict:
    """First spurious bifurcation for one N; never raises."""
    try:
        points, _trace, error = find_critical(scheme, disc.Grid(n), ccfg)
    except BratuError as exc:
        return {"N": n, "lambda0": None, "u_star": None, "status": f"failed: {exc}"}
    spurious = cont.spurious_points(points)
    if spurious:
        p = spurious[0]
        return {"N": n, "lambda0": p.lam, "u_star": p.u_star, "status": "ok", "sigma_hat": p.sigma_hat}
    if error is not None:
        return {"N": n, "lambda0": None, "u_star": None, "status": f"failed: {error}"}
    return {"N": n, "lambda0": None, "u_star": None, "status": "none"}


def _table_job(job):
    scheme, n, ccfg = job
    return table_row(scheme, n, ccfg)


def fan_out_workers(jobs: int) -> int:
    cap = os.environ.get("BRATU_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError as exc:
            raise ConfigError(f"BRATU_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(jobs, limit))


def run_table(scheme, n_list, ccfg_for) -> list[dict]:
    jobs = [(scheme, n, ccfg_for(n)) for n in sorted(set(n_list))]
    workers = fan_out_workers(len(jobs))
    if workers == 1:
        return [_table_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_table_job, jobs))


def cmd_table(cfg: RunConfig) -> int:
    out = _require_out(cfg)
    scheme = cfg.scheme_obj()
    n_list = cfg.n_list or [3, 5, 7, 51, 101]
    for n in n_list:
        cfg.grid(n)
    if all(n % 2 == 0 for n in n_list):
        log.warning("only even N requested: no spurious bifurcations are expected")

    def ccfg_for(n):
        return cfg.continuation(_target(cfg, n), max_crossings=2)

    ccfg_for(n_list[0])
    started = time.perf_counter()
    rows = run_table(scheme, n_list, ccfg_for)
    failed = [r for r in rows if r["status"].startswith("failed")]
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "lambda0", "u_star", "status"])
        for r in rows:
            if r["status"] == "none":
                continue
            w.writerow([
                r["N"],
                "" if r["lambda0"] is None else fmt(r["lambda0"]),
                "" if r["u_star"] is None else fmt(r["u_star"]),
                r["status"],
            ])
    _write_meta(
        out, "table", cfg, started,
        scheme=_scheme_meta(scheme), rows=rows, workers=fan_out_workers(len(rows)),
    )
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_analytic(cfg: RunConfig, show_critical: bool) -> int:
    if show_critical:
        root = analytic.find_alpha_bar()
        print(json.dumps({
            "alpha_bar": root.alpha_bar,
            "lambda_bar": root.lambda_bar,
            "u_star_bar": root.u_star_bar,
            "inner_product": root.inner_product,
        }, indent=2))
    if cfg.out is None and cfg.alpha_max is None:
        if show_critical:
            return EXIT_OK
        raise ConfigError("--out and --alpha-max are required unless --critical is given")
    out = _require_out(cfg)
    alpha_max = cfg.alpha_max
    if alpha_max is None or not math.isfinite(alpha_max) or alpha_max <= 0:
        raise ConfigError("--alpha-max must be a positive finite number")
    if cfg.samples < 2:
        raise ConfigError("--samples must be at least 2")
    started = time.perf_counter()
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "lambda0", "u_star"])
        for i in range(cfg.samples):
            a = alpha_max * i / (cfg.samples - 1)
            p = analytic.exact_branch(a)
            w.writerow([fmt(p.alpha), fmt(p.lambda0), fmt(p.u_star)])
    _write_meta(out, "analytic", cfg, started)
    return EXIT_OK


def cmd_scan(cfg: RunConfig) -> int:
    out = _require_out(cfg)
    n = cfg.grid().n_elements
    form = scanmod.Form(cfg.form)
    alpha_max = cfg.alpha_max
    if alpha_max is None:
        alpha_max = 15.0 if form is scanmod.Form.LEGENDRE_T else 60.0
    steps = scanmod.DEFAULT_STEPS if cfg.steps is None else cfg.steps
    try:
        scanmod.validate_scan(form, n, cfg.alpha_min, alpha_max, steps)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    started = time.perf_counter()
    result = scanmod.scan_alpha(form, n, cfg.alpha_min, alpha_max, steps)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "indicator"])
        for a, v in zip(result.alpha_grid, result.indicator):
            w.writerow([fmt(a), fmt(v)])
    roots = [
        {"alpha": r.alpha, "indicator": r.indicator, "bracket": list(r.bracket),
         "u_star": analytic.exact_branch(r.alpha).u_star, "lambda0": analytic.exact_branch(r.alpha).lambda0}
        for r in result.roots
    ]
    roots_path = out.with_name(out.name + ".roots.json")
    roots_path.write_text(json.dumps(roots, indent=2) + "\n")
    _write_meta(out, "scan", cfg, started, scan=result.metadata, roots=roots, roots_file=roots_path.name)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        cfg = resolve_config(args)
        if args.command == "branch":
            return cmd_branch(cfg)
        if args.command == "critical":
            return cmd_critical(cfg)
        if args.command == "table":
            return cmd_table(cfg)
        if args.command == "analytic":
            return cmd_analytic(cfg, args.critical)
        return cmd_scan(cfg)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"bratu: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BratuError as exc:
        print(f"bratu: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
