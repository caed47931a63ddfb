"""Batch front-end: config parsing, experiment orchestration, artifacts.

Config grammar (INI-style, strict):

    [problem]
    hurst = 0.75            ; optional unless paths are sampled internally
    delay = 1.0
    horizon = 3.0           ; integer multiple of delay
    dim = 1
    noise_dim = 1
    eta = t + 1             ; expression in t (one per component, ';'-separated)
    drift = xd1             ; d expressions, ';'-separated
    diffusion = a * xd1 + b ; d rows ';'-separated, m entries ','-separated
    params = a = 0.2, b = 0.1   ; optional named constants

    [solver]
    scheme = euler          ; euler | picard
    steps_per_delay = 256
    picard_tol = 1e-10      ; optional
    picard_max_iter = 100   ; optional
    initial_iterate = constant  ; optional, constant | linear

    [mc]
    paths = 4
    seed = 0

    [output]
    directory = out
    formats = csv, json     ; optional, default both

Unknown sections or keys fail fast with their file location.  The
REFSDE_OUTPUT_DIR environment variable overrides the configured output
directory; a --out flag overrides both.

Exit codes: 0 ok, 1 error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coeff import (
    CoefficientSet,
    ExprSyntaxError,
    eval_expr,
    hypothesis_audit,
    parse_expr,
)
from .fbm import sample_cholesky, sample_circulant
from .fracnorm import norm_report
from .grids import SamplePath, TimeGrid
from .skorokhod import reflect
from .solver import (
    Problem,
    SolverConfig,
    check_invariants,
    convergence_study,
    driver_grid,
    solve_stochastic,
)

__all__ = ["RunConfig", "load_config", "main"]

OUTPUT_DIR_ENV = "REFSDE_OUTPUT_DIR"
FLOAT_FMT = "%.17g"

_KNOWN_KEYS = {
    "problem": {"hurst", "delay", "horizon", "dim", "noise_dim", "eta",
                "drift", "diffusion", "params"},
    "solver": {"scheme", "steps_per_delay", "picard_tol", "picard_max_iter",
               "initial_iterate"},
    "mc": {"paths", "seed"},
    "output": {"directory", "formats"},
}
_REQUIRED_KEYS = {
    "problem": {"delay", "horizon", "dim", "noise_dim", "eta", "drift", "diffusion"},
    "solver": {"scheme", "steps_per_delay"},
    "mc": {"paths", "seed"},
    "output": {"directory"},
}


class ConfigError(ValueError):
    """Config parse/validation failure with a file location."""


@dataclass
class RunConfig:
    problem: Problem
    solver: SolverConfig
    paths: int
    seed: int
    directory: str
    formats: tuple
    hurst: float | None
    echo: dict  # raw key/value echo for the manifest


def _key_lines(path: Path) -> dict:
    """Map (section, key) -> 1-based line number, for error reporting."""
    lines = {}
    section = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            lines[(section, None)] = lineno
        elif "=" in line and section is not None:
            key = line.split("=", 1)[0].strip().lower()
            lines.setdefault((section, key), lineno)
    return lines


def _loc(path: Path, lines: dict, section: str, key: str | None) -> str:
    lineno = lines.get((section, key)) or lines.get((section, None))
    where = f"{path}:{lineno}" if lineno else str(path)
    dotted = f"{section}.{key}" if key else section
    return f"{dotted} ({where})"


def _parse_params(raw: str) -> dict:
    params = {}
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ValueError(f"parameter entry {chunk!r} is not name = value")
        name, value = chunk.split("=", 1)
        params[name.strip()] = float(value)
    return params


def _eta_values(exprs: list, params: dict, grid: TimeGrid, d: int) -> np.ndarray:
    cols = []
    for node in exprs:
        col = np.array([eval_expr(node, {"t": float(t)}, params) for t in grid.times],
                       dtype=float)
        cols.append(col)
    if len(cols) == 1 and d > 1:
        cols = cols * d
    return np.column_stack(cols)


def load_config(path: str | Path, steps_per_delay: int | None = None) -> RunConfig:
    """Parse and validate a run config.

    steps_per_delay, when given, overrides the solver section value (the
    initial segment is resampled accordingly); used by the convergence
    command to rebuild the problem at the finest level.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                   interpolation=None)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    lines = _key_lines(path)

    for section in cp.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section {_loc(path, lines, section, None)}")
        for key in cp[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {_loc(path, lines, section, key)}")
    for section, required in _REQUIRED_KEYS.items():
        if section not in cp:
            raise ConfigError(f"missing section [{section}] in {path}")
        missing = required - set(cp[section])
        if missing:
            raise ConfigError(
                f"missing key {section}.{sorted(missing)[0]} in {path}"
            )

    def get(section, key, cast, default=None):
        if key not in cp[section]:
            return default
        raw = cp[section][key]
        try:
            return cast(raw)
        except (ValueError, ExprSyntaxError) as exc:
            raise ConfigError(
                f"bad value for {_loc(path, lines, section, key)}: {exc}"
            ) from exc

    d = get("problem", "dim", int)
    m = get("problem", "noise_dim", int)
    params = get("problem", "params", _parse_params, {})
    delay = get("problem", "delay", float)
    horizon = get("problem", "horizon", float)
    hurst = get("problem", "hurst", float)
    n_r = steps_per_delay or get("solver", "steps_per_delay", int)

    def split_exprs(raw, variables=None):
        return [s.strip() for s in raw.split(";") if s.strip()]

    drift_src = get("problem", "drift", split_exprs)
    diffusion_src = get("problem", "diffusion",
                        lambda raw: [[e.strip() for e in row.split(",")]
                                     for row in raw.split(";") if row.strip()])
    eta_src = get("problem", "eta", split_exprs)
    if len(drift_src) != d:
        raise ConfigError(f"{_loc(path, lines, 'problem', 'drift')}: expected {d} expressions")
    if len(diffusion_src) != d or any(len(row) != m for row in diffusion_src):
        raise ConfigError(f"{_loc(path, lines, 'problem', 'diffusion')}: expected a {d}x{m} matrix")
    if len(eta_src) not in (1, d):
        raise ConfigError(f"{_loc(path, lines, 'problem', 'eta')}: expected 1 or {d} expressions")

    try:
        coeffs = CoefficientSet.from_strings(drift_src, diffusion_src, params=params)
        eta_exprs = [parse_expr(s, params, d, variables={"t"}) for s in eta_src]
        eta_grid = TimeGrid(-delay, 0.0, n_r)
        eta = SamplePath(eta_grid, _eta_values(eta_exprs, params, eta_grid, d))
        problem = Problem(eta=eta, coeffs=coeffs, r=delay, T=horizon, H=hurst)
        solver = SolverConfig(
            steps_per_delay=n_r,
            scheme=get("solver", "scheme", str),
            picard_tol=get("solver", "picard_tol", float, 1e-10),
            picard_max_iter=get("solver", "picard_max_iter", int, 100),
            seed=get("mc", "seed", int),
            initial_iterate=get("solver", "initial_iterate", str, "constant"),
        )
    except (ValueError, ExprSyntaxError) as exc:
        raise ConfigError(f"invalid configuration in {path}: {exc}") from exc

    formats = tuple(
        f.strip() for f in cp["output"].get("formats", "csv, json").split(",") if f.strip()
    )
    bad = set(formats) - {"csv", "json"}
    if bad:
        raise ConfigError(f"{_loc(path, lines, 'output', 'formats')}: unknown formats {sorted(bad)}")

    echo = {s: dict(cp[s]) for s in cp.sections()}
    return RunConfig(
        problem=problem,
        solver=solver,
        paths=get("mc", "paths", int),
        seed=get("mc", "seed", int),
        directory=cp["output"]["directory"],
        formats=formats,
        hurst=hurst,
        echo=echo,
    )


# --- artifact writers -----------------------------------------------------

def _resolve_outdir(cfg_dir: str, flag_out: str | None) -> Path:
    out = flag_out or os.environ.get(OUTPUT_DIR_ENV) or cfg_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list, columns: list) -> None:
    data = np.column_stack(columns)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",")


def _solution_csv(path: Path, sol) -> None:
    d = sol.x.dim
    header = ["t"]
    cols = [sol.x.times]
    for name, sp in (("x", sol.x), ("y", sol.y), ("z", sol.z)):
        header += [f"{name}_{i + 1}" for i in range(d)]
        cols.append(sp.values)
    _write_csv(path, header, cols)


def _read_path_csv(path: Path) -> SamplePath:
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = list(data.dtype.names)
    if names[0] != "t":
        raise ValueError(f"first column of {path} must be t, got {names[0]}")
    times = data["t"]
    values = np.column_stack([data[n] for n in names[1:]])
    n = len(times) - 1
    grid = TimeGrid(float(times[0]), float(times[-1]), n)
    if not np.allclose(times, grid.times, atol=1e-9 * max(1.0, abs(grid.t1))):
        raise ValueError(f"{path} is not sampled on a uniform grid")
    return SamplePath(grid, values)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default,
                               sort_keys=True) + "\n")


# --- subcommands ----------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    paths = args.paths if args.paths is not None else cfg.paths
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, solver=dataclasses.replace(cfg.solver, seed=args.seed),
                                  seed=args.seed)
    if cfg.hurst is None:
        raise ConfigError("problem.hurst is required to sample drivers")
    outdir = _resolve_outdir(cfg.directory, args.out)

    mc = solve_stochastic(cfg.problem, cfg.solver, paths)
    h = cfg.hurst
    alpha = 0.5 * ((1.0 - h) + 0.5)  # midpoint of the admissible (1-H, 1/2)
    manifest = {
        "config": cfg.echo,
        "paths": paths,
        "seeds": [[cfg.solver.seed, i] for i in range(paths)],
        "alpha": alpha,
        "runs": [],
        "failures": {str(i): repr(e) for i, e in mc.failures.items()},
    }
    violated = False
    for i, sol in enumerate(mc.solutions):
        if sol is None:
            continue
        inv = check_invariants(sol)
        flags = [k for k, v in inv.items()
                 if isinstance(v, bool) and not v and k != "complementarity_ok"]
        violated = violated or bool(flags)
        entry = {"path": i, "invariants": inv}
        for comp in range(sol.x.dim):
            entry[f"norms_x_{comp + 1}"] = norm_report(sol.x.component(comp), alpha).to_dict()
        if cfg.solver.scheme == "picard":
            entry["picard_iterations"] = sol.iterations_per_interval
        manifest["runs"].append(entry)
        if "csv" in cfg.formats:
            _solution_csv(outdir / f"path_{i:04d}.csv", sol)
    if "json" in cfg.formats:
        _write_json(outdir / "manifest.json", manifest)
    if mc.failures:
        print(f"{len(mc.failures)} of {paths} paths failed; see manifest", file=sys.stderr)
        return 1
    if violated:
        print("invariant violation; see manifest", file=sys.stderr)
        return 2
    print(f"wrote {mc.n_ok} path(s) to {outdir}")
    return 0


def cmd_fbm(args) -> int:
    half_ok = args.allow_h_half and args.hurst == 0.5
    if not (0.5 < args.hurst < 1.0) and not half_ok:
        raise ValueError(
            "--hurst must lie in (0.5, 1); pass --allow-h-half to test at exactly 1/2"
        )
    grid = TimeGrid(0.0, args.horizon, args.steps)
    if args.method == "cholesky":
        path = sample_cholesky(grid, args.hurst, args.paths, seed=args.seed)
    else:
        path = sample_circulant(grid, args.hurst, args.paths, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = ["t"] + [f"w_{i + 1}" for i in range(args.paths)]
    _write_csv(out, header, [grid.times, path.values])
    print(f"wrote {args.paths} driver path(s) to {out}")
    return 0


def cmd_skorokhod(args) -> int:
    z = _read_path_csv(Path(args.input))
    sol = reflect(z)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    d = z.dim
    header = (["t"]
              + [f"x_{i + 1}" for i in range(d)]
              + [f"y_{i + 1}" for i in range(d)]
              + [f"z_{i + 1}" for i in range(d)])
    _write_csv(out, header, [z.times, sol.x.values, sol.y.values, sol.z.values])
    print(f"wrote reflected path to {out}")
    return 0


def cmd_converge(args) -> int:
    levels = [int(v) for v in args.levels.split(",")]
    if len(levels) < 3:
        raise ValueError("need at least 3 refinement levels")
    finest = levels[-1]
    cfg = load_config(args.config, steps_per_delay=finest)
    if cfg.hurst is None:
        raise ConfigError("problem.hurst is required to sample the shared driver")
    p = cfg.problem
    g_fine = sample_circulant(driver_grid(p, finest), cfg.hurst, p.m, seed=cfg.seed)
    table = convergence_study(p, g_fine, levels, cfg.solver)
    payload = {
        "levels": table.levels,
        "errors": table.errors,
        "empirical_order": table.empirical_order,
        "finest": finest,
        "seed": cfg.seed,
    }
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_json(out, payload)
    print(json.dumps(payload, default=_json_default))
    return 0


def cmd_audit(args) -> int:
    cfg = load_config(args.config)
    d = cfg.problem.d
    box = ([args.box_lo] * d, [args.box_hi] * d)
    report = hypothesis_audit(cfg.problem.coeffs, box,
                              n_samples=args.samples, seed=cfg.seed,
                              delay=cfg.problem.r)
    payload = dataclasses.asdict(report)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_json(out, payload)
    print(json.dumps(payload, default=_json_default))
    return 0


def cmd_norms(args) -> int:
    f = _read_path_csv(Path(args.input))
    reports = {
        f"component_{i + 1}": norm_report(f.component(i), args.alpha,
                                          lambda_weight=getattr(args, "lambda")).to_dict()
        for i in range(f.dim)
    }
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _write_json(out, reports)
    print(json.dumps(reports, default=_json_default))
    return 0


# --- entry point ----------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refsde",
        description="Simulate reflected delay equations driven by fractional noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configured Monte Carlo simulation")
    p.add_argument("config")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory override")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("fbm", help="emit fractional Brownian driver paths as CSV")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("cholesky", "circulant"), default="circulant")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--allow-h-half", action="store_true",
                   help="accept H = 1/2 (testing only)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_fbm)

    p = sub.add_parser("skorokhod", help="reflect a free path from CSV")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_skorokhod)

    p = sub.add_parser("converge", help="self-convergence study on one shared driver")
    p.add_argument("config")
    p.add_argument("--levels", required=True, help="comma-separated steps per delay")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_converge)

    p = sub.add_parser("audit", help="sample-based estimates of coefficient regularity")
    p.add_argument("config")
    p.add_argument("--box-lo", type=float, default=0.0)
    p.add_argument("--box-hi", type=float, default=2.0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("norms", help="fractional norm battery of a CSV path")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda", type=float, default=0.0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_norms)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
