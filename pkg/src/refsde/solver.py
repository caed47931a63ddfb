"""Pathwise solvers for the reflected delay equation.

Two schemes for a fixed driver g:

* ``solve_euler``: explicit forward recursion in z with the running-max
  regulator applied incrementally each step, so the drift's history
  argument always sees reflected values.
* ``solve_picard``: the interval-by-interval fixed-point construction.
  On [nr, (n+1)r] the Young integral of the diffusion is computed once
  (its argument is the already-fixed solution up to nr) and the drift +
  reflection map is iterated to a sup-norm fixed point.

``solve_stochastic`` wraps either scheme with independent fBm drivers
per path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .coeff import CoefficientSet, eval_diffusion, eval_drift
from .fbm import sample_circulant, _hurst_value
from .grids import SamplePath, TimeGrid
from .young import HistoryView

__all__ = [
    "Problem",
    "SolverConfig",
    "ReflectedSolution",
    "MonteCarloResult",
    "BlowUpError",
    "PicardConvergenceError",
    "eta_from_callable",
    "driver_grid",
    "solve",
    "solve_euler",
    "solve_picard",
    "solve_stochastic",
    "convergence_study",
    "check_invariants",
]


class BlowUpError(RuntimeError):
    """Non-finite state during time stepping; carries the step index."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step} (t={t})")
        self.step = step


class PicardConvergenceError(RuntimeError):
    """Fixed-point iteration exhausted max_iter; carries the last residual."""

    def __init__(self, interval: int, residual: float, max_iter: int):
        super().__init__(
            f"Picard iteration on delay interval {interval} did not reach tolerance "
            f"within {max_iter} iterations (last residual {residual:.3e})"
        )
        self.interval = interval
        self.residual = residual


@dataclass(frozen=True)
class Problem:
    """Reflected delay equation data: initial segment, coefficients, horizon."""

    eta: SamplePath  # on [-r, 0], d components
    coeffs: CoefficientSet
    r: float
    T: float
    H: float | None = None  # used only when the driver is sampled internally

    def __post_init__(self) -> None:
        if self.r <= 0.0:
            raise ValueError(f"delay must be positive, got {self.r}")
        ratio = self.T / self.r
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(f"horizon must be an integer multiple of the delay, got T/r={ratio}")
        g = self.eta.grid
        if abs(g.t0 + self.r) > 1e-9 * self.r or abs(g.t1) > 1e-12:
            raise ValueError(f"initial segment must live on [-r, 0], got [{g.t0}, {g.t1}]")
        if self.eta.dim != self.coeffs.d:
            raise ValueError(f"initial segment has {self.eta.dim} components, coefficients expect {self.coeffs.d}")
        if np.any(self.eta.values < 0.0):
            raise ValueError("initial segment must be non-negative componentwise")
        if self.H is not None:
            _hurst_value(self.H, allow_half=False)

    @property
    def d(self) -> int:
        return self.coeffs.d

    @property
    def m(self) -> int:
        return self.coeffs.m

    @property
    def n_intervals(self) -> int:
        return int(round(self.T / self.r))


@dataclass(frozen=True)
class SolverConfig:
    steps_per_delay: int = 256
    scheme: str = "euler"
    picard_tol: float = 1e-10
    picard_max_iter: int = 100
    seed: int = 0
    initial_iterate: str = "constant"  # or "linear"

    def __post_init__(self) -> None:
        if self.steps_per_delay < 4:
            raise ValueError(f"steps_per_delay must be >= 4, got {self.steps_per_delay}")
        if self.scheme not in ("euler", "picard"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.picard_tol <= 0.0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be positive")
        if self.initial_iterate not in ("constant", "linear"):
            raise ValueError(f"unknown initial iterate {self.initial_iterate!r}")


@dataclass(frozen=True)
class ReflectedSolution:
    """Solution triple on [-r, T] plus solver metadata.

    y and z are zero/eta-extended on [-r, 0]; x = z + y holds bit-exactly
    at every grid point of [0, T].
    """

    x: SamplePath
    y: SamplePath
    z: SamplePath
    driver: SamplePath
    iterations_per_interval: list[int] = field(default_factory=list)
    final_residuals: list[float] = field(default_factory=list)

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid


def eta_from_callable(fn: Callable[[float], np.ndarray], r: float, n_r: int, d: int) -> SamplePath:
    """Sample an initial-segment function on the solver grid over [-r, 0]."""
    grid = TimeGrid(-r, 0.0, n_r)
    vals = np.array([np.broadcast_to(fn(float(t)), (d,)) for t in grid.times], dtype=float)
    return SamplePath(grid, vals)


def driver_grid(p: Problem, n_r: int) -> TimeGrid:
    return TimeGrid(0.0, p.T, p.n_intervals * n_r)


def _check_setup(p: Problem, g: SamplePath, cfg: SolverConfig) -> None:
    n_r = cfg.steps_per_delay
    if p.eta.grid.n_steps != n_r:
        raise ValueError(
            f"initial segment is sampled at {p.eta.grid.n_steps} steps per delay, config wants {n_r}"
        )
    want = driver_grid(p, n_r)
    got = g.grid
    if got.n_steps != want.n_steps or abs(got.t0) > 1e-12 or abs(got.t1 - want.t1) > 1e-9:
        raise ValueError(f"driver grid {got} does not match problem grid {want}")
    if g.dim != p.m:
        raise ValueError(f"driver has {g.dim} columns, problem expects {p.m}")


def _full_grid(p: Problem, n_r: int) -> TimeGrid:
    return TimeGrid(-p.r, p.T, (p.n_intervals + 1) * n_r)


def _package(p: Problem, g: SamplePath, grid: TimeGrid, x, y, z, iters, residuals) -> ReflectedSolution:
    return ReflectedSolution(
        x=SamplePath(grid, x),
        y=SamplePath(grid, y),
        z=SamplePath(grid, z),
        driver=g,
        iterations_per_interval=iters,
        final_residuals=residuals,
    )


def _batched_diffusion_increments(p: Problem, times, x, dg, i0: int, i1: int, offset: int) -> np.ndarray:
    """Left-point diffusion increments sigma(t_j, x(t_j - r)) dg_j on [i0, i1).

    The delayed argument lies in the already-fixed part of the path, so
    the whole interval is evaluated in one batch.
    """
    n_r = offset
    idx = np.arange(i0, i1)
    sig = eval_diffusion(p.coeffs, times[idx], x[idx - n_r])  # (K, d, m)
    return np.einsum("kdm,km->kd", sig, dg[idx - offset])


def solve_euler(p: Problem, g: SamplePath, cfg: SolverConfig) -> ReflectedSolution:
    """Explicit scheme: left-point drift and diffusion, incremental reflection."""
    _check_setup(p, g, cfg)
    n_r = cfg.steps_per_delay
    grid = _full_grid(p, n_r)
    times = grid.times
    dt = grid.dt
    offset = n_r
    total = grid.n_steps
    d = p.d

    x = np.zeros((total + 1, d))
    z = np.zeros((total + 1, d))
    y = np.zeros((total + 1, d))
    x[: offset + 1] = p.eta.values
    z[: offset + 1] = p.eta.values
    sups = np.empty((total + 1, d))
    np.maximum.accumulate(np.abs(p.eta.values), axis=0, out=sups[: offset + 1])

    dg = np.diff(g.values, axis=0)
    for interval in range(p.n_intervals):
        i0 = offset + interval * n_r
        i1 = i0 + n_r
        sig_dg = _batched_diffusion_increments(p, times, x, dg, i0, i1, offset)
        for k in range(i0, i1):
            hist = HistoryView(x, times, k, sup_cache=sups)
            b = eval_drift(p.coeffs, float(times[k]), hist, p.r)
            z[k + 1] = z[k] + b * dt + sig_dg[k - i0]
            if not np.all(np.isfinite(z[k + 1])):
                raise BlowUpError(k + 1 - offset, float(times[k + 1]))
            y[k + 1] = np.maximum(y[k], np.maximum(-z[k + 1], 0.0))
            x[k + 1] = z[k + 1] + y[k + 1]
            sups[k + 1] = np.maximum(sups[k], np.abs(x[k + 1]))
    return _package(p, g, grid, x, y, z, [], [])


def _initial_iterate(kind: str, x: np.ndarray, i0: int, n_r: int, dt: float) -> np.ndarray:
    if kind == "constant":
        return np.tile(x[i0], (n_r + 1, 1))
    slope = (x[i0] - x[i0 - 1]) / dt
    taus = (np.arange(n_r + 1) * dt)[:, None]
    return np.maximum(x[i0] + slope * taus, 0.0)


def solve_picard(p: Problem, g: SamplePath, cfg: SolverConfig) -> ReflectedSolution:
    """Interval-by-interval fixed-point construction.

    Per delay interval the diffusion Young term is frozen (left-point, its
    argument is the previous interval's solution) and the map
    u -> eta(0) + drift integral + Young term + regulator is iterated to a
    sup-norm fixed point from the configured initial iterate.
    """
    _check_setup(p, g, cfg)
    n_r = cfg.steps_per_delay
    grid = _full_grid(p, n_r)
    times = grid.times
    dt = grid.dt
    offset = n_r
    total = grid.n_steps
    d = p.d

    x = np.zeros((total + 1, d))
    z = np.zeros((total + 1, d))
    y = np.zeros((total + 1, d))
    x[: offset + 1] = p.eta.values
    z[: offset + 1] = p.eta.values
    sups = np.empty((total + 1, d))
    np.maximum.accumulate(np.abs(p.eta.values), axis=0, out=sups[: offset + 1])

    dg = np.diff(g.values, axis=0)
    iters: list[int] = []
    residuals: list[float] = []
    for interval in range(p.n_intervals):
        i0 = offset + interval * n_r
        i1 = i0 + n_r
        incr = _batched_diffusion_increments(p, times, x, dg, i0, i1, offset)
        young_cum = np.zeros((n_r + 1, d))
        np.cumsum(incr, axis=0, out=young_cum[1:])

        u = _initial_iterate(cfg.initial_iterate, x, i0, n_r, dt)
        u[0] = x[i0]
        y_prev = y[i0]
        residual = np.inf
        n_iter = 0
        for n_iter in range(1, cfg.picard_max_iter + 1):
            x[i0 : i1 + 1] = u
            np.maximum.accumulate(np.maximum(sups[i0 - 1], np.abs(u)), axis=0, out=sups[i0 : i1 + 1])
            bvals = np.empty((n_r + 1, d))
            for j in range(n_r + 1):
                hist = HistoryView(x, times, i0 + j, sup_cache=sups)
                bvals[j] = eval_drift(p.coeffs, float(times[i0 + j]), hist, p.r)
            drift_cum = np.zeros((n_r + 1, d))
            np.cumsum(0.5 * dt * (bvals[:-1] + bvals[1:]), axis=0, out=drift_cum[1:])
            z_int = z[i0] + drift_cum + young_cum
            if not np.all(np.isfinite(z_int)):
                raise BlowUpError(i1 - offset, float(times[i1]))
            y_int = np.maximum(y_prev, np.maximum.accumulate(np.maximum(-z_int, 0.0), axis=0))
            u_new = z_int + y_int
            residual = float(np.max(np.abs(u_new - u)))
            u = u_new
            if residual <= cfg.picard_tol:
                break
        else:
            raise PicardConvergenceError(interval, residual, cfg.picard_max_iter)
        if residual > cfg.picard_tol:
            raise PicardConvergenceError(interval, residual, cfg.picard_max_iter)
        x[i0 : i1 + 1] = u
        z[i0 : i1 + 1] = z[i0] + drift_cum + young_cum
        y[i0 : i1 + 1] = np.maximum(y_prev, np.maximum.accumulate(np.maximum(-z[i0 : i1 + 1], 0.0), axis=0))
        np.maximum.accumulate(np.maximum(sups[i0 - 1], np.abs(u)), axis=0, out=sups[i0 : i1 + 1])
        iters.append(n_iter)
        residuals.append(residual)
    return _package(p, g, grid, x, y, z, iters, residuals)


def solve(p: Problem, g: SamplePath, cfg: SolverConfig) -> ReflectedSolution:
    fn = solve_euler if cfg.scheme == "euler" else solve_picard
    return fn(p, g, cfg)


@dataclass
class MonteCarloResult:
    """Per-path solutions (index order) and collected per-path failures."""

    solutions: list
    failures: dict

    @property
    def n_ok(self) -> int:
        return sum(s is not None for s in self.solutions)


def solve_stochastic(p: Problem, cfg: SolverConfig, n_paths: int) -> MonteCarloResult:
    """Sample one fBm driver per path (streams keyed by (seed, path index))
    and solve pathwise; one path's failure does not abort the others."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if p.H is None:
        raise ValueError("problem carries no Hurst parameter for internal driver sampling")
    grid = driver_grid(p, cfg.steps_per_delay)
    solutions: list = [None] * n_paths
    failures: dict = {}
    for i in range(n_paths):
        try:
            g = sample_circulant(grid, p.H, p.m, seed=(cfg.seed, i))
            solutions[i] = solve(p, g, cfg)
        except Exception as exc:  # collected, reported per path
            failures[i] = exc
    return MonteCarloResult(solutions=solutions, failures=failures)


@dataclass
class ConvergenceTable:
    levels: list[int]
    errors: list[float]
    empirical_order: float

    def rows(self) -> list[tuple[int, float]]:
        return list(zip(self.levels, self.errors))


def convergence_study(p: Problem, g_fine: SamplePath, levels: list[int],
                      cfg: SolverConfig) -> ConvergenceTable:
    """Self-convergence against the finest level on one shared driver.

    The driver (and the initial segment) must be sampled at the finest
    level; coarser levels subsample them, so every level sees the same
    realization.
    """
    if len(levels) < 3:
        raise ValueError("need at least 3 refinement levels")
    if sorted(levels) != list(levels):
        raise ValueError("levels must be ascending")
    finest = levels[-1]
    if p.eta.grid.n_steps != finest:
        raise ValueError("initial segment must be sampled at the finest level")
    for lvl in levels:
        if finest % lvl:
            raise ValueError(f"level {lvl} does not divide the finest level {finest}")

    def run(n_r: int) -> ReflectedSolution:
        stride = finest // n_r
        eta = SamplePath(TimeGrid(-p.r, 0.0, n_r), p.eta.values[::stride])
        g = SamplePath(driver_grid(p, n_r), g_fine.values[::stride])
        p_lvl = replace(p, eta=eta)
        return solve(p_lvl, g, replace(cfg, steps_per_delay=n_r))

    ref = run(finest)
    errors = []
    for lvl in levels[:-1]:
        stride = finest // lvl
        sol = run(lvl)
        errors.append(float(np.max(np.abs(sol.x.values - ref.x.values[::stride]))))
    slope = np.polyfit(np.log([p.r / lvl for lvl in levels[:-1]]), np.log(errors), 1)[0]
    return ConvergenceTable(levels=list(levels[:-1]), errors=errors, empirical_order=float(slope))


def check_invariants(sol: ReflectedSolution, x_floor: float = -1e-12) -> dict:
    """Reflection invariants of a solution; used by tests and the CLI manifest."""
    grid = sol.grid
    t0_idx = grid.index_of(0.0)
    x = sol.x.values
    y = sol.y.values
    z = sol.z.values
    dy = np.diff(y[t0_idx:], axis=0)
    regul = np.maximum.accumulate(np.maximum(-z[t0_idx:], 0.0), axis=0)
    residual = float(np.max((x[t0_idx:-1] * dy).sum(axis=0), initial=0.0))
    total_increase = float(np.max(y[-1] - y[t0_idx]))
    bound = 10.0 * grid.dt * float(np.abs(x).max()) * max(total_increase, grid.dt)
    return {
        "x_nonnegative": bool(x.min() >= x_floor),
        "y_starts_at_zero": bool(np.all(y[t0_idx] == 0.0)),
        "y_nondecreasing": bool(np.all(dy >= 0.0)),
        "x_equals_z_plus_y": bool(np.array_equal(x[t0_idx:], z[t0_idx:] + y[t0_idx:])),
        "regulator_consistent": bool(np.array_equal(regul, y[t0_idx:])),
        "complementarity_residual": residual,
        "complementarity_ok": bool(residual <= bound),
        "min_x": float(x.min()),
    }
