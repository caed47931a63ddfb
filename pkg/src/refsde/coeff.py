"""Declarative drift/diffusion coefficients.

A small expression language covers the representable coefficient class:
constants, named parameters, current state x1..xd, delayed state
xd1..xdd, running sups s1..sd of |x_i| over the visible history, the
unary functions sin/cos/exp/abs, and infix arithmetic with ^ (or **) for
powers.  Diffusion expressions may only reference t and the delayed
state.  Arbitrary hereditary functionals can still be injected
programmatically wherever a drift evaluator is accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .young import HistoryView

__all__ = [
    "ExprSyntaxError",
    "Const",
    "Param",
    "Var",
    "Unary",
    "Binary",
    "parse_expr",
    "print_expr",
    "eval_expr",
    "DeclaredMeta",
    "CoefficientSet",
    "eval_drift",
    "eval_diffusion",
    "AuditReport",
    "hypothesis_audit",
]

UNARY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}
BINARY_OPS = ("+", "-", "*", "/", "^")


class ExprSyntaxError(ValueError):
    """Malformed expression; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # sin | cos | exp | abs | neg
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    left: object
    right: object


def drift_variables(d: int) -> set[str]:
    names = {"t"}
    for i in range(1, d + 1):
        names.update({f"x{i}", f"xd{i}", f"s{i}"})
    return names


def diffusion_variables(d: int) -> set[str]:
    return {"t"} | {f"xd{i}" for i in range(1, d + 1)}


# --- tokenizer / parser -------------------------------------------------

_TOKEN_CHARS = set("+-*/^()")


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
        elif source.startswith("**", i):
            tokens.append(("op", "^", i))
            i += 2
        elif ch in _TOKEN_CHARS:
            kind = "op" if ch in "+-*/^" else ch
            tokens.append((kind, ch, i))
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] in ".eE" or
                             (source[j] in "+-" and j > i and source[j - 1] in "eE")):
                j += 1
            try:
                value = float(source[i:j])
            except ValueError:
                raise ExprSyntaxError(f"bad numeric literal {source[i:j]!r}", i) from None
            tokens.append(("num", source[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, params: dict, variables: set[str]):
        self.tokens = tokens
        self.pos = 0
        self.params = params
        self.variables = variables

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, value=None):
        tok = self.advance()
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise ExprSyntaxError(f"expected {value or kind}, got {tok[1] or 'end of input'}", tok[2])
        return tok

    def parse(self):
        node = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected trailing input {tok[1]!r}", tok[2])
        return node

    def sum(self):
        node = self.product()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            node = Binary(op, node, self.product())
        return node

    def product(self):
        node = self.power()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            node = Binary(op, node, self.power())
        return node

    def power(self):
        base = self.unary()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return Binary("^", base, self.power())  # right associative
        return base

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Unary("neg", self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.advance()
            return self.unary()
        return self.atom()

    def atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Const(float(value))
        if kind == "(":
            node = self.sum()
            self.expect(")")
            return node
        if kind == "name":
            if self.peek()[0] == "(":
                if value not in UNARY_FUNCS:
                    raise ExprSyntaxError(f"unknown function {value!r}", offset)
                self.advance()
                arg = self.sum()
                self.expect(")")
                return Unary(value, arg)
            if value in self.variables:
                return Var(value)
            if value in self.params:
                return Param(value)
            raise ExprSyntaxError(f"unknown identifier {value!r}", offset)
        raise ExprSyntaxError(f"unexpected token {value!r}" if value else "unexpected end of input", offset)


def parse_expr(source: str, params: dict | None = None, d: int = 1,
               variables: set[str] | None = None):
    """Parse an expression over the drift variables for dimension d.

    Pass variables=diffusion_variables(d) to restrict to the diffusion
    subclass.  Raises ExprSyntaxError with the byte offset on failure.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    allowed = variables if variables is not None else drift_variables(d)
    return _Parser(_tokenize(source), params or {}, allowed).parse()


# --- canonical printer --------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _print(node, parent_prec: int, right_side: bool) -> str:
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, (Param, Var)):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = _print(node.arg, 4, False)
            text = f"-{inner}"
            return f"({text})" if parent_prec > 1 or right_side else text
        return f"{node.op}({_print(node.arg, 0, False)})"
    prec = _PRECEDENCE[node.op]
    left = _print(node.left, prec, False)
    right = _print(node.right, prec + (0 if node.op == "^" else 1), True)
    if node.op == "^":
        left = _print(node.left, prec + 1, False)
        right = _print(node.right, prec, True)
    text = f"{left} {node.op} {right}"
    return f"({text})" if prec < parent_prec else text


def print_expr(node) -> str:
    """Canonical textual form; parse_expr(print_expr(ast)) == ast."""
    return _print(node, 0, False)


# --- evaluation ---------------------------------------------------------

def eval_expr(node, env: dict, params: dict):
    """Evaluate an AST; env values may be scalars or broadcastable arrays."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Param):
        return params[node.name]
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        arg = eval_expr(node.arg, env, params)
        if node.op == "neg":
            return -arg
        return UNARY_FUNCS[node.op](arg)
    left = eval_expr(node.left, env, params)
    right = eval_expr(node.right, env, params)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        # IEEE semantics (1/0 -> inf) so the callers' finite checks can
        # report which component blew up instead of a bare ZeroDivisionError.
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.true_divide(left, right)
    with np.errstate(invalid="ignore"):
        return np.float_power(left, right)


def collect_vars(node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return collect_vars(node.arg)
    if isinstance(node, Binary):
        return collect_vars(node.left) | collect_vars(node.right)
    return set()


# --- coefficient sets ---------------------------------------------------

@dataclass(frozen=True)
class DeclaredMeta:
    """User-declared regularity constants; authoritative for diagnostics."""

    M0: float = 1.0
    beta: float = 1.0
    L0: float = 1.0
    K0: float = 1.0
    gamma: float = 1.0
    b0_bound: float = 1.0

    def __post_init__(self) -> None:
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class CoefficientSet:
    """Drift vector and diffusion matrix expressions for a d-dim state.

    Diffusion entries may depend only on t and the delayed state, mirroring
    the sigma(s, x(s-r)) structure of the reflected delay equation.
    """

    d: int
    m: int
    drift: tuple
    diffusion: tuple  # d rows of m expressions
    params: dict = field(default_factory=dict)
    meta: DeclaredMeta = field(default_factory=DeclaredMeta)

    def __post_init__(self) -> None:
        if len(self.drift) != self.d:
            raise ValueError(f"expected {self.d} drift expressions, got {len(self.drift)}")
        if len(self.diffusion) != self.d or any(len(row) != self.m for row in self.diffusion):
            raise ValueError(f"diffusion must be a {self.d}x{self.m} expression matrix")
        allowed = diffusion_variables(self.d)
        for i, row in enumerate(self.diffusion):
            for j, expr in enumerate(row):
                bad = collect_vars(expr) - allowed
                if bad:
                    raise ValueError(
                        f"diffusion entry ({i + 1},{j + 1}) uses non-delayed variables {sorted(bad)}"
                    )

    @classmethod
    def from_strings(cls, drift: list[str], diffusion: list[list[str]],
                     params: dict | None = None, meta: DeclaredMeta | None = None) -> "CoefficientSet":
        params = dict(params or {})
        d = len(drift)
        m = len(diffusion[0]) if diffusion else 0
        drift_ast = tuple(parse_expr(s, params, d) for s in drift)
        diff_ast = tuple(
            tuple(parse_expr(s, params, d, variables=diffusion_variables(d)) for s in row)
            for row in diffusion
        )
        return cls(d=d, m=m, drift=drift_ast, diffusion=diff_ast,
                   params=params, meta=meta or DeclaredMeta())


def _drift_env(t, hist: HistoryView, delay: float, d: int) -> dict:
    current = hist.current()
    delayed = hist.at(t - delay)
    sups = hist.sup_abs()
    env = {"t": t}
    for i in range(d):
        env[f"x{i + 1}"] = current[i]
        env[f"xd{i + 1}"] = delayed[i]
        env[f"s{i + 1}"] = sups[i]
    return env


def eval_drift(c: CoefficientSet, t: float, hist: HistoryView, delay: float) -> np.ndarray:
    """Drift vector b(t, x-history); causal by construction of HistoryView."""
    env = _drift_env(t, hist, delay, c.d)
    out = np.empty(c.d)
    for i, expr in enumerate(c.drift):
        v = eval_expr(expr, env, c.params)
        if not np.isfinite(v):
            raise ValueError(f"drift component {i + 1} evaluated to {v} at t={t}")
        out[i] = v
    return out


def eval_diffusion(c: CoefficientSet, t, x_delayed) -> np.ndarray:
    """Diffusion matrix sigma(t, x(t-r)).

    Scalar t with x_delayed of shape (d,) gives a (d, m) matrix; an array
    t of shape (K,) with x_delayed (K, d) gives a (K, d, m) batch.
    """
    x_delayed = np.asarray(x_delayed, dtype=float)
    batched = x_delayed.ndim == 2
    env = {"t": t}
    for i in range(c.d):
        env[f"xd{i + 1}"] = x_delayed[:, i] if batched else x_delayed[i]
    shape = (len(np.atleast_1d(t)), c.d, c.m) if batched else (c.d, c.m)
    out = np.empty(shape)
    for i, row in enumerate(c.diffusion):
        for j, expr in enumerate(row):
            v = eval_expr(expr, env, c.params)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"diffusion entry ({i + 1},{j + 1}) evaluated non-finite at t={t}")
            if batched:
                out[:, i, j] = v
            else:
                out[i, j] = v
    return out


# --- hypothesis audit ---------------------------------------------------

@dataclass
class AuditReport:
    """Sampled estimates of the declared regularity constants.

    Estimates are noisy lower bounds; a flag is set when an estimate
    exceeds its declared value by more than 5%.
    """

    m0_spatial: float
    m0_time: float | None
    beta: float | None
    lipschitz_drift: float
    k0: float
    gamma: float
    b0_l_one_over_alpha: float
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "m0_spatial": self.m0_spatial,
            "m0_time": self.m0_time,
            "beta": self.beta,
            "lipschitz_drift": self.lipschitz_drift,
            "k0": self.k0,
            "gamma": self.gamma,
            "b0_l_one_over_alpha": self.b0_l_one_over_alpha,
            "flags": self.flags,
        }


def _random_history(rng, lo, hi, times) -> np.ndarray:
    return rng.uniform(lo, hi, size=(len(times), len(lo)))


def hypothesis_audit(c: CoefficientSet, box, n_samples: int = 200, seed: int = 0,
                     t_max: float = 1.0, delay: float = 1.0, alpha: float = 0.25) -> AuditReport:
    """Numerical audit of the regularity hypotheses against declared_meta.

    box is a (lo, hi) pair of length-d state bounds.  Report-only: flags
    mark declared constants that sampling exceeds by > 5%, nothing raises.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if lo.shape != (c.d,) or hi.shape != (c.d,) or np.any(hi <= lo):
        raise ValueError("box must be a bounded (lo, hi) pair of length d")
    rng = np.random.default_rng(seed)

    # (H1).1 spatial Lipschitz constant of sigma
    m0_spatial = 0.0
    for _ in range(n_samples):
        t = rng.uniform(0.0, t_max)
        x, y = rng.uniform(lo, hi, (2, c.d))
        dist = float(np.linalg.norm(x - y))
        if dist > 1e-12:
            quot = np.linalg.norm(eval_diffusion(c, t, x) - eval_diffusion(c, t, y)) / dist
            m0_spatial = max(m0_spatial, float(quot))

    # (H1).2 time Hoelder: log-log fit of max increment vs lag
    lags = t_max * 2.0 ** -np.arange(1, 9)
    max_incr = np.zeros_like(lags)
    for _ in range(max(1, n_samples // 8)):
        x = rng.uniform(lo, hi, c.d)
        t = rng.uniform(0.0, t_max - lags[0])
        for k, lag in enumerate(lags):
            d_sig = np.linalg.norm(eval_diffusion(c, t + lag, x) - eval_diffusion(c, t, x))
            max_incr[k] = max(max_incr[k], float(d_sig))
    if np.all(max_incr > 0.0):
        beta_est = float(np.polyfit(np.log(lags), np.log(max_incr), 1)[0])
        m0_time = float(np.max(max_incr / lags ** min(beta_est, c.meta.beta)))
    else:
        beta_est, m0_time = None, None  # no detectable time dependence

    # (H2).1 drift Lipschitz over random histories inside the box
    hist_grid = np.linspace(-delay, t_max, 17)
    k_min = int(np.searchsorted(hist_grid, 0.0))  # keep t - delay on the grid
    lip = 0.0
    for _ in range(max(1, n_samples // 4)):
        hx = _random_history(rng, lo, hi, hist_grid)
        hy = _random_history(rng, lo, hi, hist_grid)
        k = int(rng.integers(max(k_min, 1), len(hist_grid)))
        t = float(hist_grid[k])
        bx = eval_drift(c, t, HistoryView(hx, hist_grid, k), delay)
        by = eval_drift(c, t, HistoryView(hy, hist_grid, k), delay)
        denom = float(np.abs(hx[: k + 1] - hy[: k + 1]).max())
        if denom > 1e-12:
            lip = max(lip, float(np.linalg.norm(bx - by)) / denom)

    # (H2).2 residual b0(t) = |b(t, zero history)|, L^(1/alpha) norm
    zeros = np.zeros((17, c.d))
    taus = np.linspace(0.0, t_max, 65)
    b0 = np.array([
        np.linalg.norm(
            eval_drift(c, float(tau), HistoryView(zeros, np.linspace(tau - delay, tau, 17), 16), delay)
        )
        for tau in taus
    ])
    rho = 1.0 / alpha
    b0_norm = float(np.trapezoid(b0 ** rho, taus) ** alpha)

    # (H3) growth: log-log fit of |sigma| against |x| at large radii
    radii = np.logspace(0.0, 3.0, 10)
    growth = np.zeros_like(radii)
    for k, radius in enumerate(radii):
        for _ in range(max(1, n_samples // 10)):
            direction = rng.standard_normal(c.d)
            direction /= max(np.linalg.norm(direction), 1e-12)
            t = rng.uniform(0.0, t_max)
            growth[k] = max(growth[k], float(np.linalg.norm(eval_diffusion(c, t, radius * direction))))
    if np.all(growth > 0.0):
        gamma_est = float(np.clip(np.polyfit(np.log(radii), np.log(growth), 1)[0], 0.0, 1.0))
    else:
        gamma_est = 0.0
    k0_est = float(np.max(growth / (1.0 + radii ** c.meta.gamma)))

    meta = c.meta
    flags = {
        "m0": m0_spatial > 1.05 * meta.M0,
        "beta": beta_est is not None and beta_est < 0.95 * meta.beta,
        "l0": lip > 1.05 * meta.L0,
        "k0": k0_est > 1.05 * meta.K0,
        "gamma": gamma_est > 1.05 * meta.gamma + 0.05,
        "b0": b0_norm > 1.05 * meta.b0_bound,
    }
    return AuditReport(
        m0_spatial=m0_spatial,
        m0_time=m0_time,
        beta=beta_est,
        lipschitz_drift=lip,
        k0=k0_est,
        gamma=gamma_est,
        b0_l_one_over_alpha=b0_norm,
        flags=flags,
    )
