"""Safe elementwise evaluation of activation trees and their derivatives.

Each operator is a small function returning its value and local derivative;
:func:`forward` walks the tree once and chains them. Singular outputs
(``logeps`` at ``x = -eps``, ``diveps`` with denominator ``-eps``) are kept
and reported, not masked.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import special

from .expr import BINARY_OPS, Leaf, Node, Unary, unary_alphabet

_TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


@dataclass(frozen=True)
class SafetyPolicy:
    epsilon: float = 1e-7
    exp_clamp: float = 60.0
    deriv_cap: float = 1e6
    atanh_margin: float = 1e-7

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"{name} must be strictly positive, got {v}")
        if not self.atanh_margin < 1:
            raise ValueError("atanh_margin must be < 1")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_POLICY = SafetyPolicy()


@dataclass
class EvalReport:
    values: np.ndarray
    finite: bool
    saturated_fraction: float


# Each unary returns (value, local derivative, clamp mask or None).
UnaryFn = Callable[[np.ndarray, SafetyPolicy], tuple]
BinaryFn = Callable[[np.ndarray, np.ndarray, SafetyPolicy], tuple]


def _clip_exp(x, p):
    c = np.clip(x, -p.exp_clamp, p.exp_clamp)
    return c, np.abs(x) > p.exp_clamp


def _exp(x, p):
    c, sat = _clip_exp(x, p)
    v = np.exp(c)
    return v, v, sat


def _sinh(x, p):
    c, sat = _clip_exp(x, p)
    return np.sinh(c), np.cosh(c), sat


def _cosh(x, p):
    c, sat = _clip_exp(x, p)
    return np.cosh(c), np.sinh(c), sat


def _softplus(x, p):
    v = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return v, special.expit(x), None


def _sqrt(x, p):
    neg = x < 0
    v = np.sqrt(np.where(neg, 0.0, x))
    with np.errstate(divide="ignore"):
        d = np.where(x > 0, 0.5 / np.where(x > 0, v, 1.0), 0.0)
    return v, d, neg


def _logeps(x, p):
    s = x + p.epsilon
    v = np.log(np.abs(s))
    return v, 1.0 / s, None


def _atanh(x, p):
    lim = 1.0 - p.atanh_margin
    c = np.clip(x, -lim, lim)
    return np.arctanh(c), 1.0 / (1.0 - c * c), np.abs(x) > lim


def _sigmoid(x, p):
    s = special.expit(x)
    return s, s * (1.0 - s), None


def _sinc(x, p):
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    x2 = x * x
    v = np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)
    d = np.where(small, -x / 3.0 + x * x2 / 30.0,
                 (safe * np.cos(safe) - np.sin(safe)) / (safe * safe))
    return v, d, None


def _const(c):
    def fn(x, p):
        return np.full_like(x, c), np.zeros_like(x), None
    return fn


UNARY: dict[str, UnaryFn] = {
    "zero": _const(0.0),
    "one": _const(1.0),
    "id": lambda x, p: (x, np.ones_like(x), None),
    "neg": lambda x, p: (-x, -np.ones_like(x), None),
    "abs": lambda x, p: (np.abs(x), np.sign(x), None),
    "square": lambda x, p: (x * x, 2.0 * x, None),
    "cube": lambda x, p: (x * x * x, 3.0 * x * x, None),
    "sqrt": _sqrt,
    "exp": _exp,
    "gauss": lambda x, p: (np.exp(-x * x), -2.0 * x * np.exp(-x * x), None),
    "softplus": _softplus,
    "logeps": _logeps,
    "sin": lambda x, p: (np.sin(x), np.cos(x), None),
    "sinh": _sinh,
    "asinh": lambda x, p: (np.arcsinh(x), 1.0 / np.sqrt(1.0 + x * x), None),
    "cos": lambda x, p: (np.cos(x), -np.sin(x), None),
    "cosh": _cosh,
    "tanh": lambda x, p: (np.tanh(x), 1.0 - np.tanh(x) ** 2, None),
    "atanh": _atanh,
    "relu": lambda x, p: (np.maximum(x, 0.0), (x > 0).astype(float), None),
    "nmin": lambda x, p: (np.minimum(x, 0.0), (x <= 0).astype(float), None),
    "sigmoid": _sigmoid,
    "erf": lambda x, p: (special.erf(x), _TWO_OVER_SQRT_PI * np.exp(-x * x), None),
    "sinc": _sinc,
    "atan": lambda x, p: (np.arctan(x), 1.0 / (1.0 + x * x), None),
}


def _diveps(a, b, p):
    s = b + p.epsilon
    inv = 1.0 / s
    return a * inv, inv, -a * inv * inv


def _max(a, b, p):
    first = a >= b
    return np.where(first, a, b), first.astype(float), (~first).astype(float)


def _min(a, b, p):
    first = a <= b
    return np.where(first, a, b), first.astype(float), (~first).astype(float)


# Each binary returns (value, d/da, d/db).
BINARY: dict[str, BinaryFn] = {
    "add": lambda a, b, p: (a + b, np.ones_like(a), np.ones_like(b)),
    "sub": lambda a, b, p: (a - b, np.ones_like(a), -np.ones_like(b)),
    "mul": lambda a, b, p: (a * b, b, a),
    "diveps": _diveps,
    "max": _max,
    "min": _min,
}

assert set(UNARY) == set(unary_alphabet(True)) and set(BINARY) == set(BINARY_OPS)


def _cap(d: np.ndarray, cap: float) -> np.ndarray:
    # NaN survives clipping; only magnitude is limited
    return np.clip(d, -cap, cap)


def forward(tree: Node, x: np.ndarray, policy: SafetyPolicy = DEFAULT_POLICY,
            need_deriv: bool = True):
    """Return ``(value, derivative or None, clamp mask)`` for every element of ``x``."""
    saturated = np.zeros(np.shape(x), dtype=bool)

    def walk(node: Node):
        nonlocal saturated
        if isinstance(node, Leaf):
            return x, (np.ones_like(x) if need_deriv else None)
        if isinstance(node, Unary):
            cv, cd = walk(node.child)
            v, d, sat = UNARY[node.op](cv, policy)
            if sat is not None:
                saturated |= sat
            if not need_deriv:
                return v, None
            return v, _cap(_cap(d, policy.deriv_cap) * cd, policy.deriv_cap)
        lv, ld = walk(node.left)
        rv, rd = walk(node.right)
        v, da, db = BINARY[node.op](lv, rv, policy)
        if not need_deriv:
            return v, None
        da = _cap(da, policy.deriv_cap)
        db = _cap(db, policy.deriv_cap)
        return v, _cap(da * ld + db * rd, policy.deriv_cap)

    x = np.asarray(x, dtype=np.float64)
    with np.errstate(all="ignore"):
        v, d = walk(tree)
    return v, d, saturated


def eval_tree(tree: Node, inputs, policy: SafetyPolicy = DEFAULT_POLICY) -> EvalReport:
    v, _, sat = forward(tree, np.asarray(inputs, dtype=np.float64), policy, need_deriv=False)
    return EvalReport(v, bool(np.all(np.isfinite(v))), float(sat.mean()) if sat.size else 0.0)


def deriv(tree: Node, inputs, policy: SafetyPolicy = DEFAULT_POLICY) -> EvalReport:
    """Analytic d(tree)/dx. Kinks use: relu'(0)=0, nmin'(0)=1, |x|'(0)=0,
    and max/min ties credit the first argument."""
    _, d, sat = forward(tree, np.asarray(inputs, dtype=np.float64), policy)
    return EvalReport(d, bool(np.all(np.isfinite(d))), float(sat.mean()) if sat.size else 0.0)


# -- gradient checking ---------------------------------------------------------

class BadPoint(ValueError):
    pass


def _unary_loci(op: str, p: SafetyPolicy) -> list[float]:
    if op in ("abs", "relu", "nmin", "sqrt"):
        return [0.0]
    if op == "logeps":
        return [-p.epsilon]
    if op == "atanh":
        lim = 1.0 - p.atanh_margin
        return [-lim, lim]
    if op in ("exp", "sinh", "cosh"):
        return [-p.exp_clamp, p.exp_clamp]
    return []


def admissible_mask(tree: Node, points, margin: float,
                    policy: SafetyPolicy = DEFAULT_POLICY) -> tuple[np.ndarray, list[str]]:
    """Points whose every operator argument stays at least ``margin`` (in input
    units, via the local slope) away from a kink, pole or clamp boundary."""
    pts = np.asarray(points, dtype=np.float64)
    ok = np.ones(pts.shape, dtype=bool)
    problems: list[str] = []

    def flag(bad: np.ndarray, what: str) -> None:
        nonlocal ok
        if np.any(bad):
            problems.append(f"{what} at x={pts[bad].flat[0]:g}")
            ok &= ~bad

    def near(arg, slope, locus):
        return np.abs(arg - locus) <= margin * np.maximum(np.abs(slope), 1e-300)

    def walk(node: Node):
        if isinstance(node, Leaf):
            return pts, np.ones_like(pts)
        if isinstance(node, Unary):
            cv, cd = walk(node.child)
            for locus in _unary_loci(node.op, policy):
                flag(near(cv, cd, locus), f"{node.op} near {locus:g}")
            v, d, _ = UNARY[node.op](cv, policy)
            return v, d * cd
        lv, ld = walk(node.left)
        rv, rd = walk(node.right)
        if node.op in ("max", "min"):
            # a tie only breaks smoothness where the two branches have different slopes
            flag(near(lv - rv, ld - rd, 0.0) & (ld != rd), f"{node.op} tie")
        if node.op == "diveps":
            flag(near(rv, rd, -policy.epsilon), "diveps pole")
        v, da, db = BINARY[node.op](lv, rv, policy)
        return v, da * ld + db * rd

    with np.errstate(all="ignore"):
        walk(tree)
    return ok, problems


def check_admissible(tree: Node, points, h: float, policy: SafetyPolicy = DEFAULT_POLICY) -> None:
    """Raise BadPoint if any point lies within 10h of a non-smooth locus."""
    ok, problems = admissible_mask(tree, points, 10.0 * h, policy)
    if not ok.all():
        raise BadPoint("; ".join(problems[:5]))


def sample_admissible(tree: Node, n: int, lo: float, hi: float, rng, clearance: float = 0.05,
                      min_slope: float = 1e-3, policy: SafetyPolicy = DEFAULT_POLICY) -> np.ndarray:
    """``n`` uniform points in ``(lo, hi)`` kept ``clearance`` away from non-smooth
    loci. Points where the derivative is nonzero but below ``min_slope`` are
    also skipped: a relative error is meaningless next to a stationary point."""
    out: list[np.ndarray] = []
    have = 0
    for _ in range(1000):
        cand = rng.uniform(lo, hi, size=4 * n)
        ok, _ = admissible_mask(tree, cand, clearance, policy)
        d = deriv(tree, cand, policy).values
        ok &= (d == 0) | (np.abs(d) >= min_slope)
        out.append(cand[ok])
        have += int(ok.sum())
        if have >= n:
            break
    pts = np.concatenate(out)[:n]
    if len(pts) < n:
        raise BadPoint(f"could not find {n} admissible points in ({lo}, {hi})")
    return pts


def grad_check(tree: Node, points, h: float = 1e-5,
               policy: SafetyPolicy = DEFAULT_POLICY) -> float:
    """Max relative error between analytic and central-difference derivatives."""
    pts = np.asarray(points, dtype=np.float64)
    check_admissible(tree, pts, h, policy)
    analytic = deriv(tree, pts, policy).values
    up = eval_tree(tree, pts + h, policy).values
    down = eval_tree(tree, pts - h, policy).values
    numeric = (up - down) / (2.0 * h)
    err = np.abs(analytic - numeric) / np.maximum(np.abs(analytic), 1e-8)
    return float(np.max(err))
