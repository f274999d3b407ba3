"""Bisection-deflation search for all real roots of a scalar equation.

Each root is bracketed on a grid, refined with a Dekker-style
secant/bisection iteration, and then deflated by multiplying the function
with ``psi(x, x*) = 1/|x - x*|^2 + 1``.  Because ``psi > 0`` the deflated
function keeps every sign change of the original, so a bracket that still
straddles a known root is split there; the deflation makes the split
endpoints ``x* +- delta`` large in magnitude and safely non-zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

__all__ = [
    "GridSearchSpec",
    "RootSet",
    "BracketTrace",
    "eps",
    "secant_or_flag",
    "guarded_step",
    "deflation_factor",
    "bracket_root",
    "find_all_roots",
]

_MACH = np.finfo(float).eps


def eps(x: float) -> float:
    """Relative accuracy of the floating-point system at x."""
    return _MACH * max(abs(x), 1.0)


@dataclass(frozen=True)
class GridSearchSpec:
    lo: float = -50.0
    hi: float = 50.0
    points: int = 400

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"empty search interval [{self.lo}, {self.hi}]")
        if self.points < 2:
            raise ValueError("grid search needs at least two points")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)


@dataclass
class RootSet:
    roots: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    # converged points whose undeflated residual was too large (poles, jumps)
    flagged: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.roots)

    def sorted(self) -> "RootSet":
        order = np.argsort(self.roots)
        return RootSet(
            [self.roots[i] for i in order],
            [self.residuals[i] for i in order],
            [self.iterations[i] for i in order],
            sorted(self.flagged),
        )


@dataclass
class BracketTrace:
    b: List[float] = field(default_factory=list)
    c: List[float] = field(default_factory=list)
    fb: List[float] = field(default_factory=list)
    fc: List[float] = field(default_factory=list)


def _secant(b, a, fb, fa):
    if a != b and fb != fa:
        return b - (b - a) / (fb - fa) * fb
    if a != b and fb == fa != 0:
        return math.inf
    return b


def secant_or_flag(b: float, a: float, omega: Callable[[float], float]) -> float:
    """Secant step from (a, b); inf when the secant is horizontal, b when a == b."""
    if a == b:
        return b
    return _secant(b, a, omega(b), omega(a))


def guarded_step(candidate: float, b: float, c: float) -> float:
    """Accept ``candidate`` only between the machine step toward c and the midpoint."""
    step = b + math.copysign(eps(b), c - b)
    mid = 0.5 * (b + c)
    lo, hi = min(step, mid), max(step, mid)
    if lo <= candidate <= hi:
        return candidate
    if abs(candidate - b) <= eps(b):
        return step
    return mid


def deflation_factor(x: float, root: float) -> float:
    d = abs(x - root)
    return math.inf if d == 0 else 1.0 / (d * d) + 1.0


def _deflated(omega, roots):
    if not roots:
        return omega

    def g(x):
        val = omega(x)
        if val == 0 or not math.isfinite(val):
            return val
        logmag = math.log(abs(val))
        for r in roots:
            d = abs(x - r)
            if d < 1e-12:
                logmag += 700.0 if d == 0 else -2.0 * math.log(d) + math.log1p(d * d)
            else:
                logmag += math.log(1.0 / (d * d) + 1.0)
        return math.copysign(math.exp(min(logmag, 700.0)), val)

    return g


def bracket_root(omega, x0: float, x1: float, f0=None, f1=None, max_iter: int = 500, trace=None):
    """Refine a sign-change bracket [x0, x1] to a root.

    Returns ``(x, omega(x), iterations)``; the bracket invariant
    omega(b) * omega(c) <= 0 and |omega(b)| <= |omega(c)| holds throughout.
    """
    f0 = omega(x0) if f0 is None else f0
    f1 = omega(x1) if f1 is None else f1
    if f0 * f1 > 0:
        raise ValueError(f"no sign change on [{x0}, {x1}]")
    if abs(f1) <= abs(f0):
        b, fb, a, fa, c, fc = x1, f1, x0, f0, x0, f0
    else:
        b, fb, a, fa, c, fc = x0, f0, x1, f1, x1, f1
    k = 0
    while fb != 0 and abs(b - c) > 2 * eps(b) and k < max_iter:
        if trace is not None:
            trace.b.append(b)
            trace.c.append(c)
            trace.fb.append(fb)
            trace.fc.append(fc)
        lam = _secant(b, a, fb, fa)
        x = guarded_step(lam, b, c)
        fx = omega(x)
        k += 1
        # the latest iterate with opposite sign is b when the signs differ, else c
        if fx * fb <= 0:
            xj, fj = b, fb
        else:
            xj, fj = c, fc
        if abs(fx) <= abs(fj):
            a, fa = b, fb
            b, fb, c, fc = x, fx, xj, fj
        else:
            b, fb = xj, fj
            a, fa, c, fc = x, fx, x, fx
    if trace is not None:
        trace.b.append(b)
        trace.c.append(c)
        trace.fb.append(fb)
        trace.fc.append(fc)
    return b, fb, k


def find_all_roots(
    omega: Callable[[float], float],
    search: Optional[GridSearchSpec] = None,
    tol_residual: Optional[float] = None,
    max_roots: int = 200,
    dedup_rtol: float = 1e-8,
) -> RootSet:
    """All roots of ``omega`` with a sign change visible on the search grid.

    ``tol_residual`` defaults to ``1e-9 * max(1, max |omega(grid)|)`` and is
    checked against the undeflated function.
    """
    search = search or GridSearchSpec()
    grid = search.grid()
    values = np.array([omega(x) for x in grid])
    if tol_residual is None:
        finite = np.abs(values[np.isfinite(values)])
        tol_residual = 1e-9 * max(1.0, float(finite.max()) if finite.size else 1.0)

    out = RootSet()
    splits: List[float] = []  # known roots and flagged points
    cache = dict(zip(grid.tolist(), values.tolist()))

    def value(x):
        if x not in cache:
            cache[x] = omega(x)
        return cache[x]

    for _ in range(max_roots + len(grid)):
        deflated = _deflated(omega, out.roots)
        bracket = _next_bracket(grid, splits, value)
        if bracket is None:
            break
        x0, x1 = bracket
        x, _, its = bracket_root(deflated, x0, x1, deflated(x0), deflated(x1))
        res = abs(omega(x))
        known = any(abs(x - r) <= dedup_rtol * max(1.0, abs(r)) for r in splits)
        if res <= tol_residual and not known:
            out.roots.append(float(x))
            out.residuals.append(float(res))
            out.iterations.append(its)
        else:
            out.flagged.append(float(x))
        splits.append(x)
        if len(out.roots) >= max_roots:
            break
    return out.sorted()


def _split_offset(x):
    return 1e-7 * max(1.0, abs(x))


def _next_bracket(grid, splits, value):
    """Leftmost adjacent pair with a sign change that excludes every split point."""
    pts = list(grid)
    lo, hi = grid[0], grid[-1]
    for s in splits:
        d = _split_offset(s)
        pts = [p for p in pts if abs(p - s) >= d]
        pts.extend(p for p in (s - d, s + d) if lo <= p <= hi)
    pts = sorted(set(pts))
    signs = [math.copysign(1.0, value(p)) if value(p) != 0 else 0.0 for p in pts]
    split_arr = np.array(sorted(splits))
    for p, q, sp_, sq in zip(pts[:-1], pts[1:], signs[:-1], signs[1:]):
        if sp_ * sq > 0:
            continue
        if not (np.isfinite(value(p)) and np.isfinite(value(q))):
            continue
        if split_arr.size and np.any((split_arr > p) & (split_arr < q)):
            continue
        return p, q
    return None
