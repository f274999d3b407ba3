"""Dogleg trust-region minimisation of Q(x) = |F(x)|^2 / 2."""
from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

__all__ = [
    "TrustRegionConfig",
    "TraceRow",
    "TrustRegionResult",
    "objective",
    "dogleg_step",
    "ratio",
    "minimize",
    "fd_gradient",
    "fd_hessian",
]

HESSIAN_MODES = ("gauss-newton", "full", "finite-difference")


@dataclass(frozen=True)
class TrustRegionConfig:
    eps_g: float = 1e-13
    eps_v: float = 1e-13
    delta1: float = 0.25
    delta2: float = 0.75
    tau1: float = 0.5
    tau2: float = 2.0
    max_iter: int = 200
    hessian_mode: str = "gauss-newton"
    # extra stop on |F|_inf; 0 disables it
    ftol: float = 1e-11

    def __post_init__(self):
        if not 0 < self.delta1 < self.delta2 < 1:
            raise ValueError("need 0 < delta1 < delta2 < 1")
        if not 0 < self.tau1 < 1 < self.tau2:
            raise ValueError("need 0 < tau1 < 1 < tau2")
        if self.eps_g <= 0 or self.eps_v <= 0 or self.ftol < 0:
            raise ValueError("tolerances must be positive")
        if self.hessian_mode not in HESSIAN_MODES:
            raise ValueError(f"hessian_mode must be one of {HESSIAN_MODES}")


@dataclass
class TraceRow:
    k: int
    Q: float
    normF_inf: float
    h: float
    r: float
    accepted: bool


@dataclass
class TrustRegionResult:
    x: np.ndarray
    converged: bool
    status: str
    iterations: int
    Q: float
    normF_inf: float
    trace: List[TraceRow] = field(default_factory=list)

    def residual_after(self, k: int) -> float:
        """|F|_inf of the iterate after k iterations (final value if stopped earlier)."""
        for row in self.trace:
            if row.k == k:
                return row.normF_inf
        return self.normF_inf

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "Q", "normF_inf", "h", "r", "accepted"])
        for row in self.trace:
            w.writerow([row.k, repr(row.Q), repr(row.normF_inf), repr(row.h), repr(row.r), int(row.accepted)])
        return buf.getvalue()


def objective(F: Callable, x) -> float:
    f = np.asarray(F(np.asarray(x, dtype=float)), dtype=float)
    return 0.5 * float(f @ f)


def _newton_point(g, G, rcond=1e-12):
    """-(G + mu I)^{-1} g with the smallest shift mu that makes G well conditioned.

    mu starts at 0, then 1e-10 * trace(G) / n and doubles (at most 10 times).
    "Well conditioned" means Cholesky succeeds and the LAPACK reciprocal
    condition estimate exceeds ``rcond``: near solutions with a continuous
    symmetry (rotations on the disk) G is singular, and an unshifted solve
    returns huge steps along the symmetry orbit.  Returns None on failure.
    """
    n = len(g)
    anorm = float(np.linalg.norm(G, 1))
    mu0 = 1e-10 * max(float(np.trace(G)), 1e-300) / n
    mu = 0.0
    for _ in range(12):
        A = G + mu * np.eye(n) if mu else G
        try:
            cf, lower = scipy.linalg.cho_factor(A, check_finite=False)
            est, info = scipy.linalg.lapack.dpocon(cf, anorm + mu, uplo="L" if lower else "U")
            if info == 0 and est > rcond:
                p = -scipy.linalg.cho_solve((cf, lower), g, check_finite=False)
                if np.all(np.isfinite(p)):
                    return p
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
            pass
        mu = mu0 if mu == 0.0 else 2.0 * mu
    return None


def _gauss_newton_point(J, f, cap=1e-10):
    """Regularised Gauss-Newton point: argmin |J p + f|^2 + mu |p|^2.

    mu = min(|f|^2, cap * |J|_F^2 / n).  The shift vanishes quadratically
    near a solution, which keeps the local rate quadratic even where
    solutions form a continuum (rotation orbits on the disk) and J is
    singular there; the cap keeps far-field steps close to plain
    Gauss-Newton.  With the shift at its cap the normal equations are well
    conditioned and Cholesky is used; below it the stacked least-squares
    form keeps the accuracy at cond(J) rather than cond(J)^2.
    """
    n = J.shape[1]
    scale = float(np.sum(J * J)) / n
    mu = min(float(f @ f), cap * scale)
    if mu >= cap * scale > 0:
        try:
            cf = scipy.linalg.cho_factor(J.T @ J + mu * np.eye(n), check_finite=False)
            p = -scipy.linalg.cho_solve(cf, J.T @ f, check_finite=False)
            if np.all(np.isfinite(p)):
                return p
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            pass
    A = np.vstack([J, math.sqrt(mu) * np.eye(n)]) if mu > 0 else J
    rhs = np.concatenate([-f, np.zeros(n)]) if mu > 0 else -f
    try:
        p = scipy.linalg.lstsq(A, rhs, cond=1e-13, lapack_driver="gelsy", check_finite=False)[0]
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        return None
    return p if np.all(np.isfinite(p)) else None


def dogleg_step(g, G, h: float, J=None, f=None) -> np.ndarray:
    """Approximate minimiser of g.s + s.G.s/2 over |s| <= h along the dogleg path.

    With ``J`` and ``f`` given (Gauss-Newton model, G = J^T J, g = J^T f) the
    Newton point is computed from J directly.
    """
    g = np.asarray(g, dtype=float)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return np.zeros_like(g)
    p_hat = _gauss_newton_point(J, f) if J is not None else _newton_point(g, G)
    if p_hat is None:
        warnings.warn("model Hessian is numerically singular; taking a steepest-descent step", RuntimeWarning)
        return -g / gn * h
    if np.linalg.norm(p_hat) <= h:
        return p_hat
    gGg = float(g @ G @ g)
    if gGg <= 0:
        return -g / gn * h
    p_til = -(gn**2 / gGg) * g
    if np.linalg.norm(p_til) > h:
        return -g / gn * h
    d = p_hat - p_til
    dd = float(d @ d)
    pd = float(p_til @ d)
    # positive root of |p_til + lam d|^2 = h^2
    disc = max(pd * pd - dd * (float(p_til @ p_til) - h * h), 0.0)
    lam = (-pd + math.sqrt(disc)) / dd
    return p_til + lam * d


def ratio(Q_old: float, Q_new: float, model_decrease: float) -> float:
    if not model_decrease > 0:
        raise ArithmeticError(f"non-positive model decrease {model_decrease!r}")
    return (Q_old - Q_new) / model_decrease


def fd_gradient(Qf: Callable, x, step=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    e = step if step is not None else math.sqrt(np.finfo(float).eps) * max(1.0, float(np.linalg.norm(x)))
    g = np.empty_like(x)
    for i in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[i] += e
        xm[i] -= e
        g[i] = (Qf(xp) - Qf(xm)) / (2 * e)
    return g


def fd_hessian(Qf: Callable, x, step=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    e = step if step is not None else np.cbrt(np.finfo(float).eps) * max(1.0, float(np.linalg.norm(x)))
    q0 = Qf(x)
    qi = np.empty(n)
    for i in range(n):
        xi = x.copy()
        xi[i] += e
        qi[i] = Qf(xi)
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            xij = x.copy()
            xij[i] += e
            xij[j] += e
            H[i, j] = H[j, i] = (Qf(xij) - qi[i] - qi[j] + q0) / e**2
    return H


def minimize(
    F: Callable,
    jac: Optional[Callable],
    x0,
    cfg: Optional[TrustRegionConfig] = None,
    second_order: Optional[Callable] = None,
    callback: Optional[Callable] = None,
) -> TrustRegionResult:
    """Trust-region iteration on Q = |F|^2/2 with dogleg steps.

    ``jac(x)`` returns the Jacobian of F.  ``second_order(x, F)`` returns
    sum_i F_i Hess(F_i) and is used when ``hessian_mode == "full"``.
    ``callback(k, x)`` sees every accepted iterate.  Reaching ``max_iter``
    is reported through ``converged=False``.
    """
    cfg = cfg or TrustRegionConfig()
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("initial guess must be finite")
    mode = cfg.hessian_mode
    if mode == "full" and second_order is None:
        raise ValueError("full Hessian mode needs a second_order callback")
    if mode != "finite-difference" and jac is None:
        raise ValueError(f"hessian mode {mode!r} needs a Jacobian")

    def Qf(z):
        return objective(F, z)

    def derivatives(z, f):
        if mode == "finite-difference":
            return fd_gradient(Qf, z), fd_hessian(Qf, z), None
        J = np.atleast_2d(jac(z))
        g = J.T @ f
        G = J.T @ J
        if mode == "full":
            G = G + second_order(z, f)
            return g, 0.5 * (G + G.T), None
        return g, 0.5 * (G + G.T), J

    f = np.asarray(F(x), dtype=float)
    Q = 0.5 * float(f @ f)
    g, G, Jx = derivatives(x, f)
    h = float(np.linalg.norm(g))
    trace: List[TraceRow] = []
    status = "max-iter"
    converged = False
    k = 0
    while True:
        nf = float(np.max(np.abs(f))) if f.size else 0.0
        if (np.linalg.norm(g) <= cfg.eps_g and abs(Q) <= cfg.eps_v) or (cfg.ftol > 0 and nf <= cfg.ftol):
            trace.append(TraceRow(k, Q, nf, h, math.nan, False))
            status, converged = "converged", True
            break
        if k >= cfg.max_iter:
            trace.append(TraceRow(k, Q, nf, h, math.nan, False))
            break
        if h < 1e-15 * max(1.0, float(np.linalg.norm(x))) or not math.isfinite(h):
            trace.append(TraceRow(k, Q, nf, h, math.nan, False))
            status = "radius-collapse"
            break
        s = dogleg_step(g, G, h, Jx, f if Jx is not None else None)
        pred = -(float(g @ s) + 0.5 * float(s @ G @ s))
        x_new = x + s
        f_new = np.asarray(F(x_new), dtype=float)
        Q_new = 0.5 * float(f_new @ f_new)
        if pred > 0 and math.isfinite(Q_new):
            r = ratio(Q, Q_new, pred)
        else:
            r = -math.inf
        accepted = r >= cfg.delta1
        trace.append(TraceRow(k, Q, nf, h, r, accepted))
        snorm = float(np.linalg.norm(s))
        if r < cfg.delta1:
            h = cfg.tau1 * h
        elif r > cfg.delta2 and snorm >= (1 - 1e-10) * h:
            h = cfg.tau2 * h
        if accepted:
            x, f, Q = x_new, f_new, Q_new
            g, G, Jx = derivatives(x, f)
            if callback is not None:
                callback(k + 1, x)
        k += 1
    log.debug("trust region stopped: %s after %d iterations, Q=%.3e", status, k, Q)
    return TrustRegionResult(x, converged, status, k, Q, trace[-1].normF_inf, trace)
