"""Legendre kernels, Gauss quadrature and the compact radial bases.

The radial variable is ``t = 2r - 1`` on ``[-1, 1]``.  Two compact bases
carry the boundary conditions:

* ``phi_j = c_j (L_j - L_{j+2})`` with ``c_j = 1/sqrt(4j + 6)`` vanishes at
  both ends (outer wall and the polar origin, used for Fourier modes k >= 1);
* ``varphi_l = L_l - L_{l+1}`` vanishes at ``t = 1`` only (axisymmetric mode).

:func:`matrix_entry` returns the closed forms of the five banded 1D matrices
built from the *unnormalised* kernels ``L_j - L_{j+2}`` and ``L_l - L_{l+1}``;
the Galerkin assembly rescales by ``c_i c_j`` where needed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureRule",
    "RadialKind",
    "legendre_eval",
    "legendre_table",
    "gauss_rule",
    "matrix_entry",
    "banded_matrix",
    "normalization",
    "radial_basis",
]


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)

    def integrate(self, values):
        return float(np.dot(self.weights, values))


class RadialKind(enum.Enum):
    INTERIOR_DIRICHLET = "interior"  # phi_j, zero at t = -1 and t = 1
    OUTER_DIRICHLET = "outer"  # varphi_l, zero at t = 1
    UNCONSTRAINED = "free"  # L_l
    POLAR = "polar"  # L_j + L_{j+1}, zero at t = -1 only


def legendre_eval(degree: int, t):
    """Return ``(L_n(t), L_n'(t))`` by the three-term recurrence.

    ``t`` may be a scalar or an array.  Values at ``t = +-1`` are exact.
    """
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    vals, ders = legendre_table(degree, t)
    v, d = vals[degree], ders[degree]
    if np.ndim(t) == 0:
        return float(v), float(d)
    return v, d


def legendre_table(nmax: int, t):
    """Values and derivatives of ``L_0 .. L_nmax`` at ``t``.

    Returns two arrays of shape ``(nmax + 1,) + shape(t)``.
    """
    if nmax < 0:
        raise ValueError(f"nmax must be non-negative, got {nmax}")
    t = np.asarray(t, dtype=float)
    vals = np.empty((nmax + 1,) + t.shape)
    ders = np.empty_like(vals)
    vals[0] = 1.0
    ders[0] = 0.0
    if nmax >= 1:
        vals[1] = t
        ders[1] = 1.0
    for n in range(1, nmax):
        vals[n + 1] = ((2 * n + 1) * t * vals[n] - n * vals[n - 1]) / (n + 1)
        # L'_{n+1} = L'_{n-1} + (2n+1) L_n
        ders[n + 1] = ders[n - 1] + (2 * n + 1) * vals[n]
    # pin the endpoint values: L_n(+-1) = (+-1)^n, L_n'(+-1) = (+-1)^(n-1) n(n+1)/2
    n = np.arange(nmax + 1).reshape((-1,) + (1,) * t.ndim)
    for s in (1.0, -1.0):
        mask = t == s
        if np.any(mask):
            sv = np.broadcast_to(s**n, vals.shape)
            sd = np.broadcast_to(s ** (n - 1) * n * (n + 1) / 2.0, vals.shape)
            vals[:, mask] = sv[:, mask]
            ders[:, mask] = sd[:, mask]
    return vals, ders


@lru_cache(maxsize=64)
def _gauss(n: int):
    k = np.arange(1, n + 1)
    # Chebyshev-type starting values, descending in [-1, 1]
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        vals, ders = legendre_table(n, x)
        dx = vals[n] / ders[n]
        x = x - dx
        if np.max(np.abs(dx)) <= 1e-15:
            break
    vals, ders = legendre_table(n, x)
    w = 2.0 / ((1.0 - x**2) * ders[n] ** 2)
    x = x[::-1].copy()
    w = w[::-1].copy()
    # enforce exact symmetry about 0
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if n % 2:
        x[n // 2] = 0.0
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1] (Newton on L_n)."""
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    x, w = _gauss(n)
    return QuadratureRule(x, w)


def _a(i, j):
    if j == i:
        return 4.0 * i + 6.0
    if j == i + 1:
        return 2.0 * i + 4.0
    return 0.0


def _b(i, j):
    if j == i:
        return 2.0 * (2 * i + 3) / ((i + 1) * (i + 2))
    if j == i + 1:
        return -2.0 / (i + 2)
    return 0.0


def _c(i, j):
    if j == i:
        return 2.0 / (2 * i + 1) + 2.0 / (2 * i + 5)
    if j == i + 1:
        return 2.0 / ((2 * i + 1) * (2 * i + 5)) + 2.0 * (i + 3) / ((2 * i + 5) * (2 * i + 7))
    if j == i + 2:
        return -2.0 / (2 * i + 5)
    if j == i + 3:
        return -4.0 * (i + 3) / (2 * (2 * i + 5) * (2 * i + 7))
    return 0.0


def _d(i, j):
    return 2.0 * i + 2.0 if i == j else 0.0


def _e(i, j):
    if j == i:
        return 4.0 * (i + 1) / ((2 * i + 1) * (2 * i + 3))
    if j == i + 1:
        # positive: the integral of (t+1)(L_i - L_{i+1})(L_{i+1} - L_{i+2})
        return 4.0 / ((2 * i + 1) * (2 * i + 3) * (2 * i + 5))
    if j == i + 2:
        return -2.0 * (i + 2) / ((2 * i + 3) * (2 * i + 5))
    return 0.0


_ENTRIES = {"A": _a, "B": _b, "C": _c, "D": _d, "E": _e}
BANDWIDTH = {"A": 1, "B": 1, "C": 3, "D": 0, "E": 2}


def matrix_entry(which: str, i: int, j: int) -> float:
    """Closed-form entry (i, j) of one of the 1D matrices.

    With ``p_j = L_j - L_{j+2}`` and ``q_l = L_l - L_{l+1}``::

        A_ij = int (t+1) p_i' p_j'      B_ij = int p_i p_j / (t+1)
        C_ij = int (t+1) p_i p_j        D_ij = int (t+1) q_i' q_j'
        E_ij = int (t+1) q_i q_j
    """
    try:
        fn = _ENTRIES[which.upper()]
    except KeyError:
        raise ValueError(f"unknown matrix {which!r}") from None
    if i < 0 or j < 0:
        raise ValueError("indices must be non-negative")
    if i > j:
        i, j = j, i
    return fn(i, j)


def banded_matrix(which: str, size: int) -> np.ndarray:
    """Dense ``size x size`` array of closed-form entries."""
    bw = BANDWIDTH[which.upper()]
    out = np.zeros((size, size))
    for i in range(size):
        for j in range(i, min(size, i + bw + 1)):
            out[i, j] = out[j, i] = matrix_entry(which, i, j)
    return out


def normalization(j) -> np.ndarray:
    return 1.0 / np.sqrt(4.0 * np.asarray(j, dtype=float) + 6.0)


def radial_basis(kind: RadialKind, count: int, t):
    """Values and t-derivatives of the first ``count`` members of a radial basis.

    Returns arrays of shape ``(count,) + shape(t)``.
    """
    kind = RadialKind(kind)
    if count < 0:
        raise ValueError("count must be non-negative")
    extra = 2 if kind is RadialKind.INTERIOR_DIRICHLET else 1
    vals, ders = legendre_table(count + extra, t)
    if kind is RadialKind.INTERIOR_DIRICHLET:
        c = normalization(np.arange(count)).reshape((-1,) + (1,) * np.ndim(t))
        return c * (vals[:count] - vals[2 : count + 2]), c * (ders[:count] - ders[2 : count + 2])
    if kind is RadialKind.OUTER_DIRICHLET:
        return vals[:count] - vals[1 : count + 1], ders[:count] - ders[1 : count + 1]
    if kind is RadialKind.POLAR:
        return vals[:count] + vals[1 : count + 1], ders[:count] + ders[1 : count + 1]
    return vals[:count].copy(), ders[:count].copy()

