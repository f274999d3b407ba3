"""Built-in semilinear problems in the canonical form  s * Lap(u) + f(x, u) = 0.

``s`` is ``stiffness_scale`` (1 for sine-Gordon and Henon, delta for
Ginzburg-Landau).  Every callback takes ``(x, u)`` where ``x = (X, Y)`` holds
physical coordinates, broadcastable against ``u``.  The energy is
``J(u) = int s/2 |grad u|^2 - V(x, u)`` with ``V(x, u) = int_0^u f(x, v) dv``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class BC(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


Callback = Callable[[tuple, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    f: Callback
    f_u: Optional[Callback]
    f_uu: Optional[Callback]
    V: Optional[Callback]
    bc: BC = BC.DIRICHLET
    scale: float = 1.0
    stiffness_scale: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bc", BC(self.bc))


def sine_gordon(lam: float, bc="dirichlet") -> ProblemSpec:
    """Lap(u) + lam sin(u) = 0, potential lam (1 - cos u)."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return ProblemSpec(
        name="sine-gordon",
        f=lambda x, u: lam * np.sin(u),
        f_u=lambda x, u: lam * np.cos(u),
        f_uu=lambda x, u: -lam * np.sin(u),
        V=lambda x, u: lam * (1.0 - np.cos(u)),
        bc=bc,
        scale=lam,
        params={"lambda": lam},
    )


def henon_cubic() -> ProblemSpec:
    """Lap(u) + u^3 = 0 with Dirichlet data, potential u^4/4."""
    return ProblemSpec(
        name="henon",
        f=lambda x, u: u * u * u,
        f_u=lambda x, u: 3.0 * u * u,
        f_uu=lambda x, u: 6.0 * u,
        V=lambda x, u: 0.25 * u**4,
        bc=BC.DIRICHLET,
    )


def ginzburg_landau(delta: float, bc="dirichlet") -> ProblemSpec:
    """delta Lap(u) - u + u^3 = 0, i.e. f = u^3 - u and V = u^4/4 - u^2/2.

    The energy then reads int delta/2 |grad u|^2 + u^2/2 - u^4/4.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return ProblemSpec(
        name="ginzburg-landau",
        f=lambda x, u: u * u * u - u,
        f_u=lambda x, u: 3.0 * u * u - 1.0,
        f_uu=lambda x, u: 6.0 * u,
        V=lambda x, u: 0.25 * u**4 - 0.5 * u**2,
        bc=bc,
        scale=delta,
        stiffness_scale=delta,
        params={"delta": delta},
    )


def linear(c: float = -1.0, bc="dirichlet") -> ProblemSpec:
    """f = c u; a convenient affine test problem."""
    return ProblemSpec(
        name="linear",
        f=lambda x, u: c * u,
        f_u=lambda x, u: np.full_like(u, c, dtype=float),
        f_uu=lambda x, u: np.zeros_like(u, dtype=float),
        V=lambda x, u: 0.5 * c * u**2,
        bc=bc,
        params={"c": c},
    )


def poisson(source: Callable, bc="dirichlet") -> ProblemSpec:
    """-Lap(u) = source(X, Y); f does not depend on u."""

    def f(x, u):
        return np.broadcast_to(source(*x), np.shape(u)).astype(float)

    return ProblemSpec(
        name="poisson",
        f=f,
        f_u=lambda x, u: np.zeros_like(u, dtype=float),
        f_uu=lambda x, u: np.zeros_like(u, dtype=float),
        V=lambda x, u: f(x, u) * u,
        bc=bc,
    )


_REGISTRY = {
    "sine-gordon": lambda p: sine_gordon(float(p.get("lambda", 30.0)), p.get("bc", "dirichlet")),
    "henon": lambda p: henon_cubic(),
    "ginzburg-landau": lambda p: ginzburg_landau(float(p.get("delta", 0.2)), p.get("bc", "dirichlet")),
}


def get_problem(name: str, **params) -> ProblemSpec:
    key = name.lower().replace("_", "-")
    if key not in _REGISTRY:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(_REGISTRY)}")
    return _REGISTRY[key](params)
