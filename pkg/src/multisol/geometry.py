"""Elliptical domains and the coefficients of the mapped Laplacian.

The map is ``x = a r cos(theta)``, ``y = b r sin(theta)`` with ``theta`` the
parametric angle (not the polar angle of the image point).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EllipseDomain:
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"semi-axes must be positive, got a={self.a}, b={self.b}")

    @property
    def is_disk(self) -> bool:
        return self.a == self.b

    @property
    def area(self) -> float:
        return np.pi * self.a * self.b

    def with_b(self, b: float) -> "EllipseDomain":
        return EllipseDomain(self.a, b)


def omega_coeffs(dom: EllipseDomain, theta):
    """Coefficients (w1, w2, w3) of the Laplacian in (r, theta) coordinates.

    With these, |grad u|^2 = w1 u_r^2 - (w3/r) u_r u_theta + (w2/r^2) u_theta^2.
    """
    c2 = np.cos(theta) ** 2
    s2 = np.sin(theta) ** 2
    ia2, ib2 = 1.0 / dom.a**2, 1.0 / dom.b**2
    w1 = c2 * ia2 + s2 * ib2
    w2 = c2 * ib2 + s2 * ia2
    w3 = np.sin(2 * theta) * (ia2 - ib2)
    return w1, w2, w3


def map_to_cartesian(dom: EllipseDomain, r, theta):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > 1):
        raise ValueError("r must lie in [0, 1]")
    x = dom.a * r_arr * np.cos(theta)
    y = dom.b * r_arr * np.sin(theta)
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def boundary_curvature(dom: EllipseDomain, theta):
    """Curvature of the boundary curve (a cos t, b sin t) at parametric angle t."""
    a, b = dom.a, dom.b
    k = a * b / (a**2 * np.sin(theta) ** 2 + b**2 * np.cos(theta) ** 2) ** 1.5
    return float(k) if np.ndim(k) == 0 else k


def curvature_extrema(dom: EllipseDomain) -> np.ndarray:
    """Parametric angles of the boundary curvature extrema (the four vertices)."""
    return np.array([0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi])


def angular_distance(t1, t2):
    """Distance between angles on the circle, in [0, pi]."""
    d = np.mod(np.asarray(t1) - np.asarray(t2), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)
