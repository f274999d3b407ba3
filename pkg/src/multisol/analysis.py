"""Post-processing of solution records: peaks, boundary flux, energy classes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .galerkin import DiscreteProblem
from .geometry import angular_distance, curvature_extrema

__all__ = [
    "Peak",
    "polar_grid_values",
    "interior_peaks",
    "boundary_flux",
    "boundary_peaks",
    "peak_alignment",
    "half_height_radius",
    "energy_classes",
    "in_open_band",
]


@dataclass
class Peak:
    r: float
    theta: float
    value: float


def polar_grid_values(dp: DiscreteProblem, xi, nr: int = 61, ntheta: int = 240):
    """(r, theta, u) on a tensor grid; theta excludes 2 pi."""
    r = np.linspace(0.0, 1.0, nr)
    th = np.linspace(0.0, 2 * np.pi, ntheta, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    u = dp.evaluate(xi, R.ravel(), T.ravel()).reshape(R.shape)
    return r, th, u


def interior_peaks(dp: DiscreteProblem, xi, nr: int = 61, ntheta: int = 240, rel: float = 0.1) -> List[Peak]:
    """Strict local maxima of |u| on a polar grid, at least ``rel`` of the global maximum."""
    r, th, u = polar_grid_values(dp, xi, nr, ntheta)
    a = np.abs(u)
    top = float(a.max())
    if top == 0.0:
        return []
    peaks = []
    # the centre is a single point: compare it with the first ring
    if a[0, 0] >= a[1].max() and a[0, 0] >= rel * top:
        peaks.append(Peak(0.0, 0.0, float(u[0, 0])))
    for i in range(1, nr - 1):
        for j in range(ntheta):
            v = a[i, j]
            if v < rel * top:
                continue
            nb = a[i - 1 : i + 2, [(j - 1) % ntheta, j, (j + 1) % ntheta]]
            if v >= nb.max() and np.sum(nb == v) == 1:
                peaks.append(Peak(float(r[i]), float(th[j]), float(u[i, j])))
    return peaks


def boundary_flux(dp: DiscreteProblem, xi, theta) -> np.ndarray:
    """|du/dn| on the boundary at parametric angles theta, for fields vanishing there.

    With u = 0 on the boundary the gradient is normal, and |grad u| equals
    |du/dr| |grad r| with |grad r|^2 = cos^2/a^2 + sin^2/b^2 at r = 1.
    """
    theta = np.asarray(theta, dtype=float)
    ur = dp.evaluate(xi, np.ones_like(theta), theta, radial_derivative=True)
    a, b = dp.domain.a, dp.domain.b
    return np.abs(ur) * np.sqrt(np.cos(theta) ** 2 / a**2 + np.sin(theta) ** 2 / b**2)


def boundary_peaks(dp: DiscreteProblem, xi, ntheta: int = 1440, rel: float = 0.5) -> np.ndarray:
    """Parametric angles of the local maxima of the boundary flux above ``rel`` of its maximum."""
    th = np.linspace(0.0, 2 * np.pi, ntheta, endpoint=False)
    g = boundary_flux(dp, xi, th)
    top = float(g.max())
    if top == 0.0:
        return np.array([])
    left, right = np.roll(g, 1), np.roll(g, -1)
    mask = (g > left) & (g >= right) & (g >= rel * top)
    return th[mask]


def peak_alignment(dp: DiscreteProblem, angles) -> float:
    """Largest angular distance (degrees) from a peak angle to the nearest curvature extremum.

    On the disk every boundary point is an extremum and the result is 0.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0 or dp.domain.is_disk:
        return 0.0
    ext = curvature_extrema(dp.domain)
    worst = 0.0
    for t in angles:
        worst = max(worst, min(float(angular_distance(t, e)) for e in ext))
    return math.degrees(worst)


def half_height_radius(dp: DiscreteProblem, xi, nr: int = 4001, ntheta: int = 64) -> float:
    """Radius of the disk with the same area as {|u| >= max|u| / 2}."""
    r = np.linspace(0.0, 1.0, nr)
    th = np.linspace(0.0, 2 * np.pi, ntheta, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    a = np.abs(dp.evaluate(xi, R.ravel(), T.ravel()).reshape(R.shape))
    inside = a >= 0.5 * a.max()
    # physical area element a b r dr dtheta with midpoint weights in r
    w = np.full(nr, r[1] - r[0])
    w[[0, -1]] *= 0.5
    area = dp.domain.a * dp.domain.b * float(np.sum(inside * (w * r)[:, None])) * (2 * np.pi / ntheta)
    return math.sqrt(area / math.pi)


def energy_classes(records: Sequence, rtol: float = 1e-6) -> List[list]:
    """Group records with equal J (relative ``rtol``).

    J is invariant under rotations of the disk and, for even potentials,
    under u -> -u, so each group is one solution type up to symmetry.
    """
    groups: List[list] = []
    for rec in sorted(records, key=lambda q: q.J):
        if groups and abs(rec.J - groups[-1][0].J) <= rtol * max(1.0, abs(rec.J)):
            groups[-1].append(rec)
        else:
            groups.append([rec])
    return groups


def in_open_band(values, period: float = math.pi) -> bool:
    """True when all values lie strictly inside one interval (2k pi, (2k+1) pi)."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    k = math.floor(lo / (2 * period))
    return lo > 2 * k * period and hi < (2 * k + 1) * period
