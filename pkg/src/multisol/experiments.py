"""Experiment protocols shared by the scripts in scripts/ and the acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import problems as P
from .analysis import energy_classes, in_open_band, interior_peaks, half_height_radius, peak_alignment
from .aobd import AOBDConfig, SolutionRecord, amplitude_roots, continue_in_geometry, first_seed, polish, solve_multiple
from .galerkin import DiscreteProblem, align_to_axes, rotate_coefficients
from .geometry import EllipseDomain
from .trustregion import TrustRegionConfig, minimize

__all__ = [
    "DecayRow",
    "residual_decay",
    "sine_gordon_census",
    "shift_residual",
    "range_violations",
    "henon_census",
    "EnergyPair",
    "rotated_pair_energies",
    "BoundaryPeakRow",
    "boundary_peak_survey",
    "condensation_ladder",
]


def _problem(name: str, M: int, N: int, b: float = 1.0, **params) -> DiscreteProblem:
    return DiscreteProblem(EllipseDomain(1.0, b), P.get_problem(name, **params), M, N)


# ---------------------------------------------------------------- residual decay


@dataclass
class DecayRow:
    alpha: float
    residuals: Dict[int, float]
    trace: list


def residual_decay(
    bc: str,
    lam: float,
    M: int = 16,
    N: int = 16,
    seed: int = 0,
    seed_resolution: Tuple[int, int] = (4, 4),
    checkpoints: Sequence[int] = (5, 10, 20, 30),
) -> List[DecayRow]:
    """Trust-region residual history started from each nonzero amplitude root.

    The first basis function comes from a coarse solve started at a positive
    bump, so the starts are only approximate solutions of the (M, N) system.
    """
    dp = _problem("sine-gordon", M, N, bc=bc, **{"lambda": lam})
    cfg = AOBDConfig(seed_resolution=seed_resolution)
    coarse = _problem("sine-gordon", *seed_resolution, bc=bc, **{"lambda": lam})
    bump = coarse.project(lambda x, y: 4.0 * np.exp(-2.0 * (x * x + y * y)))
    chi0, _, _ = first_seed(dp, np.random.default_rng(seed), cfg, xi0=bump)
    roots = [a for a in amplitude_roots(dp, [], chi0, cfg.search) if abs(a) > cfg.trivial_tol]
    # value/gradient stops are inert so the history runs to the last checkpoint
    tr = TrustRegionConfig(eps_g=1e-30, eps_v=1e-30, ftol=0.0, max_iter=max(checkpoints))
    rows = []
    for a in roots:
        res = minimize(dp.residual, dp.jacobian, a * chi0, tr)
        rows.append(DecayRow(float(a), {k: res.residual_after(k) for k in checkpoints}, res.trace))
    return rows


# ---------------------------------------------------------------- sine-Gordon


def sine_gordon_census(bc: str, lam: float, M: int = 16, N: int = 16, seed: int = 0, cfg: Optional[AOBDConfig] = None):
    """Run the multiple-solution search; returns (problem, result)."""
    dp = _problem("sine-gordon", M, N, bc=bc, **{"lambda": lam})
    return dp, solve_multiple(dp, np.random.default_rng(seed), cfg)


def shift_residual(dp: DiscreteProblem, xi, k: int) -> float:
    """|F|_inf of u + 2 k pi (only meaningful under Neumann data)."""
    return float(np.max(np.abs(dp.residual(xi + dp.constant_vector(2 * k * math.pi)))))


def range_violations(dp: DiscreteProblem, records: Sequence[SolutionRecord], nr: int = 41, ntheta: int = 128) -> List[int]:
    """Indices of nonconstant records whose values fit inside one band (2k pi, (2k+1) pi)."""
    r = np.linspace(0.0, 1.0, nr)
    th = np.linspace(0.0, 2 * np.pi, ntheta, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    bad = []
    for i, rec in enumerate(records):
        u = dp.evaluate(rec.xi, R.ravel(), T.ravel())
        if float(np.ptp(u)) > 1e-8 and in_open_band(u):
            bad.append(i)
    return bad


# ---------------------------------------------------------------- Henon


def henon_census(M: int = 16, N: int = 16, seed: int = 2, cfg: Optional[AOBDConfig] = None):
    """Multiple-solution search for the cubic Henon problem on the disk.

    Returns (problem, result, classes) with classes grouped by energy, which
    identifies records up to rotation and sign.
    """
    dp = _problem("henon", M, N)
    res = solve_multiple(dp, np.random.default_rng(seed), cfg)
    return dp, res, energy_classes(res.nontrivial(dp))


@dataclass
class EnergyPair:
    b: float
    J: Tuple[float, float]
    grad_y: Tuple[float, float]
    residual: Tuple[float, float]
    truncated: bool

    @property
    def relative_gap(self) -> float:
        return abs(self.J[0] - self.J[1]) / max(abs(self.J[0]), abs(self.J[1]))

    @property
    def short_axis_has_larger_J(self) -> bool:
        """The record with more y-gradient energy (short axis y) carries the larger J."""
        k = int(np.argmax(self.grad_y))
        return self.J[k] > self.J[1 - k]


def rotated_pair_energies(dp: DiscreteProblem, xi, b_end: float = 0.8, steps: int = 4, cfg=None) -> List[EnergyPair]:
    """Continue a disk record and its 90 degree rotation from b = 1 to ``b_end``.

    The record is first rotated so its dominant Fourier mode is a cosine; only
    axis-aligned members of a rotation orbit survive on the ellipse.
    """
    x0 = align_to_axes(xi, dp.M, dp.N)
    x1 = rotate_coefficients(x0, dp.M, dp.N, 0.5 * math.pi)
    paths = continue_in_geometry(dp, [x0, x1], b_end, steps, cfg)
    out = []
    for k in range(min(len(p.b) for p in paths)):
        b = paths[0].b[k]
        dpb = dp.with_domain(dp.domain.with_b(b))
        gy = tuple(dpb.gradient_energy_split(p.xi[k])[1] for p in paths)
        out.append(
            EnergyPair(
                b,
                (paths[0].J[k], paths[1].J[k]),
                gy,
                (paths[0].residual[k], paths[1].residual[k]),
                any(p.truncated for p in paths),
            )
        )
    return out


# ---------------------------------------------------------------- Ginzburg-Landau


@dataclass
class BoundaryPeakRow:
    b: float
    J: float
    source: str
    peaks: List[float] = field(default_factory=list)  # parametric angles, radians
    worst_deg: float = 0.0


def _boundary_peaks(dp: DiscreteProblem, xi, r_min: float, rel: float):
    """Angles of |u| peaks at r >= r_min and >= rel * max|u|, if the global maximum is one of them."""
    pk = interior_peaks(dp, xi, nr=81, ntheta=720)
    if not pk:
        return None
    top = max(abs(p.value) for p in pk)
    outer = [p for p in pk if p.r >= r_min and abs(p.value) >= rel * top]
    if not any(abs(p.value) == top for p in outer):
        return None
    return [p.theta for p in outer]


def boundary_peak_survey(
    delta: float = 0.2,
    bs: Sequence[float] = (1.0, 0.8, 0.6),
    M: int = 16,
    N: int = 16,
    seed: int = 0,
    r_min: float = 0.5,
    rel: float = 0.5,
    steps_per_01: int = 1,
) -> List[BoundaryPeakRow]:
    """Peak angles of boundary-peak records at each b.

    Records come from a direct search at every b and from continuing the
    disk records (axis aligned, and turned by 90 degrees) in b.  A record
    counts when the global maximum of |u| lies in the outer half r >= r_min.
    """
    rows: List[BoundaryPeakRow] = []
    xi0 = None
    disk_records = []
    for b in bs:
        dp = _problem("ginzburg-landau", M, N, b=b, delta=delta)
        xi0 = dp.project(lambda x, y: 3.0 * np.exp(-(x * x + y * y) / 0.1))
        res = solve_multiple(dp, np.random.default_rng(seed), AOBDConfig(seed_amplitude=3.0), xi0=xi0)
        if b == 1.0:
            disk_records = res.records
        for group in energy_classes(res.records):
            rows.append(_survey_row(dp, group[0].xi, group[0].J, "search", r_min, rel))
    if disk_records and min(bs) < 1.0:
        dp1 = _problem("ginzburg-landau", M, N, b=1.0, delta=delta)
        starts = []
        for group in energy_classes(disk_records):
            x = align_to_axes(group[0].xi, M, N)
            starts += [x, rotate_coefficients(x, M, N, 0.5 * math.pi)]
        steps = max(1, int(round((1.0 - min(bs)) * 10 * steps_per_01)))
        for path in continue_in_geometry(dp1, starts, min(bs), steps):
            for b, x, J in zip(path.b, path.xi, path.J):
                if b < 1.0 and any(abs(b - c) < 1e-9 for c in bs):
                    dpb = dp1.with_domain(dp1.domain.with_b(b))
                    rows.append(_survey_row(dpb, x, J, "continued", r_min, rel))
    return [r for r in rows if r is not None]


def _survey_row(dp, xi, J, source, r_min, rel):
    angles = _boundary_peaks(dp, xi, r_min, rel)
    if angles is None:
        return None
    return BoundaryPeakRow(dp.domain.b, float(J), source, angles, peak_alignment(dp, angles))


def condensation_ladder(
    deltas: Sequence[float] = (2e-2, 2e-4),
    start: float = 0.2,
    M: int = 2,
    N: int = 64,
    per_decade: int = 5,
) -> Dict[float, Tuple[float, float, float]]:
    """Single-peak solution continued in delta on the unit disk.

    Returns {delta: (half-height radius, peak value, residual)} for the
    requested deltas.  Few Fourier modes suffice because the single-peak
    state is radial.
    """
    dp = _problem("ginzburg-landau", M, N, delta=start)
    x = dp.project(lambda X, Y: 2.5 * np.exp(-(X * X + Y * Y) / 0.2))
    lo = min(deltas)
    count = max(2, int(math.ceil(math.log10(start / lo) * per_decade)) + 1)
    steps = [d for d in np.geomspace(start, lo, count) if all(abs(d - t) > 1e-9 * t for t in deltas)]
    ladder = sorted(steps + list(deltas), reverse=True)
    out = {}
    for d in ladder:
        dd = dp.with_problem(P.ginzburg_landau(d))
        rec = polish(dd, x, AOBDConfig())
        if not rec.converged:
            raise RuntimeError(f"single-peak continuation lost convergence at delta={d:g}")
        x = rec.xi
        if d in deltas:
            peak = float(np.abs(dd.evaluate(x, [0.0], [0.0]))[0])
            out[d] = (half_height_radius(dd, x), peak, rec.residual_inf)
    return out
