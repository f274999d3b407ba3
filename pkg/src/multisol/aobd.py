"""Adaptive orthogonal basis deflation for multiple solutions.

The driver follows the usual loop of the method:

1. solve the full system once from a low-mode guess and normalise the result
   into the first basis member chi_0;
2. root-find the amplitude alpha of alpha * chi_0 on the Galerkin projection;
3. enrich the basis by solving the bordered system
   F(X a + a_new chi) / a_new = 0,  X^T W chi = 0,  chi^T W chi = 1;
4. orthonormalise the new directions (modified Gram-Schmidt);
5-7. walk the basis member by member: fix the known amplitudes, root-find the
   next one, re-solve the small system in the span, and finally polish every
   candidate with all spectral coefficients free.

``W`` is the identity (coefficient inner product) or the mass matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .galerkin import DiscreteProblem, ReducedSystem, SpectralCoefficients, rotation_generator
from .problems import BC
from .rootfind import GridSearchSpec, find_all_roots
from .trustregion import TrustRegionConfig, TrustRegionResult, minimize

log = logging.getLogger(__name__)

__all__ = [
    "AOBDConfig",
    "AdaptiveBasis",
    "SolutionRecord",
    "SeedError",
    "AOBDResult",
    "ContinuationPath",
    "low_mode_guess",
    "prolong",
    "seed_basis",
    "amplitude_roots",
    "enrich_basis",
    "gram_schmidt",
    "refine",
    "polish",
    "dedup",
    "continue_in_geometry",
    "first_seed",
    "solve_multiple",
]


@dataclass(frozen=True)
class AOBDConfig:
    search: GridSearchSpec = GridSearchSpec(-50.0, 50.0, 400)
    solver: TrustRegionConfig = TrustRegionConfig(max_iter=200)
    # the polish stops on |F|_inf; the value/gradient tests are made inert
    polish_solver: TrustRegionConfig = TrustRegionConfig(eps_g=1e-30, eps_v=1e-30, max_iter=60)
    enrich_solver: TrustRegionConfig = TrustRegionConfig(eps_g=1e-30, eps_v=1e-30, max_iter=80)
    record_tol: float = 1e-8
    max_basis: int = 8
    starts_per_round: int = 8
    stale_rounds: int = 2
    max_rounds: int = 4
    max_paths: int = 48
    inner_product: str = "l2"
    seed_modes: int = 2
    seed_amplitude: float = 1.0
    seed_resolution: Optional[Tuple[int, int]] = None
    max_seed_attempts: int = 8
    dedup_rtol: float = 1e-6
    trivial_tol: float = 1e-6
    exclude_rotations: bool = False

    def __post_init__(self):
        if self.inner_product not in ("l2", "mass"):
            raise ValueError("inner_product must be 'l2' or 'mass'")
        if self.max_basis < 1 or self.starts_per_round < 0 or self.max_paths < 1:
            raise ValueError("basis budget, start count and path cap must be positive")
        if self.record_tol <= 0 or self.dedup_rtol <= 0 or self.trivial_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolutionRecord:
    xi: np.ndarray
    residual_inf: float
    J: float
    amplitudes: Tuple[float, ...] = ()
    iterations: int = 0
    converged: bool = True
    origin: str = ""

    def coefficients(self, M: int, N: int) -> SpectralCoefficients:
        return SpectralCoefficients.from_flat(M, N, self.xi)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.xi))


class SeedError(RuntimeError):
    """Step 1 did not produce a usable nontrivial solution."""

    def __init__(self, message, result: Optional[TrustRegionResult] = None):
        super().__init__(message)
        self.result = result


def _weight(dp: DiscreteProblem, kind: str):
    return None if kind == "l2" else dp.mass


def _inner(W, x, y) -> float:
    return float(x @ y) if W is None else float(x @ (W @ y))


@dataclass
class AdaptiveBasis:
    members: List[np.ndarray] = field(default_factory=list)
    W: Optional[np.ndarray] = None
    dropped: int = 0

    def __len__(self):
        return len(self.members)

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack(self.members)

    def gram(self) -> np.ndarray:
        X = self.matrix
        return X.T @ X if self.W is None else X.T @ self.W @ X

    def orthonormality_error(self) -> float:
        if not self.members:
            return 0.0
        return float(np.max(np.abs(self.gram() - np.eye(len(self)))))

    def extended(self, vectors) -> "AdaptiveBasis":
        return gram_schmidt(list(self.members) + list(vectors), self.W)


def gram_schmidt(vectors: Sequence, W=None, drop_tol: float = 1e-8) -> AdaptiveBasis:
    """Modified Gram-Schmidt with one re-orthogonalisation pass.

    A vector whose norm after projection falls below ``drop_tol`` (relative
    to its original norm) is treated as dependent and dropped.
    """
    out: List[np.ndarray] = []
    dropped = 0
    for v in vectors:
        v = np.array(v, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("vectors must be finite")
        n0 = np.sqrt(max(_inner(W, v, v), 0.0))
        if n0 == 0:
            dropped += 1
            continue
        for _ in range(2):
            for q in out:
                v = v - _inner(W, q, v) * q
        nv = np.sqrt(max(_inner(W, v, v), 0.0))
        if nv < drop_tol * max(n0, 1.0) or nv < drop_tol:
            dropped += 1
            continue
        out.append(v / nv)
    if dropped:
        log.debug("gram_schmidt dropped %d dependent vector(s)", dropped)
    return AdaptiveBasis(out, W, dropped)


def low_mode_guess(M: int, N: int, rng, modes: int = 2, amplitude: float = 1.0, single=False) -> np.ndarray:
    """Random coefficients on Fourier modes i <= modes and radial indices j <= modes.

    With ``single=True`` only one randomly chosen Fourier index is populated.
    """
    c = SpectralCoefficients.zeros(M, N)
    mi, mj = min(modes, M), min(modes + 1, N - 1)
    if single:
        i = int(rng.integers(0, mi + 1))
        if i == 0:
            c.gamma[: min(modes + 1, N)] = amplitude * rng.uniform(-1.0, 1.0, min(modes + 1, N))
        else:
            c.alpha[i - 1, :mj] = amplitude * rng.uniform(-1.0, 1.0, mj)
            c.beta[i - 1, :mj] = amplitude * rng.uniform(-1.0, 1.0, mj)
        return c.flatten()
    c.alpha[:mi, :mj] = amplitude * rng.uniform(-1.0, 1.0, (mi, mj))
    c.beta[:mi, :mj] = amplitude * rng.uniform(-1.0, 1.0, (mi, mj))
    c.gamma[: min(modes + 1, N)] = amplitude * rng.uniform(-1.0, 1.0, min(modes + 1, N))
    return c.flatten()


def prolong(xi, M: int, N: int, M2: int, N2: int) -> np.ndarray:
    """Zero-pad coefficients of an (M, N) space into an (M2, N2) space.

    The basis functions do not depend on the truncation, so this is exact.
    """
    if M2 < M or N2 < N:
        raise ValueError("prolongation needs a larger target space")
    c = SpectralCoefficients.from_flat(M, N, xi)
    d = SpectralCoefficients.zeros(M2, N2)
    d.alpha[:M, : N - 1] = c.alpha
    d.beta[:M, : N - 1] = c.beta
    d.gamma[:N] = c.gamma
    return d.flatten()


def _is_trivial(dp: DiscreteProblem, xi, tol: float) -> bool:
    # zero field, or a constant state under Neumann conditions
    part = dp.nonconstant_part(xi) if dp.bc is BC.NEUMANN else xi
    return float(np.linalg.norm(part)) <= tol * max(1.0, float(np.linalg.norm(xi)))


def _solve(dp: DiscreteProblem, x0, cfg: TrustRegionConfig) -> TrustRegionResult:
    second = dp.second_order_term if cfg.hessian_mode == "full" else None
    return minimize(dp.residual, dp.jacobian, x0, cfg, second_order=second)


def seed_basis(dp: DiscreteProblem, xi0, cfg: Optional[AOBDConfig] = None):
    """Step 1: solve from ``xi0`` and normalise.

    Returns ``(chi0, alpha0, result)``.  If ``cfg.seed_resolution`` is set the
    solve runs on that coarser space and is prolonged, so chi0 is only an
    approximate solution of the production system.
    """
    cfg = cfg or AOBDConfig()
    xi0 = np.asarray(xi0, dtype=float)
    if cfg.seed_resolution is not None:
        Ms, Ns = cfg.seed_resolution
        coarse = DiscreteProblem(dp.domain, dp.problem, Ms, Ns)
        res = _solve(coarse, xi0, cfg.solver)
        u = prolong(res.x, Ms, Ns, dp.M, dp.N)
        trivial = _is_trivial(coarse, res.x, cfg.trivial_tol)
    else:
        res = _solve(dp, xi0, cfg.solver)
        u = res.x
        trivial = _is_trivial(dp, u, cfg.trivial_tol)
    # a stall on the rounding floor counts as converged
    good = res.converged or (np.all(np.isfinite(res.x)) and res.normF_inf <= cfg.record_tol)
    if not good:
        raise SeedError(f"step-one solve stopped with status {res.status}", res)
    if trivial:
        raise SeedError("step-one solve converged to a trivial state", res)
    W = _weight(dp, cfg.inner_product)
    alpha0 = float(np.sqrt(_inner(W, u, u)))
    return u / alpha0, alpha0, res


def amplitude_roots(
    dp: DiscreteProblem,
    fixed: Sequence[Tuple[np.ndarray, float]],
    free: np.ndarray,
    search: Optional[GridSearchSpec] = None,
) -> List[float]:
    """All roots alpha of  free . F(sum_i a_i chi_i + alpha * free) on the search box."""
    offset = np.zeros(dp.n)
    for chi, a in fixed:
        offset = offset + a * np.asarray(chi, dtype=float)
    rs = ReducedSystem(dp, np.asarray(free, dtype=float)[:, None], offset)

    def omega(a):
        return float(rs.residual(np.array([a]))[0])

    return list(find_all_roots(omega, search or GridSearchSpec()).roots)


class _Bordered:
    """Residual and Jacobian of the enrichment system in z = (a, a_new, chi)."""

    def __init__(self, dp: DiscreteProblem, X: np.ndarray, W, C=None):
        self.dp, self.X, self.W = dp, X, W
        self.m = X.shape[1]
        # chi is constrained orthogonal to the columns of C (X plus any extras)
        self.C = X if C is None else C
        self.WC = self.C if W is None else W @ self.C

    def split(self, z):
        m = self.m
        return z[:m], z[m], z[m + 1 :]

    def residual(self, z):
        a, an, chi = self.split(z)
        F = self.dp.residual(self.X @ a + an * chi)
        Wchi = chi if self.W is None else self.W @ chi
        return np.concatenate([F / an, self.WC.T @ chi, [chi @ Wchi - 1.0]])

    def jacobian(self, z):
        a, an, chi = self.split(z)
        dp, X, m, n = self.dp, self.X, self.m, self.dp.n
        u = X @ a + an * chi
        JF = dp.jacobian(u)
        F = dp.residual(u)
        Wchi = chi if self.W is None else self.W @ chi
        mc = self.C.shape[1]
        out = np.zeros((n + mc + 1, n + m + 1))
        out[:n, :m] = JF @ X / an
        out[:n, m] = JF @ chi / an - F / an**2
        out[:n, m + 1 :] = JF
        out[n : n + mc, m + 1 :] = self.WC.T
        out[n + mc, m + 1 :] = 2.0 * Wchi
        return out


def enrich_basis(dp: DiscreteProblem, basis: AdaptiveBasis, amplitudes, rng, cfg: Optional[AOBDConfig] = None):
    """Step 3: solve the bordered system from randomised complement starts.

    ``amplitudes`` is the starting value of the coefficients on the current
    basis.  On the disk, ``cfg.exclude_rotations`` also keeps chi orthogonal
    to the rotation tangent of every member, so rotated copies of known
    solutions are not rediscovered.  Returns ``(triples, results)`` where each triple is
    ``(a, a_new, chi)``; ``X a + a_new chi`` is a solution of the full system.
    """
    cfg = cfg or AOBDConfig()
    if not len(basis):
        raise ValueError("enrichment needs a nonempty basis")
    X = basis.matrix
    W = basis.W
    C = None
    if cfg.exclude_rotations and dp.domain.is_disk:
        tangents = [rotation_generator(x, dp.M, dp.N) for x in basis.members]
        C = basis.extended(tangents).matrix
    system = _Bordered(dp, X, W, C)
    scale = max(float(np.max(np.abs(amplitudes))), 1.0)
    triples, results = [], []
    for _ in range(cfg.starts_per_round):
        v = low_mode_guess(dp.M, dp.N, rng, modes=cfg.seed_modes + 1, single=True)
        v = v - system.C @ (system.WC.T @ v)
        v = v - system.C @ (system.WC.T @ v)
        nv = np.sqrt(_inner(W, v, v))
        if nv == 0:
            continue
        # damp the known amplitudes so the start is not pinned to a known solution
        a0 = np.asarray(amplitudes, dtype=float) * rng.uniform(-1.0, 1.0, len(amplitudes))
        an0 = scale * rng.uniform(0.5, 2.5) * rng.choice([-1.0, 1.0])
        z0 = np.concatenate([a0, [an0], v / nv])
        res = minimize(system.residual, system.jacobian, z0, cfg.enrich_solver)
        results.append(res)
        a, an, chi = system.split(res.x)
        if not np.all(np.isfinite(res.x)) or abs(an) < cfg.dedup_rtol:
            continue
        if float(np.max(np.abs(dp.residual(X @ a + an * chi)))) > cfg.record_tol:
            continue
        if any(_same(chi, c, cfg.dedup_rtol) or _same(chi, -c, cfg.dedup_rtol) for _, _, c in triples):
            continue
        triples.append((a.copy(), float(an), chi.copy()))
    return triples, results


def polish(dp: DiscreteProblem, xi0, cfg: Optional[AOBDConfig] = None, amplitudes=(), origin="") -> SolutionRecord:
    """Release every spectral coefficient and solve; the residual is re-checked independently."""
    cfg = cfg or AOBDConfig()
    res = _solve(dp, xi0, cfg.polish_solver)
    xi = res.x
    r = float(np.max(np.abs(dp.residual(xi)))) if np.all(np.isfinite(xi)) else float("inf")
    J = dp.functional(xi) if np.isfinite(r) else float("nan")
    return SolutionRecord(
        xi=xi,
        residual_inf=r,
        J=float(J),
        amplitudes=tuple(float(a) for a in amplitudes),
        iterations=res.iterations,
        converged=bool(r <= cfg.record_tol),
        origin=origin,
    )


def _same(x, y, rtol) -> bool:
    return float(np.linalg.norm(x - y)) <= rtol * max(1.0, float(np.linalg.norm(x)))


def dedup(records: Sequence[SolutionRecord], rtol: float = 1e-6) -> List[SolutionRecord]:
    """Merge records whose coefficient vectors agree; the lower residual wins.

    No sign flip: u and -u are different fields and are both kept.
    """
    out: List[SolutionRecord] = []
    for rec in records:
        for k, kept in enumerate(out):
            if _same(kept.xi, rec.xi, rtol):
                if rec.residual_inf < kept.residual_inf:
                    out[k] = rec
                break
        else:
            out.append(rec)
    return out


def refine(dp: DiscreteProblem, basis: AdaptiveBasis, seeds, cfg: Optional[AOBDConfig] = None):
    """Steps 5-7 over the whole basis, then a full polish of every candidate.

    ``seeds`` are amplitude tuples for the leading basis members (typically
    the Step-2 roots).  Returns ``(records, failures)``.
    """
    cfg = cfg or AOBDConfig()
    X = basis.matrix
    m = X.shape[1]
    candidates: List[Tuple[float, ...]] = []

    def add(cand):
        c = np.asarray(cand)
        for old in candidates:
            if len(old) == len(c) and _same(np.asarray(old), c, cfg.dedup_rtol):
                return False
        candidates.append(tuple(float(x) for x in c))
        return True

    frontier = [tuple(float(a) for a in s) for s in seeds]
    for s in frontier:
        add(s)
    while frontier and len(candidates) < cfg.max_paths:
        nxt = []
        for path in frontier:
            k = len(path)
            if k >= m:
                continue
            fixed = [(X[:, i], path[i]) for i in range(k)]
            for a_new in amplitude_roots(dp, fixed, X[:, k], cfg.search):
                # Step 6: free the leading k+1 amplitudes in the span
                rs = ReducedSystem(dp, X[:, : k + 1])
                start = np.array(path + (a_new,))
                res = minimize(rs.residual, rs.jacobian, start, cfg.solver)
                cand = tuple(float(x) for x in (res.x if res.converged else start))
                if len(candidates) < cfg.max_paths and add(cand):
                    nxt.append(cand)
        frontier = nxt
    records, failures = [], []
    for cand in candidates:
        xi0 = X[:, : len(cand)] @ np.asarray(cand)
        rec = polish(dp, xi0, cfg, amplitudes=cand, origin="refine")
        (records if rec.converged else failures).append(rec)
    return dedup(records, cfg.dedup_rtol), failures


@dataclass
class ContinuationPath:
    record_id: int
    b: List[float] = field(default_factory=list)
    J: List[float] = field(default_factory=list)
    residual: List[float] = field(default_factory=list)
    xi: List[np.ndarray] = field(default_factory=list)
    truncated: bool = False

    @property
    def final(self) -> np.ndarray:
        return self.xi[-1]


def continue_in_geometry(dp: DiscreteProblem, records: Sequence, b_target: float, steps: int, cfg=None):
    """Walk the minor semi-axis from ``dp.domain.b`` to ``b_target``.

    Each record is re-polished at every intermediate b, starting from its
    value at the previous b.  A record that loses convergence is truncated
    at the last good b and flagged.
    """
    cfg = cfg or AOBDConfig()
    b0 = dp.domain.b
    if not 0 < b_target <= b0:
        raise ValueError(f"target b must lie in (0, {b0}]")
    if steps < 1:
        raise ValueError("need at least one continuation step")
    bs = [b0] if b_target == b0 else list(np.linspace(b0, b_target, steps + 1))
    paths = []
    for rid, rec in enumerate(records):
        xi = np.asarray(getattr(rec, "xi", rec), dtype=float)
        path = ContinuationPath(rid)
        path.b.append(float(b0))
        path.J.append(float(dp.functional(xi)))
        path.residual.append(float(np.max(np.abs(dp.residual(xi)))))
        path.xi.append(xi)
        paths.append(path)
    for b in bs[1:]:
        dpb = dp.with_domain(dp.domain.with_b(float(b)))
        for path in paths:
            if path.truncated:
                continue
            rec = polish(dpb, path.xi[-1], cfg, origin="continuation")
            if not rec.converged:
                path.truncated = True
                log.info("record %d lost convergence at b=%.4f", path.record_id, b)
                continue
            path.b.append(float(b))
            path.J.append(rec.J)
            path.residual.append(rec.residual_inf)
            path.xi.append(rec.xi)
    return paths


@dataclass
class AOBDResult:
    records: List[SolutionRecord]
    basis: AdaptiveBasis
    step_one: Optional[TrustRegionResult]
    alpha0: float
    roots: List[float]
    failures: List[SolutionRecord] = field(default_factory=list)
    rounds: int = 0

    def nontrivial(self, dp: DiscreteProblem, tol: float = 1e-6) -> List[SolutionRecord]:
        return [r for r in self.records if not _is_trivial(dp, r.xi, tol)]


def first_seed(dp: DiscreteProblem, rng, cfg: Optional[AOBDConfig] = None, xi0=None):
    """Step 1 with retries: ``xi0`` first, then random low-mode guesses.

    Returns ``(chi0, alpha0, result)``; raises SeedError after
    ``cfg.max_seed_attempts`` failures.
    """
    cfg = cfg or AOBDConfig()
    Ms, Ns = cfg.seed_resolution or (dp.M, dp.N)
    last = None
    for attempt in range(cfg.max_seed_attempts):
        guess = xi0 if (xi0 is not None and attempt == 0) else low_mode_guess(Ms, Ns, rng, cfg.seed_modes, cfg.seed_amplitude)
        try:
            return seed_basis(dp, guess, cfg)
        except SeedError as err:
            log.info("step one attempt %d failed: %s", attempt, err)
            last = err.result
    raise SeedError(f"no usable step-one solution in {cfg.max_seed_attempts} attempts", last)


def solve_multiple(dp: DiscreteProblem, rng, cfg: Optional[AOBDConfig] = None, xi0=None) -> AOBDResult:
    """Run the whole adaptive basis loop; ``rng`` is a numpy Generator."""
    cfg = cfg or AOBDConfig()
    try:
        chi0, alpha0, step_one = first_seed(dp, rng, cfg, xi0)
    except SeedError as err:
        return AOBDResult([], AdaptiveBasis([], _weight(dp, cfg.inner_product)), err.result, 0.0, [])

    basis = gram_schmidt([chi0], _weight(dp, cfg.inner_product))
    roots = amplitude_roots(dp, [], basis.members[0], cfg.search)
    seeds = [(a,) for a in roots if abs(a) > cfg.trivial_tol]
    records: List[SolutionRecord] = []
    failures: List[SolutionRecord] = []
    for s in seeds:
        rec = polish(dp, s[0] * basis.members[0], cfg, amplitudes=s, origin="step-two")
        (records if rec.converged else failures).append(rec)
    records = dedup([r for r in records if not _is_trivial(dp, r.xi, cfg.trivial_tol)], cfg.dedup_rtol)

    stale, rounds = 0, 0
    amps = np.zeros(len(basis))
    amps[0] = alpha0
    while len(basis) < cfg.max_basis and stale < cfg.stale_rounds and rounds < cfg.max_rounds:
        rounds += 1
        before = len(records)
        triples, _ = enrich_basis(dp, basis, amps, rng, cfg)
        for a, an, chi in triples:
            xi = basis.matrix @ a + an * chi
            rec = polish(dp, xi, cfg, amplitudes=tuple(a) + (an,), origin="enrich")
            (records if rec.converged else failures).append(rec)
        room = cfg.max_basis - len(basis)
        grown = basis.extended([chi for _, _, chi in triples][:room])
        if len(grown) > len(basis):
            basis = grown
            new, fail = refine(dp, basis, seeds, cfg)
            records.extend(new)
            failures.extend(fail)
        records = dedup([r for r in records if not _is_trivial(dp, r.xi, cfg.trivial_tol)], cfg.dedup_rtol)
        stale = stale + 1 if len(records) == before else 0
        amps = np.concatenate([amps, np.zeros(len(basis) - len(amps))])
    records.sort(key=lambda r: (r.J, -r.norm))
    return AOBDResult(records, basis, step_one, alpha0, roots, failures, rounds)
