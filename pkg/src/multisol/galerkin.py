"""Legendre-Fourier Galerkin discretisation on an elliptical disk.

Unknowns are ordered ``xi = (alpha_ij, beta_ij, gamma_l)`` with ``alpha`` the
sin(i theta) and ``beta`` the cos(i theta) coefficients (i = 1..M, j =
0..N-2, row-major) and ``gamma`` the N axisymmetric coefficients.

The weak form is derived in the parametric (t, theta) variables, t = 2r - 1.
Dividing the physical form by the constant Jacobian factor a*b gives

    s * int [ w1 (t+1) u_t v_t - w3/2 (u_t v_th + u_th v_t) + w2/(t+1) u_th v_th ] dt dth
        - int f(x, u) v (t+1)/4 dt dth = 0,

which is exactly (1/ab) times the derivative of the energy, so the residual
vector F is (1/ab) grad J.  The linear part is polynomial in t and a
trigonometric polynomial in theta, and the tensor Gauss x trapezoid grid used
here integrates it exactly.  On the disk with Dirichlet data it is assembled
directly from the closed-form 1D matrices instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .geometry import EllipseDomain, omega_coeffs
from .legendre import RadialKind, banded_matrix, gauss_rule, normalization, radial_basis
from .problems import BC, ProblemSpec

__all__ = [
    "SpectralCoefficients",
    "DiscreteProblem",
    "ReducedSystem",
    "n_dofs",
    "assemble_residual",
    "assemble_jacobian",
    "functional_value",
    "evaluate_field",
    "linear_eigenvalues",
    "rotate_coefficients",
    "rotation_generator",
    "align_to_axes",
    "rotate_coefficients",
]


def n_dofs(M: int, N: int) -> int:
    return 2 * M * (N - 1) + N


@dataclass
class SpectralCoefficients:
    M: int
    N: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(self.M, self.N - 1)
        self.beta = np.asarray(self.beta, dtype=float).reshape(self.M, self.N - 1)
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(self.N)

    @classmethod
    def zeros(cls, M: int, N: int) -> "SpectralCoefficients":
        return cls(M, N, np.zeros((M, N - 1)), np.zeros((M, N - 1)), np.zeros(N))

    @classmethod
    def from_flat(cls, M: int, N: int, vec) -> "SpectralCoefficients":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (n_dofs(M, N),):
            raise ValueError(f"expected {n_dofs(M, N)} coefficients, got shape {vec.shape}")
        k = M * (N - 1)
        return cls(M, N, vec[:k], vec[k : 2 * k], vec[2 * k :])

    @property
    def size(self) -> int:
        return n_dofs(self.M, self.N)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.alpha.ravel(), self.beta.ravel(), self.gamma])


def _as_flat(dp: "DiscreteProblem", xi) -> np.ndarray:
    if isinstance(xi, SpectralCoefficients):
        if (xi.M, xi.N) != (dp.M, dp.N):
            raise ValueError(f"coefficients are ({xi.M}, {xi.N}), problem is ({dp.M}, {dp.N})")
        return xi.flatten()
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (dp.n,):
        raise ValueError(f"expected {dp.n} coefficients, got shape {xi.shape}")
    return xi


class DiscreteProblem:
    """Quadrature grid, synthesis matrices and linear operators for one setup.

    Instances are treated as immutable once built.
    """

    def __init__(
        self,
        domain: EllipseDomain,
        problem: ProblemSpec,
        M: int,
        N: int,
        n_t: Optional[int] = None,
        n_theta: Optional[int] = None,
        closed_form: bool = True,
    ):
        if M < 1 or N < 2:
            raise ValueError(f"need M >= 1 and N >= 2, got M={M}, N={N}")
        n_t = 2 * N + 2 if n_t is None else n_t
        n_theta = 4 * M + 4 if n_theta is None else n_theta
        if n_theta < 3 * M + 2:
            raise ValueError(f"n_theta={n_theta} below the dealiasing floor 3M+2={3 * M + 2}")
        if n_t < -(-3 * N // 2) + 2:
            raise ValueError(f"n_t={n_t} below the floor ceil(3N/2)+2")
        self.domain = domain
        self.problem = problem
        self.M, self.N = M, N
        self.n_t, self.n_theta = n_t, n_theta
        self.n = n_dofs(M, N)
        self._build_grid()
        self._build_synthesis()
        self._build_linear(closed_form)

    # ------------------------------------------------------------------ setup
    @property
    def bc(self) -> BC:
        return self.problem.bc

    @property
    def radial_kinds(self):
        if self.bc is BC.DIRICHLET:
            return RadialKind.INTERIOR_DIRICHLET, RadialKind.OUTER_DIRICHLET
        return RadialKind.POLAR, RadialKind.UNCONSTRAINED

    def _build_grid(self):
        rule = gauss_rule(self.n_t)
        self.t = rule.nodes
        self.wt = rule.weights
        self.theta = 2 * np.pi * np.arange(self.n_theta) / self.n_theta
        self.r = 0.5 * (self.t + 1.0)
        w = np.outer(self.wt, np.full(self.n_theta, 2 * np.pi / self.n_theta))
        tp1 = np.broadcast_to((self.t + 1.0)[:, None], w.shape)
        self.w = w.ravel()
        self.tp1 = np.ascontiguousarray(tp1).ravel()
        # weights of int g (t+1)/4 dt dth, i.e. of int g r dr dth
        self.wq = self.w * self.tp1 / 4.0
        R, TH = np.meshgrid(self.r, self.theta, indexing="ij")
        self.X = (self.domain.a * R * np.cos(TH)).ravel()
        self.Y = (self.domain.b * R * np.sin(TH)).ravel()
        self.TH = TH.ravel()
        self.Rg = R.ravel()

    def _mode_tables(self, t):
        kind_k, kind_0 = self.radial_kinds
        Rv, Rd = radial_basis(kind_k, self.N - 1, t)
        Gv, Gd = radial_basis(kind_0, self.N, t)
        return Rv, Rd, Gv, Gd

    def _build_synthesis(self):
        M, N = self.M, self.N
        Rv, Rd, Gv, Gd = self._mode_tables(self.t)
        i = np.arange(1, M + 1)[:, None]
        S = np.sin(i * self.theta[None, :])
        C = np.cos(i * self.theta[None, :])
        ng = self.n_t * self.n_theta
        ones = np.ones(self.n_theta)

        def block(rad, ang):
            return np.einsum("jp,iq->pqij", rad, ang).reshape(ng, -1)

        def gblock(rad):
            return np.einsum("lp,q->pql", rad, ones).reshape(ng, -1)

        self.V = np.hstack([block(Rv, S), block(Rv, C), gblock(Gv)])
        self.Dt = np.hstack([block(Rd, S), block(Rd, C), gblock(Gd)])
        self.Dth = np.hstack([block(Rv, i * C), block(Rv, -i * S), np.zeros((ng, N))])

    def _quadrature_stiffness(self):
        w1, w2, w3 = omega_coeffs(self.domain, self.TH)
        Dt, Dth = self.Dt, self.Dth
        K = Dt.T @ ((self.w * w1 * self.tp1)[:, None] * Dt)
        K += Dth.T @ ((self.w * w2 / self.tp1)[:, None] * Dth)
        cross = Dt.T @ ((self.w * w3)[:, None] * Dth)
        K -= 0.5 * (cross + cross.T)
        return 0.5 * (K + K.T)

    def _quadrature_mass(self):
        Mq = self.V.T @ (self.wq[:, None] * self.V)
        return 0.5 * (Mq + Mq.T)

    def _closed_form_operators(self):
        M, N = self.M, self.N
        c = normalization(np.arange(N - 1))
        cc = np.outer(c, c)
        A = banded_matrix("A", N - 1) * cc
        B = banded_matrix("B", N - 1) * cc
        C = banded_matrix("C", N - 1) * cc
        K = np.zeros((self.n, self.n))
        Mm = np.zeros((self.n, self.n))
        size = N - 1
        for blk in range(2):
            for i in range(1, M + 1):
                s = (blk * M + i - 1) * size
                K[s : s + size, s : s + size] = np.pi * (A + i**2 * B)
                Mm[s : s + size, s : s + size] = np.pi / 4.0 * C
        g = 2 * M * size
        K[g:, g:] = 2 * np.pi * banded_matrix("D", N)
        Mm[g:, g:] = 2 * np.pi / 4.0 * banded_matrix("E", N)
        return K, Mm

    def _build_linear(self, closed_form: bool):
        self.uses_closed_form = bool(closed_form and self.domain.is_disk and self.bc is BC.DIRICHLET)
        if self.uses_closed_form:
            self.K, self.mass = self._closed_form_operators()
        else:
            self.K, self.mass = self._quadrature_stiffness(), self._quadrature_mass()

    # ------------------------------------------------------------ operators
    @property
    def s(self) -> float:
        return self.problem.stiffness_scale

    @property
    def xy(self):
        return (self.X, self.Y)

    def grid_values(self, xi) -> np.ndarray:
        return self.V @ _as_flat(self, xi)

    def residual(self, xi) -> np.ndarray:
        xi = _as_flat(self, xi)
        U = self.V @ xi
        return self.s * (self.K @ xi) - self.V.T @ (self.wq * self.problem.f(self.xy, U))

    def jacobian(self, xi) -> np.ndarray:
        if self.problem.f_u is None:
            raise NotImplementedError(f"problem {self.problem.name!r} has no f_u callback")
        U = self.V @ _as_flat(self, xi)
        d = self.wq * self.problem.f_u(self.xy, U)
        return self.s * self.K - self.V.T @ (d[:, None] * self.V)

    def second_order_term(self, xi, F) -> np.ndarray:
        """sum_i F_i Hess(F_i), the curvature part of Hess(|F|^2 / 2)."""
        if self.problem.f_uu is None:
            raise NotImplementedError(f"problem {self.problem.name!r} has no f_uu callback")
        U = self.V @ _as_flat(self, xi)
        d = self.wq * self.problem.f_uu(self.xy, U) * (self.V @ F)
        return -(self.V.T @ (d[:, None] * self.V))

    def functional(self, xi) -> float:
        if self.problem.V is None:
            raise NotImplementedError(f"problem {self.problem.name!r} has no potential")
        xi = _as_flat(self, xi)
        U = self.V @ xi
        lin = 0.5 * self.s * float(xi @ self.K @ xi)
        pot = float(self.wq @ self.problem.V(self.xy, U))
        return self.domain.a * self.domain.b * (lin - pot)

    def gradient_energy_split(self, xi):
        """(int u_x^2, int u_y^2) over the physical ellipse."""
        xi = _as_flat(self, xi)
        ut = self.Dt @ xi
        uth = self.Dth @ xi
        ur = 2.0 * ut
        r = self.Rg
        c, s = np.cos(self.TH), np.sin(self.TH)
        ux = (c * ur - s * uth / r) / self.domain.a
        uy = (s * ur + c * uth / r) / self.domain.b
        ab = self.domain.a * self.domain.b
        return ab * float(self.wq @ ux**2), ab * float(self.wq @ uy**2)

    def evaluate(self, xi, r, theta, radial_derivative: bool = False) -> np.ndarray:
        """Field values at arbitrary points (r, theta), r in [0, 1].

        With ``radial_derivative`` the values of du/dr are returned instead.
        """
        xi = _as_flat(self, xi)
        r = np.atleast_1d(np.asarray(r, dtype=float))
        theta = np.broadcast_to(np.asarray(theta, dtype=float), r.shape)
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("r must lie in [0, 1]")
        c = SpectralCoefficients.from_flat(self.M, self.N, xi)
        Rv, Rd, Gv, Gd = self._mode_tables(2.0 * r - 1.0)
        if radial_derivative:
            Rv, Gv = 2.0 * Rd, 2.0 * Gd
        i = np.arange(1, self.M + 1)[:, None]
        S = np.sin(i * theta[None, :])
        C = np.cos(i * theta[None, :])
        # sum over j first (radial), then over Fourier modes
        ua = np.einsum("ij,jp->ip", c.alpha, Rv)
        ub = np.einsum("ij,jp->ip", c.beta, Rv)
        return np.sum(ua * S + ub * C, axis=0) + c.gamma @ Gv

    def project(self, func, coords: str = "cartesian") -> np.ndarray:
        """Weighted L2 projection of func onto the discrete space.

        ``func`` receives (x, y) physical coordinates, or (r, theta) when
        ``coords == "polar"``.
        """
        if coords == "polar":
            vals = func(self.Rg, self.TH)
        else:
            vals = func(self.X, self.Y)
        rhs = self.V.T @ (self.wq * np.broadcast_to(vals, self.wq.shape))
        return scipy.linalg.solve(self.mass, rhs, assume_a="pos")

    def eigenvalues(self, count: Optional[int] = None, vectors: bool = False):
        vals, vecs = scipy.linalg.eigh(self.K, self.mass)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if count is not None:
            vals, vecs = vals[:count], vecs[:, :count]
        return (vals, vecs) if vectors else vals

    def with_domain(self, domain: EllipseDomain) -> "DiscreteProblem":
        return DiscreteProblem(domain, self.problem, self.M, self.N, self.n_t, self.n_theta)

    def with_problem(self, problem: ProblemSpec) -> "DiscreteProblem":
        return DiscreteProblem(self.domain, problem, self.M, self.N, self.n_t, self.n_theta)

    def refined(self, factor: int = 2) -> "DiscreteProblem":
        """Same discrete space on a finer quadrature grid."""
        n_theta = factor * self.n_theta
        return DiscreteProblem(self.domain, self.problem, self.M, self.N, factor * self.n_t, n_theta)

    def constant_vector(self, value: float) -> np.ndarray:
        """Coefficients of the constant function (Neumann spaces only)."""
        if self.bc is not BC.NEUMANN:
            raise ValueError("constants are not representable under Dirichlet conditions")
        xi = np.zeros(self.n)
        xi[2 * self.M * (self.N - 1)] = value  # gamma_0 multiplies L_0 = 1
        return xi

    def nonconstant_part(self, xi) -> np.ndarray:
        xi = _as_flat(self, xi).copy()
        if self.bc is BC.NEUMANN:
            xi[2 * self.M * (self.N - 1)] = 0.0
        return xi


def rotate_coefficients(xi, M: int, N: int, angle: float) -> np.ndarray:
    """Coefficients of u(r, theta - angle): a phase shift of every Fourier mode."""
    c = SpectralCoefficients.from_flat(M, N, xi)
    i = np.arange(1, M + 1)[:, None]
    ca, sa = np.cos(i * angle), np.sin(i * angle)
    alpha = c.alpha * ca + c.beta * sa
    beta = c.beta * ca - c.alpha * sa
    return SpectralCoefficients(M, N, alpha, beta, c.gamma).flatten()


def align_to_axes(xi, M: int, N: int) -> np.ndarray:
    """Rotate so that the dominant Fourier mode becomes a pure cosine.

    On an ellipse the rotation orbit of a disk solution breaks up, and only
    axis-aligned members survive; this picks the one with u even in theta.
    """
    c = SpectralCoefficients.from_flat(M, N, xi)
    power = (c.alpha**2 + c.beta**2).sum(axis=1)
    if not np.any(power > 0):
        return np.array(xi, dtype=float)
    m = int(np.argmax(power))
    j = int(np.argmax(c.alpha[m] ** 2 + c.beta[m] ** 2))
    phi = np.arctan2(-c.alpha[m, j], c.beta[m, j]) / (m + 1)
    return rotate_coefficients(xi, M, N, phi)


def rotation_generator(xi, M: int, N: int) -> np.ndarray:
    """d/d(angle) of rotate_coefficients at angle 0, the tangent of the rotation orbit."""
    c = SpectralCoefficients.from_flat(M, N, xi)
    i = np.arange(1, M + 1)[:, None]
    return SpectralCoefficients(M, N, i * c.beta, -i * c.alpha, np.zeros(N)).flatten()


class ReducedSystem:
    """Galerkin projection of the discrete system onto span(X).

    With u = X c, the reduced residual is X^T F(X c) and its Jacobian
    X^T J(X c) X; grid values of the columns of X are cached so each
    evaluation costs one pass over the quadrature grid.
    """

    def __init__(self, dp: DiscreteProblem, X, offset=None):
        self.dp = dp
        self.X = np.atleast_2d(np.asarray(X, dtype=float).T).T
        self.offset = np.zeros(dp.n) if offset is None else np.asarray(offset, dtype=float)
        self.G = dp.V @ self.X
        self.g0 = dp.V @ self.offset
        KX = dp.K @ self.X
        self.KXX = self.X.T @ KX
        self.KX0 = KX.T @ self.offset

    def full(self, c) -> np.ndarray:
        return self.offset + self.X @ c

    def residual(self, c) -> np.ndarray:
        dp = self.dp
        U = self.g0 + self.G @ c
        lin = dp.s * (self.KXX @ c + self.KX0)
        return lin - self.G.T @ (dp.wq * dp.problem.f(dp.xy, U))

    def jacobian(self, c) -> np.ndarray:
        dp = self.dp
        U = self.g0 + self.G @ c
        d = dp.wq * dp.problem.f_u(dp.xy, U)
        return dp.s * self.KXX - self.G.T @ (d[:, None] * self.G)


def assemble_residual(dp: DiscreteProblem, xi) -> np.ndarray:
    return dp.residual(xi)


def assemble_jacobian(dp: DiscreteProblem, xi) -> np.ndarray:
    return dp.jacobian(xi)


def functional_value(dp: DiscreteProblem, xi) -> float:
    return dp.functional(xi)


def evaluate_field(dp: DiscreteProblem, xi, grid) -> np.ndarray:
    """Field values at a list of (r, theta) pairs."""
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    return dp.evaluate(xi, grid[:, 0], grid[:, 1])


def linear_eigenvalues(dp: DiscreteProblem, bc="dirichlet", count: int = 1) -> np.ndarray:
    """Smallest eigenvalues of -Lap on dp.domain with the given boundary condition."""
    if count < 1:
        raise ValueError("count must be >= 1")
    bc = BC(bc)
    if bc is not dp.bc:
        dp = dp.with_problem(
            ProblemSpec(name="laplace", f=dp.problem.f, f_u=dp.problem.f_u, f_uu=None, V=None, bc=bc)
        )
    vals = dp.eigenvalues(count)
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError(f"generalised eigensolver returned non-finite values: {vals}")
    return vals
