import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from scipy.special import jn_zeros, jnp_zeros

from multisol.galerkin import (
    DiscreteProblem,
    ReducedSystem,
    SpectralCoefficients,
    align_to_axes,
    evaluate_field,
    linear_eigenvalues,
    n_dofs,
    rotate_coefficients,
    rotation_generator,
)
from multisol.geometry import EllipseDomain
from multisol.problems import ginzburg_landau, henon_cubic, poisson, sine_gordon

DISK = EllipseDomain(1.0, 1.0)
ELLIPSE = EllipseDomain(1.0, 0.7)


def _random_xi(dp, rng, scale=0.5):
    c = SpectralCoefficients.zeros(dp.M, dp.N)
    c.alpha[:] = scale * rng.standard_normal(c.alpha.shape) / (1 + np.arange(dp.N - 1))
    c.beta[:] = scale * rng.standard_normal(c.beta.shape) / (1 + np.arange(dp.N - 1))
    c.gamma[:] = scale * rng.standard_normal(dp.N) / (1 + np.arange(dp.N))
    return c.flatten()


@given(st.integers(1, 6), st.integers(2, 7), st.data())
def test_coefficient_layout_round_trip(M, N, data):
    v = np.array(data.draw(st.lists(st.floats(-1e3, 1e3), min_size=n_dofs(M, N), max_size=n_dofs(M, N))))
    c = SpectralCoefficients.from_flat(M, N, v)
    assert c.alpha.shape == (M, N - 1) and c.gamma.shape == (N,)
    assert np.array_equal(c.flatten(), v)


def test_dirichlet_disk_eigenvalues_match_bessel_zeros():
    dp = DiscreteProblem(DISK, sine_gordon(1.0), 20, 20)
    vals = dp.eigenvalues(4)
    assert vals[0] == pytest.approx(jn_zeros(0, 1)[0] ** 2, abs=1e-6)
    # the first nonradial eigenvalue is double (sin and cos)
    assert vals[1:3] == pytest.approx([jn_zeros(1, 1)[0] ** 2] * 2, abs=1e-6)


def test_neumann_disk_eigenvalues_match_bessel_derivative_zeros():
    dp = DiscreteProblem(DISK, sine_gordon(1.0, "neumann"), 20, 20)
    vals = dp.eigenvalues(3)
    assert abs(vals[0]) < 1e-10
    assert vals[1:3] == pytest.approx([jnp_zeros(1, 1)[0] ** 2] * 2, abs=1e-6)


def test_eigenvalues_scale_with_domain_size():
    small = linear_eigenvalues(DiscreteProblem(EllipseDomain(1.0, 0.6), sine_gordon(1.0), 12, 16), count=3)
    big = linear_eigenvalues(DiscreteProblem(EllipseDomain(2.0, 1.2), sine_gordon(1.0), 12, 16), count=3)
    assert np.allclose(small, 4 * big, rtol=1e-10)


def test_ellipse_eigenvalue_converges():
    lo = DiscreteProblem(ELLIPSE, sine_gordon(1.0), 10, 12).eigenvalues(1)[0]
    hi = DiscreteProblem(ELLIPSE, sine_gordon(1.0), 16, 20).eigenvalues(1)[0]
    assert abs(lo - hi) < 1e-8
    # the disk of equal area has the smallest first eigenvalue
    assert hi > jn_zeros(0, 1)[0] ** 2 / 0.7


def test_closed_form_assembly_matches_quadrature():
    a = DiscreteProblem(DISK, henon_cubic(), 6, 8, closed_form=True)
    b = DiscreteProblem(DISK, henon_cubic(), 6, 8, closed_form=False)
    assert np.allclose(a.K, b.K, atol=1e-12)
    assert np.allclose(a.mass, b.mass, atol=1e-12)


def _manufactured(a, b):
    x, y = sp.symbols("x y")
    u = (1 - x**2 / a**2 - y**2 / b**2) * sp.exp(x) * sp.cos(y)
    src = -(sp.diff(u, x, 2) + sp.diff(u, y, 2))
    return sp.lambdify((x, y), u, "numpy"), sp.lambdify((x, y), src, "numpy")


@pytest.mark.parametrize("b", [1.0, 0.6])
def test_poisson_manufactured_solution_spectral_convergence(b):
    u, src = _manufactured(1.0, b)
    errs = []
    for M, N in [(4, 6), (8, 10), (12, 14)]:
        dp = DiscreteProblem(EllipseDomain(1.0, b), poisson(src), M, N)
        xi = np.linalg.solve(dp.K, -dp.residual(np.zeros(dp.n)))
        r = np.linspace(0, 1, 15)
        th = np.linspace(0, 2 * np.pi, 17)
        R, T = np.meshgrid(r, th)
        exact = u(R * np.cos(T), b * R * np.sin(T))
        errs.append(np.max(np.abs(dp.evaluate(xi, R.ravel(), T.ravel()) - exact.ravel())))
    assert errs[-1] < 1e-9
    assert errs[1] < 1e-2 * errs[0] and errs[2] < 1e-2 * errs[1]


@pytest.mark.parametrize(
    "problem,domain",
    [(henon_cubic(), ELLIPSE), (sine_gordon(30.0), DISK), (sine_gordon(20.0, "neumann"), ELLIPSE), (ginzburg_landau(0.2), ELLIPSE)],
    ids=["henon", "sg-d", "sg-n", "gl"],
)
def test_jacobian_and_gradient_identity(problem, domain, rng):
    dp = DiscreteProblem(domain, problem, 3, 5)
    xi = _random_xi(dp, rng)
    h = 1e-6
    J = dp.jacobian(xi)
    Jfd = np.column_stack([(dp.residual(xi + h * e) - dp.residual(xi - h * e)) / (2 * h) for e in np.eye(dp.n)])
    assert np.allclose(J, Jfd, atol=1e-6)
    # F = grad J / (a b)
    g = np.array([(dp.functional(xi + h * e) - dp.functional(xi - h * e)) / (2 * h) for e in np.eye(dp.n)])
    assert np.allclose(g / (domain.a * domain.b), dp.residual(xi), atol=1e-6)
    # second-order term is the derivative of J^T F
    F = dp.residual(xi)
    S = dp.second_order_term(xi, F)
    Sfd = np.column_stack(
        [((dp.jacobian(xi + h * e) - dp.jacobian(xi - h * e)).T @ F) / (2 * h) for e in np.eye(dp.n)]
    )
    assert np.allclose(S, Sfd, atol=1e-5)


def test_henon_residual_is_odd(rng):
    dp = DiscreteProblem(DISK, henon_cubic(), 5, 6)
    xi = _random_xi(dp, rng)
    assert np.array_equal(dp.residual(-xi), -dp.residual(xi))


@given(st.integers(0, 23))
def test_grid_rotations_commute_with_residual(k):
    rng = np.random.default_rng(k)
    dp = DiscreteProblem(DISK, henon_cubic(), 5, 6)
    xi = _random_xi(dp, rng)
    phi = 2 * np.pi * k / dp.n_theta
    lhs = dp.residual(rotate_coefficients(xi, dp.M, dp.N, phi))
    rhs = rotate_coefficients(dp.residual(xi), dp.M, dp.N, phi)
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(st.floats(-np.pi, np.pi), st.floats(0.0, 1.0), st.floats(0, 2 * np.pi))
def test_rotation_moves_field(phi, r, th):
    rng = np.random.default_rng(3)
    dp = DiscreteProblem(DISK, henon_cubic(), 4, 5)
    xi = _random_xi(dp, rng)
    rot = rotate_coefficients(xi, dp.M, dp.N, phi)
    assert dp.evaluate(rot, [r], [th + phi])[0] == pytest.approx(dp.evaluate(xi, [r], [th])[0], abs=1e-12)


def test_rotation_generator_is_orbit_tangent(rng):
    xi = _random_xi(DiscreteProblem(DISK, henon_cubic(), 4, 5), rng)
    h = 1e-6
    fd = (rotate_coefficients(xi, 4, 5, h) - rotate_coefficients(xi, 4, 5, -h)) / (2 * h)
    assert np.allclose(rotation_generator(xi, 4, 5), fd, atol=1e-8)


def test_align_to_axes_leaves_dominant_cosine(rng):
    M, N = 4, 5
    c = SpectralCoefficients.zeros(M, N)
    c.beta[1, 0] = 2.0
    xi = rotate_coefficients(c.flatten(), M, N, 0.4)
    out = SpectralCoefficients.from_flat(M, N, align_to_axes(xi, M, N))
    assert abs(out.alpha[1, 0]) < 1e-12 and out.beta[1, 0] == pytest.approx(2.0)


def test_dirichlet_field_vanishes_on_boundary(rng):
    dp = DiscreteProblem(ELLIPSE, henon_cubic(), 4, 6)
    xi = _random_xi(dp, rng)
    th = np.linspace(0, 2 * np.pi, 13)
    assert np.allclose(dp.evaluate(xi, np.ones_like(th), th), 0.0, atol=1e-13)
    # single-valued at the origin
    vals = dp.evaluate(xi, np.zeros_like(th), th)
    assert np.allclose(vals, vals[0], atol=1e-13)


def test_evaluate_matches_grid_values_and_radial_derivative(rng):
    dp = DiscreteProblem(ELLIPSE, sine_gordon(5.0, "neumann"), 4, 6)
    xi = _random_xi(dp, rng)
    assert np.allclose(dp.evaluate(xi, dp.Rg, dp.TH), dp.grid_values(xi), atol=1e-12)
    r, th, h = np.array([0.3, 0.8]), np.array([0.2, 2.0]), 1e-6
    fd = (dp.evaluate(xi, r + h, th) - dp.evaluate(xi, r - h, th)) / (2 * h)
    assert np.allclose(dp.evaluate(xi, r, th, radial_derivative=True), fd, atol=1e-7)
    assert np.allclose(evaluate_field(dp, xi, np.column_stack([r, th])), dp.evaluate(xi, r, th))
    with pytest.raises(ValueError):
        dp.evaluate(xi, [1.5], [0.0])


def test_projection_reproduces_members(rng):
    dp = DiscreteProblem(ELLIPSE, henon_cubic(), 4, 6)
    xi = _random_xi(dp, rng)
    back = dp.project(lambda R, T: dp.evaluate(xi, R, T), coords="polar")
    assert np.allclose(back, xi, atol=1e-10)


def test_gradient_energy_split_sums_to_stiffness(rng):
    dp = DiscreteProblem(ELLIPSE, henon_cubic(), 4, 6)
    xi = _random_xi(dp, rng)
    gx, gy = dp.gradient_energy_split(xi)
    assert gx + gy == pytest.approx(dp.domain.a * dp.domain.b * float(xi @ dp.K @ xi), rel=1e-10)


def test_constant_vector_only_for_neumann():
    with pytest.raises(ValueError):
        DiscreteProblem(DISK, henon_cubic(), 3, 4).constant_vector(1.0)
    dp = DiscreteProblem(ELLIPSE, sine_gordon(20.0, "neumann"), 3, 4)
    c = dp.constant_vector(2 * np.pi)
    assert np.allclose(dp.evaluate(c, [0.0, 0.5, 1.0], [0.0, 1.0, 2.0]), 2 * np.pi)
    assert np.allclose(dp.residual(c), 0.0, atol=1e-12)
    assert not np.any(dp.nonconstant_part(c))


def test_reduced_system_is_projection(rng):
    dp = DiscreteProblem(ELLIPSE, henon_cubic(), 3, 5)
    X = np.linalg.qr(rng.standard_normal((dp.n, 3)))[0]
    off = _random_xi(dp, rng, 0.1)
    red = ReducedSystem(dp, X, off)
    c = rng.standard_normal(3)
    assert np.allclose(red.residual(c), X.T @ dp.residual(off + X @ c), atol=1e-12)
    assert np.allclose(red.jacobian(c), X.T @ dp.jacobian(off + X @ c) @ X, atol=1e-12)


def test_quadrature_floor_enforced():
    with pytest.raises(ValueError):
        DiscreteProblem(DISK, henon_cubic(), 8, 8, n_theta=10)
    with pytest.raises(ValueError):
        DiscreteProblem(DISK, henon_cubic(), 0, 8)


@pytest.fixture(scope="module")
def dipole():
    from multisol.aobd import polish

    dp = DiscreteProblem(DISK, henon_cubic(), 6, 8)
    rec = polish(dp, dp.project(lambda x, y: 10.0 * x * (1 - x * x - y * y)))
    assert rec.converged
    return dp, rec.xi


@given(beta=st.floats(-2 * np.pi, 2 * np.pi))
def test_rotated_solution_keeps_residual(dipole, beta):
    dp, xi = dipole
    f0 = np.max(np.abs(dp.residual(xi)))
    f1 = np.max(np.abs(dp.residual(rotate_coefficients(xi, dp.M, dp.N, beta))))
    assert abs(f1 - f0) <= 1e-12
