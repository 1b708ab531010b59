import math

import numpy as np
import pytest

from covrecon import fem_space as fs
from covrecon.fem_space import build_space


def hat_products_by_quadrature(n):
    """Independent mass matrix: Gauss quadrature of hat products on each element."""
    g, w = np.polynomial.legendre.leggauss(4)
    h = 1.0 / n
    M = np.zeros((n + 1, n + 1))
    for e in range(n):
        x = e * h + h * (g + 1) / 2
        phi = np.stack([(e * h + h - x) / h, (x - e * h) / h])
        M[e:e + 2, e:e + 2] += (phi * (w * h / 2)) @ phi.T
    return M


def test_sizes():
    sp = build_space(1, 4)
    assert sp.n_h == 5 and sp.h == 0.25
    assert build_space(2, 4).n_h == 25


def test_invalid_spaces():
    with pytest.raises(ValueError):
        build_space(3, 4)
    with pytest.raises(ValueError):
        build_space(1, 1)
    with pytest.raises(ValueError):
        build_space(1, 4, "spectral")


@pytest.mark.parametrize("n", [2, 5, 17])
def test_mass_matrix_matches_quadrature(n):
    M = build_space(1, n).mass.matrix
    np.testing.assert_allclose(M, hat_products_by_quadrature(n), atol=1e-15)


def test_mass_matrix_2d_is_kronecker_and_sums_to_area():
    sp = build_space(2, 6)
    M1 = hat_products_by_quadrature(6)
    np.testing.assert_allclose(sp.mass.matrix, np.kron(M1, M1), atol=1e-15)
    assert sp.mass.matrix.sum() == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("d,n", [(1, 3), (1, 40), (2, 5)])
def test_mass_cholesky_and_extreme_eigenvalues(d, n):
    mm = build_space(d, n).mass
    np.testing.assert_allclose(mm.chol @ mm.chol.T, mm.matrix, atol=1e-15)
    assert np.allclose(mm.chol, np.tril(mm.chol))
    w = np.linalg.eigvalsh(mm.matrix)
    assert mm.lambda_min == pytest.approx(w[0], rel=1e-10)
    assert mm.lambda_max == pytest.approx(w[-1], rel=1e-10)
    assert mm.lambda_min > 0


@pytest.mark.parametrize("d", [1, 2])
def test_orthonormal_basis_has_identity_mass(d):
    sp = build_space(d, 4, "l2-orthonormal")
    np.testing.assert_array_equal(sp.mass.matrix, np.eye(sp.n_h))
    # the underlying functions really are orthonormal
    nodal = build_space(d, 4)
    C = np.column_stack([sp.to_nodal(e) for e in np.eye(sp.n_h)])
    np.testing.assert_allclose(C.T @ nodal.mass.matrix @ C, np.eye(sp.n_h), atol=1e-12)


def test_inner_products():
    sp = build_space(1, 4)
    one = np.ones(5)
    assert fs.inner_product(sp, one, one) == pytest.approx(1.0, abs=1e-15)
    e = np.eye(5)
    assert fs.inner_product(sp, e[1], e[1]) == pytest.approx(2 * sp.h / 3, abs=1e-15)
    ortho = build_space(1, 4, "l2-orthonormal")
    assert fs.inner_product(ortho, e[0], e[1]) == 0.0
    with pytest.raises(ValueError):
        fs.inner_product(sp, np.ones(4), one)


@pytest.mark.parametrize("kind", fs.BASIS_KINDS)
def test_projection_of_constant_and_idempotence(kind):
    sp = build_space(1, 8, kind)
    c1 = fs.project_l2(sp, lambda x: np.ones_like(x))
    if kind == "nodal":
        np.testing.assert_allclose(c1, 1.0, atol=1e-13)
    np.testing.assert_allclose(sp.to_nodal(c1), 1.0, atol=1e-13)
    c = np.random.default_rng(0).standard_normal(sp.n_h)
    again = fs.project_l2(sp, lambda x: fs.evaluate(sp, c, x))
    assert np.abs(again - c).max() <= 1e-10


def test_projection_2d_idempotence():
    sp = build_space(2, 5)
    c = np.random.default_rng(1).standard_normal(sp.n_h)

    def f(x, y):
        X, Y = np.broadcast_arrays(x, y)
        return fs.evaluate(sp, c, np.stack([X.ravel(), Y.ravel()], -1)).reshape(X.shape)

    assert np.abs(fs.project_l2(sp, f) - c).max() <= 1e-10


def test_projection_error_is_second_order():
    errs = []
    for n in (8, 16, 32):
        sp = build_space(1, n)
        c = fs.project_l2(sp, np.sin)
        x, w = fs.gauss_points(n, 8)
        errs.append(math.sqrt(w @ (fs.evaluate(sp, c, x) - np.sin(x)) ** 2))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 4.0, rtol=0.02)


def test_moments_against_closed_form():
    sp = build_space(1, 4)
    b = fs.moments(sp, lambda x: x)
    h = sp.h
    expected = np.array([h * h / 6] + [j * h * h for j in range(1, 4)] + [h / 2 - h * h / 6])
    np.testing.assert_allclose(b, expected, atol=1e-15)


def test_non_finite_integrand_is_reported():
    sp = build_space(1, 4)
    with np.errstate(divide="ignore"):
        with pytest.raises(FloatingPointError, match="non-finite"):
            fs.moments(sp, lambda x: 1.0 / (x - x[3]))
        with pytest.raises(FloatingPointError):
            fs.moments(build_space(2, 3), lambda x, y: np.log(x - x) + y)


def test_evaluate_interpolates_and_rejects_outside_points():
    sp = build_space(1, 4)
    c = np.array([0.0, 1.0, -2.0, 0.5, 3.0])
    np.testing.assert_allclose(fs.evaluate(sp, c, sp.nodes), c)
    assert fs.evaluate(sp, c, [0.125])[0] == pytest.approx(0.5)
    np.testing.assert_array_equal(fs.evaluate(sp, np.zeros(5), np.linspace(0, 1, 7)), 0.0)
    with pytest.raises(ValueError, match="outside"):
        fs.evaluate(sp, c, [1.5])
    sp2 = build_space(2, 2)
    c2 = sp2.points @ np.array([2.0, -1.0])  # a bilinear (in fact linear) function
    pts = np.array([[0.3, 0.7], [0.9, 0.1]])
    np.testing.assert_allclose(fs.evaluate(sp2, c2, pts), pts @ np.array([2.0, -1.0]))


def test_basis_matrix_consistent_with_evaluate():
    for kind in fs.BASIS_KINDS:
        sp = build_space(2, 3, kind)
        pts = np.random.default_rng(2).uniform(0, 1, (10, 2))
        c = np.random.default_rng(3).standard_normal(sp.n_h)
        np.testing.assert_allclose(fs.basis_matrix(sp, pts) @ c, fs.evaluate(sp, c, pts), atol=1e-12)


def test_gauss_points_integrate_polynomials():
    x, w = fs.gauss_points(5, 4)
    assert w.sum() == pytest.approx(1.0)
    assert w @ x**7 == pytest.approx(1 / 8, rel=1e-14)
