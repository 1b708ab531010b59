import math

import numpy as np
import pytest

from covrecon import fem_space as fs
from covrecon.fem_space import build_space
from covrecon.field_models import (
    BrownianMotion1D, BrownianSheet, SampleMatrix, brownian_spectrum_1d, brownian_spectrum_tensor,
    flattening_index, kernel_eval, mode_coefficients, model_by_name, sample_field, standard_normals,
    true_coefficient_covariance,
)

B1 = BrownianMotion1D()
B2 = BrownianSheet()


def test_brownian_eigenvalues():
    lam = B1.eigenvalues(6)
    ell = np.arange(1, 7)
    np.testing.assert_allclose(lam * (2 * ell - 1) ** 2, 4 / math.pi**2, rtol=1e-12)
    assert lam[0] == pytest.approx(4 / math.pi**2, rel=1e-15)
    big = B1.eigenvalues(10**6)[-1] * 1e12
    assert big == pytest.approx(1 / math.pi**2, rel=2e-6)


def test_brownian_eigenfunctions_orthonormal():
    x, w = fs.gauss_points(200, 6)
    F = B1.eigenfunctions(12, x)
    np.testing.assert_allclose(F.T @ (w[:, None] * F), np.eye(12), atol=1e-12)


def test_brownian_eigenpairs_solve_integral_equation():
    # int_0^1 min(x, y) phi(y) dy = lambda phi(x) at a few points
    y, w = fs.gauss_points(400, 6)
    xs = np.array([0.1, 0.45, 0.9])
    lam = B1.eigenvalues(4)
    phi_y = B1.eigenfunctions(4, y)
    lhs = np.minimum(xs[:, None], y[None, :]) @ (w[:, None] * phi_y)
    np.testing.assert_allclose(lhs, B1.eigenfunctions(4, xs) * lam, atol=1e-9)


def test_kernel_values():
    assert kernel_eval(B1, 0.3, 0.7)[0] == pytest.approx(0.3)
    assert kernel_eval(B2, np.array([0.3, 0.5]), np.array([0.7, 0.2]))[0] == pytest.approx(0.06)
    errs = [abs(kernel_eval(B1, 0.3, 0.7, L)[0] - 0.3) for L in (10, 100, 1000)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-3


def test_sheet_spectrum_is_tensor_product_with_ties():
    lam = B2.eigenvalues(200)
    assert np.all(np.diff(lam) <= 0)
    l1, l2 = B2.modes(200)
    lam1 = lambda l: 1 / (math.pi * (l - 0.5)) ** 2
    np.testing.assert_allclose(lam, lam1(l1) * lam1(l2), rtol=1e-14)
    # (1, 2) and (2, 1) tie exactly
    assert lam[1] == lam[2]
    # brute-force oracle: the 200 largest of all products in a big index box
    k = np.arange(1, 400)
    allv = np.sort((lam1(k)[:, None] * lam1(k)[None, :]).ravel())[::-1][:200]
    np.testing.assert_allclose(lam, allv, rtol=1e-14)


def test_sheet_eigenfunctions_orthonormal():
    x, w = fs.gauss_points(60, 4)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    W = np.outer(w, w).ravel()
    F = B2.eigenfunctions(8, pts)
    np.testing.assert_allclose(F.T @ (W[:, None] * F), np.eye(8), atol=1e-10)


def test_flattening_index():
    assert flattening_index(1, 1) == 1
    assert flattening_index(2, 1) == flattening_index(1, 2) == 2
    assert flattening_index(3, 2) == 8  # p = 5 * 3 = 15


def test_hilbert_schmidt_sums():
    assert B1.total_sq_sum() == pytest.approx(1 / 6, rel=1e-15)
    assert B2.total_sq_sum() == pytest.approx(1 / 36, rel=1e-15)
    for model in (B1, B2):
        lam = model.eigenvalues(50)
        assert model.tail_sq_sum(20) == pytest.approx(model.tail_sq_sum(50) + np.sum(lam[20:] ** 2), rel=1e-10)


def test_mode_moments_against_quadrature():
    for n in (4, 16):
        sp = build_space(1, n)
        b = B1.mode_moments(sp, 30)
        quad = fs.nodal_moments_1d(n, lambda x: B1.eigenfunctions(30, x), 40)
        np.testing.assert_allclose(b, quad, atol=1e-13)


def test_kernel_moment_matrix_against_mercer_sum():
    sp = build_space(1, 8)
    K = B1.kernel_moment_matrix(sp)
    b = B1.mode_moments(sp, 20000)
    K_sum = (b * B1.eigenvalues(20000)) @ b.T
    np.testing.assert_allclose(K, K_sum, atol=1e-11)


@pytest.mark.parametrize("model,d", [(B1, 1), (B2, 2)])
@pytest.mark.parametrize("kind", ["nodal", "l2-orthonormal"])
def test_exact_covariance_limits_truncated_one(model, d, kind):
    sp = build_space(d, 4, kind)
    exact = true_coefficient_covariance(model, sp)
    trunc = true_coefficient_covariance(model, sp, 20000)
    coarse = true_coefficient_covariance(model, sp, 5000)
    # the sheet spectrum decays slower, so the 20000-mode oracle is less converged
    np.testing.assert_allclose(exact, trunc, atol=1e-10 if d == 1 else 1e-8)
    assert np.abs(exact - trunc).max() < np.abs(exact - coarse).max()
    assert np.allclose(exact, exact.T)
    assert np.linalg.eigvalsh(exact)[0] > -1e-14


def test_single_mode_covariance_is_rank_one():
    sp = build_space(1, 6)
    S = true_coefficient_covariance(B1, sp, 1)
    p = mode_coefficients(B1, sp, 1, "projection")[:, 0]
    np.testing.assert_allclose(S, B1.eigenvalues(1)[0] * np.outer(p, p), atol=1e-16)
    assert np.linalg.matrix_rank(S, tol=1e-12) == 1


def test_pointwise_covariance_is_kernel_at_nodes():
    sp = build_space(1, 5)
    S = true_coefficient_covariance(B1, sp, information="pointwise")
    x = sp.nodes
    np.testing.assert_allclose(S, np.minimum(x[:, None], x[None, :]))
    with pytest.raises(ValueError):
        true_coefficient_covariance(B1, build_space(1, 5, "l2-orthonormal"), information="pointwise")


def test_sample_field_is_deterministic_and_row_stable():
    sp = build_space(1, 8)
    a = sample_field(B1, sp, 64, 50, seed=7)
    b = sample_field(B1, sp, 64, 50, seed=7)
    np.testing.assert_array_equal(a.values, b.values)
    c = sample_field(B1, sp, 64, 20, seed=7, chunk=3)
    np.testing.assert_allclose(a.values[:20], c.values, rtol=1e-13, atol=1e-15)
    d = sample_field(B1, sp, 64, 20, seed=7, replicate=1)
    assert not np.allclose(a.values[:20], d.values)
    e = sample_field(B1, sp, 64, 20, seed=8)
    assert not np.allclose(a.values[:20], e.values)


def test_standard_normals_are_standard():
    z = standard_normals(1, 0, 20000, 3)
    assert abs(z.mean()) < 0.02
    assert z.std() == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        standard_normals(1, 2**31, 1, 1)


def test_sample_covariance_converges_to_truncated_covariance():
    sp = build_space(1, 4)
    X = sample_field(B1, sp, 32, 40000, seed=3).values
    target = true_coefficient_covariance(B1, sp, 32)
    emp = X.T @ X / X.shape[0]
    assert np.abs(emp - target).max() < 0.05 * np.abs(target).max()


def test_sample_matrix_csv_round_trip(tmp_path):
    sp = build_space(2, 3)
    s = sample_field(B2, sp, 40, 5, seed=2, information="pointwise")
    path = tmp_path / "s.csv"
    s.to_csv(path)
    back = SampleMatrix.from_csv(path)
    np.testing.assert_array_equal(back.values, s.values)
    assert back.seed == 2 and back.L_gen == 40 and back.information == "pointwise"
    assert back.space.same_as(sp)


def test_model_registry_and_dimension_checks():
    assert isinstance(brownian_spectrum_1d(), BrownianMotion1D)
    assert isinstance(brownian_spectrum_tensor(2), BrownianSheet)
    assert model_by_name("brownian-sheet").d == 2
    with pytest.raises(ValueError):
        brownian_spectrum_tensor(3)
    with pytest.raises(ValueError):
        model_by_name("matern")
    with pytest.raises(ValueError):
        sample_field(B1, build_space(2, 3), 10, 5, seed=0)
    with pytest.raises(ValueError):
        sample_field(B1, build_space(1, 3), 0, 5, seed=0)
