import math

import numpy as np
import pytest
import scipy.linalg as sla

from covrecon.fem_space import build_space
from covrecon.field_models import BrownianMotion1D, mode_coefficients, true_coefficient_covariance
from covrecon.spectral_solver import (
    C_DK, EigenSystem, continuous_gap, continuous_gaps, davis_kahan_diagnostic, discrete_gap, fix_signs,
    gap_report, generalized_eigendecomposition, operator_norm, power_iteration_norm, sampling_error_norm,
    weyl_check,
)


def random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T / n + 0.1 * np.eye(n)


def test_matches_scipy_generalized_solver():
    rng = np.random.default_rng(0)
    sp = build_space(1, 12)
    S = random_spd(rng, 13)
    es = generalized_eigendecomposition(S, sp.mass)
    M = sp.mass.matrix
    # generalized problem (M S M) phi = lambda M phi
    w, V = sla.eigh(M @ S @ M, M)
    np.testing.assert_allclose(es.values, w[::-1], rtol=1e-10)
    np.testing.assert_allclose(es.vectors.T @ M @ es.vectors, np.eye(13), atol=1e-10)
    np.testing.assert_allclose(M @ S @ M @ es.vectors, M @ es.vectors * es.values, atol=1e-10)
    assert np.all(np.diff(es.values) <= 0)


def test_identity_mass_gives_plain_eigenpairs():
    S = np.diag([1.0, 3.0, 2.0])
    es = generalized_eigendecomposition(S)
    np.testing.assert_array_equal(es.values, [3.0, 2.0, 1.0])
    np.testing.assert_allclose(np.abs(es.vectors), np.eye(3)[:, [1, 2, 0]])


def test_rank_one_brownian_eigenvalue():
    model = BrownianMotion1D()
    vals = []
    for n in (8, 32, 128):
        sp = build_space(1, n)
        es = generalized_eigendecomposition(true_coefficient_covariance(model, sp, 1), sp)
        p = mode_coefficients(model, sp, 1, "projection")[:, 0]
        expected = model.eigenvalues(1)[0] * (p @ sp.mass.matrix @ p)
        assert es.values[0] == pytest.approx(expected, rel=1e-12)
        assert np.all(np.abs(es.values[1:]) < 1e-14)
        vals.append(es.values[0])
    assert abs(vals[-1] - 4 / math.pi**2) < abs(vals[0] - 4 / math.pi**2)
    assert vals[-1] == pytest.approx(4 / math.pi**2, rel=1e-5)


def test_input_validation_and_psd_repair():
    with pytest.raises(ValueError, match="symmetric"):
        generalized_eigendecomposition(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        generalized_eigendecomposition(np.eye(3), build_space(1, 3))
    S = np.diag([1.0, -1e-3])
    assert generalized_eigendecomposition(S).values[-1] < 0
    rep = generalized_eigendecomposition(S, psd_repair=True)
    assert rep.values[-1] == 0.0 and rep.psd_repaired
    with pytest.raises(np.linalg.LinAlgError):
        generalized_eigendecomposition(np.eye(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_fix_signs():
    rng = np.random.default_rng(1)
    es = generalized_eigendecomposition(random_spd(rng, 5))
    flipped = EigenSystem(es.values, -es.vectors, -es.reduced)
    fixed = fix_signs(es, flipped)
    np.testing.assert_array_equal(fixed.vectors, es.vectors)
    np.testing.assert_array_equal(fix_signs(es, es).vectors, es.vectors)


def test_gaps():
    lam = [4.0, 2.0, 1.0, 0.5]
    assert continuous_gap(lam, 1) == 2.0
    assert continuous_gap(lam, 3) == 0.5
    assert continuous_gap([3.0, 1.0, 1.0, 0.2], 2) == 0.0
    np.testing.assert_array_equal(continuous_gaps(lam, 3), [2.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        continuous_gap(lam, 4)
    assert discrete_gap([3.0, 1.0], [2.9, 1.2], 1) == pytest.approx(1.8)
    assert discrete_gap([3.0, 1.0], [2.9, 1.2], 2) == pytest.approx(1.9)
    assert discrete_gap([2.0, 2.0, 1.0], [2.0, 2.0, 1.0], 1) == 0.0
    assert discrete_gap(lam, lam, 2) == continuous_gap(lam, 2)


def test_operator_norms():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((300, 300))
    A = A + A.T
    ref = np.abs(np.linalg.eigvalsh(A)).max()
    assert operator_norm(A) == pytest.approx(ref, rel=1e-12)
    assert power_iteration_norm(A, tol=1e-13) == pytest.approx(ref, rel=1e-4)
    big = np.diag(np.r_[-3.0, np.linspace(-1.0, 1.0, 2099)])
    assert operator_norm(big) == pytest.approx(3.0, rel=1e-6)


def test_sampling_error_norm():
    rng = np.random.default_rng(3)
    sp = build_space(1, 10)
    S = random_spd(rng, 11)
    assert sampling_error_norm(S, S, sp.mass)[0] == 0.0
    P = rng.standard_normal((11, 11))
    S2 = S + 0.01 * (P + P.T)
    E, (lo, hi) = sampling_error_norm(S, S2, None)
    assert E == pytest.approx(np.linalg.norm(S - S2, 2)) and lo == hi == E
    E, (lo, hi) = sampling_error_norm(S, S2, sp.mass)
    L = sp.mass.chol
    assert E == pytest.approx(np.linalg.norm(L.T @ (S - S2) @ L, 2))
    assert lo <= E <= hi


def test_weyl_examples():
    a = generalized_eigendecomposition(np.diag([3.0, 1.0]))
    b = generalized_eigendecomposition(np.diag([3.1, 0.9]))
    res, ok = weyl_check(a, b, 0.1)
    assert ok and np.allclose(res, 0.1)
    res, ok = weyl_check(a, a, 0.0)
    assert ok and np.all(res == 0)
    assert not weyl_check(a, b, 0.05)[1]


def test_weyl_and_davis_kahan_random():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(2, 20))
        sp = build_space(1, n)
        S = random_spd(rng, n + 1)
        P = rng.standard_normal(S.shape) * 10 ** rng.uniform(-5, -1)
        S2 = S + P + P.T
        ex = generalized_eigendecomposition(S, sp.mass)
        sa = fix_signs(ex, generalized_eigendecomposition(S2, sp.mass))
        E, _ = sampling_error_norm(S, S2, sp.mass)
        assert weyl_check(ex, sa, E)[1]
        assert all(e.holds for e in davis_kahan_diagnostic(ex, sa, E))


def test_davis_kahan_two_by_two_rotation():
    # diag(3, 1) perturbed by 0.1 off the diagonal: rotation angle atan2(0.2, 2) / 2
    ex = generalized_eigendecomposition(np.diag([3.0, 1.0]))
    sa = fix_signs(ex, generalized_eigendecomposition(np.array([[3.0, 0.1], [0.1, 1.0]])))
    theta = 0.5 * math.atan2(0.2, 2.0)
    entries = davis_kahan_diagnostic(ex, sa, 0.1)
    assert entries[0].measured == pytest.approx(2 * math.sin(theta / 2), rel=1e-12)
    for e in entries:
        assert e.holds and e.bound == pytest.approx(C_DK * 0.1 / e.gap)


def test_davis_kahan_degenerate_and_identical():
    ex = generalized_eigendecomposition(np.diag([2.0, 2.0, 1.0]))
    entries = davis_kahan_diagnostic(ex, ex, 0.0)
    assert entries[0].vacuous and entries[1].vacuous and not entries[2].vacuous
    assert "vacuous" in entries[0].note
    assert entries[2].measured == 0.0 and entries[2].holds


def test_gap_report_shapes():
    rng = np.random.default_rng(5)
    S = random_spd(rng, 6)
    ex = generalized_eigendecomposition(S)
    sa = fix_signs(ex, generalized_eigendecomposition(S + 1e-4 * np.eye(6)))
    rep = gap_report(ex, sa, 1e-4, 3)
    assert rep.continuous_gaps.shape == (3,) and rep.weyl_pass and rep.dk_pass.all()


def test_galerkin_eigenvalues_lie_below_continuous():
    model = BrownianMotion1D()
    for n in (4, 16, 64):
        sp = build_space(1, n)
        k = min(8, n + 1)
        vals = generalized_eigendecomposition(true_coefficient_covariance(model, sp), sp).values[:k]
        assert np.all(vals <= model.eigenvalues(k) * (1 + 1e-12))
