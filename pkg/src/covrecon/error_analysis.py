"""Kernel distances, the three-part reconstruction error and spectral functionals.

A :class:`MercerKernel` is a weighted sum ``sum_i a_i f_i(x) f_i(y)`` whose
factors are either analytic eigenfunctions of a :class:`SpectrumModel` or
coefficient vectors in a :class:`FemSpace`.  Distances in L2(D x D) are
computed from the Gram identity

    ||sum a_i f_i (x) f_i - sum b_j g_j (x) g_j||^2
        = sum a_i a_i' <f_i, f_i'>^2 + sum b_j b_j' <g_j, g_j'>^2
          - 2 sum a_i b_j <f_i, g_j>^2

with exact inner products wherever the factors allow it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fem_space import FemSpace
from .field_models import BrownianMotion1D, BrownianSheet, SpectrumModel
from .spectral_solver import EigenSystem, continuous_gap, fix_signs


@dataclass(eq=False)
class MercerKernel:
    """Weighted sum of symmetric rank-one terms.

    ``kind`` is ``"analytic"`` (factors are the model's first ``L``
    eigenfunctions) or ``"fem"`` (factors are the columns of ``coeffs``).
    ``full=True`` stands for the untruncated analytic kernel itself.
    """

    weights: np.ndarray
    kind: str
    model: SpectrumModel | None = None
    space: FemSpace | None = None
    coeffs: np.ndarray | None = None
    full: bool = False

    @property
    def L(self) -> int | float:
        return math.inf if self.full else self.weights.size


def mercer_truncate(source, L: int | None) -> MercerKernel:
    """First ``L`` eigenpairs of a model or an eigen system as a Mercer kernel.

    For a :class:`SpectrumModel`, ``L=None`` gives the full kernel.
    """
    if isinstance(source, SpectrumModel):
        if L is None:
            return MercerKernel(np.zeros(0), "analytic", model=source, full=True)
        if L < 0:
            raise ValueError(f"truncation level must be non-negative, got {L}")
        return MercerKernel(source.eigenvalues(L), "analytic", model=source)
    if isinstance(source, EigenSystem):
        n = source.size
        L = n if L is None else int(L)
        if not 0 <= L <= n:
            raise ValueError(f"truncation level {L} outside 0..{n}")
        return MercerKernel(source.values[:L].copy(), "fem", space=source.space,
                            coeffs=source.vectors[:, :L])
    raise TypeError(f"cannot build a Mercer kernel from {type(source).__name__}")


def fem_kernel(weights, coeffs, space: FemSpace) -> MercerKernel:
    return MercerKernel(np.asarray(weights, dtype=float), "fem", space=space, coeffs=np.asarray(coeffs, dtype=float))


def _mass(space: FemSpace) -> np.ndarray | None:
    return None if space.basis_kind == "l2-orthonormal" else space.mass.matrix


def _fem_basis_moments(model: SpectrumModel, space: FemSpace, L: int) -> np.ndarray:
    return space.from_nodal_moments(model.mode_moments(space, L))


def _fem_kernel_moments(model: SpectrumModel, space: FemSpace) -> np.ndarray:
    K = model.kernel_moment_matrix(space)
    return space.from_nodal_moments(space.from_nodal_moments(K).T)


def _self_term(A: MercerKernel) -> float:
    if A.kind == "analytic":
        return A.model.total_sq_sum() if A.full else float(np.sum(A.weights**2))
    G = A.coeffs.T @ A.coeffs if _mass(A.space) is None else A.coeffs.T @ _mass(A.space) @ A.coeffs
    return float(A.weights @ (G**2) @ A.weights)


def _cross_term(A: MercerKernel, B: MercerKernel) -> float:
    """``sum_ij a_i b_j <f_i, g_j>^2``."""
    if A.kind == "fem" and B.kind == "analytic":
        A, B = B, A
    if A.kind == "analytic" and B.kind == "analytic":
        if type(A.model) is not type(B.model):
            raise ValueError("analytic kernels come from different models")
        if A.full and B.full:
            return A.model.total_sq_sum()
        if A.full or B.full:
            T = B if A.full else A
            return float(np.sum(T.model.eigenvalues(T.weights.size) * T.weights))
        k = min(A.weights.size, B.weights.size)
        return float(np.sum(A.weights[:k] * B.weights[:k]))
    if A.kind == "analytic":
        if A.model.d != B.space.d:
            raise ValueError("kernel dimensions differ")
        if A.full:
            K = _fem_kernel_moments(A.model, B.space)
            return float(np.sum(B.weights * np.einsum("ij,ij->j", B.coeffs, K @ B.coeffs)))
        X = _fem_basis_moments(A.model, B.space, A.weights.size).T @ B.coeffs
        return float(A.weights @ (X**2) @ B.weights)
    if not A.space.same_as(B.space):
        raise ValueError(f"FEM kernels live in different spaces: {A.space} vs {B.space}")
    M = _mass(A.space)
    X = A.coeffs.T @ B.coeffs if M is None else A.coeffs.T @ M @ B.coeffs
    return float(A.weights @ (X**2) @ B.weights)


def _fem_operator(A: MercerKernel) -> np.ndarray:
    """``L^T C diag(a) C^T L``: the kernel as an operator on orthonormal coordinates."""
    C = A.coeffs * A.weights[None, :]
    S = C @ A.coeffs.T
    if _mass(A.space) is None:
        return S
    Lc = A.space.mass.chol
    return Lc.T @ S @ Lc


def kernel_l2_distance(A: MercerKernel, B: MercerKernel) -> float:
    """``||R_A - R_B||`` in L2(D x D).

    Two kernels in the same finite element space are compared through the
    Frobenius norm of their difference in mass-orthonormal coordinates,
    which is the Gram identity evaluated without cancellation.
    """
    if A.kind == "fem" and B.kind == "fem":
        if not A.space.same_as(B.space):
            raise ValueError(f"FEM kernels live in different spaces: {A.space} vs {B.space}")
        return float(np.linalg.norm(_fem_operator(A) - _fem_operator(B)))
    sq = _self_term(A) + _self_term(B) - 2.0 * _cross_term(A, B)
    return math.sqrt(max(sq, 0.0))


def kernel_l2_distance_gram(A: MercerKernel, B: MercerKernel) -> float:
    """Same as :func:`kernel_l2_distance` but always through the three Gram sums."""
    sq = _self_term(A) + _self_term(B) - 2.0 * _cross_term(A, B)
    return math.sqrt(max(sq, 0.0))


def truncation_error_E1(model: SpectrumModel, L: int) -> float:
    """``(sum_{l > L} lambda_l^2)^{1/2}``, the error of truncating the Mercer series."""
    return math.sqrt(model.tail_sq_sum(L))


@dataclass
class ErrorReport:
    E1: float
    E2: float
    E3: float
    total: float
    E_hM: float = math.nan
    gap_flags: list = field(default_factory=list)
    G: float = math.nan
    H: float = math.nan
    p0: float = math.nan
    p0_clamped: bool = False
    generator_residual: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def triangle_ok(self) -> bool:
        return self.total <= self.E1 + self.E2 + self.E3 + 1e-10

    def row(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("gap_flags", "params")}
        out["gap_flags"] = "".join("1" if f else "0" for f in self.gap_flags)
        return out

    def sidecar(self) -> str:
        return json.dumps(self.params, sort_keys=True, default=str)


def error_decomposition(model: SpectrumModel, exact_fem: EigenSystem, sampled: EigenSystem, L: int,
                        generator_modes: int | None = None) -> ErrorReport:
    """Split ``R - R^{(L;h;M)}`` into truncation, discretisation and sampling parts.

    ``E1 = ||R - R^L||``, ``E2 = ||R^L - R^{L;h}||``, ``E3 = ||R^{L;h} - R^{L;h;M}||``
    and ``total = ||R - R^{L;h;M}||``.  When ``generator_modes`` is given, the
    L2 norm of the part of ``R`` the sampler leaves out is reported as
    ``generator_residual``.
    """
    if exact_fem.space is not None and sampled.space is not None and not exact_fem.space.same_as(sampled.space):
        raise ValueError("exact and sampled systems live in different spaces")
    sampled = fix_signs(exact_fem, sampled)
    analytic = mercer_truncate(model, L)
    fem_exact = mercer_truncate(exact_fem, L)
    fem_sampled = mercer_truncate(sampled, L)
    E1 = truncation_error_E1(model, L)
    E2 = kernel_l2_distance(analytic, fem_exact)
    E3 = kernel_l2_distance(fem_exact, fem_sampled)
    total = kernel_l2_distance(mercer_truncate(model, None), fem_sampled)
    resid = truncation_error_E1(model, generator_modes) if generator_modes else 0.0
    return ErrorReport(E1, E2, E3, total, generator_residual=resid,
                       params={"L": L, "model": model.name})


# --- spectral functionals -----------------------------------------------------

@dataclass
class SpectralFunctionals:
    G: float
    H: float
    source: str
    degenerate: bool = False

    @property
    def G_squared(self) -> float:
        return self.G**2


def _distinct(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    keep = np.ones(lam.size, bool)
    keep[1:] = np.abs(np.diff(lam)) > 1e-12 * max(abs(lam[0]), np.finfo(float).tiny)
    return lam[keep]


def _gaps(lam, L: int, distinct: bool) -> tuple[np.ndarray, np.ndarray]:
    lam = np.asarray(lam, dtype=float)
    if distinct:
        lam = _distinct(lam)
    if lam.size < L + 1:
        raise ValueError(f"need {L + 1} eigenvalues for gaps up to {L}, have {lam.size}")
    return lam[:L], np.array([continuous_gap(lam, l) for l in range(1, L + 1)])


def g_functional(lam, L: int, distinct: bool = False) -> tuple[float, bool]:
    """``G(L) = (sum_{l <= L} (lambda_l / delta_l)^2)^{1/2}`` and a degeneracy flag.

    ``distinct=True`` applies the formula to the distinct eigenvalues (for
    spectra with repeated eigenvalues such as the Brownian sheet).
    """
    vals, gaps = _gaps(lam, L, distinct)
    if np.any(gaps <= 0):
        return math.inf, True
    return math.sqrt(float(np.sum((vals / gaps) ** 2))), False


def h_functional(lam, L: int, distinct: bool = False) -> tuple[float, bool]:
    """``H(L) = (min_{l <= L} delta_l / 48)^2`` and a degeneracy flag."""
    _, gaps = _gaps(lam, L, distinct)
    m = float(gaps.min())
    if m <= 0:
        return 0.0, True
    return (m / 48.0) ** 2, False


def brownian_g_squared(L: int) -> float:
    """Closed form ``(1/64) sum_{l <= L} (2l + 1)^4 / l^2`` (any dimension)."""
    ell = np.arange(1, L + 1, dtype=float)
    return float(np.sum((2 * ell + 1) ** 4 / ell**2) / 64.0)


def brownian_h(L: int, d: int = 1) -> float:
    """Closed form of ``H(L)`` for d-dimensional Brownian motion."""
    ell = np.arange(1, L + 1, dtype=float)
    lam1 = 4.0 / np.pi**2
    core = np.min((ell / (ell**2 - 0.25) ** 2) ** 2)
    return float(lam1 ** (2 * (d - 1)) * 0.25 * (2.0 / np.pi) ** 4 * core / 2304.0)


def spectral_functionals(model: SpectrumModel, L: int, closed_form: bool = True) -> SpectralFunctionals:
    """G(L) and H(L) for a model, closed-form for the Brownian models."""
    if closed_form and isinstance(model, (BrownianMotion1D, BrownianSheet)):
        return SpectralFunctionals(math.sqrt(brownian_g_squared(L)), brownian_h(L, model.d),
                                   "closed-form-Brownian")
    distinct = model.d > 1
    lam = model.eigenvalues(_modes_for_distinct(model, L + 1) if distinct else L + 1)
    G, dg = g_functional(lam, L, distinct)
    H, dh = h_functional(lam, L, distinct)
    return SpectralFunctionals(G, H, "numeric-from-spectrum", dg or dh)


def _modes_for_distinct(model: SpectrumModel, k: int) -> int:
    """Smallest prefix length containing at least ``k`` distinct eigenvalues."""
    n = k
    while _distinct(model.eigenvalues(n)).size < k:
        n *= 2
    return n


def gap_condition_check(gaps, lam, h: float, s: float, C1: float, E_hM: float, L: int) -> np.ndarray:
    """Flags ``delta_l >= 4 C1 h^{2s} / lambda_{l+1} + 4 E`` for ``l = 1..L``."""
    gaps = np.asarray(gaps, dtype=float)[:L]
    lam = np.asarray(lam, dtype=float)
    if lam.size < L + 1 or gaps.size < L:
        raise ValueError(f"need {L} gaps and {L + 1} eigenvalues")
    nxt = lam[1:L + 1]
    disc = np.where(C1 == 0, 0.0, 4.0 * C1 * h ** (2 * s) / nxt)
    return gaps >= disc + 4.0 * E_hM


def success_probability(M: float, n_h: int, tau: int, rho1: float, H_L: float,
                        lambda_max_mass: float) -> tuple[float, bool]:
    """Lower bound ``1 - 2 n_h 5^tau exp(-M rho1 H / lambda_max^2)`` clamped to [0, 1].

    Returns ``(p0, clamped)``; ``clamped`` is True when the raw value was negative.
    """
    if rho1 <= 0:
        raise ValueError("rho1 must be positive")
    log_fail = math.log(2.0 * n_h) + tau * math.log(5.0) - M * rho1 * H_L / lambda_max_mass**2
    if log_fail >= 0.0:
        return 0.0, log_fail > 0.0
    return -math.expm1(log_fail), False
