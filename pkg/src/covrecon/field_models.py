"""Covariance kernels with known spectra and Karhunen-Loeve field sampling.

Two models are provided: Brownian motion on (0, 1) with kernel ``min(x, y)``
and the Brownian sheet on (0, 1)^2 with kernel ``min(x1, y1) * min(x2, y2)``.
Their eigenpairs are known in closed form, which makes them useful as
reference problems for the reconstruction pipeline.

Field samples are represented by their coefficient vectors in a
:class:`~covrecon.fem_space.FemSpace`.  Two kinds of discrete information
are supported:

``"projection"``
    the coefficient vector of the L2 projection of the field (default);
``"pointwise"``
    the field values at the mesh nodes.  Only meaningful for the nodal
    basis, where those values are the coefficients of the nodal interpolant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import zeta

from . import _csvio
from .fem_space import FemSpace, gauss_points, solve_mass

INFORMATION_KINDS = ("projection", "pointwise")
MAX_MODES = 10**7


def default_generator_modes(L_study: int) -> int:
    """Generator truncation used when none is given: ``max(4 L, 256)``."""
    return max(4 * int(L_study), 256)


class SpectrumModel:
    """Base class for a covariance kernel with an (at least numerically) known spectrum.

    Subclasses implement :meth:`eigenvalues`, :meth:`eigenfunctions` and,
    when available, :meth:`kernel`.  Eigenvalues are returned sorted
    non-increasing with multiplicities expanded.
    """

    name: str = "abstract"
    d: int = 1
    s: float = 0.5  # nominal smoothness, metadata only
    has_closed_kernel: bool = False

    def eigenvalues(self, L: int) -> np.ndarray:
        raise NotImplementedError

    def eigenfunctions(self, L: int, x) -> np.ndarray:
        """Values of the first ``L`` eigenfunctions at points ``x``, shape (N, L)."""
        raise NotImplementedError

    def kernel(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def total_sq_sum(self) -> float:
        """Hilbert-Schmidt norm squared of the covariance operator."""
        raise NotImplementedError

    def tail_sq_sum(self, L: int) -> float:
        """``sum_{l > L} lambda_l^2``."""
        raise NotImplementedError

    def mode_moments(self, space: FemSpace, L: int) -> np.ndarray:
        """Moments of the first ``L`` eigenfunctions against the nodal hats, (n_h, L)."""
        raise NotImplementedError

    def kernel_moment_matrix(self, space: FemSpace) -> np.ndarray:
        """``int int R(x, y) theta_j(x) theta_k(y)`` over the nodal hats."""
        raise NotImplementedError

    def _check_L(self, L: int) -> int:
        L = int(L)
        if L < 0:
            raise ValueError(f"number of modes must be non-negative, got {L}")
        if L > MAX_MODES:
            raise ValueError(f"{L} modes requested, model provides at most {MAX_MODES}")
        return L

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


# --- Brownian motion, 1D ------------------------------------------------------

def _frequencies(L: int) -> np.ndarray:
    return (np.arange(1, L + 1) - 0.5) * np.pi


def _sin_hat_moments(n: int, omega: np.ndarray) -> np.ndarray:
    """Closed-form ``int theta_j(x) sin(omega x) dx`` for the P1 hats, shape (n+1, K)."""
    h = 1.0 / n
    x = np.arange(n + 1)[:, None] * h
    w = np.asarray(omega, dtype=float)[None, :]
    wh = w * h
    half = np.sin(0.5 * wh)
    out = np.sin(w * x) * 4.0 * half**2 / (w**2 * h)
    # node 0: int_0^h (1 - x/h) sin(wx) dx = (1 - sinc(wh)) / w
    t = wh[0]
    one_minus_sinc = np.where(t < 1e-3, t**2 / 6.0 - t**4 / 120.0, 1.0 - np.sin(t) / np.where(t == 0, 1.0, t))
    out[0] = one_minus_sinc / w[0]
    # node n: int_{1-h}^1 (x - 1 + h)/h sin(wx) dx
    out[n] = -np.cos(w[0]) / w[0] + 2.0 * np.cos(w[0] * (1.0 - 0.5 * h)) * half[0] / (w[0] ** 2 * h)
    return out


@lru_cache(maxsize=32)
def brownian_kernel_moments_1d(n: int) -> np.ndarray:
    """Exact ``K_jk = int int min(x, y) theta_j(x) theta_k(y)`` for P1 hats on n elements.

    Uses ``min(x, y) = int_0^1 1[t < x] 1[t < y] dt`` so that
    ``K_jk = int_0^1 F_j(t) F_k(t) dt`` with ``F_j(t) = int_t^1 theta_j``.
    Each ``F_j`` is piecewise quadratic, so three Gauss points per element
    integrate the products exactly.
    """
    h = 1.0 / n
    t, w = gauss_points(n, 3)
    nodes = np.arange(n + 1) * h
    tt = t[:, None]
    cdf = np.zeros((t.size, n + 1))
    left = nodes[:-1]
    # rising half of hat j (j >= 1) lives on [x_{j-1}, x_j]
    u = np.clip(tt, left[None, :], nodes[None, 1:]) - left[None, :]
    cdf[:, 1:] += u**2 / (2.0 * h)
    # falling half of hat j (j <= n-1) lives on [x_j, x_{j+1}]
    v = np.clip(tt, nodes[None, :-1], nodes[None, 1:]) - nodes[None, :-1]
    cdf[:, :-1] += v - v**2 / (2.0 * h)
    total = np.full(n + 1, h)
    total[0] = total[-1] = 0.5 * h
    F = total[None, :] - cdf
    K = F.T @ (w[:, None] * F)
    return 0.5 * (K + K.T)


class BrownianMotion1D(SpectrumModel):
    """Brownian motion on (0, 1): ``R(x, y) = min(x, y)``.

    Eigenpairs are ``lambda_l = 1 / (pi^2 (l - 1/2)^2)`` and
    ``phi_l(x) = sqrt(2) sin((l - 1/2) pi x)``.
    """

    name = "brownian1d"
    d = 1
    s = 0.5
    has_closed_kernel = True

    def eigenvalues(self, L: int) -> np.ndarray:
        L = self._check_L(L)
        ell = np.arange(1, L + 1)
        return 1.0 / (np.pi**2 * (ell - 0.5) ** 2)

    def eigenfunctions(self, L: int, x) -> np.ndarray:
        L = self._check_L(L)
        x = np.asarray(x, dtype=float).ravel()
        return np.sqrt(2.0) * np.sin(np.outer(x, _frequencies(L)))

    def kernel(self, x, y) -> np.ndarray:
        return np.minimum(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def total_sq_sum(self) -> float:
        return 1.0 / 6.0

    def tail_sq_sum(self, L: int) -> float:
        L = self._check_L(L)
        # sum_{l > L} (l - 1/2)^{-4} is a Hurwitz zeta value
        return float(zeta(4.0, L + 0.5)) / np.pi**4

    def mode_moments(self, space: FemSpace, L: int) -> np.ndarray:
        L = self._check_L(L)
        _require_dim(self, space)
        return np.sqrt(2.0) * _sin_hat_moments(space.n, _frequencies(L))

    def kernel_moment_matrix(self, space: FemSpace) -> np.ndarray:
        _require_dim(self, space)
        return brownian_kernel_moments_1d(space.n).copy()


# --- Brownian sheet, 2D -------------------------------------------------------

def flattening_index(l1, l2):
    """Position ``((2 l1 - 1)(2 l2 - 1) + 1) / 2`` of a product mode in the sorted list."""
    l1 = np.asarray(l1)
    l2 = np.asarray(l2)
    return ((2 * l1 - 1) * (2 * l2 - 1) + 1) // 2


@lru_cache(maxsize=16)
def _sheet_modes(L: int) -> tuple[np.ndarray, np.ndarray]:
    """First ``L`` multi-indices (l1, l2) of the Brownian sheet in sorted order.

    The eigenvalue of (l1, l2) is ``16 / (pi^4 p^2)`` with
    ``p = (2 l1 - 1)(2 l2 - 1)``, so sorting by ``p`` (equivalently by the
    flattening index) sorts the eigenvalues; equal ``p`` are ordered
    lexicographically in (l1, l2).
    """
    bound = 1
    while True:
        a = np.arange(1, bound + 1, 2)
        # odd b with a * b <= bound
        counts = (bound // a + 1) // 2
        if counts.sum() >= L:
            break
        bound *= 2
    l1 = np.repeat((a + 1) // 2, counts)
    starts = np.cumsum(counts) - counts
    l2 = np.arange(counts.sum()) - np.repeat(starts, counts) + 1
    p = (2 * l1 - 1) * (2 * l2 - 1)
    order = np.lexsort((l2, l1, p))[:L]
    return l1[order], l2[order]


class BrownianSheet(SpectrumModel):
    """Brownian sheet on (0, 1)^2: ``R(x, y) = min(x1, y1) min(x2, y2)``.

    Eigenpairs are tensor products of the 1D Brownian eigenpairs, flattened
    into non-increasing order.
    """

    name = "brownian-sheet"
    d = 2
    s = 0.5
    has_closed_kernel = True

    def __init__(self):
        self._base = BrownianMotion1D()

    def modes(self, L: int) -> tuple[np.ndarray, np.ndarray]:
        """Multi-indices (l1, l2) of the first ``L`` eigenpairs."""
        L = self._check_L(L)
        if L == 0:
            return np.zeros(0, int), np.zeros(0, int)
        l1, l2 = _sheet_modes(L)
        return l1.copy(), l2.copy()

    def eigenvalues(self, L: int) -> np.ndarray:
        l1, l2 = self.modes(L)
        p = ((2 * l1 - 1) * (2 * l2 - 1)).astype(float)
        return 16.0 / (np.pi**4 * p**2)

    def eigenfunctions(self, L: int, x) -> np.ndarray:
        l1, l2 = self.modes(L)
        pts = np.asarray(x, dtype=float).reshape(-1, 2)
        m = int(max(l1.max(initial=0), l2.max(initial=0)))
        fx = self._base.eigenfunctions(m, pts[:, 0])
        fy = self._base.eigenfunctions(m, pts[:, 1])
        return fx[:, l1 - 1] * fy[:, l2 - 1]

    def kernel(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.minimum(x[..., 0], y[..., 0]) * np.minimum(x[..., 1], y[..., 1])

    def total_sq_sum(self) -> float:
        return 1.0 / 36.0

    def tail_sq_sum(self, L: int) -> float:
        lam = self.eigenvalues(L)
        # summing smallest first limits rounding in the prefix
        return max(self.total_sq_sum() - float(np.sum(np.sort(lam**2))), 0.0)

    def mode_moments(self, space: FemSpace, L: int) -> np.ndarray:
        _require_dim(self, space)
        l1, l2 = self.modes(L)
        m = int(max(l1.max(initial=0), l2.max(initial=0)))
        b1 = self._base.mode_moments(FemSpace(1, space.n), m)
        out = b1[:, None, l1 - 1] * b1[None, :, l2 - 1]
        return out.reshape(space.n_h, -1)

    def kernel_moment_matrix(self, space: FemSpace) -> np.ndarray:
        _require_dim(self, space)
        k1 = brownian_kernel_moments_1d(space.n)
        return np.kron(k1, k1)


def brownian_spectrum_1d() -> BrownianMotion1D:
    return BrownianMotion1D()


def brownian_spectrum_tensor(d: int = 2) -> BrownianSheet:
    if d != 2:
        raise ValueError(f"tensor Brownian model is implemented for d=2 only, got d={d}")
    return BrownianSheet()


MODELS = {"brownian1d": BrownianMotion1D, "brownian-sheet": BrownianSheet}


def model_by_name(name: str) -> SpectrumModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(MODELS)}") from None


def _require_dim(model: SpectrumModel, space: FemSpace) -> None:
    if model.d != space.d:
        raise ValueError(f"model {model.name} has d={model.d}, space has d={space.d}")


def _check_information(space: FemSpace, information: str) -> None:
    if information not in INFORMATION_KINDS:
        raise ValueError(f"unknown information kind {information!r}; expected one of {INFORMATION_KINDS}")
    if information == "pointwise" and space.basis_kind != "nodal":
        raise ValueError("pointwise information requires the nodal basis")


def mode_coefficients(model: SpectrumModel, space: FemSpace, L: int,
                      information: str = "projection") -> np.ndarray:
    """Coefficient vectors of the first ``L`` eigenfunctions, shape (n_h, L).

    For ``"projection"`` these are the L2 projections onto the space, for
    ``"pointwise"`` the nodal values.
    """
    _require_dim(model, space)
    _check_information(space, information)
    if information == "pointwise":
        return model.eigenfunctions(L, space.points)
    b = model.mode_moments(space, L)
    return solve_mass(space, space.from_nodal_moments(b))


# --- sampling -----------------------------------------------------------------

@dataclass(eq=False)
class SampleMatrix:
    """``M`` coefficient vectors of independent field realisations (one per row)."""

    values: np.ndarray
    seed: int
    L_gen: int
    space: FemSpace
    model: SpectrumModel
    information: str = "projection"
    replicate: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    def header(self) -> dict:
        return {
            "seed": self.seed, "model": self.model.name, "n": self.space.n, "d": self.space.d,
            "L_gen": self.L_gen, "basis": self.space.basis_kind,
            "information": self.information, "replicate": self.replicate,
        }

    def to_csv(self, path) -> None:
        _csvio.write_matrix(path, self.values, self.header())

    @classmethod
    def from_csv(cls, path) -> "SampleMatrix":
        values, meta = _csvio.read_matrix(path)
        try:
            space = FemSpace(int(meta["d"]), int(meta["n"]), meta.get("basis", "nodal"))
            model = model_by_name(meta["model"])
            out = cls(values, int(meta["seed"]), int(meta["L_gen"]), space, model,
                      meta.get("information", "projection"), int(meta.get("replicate", 0)))
        except KeyError as exc:
            raise ValueError(f"sample file {path} lacks header field {exc}") from None
        if values.shape[1] != space.n_h:
            raise ValueError(f"sample file has {values.shape[1]} columns, space has n_h={space.n_h}")
        return out


def standard_normals(seed: int, replicate: int, M: int, L: int) -> np.ndarray:
    """Deterministic (M, L) array of standard normals.

    Row ``m`` comes from its own counter-based Philox stream keyed by
    ``(seed, replicate, m)``, and entry ``l`` of that row is the ``l``-th
    draw of the stream.  Rows therefore do not depend on how many other
    rows are drawn or in which order.
    """
    return _normals_block(seed, replicate, 0, int(M), int(L))


def sample_field(model: SpectrumModel, space: FemSpace, L_gen: int, M: int, seed: int,
                 information: str = "projection", replicate: int = 0,
                 chunk: int = 4096) -> SampleMatrix:
    """Draw ``M`` truncated Karhunen-Loeve realisations and discretise them.

    Each row is the coefficient vector of
    ``sum_{l <= L_gen} sqrt(lambda_l) phi_l psi_l`` (projected or sampled at
    the nodes, see ``information``) with i.i.d. standard normal ``psi_l``.
    """
    if int(L_gen) < 1:
        raise ValueError(f"L_gen must be at least 1, got {L_gen}")
    if int(M) < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    L_gen, M = int(L_gen), int(M)
    lam = model.eigenvalues(L_gen)
    factor = mode_coefficients(model, space, L_gen, information) * np.sqrt(lam)[None, :]
    values = np.empty((M, space.n_h))
    for start in range(0, M, chunk):
        stop = min(start + chunk, M)
        z = _normals_block(seed, replicate, start, stop, L_gen)
        values[start:stop] = z @ factor.T
    return SampleMatrix(values, int(seed), L_gen, space, model, information, int(replicate))


def _normals_block(seed, replicate, start, stop, L):
    if not 0 <= replicate < 2**31 or stop > 2**32:
        raise ValueError("replicate must be in [0, 2^31) and M at most 2^32")
    seed = int(seed) % 2**64
    base = int(replicate) << 32
    out = np.empty((stop - start, L))
    for i, m in enumerate(range(start, stop)):
        out[i] = np.random.Generator(np.random.Philox(key=[seed, base | m])).standard_normal(L)
    return out


def true_coefficient_covariance(model: SpectrumModel, space: FemSpace, L_gen: int | None = None,
                                information: str = "projection") -> np.ndarray:
    """Covariance matrix of the coefficient vector of the discretised field.

    With ``L_gen`` given, this is ``P diag(lambda) P^T`` for the truncated
    field, ``P`` holding the coefficient vectors of the first ``L_gen``
    eigenfunctions.  With ``L_gen=None`` the untruncated covariance is
    returned, computed from the exact kernel moments (projection) or the
    kernel at the nodes (pointwise).
    """
    _require_dim(model, space)
    _check_information(space, information)
    if L_gen is not None:
        lam = model.eigenvalues(L_gen)
        P = mode_coefficients(model, space, L_gen, information)
        S = (P * lam[None, :]) @ P.T
    elif information == "pointwise":
        pts = space.points
        if space.d == 1:
            S = model.kernel(pts[:, None], pts[None, :])
        else:
            S = model.kernel(pts[:, None, :], pts[None, :, :])
    else:
        K = space.from_nodal_moments(space.from_nodal_moments(model.kernel_moment_matrix(space)).T)
        X = solve_mass(space, K)
        S = solve_mass(space, np.ascontiguousarray(X.T))
    return 0.5 * (S + S.T)


def kernel_eval(model: SpectrumModel, x, y, L: int | None = None):
    """Kernel value ``R(x, y)``.

    Closed form when the model has one and ``L`` is None; otherwise the
    Mercer sum truncated at ``L`` modes.  Returns ``(value, L_used)`` where
    ``L_used`` is None for the closed form.
    """
    if L is None and model.has_closed_kernel:
        return model.kernel(x, y), None
    if L is None:
        raise ValueError(f"model {model.name} has no closed-form kernel; supply a truncation level")
    lam = model.eigenvalues(L)
    fx = model.eigenfunctions(L, x)
    fy = model.eigenfunctions(L, y)
    val = np.sum(fx * fy * lam[None, :], axis=1)
    if np.ndim(x) == model.d - 1:
        val = float(val[0])
    return val, int(L)
