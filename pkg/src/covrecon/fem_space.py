"""Piecewise-linear finite element spaces on the unit interval and unit square.

Two bases span the same space on a given mesh:

* ``"nodal"`` -- the usual P1 hat functions, one per mesh node;
* ``"l2-orthonormal"`` -- the hat basis re-orthonormalised in L2 through the
  Cholesky factor of the nodal mass matrix, so its mass matrix is the identity.

Coefficient vectors are plain numpy arrays of length ``space.n_h``.  The
two-dimensional space is the tensor product of the one-dimensional one; a node
``(x_i, y_j)`` has flat index ``i * (n + 1) + j`` and every matrix is the
Kronecker product of its 1D factor.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg as sla

BASIS_KINDS = ("nodal", "l2-orthonormal")


@dataclass(frozen=True)
class MassMatrix:
    """Gram matrix of a basis in L2(D) together with its Cholesky factor."""

    matrix: np.ndarray
    chol: np.ndarray  # lower triangular, chol @ chol.T == matrix
    lambda_min: float
    lambda_max: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class FemSpace:
    """P1 space on a uniform tensor mesh of (0, 1)^d with n elements per axis."""

    d: int
    n: int
    basis_kind: str = "nodal"

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got d={self.d}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need at least 2 elements per axis, got n={self.n}")
        if self.basis_kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis_kind {self.basis_kind!r}; expected one of {BASIS_KINDS}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def n_h(self) -> int:
        return (self.n + 1) ** self.d

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates along one axis (length n + 1)."""
        return np.arange(self.n + 1) / self.n

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates in flat index order, shape (n_h,) or (n_h, 2)."""
        if self.d == 1:
            return self.nodes.copy()
        xx, yy = np.meshgrid(self.nodes, self.nodes, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    @cached_property
    def nodal_mass_1d(self) -> np.ndarray:
        return _p1_mass_1d(self.n)

    @cached_property
    def nodal_chol_1d(self) -> np.ndarray:
        return np.linalg.cholesky(self.nodal_mass_1d)

    @cached_property
    def transform_1d(self) -> np.ndarray | None:
        """Map from basis coefficients to nodal coefficients along one axis.

        ``None`` for the nodal basis.  For the orthonormal basis this is
        ``L^{-T}`` with ``L`` the Cholesky factor of the nodal mass matrix.
        """
        if self.basis_kind == "nodal":
            return None
        eye = np.eye(self.n + 1)
        return sla.solve_triangular(self.nodal_chol_1d, eye, lower=True).T

    @cached_property
    def transform(self) -> np.ndarray | None:
        t = self.transform_1d
        if t is None or self.d == 1:
            return t
        return np.kron(t, t)

    @cached_property
    def mass(self) -> MassMatrix:
        return assemble_mass_matrix(self)

    def to_nodal(self, c: np.ndarray) -> np.ndarray:
        """Nodal coefficients of the function with basis coefficients ``c``."""
        c = np.asarray(c, dtype=float)
        if self.transform_1d is None:
            return c
        return _apply_axes(self, c, self.transform_1d)

    def from_nodal_moments(self, b: np.ndarray) -> np.ndarray:
        """Turn moments against hat functions into moments against this basis."""
        b = np.asarray(b, dtype=float)
        if self.transform_1d is None:
            return b
        return _apply_axes(self, b, self.transform_1d.T)

    def same_as(self, other: "FemSpace") -> bool:
        return (self.d, self.n, self.basis_kind) == (other.d, other.n, other.basis_kind)

    def __repr__(self) -> str:
        return f"FemSpace(d={self.d}, n={self.n}, basis_kind={self.basis_kind!r})"


def build_space(d: int, n: int, basis_kind: str = "nodal") -> FemSpace:
    return FemSpace(d=d, n=n, basis_kind=basis_kind)


def _p1_mass_1d(n: int) -> np.ndarray:
    h = 1.0 / n
    diag = np.full(n + 1, 2.0 * h / 3.0)
    diag[0] = diag[-1] = h / 3.0
    off = np.full(n, h / 6.0)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _apply_axes(space: FemSpace, c: np.ndarray, op: np.ndarray) -> np.ndarray:
    """Apply ``op`` (or ``kron(op, op)`` in 2D) to the leading axis of ``c``."""
    if space.d == 1:
        return op @ c
    m = space.n + 1
    tail = c.shape[1:]
    grid = c.reshape((m, m) + tail)
    out = np.tensordot(op, grid, axes=(1, 0))
    out = np.moveaxis(np.tensordot(op, out, axes=(1, 1)), 0, 1)
    return out.reshape((m * m,) + tail)


def assemble_mass_matrix(space: FemSpace) -> MassMatrix:
    """Mass matrix of the space's basis, its Cholesky factor and extreme eigenvalues.

    Element integrals of hat products are exact (h/3, 2h/3, h/6); the 2D
    matrix is ``kron(M1, M1)``.  Extreme eigenvalues come from the 1D
    tridiagonal factor, so they are cheap even when the 2D matrix is large.
    """
    if space.basis_kind == "l2-orthonormal":
        eye = np.eye(space.n_h)
        return MassMatrix(eye, eye.copy(), 1.0, 1.0)
    m1 = space.nodal_mass_1d
    l1 = space.nodal_chol_1d
    ev = sla.eigvalsh_tridiagonal(np.diag(m1).copy(), np.diag(m1, 1).copy())
    lo, hi = float(ev[0]), float(ev[-1])
    if space.d == 1:
        return MassMatrix(m1.copy(), l1.copy(), lo, hi)
    return MassMatrix(np.kron(m1, m1), np.kron(l1, l1), lo * lo, hi * hi)


# --- quadrature and hat functions -------------------------------------------

def gauss_points(n: int, points_per_element: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on the uniform mesh of [0, 1]."""
    xg, wg = np.polynomial.legendre.leggauss(points_per_element)
    h = 1.0 / n
    left = np.arange(n)[:, None] * h
    x = left + 0.5 * h * (xg[None, :] + 1.0)
    w = np.broadcast_to(0.5 * h * wg, x.shape)
    return x.ravel(), w.ravel().copy()


def hat_matrix(n: int, x: np.ndarray) -> np.ndarray:
    """Values of the n + 1 hat functions at points ``x``, shape (len(x), n + 1)."""
    x = np.asarray(x, dtype=float)
    idx, w_left, w_right = _hat_weights(n, x)
    out = np.zeros((x.size, n + 1))
    rows = np.arange(x.size)
    out[rows, idx] = w_left
    out[rows, idx + 1] += w_right
    return out


def _hat_weights(n: int, x: np.ndarray):
    t = x * n
    idx = np.clip(np.floor(t).astype(int), 0, n - 1)
    w_right = t - idx
    return idx, 1.0 - w_right, w_right


def nodal_moments_1d(n: int, f: Callable[[np.ndarray], np.ndarray], points_per_element: int = 8) -> np.ndarray:
    """Moments ``int f_k theta_i`` of a (vector valued) function against the hats.

    ``f`` maps an array of N points to shape (N,) or (N, K); the result has
    shape (n + 1,) or (n + 1, K).
    """
    x, w = gauss_points(n, points_per_element)
    vals = np.asarray(f(x), dtype=float)
    _check_finite(vals, x)
    hats = hat_matrix(n, x)
    return hats.T @ (w[:, None] * vals if vals.ndim > 1 else w * vals)


def _check_finite(vals: np.ndarray, x: np.ndarray) -> None:
    bad = ~np.isfinite(vals)
    if bad.any():
        pos = np.argwhere(bad)[0]
        raise FloatingPointError(f"non-finite integrand value at x={x[pos[0]]!r}")


def moments(space: FemSpace, f: Callable, points_per_element: int = 8) -> np.ndarray:
    """Vector of ``int_D f theta_j`` over the basis of ``space`` (by quadrature).

    ``f`` takes one coordinate array in 1D and two broadcastable arrays
    ``f(x, y)`` in 2D.
    """
    if space.d == 1:
        b = nodal_moments_1d(space.n, f, points_per_element)
    else:
        x, w = gauss_points(space.n, points_per_element)
        vals = np.asarray(f(x[:, None], x[None, :]), dtype=float)
        vals = np.broadcast_to(vals, (x.size, x.size))
        bad = ~np.isfinite(vals)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise FloatingPointError(f"non-finite integrand value at (x, y)=({x[i]!r}, {x[j]!r})")
        hw = hat_matrix(space.n, x) * w[:, None]
        b = (hw.T @ vals @ hw).ravel()
    return space.from_nodal_moments(b)


def project_l2(space: FemSpace, f: Callable, points_per_element: int = 8) -> np.ndarray:
    """Coefficients of the L2 projection of ``f`` onto ``space``.

    Solves ``M c = b`` with ``b_j = int f theta_j``.
    """
    b = moments(space, f, points_per_element)
    return solve_mass(space, b)


def solve_mass(space: FemSpace, b: np.ndarray) -> np.ndarray:
    """Solve ``M c = b`` for one or several right-hand sides."""
    if space.basis_kind == "l2-orthonormal":
        return np.array(b, dtype=float, copy=True)
    cf = (space.nodal_chol_1d, True)
    if space.d == 1:
        return sla.cho_solve(cf, b)
    m = space.n + 1
    tail = b.shape[1:]
    grid = np.asarray(b, dtype=float).reshape((m, m) + tail)
    out = sla.cho_solve(cf, grid.reshape(m, -1)).reshape(grid.shape)
    out = np.moveaxis(sla.cho_solve(cf, np.moveaxis(out, 1, 0).reshape(m, -1)).reshape((m, m) + tail), 0, 1)
    return out.reshape((m * m,) + tail)


def _check_vector(space: FemSpace, c: np.ndarray, name: str) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[0] != space.n_h:
        raise ValueError(f"{name} has length {c.shape[0]}, space has n_h={space.n_h}")
    return c


def inner_product(space: FemSpace, a: np.ndarray, b: np.ndarray) -> float:
    """L2(D) inner product ``a^T M b`` of two coefficient vectors."""
    a = _check_vector(space, a, "a")
    b = _check_vector(space, b, "b")
    if space.basis_kind == "l2-orthonormal":
        return float(a @ b)
    return float(a @ (space.mass.matrix @ b))


def gram(space: FemSpace, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Matrix of L2 inner products between the columns of ``a`` and ``b``."""
    a = _check_vector(space, a, "a")
    b = a if b is None else _check_vector(space, b, "b")
    if space.basis_kind == "l2-orthonormal":
        return a.T @ b
    return a.T @ (space.mass.matrix @ b)


def basis_matrix(space: FemSpace, points: np.ndarray) -> np.ndarray:
    """Values of every basis function at ``points``, shape (N, n_h)."""
    pts = _check_points(space, points)
    if space.d == 1:
        vals = hat_matrix(space.n, pts)
        t = space.transform_1d
        return vals if t is None else vals @ t
    hx = hat_matrix(space.n, pts[:, 0])
    hy = hat_matrix(space.n, pts[:, 1])
    t = space.transform_1d
    if t is not None:
        hx, hy = hx @ t, hy @ t
    return (hx[:, :, None] * hy[:, None, :]).reshape(pts.shape[0], -1)


def _check_points(space: FemSpace, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if space.d == 1:
        pts = pts.ravel()
    else:
        pts = pts.reshape(-1, 2)
    outside = (pts < 0.0) | (pts > 1.0) | ~np.isfinite(pts)
    if outside.any():
        k = np.argwhere(outside)[0][0]
        raise ValueError(f"point {pts[k]!r} lies outside the closed unit domain")
    return pts


def evaluate(space: FemSpace, c: np.ndarray, points) -> np.ndarray:
    """Pointwise values of ``sum_j c_j theta_j`` (piecewise (bi)linear interpolation)."""
    c = _check_vector(space, c, "c")
    pts = _check_points(space, points)
    nodal = space.to_nodal(c)
    if space.d == 1:
        return np.interp(pts, space.nodes, nodal)
    grid = nodal.reshape(space.n + 1, space.n + 1)
    ix, wx0, wx1 = _hat_weights(space.n, pts[:, 0])
    iy, wy0, wy1 = _hat_weights(space.n, pts[:, 1])
    return (wx0 * wy0 * grid[ix, iy] + wx0 * wy1 * grid[ix, iy + 1]
            + wx1 * wy0 * grid[ix + 1, iy] + wx1 * wy1 * grid[ix + 1, iy + 1])
