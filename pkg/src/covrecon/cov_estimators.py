"""Covariance estimators for coefficient vectors.

Includes the plain sample covariance, the tapering estimator that reweights
entries by their distance from the diagonal, a data-size driven choice of the
taper width, a diagnostic for off-diagonal decay, and the rate functions
``rho`` / ``rho_tilde`` that describe the expected estimation error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _csvio


@dataclass
class CovarianceEstimate:
    """A symmetric covariance estimate together with how it was produced."""

    matrix: np.ndarray
    kind: str  # "sample" or "tapered"
    M: int
    tau: int | None = None
    alpha: float | None = None

    @property
    def n_h(self) -> int:
        return self.matrix.shape[0]

    def to_csv(self, path) -> None:
        meta = {"kind": self.kind, "M": self.M, "tau": self.tau, "alpha": self.alpha}
        _csvio.write_matrix(path, self.matrix, meta)


@dataclass
class DecayClassReport:
    """Measured off-diagonal decay of a covariance matrix.

    ``tails[c - 1]`` is ``max_k sum_{|k' - k| > c} |S_kk'|`` for cutoff ``c``.
    ``C1`` is the smallest constant with ``tails(c) <= C1 c^-alpha`` for all
    ``c`` and ``C2`` the largest eigenvalue.  ``member`` compares both against
    the supplied bounds (infinite by default, so any finite matrix is a member).
    """

    alpha: float
    tails: np.ndarray
    lambda_max: float
    C1: float
    C2: float
    member: bool
    c1_bound: float = math.inf
    c2_bound: float = math.inf

    def to_text(self) -> str:
        rows = [("alpha", self.alpha), ("C1", self.C1), ("C2", self.C2),
                ("lambda_max", self.lambda_max), ("member", self.member),
                ("c1_bound", self.c1_bound), ("c2_bound", self.c2_bound)]
        return "\n".join(f"{k} = {v!r}" if isinstance(v, bool) else f"{k} = {v:.17g}" for k, v in rows) + "\n"


def _as_values(samples) -> np.ndarray:
    return np.asarray(getattr(samples, "values", samples), dtype=float)


def sample_mean(samples) -> np.ndarray:
    """Row average of a sample matrix (or a :class:`SampleMatrix`)."""
    X = _as_values(samples)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("need at least one sample row")
    return X.mean(axis=0)


def sample_covariance(samples) -> CovarianceEstimate:
    """Maximum-likelihood covariance ``(1/M) sum (K_m - mean)(K_m - mean)^T``."""
    X = _as_values(samples)
    M = X.shape[0]
    if M < 2:
        raise ValueError(f"sample covariance needs M >= 2 rows, got M={M}")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / M
    return CovarianceEstimate(0.5 * (S + S.T), "sample", M)


def _check_tau(tau) -> None:
    if tau < 1 or int(tau) != tau or int(tau) % 2:
        raise ValueError(f"taper width must be a positive even integer, got {tau}")


def taper_weight(k: int, kp: int, tau: int) -> float:
    """Taper weight for the entry ``(k, k')``.

    1 for lags up to ``tau/2``, a linear ramp ``2 (1 - lag/tau)`` in between,
    0 for lags of ``tau`` or more.
    """
    _check_tau(tau)
    lag = abs(k - kp)
    if 2 * lag <= tau:
        return 1.0
    if lag < tau:
        return 2.0 * (1.0 - lag / tau)
    return 0.0


def taper_weights(n: int, tau: int) -> np.ndarray:
    """Matrix of taper weights for an ``n x n`` covariance."""
    _check_tau(tau)
    k = np.arange(n)
    lag = np.abs(k[:, None] - k[None, :])
    return np.where(2 * lag <= tau, 1.0, np.where(lag < tau, 2.0 * (1.0 - lag / tau), 0.0))


def taper_estimate(cov, tau: int) -> CovarianceEstimate:
    """Entrywise product of a covariance estimate with the taper weights."""
    if isinstance(cov, CovarianceEstimate):
        S, M, alpha = cov.matrix, cov.M, cov.alpha
    else:
        S, M, alpha = np.asarray(cov, dtype=float), 0, None
    W = taper_weights(S.shape[0], tau)
    return CovarianceEstimate(W * S, "tapered", M, int(tau), alpha)


def optimal_taper(M: int, alpha: float, n_h: int | None = None) -> int:
    """Even taper width closest to ``M^{1/(2 alpha + 1)}``.

    Ties between two even numbers round up.  The result is at least 2 and,
    when ``n_h`` is given, at most ``2 n_h``.
    """
    if M < 1 or alpha <= 0:
        raise ValueError("need M >= 1 and alpha > 0")
    raw = M ** (1.0 / (2.0 * alpha + 1.0))
    if abs(raw - round(raw)) <= 1e-9 * raw:  # exact roots such as 729^(1/3) come out a few ulps low
        raw = float(round(raw))
    tau = 2 * int(math.floor(raw / 2.0 + 0.5))
    tau = max(tau, 2)
    if n_h is not None:
        tau = min(tau, 2 * int(n_h))
    return tau


def off_diagonal_tails(S: np.ndarray) -> np.ndarray:
    """``max_k sum_{|k'-k| > c} |S_kk'|`` for ``c = 1..n``."""
    A = np.abs(np.asarray(S, dtype=float))
    n = A.shape[0]
    tails = np.zeros(n)
    # band sums of |S| by lag, accumulated from the far end
    row_lag = np.zeros((n, n))  # row_lag[k, c] = sum over |k'-k| == c
    for c in range(n):
        d = np.diagonal(A, c)
        row_lag[: n - c, c] += d
        if c:
            row_lag[c:, c] += np.diagonal(A, -c)
    # cum[k, c] = sum over lags >= c, with a zero column for c = n
    cum = np.zeros((n, n + 1))
    cum[:, :n] = np.cumsum(row_lag[:, ::-1], axis=1)[:, ::-1]
    for c in range(1, n + 1):
        tails[c - 1] = cum[:, min(c + 1, n)].max()
    return tails


def decay_class_check(S: np.ndarray, alpha: float, c1_bound: float = math.inf,
                      c2_bound: float = math.inf) -> DecayClassReport:
    """Measure the off-diagonal decay constants of ``S`` for exponent ``alpha``."""
    S = np.asarray(S, dtype=float)
    tails = off_diagonal_tails(S)
    c = np.arange(1, tails.size + 1)
    C1 = float(np.max(tails * c**alpha)) if tails.size else 0.0
    lam_max = float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])
    member = C1 <= c1_bound and lam_max <= c2_bound
    return DecayClassReport(alpha, tails, lam_max, C1, lam_max, bool(member), c1_bound, c2_bound)


def rho(M: float, n_h: float, alpha: float) -> float:
    """Expected squared-error rate of the tapering estimator in terms of ``n_h``."""
    if M <= 0 or n_h <= 0 or alpha <= 0:
        raise ValueError("rho needs positive arguments")
    if n_h >= M ** (1.0 / (2.0 * alpha + 1.0)):
        return M ** (-2.0 * alpha / (2.0 * alpha + 1.0)) + math.log(n_h) / M
    return n_h / M


def rho_tilde(M: float, h: float, d: int, alpha: float) -> float:
    """Mesh-size form of :func:`rho` using ``n_h ~ h^-d``."""
    if M <= 0 or h <= 0 or alpha <= 0:
        raise ValueError("rho_tilde needs positive arguments")
    n_h = h ** (-d)
    if n_h >= M ** (1.0 / (2.0 * alpha + 1.0)):
        return M ** (-2.0 * alpha / (2.0 * alpha + 1.0)) + d * math.log(1.0 / h) / M
    return n_h / M
