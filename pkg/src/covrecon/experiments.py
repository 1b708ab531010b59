"""Experiment harness: configuration, seeded replication and convergence studies.

Configurations are flat ``key = value`` text files (``#`` starts a comment).
Unknown keys and malformed values raise :class:`ConfigError` naming the
offending field.  Replicate ``r`` of an experiment with base seed ``s`` draws
its random numbers from streams keyed by ``(s, r, row)``, so results do not
depend on the order in which replicates are evaluated.
"""
from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _csvio
from .cov_estimators import optimal_taper, sample_covariance, taper_estimate, taper_weights
from .error_analysis import (
    ErrorReport, error_decomposition, gap_condition_check, kernel_l2_distance, mercer_truncate,
    spectral_functionals, success_probability, truncation_error_E1,
)
from .fem_space import FemSpace, build_space
from .field_models import (
    default_generator_modes, model_by_name, sample_field, standard_normals, true_coefficient_covariance,
)
from .spectral_solver import (
    C_DK, continuous_gaps, davis_kahan_diagnostic, fix_signs, generalized_eigendecomposition,
    operator_norm, sampling_error_norm, weyl_check,
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


class InvariantFailure(RuntimeError):
    """Raised by drivers when a hard invariant is violated."""


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_sweep(v: str) -> tuple:
    items = [x for x in v.replace(";", ",").split(",") if x.strip()]
    return tuple(float(x) if any(c in x for c in ".eE") else int(x) for x in items)


@dataclass
class ExperimentConfig:
    model: str = "brownian1d"
    d: int = 1
    n: int = 64
    basis_kind: str = "nodal"
    information: str = "projection"
    L: int = 10
    L_gen: int = 0  # 0 selects max(4 L, 256)
    M: int = 4096
    alpha: float = 1.0
    tau: str = "optimal"  # "optimal", "none" or an even integer
    replicates: int = 10
    seed: int = 0
    out: str = ""
    C1: float = 1.0
    rho1: float = 1.0
    h0: float = 1.0
    dk_constant: float = C_DK
    exact_bypass: bool = False
    psd_repair: bool = False
    workers: int = 1
    axis: str = "truncation"
    sweep: tuple = ()
    n_h: int = 200  # size of the synthetic covariance on the sampling axis
    eps: tuple = (0.2, 0.1, 0.05, 0.02, 0.01)
    beta: float = 0.1
    regime: str = "case-2"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line or (line.startswith("[") and line.endswith("]")):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
        return cls.from_mapping(values)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
        return cls.from_text(text)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls) if not f.name.startswith("_")}
        kwargs = {}
        for key, val in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            parser = _PARSERS[key]
            try:
                kwargs[key] = parser(val) if isinstance(val, str) else val
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config field {key!r}: {exc}") from None
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def replace(self, **changes) -> "ExperimentConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}
        data.update(changes)
        cfg = ExperimentConfig(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"config field {name!r}: {why} (got {getattr(self, name)!r})")
        try:
            model = model_by_name(self.model)
        except ValueError as exc:
            raise ConfigError(f"config field 'model': {exc}") from None
        if self.d != model.d:
            bad("d", f"model {self.model} has d={model.d}")
        if self.n < 2:
            bad("n", "need at least 2 elements per axis")
        if self.basis_kind not in ("nodal", "l2-orthonormal"):
            bad("basis_kind", "expected 'nodal' or 'l2-orthonormal'")
        if self.information not in ("projection", "pointwise"):
            bad("information", "expected 'projection' or 'pointwise'")
        if self.information == "pointwise" and self.basis_kind != "nodal":
            bad("information", "pointwise information requires the nodal basis")
        if self.L < 1:
            bad("L", "must be at least 1")
        if self.L_gen < 0:
            bad("L_gen", "must be non-negative")
        if self.M < 2:
            bad("M", "must be at least 2")
        if not self.alpha > 0:
            bad("alpha", "must be positive")
        if self.tau not in ("optimal", "none"):
            try:
                t = int(self.tau)
            except ValueError:
                bad("tau", "expected 'optimal', 'none' or an even integer")
            if t < 2 or t % 2:
                bad("tau", "explicit taper width must be an even integer >= 2")
        if self.replicates < 1:
            bad("replicates", "must be at least 1")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must lie in [0, 2^64)")
        for name in ("rho1", "h0", "dk_constant"):
            if not getattr(self, name) > 0:
                bad(name, "must be positive")
        if self.C1 < 0:
            bad("C1", "must be non-negative")
        if self.workers < 1:
            bad("workers", "must be at least 1")
        if self.axis not in AXES:
            bad("axis", f"expected one of {AXES}")
        if self.n_h < 2:
            bad("n_h", "must be at least 2")
        if any(not 0 < e < 1 for e in self.eps):
            bad("eps", "every accuracy must lie in (0, 1)")
        if self.regime not in ("case-1", "case-2", "case-3"):
            bad("regime", "expected case-1, case-2 or case-3")

    @property
    def generator_modes(self) -> int:
        return self.L_gen if self.L_gen > 0 else default_generator_modes(self.L)

    def space(self) -> FemSpace:
        return build_space(self.d, self.n, self.basis_kind)

    def taper_for(self, M: int, n_h: int) -> int | None:
        if self.tau == "none":
            return None
        if self.tau == "optimal":
            return optimal_taper(M, self.alpha, n_h)
        return int(self.tau)

    def header_lines(self) -> list[str]:
        out = []
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            v = getattr(self, f.name)
            out.append(f"{f.name} = {','.join(map(str, v)) if isinstance(v, tuple) else v}")
        return out


_PARSERS = {
    "model": str, "d": int, "n": int, "basis_kind": str, "information": str, "L": int, "L_gen": int,
    "M": int, "alpha": float, "tau": str, "replicates": int, "seed": int, "out": str, "C1": float,
    "rho1": float, "h0": float, "dk_constant": float, "exact_bypass": _parse_bool,
    "psd_repair": _parse_bool, "workers": int, "axis": str, "sweep": _parse_sweep, "n_h": int,
    "eps": lambda v: tuple(float(x) for x in _parse_sweep(v)), "beta": float, "regime": str,
}

AXES = ("truncation", "fem", "sampling", "end2end")


def _map_replicates(fn, count: int, workers: int) -> list:
    """Evaluate ``fn(r)`` for every replicate and return results in replicate order."""
    if workers <= 1 or count <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


# --- reconstruction ----------------------------------------------------------------

REPORT_COLUMNS = ("replicate", "seed", "M", "n", "L", "tau", "E1", "E2", "E3", "total", "E_hM",
                  "G", "H", "p0", "p0_clamped", "generator_residual", "weyl_pass", "gap_flags")


@dataclass
class _Shared:
    """Per-configuration quantities reused by every replicate."""

    space: FemSpace
    model: object
    exact_cov: np.ndarray
    exact: object
    lam_cont: np.ndarray
    functionals: object


def _shared(config: ExperimentConfig) -> _Shared:
    space = config.space()
    model = model_by_name(config.model)
    S = true_coefficient_covariance(model, space, None, config.information)
    exact = generalized_eigendecomposition(S, space.mass, provenance="exact", space=space)
    lam = model.eigenvalues(config.L + 1)
    return _Shared(space, model, S, exact, lam, spectral_functionals(model, config.L))


def reconstruct_replicate(config: ExperimentConfig, replicate: int, shared: _Shared | None = None) -> ErrorReport:
    """One pass of sample, estimate, eigendecompose and compare."""
    sh = shared or _shared(config)
    space, model = sh.space, sh.model
    n_h = space.n_h
    tau = config.taper_for(config.M, n_h)
    if config.exact_bypass:
        S_hat = sh.exact_cov
    else:
        samples = sample_field(model, space, config.generator_modes, config.M, config.seed,
                               config.information, replicate)
        est = sample_covariance(samples)
        S_hat = est.matrix if tau is None else taper_estimate(est, tau).matrix
    sampled = generalized_eigendecomposition(S_hat, space.mass, config.psd_repair, "sampled", space)
    sampled = fix_signs(sh.exact, sampled)
    rep = error_decomposition(model, sh.exact, sampled, config.L, config.generator_modes)
    E, _ = sampling_error_norm(sh.exact_cov, S_hat, space.mass)
    _, weyl_ok = weyl_check(sh.exact, sampled, E)
    gaps = continuous_gaps(sh.lam_cont, config.L)
    flags = gap_condition_check(gaps, sh.lam_cont, space.h, model.s, config.C1, E, config.L)
    p0, clamped = success_probability(config.M, n_h, tau or 0, config.rho1, sh.functionals.H,
                                      space.mass.lambda_max)
    rep.E_hM = E
    rep.gap_flags = [bool(f) for f in flags]
    rep.G, rep.H = sh.functionals.G, sh.functionals.H
    rep.p0, rep.p0_clamped = p0, clamped
    rep.params = {"replicate": replicate, "seed": config.seed, "M": config.M, "n": config.n, "L": config.L,
                  "tau": tau, "alpha": config.alpha, "weyl_pass": weyl_ok, "C1": config.C1,
                  "rho1": config.rho1, "information": config.information, "basis": config.basis_kind,
                  "L_gen": config.generator_modes, "exact_bypass": config.exact_bypass}
    return rep


def run_reconstruct(config: ExperimentConfig) -> list[ErrorReport]:
    """End-to-end reconstruction for every replicate; writes CSV when ``config.out`` is set."""
    sh = _shared(config)
    reports = _map_replicates(lambda r: reconstruct_replicate(config, r, sh), config.replicates, config.workers)
    if config.out:
        Path(config.out).write_text(reports_to_csv(reports))
        Path(str(config.out) + ".json").write_text(json.dumps(
            {k: (list(v) if isinstance(v, tuple) else v) for k, v in
             ((f.name, getattr(config, f.name)) for f in fields(config) if not f.name.startswith("_"))},
            sort_keys=True, indent=1) + "\n")
    return reports


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def reports_to_csv(reports: list[ErrorReport]) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for rep in reports:
        row = rep.row()
        row.update({k: rep.params.get(k) for k in ("replicate", "seed", "M", "n", "L", "tau", "weyl_pass")})
        lines.append(",".join(_fmt(row[c]) for c in REPORT_COLUMNS))
    return "\n".join(lines) + "\n"


# --- convergence studies --------------------------------------------------------------

@dataclass
class StudyResult:
    axis: str
    values: np.ndarray
    metrics: np.ndarray  # (len(values), replicates)
    slope: float
    intercept: float
    r2: float
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> np.ndarray:
        return self.metrics.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        if self.metrics.shape[1] < 2:
            return np.zeros(self.metrics.shape[0])
        return self.metrics.std(axis=1, ddof=1)

    def rows(self) -> list[tuple]:
        out = []
        for i, v in enumerate(self.values):
            for r, m in enumerate(self.metrics[i]):
                out.append((v, r, m, self.mean[i], self.std[i]))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# axis={self.axis}, slope={self.slope:.17g}, intercept={self.intercept:.17g}, r2={self.r2:.17g}\n")
        buf.write("value,replicate,metric,mean,std\n")
        for v, r, m, mu, sd in self.rows():
            buf.write(f"{_fmt(float(v))},{r},{_fmt(float(m))},{_fmt(float(mu))},{_fmt(float(sd))}\n")
        return buf.getvalue()


def loglog_fit(x, y) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ np.array([slope, icpt])
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


def _check_sweep(sweep) -> np.ndarray:
    v = np.asarray(sweep, dtype=float)
    if v.size < 4:
        raise ConfigError(f"config field 'sweep': need at least 4 points, got {v.size}")
    if np.any(v <= 0) or np.any(np.diff(v) <= 0):
        raise ConfigError("config field 'sweep': values must be positive and increasing")
    ratios = v[1:] / v[:-1]
    if np.ptp(np.log(ratios)) > 1e-6 * max(1.0, np.abs(np.log(ratios)).max()):
        raise ConfigError("config field 'sweep': values must be geometrically spaced")
    return v


def galerkin_eigenvalue_errors(model, ns, n_eigs: int = 5, information: str = "projection",
                               basis_kind: str = "nodal") -> np.ndarray:
    """``lambda_l - lambda_l^{(h)}`` for ``l <= n_eigs`` on each mesh, shape (len(ns), n_eigs)."""
    lam = model.eigenvalues(n_eigs)
    out = []
    for n in ns:
        space = build_space(model.d, int(n), basis_kind)
        S = true_coefficient_covariance(model, space, None, information)
        es = generalized_eigendecomposition(S, space.mass, space=space)
        out.append(lam - es.values[:n_eigs])
    return np.array(out)


def synthetic_decay_covariance(n_h: int, alpha: float) -> np.ndarray:
    """``S_kk' = (1 + |k - k'|)^{-(alpha + 2)}``, a member of the decay class for ``alpha``."""
    k = np.arange(n_h)
    return (1.0 + np.abs(k[:, None] - k[None, :])) ** (-(alpha + 2.0))


def sampling_errors(S: np.ndarray, M: int, replicates: int, seed: int, tau: int | None,
                    workers: int = 1) -> np.ndarray:
    """Operator-norm errors of the (tapered) sample covariance of ``N(0, S)`` draws."""
    C = np.linalg.cholesky(S)
    n = S.shape[0]
    W = None if tau is None else taper_weights(n, tau)

    def one(r):
        X = standard_normals(seed, r, M, n) @ C.T
        est = sample_covariance(X).matrix
        if W is not None:
            est = W * est
        return operator_norm(est - S)
    return np.array(_map_replicates(one, replicates, workers))


def tapered_vs_plain(S: np.ndarray, M: int, replicates: int, seed: int, tau: int) -> tuple[np.ndarray, np.ndarray]:
    """Errors of the tapered and the plain estimator on the same draws."""
    C = np.linalg.cholesky(S)
    n = S.shape[0]
    W = taper_weights(n, tau)
    tap, plain = [], []
    for r in range(replicates):
        X = standard_normals(seed, r, M, n) @ C.T
        est = sample_covariance(X).matrix
        plain.append(operator_norm(est - S))
        tap.append(operator_norm(W * est - S))
    return np.array(tap), np.array(plain)


def run_converge(config: ExperimentConfig, axis: str | None = None, sweep=None) -> StudyResult:
    """Convergence study along one parameter axis with a fitted log-log slope.

    ``truncation``: E1(L) for L in the sweep.  ``fem``: largest of the first
    five eigenvalue errors against h = 1/n.  ``sampling``: mean operator-norm
    error of the estimator against M on a synthetic decaying covariance.
    ``end2end``: mean total reconstruction error against M.
    """
    axis = axis or config.axis
    if axis not in AXES:
        raise ConfigError(f"config field 'axis': expected one of {AXES} (got {axis!r})")
    sweep = _check_sweep(sweep if sweep is not None else config.sweep)
    model = model_by_name(config.model)
    extra: dict = {}
    if axis == "truncation":
        metrics = np.array([[truncation_error_E1(model, int(L))] for L in sweep])
        x = sweep
    elif axis == "fem":
        errs = galerkin_eigenvalue_errors(model, sweep.astype(int), 5, config.information, config.basis_kind)
        extra["per_eigenvalue"] = errs
        extra["ratios"] = errs[:-1] / errs[1:]
        metrics = np.abs(errs).max(axis=1)[:, None]
        x = 1.0 / sweep
    elif axis == "sampling":
        S = synthetic_decay_covariance(config.n_h, config.alpha)
        metrics = np.array([sampling_errors(S, int(M), config.replicates, config.seed,
                                            config.taper_for(int(M), config.n_h), config.workers)
                            for M in sweep])
        extra["tau"] = [config.taper_for(int(M), config.n_h) for M in sweep]
        x = sweep
    else:
        rows = []
        for M in sweep:
            reps = run_reconstruct(config.replace(M=int(M), out=""))
            rows.append([r.total for r in reps])
        metrics = np.array(rows)
        x = sweep
    slope, icpt, r2 = loglog_fit(x, metrics.mean(axis=1))
    return StudyResult(axis, sweep, metrics, slope, icpt, r2, extra)


# --- invariant suite ---------------------------------------------------------------------

@dataclass
class InvariantResult:
    module: str
    name: str
    passed: bool
    seed: int
    detail: str = ""


def run_check_invariants(config: ExperimentConfig | None = None, corrupt_mass: bool = False) -> list[InvariantResult]:
    """Run the cross-module invariant suite at small sizes.

    ``corrupt_mass`` swaps in a wrong Cholesky factor for the sampled
    decompositions to demonstrate that the checks detect it.
    """
    from . import fem_space as fs
    from .cov_estimators import taper_weight
    from .error_analysis import brownian_g_squared, brownian_h, g_functional, h_functional
    from .field_models import BrownianMotion1D, BrownianSheet
    from .planner import brownian_inputs, lambert_w, plan_parameters, verify_plan, REGIMES

    cfg = config or ExperimentConfig()
    seed = cfg.seed
    rng = np.random.default_rng(seed)
    out: list[InvariantResult] = []

    def rec(module, name, ok, detail=""):
        out.append(InvariantResult(module, name, bool(ok), seed, detail))

    # fem_space
    worst_chol, min_eig, pu = 0.0, math.inf, 0.0
    for d, n in ((1, 8), (1, 64), (1, 512), (2, 4), (2, 16)):
        sp = build_space(d, n)
        mm = sp.mass
        worst_chol = max(worst_chol, np.linalg.norm(mm.chol @ mm.chol.T - mm.matrix) / np.linalg.norm(mm.matrix))
        min_eig = min(min_eig, mm.lambda_min)
        pu = max(pu, abs(mm.matrix.sum() - 1.0))
    rec("fem_space", "mass matrix SPD", min_eig > 0, f"min eigenvalue {min_eig:.3e}")
    rec("fem_space", "Cholesky reconstruction", worst_chol <= 1e-12, f"{worst_chol:.3e}")
    rec("fem_space", "entries sum to |D|", pu <= 1e-12, f"{pu:.3e}")
    worst = 0.0
    for kind in ("nodal", "l2-orthonormal"):
        for d in (1, 2):
            sp = build_space(d, 8, kind)
            c = rng.standard_normal(sp.n_h)
            f = (lambda x, c=c, sp=sp: fs.evaluate(sp, c, x)) if d == 1 else \
                (lambda x, y, c=c, sp=sp: fs.evaluate(sp, c, np.stack(np.broadcast_arrays(x, y), -1).reshape(-1, 2)).reshape(np.broadcast(x, y).shape))
            worst = max(worst, np.abs(fs.project_l2(sp, f) - c).max())
    rec("fem_space", "projection idempotence", worst <= 1e-10, f"{worst:.3e}")

    # field_models
    m1, m2 = BrownianMotion1D(), BrownianSheet()
    lam2 = m2.eigenvalues(500)
    rec("field_models", "spectrum monotone", np.all(np.diff(m1.eigenvalues(500)) <= 0) and np.all(np.diff(lam2) <= 0))
    x, w = fs.gauss_points(64, 8)
    F = m1.eigenfunctions(10, x)
    gram_err = np.abs(F.T @ (w[:, None] * F) - np.eye(10)).max()
    rec("field_models", "eigenfunction orthonormality", gram_err <= 1e-8, f"{gram_err:.3e}")

    # cov_estimators
    sym_ok, range_ok = True, True
    for _ in range(50):
        n = int(rng.integers(2, 40))
        A = rng.standard_normal((n, n))
        S = A + A.T
        tau = 2 * int(rng.integers(1, 20))
        T = taper_estimate(S, tau).matrix
        sym_ok &= np.array_equal(T, T.T) and np.all(np.abs(T) <= np.abs(S))
        range_ok &= all(0 <= taper_weight(k, kp, tau) <= 1 for k in range(5) for kp in range(5)) and taper_weight(3, 3, tau) == 1
    rec("cov_estimators", "taper preserves symmetry and contracts", sym_ok)
    rec("cov_estimators", "weight range", range_ok)

    # spectral_solver
    orth, weyl_fail, dk_fail, bracket_fail = 0.0, 0, 0, 0
    for trial in range(100):
        n = int(rng.integers(2, 17))
        sp = build_space(1, n)
        A = rng.standard_normal((n + 1, n + 1))
        S = A @ A.T / (n + 1)
        P = rng.standard_normal(S.shape) * 10 ** rng.uniform(-4, -1)
        S2 = S + 0.5 * (P + P.T)
        ex = generalized_eigendecomposition(S, sp.mass)
        mass_s = sp.mass
        if corrupt_mass:
            bent = sp.mass.matrix + 0.3 * np.diag(np.linspace(0.0, sp.h, n + 1))
            mass_s = fs.MassMatrix(sp.mass.matrix, np.linalg.cholesky(bent), sp.mass.lambda_min, sp.mass.lambda_max)
        sa = fix_signs(ex, generalized_eigendecomposition(S2, mass_s))
        orth = max(orth, np.abs(sa.vectors.T @ sp.mass.matrix @ sa.vectors - np.eye(n + 1)).max())
        E, (lo, hi) = sampling_error_norm(S, S2, sp.mass)
        bracket_fail += not lo * (1 - 1e-12) <= E <= hi * (1 + 1e-12)
        weyl_fail += not weyl_check(ex, sa, E)[1]
        dk_fail += sum(not e.holds for e in davis_kahan_diagnostic(ex, sa, E) if not e.vacuous)
    rec("spectral_solver", "mass orthonormality", orth <= 1e-8, f"{orth:.3e}")
    rec("spectral_solver", "Weyl inequality", weyl_fail == 0, f"{weyl_fail} violations")
    rec("spectral_solver", "Davis-Kahan bound", dk_fail == 0, f"{dk_fail} violations")
    rec("spectral_solver", "E_hM mass bracket", bracket_fail == 0, f"{bracket_fail} violations")
    # Galerkin eigenvalues sit below the continuous ones (checked, not assumed)
    minmax = 0.0
    for n in (4, 16, 64):
        sp = build_space(1, n)
        k = min(10, sp.n_h)
        vals = generalized_eigendecomposition(true_coefficient_covariance(m1, sp), sp.mass).values[:k]
        minmax = max(minmax, float(np.max(vals - m1.eigenvalues(k))))
    rec("spectral_solver", "Galerkin eigenvalues below continuous", minmax <= 1e-12, f"max excess {minmax:.3e}")

    # error_analysis
    gh = 0.0
    for L in (1, 5, 20, 60):
        for mdl in (m1, m2):
            a = spectral_functionals(mdl, L)
            b = spectral_functionals(mdl, L, closed_form=False)
            gh = max(gh, abs(a.G / b.G - 1), abs(a.H / b.H - 1))
    rec("error_analysis", "G/H closed form vs numeric", gh <= 1e-10, f"{gh:.3e}")
    small = cfg.replace(n=16, M=256, replicates=3, L=4, L_gen=64, out="", model="brownian1d", d=1)
    reps = run_reconstruct(small)
    rec("error_analysis", "triangle inequality", all(r.triangle_ok for r in reps))
    rec("error_analysis", "E1 closed form", abs(truncation_error_E1(m1, 0) - 1 / math.sqrt(6)) <= 1e-12)

    # planner
    plan_ok = True
    for eps in (0.2, 0.05):
        inp = brownian_inputs(eps)
        for regime in REGIMES:
            p = plan_parameters(inp, regime)
            plan_ok &= all(ok for _, ok in verify_plan(p, inp))
    rec("planner", "plans satisfy their inequalities", plan_ok)
    xs = np.concatenate([-math.exp(-1) + np.logspace(-6, math.log10(math.exp(-1)), 20), np.logspace(-6, 6, 40)])
    res = max(abs(lambert_w(v) * math.exp(lambert_w(v)) - v) / max(1.0, abs(v)) for v in xs)
    rec("planner", "lambert_w residual", res <= 1e-12, f"{res:.3e}")
    return out


def format_invariants(results: list[InvariantResult], config: ExperimentConfig) -> str:
    lines = ["# invariant suite; configuration in effect (defaults applied where unset):"]
    lines += [f"#   {h}" for h in config.header_lines()]
    lines.append("module,invariant,status,seed,detail")
    for r in results:
        lines.append(f"{r.module},{r.name},{'pass' if r.passed else 'FAIL'},{r.seed},{r.detail}")
    return "\n".join(lines) + "\n"
