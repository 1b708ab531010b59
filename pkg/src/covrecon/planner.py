"""Accuracy-driven choice of truncation level, sample count and mesh size.

Given a target accuracy ``eps`` the planner returns sufficient values of
``L`` (Mercer truncation), ``M`` (number of samples) and an admissible
interval of mesh sizes ``h`` for one of three regimes of the tapering rate:

``case-1``
    ``n_h < M^{1/(2 alpha + 1)}`` (few degrees of freedom);
``case-2``
    ``n_h >= M^{1/(2 alpha + 1)}`` and the ``log(n_h)/M`` term dominates;
``case-3``
    ``n_h >= M^{1/(2 alpha + 1)}`` and the ``M^{-2 alpha/(2 alpha + 1)}`` term dominates.

Throughout ``n_h`` is identified with ``h^{-d}``.  Every "greater than up to
a constant" relation is realised with the multiplicative constant
``PlanInputs.constant`` (default 1).  Integer thresholds are found by exact
integer search on their defining inequality, evaluated in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .error_analysis import brownian_g_squared, brownian_h
from .field_models import BrownianMotion1D, BrownianSheet

REGIMES = ("case-1", "case-2", "case-3")
DEFAULT_CAP = 2**62
_INV_E = math.exp(-1.0)


# --- product logarithm --------------------------------------------------------

def lambert_w(x: float, branch: int = 0, tol: float = 1e-15, max_iter: int = 50) -> float:
    """Real product logarithm: the ``w`` with ``w exp(w) = x``.

    ``branch=0`` is the principal branch (``w >= -1``, defined for
    ``x >= -1/e``), ``branch=-1`` the lower branch (``w <= -1``, defined for
    ``-1/e <= x < 0``).  Halley's iteration from a branch-specific start.
    """
    x = float(x)
    if branch not in (0, -1):
        raise ValueError(f"branch must be 0 or -1, got {branch}")
    if not math.isfinite(x) and not (branch == 0 and x == math.inf):
        raise ValueError(f"lambert_w argument must be finite, got {x}")
    if x < -_INV_E:
        if x > -_INV_E - 1e-16:
            x = -_INV_E
        else:
            raise ValueError(f"lambert_w is not real for x={x} < -1/e")
    if branch == -1 and x >= 0.0:
        raise ValueError(f"lower branch needs -1/e <= x < 0, got {x}")
    if x == 0.0:
        return 0.0
    if x == -_INV_E:
        return -1.0
    if x == math.inf:
        return math.inf

    # starting point
    p2 = 2.0 * (math.e * x + 1.0)
    if branch == 0:
        if x < -0.25:
            p = math.sqrt(max(p2, 0.0))
            w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
        elif x < 3.0:
            w = math.log1p(x)
        else:
            lx = math.log(x)
            w = lx - math.log(lx)
    else:
        if x < -0.25:
            p = math.sqrt(max(p2, 0.0))
            w = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p**3
        else:
            lx = math.log(-x)
            w = lx - math.log(-lx)

    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w_new = w - step
        if branch == 0 and w_new < -1.0:
            w_new = 0.5 * (w - 1.0)
        if branch == -1 and w_new > -1.0:
            w_new = 0.5 * (w - 1.0)
        if abs(w_new - w) <= tol * (1.0 + abs(w_new)):
            return w_new
        w = w_new
    return w


# --- inputs and plans -----------------------------------------------------------

@dataclass
class PlanInputs:
    """Assumptions and constants for the planner.

    ``G`` and ``H`` map ``L`` to the spectral functionals, ``eigenvalue``
    maps ``l`` (1-based) to ``lambda_l``.  The Brownian helpers fill them
    with closed forms.
    """

    eps: float
    s: float
    d: int
    alpha: float
    gamma: float
    beta: float = 0.1
    rho1: float = 1.0
    h0: float = 1.0
    lambda_max_mass: float = 1.0
    constant: float = 1.0
    G: Callable[[int], float] | None = None
    H: Callable[[int], float] | None = None
    eigenvalue: Callable[[int], float] | None = None
    cap: int = DEFAULT_CAP

    def validate(self) -> None:
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        for name in ("alpha", "s", "beta", "rho1", "h0", "lambda_max_mass", "constant"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.d not in (1, 2, 3) or int(self.d) != self.d:
            raise ValueError(f"d must be a small positive integer, got {self.d}")
        for name in ("H", "eigenvalue"):
            if getattr(self, name) is None:
                raise ValueError(f"spectral functional {name!r} is required but was not supplied")

    @property
    def q(self) -> float:
        return 2.0 * self.alpha + 1.0

    @property
    def kappa(self) -> float:
        """Exponential rate ``rho1 H(L) / lambda_max(M)^2`` per sample."""
        return self.rho1 * self.H(truncation_level(self.eps, self.s, self.d)) / self.lambda_max_mass**2


@dataclass
class Plan:
    regime: str
    eps: float
    L: int
    M: int
    h_lo: float
    h_hi: float
    log_h_lo: float
    log_h_hi: float
    vacuous: bool
    capped: bool = False
    terms: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def h(self) -> float:
        """Recommended mesh size: the largest admissible value."""
        return math.nan if self.vacuous else self.h_hi

    def table(self) -> list[tuple[str, object]]:
        rows = [("regime", self.regime), ("eps", self.eps), ("L", self.L), ("M", self.M),
                ("h_lo", self.h_lo), ("h_hi", self.h_hi), ("h", self.h),
                ("log_h_lo", self.log_h_lo), ("log_h_hi", self.log_h_hi),
                ("vacuous", self.vacuous), ("capped", self.capped)]
        rows += [(f"term.{k}", v) for k, v in self.terms.items()]
        rows += [("flag", f) for f in self.flags]
        return rows


def truncation_level(eps: float, s: float, d: int) -> int:
    """``ceil(eps^{-2d/(4s+d)})``, robust to rounding at exact integers."""
    raw = eps ** (-2.0 * d / (4.0 * s + d))
    return max(1, math.ceil(raw * (1.0 - 1e-12)))


# --- integer thresholds ---------------------------------------------------------

def least_integer(pred: Callable[[int], bool], cap: int = DEFAULT_CAP) -> tuple[int, bool]:
    """Least ``M >= 1`` with ``pred(M)``, assuming ``pred`` stays true once true.

    Doubling search followed by bisection.  Returns ``(cap, True)`` when the
    predicate fails at ``cap``.
    """
    if pred(1):
        return 1, False
    lo, hi = 1, 2
    while not pred(hi):
        if hi >= cap:
            return cap, True
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi, False


def _log_c(inp: PlanInputs, L: int) -> float:
    """``log(L^{1/2} / eps)``."""
    return 0.5 * math.log(L) - math.log(inp.eps)


def _exp_condition(inp: PlanInputs, L: int):
    """``L^{1/2} eps^{-1} exp(-M kappa) <= M^{-1/(2 alpha + 1)}`` in log form."""
    c, k, q = _log_c(inp, L), inp.kappa, inp.q
    return lambda M: c - M * k + math.log(M) / q <= 0.0


def _exp_condition_alpha0(inp: PlanInputs, L: int):
    c, k = _log_c(inp, L), inp.kappa
    return lambda M: c - M * k + math.log(M) <= 0.0


def _hat_condition(inp: PlanInputs):
    q, d = inp.q, inp.d
    return lambda M: -M ** (1.0 / q) / d + math.log(M) / (d * q) <= 0.0


def _prime_condition(inp: PlanInputs, L: int):
    c, k, q, d = _log_c(inp, L), inp.kappa, inp.q, inp.d
    return lambda M: (c - M * k) / d + M ** (1.0 / q) / d <= 0.0


def fixed_point_thresholds(inp: PlanInputs) -> dict:
    """The four integer sample-size thresholds and whether any hit the cap.

    ``M_bar`` and ``M_tilde`` share one defining inequality
    ``exp(-M kappa) <= eps L^{-1/2} M^{-1/(2 alpha + 1)}``; ``M_hat`` makes
    ``exp(-M^{1/(2 alpha+1)}/d) <= M^{-1/(d(2 alpha+1))}`` and ``M_prime``
    makes the sampling-failure lower bound on ``h`` fall below the
    rate-dominance bound.
    """
    inp.validate()
    L = truncation_level(inp.eps, inp.s, inp.d)
    m_bar, c1 = least_integer(_exp_condition(inp, L), inp.cap)
    m_hat, c2 = least_integer(_hat_condition(inp), inp.cap)
    m_prime, c3 = least_integer(_prime_condition(inp, L), inp.cap)
    capped = {name for name, hit in (("M_bar", c1), ("M_tilde", c1), ("M_hat", c2), ("M_prime", c3)) if hit}
    return {"M_bar": m_bar, "M_tilde": m_bar, "M_hat": m_hat, "M_prime": m_prime, "capped": capped}


def lambert_threshold(inp: PlanInputs, L: int, alpha: float | None = None) -> float:
    """Real solution ``x*`` of ``L^{1/2} eps^{-1} exp(-x kappa) = x^{-1/q}``, ``q = 2 alpha + 1``.

    Taking logs gives ``(-q kappa x) exp(-q kappa x) = -q kappa (eps L^{-1/2})^q``;
    the larger root, past which the inequality keeps holding, lies on the
    lower branch: ``x* = -W_{-1}(-q kappa (eps L^{-1/2})^q) / (q kappa)``.
    Returns 1.0 when the argument is below ``-1/e`` (no crossing: the
    inequality holds for every M).
    """
    a = inp.alpha if alpha is None else alpha
    q = 2.0 * a + 1.0
    k = inp.kappa
    if not math.isfinite(k):
        return 1.0
    arg = -q * k * (inp.eps / math.sqrt(L)) ** q
    if arg < -_INV_E:
        return 1.0
    return -lambert_w(arg, -1) / (q * k)


# --- plans ------------------------------------------------------------------------

def _ceil_float(x: float, cap: int) -> tuple[int, bool]:
    if not math.isfinite(x) or x >= cap:
        return cap, True
    # values a hair above an integer (rounding in pow/exp) round down to it
    fl = math.floor(x)
    return max(1, int(fl) if x - fl < 1e-9 else int(fl) + 1), False


def _h_caps(inp: PlanInputs, L: int) -> dict:
    """Log of the spectral upper bounds on h."""
    s = inp.s
    HL = inp.H(L)
    lam_L, lam_L1 = inp.eigenvalue(L), inp.eigenvalue(L + 1)
    log_gap_term = math.log(HL) / (4 * s) + math.log(lam_L1) / (2 * s) if HL > 0 else -math.inf
    return {"log_h_gap": log_gap_term, "log_h_eig": math.log(lam_L) / s}


def plan_parameters(inp: PlanInputs, regime: str = "case-2") -> Plan:
    """Sufficient ``(L, M, [h_lo, h_hi])`` for accuracy ``eps`` in one regime.

    The h interval is returned in log form as well, since the bounds often
    underflow double precision.  An empty interval sets ``vacuous``.
    """
    inp.validate()
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    eps, d, q, a, cap = inp.eps, inp.d, inp.q, inp.alpha, inp.cap
    L = truncation_level(eps, inp.s, d)
    thr = fixed_point_thresholds(inp)
    caps = _h_caps(inp, L)
    log_spec = min(caps["log_h_gap"], caps["log_h_eig"])
    kappa = inp.kappa
    c = _log_c(inp, L)
    terms: dict = {"L_raw": eps ** (-2.0 * d / (4.0 * inp.s + d)), "kappa": kappa, **caps}
    used = {"case-1": ("M_bar",), "case-2": ("M_tilde",), "case-3": ("M_hat", "M_prime")}[regime]
    capped = any(name in thr["capped"] for name in used)
    flags: list = []

    if regime == "case-1":
        t_rate = inp.constant * eps ** (-q / a) * L ** (inp.gamma * q / a)
        t_spec = inp.constant * math.exp(-d * q * log_spec)
        m_rate, c_a = _ceil_float(t_rate, cap)
        m_spec, c_b = _ceil_float(t_spec, cap)
        terms.update(M_bar=thr["M_bar"], M_rate=m_rate, M_spec=m_spec)
        M = max(thr["M_bar"], m_rate, m_spec)
        capped |= c_a or c_b
        log_lo = -math.log(M) / (d * q)
        log_hi = min(log_spec, math.log(inp.h0))
    elif regime == "case-2":
        expo = (2 * (2 * inp.s + d) * inp.beta + 2 * inp.s * d * inp.gamma) / (inp.s * d)
        t_poly = inp.constant * L**expo * eps**-2
        m_poly, c_a = _ceil_float(t_poly, cap)
        terms.update(M_tilde=thr["M_tilde"], M_poly=m_poly, poly_exponent=expo)
        M = max(thr["M_tilde"], m_poly)
        capped |= c_a
        log_lo = (c - M * kappa) / d
        log_hi = min(log_spec, -math.log(M) / (d * q), math.log(inp.h0), -M ** (1.0 / q) / d)
        flags.append("log-dominance bound exp(-M^{1/(2alpha+1)}/d) added to the upper side of h")
    else:
        t_rate = inp.constant * L ** (inp.gamma * q / a) * eps ** (-q / a)
        t_spec = inp.constant * math.exp(-d * q * log_spec)
        m_rate, c_a = _ceil_float(t_rate, cap)
        m_spec, c_b = _ceil_float(t_spec, cap)
        terms.update(M_hat=thr["M_hat"], M_prime=thr["M_prime"], M_rate=m_rate, M_spec=m_spec)
        M = max(thr["M_hat"], thr["M_prime"], m_rate, m_spec)
        capped |= c_a or c_b
        log_lo = max((c - M * kappa) / d, -M ** (1.0 / q) / d)
        log_hi = min(log_spec, -math.log(M) / (d * q), math.log(inp.h0))
        flags.append("rate-dominance bound exp(-M^{1/(2alpha+1)}/d) used as a lower bound on h")

    vacuous = not log_lo <= log_hi
    if vacuous:
        flags.append("empty h interval")
    if capped:
        flags.append(f"a sample-size term reached the cap {cap}")
    return Plan(regime, eps, L, int(M), math.exp(log_lo), math.exp(log_hi), log_lo, log_hi,
                vacuous, capped, terms, flags)


def verify_plan(plan: Plan, inp: PlanInputs) -> list[tuple[str, bool]]:
    """Substitute a plan back into its defining inequalities.

    Returns ``(name, holds)`` pairs.  Interval and regime checks are skipped
    for vacuous plans, and sample-size checks for capped ones.
    """
    eps, d, q, M, L = inp.eps, inp.d, inp.q, plan.M, plan.L
    tol = 1e-12
    if plan.regime == "brownian":
        return _verify_brownian(plan, inp)
    out = [("L >= eps^{-2d/(4s+d)}", L >= plan.terms["L_raw"] * (1 - tol)),
           ("L - 1 < eps^{-2d/(4s+d)}", L - 1 < plan.terms["L_raw"] * (1 + tol) or L == 1)]
    if not plan.capped:
        for key, val in plan.terms.items():
            if key.startswith("M_"):
                out.append((f"M >= {key}", M >= val))
        if plan.regime in ("case-1", "case-2"):
            out.append(("exponential condition at M", _exp_condition(inp, L)(M)))
        else:
            out.append(("M_hat condition at M", _hat_condition(inp)(M)))
            out.append(("M_prime condition at M", _prime_condition(inp, L)(M)))
    if plan.vacuous:
        return out
    log_h = plan.log_h_hi
    slack = 1e-12 * max(1.0, abs(log_h))
    out.append(("h_lo <= h <= h_hi", plan.log_h_lo <= log_h + slack and log_h <= plan.log_h_hi + slack))
    log_spec = min(plan.terms["log_h_gap"], plan.terms["log_h_eig"])
    out.append(("h below spectral bounds", log_h <= log_spec + slack))
    out.append(("h <= h0", log_h <= math.log(inp.h0) + slack))
    # regime branch: n_h = h^{-d} against M^{1/q}
    boundary = -math.log(M) / (d * q)
    if plan.regime == "case-1":
        out.append(("n_h <= M^{1/(2alpha+1)}", log_h >= boundary - slack))
    else:
        out.append(("n_h >= M^{1/(2alpha+1)}", log_h <= boundary + slack))
        log_dom = -M ** (1.0 / q) / d
        if plan.regime == "case-2":
            out.append(("log term dominates", log_h <= log_dom + slack))
        else:
            out.append(("rate term dominates", log_h >= log_dom - slack))
        # sampling-failure contribution L^{1/2} h^{-d} exp(-M kappa) <= eps
        out.append(("failure term <= eps", _log_c(inp, L) - d * log_h - M * inp.kappa <= slack))
    return out


# --- Brownian specialisation ------------------------------------------------------

def brownian_inputs(eps: float, d: int = 1, alpha: float = 1.0, beta: float = 0.1,
                    rho1: float = 1.0, h0: float = 1.0, constant: float = 1.0) -> PlanInputs:
    """Planner inputs with closed-form Brownian functionals (``s = 1/2``, ``gamma = 3/2``)."""
    model = BrownianMotion1D() if d == 1 else BrownianSheet()

    def eig(ell: int) -> float:
        return float(model.eigenvalues(ell)[-1])

    return PlanInputs(eps=eps, s=0.5, d=d, alpha=alpha, gamma=1.5, beta=beta, rho1=rho1, h0=h0,
                      constant=constant, G=lambda L: math.sqrt(brownian_g_squared(L)),
                      H=lambda L: brownian_h(L, d), eigenvalue=eig)


def brownian_plan(eps: float, beta: float = 0.1, rho1: float = 1.0, h0: float = 1.0) -> Plan:
    """Direct parameter choice for 1D Brownian motion.

    ``L = ceil(eps^{-2/3})``,
    ``M = max(ceil(x*), ceil(L^{8 beta + 3} eps^{-2}))`` with ``x*`` the
    product-logarithm threshold at ``alpha = 0``, and
    ``h = min(eps^{10/3}, 1/M, h0)``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    inp = brownian_inputs(eps, 1, alpha=1.0, beta=beta, rho1=rho1, h0=h0)
    L = truncation_level(eps, 0.5, 1)
    x_star = lambert_threshold(inp, L, alpha=0.0)
    m_lw, c1 = _ceil_float(x_star, inp.cap)
    if not c1:
        # the closed form is accurate to a few ulps of x*; settle the integer exactly
        cond = _exp_condition_alpha0(inp, L)
        while not cond(m_lw):
            m_lw += 1
        while m_lw > 1 and cond(m_lw - 1):
            m_lw -= 1
    m_poly, c2 = _ceil_float(L ** (8 * beta + 3) * eps**-2, inp.cap)
    M = max(m_lw, m_poly)
    h = min(eps ** (10.0 / 3.0), 1.0 / M, h0)
    flags = ["ceiling of eps^{10/3} read as the value eps^{10/3} itself (a ceiling would give 1)"]
    terms = {"L_raw": eps ** (-2.0 / 3.0), "x_star": x_star, "M_lambert": m_lw, "M_poly": m_poly,
             "h_eps": eps ** (10.0 / 3.0), "h_inv_M": 1.0 / M, "h0": h0}
    return Plan("brownian", eps, L, M, 0.0, h, -math.inf, math.log(h), False, bool(c1 or c2), terms, flags)


def _verify_brownian(plan: Plan, inp: PlanInputs) -> list[tuple[str, bool]]:
    t = plan.terms
    out = [("L >= eps^{-2/3}", plan.L >= t["L_raw"] * (1 - 1e-12)),
           ("L - 1 < eps^{-2/3}", plan.L - 1 < t["L_raw"] or plan.L == 1),
           ("h <= min(eps^{10/3}, 1/M, h0)", plan.h <= min(t["h_eps"], t["h_inv_M"], t["h0"]))]
    if not plan.capped:
        out += [("M >= M_lambert", plan.M >= t["M_lambert"]), ("M >= M_poly", plan.M >= t["M_poly"]),
                ("exponential condition at M (alpha = 0)", _exp_condition_alpha0(inp, plan.L)(plan.M))]
    return out
