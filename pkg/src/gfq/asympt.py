"""Log-space evaluation of the exact asymptotics of overflow probabilities.

Each evaluator returns an :class:`AsymptoticEstimate` whose ``log_value``
approximates ``log P(Q(T_u) > u)`` (point target) or
``log P(max_{t <= T_u} Q(t) > u)`` (sup target) for large ``u``.  The
dispatcher :func:`approx_dispatch` classifies the horizon family and calls
exactly one evaluator.

Formula identifiers name the horizon scale, the initial state and the
branch, e.g. ``"short-empty-point:omega-finite"`` or
``"moderate-backlog-sup:below"``.  Branches whose asymptotics equal another
quantity (for instance a backlog that becomes irrelevant) delegate to the
corresponding evaluator and keep its numbers.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import erfcx, ndtr

from . import constants as K
from . import geometry as geo
from .errors import DomainError, UnsupportedBranchError
from .regimes import ExpScale, FixedT, OffsetFromPeak, Scenario, classify, horizon_value

_LOG_PI = math.log(math.pi)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class AsymptoticEstimate:
    """``log_value`` is ``None`` only when ``delegate_to_mc`` is set."""

    log_value: float
    formula_id: str
    regime: object
    target: str = "point"
    u: float = None
    T_u: float = None
    constants_used: tuple = ()
    sum_decomposition: tuple = None
    delegate_to_mc: bool = False
    notes: tuple = field(default=())

    @property
    def value(self):
        return None if self.log_value is None else math.exp(self.log_value)

    def to_dict(self):
        out = {
            "log_value": self.log_value,
            "value": self.value,
            "formula_id": self.formula_id,
            "target": self.target,
            "u": self.u,
            "T_u": self.T_u,
            "regime": self.regime.to_dict() if self.regime is not None else None,
            "constants_used": [
                {"name": n, "value": v, "source": s if isinstance(s, str) else s.to_dict()}
                for n, v, s in self.constants_used
            ],
        }
        if self.sum_decomposition is not None:
            out["sum_decomposition"] = list(self.sum_decomposition)
        if self.delegate_to_mc:
            out["delegate_to_mc"] = True
        return out


# --------------------------------------------------------------- integrals


def d_integral(z0):
    """``D(z0) = int_{-inf}^{z0} int_0^inf exp(-(v - z)^2) dv dz``.

    The inner integral is ``sqrt(pi) Phi(sqrt(2) z)``; the outer one is done
    by adaptive quadrature.
    """
    return math.exp(log_d_integral(z0))


def log_d_integral(z0):
    z0 = float(z0)
    if z0 == -math.inf:
        return -math.inf
    if z0 < -4.0:
        # Far tail: sqrt(pi/2) * phi(y) * (1 - |y| R(|y|)) with the Mills ratio R.
        y = -_SQRT2 * z0
        mills = erfcx(y / _SQRT2) * math.sqrt(math.pi / 2.0)
        rest = 1.0 - y * mills
        return 0.5 * math.log(math.pi / 2.0) - 0.5 * y * y - 0.5 * math.log(2 * math.pi) + math.log(rest)
    f = lambda z: ndtr(_SQRT2 * z)  # noqa: E731
    opts = {"epsabs": 1e-13, "epsrel": 1e-13, "limit": 200}
    if z0 <= 0:
        val = quad(f, -math.inf, z0, **opts)[0]
    else:
        val = quad(f, -math.inf, 0.0, **opts)[0] + quad(f, 0.0, z0, **opts)[0]
    return 0.5 * _LOG_PI + math.log(val)


# ----------------------------------------------------------------- helpers


class _Constants:
    def __init__(self, cache):
        self.cache = cache if cache is not None else K.ConstantsCache()
        self.used = []

    def log(self, name, kind, proc, d=None, a=None):
        value, source = self.cache.resolve(K.ConstantQuery(kind, proc, d, a))
        self.used.append((name, value, source))
        return math.log(value)


def _backlog_tail_log(spec, u, T):
    """``log Psi((u - x + c T) / sigma(T))``."""
    return geo.gauss_tail_log((u - spec.x + spec.c * T) / math.sqrt(spec.model.sigma2(T)))


def _estimate(log_value, fid, reg, target, u, T, consts, sum_decomp=None):
    return AsymptoticEstimate(
        log_value=float(log_value),
        formula_id=fid,
        regime=reg,
        target=target,
        u=float(u),
        T_u=None if T is None else float(T),
        constants_used=tuple(consts.used) if consts is not None else (),
        sum_decomposition=sum_decomp,
    )


def _require(reg, test, what):
    if not test:
        raise UnsupportedBranchError(f"{what} does not apply to scenario {reg.scenario.value}")


def _level(u, level):
    L = float(u) if level is None else float(level)
    if not L > 0:
        raise DomainError(f"level must be positive, got {L}")
    return L


# -------------------------------------------------------------- fixed horizon


def approx_fixed_T(spec, T, u, target="point"):
    """Fixed horizon with a nonempty start.

    The point probability behaves like ``Psi((u - x + c T) / sigma(T))``.
    The sup probability reduces to a fixed-horizon empty-queue crossing whose
    asymptotics are not implemented, so a marker asking for Monte Carlo is
    returned instead.
    """
    if spec.x == 0:
        raise UnsupportedBranchError("the fixed-horizon formula needs a positive backlog x")
    reg = classify(spec, FixedT(T))
    if target == "sup":
        return AsymptoticEstimate(None, "fixed-horizon-sup:delegate-to-mc", reg, "sup", float(u),
                                  float(T), delegate_to_mc=True)
    return _estimate(_backlog_tail_log(spec, u, T), "fixed-horizon-point", reg, "point", u, T, None)


# ------------------------------------------------------------- short horizon


def _short_empty(spec, family, u, cache, sup, level=None, reg=None):
    reg = reg or classify(spec, family)
    _require(reg, reg.scenario.is_short, "the short-horizon formula")
    T = horizon_value(family, spec, u)
    L = _level(u, level)
    lpsi = geo.gauss_tail_log(geo.m(spec, L, T))
    power = 2 if sup else 1
    kind = "sup" if sup else "point"
    consts = _Constants(cache)
    gamma = reg.gamma
    slope = spec.alpha - spec.c * gamma / (1.0 + spec.c * gamma)
    if reg.scenario == Scenario.SHORT_OMEGA_ZERO:
        proc = K.LimitProcessSpec(K.standard_fbm(spec.model.params[1]))
        lh = consts.log("pickands", "pickands", proc)
        lom = math.log(geo.omega_ratio(spec, L, T))
        val = power * (lh - math.log(slope) - lom) + lpsi
        fid = "omega-zero"
    elif reg.scenario == Scenario.SHORT_OMEGA_FINITE:
        proc = K.limiting_process(spec, reg)
        lp = consts.log("piterbarg", "piterbarg", proc, d=proc.drift)
        val = power * lp + lpsi
        fid = "omega-finite"
    else:
        val = lpsi
        fid = "omega-infinite"
    return _estimate(val, f"short-empty-{kind}:{fid}", reg, kind, u, T, consts)


def approx_short_empty(spec, family, u, cache=None, level=None):
    """Empty-queue point probability for a short horizon (``gamma < t*``).

    ``level`` evaluates the same display at another level (``u - x``) while
    keeping the horizon ``T_u``.
    """
    return _short_empty(spec, family, u, cache, sup=False, level=level)


def approx_short_empty_sup(spec, family, u, cache=None):
    """Empty-queue sup probability for a short horizon: squared prefactors."""
    return _short_empty(spec, family, u, cache, sup=True)


def approx_short_x(spec, family, u, cache=None):
    """Point probability for a short horizon started from backlog ``x > 0``."""
    if spec.x == 0:
        raise UnsupportedBranchError("use approx_short_empty for an empty start")
    reg = classify(spec, family)
    _require(reg, reg.scenario.is_short, "the short-horizon formula")
    br = reg.x_branch
    if br == "phi-infinite":
        est = approx_short_empty(spec, family, u, cache)
        return _relabel(est, "short-backlog-point:phi-infinite", reg)
    T = horizon_value(family, spec, u)
    if br in ("phi-zero", "phi-finite-alpha-gt-half"):
        return _estimate(_backlog_tail_log(spec, u, T), f"short-backlog-point:{br}", reg, "point", u, T, None)
    consts = _Constants(cache)
    proc, level = K.backlog_process(spec, reg.phi)
    lp = consts.log("piterbarg_a", "piterbarg_a", proc, d=proc.drift, a=level)
    val = lp + geo.gauss_tail_log(geo.m(spec, u, T))
    return _estimate(val, f"short-backlog-point:{br}", reg, "point", u, T, consts)


def approx_short_x_sup(spec, family, u, cache=None):
    """Sup probability for a short horizon started from backlog ``x > 0``."""
    if spec.x == 0:
        raise UnsupportedBranchError("use approx_short_empty_sup for an empty start")
    reg = classify(spec, family)
    _require(reg, reg.scenario.is_short, "the short-horizon formula")
    br = reg.x_branch_sup
    if br == "phi-infinite":
        return _relabel(approx_short_empty_sup(spec, family, u, cache), "short-backlog-sup:phi-infinite", reg)
    if br in ("phi-zero", "phi-finite-alpha-gt-half"):
        est = _short_empty(spec, family, u, cache, sup=False, level=u - spec.x, reg=reg)
        return _relabel(est, f"short-backlog-sup:{br}", reg, target="sup")
    T = horizon_value(family, spec, u)
    consts = _Constants(cache)
    proc, level = K.backlog_process(spec, reg.phi)
    lp = consts.log("piterbarg_tilde", "piterbarg_tilde", proc, d=proc.drift, a=level)
    val = lp + geo.gauss_tail_log(geo.m(spec, u, T))
    return _estimate(val, f"short-backlog-sup:{br}", reg, "sup", u, T, consts)


def _relabel(est, fid, reg, target=None):
    return AsymptoticEstimate(est.log_value, fid, reg, target or est.target, est.u, est.T_u,
                              est.constants_used, est.sum_decomposition)


# ---------------------------------------------------- moderate / long horizon


def _eta_log(spec, reg, consts):
    proc = K.limiting_process(spec, reg)
    return consts.log("pickands", "pickands", proc)


def _peak_terms(spec, L):
    tL = geo.t_peak(spec, L)
    mL = geo.m(spec, L, tL)
    return tL, mL, geo.delta(spec, L, tL)


def omega_argument(spec, omega):
    """``sqrt(B/(A A_inf)) (1 + c t*) omega / t*^alpha``."""
    if math.isinf(omega):
        return omega
    A, B = geo.ab_constants(spec)
    ts = geo.t_star(spec)
    return math.sqrt(B / (A * spec.a_inf)) * (1 + spec.c * ts) * omega / ts**spec.alpha


def approx_moderate_empty(spec, family, u, cache=None, level=None, reg=None):
    """Empty-queue point probability when ``T_u`` is near or beyond ``t_u``.

    With ``level`` the display is evaluated at that level (its own peak)
    while the limit ``omega`` of the family is kept.
    """
    reg = reg or classify(spec, family, strict_t3=False)
    _require(reg, reg.scenario.is_t2, "the moderate/long-horizon formula")
    L = _level(u, level)
    consts = _Constants(cache)
    lh = _eta_log(spec, reg, consts)
    A, B = geo.ab_constants(spec)
    tL, mL, dL = _peak_terms(spec, L)
    z = omega_argument(spec, reg.omega)
    lphi = 0.0 if z == math.inf else geo.gauss_cdf_log(z)
    val = (lh + 0.5 * math.log(2 * A * math.pi / B) + math.log(L) - math.log(mL) - math.log(dL)
           + lphi + geo.gauss_tail_log(mL))
    T = None
    try:
        T = horizon_value(family, spec, u)
    except Exception:  # noqa: BLE001 - huge exponential horizons are reported without T
        pass
    return _estimate(val, "moderate-empty-point", reg, "point", u, T, consts)


def approx_moderate_empty_sup(spec, family, u, cache=None, branch=None, reg=None):
    """Empty-queue sup probability under the moderate/long growth conditions.

    ``branch`` forces ``"omega-finite"`` or ``"omega-infinite"``; by default
    it follows the family's ``omega``.
    """
    reg = reg or classify(spec, family, strict_t3=True)
    _require(reg, reg.scenario.is_t2, "the moderate/long-horizon formula")
    branch = branch or ("omega-finite" if math.isfinite(reg.omega) else "omega-infinite")
    consts = _Constants(cache)
    lh = _eta_log(spec, reg, consts)
    A, B = geo.ab_constants(spec)
    tu, mu, du = _peak_terms(spec, u)
    lpsi = geo.gauss_tail_log(mu)
    T = None
    if branch == "omega-finite":
        z0 = omega_argument(spec, reg.omega) / _SQRT2
        if not math.isfinite(z0):
            raise UnsupportedBranchError("the finite-omega branch needs a finite omega")
        val = (2 * lh + math.log(2 * A / B) + 2 * (math.log(u) - math.log(mu) - math.log(du))
               + log_d_integral(z0) + lpsi)
        T = horizon_value(family, spec, u)
    elif branch == "omega-infinite":
        lgap = _log_gap(spec, family, u, tu)
        val = (2 * lh + 0.5 * math.log(2 * A * math.pi / B) + lgap + math.log(u) - math.log(mu)
               - 2 * math.log(du) + lpsi)
        if not isinstance(family, ExpScale):
            T = horizon_value(family, spec, u)
    else:
        raise UnsupportedBranchError(f"unknown branch {branch!r}")
    return _estimate(val, f"moderate-empty-sup:{branch}", reg, "sup", u, T, consts)


def _log_gap(spec, family, u, tu):
    """``log(T_u - t_u)``, stable for exponential horizons."""
    if isinstance(family, ExpScale):
        lt = family.log_value(spec, u)
        if lt > 700:
            return lt + math.log1p(-math.exp(math.log(tu) - lt))
    gap = horizon_value(family, spec, u) - tu
    if not gap > 0:
        raise DomainError(f"the long-horizon branch needs T_u > t_u, got T_u - t_u = {gap}")
    return math.log(gap)


def approx_moderate_x(spec, family, u, cache=None):
    """Point probability from backlog ``x > 0`` under the moderate/long conditions."""
    if spec.x == 0:
        raise UnsupportedBranchError("use approx_moderate_empty for an empty start")
    reg = classify(spec, family, strict_t3=False)
    _require(reg, reg.scenario.is_t2, "the moderate/long-horizon formula")
    br = reg.x_branch
    fid = f"moderate-backlog-point:{br}"
    if br in ("above", "alpha-ge-half"):
        return _relabel(approx_moderate_empty(spec, family, u, cache, reg=reg), fid, reg)
    T = horizon_value(family, spec, u)
    tail = _backlog_tail_log(spec, u, T)
    if br == "below":
        return _estimate(tail, fid, reg, "point", u, T, None)
    empty = approx_moderate_empty(spec, family, u, cache, reg=reg)
    total = float(np.logaddexp(tail, empty.log_value))
    return AsymptoticEstimate(total, fid, reg, "point", float(u), T, empty.constants_used,
                              (tail, empty.log_value))


def approx_moderate_x_sup(spec, family, u, cache=None):
    """Sup probability from backlog ``x > 0`` under the moderate/long conditions."""
    if spec.x == 0:
        raise UnsupportedBranchError("use approx_moderate_empty_sup for an empty start")
    reg = classify(spec, family, strict_t3=True)
    _require(reg, reg.scenario.is_t2, "the moderate/long-horizon formula")
    br = reg.x_branch_sup
    fid = f"moderate-backlog-sup:{br}"
    if br in ("above", "alpha-ge-half"):
        return _relabel(approx_moderate_empty_sup(spec, family, u, cache, reg=reg), fid, reg)
    shifted = approx_moderate_empty(spec, family, u, cache, level=u - spec.x, reg=reg)
    if br == "below":
        return _relabel(shifted, fid, reg, target="sup")
    sup = approx_moderate_empty_sup(spec, family, u, cache, reg=reg)
    total = float(np.logaddexp(shifted.log_value, sup.log_value))
    return AsymptoticEstimate(total, fid, reg, "sup", float(u), sup.T_u,
                              shifted.constants_used + sup.constants_used,
                              (shifted.log_value, sup.log_value))


# ---------------------------------------------------------------- dispatch


def approx_dispatch(spec, family, u, target="point", cache=None):
    """Classify, then evaluate the one formula that applies."""
    if target not in ("point", "sup"):
        raise DomainError(f"target must be 'point' or 'sup', got {target!r}")
    reg = classify(spec, family, strict_t3=(target == "sup"))
    sc = reg.scenario
    if sc == Scenario.FIXED:
        return approx_fixed_T(spec, horizon_value(family, spec, u), u, target)
    if sc.is_short:
        if spec.x == 0:
            fn = approx_short_empty if target == "point" else approx_short_empty_sup
        else:
            fn = approx_short_x if target == "point" else approx_short_x_sup
    elif spec.x == 0:
        fn = approx_moderate_empty if target == "point" else approx_moderate_empty_sup
    else:
        fn = approx_moderate_x if target == "point" else approx_moderate_x_sup
    return fn(spec, family, u, cache)


# ----------------------------------------------------- peak shift and limits


def shift_exponent(spec, u, x):
    """``(m^2(u, t_u) - m^2(u - x, t_{u-x})) / 2``, the log-ratio driver of a level shift."""
    u, x = float(u), float(x)
    if not (u > x >= 0):
        raise DomainError(f"need u > x >= 0, got u={u}, x={x}")
    if x == 0:
        return 0.0

    def m2(level):
        t = geo.t_peak(spec, level)
        return (level + spec.c * t) ** 2 / spec.model.sigma2(t)

    return 0.5 * (m2(u) - m2(u - x))


def shift_exponent_limit(spec, u, x):
    """Large-``u`` form ``x (1 + c t*) u^(1 - 2 alpha) / (A_inf t*^(2 alpha))``."""
    ts = geo.t_star(spec)
    a = spec.alpha
    return x * (1 + spec.c * ts) * u ** (1 - 2 * a) / (spec.a_inf * ts ** (2 * a))


# --------------------------------------------------------- stationarity


def stationary_reference_log(spec, u):
    """``log P(Q* > u)`` for the stationary queue; closed form for Brownian input only."""
    m = spec.model
    if spec.is_fbm and m.hurst == 0.5:
        return -2.0 * spec.c * u / m.scale
    raise UnsupportedBranchError("the stationary overflow probability is closed-form only for Brownian input")


def stationary_sup_reference_log(spec, u, T, cache=None):
    """Log asymptotics of ``P(max_{t <= T} Q*(t) > u)`` for the stationary queue.

    Same display as the long-horizon empty-queue sup formula with the full
    length ``T`` in place of ``T - t_u``.
    """
    reg = classify(spec, OffsetFromPeak(1.0, 1.0), strict_t3=False)
    consts = _Constants(cache)
    lh = _eta_log(spec, reg, consts)
    A, B = geo.ab_constants(spec)
    tu, mu, du = _peak_terms(spec, u)
    return (2 * lh + 0.5 * math.log(2 * A * math.pi / B) + math.log(T) + math.log(u)
            - math.log(mu) - 2 * math.log(du) + geo.gauss_tail_log(mu))


def stationary_ratio(spec, family):
    """Predicted transient-to-stationary comparison for both targets.

    Each entry has ``relation`` (``"asymptotic"`` with a numeric ``factor``,
    ``"transient-dominates"`` when the stationary probability is of smaller
    order, or ``"n/a"``) plus flags.
    """
    reg = classify(spec, family, strict_t3=False)
    out = {"point": {"relation": "n/a", "factor": None, "flags": []},
           "sup": {"relation": "n/a", "factor": None, "flags": []}}
    if not reg.scenario.is_t2:
        return out
    low_alpha = spec.alpha < 0.5
    phi_factor = float(ndtr(omega_argument(spec, reg.omega))) if math.isfinite(reg.omega) else 1.0
    if spec.x == 0 or not low_alpha:
        out["point"].update(relation="asymptotic", factor=phi_factor)
    elif reg.x_branch == "below":
        out["point"].update(relation="transient-dominates")
    elif reg.x_branch == "above":
        out["point"].update(relation="asymptotic", factor=1.0)
    if spec.x == 0 or not low_alpha:
        g = reg.horizon_rate
        ts = geo.t_star(spec)
        if g is not None:
            if math.isinf(g):
                fac = 1.0
            else:
                fac = max(g - ts, 0.0) / g
            out["sup"].update(relation="asymptotic", factor=fac)
            if fac == 0.0:
                out["sup"]["flags"].append("degenerate-prefactor")
    elif reg.x_branch_sup == "below":
        out["sup"].update(relation="transient-dominates")
    elif reg.x_branch_sup == "above":
        out["sup"].update(relation="asymptotic", factor=1.0)
    return out
