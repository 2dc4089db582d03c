"""Horizon families ``u -> T_u`` and closed-form regime classification.

Every family is parametric, so the limits that pick an asymptotic branch
are decided by comparing exponents rather than by numerical extrapolation:

* ``gamma = lim T_u / u`` (short horizon when ``gamma < t*``),
* ``phi = lim T_u / u**(1/(2 alpha))``,
* ``Omega_inf = lim m^2(u,T_u) delta(u,T_u) / T_u``,
* ``omega = lim (T_u - t_u) / u**alpha`` (moderate when finite),
* ``vartheta = lim (T_u - t_u) / sqrt(u)``,
* ``lim log(T_u) / u**(1 - 2 alpha)`` for very long horizons.

Infinite limits are ``math.inf``.
"""

import math
from dataclasses import asdict, dataclass
from enum import Enum

from . import geometry as geo
from .errors import DomainError, NumericError, ParameterError, RegimeBoundaryError, T3ViolationError

INF = math.inf
_TOL = 1e-12


def _eq(a, b):
    return abs(a - b) <= _TOL * max(1.0, abs(a), abs(b))


def _cmp(a, b):
    """-1, 0 or 1 with a relative tolerance; infinities compare exactly."""
    if math.isinf(a) or math.isinf(b):
        return (a > b) - (a < b)
    if _eq(a, b):
        return 0
    return -1 if a < b else 1


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class FixedT:
    """Constant horizon ``T_u = T``."""

    T: float

    def __post_init__(self):
        if not float(self.T) > 0:
            raise ParameterError(f"FixedT needs T > 0, got {self.T}")
        object.__setattr__(self, "T", float(self.T))

    def value(self, spec, u):
        return self.T

    def to_dict(self):
        return {"kind": "fixed", "T": self.T}


@dataclass(frozen=True)
class PowerLaw:
    """``T_u = kappa * u**rho``."""

    kappa: float
    rho: float

    def __post_init__(self):
        k, r = float(self.kappa), float(self.rho)
        if not k > 0:
            raise ParameterError(f"PowerLaw needs kappa > 0, got {self.kappa}")
        if not (r >= 0 and math.isfinite(r)):
            raise ParameterError(f"PowerLaw needs rho >= 0, got {self.rho}")
        object.__setattr__(self, "kappa", k)
        object.__setattr__(self, "rho", r)

    def value(self, spec, u):
        return self.kappa * float(u) ** self.rho

    def to_dict(self):
        return {"kind": "power", "kappa": self.kappa, "rho": self.rho}


@dataclass(frozen=True)
class OffsetFromPeak:
    """``T_u = t_u + delta * u**beta`` around the most likely epoch."""

    delta: float
    beta: float

    def __post_init__(self):
        d, b = float(self.delta), float(self.beta)
        if not math.isfinite(d):
            raise ParameterError(f"OffsetFromPeak needs finite delta, got {self.delta}")
        if not (b >= 0 and math.isfinite(b)):
            raise ParameterError(f"OffsetFromPeak needs beta >= 0, got {self.beta}")
        if d < 0 and b >= 1:
            raise ParameterError("OffsetFromPeak with delta < 0 requires beta < 1")
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "beta", b)

    def value(self, spec, u):
        return geo.t_peak(spec, u) + self.delta * float(u) ** self.beta

    def to_dict(self):
        return {"kind": "offset", "delta": self.delta, "beta": self.beta}


@dataclass(frozen=True)
class ExpScale:
    """``T_u = exp(C * u**power)``; ``power`` defaults to ``1 - 2 alpha``."""

    C: float
    power: float = None

    def __post_init__(self):
        if not float(self.C) > 0:
            raise ParameterError(f"ExpScale needs C > 0, got {self.C}")
        object.__setattr__(self, "C", float(self.C))
        if self.power is not None:
            if not float(self.power) > 0:
                raise ParameterError(f"ExpScale power must be positive, got {self.power}")
            object.__setattr__(self, "power", float(self.power))

    def exponent(self, spec):
        if self.power is not None:
            return self.power
        a = spec.alpha
        if a >= 0.5:
            raise ParameterError("ExpScale without an explicit power needs alpha_inf < 1/2")
        return 1.0 - 2.0 * a

    def value(self, spec, u):
        try:
            return math.exp(self.C * float(u) ** self.exponent(spec))
        except OverflowError:
            raise NumericError(f"ExpScale horizon overflows at u={u}") from None

    def log_value(self, spec, u):
        return self.C * float(u) ** self.exponent(spec)

    def to_dict(self):
        d = {"kind": "exp", "C": self.C}
        if self.power is not None:
            d["power"] = self.power
        return d


def family_from_dict(block):
    if not isinstance(block, dict) or "kind" not in block:
        raise ParameterError(f"horizon block needs a 'kind': {block!r}")
    kind = block["kind"]
    table = {
        "fixed": (FixedT, ("T",), ()),
        "power": (PowerLaw, ("kappa", "rho"), ()),
        "offset": (OffsetFromPeak, ("delta", "beta"), ()),
        "exp": (ExpScale, ("C",), ("power",)),
    }
    if kind not in table:
        raise ParameterError(f"unknown horizon kind {kind!r}")
    cls, required, optional = table[kind]
    extra = set(block) - {"kind", *required, *optional}
    missing = [k for k in required if k not in block]
    if extra or missing:
        raise ParameterError(f"horizon {kind!r}: unknown {sorted(extra)}, missing {missing}")
    return cls(**{k: block[k] for k in (*required, *optional) if k in block})


def parse_horizon(text):
    """Parse CLI shorthand: ``fixed:T``, ``power:k,r``, ``offset:d,b``, ``exp:C[,p]``."""
    kind, _, rest = text.strip().partition(":")
    try:
        vals = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ParameterError(f"bad horizon shorthand {text!r}") from None
    shapes = {"fixed": (FixedT, 1, 1), "power": (PowerLaw, 2, 2), "offset": (OffsetFromPeak, 2, 2), "exp": (ExpScale, 1, 2)}
    if kind not in shapes:
        raise ParameterError(f"unknown horizon kind in {text!r}")
    cls, lo, hi = shapes[kind]
    if not lo <= len(vals) <= hi:
        raise ParameterError(f"horizon {kind!r} takes {lo}..{hi} numbers, got {text!r}")
    return cls(*vals)


def horizon_value(family, spec, u):
    """Concrete ``T_u``; raises if it is not positive."""
    T = family.value(spec, u)
    if not T > 0:
        raise DomainError(f"horizon is not positive at u={u}: T_u={T}")
    return T


# ----------------------------------------------------------- classification


class Scenario(str, Enum):
    FIXED = "FixedHorizon"
    SHORT_OMEGA_ZERO = "ShortOmegaZero"
    SHORT_OMEGA_FINITE = "ShortOmegaFinite"
    SHORT_OMEGA_INFINITE = "ShortOmegaInfinite"
    MODERATE = "ModerateFiniteOmega"
    LONG = "LongInfiniteOmega"

    @property
    def is_short(self):
        return self.name.startswith("SHORT")

    @property
    def is_t2(self):
        return self in (Scenario.MODERATE, Scenario.LONG)


@dataclass(frozen=True)
class RegimeClassification:
    """Limits of a horizon family and the asymptotic branch they select.

    Fields that do not apply to the scenario are ``None``.  ``x_branch``
    names the sub-case for the point probability and ``x_branch_sup`` for
    the supremum probability.
    """

    scenario: Scenario
    gamma: float = None
    phi: float = None
    omega_inf: float = None
    omega: float = None
    vartheta: float = None
    log_horizon_rate: float = None
    horizon_rate: float = None
    threshold_point: float = None
    threshold_sup: float = None
    x_branch: str = "empty"
    x_branch_sup: str = "empty"
    t3_satisfied: bool = True

    def to_dict(self):
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, Scenario):
                v = v.value
            elif isinstance(v, float) and math.isinf(v):
                v = "inf" if v > 0 else "-inf"
            out[k] = v
        return out


def t3_bound(spec):
    """Upper end of the admissible ``beta`` range in the growth condition."""
    ts = geo.t_star(spec)
    return (1.0 + spec.c * ts) ** 2 / (2.0 * spec.a_inf * ts ** (2.0 * spec.alpha))


def threshold_point(spec):
    """``sqrt(2A/B (1 - alpha) x)``, compared against ``vartheta``."""
    A, B = geo.ab_constants(spec)
    return math.sqrt(2.0 * A / B * (1.0 - spec.alpha) * spec.x)


def threshold_sup(spec):
    """``(1 + c t*) x / (A_inf t*^(2 alpha))``, compared against the log-horizon rate."""
    ts = geo.t_star(spec)
    return (1.0 + spec.c * ts) * spec.x / (spec.a_inf * ts ** (2.0 * spec.alpha))


def _omega_inf_short(spec, family, gamma, phi):
    """Limit of ``Omega(u, T_u)`` for a short-horizon power family."""
    if math.isinf(phi):
        return INF
    A0, a0, Ai, a = spec.model.params
    k, rho = family.kappa, family.rho
    g = 1.0 + spec.c * gamma
    if phi > 0:
        # delta(u, T_u) tends to sigma_inverse of a constant.
        v0 = math.sqrt(2.0) * Ai * phi ** (2 * a) / g
        exp_u = 1.0 - 1.0 / (2.0 * a)
        if _cmp(exp_u, 0.0) > 0:
            return INF
        return g * g * spec.model.sigma_inverse(v0) / (Ai * phi ** (2 * a + 1))
    # phi == 0: delta follows the origin power law.
    e = 2.0 - 2.0 * a * rho - rho + (2.0 * a * rho - 1.0) / a0
    s = _cmp(e, 0.0)
    if s < 0:
        return 0.0
    if s > 0:
        return INF
    base = 2.0 * Ai * Ai * k ** (4 * a) / (g * g * A0)
    return g * g / (Ai * k ** (2 * a) * k) * base ** (1.0 / (2.0 * a0))


def _short_branch(spec, phi):
    if phi == 0:
        return "phi-zero"
    if math.isinf(phi):
        return "phi-infinite"
    s = _cmp(spec.alpha, 0.5)
    if s > 0:
        return "phi-finite-alpha-gt-half"
    if s == 0:
        return "phi-finite-alpha-half"
    raise NumericError("phi finite with alpha < 1/2 is impossible for a short horizon")


def _three_way(value, threshold):
    return {-1: "below", 0: "equal", 1: "above"}[_cmp(value, threshold)]


def classify(spec, family, strict_t3=True):
    """Classify ``(spec, family)`` into exactly one scenario.

    Raises :class:`RegimeBoundaryError` on ``gamma = t*`` and on an offset
    family drifting below the peak faster than ``u**alpha``, and
    :class:`T3ViolationError` when an exponential horizon breaks the growth
    condition (unless ``strict_t3`` is false, in which case the flag is
    recorded instead).
    """
    a = spec.alpha
    ts = geo.t_star(spec)
    x = spec.x
    empty = x == 0

    if isinstance(family, FixedT) or (isinstance(family, PowerLaw) and family.rho == 0):
        br = "empty" if empty else "fixed"
        return RegimeClassification(Scenario.FIXED, x_branch=br, x_branch_sup=br)

    thr_p = threshold_point(spec) if a < 0.5 else None
    thr_s = threshold_sup(spec) if a < 0.5 else None

    if isinstance(family, PowerLaw):
        k, rho = family.kappa, family.rho
        if _cmp(rho, 1.0) < 0:
            gamma = 0.0
        elif _cmp(rho, 1.0) == 0:
            c = _cmp(k, ts)
            if c == 0:
                raise RegimeBoundaryError(
                    f"T_u = t* u (kappa = t* = {ts:.12g}) lies on the short/moderate boundary"
                )
            gamma = k if c < 0 else INF
        else:
            gamma = INF
        if math.isinf(gamma):
            return _t2(spec, Scenario.LONG, omega=INF, vartheta=INF, log_rate=0.0,
                       horizon_rate=(k if _cmp(rho, 1.0) == 0 else INF), thr_p=thr_p, thr_s=thr_s)
        crit = 1.0 / (2.0 * a)
        s = _cmp(rho, crit)
        phi = 0.0 if s < 0 else (k if s == 0 else INF)
        om = _omega_inf_short(spec, family, gamma, phi)
        if om == 0:
            scen = Scenario.SHORT_OMEGA_ZERO
        elif math.isinf(om):
            scen = Scenario.SHORT_OMEGA_INFINITE
        else:
            scen = Scenario.SHORT_OMEGA_FINITE
        br = "empty" if empty else _short_branch(spec, phi)
        return RegimeClassification(
            scen, gamma=gamma, phi=phi, omega_inf=om, horizon_rate=gamma,
            x_branch=br, x_branch_sup=br,
        )

    if isinstance(family, OffsetFromPeak):
        d, b = family.delta, family.beta
        sb = _cmp(b, a)
        if d == 0 or sb < 0:
            omega = 0.0
        elif sb == 0:
            omega = d
        elif d > 0:
            omega = INF
        else:
            raise RegimeBoundaryError(
                "offset below the peak growing faster than u**alpha gives omega = -inf "
                "with T_u/u -> t*, which no regime covers"
            )
        if d == 0 or _cmp(b, 0.5) < 0:
            vartheta = 0.0
        elif _cmp(b, 0.5) == 0:
            vartheta = d
        else:
            vartheta = INF if d > 0 else -INF
        sb1 = _cmp(b, 1.0)
        rate = ts if (d == 0 or sb1 < 0) else (ts + d if sb1 == 0 else INF)
        scen = Scenario.MODERATE if math.isfinite(omega) else Scenario.LONG
        return _t2(spec, scen, omega=omega, vartheta=vartheta, log_rate=0.0,
                   horizon_rate=rate, thr_p=thr_p, thr_s=thr_s)

    if isinstance(family, ExpScale):
        p = family.exponent(spec)
        bmax = t3_bound(spec)
        sp = _cmp(p, 2.0 * (1.0 - a))
        t3 = sp < 0 or (sp == 0 and _cmp(family.C, bmax) < 0)
        if not t3 and strict_t3:
            raise T3ViolationError(
                f"log T_u = {family.C:g} u^{p:g} is not o(beta u^{2 * (1 - a):g}) for any "
                f"beta < {bmax:.12g}"
            )
        log_rate = None
        if a < 0.5:
            sq = _cmp(p, 1.0 - 2.0 * a)
            log_rate = 0.0 if sq < 0 else (family.C if sq == 0 else INF)
        return _t2(spec, Scenario.LONG, omega=INF, vartheta=INF, log_rate=log_rate,
                   horizon_rate=INF, thr_p=thr_p, thr_s=thr_s, t3=t3)

    raise ParameterError(f"unsupported horizon family {family!r}")


def _t2(spec, scen, omega, vartheta, log_rate, horizon_rate, thr_p, thr_s, t3=True):
    a = spec.alpha
    if a >= 0.5:
        vartheta = None
        log_rate = None
    if spec.x == 0:
        bp = bs = "empty"
    elif a < 0.5:
        bp = _three_way(vartheta, thr_p)
        bs = _three_way(log_rate, thr_s)
    else:
        bp = bs = "alpha-ge-half"
    return RegimeClassification(
        scen, omega=omega, vartheta=vartheta, log_horizon_rate=log_rate,
        horizon_rate=horizon_rate, threshold_point=thr_p, threshold_sup=thr_s,
        x_branch=bp, x_branch_sup=bs, t3_satisfied=t3,
    )


def limit_diagnostics(spec, family, u):
    """Finite-``u`` versions of the limits, for checking :func:`classify`."""
    a = spec.alpha
    if isinstance(family, ExpScale):
        lt = family.log_value(spec, u)
        out = {"log_T_u": lt, "log_horizon_rate": lt / u ** (1.0 - 2.0 * a)}
        if lt < 700:
            out["omega"] = (math.exp(lt) - geo.t_peak(spec, u)) / u ** a
        else:
            out["omega"] = INF
        return out
    T = horizon_value(family, spec, u)
    tu = geo.t_peak(spec, u)
    return {
        "T_u": T,
        "gamma": T / u,
        "phi": T / u ** (1.0 / (2.0 * a)),
        "omega_ratio": geo.omega_ratio(spec, u, T),
        "omega": (T - tu) / u ** a,
        "vartheta": (T - tu) / math.sqrt(u),
    }
