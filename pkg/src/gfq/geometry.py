"""Deterministic queue geometry.

Everything here is a pure function of a :class:`QueueSpec`.  The
standardised boundary ``m(u, t) = (u + c t) / sigma(t)`` drives the
asymptotics; its minimiser ``t_u`` is the most likely overload epoch and
``t_u / u`` tends to ``t*``.  Probability-scale results are returned as
natural logarithms because ``m`` reaches the hundreds in typical studies.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erfcx, log_ndtr, ndtr

from .errors import DomainError, NumericError, ParameterError
from .variance_models import FractionalBrownian

_LN_HALF = math.log(0.5)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class QueueSpec:
    """A fluid queue drained at rate ``c`` with initial backlog ``x``."""

    c: float
    x: float
    model: object

    def __post_init__(self):
        c, x = float(self.c), float(self.x)
        if not (c > 0 and math.isfinite(c)):
            raise ParameterError(f"drain rate c must be positive, got {self.c}")
        if not (x >= 0 and math.isfinite(x)):
            raise ParameterError(f"backlog x must be nonnegative, got {self.x}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x", x)

    @property
    def alpha(self):
        """Tail index ``alpha_inf``."""
        return self.model.params[3]

    @property
    def a_inf(self):
        return self.model.params[2]

    @property
    def is_fbm(self):
        return isinstance(self.model, FractionalBrownian)

    def with_backlog(self, x):
        return QueueSpec(self.c, x, self.model)

    def to_dict(self):
        return {"c": self.c, "x": self.x, "model": self.model.to_dict()}


@dataclass(frozen=True)
class GeometryReport:
    u: float
    t_star: float
    t_u: float
    m_at_peak: float
    delta_at_peak: float
    A: float
    B: float


def m(spec, u, t):
    """Standardised boundary ``(u + c t) / sigma(t)``."""
    t = float(t)
    if not t > 0:
        raise DomainError(f"m(u, t) needs t > 0, got {t}")
    return (float(u) + spec.c * t) / math.sqrt(spec.model.sigma2(t))


def log_m(spec, u, t):
    return math.log(float(u) + spec.c * t) - 0.5 * math.log(spec.model.sigma2(t))


def t_star(spec):
    """Limit of ``t_u / u``: ``alpha / (c (1 - alpha))``."""
    a = spec.alpha
    return a / (spec.c * (1.0 - a))


def t_peak(spec, u):
    """Minimiser ``t_u`` of ``m(u, .)``.

    Closed form ``t* u`` for fBm.  Otherwise a bounded minimisation of
    ``log m`` over ``log t`` in ``[t* u / 10, 10 t* u]``; a minimiser on the
    bracket edge means the model misbehaves in range and raises.
    """
    u = float(u)
    if not u > 0:
        raise DomainError(f"t_peak needs u > 0, got {u}")
    ts = t_star(spec)
    if spec.is_fbm:
        return ts * u
    lo, hi = math.log(ts * u / 10.0), math.log(10.0 * ts * u)
    res = minimize_scalar(
        lambda lt: log_m(spec, u, math.exp(lt)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-11, "maxiter": 500},
    )
    if not res.success:
        raise NumericError(f"t_peak minimisation failed at u={u}: {res.message}")
    edge = 1e-6 * (hi - lo)
    if res.x - lo < edge or hi - res.x < edge:
        raise NumericError(
            f"minimiser of m(u, .) hit the bracket [{math.exp(lo):.6g}, {math.exp(hi):.6g}] at u={u}"
        )
    return math.exp(res.x)


def delta(spec, u, s):
    """Local time scale ``sigma_inverse(sqrt(2) sigma^2(s) / (u + c s))``."""
    s = float(s)
    if not (u > 0 and s > 0):
        raise DomainError(f"delta needs u, s > 0, got u={u}, s={s}")
    v = _SQRT2 * spec.model.sigma2(s) / (u + spec.c * s)
    return spec.model.sigma_inverse(v)


def omega_ratio(spec, u, T):
    """``m(u, T)^2 * delta(u, T) / T``."""
    return m(spec, u, T) ** 2 * delta(spec, u, T) / float(T)


def ab_constants(spec):
    """The constants ``(A, B)`` of the quadratic expansion at the peak."""
    a = spec.alpha
    ts = t_star(spec)
    return ts ** (-a) / (1.0 - a), ts ** (-a - 2.0) * a


def gauss_tail_log(z):
    """``log Psi(z)`` where ``Psi`` is the standard normal tail.

    Uses the scaled complementary error function for positive ``z`` so the
    result stays accurate far into the tail.
    """
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        pos = np.log(0.5 * erfcx(np.maximum(z, 0.0) / _SQRT2)) - 0.5 * np.maximum(z, 0.0) ** 2
        out = np.where(z > 0, pos, log_ndtr(-z))
    return float(out) if out.ndim == 0 else out


def gauss_cdf(z):
    out = ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def gauss_cdf_log(z):
    out = log_ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _richardson(diff, h):
    return (4.0 * diff(h / 2.0) - diff(h)) / 3.0


def local_slope_a(spec, u, T, rel_step=1e-4):
    """First-order coefficient ``a_u`` of ``1 - m(u,T)/m(u,T t)`` at ``t = 1``.

    Central differences with one Richardson pass.
    """
    mT = m(spec, u, T)

    def ratio(t):
        return mT / m(spec, u, T * t)

    def diff(h):
        return (ratio(1.0 + h) - ratio(1.0 - h)) / (2.0 * h)

    return _richardson(diff, rel_step)


def local_curvature_b(spec, u, rel_step=1e-4):
    """Second-order coefficient ``b_u`` of ``1 - m(u,t_u)/m(u,u t)`` at ``t_u/u``."""
    tu = t_peak(spec, u)
    tau0 = tu / u
    m0 = m(spec, u, tu)

    def g(tau):
        return m0 / m(spec, u, u * tau)

    def diff(h):
        return -(g(tau0 + h) - 2.0 * g(tau0) + g(tau0 - h)) / (2.0 * h * h)

    return _richardson(diff, rel_step * tau0)


def geometry_report(spec, u):
    tu = t_peak(spec, u)
    A, B = ab_constants(spec)
    return GeometryReport(
        u=float(u),
        t_star=t_star(spec),
        t_u=tu,
        m_at_peak=m(spec, u, tu),
        delta_at_peak=delta(spec, u, tu),
        A=A,
        B=B,
    )
