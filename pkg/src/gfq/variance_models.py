"""Variance functions of stationary-increment Gaussian inputs.

Two kinds are supported.  :class:`FractionalBrownian` has
``sigma2(t) = scale * t**(2H)`` and every derived quantity in closed form.
:class:`NumericTable` interpolates a user table of ``(t, sigma2(t))``
knots monotonically in log-log space and extrapolates with declared
power laws near the origin and at infinity.

Models are immutable and safe to share across threads.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, NumericError, ParameterError


def _check_t(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"time must be nonnegative, got {t!r}")
    return arr


def _scalar_or_array(arr):
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class FractionalBrownian:
    """Fractional Brownian input with ``sigma2(t) = scale * t**(2*hurst)``."""

    hurst: float
    scale: float = 1.0

    def __post_init__(self):
        h, s = float(self.hurst), float(self.scale)
        if not (0.0 < h < 1.0):
            raise ParameterError(f"hurst must lie in (0, 1), got {self.hurst}")
        if not (s > 0.0 and math.isfinite(s)):
            raise ParameterError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "hurst", h)
        object.__setattr__(self, "scale", s)

    kind = "fbm"

    @property
    def params(self):
        """``(A0, alpha0, A_inf, alpha_inf)``."""
        return (self.scale, self.hurst, self.scale, self.hurst)

    def sigma2(self, t):
        arr = _check_t(t)
        return _scalar_or_array(self.scale * arr ** (2.0 * self.hurst))

    def sigma_inverse(self, v):
        v = float(v)
        if not v > 0.0:
            raise DomainError(f"sigma_inverse needs v > 0, got {v}")
        return (v * v / self.scale) ** (1.0 / (2.0 * self.hurst))

    def to_dict(self):
        return {"kind": "fbm", "hurst": self.hurst, "scale": self.scale}


@dataclass(frozen=True)
class NumericTable:
    """Tabulated variance with power-law extrapolation.

    ``knots`` is a sequence of ``(t, sigma2)`` pairs with ``t > 0`` and both
    coordinates strictly increasing.  Between knots the log-variance is a
    monotone PCHIP interpolant in ``log t``.  Below the first knot the model
    continues as ``sigma2(t1) * (t/t1)**(2*alpha0)`` and above the last as
    ``sigma2(tn) * (t/tn)**(2*alpha_inf)``.  The declared constants ``A0``
    and ``A_inf`` must reproduce the end knots within ``tolerance``
    (relative).
    """

    knots: tuple
    origin: tuple
    tail: tuple
    tolerance: float = 0.05
    _interp: object = field(default=None, repr=False, compare=False)

    kind = "table"

    def __post_init__(self):
        try:
            pts = np.array([(float(a), float(b)) for a, b in self.knots], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"knots must be (t, sigma2) pairs: {exc}") from None
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ParameterError("a table needs at least two knots")
        t, s2 = pts[:, 0], pts[:, 1]
        if np.any(t <= 0) or np.any(s2 <= 0):
            raise ParameterError("knot times and variances must be positive")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(s2) <= 0):
            raise ParameterError("knots must be strictly increasing in t and sigma2")
        a0_scale, a0 = (float(v) for v in self.origin)
        ai_scale, ai = (float(v) for v in self.tail)
        if not (0.0 < a0 <= 1.0):
            raise ParameterError(f"alpha0 must lie in (0, 1], got {a0}")
        if not (0.0 < ai < 1.0):
            raise ParameterError(f"alpha_inf must lie in (0, 1), got {ai}")
        if a0_scale <= 0 or ai_scale <= 0:
            raise ParameterError("power-law constants must be positive")
        tol = float(self.tolerance)
        lo = s2[0] / (a0_scale * t[0] ** (2 * a0))
        hi = s2[-1] / (ai_scale * t[-1] ** (2 * ai))
        if abs(lo - 1.0) > tol or abs(hi - 1.0) > tol:
            raise ParameterError(
                "table endpoints disagree with the declared power laws: "
                f"first-knot ratio {lo:.6g}, last-knot ratio {hi:.6g}, tolerance {tol}"
            )
        object.__setattr__(self, "knots", tuple((float(a), float(b)) for a, b in pts))
        object.__setattr__(self, "origin", (a0_scale, a0))
        object.__setattr__(self, "tail", (ai_scale, ai))
        object.__setattr__(self, "tolerance", tol)
        object.__setattr__(self, "_interp", PchipInterpolator(np.log(t), np.log(s2)))

    @property
    def params(self):
        return (self.origin[0], self.origin[1], self.tail[0], self.tail[1])

    @property
    def _ends(self):
        return self.knots[0], self.knots[-1]

    def _log_sigma2(self, logt):
        (t1, v1), (tn, vn) = self._ends
        lt1, ltn = math.log(t1), math.log(tn)
        out = np.empty_like(logt)
        low = logt < lt1
        high = logt > ltn
        mid = ~(low | high)
        out[low] = math.log(v1) + 2 * self.origin[1] * (logt[low] - lt1)
        out[high] = math.log(vn) + 2 * self.tail[1] * (logt[high] - ltn)
        out[mid] = self._interp(logt[mid])
        return out

    def sigma2(self, t):
        arr = _check_t(t)
        flat = np.atleast_1d(arr).astype(float)
        out = np.zeros_like(flat)
        pos = flat > 0
        out[pos] = np.exp(self._log_sigma2(np.log(flat[pos])))
        return _scalar_or_array(out.reshape(arr.shape))

    def sigma_inverse(self, v):
        v = float(v)
        if not v > 0.0:
            raise DomainError(f"sigma_inverse needs v > 0, got {v}")
        target = 2.0 * math.log(v)
        (t1, v1), (tn, vn) = self._ends
        if target <= math.log(v1):
            return t1 * math.exp((target - math.log(v1)) / (2 * self.origin[1]))
        if target >= math.log(vn):
            return tn * math.exp((target - math.log(vn)) / (2 * self.tail[1]))
        f = lambda lt: float(self._interp(lt)) - target  # noqa: E731
        try:
            lt = brentq(f, math.log(t1), math.log(tn), xtol=1e-14, rtol=1e-13)
        except ValueError as exc:
            raise NumericError(f"sigma_inverse could not bracket v={v}: {exc}") from None
        return math.exp(lt)

    def to_dict(self):
        return {
            "kind": "table",
            "knots": [list(k) for k in self.knots],
            "origin": list(self.origin),
            "tail": list(self.tail),
            "tolerance": self.tolerance,
        }


def sigma2(model, t):
    """Variance ``sigma^2(t)``; accepts scalars or arrays."""
    return model.sigma2(t)


def sigma(model, t):
    return np.sqrt(model.sigma2(t))


def sigma_inverse(model, v):
    """The ``t`` with ``sigma(t) = v``."""
    return model.sigma_inverse(v)


def increment_covariance(model, s, t):
    """``Cov(X(s), X(t))`` from the stationary-increment identity."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_t(s)
    _check_t(t)
    out = 0.5 * (model.sigma2(s) + model.sigma2(t) - model.sigma2(np.abs(t - s)))
    return _scalar_or_array(np.asarray(out))


def model_from_dict(block):
    """Build a model from a config block such as ``{"kind": "fbm", ...}``."""
    if not isinstance(block, dict) or "kind" not in block:
        raise ParameterError(f"model block needs a 'kind': {block!r}")
    kind = block["kind"]
    if kind == "fbm":
        extra = set(block) - {"kind", "hurst", "scale"}
        if extra:
            raise ParameterError(f"unknown fbm keys: {sorted(extra)}")
        return FractionalBrownian(block["hurst"], block.get("scale", 1.0))
    if kind == "table":
        extra = set(block) - {"kind", "knots", "origin", "tail", "tolerance"}
        if extra:
            raise ParameterError(f"unknown table keys: {sorted(extra)}")
        return NumericTable(
            tuple(map(tuple, block["knots"])),
            tuple(block["origin"]),
            tuple(block["tail"]),
            block.get("tolerance", 0.05),
        )
    raise ParameterError(f"unknown model kind {kind!r}")


def parse_model(text):
    """Parse the CLI shorthand ``fbm:H[,scale]`` or a JSON model block."""
    text = text.strip()
    if text.startswith("{"):
        return model_from_dict(json.loads(text))
    kind, _, rest = text.partition(":")
    if kind != "fbm" or not rest:
        raise ParameterError(f"model shorthand must look like 'fbm:0.75[,scale]', got {text!r}")
    parts = [float(p) for p in rest.split(",")]
    if len(parts) > 2:
        raise ParameterError(f"too many fbm parameters in {text!r}")
    return FractionalBrownian(*parts)


def fbm_table(hurst, scale=1.0, t_min=1e-3, t_max=1e9, n=241, tolerance=0.05):
    """A :class:`NumericTable` sampled from an fBm variance (for testing)."""
    t = np.geomspace(t_min, t_max, n)
    v = scale * t ** (2 * hurst)
    return NumericTable(tuple(zip(t, v)), (scale, hurst), (scale, hurst), tolerance)
