"""Pickands and Piterbarg constants: closed forms, Monte Carlo, cache.

For a centred Gaussian process ``Z`` with variance ``v`` and drift ``f(t) =
d t`` write ``Z*(t) = sqrt(2) Z(t) - v(t) - d t``.  The constants are

* Pickands ``H[0,S] = E exp(sup_[0,S] Z*)`` with ``d = 0``, reported as ``H[0,S]/S``;
* Piterbarg ``P = E exp(sup Z*)``;
* ``P^a = E exp(max(a, sup Z*))``;
* ``P~^a = E exp(max(a + sup Z*, sup Z* + sup Z~*))`` for an independent copy ``Z~``.

Monte Carlo runs on an equispaced grid.  The default estimator draws the
path under an exponentially tilted mixture measure: a grid index ``i`` is
picked with probability proportional to ``exp(-d t_i)``, the path is shifted
by ``sqrt(2) Cov(Z(.), Z(t_i))`` and each sample is reweighted by the
likelihood ratio ``W / sum_j exp(Z*(t_j))``.  This is unbiased for the same
expectation and keeps every sample bounded, whereas the plain average of
``exp(sup Z*)`` is dominated by rare huge values.  ``method="crude"`` gives
the plain average.

For Brownian-type processes the supremum between grid points is drawn
exactly from the Brownian-bridge maximum law (``sup="auto"``), removing the
grid bias; ``sup="grid"`` keeps the maximum over grid points only.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy.special import ndtr

from . import _rng
from . import simulate as sim
from ._parallel import run_batches
from .errors import (
    ConstantRequiredError,
    DomainError,
    ParameterError,
    ResourceBudgetError,
    UnsupportedBranchError,
)
from .regimes import Scenario
from .variance_models import FractionalBrownian, model_from_dict

DEFAULT_BUDGET = 2**35
DEFAULT_S = 64.0
_SQRT_PI = math.sqrt(math.pi)
# 2**-53 is the smallest uniform we draw, and log(2**-53) = -36.7368...
_BRIDGE_SKIP = 36.75


@dataclass(frozen=True)
class StraightLine:
    """``Z(t) = sqrt(scale) N t``: the degenerate ``alpha = 1`` limit process."""

    scale: float = 1.0
    kind = "line"

    @property
    def params(self):
        return (self.scale, 1.0, self.scale, 1.0)

    def sigma2(self, t):
        return self.scale * np.asarray(t, dtype=float) ** 2

    def to_dict(self):
        return {"kind": "line", "scale": self.scale}


def base_from_dict(block):
    if block.get("kind") == "line":
        return StraightLine(float(block.get("scale", 1.0)))
    return model_from_dict(block)


def standard_fbm(alpha):
    """``B_alpha``: variance ``t**(2 alpha)``, with ``alpha = 1`` the straight line."""
    return StraightLine(1.0) if alpha == 1.0 else FractionalBrownian(alpha, 1.0)


@dataclass(frozen=True)
class LimitProcessSpec:
    """The process ``Z(t) = premultiplier * X(time_change * t)`` and a drift."""

    base: object
    premultiplier: float = 1.0
    time_change: float = 1.0
    drift: float = None

    def variance(self, t):
        return self.premultiplier**2 * self.base.sigma2(self.time_change * np.asarray(t, dtype=float))

    def power_law(self):
        """``(H, k)`` with variance ``k t**(2H)`` when the base is a power law."""
        if isinstance(self.base, (FractionalBrownian, StraightLine)):
            H = 1.0 if isinstance(self.base, StraightLine) else self.base.hurst
            k = self.premultiplier**2 * self.base.scale * self.time_change ** (2 * H)
            return H, k
        return None

    def fingerprint(self):
        pl = self.power_law()
        if pl is not None:
            return {"hurst": pl[0], "scale": float(np.float64(pl[1]))}
        return {"base": self.base.to_dict(), "premultiplier": self.premultiplier,
                "time_change": self.time_change}

    def describe(self):
        pl = self.power_law()
        if pl is None:
            return f"{self.premultiplier:g} X({self.time_change:g} t)"
        return f"fBm(H={pl[0]:g}, var={pl[1]:.6g} t^{2 * pl[0]:g})"

    def to_dict(self):
        return {"base": self.base.to_dict(), "premultiplier": self.premultiplier,
                "time_change": self.time_change, "drift": self.drift}


@dataclass(frozen=True)
class ConstantEstimate:
    value: float
    std_error: float
    S: float
    grid_step: float
    replications: int
    seed: int
    kind: str = "pickands"
    d: float = 0.0
    a: float = None
    method: str = "measure_change"
    sup: str = "grid"
    process: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        if out["a"] is not None and math.isinf(out["a"]):
            out["a"] = "-inf" if out["a"] < 0 else "inf"
        return out


# ------------------------------------------------------------ closed forms


def _brownian_piterbarg_a(lam, a):
    if a <= 0:
        return lam / (lam - 1.0)
    return math.exp(a) * -math.expm1(-lam * a) + lam / (lam - 1.0) * math.exp(-(lam - 1.0) * a)


def brownian_constant_oracles(d, a=0.0, rate=1.0):
    """Exact constants for ``Z`` Brownian with variance ``rate * t``.

    ``sup(sqrt(2) Z - (rate + d) t)`` is exponential with parameter
    ``lam = 1 + d / rate``, which gives every value in closed form.
    """
    d, a, rate = float(d), float(a), float(rate)
    if not d > 0:
        raise DomainError(f"Brownian Piterbarg constants need d > 0, got {d}")
    if not rate > 0:
        raise DomainError(f"rate must be positive, got {rate}")
    lam = 1.0 + d / rate
    p = lam / (lam - 1.0)
    pa = _brownian_piterbarg_a(lam, a)
    return {"pickands": rate, "piterbarg": p, "piterbarg_a": pa, "piterbarg_tilde": p * pa}


def straight_line_constant_oracles(d, a=0.0, rate=1.0):
    """Exact constants for ``Z(t) = sqrt(rate) N t``.

    Here ``sup_t(sqrt(2) Z - Z var - d t) = max(0, sqrt(2) N - d')**2 / 4``
    with ``d' = d / sqrt(rate)``, a function of one Gaussian.
    """
    d, a, rate = float(d), float(a), float(rate)
    if not d > 0:
        raise DomainError(f"straight-line Piterbarg constants need d > 0, got {d}")
    dp = d / math.sqrt(rate)
    tail = math.exp(-dp * dp / 4.0) / (dp * _SQRT_PI)
    p = float(ndtr(dp / math.sqrt(2.0))) + tail
    if a <= 0:
        pa = p
    else:
        ra = math.sqrt(a)
        pa = math.exp(a) * float(ndtr((dp + 2 * ra) / math.sqrt(2.0))) + tail * math.exp(-ra * dp)
    return {"pickands": math.sqrt(rate) / _SQRT_PI, "piterbarg": p, "piterbarg_a": pa,
            "piterbarg_tilde": p * pa}


def closed_form(kind, proc, d=None, a=None):
    """Exact constant when ``proc`` is Brownian-type or a straight line, else ``None``."""
    pl = proc.power_law()
    if pl is None:
        return None
    H, k = pl
    if H == 0.5:
        oracle = brownian_constant_oracles
    elif H == 1.0:
        oracle = straight_line_constant_oracles
    else:
        return None
    if kind == "pickands":
        return k if H == 0.5 else math.sqrt(k) / _SQRT_PI
    if d is None or not d > 0:
        return None
    return oracle(d, 0.0 if a is None else a, k)[kind]


# ----------------------------------------------------------------- kernels


@njit(cache=True, inline="always")
def _pick_index(cw, target):
    lo, hi = 0, cw.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cw[mid] > target:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _finish(z, n, tilt, bridge, var_h, logw, a_vals, s0, s1, s2, s3, out_row):
    g = z[0]
    for j in range(1, n + 1):
        if z[j] > g:
            g = z[j]
    top = g
    if bridge:
        for j in range(n):
            u, s0, s1, s2, s3 = _rng.uniform_next(s0, s1, s2, s3)
            lo, hi = z[j], z[j + 1]
            q = 2.0 * (g - lo) * (g - hi) / var_h
            if q < _BRIDGE_SKIP:
                dz = hi - lo
                mx = 0.5 * (lo + hi + math.sqrt(dz * dz - 2.0 * var_h * math.log(1.0 - u)))
                if mx > top:
                    top = mx
    base = 0.0
    if tilt:
        acc = 0.0
        for j in range(n + 1):
            acc += math.exp(z[j] - g)
        base = logw - g - math.log(acc)
    for k in range(a_vals.shape[0]):
        out_row[k] = base + max(a_vals[k], top)


@njit(cache=True, nogil=True)
def _brownian_kernel(seed, first, count, stream, n, h, rate, d, cw, logw, a_vals, tilt, bridge, out):
    """Log-samples for Brownian ``Z`` with variance ``rate * t``."""
    state = np.empty(4, dtype=np.uint64)
    z = np.empty(n + 1)
    sd = math.sqrt(2.0 * rate * h)
    for r in range(count):
        _rng.seed_state(seed, first + r, stream + 1, state)
        u0, u1, u2, u3 = state[0], state[1], state[2], state[3]
        ti = 0.0
        if tilt:
            x, u0, u1, u2, u3 = _rng.uniform_next(u0, u1, u2, u3)
            ti = _pick_index(cw, x * cw[n]) * h
        _rng.seed_state(seed, first + r, stream, state)
        s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
        acc = 0.0
        z[0] = 0.0
        for j in range(1, n + 1):
            g, s0, s1, s2, s3 = _rng.normal_next(s0, s1, s2, s3)
            acc += sd * g
            t = j * h
            if tilt:
                z[j] = acc + rate * ti - rate * abs(t - ti) - d * t
            else:
                z[j] = acc - (rate + d) * t
        _finish(z, n, tilt, bridge, 2.0 * rate * h, logw, a_vals, u0, u1, u2, u3, out[r])


@njit(cache=True, nogil=True)
def _path_kernel(paths, v, seed, first, stream, h, d, cw, logw, a_vals, tilt, out):
    """Log-samples for arbitrary base paths (rows, ``paths[:, 0] = 0``) on the grid."""
    count, m = paths.shape
    n = m - 1
    state = np.empty(4, dtype=np.uint64)
    z = np.empty(m)
    rt2 = math.sqrt(2.0)
    for r in range(count):
        _rng.seed_state(seed, first + r, stream + 1, state)
        u0, u1, u2, u3 = state[0], state[1], state[2], state[3]
        i = 0
        if tilt:
            x, u0, u1, u2, u3 = _rng.uniform_next(u0, u1, u2, u3)
            i = _pick_index(cw, x * cw[n])
        for j in range(m):
            if tilt:
                z[j] = rt2 * paths[r, j] + v[i] - v[abs(j - i)] - d * j * h
            else:
                z[j] = rt2 * paths[r, j] - v[j] - d * j * h
        _finish(z, n, tilt, False, 1.0, logw, a_vals, u0, u1, u2, u3, out[r])


# -------------------------------------------------------------- estimation


def _grid_size(S, grid_step):
    if not S >= 0 or not grid_step > 0:
        raise DomainError(f"need S >= 0 and grid_step > 0, got S={S}, step={grid_step}")
    ratio = S / grid_step
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise DomainError(f"grid_step {grid_step} does not divide S {S}")
    return n


def _log_samples(proc, d, a_vals, n, h, reps, seed, stream, method, sup, threads):
    pl = proc.power_law()
    if pl is None:
        raise UnsupportedBranchError(
            f"Monte Carlo constants need a power-law base process, got {proc.describe()}"
        )
    H, k = pl
    if method not in ("measure_change", "crude"):
        raise ParameterError(f"unknown method {method!r}")
    tilt = method == "measure_change"
    if sup not in ("auto", "grid", "bridge"):
        raise ParameterError(f"unknown sup mode {sup!r}")
    if sup == "bridge" and H != 0.5:
        raise UnsupportedBranchError("the bridge supremum is exact only for Brownian-type processes")
    bridge = sup != "grid" and H == 0.5
    t = h * np.arange(n + 1)
    w = np.exp(-d * t)
    cw = np.cumsum(w)
    logw = math.log(cw[-1])
    a_arr = np.asarray(a_vals, dtype=float)
    out = np.empty((reps, a_arr.size))
    if H == 0.5:
        def work(lo, hi):
            _brownian_kernel(seed, lo, hi - lo, stream, n, h, k, d, cw, logw, a_arr, tilt, bridge, out[lo:hi])

        run_batches(work, reps, 2048, threads)
    else:
        v = k * t ** (2.0 * H)
        rows = max(1, 2**21 // (4 * sim._embedding_size(max(n, 1))))

        def work(lo, hi):
            if H == 1.0:
                g = np.empty((hi - lo, 1))
                _rng.fill_normal_rows(seed, lo, stream, g)
                paths = math.sqrt(k) * g * t
            else:
                inc = sim.fgn_batch(H, n, h, seed, lo, hi - lo, stream=stream, scale=k)
                paths = np.zeros((hi - lo, n + 1))
                np.cumsum(inc, axis=1, out=paths[:, 1:])
            _path_kernel(paths, v, seed, lo, stream, h, d, cw, logw, a_arr, tilt, out[lo:hi])

        run_batches(work, reps, rows, threads)
    return out, ("bridge" if bridge else "grid")


def _summarise(samples):
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else 0.0
    return mean, se


def _prepare(S, grid_step, reps, seed, budget, copies=1):
    n = _grid_size(S, grid_step)
    reps = int(reps)
    if reps < 1:
        raise DomainError(f"need at least one replication, got {reps}")
    seed = _rng.check_seed(seed)
    cap = DEFAULT_BUDGET if budget is None else budget
    if float(copies) * reps * (n + 1) > cap:
        raise ResourceBudgetError(
            f"{copies} x {reps} x {n + 1} grid points exceeds the budget {cap:.3g}"
        )
    return n, reps, seed


def piterbarg_table(proc, d=None, a_values=(0.0,), S=DEFAULT_S, grid_step=2.0**-9, reps=10_000,
                    seed=0, method="measure_change", sup="auto", tilde=False, threads=None,
                    budget=None):
    """Estimate ``P^a`` (or ``P~^a``) for several ``a`` on one path ensemble.

    ``a = -inf`` gives the plain Piterbarg constant.
    """
    d = proc.drift if d is None else d
    d = 0.0 if d is None else float(d)
    if d < 0:
        raise DomainError(f"drift must be nonnegative, got {d}")
    n, reps, seed = _prepare(S, grid_step, reps, seed, budget, 2 if tilde else 1)
    a_vals = [float(a) for a in a_values]
    kind = "piterbarg_tilde" if tilde else "piterbarg_a"
    fp = proc.fingerprint()
    if n == 0:
        # Only t = 0 is on the grid, where Z* vanishes.
        vals = [math.exp(max(a, 0.0)) for a in a_vals]
        return [ConstantEstimate(v, 0.0, float(S), float(grid_step), reps, seed, kind, d, a,
                                 method, "grid", fp) for v, a in zip(vals, a_vals)]
    h = S / n
    logs, used = _log_samples(proc, d, a_vals, n, h, reps, seed, 2 if tilde else 0, method, sup, threads)
    if tilde:
        first, _ = _log_samples(proc, d, [-math.inf], n, h, reps, seed, 0, method, sup, threads)
        logs = logs + first
    out = []
    for col, a in enumerate(a_vals):
        mean, se = _summarise(np.exp(logs[:, col]))
        k = "piterbarg" if (a == -math.inf and not tilde) else kind
        out.append(ConstantEstimate(mean, se, float(S), float(grid_step), reps, seed, k, d, a, method, used, fp))
    return out


def pickands(proc, S=DEFAULT_S, grid_step=2.0**-9, reps=10_000, seed=0, method="measure_change",
             sup="auto", threads=None, budget=None):
    """Estimate ``H[0,S] / S`` (the unnormalised value 1 when ``S = 0``)."""
    n, reps, seed = _prepare(S, grid_step, reps, seed, budget)
    fp = proc.fingerprint()
    if n == 0:
        return ConstantEstimate(1.0, 0.0, 0.0, float(grid_step), reps, seed, "pickands", 0.0, None,
                                method, "grid", fp)
    h = S / n
    logs, used = _log_samples(proc, 0.0, [-math.inf], n, h, reps, seed, 0, method, sup, threads)
    mean, se = _summarise(np.exp(logs[:, 0]))
    return ConstantEstimate(mean / S, se / S, float(S), float(grid_step), reps, seed, "pickands",
                            0.0, None, method, used, fp)


def piterbarg(proc, d=None, S=DEFAULT_S, grid_step=2.0**-9, reps=10_000, seed=0, **kw):
    """Estimate ``E exp(sup(sqrt(2) Z - var - d t))`` over ``[0, S]``."""
    return piterbarg_table(proc, d, [-math.inf], S, grid_step, reps, seed, **kw)[0]


def piterbarg_a(proc, d=None, a=0.0, S=DEFAULT_S, grid_step=2.0**-9, reps=10_000, seed=0, **kw):
    """Estimate ``E exp(max(a, sup Z*))``; equals :func:`piterbarg` exactly at ``a = 0``."""
    return piterbarg_table(proc, d, [a], S, grid_step, reps, seed, **kw)[0]


def piterbarg_tilde(proc, d=None, a=0.0, S=DEFAULT_S, grid_step=2.0**-9, reps=10_000, seed=0, **kw):
    """Estimate ``E exp(max(a + sup Z*, sup Z* + sup Z~*))`` using the product form
    ``exp(sup Z*) * exp(max(a, sup Z~*))`` of two independent suprema."""
    return piterbarg_table(proc, d, [a], S, grid_step, reps, seed, tilde=True, **kw)[0]


# --------------------------------------------------------- limit processes


def limiting_process(spec, classification):
    """The process whose constant enters the asymptotics of the classified regime."""
    a0, a = spec.model.params[1], spec.alpha
    Ai = spec.a_inf
    scen = classification.scenario
    if scen.is_short:
        phi, gamma = classification.phi, classification.gamma
        drift = None
        if scen == Scenario.SHORT_OMEGA_FINITE:
            drift = classification.omega_inf * (a - spec.c * gamma / (1 + spec.c * gamma))
        if phi == 0:
            return LimitProcessSpec(standard_fbm(a0), drift=drift)
        if math.isinf(phi):
            return LimitProcessSpec(standard_fbm(a), drift=drift)
        g = 1.0 + spec.c * gamma
        level = math.sqrt(2.0) * Ai * phi ** (2 * a)
        return LimitProcessSpec(spec.model, g / level, spec.model.sigma_inverse(level / g), drift)
    if scen.is_t2:
        if a < 0.5:
            return LimitProcessSpec(standard_fbm(a0))
        if a > 0.5:
            return LimitProcessSpec(standard_fbm(a))
        from .geometry import t_star

        ts = t_star(spec)
        g = 1.0 + spec.c * ts
        level = math.sqrt(2.0) * Ai * ts
        return LimitProcessSpec(spec.model, g / level, spec.model.sigma_inverse(level / g))
    raise UnsupportedBranchError("a fixed horizon has no limiting process")


def backlog_process(spec, phi):
    """``a1 X`` with drift ``a2 t`` and level ``sqrt(2) a1 x`` for the boundary case."""
    Ai, a, c = spec.a_inf, spec.alpha, spec.c
    a1 = (1 + c * phi) / (math.sqrt(2.0) * Ai * phi)
    a2 = (1 + c * phi) ** 2 / (Ai * phi**2) * (a - c * phi / (1 + c * phi))
    return LimitProcessSpec(spec.model, a1, 1.0, a2), math.sqrt(2.0) * a1 * spec.x


# ------------------------------------------------------------------- cache


@dataclass(frozen=True)
class ConstantQuery:
    kind: str
    process: LimitProcessSpec
    d: float = None
    a: float = None

    def key(self):
        return json.dumps({"kind": self.kind, "process": self.process.fingerprint(),
                           "d": None if self.d is None else repr(float(self.d)),
                           "a": None if self.a is None else repr(float(self.a))}, sort_keys=True)

    def to_dict(self):
        return {"kind": self.kind, "process": self.process.to_dict(), "d": self.d, "a": self.a}


class ConstantsCache:
    """Estimated constants keyed by process, kind, drift and level.

    Several estimates of one quantity may be stored; lookups return the one
    with the most replications.  ``auto_estimate`` (a dict of ``S``,
    ``grid_step``, ``reps``, ``seed``) makes :meth:`resolve` run the Monte
    Carlo on a miss instead of raising.
    """

    def __init__(self, auto_estimate=None):
        self._entries = {}
        self.auto_estimate = auto_estimate

    def __len__(self):
        return sum(len(v) for v in self._entries.values())

    def put(self, query, estimate):
        self._entries.setdefault(query.key(), []).append(estimate)

    def get(self, query):
        found = self._entries.get(query.key())
        if not found:
            return None
        return max(found, key=lambda e: e.replications)

    def resolve(self, query):
        """``(value, source)`` from the closed form, the cache or an estimate."""
        exact = closed_form(query.kind, query.process, query.d, query.a)
        if exact is not None:
            return exact, "closed-form"
        est = self.get(query)
        if est is not None:
            return est.value, est
        if self.auto_estimate:
            est = estimate_query(query, **self.auto_estimate)
            self.put(query, est)
            return est.value, est
        raise ConstantRequiredError(
            f"constant {query.kind} for {query.process.describe()} (d={query.d}, a={query.a}) "
            "has no closed form; estimate it with the constants command and load the cache",
            query=query.to_dict(),
        )

    def save(self, path):
        rows = [{"key": json.loads(k), "estimate": e.to_dict()}
                for k, ests in sorted(self._entries.items()) for e in ests]
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path, auto_estimate=None):
        cache = cls(auto_estimate)
        with open(path) as fh:
            rows = json.load(fh)
        for row in rows:
            est = dict(row["estimate"])
            if isinstance(est.get("a"), str):
                est["a"] = float(est["a"])
            key = json.dumps(row["key"], sort_keys=True)
            cache._entries.setdefault(key, []).append(ConstantEstimate(**est))
        return cache


def estimate_query(query, S=DEFAULT_S, grid_step=2.0**-9, reps=10_000, seed=0, **kw):
    """Run the Monte Carlo estimator matching ``query``."""
    if query.kind == "pickands":
        return pickands(query.process, S, grid_step, reps, seed, **kw)
    a = -math.inf if query.kind == "piterbarg" else (query.a or 0.0)
    return piterbarg_table(query.process, query.d, [a], S, grid_step, reps, seed,
                           tilde=query.kind == "piterbarg_tilde", **kw)[0]
