"""Path simulation: fractional Gaussian noise, workload paths, Brownian oracles.

Fractional Gaussian noise is generated by circulant embedding, which is
exact in distribution whenever the embedding eigenvalues are nonnegative
(always the case for fGn at the sizes used here).  The Brownian case
``H = 1/2`` skips the FFT and uses independent increments directly.

Replicate ``r`` of a run seeded with ``seed`` always draws from the random
stream keyed by ``(seed, r, stream)``, so results do not depend on batch
boundaries or thread counts.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from . import _rng
from .errors import DomainError, EmbeddingError, ParameterError
from .geometry import gauss_tail_log

EIGEN_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SamplePath:
    """Values of the input process on an equispaced grid, ``values[0] = 0``."""

    step: float
    values: np.ndarray

    @property
    def times(self):
        return self.step * np.arange(self.values.shape[0])


@dataclass(frozen=True)
class WorkloadPath:
    step: float
    q_values: np.ndarray
    running_sup: float

    @property
    def times(self):
        return self.step * np.arange(self.q_values.shape[0])


def fgn_autocovariance(H, n_lags):
    """Unit-step fGn autocovariance ``gamma(0..n_lags)``."""
    k = np.arange(n_lags + 1, dtype=float)
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def _embedding_size(n):
    m = 1
    while m < n:
        m *= 2
    return m


@lru_cache(maxsize=32)
def _circulant_scale(H, n):
    """``sqrt(lambda / N)`` for the size-``2m`` circulant embedding."""
    m = _embedding_size(n)
    g = fgn_autocovariance(H, m)
    row = np.concatenate([g, g[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -EIGEN_TOLERANCE:
        raise EmbeddingError(
            f"circulant embedding has eigenvalue {lam.min():.3e} < -{EIGEN_TOLERANCE:g} "
            f"(H={H}, n={n})"
        )
    scale = np.sqrt(np.clip(lam, 0.0, None) / row.size)
    scale.setflags(write=False)
    return scale


def _check_hurst(H):
    H = float(H)
    if not 0.0 < H < 1.0:
        raise ParameterError(f"hurst must lie in (0, 1), got {H}")
    return H


def fgn_batch(H, n, step, seed, first_replicate, count, stream=0, scale=1.0):
    """Increments of ``count`` fBm paths (rows), each ``n`` steps long.

    The variance of an increment over one step is ``scale * step**(2H)``.
    """
    H = _check_hurst(H)
    amp = math.sqrt(scale) * step**H
    if H == 0.5:
        out = np.empty((count, n))
        _rng.fill_normal_rows(seed, first_replicate, stream, out)
        out *= amp
        return out
    sq = _circulant_scale(H, n)
    N = sq.size
    z = np.empty((count, 2 * N))
    _rng.fill_normal_rows(seed, first_replicate, stream, z)
    w = np.fft.fft(sq * (z[:, :N] + 1j * z[:, N:]), axis=1)
    return w.real[:, :n] * amp


def generate_fgn(H, n, step, seed, replicate=0, scale=1.0):
    """Sample path of fBm on ``n`` steps of length ``step``: cumulative fGn.

    Deterministic for a given ``(seed, replicate)``.
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"need at least one step, got n={n}")
    if not step > 0:
        raise DomainError(f"step must be positive, got {step}")
    seed = _rng.check_seed(seed)
    inc = fgn_batch(H, n, step, seed, replicate, 1, scale=scale)[0]
    return SamplePath(float(step), np.concatenate([[0.0], np.cumsum(inc)]))


@njit(cache=True)
def _lindley(inc, drain, x):
    n = inc.shape[0]
    q = np.empty(n + 1)
    q[0] = x
    y = 0.0
    w = 0.0
    top = x
    for k in range(n):
        d = inc[k] - drain
        y += d
        w = max(0.0, w + d)
        v = max(x + y, w)
        q[k + 1] = v
        if v > top:
            top = v
    return q, top


@njit(cache=True, nogil=True)
def lindley_rows(inc, drain, x, q_end, q_sup):
    """Final workload and running maximum for each row of increments."""
    for r in range(inc.shape[0]):
        y = 0.0
        w = 0.0
        top = x
        v = x
        for k in range(inc.shape[1]):
            d = inc[r, k] - drain
            y += d
            w = max(0.0, w + d)
            v = max(x + y, w)
            if v > top:
                top = v
        q_end[r] = v
        q_sup[r] = top


@njit(cache=True, nogil=True)
def brownian_workload(seed, first, count, n, sd, drain, x, q_end, q_sup):
    """Fused Brownian version of :func:`lindley_rows` (increments drawn inline)."""
    state = np.empty(4, dtype=np.uint64)
    for r in range(count):
        _rng.seed_state(seed, first + r, 0, state)
        s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
        y = 0.0
        w = 0.0
        top = x
        v = x
        for _ in range(n):
            z, s0, s1, s2, s3 = _rng.normal_next(s0, s1, s2, s3)
            d = sd * z - drain
            y += d
            w = max(0.0, w + d)
            v = max(x + y, w)
            if v > top:
                top = v
        q_end[r] = v
        q_sup[r] = top


def workload_path(path, c, x):
    """Workload on the grid from the Lindley recursion.

    ``W_k = max(0, W_{k-1} + dX_k - c h)`` is the reflected part and
    ``Q_k = max(x + X_k - c t_k, W_k)``.
    """
    if not c > 0:
        raise DomainError(f"drain rate must be positive, got {c}")
    if not x >= 0:
        raise DomainError(f"backlog must be nonnegative, got {x}")
    vals = np.asarray(path.values, dtype=float)
    q, top = _lindley(np.diff(vals), float(c) * path.step, float(x))
    return WorkloadPath(path.step, q, float(top))


def exact_bm_crossing_log(u, c, T):
    """Log of ``P(sup_{t<=T} B(t) - c t > u)`` for standard Brownian ``B``."""
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    if u < 0:
        return 0.0
    rt = math.sqrt(T)
    a = gauss_tail_log((u + c * T) / rt)
    b = -2.0 * c * u + gauss_tail_log((u - c * T) / rt)
    return min(0.0, float(np.logaddexp(a, b)))


def exact_bm_crossing(u, c, T):
    """Reflection-principle crossing probability (also ``P(Q(T) > u)`` from empty)."""
    return math.exp(exact_bm_crossing_log(u, c, T))


def exact_bm_stationary(u, c):
    """Stationary overflow ``exp(-2 c u)`` of reflected standard Brownian motion."""
    if u < 0 or not c > 0:
        raise DomainError(f"need u >= 0 and c > 0, got u={u}, c={c}")
    return math.exp(-2.0 * c * u)
