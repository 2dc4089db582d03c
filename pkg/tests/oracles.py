"""Reference computations that share no code with the package."""

import math

import mpmath as mp
import numpy as np
from scipy import integrate


def fbm_covariance(H, times):
    s = np.asarray(times, dtype=float)
    h2 = 2.0 * H
    return 0.5 * (s[:, None] ** h2 + s[None, :] ** h2 - np.abs(s[:, None] - s[None, :]) ** h2)


def cholesky_fbm(H, n, step, reps, rng):
    """``reps`` fBm paths on ``step * (1..n)`` via a dense Cholesky factor."""
    t = step * np.arange(1, n + 1)
    L = np.linalg.cholesky(fbm_covariance(H, t))
    return rng.standard_normal((reps, n)) @ L.T


def brute_workload(values, step, c, x):
    """``Q(t_k) = max(x + X_k - c t_k, max_{j<=k} (X_k - X_j - c (t_k - t_j)))``."""
    X = np.asarray(values, dtype=float)
    n = X.size
    t = step * np.arange(n)
    q = np.empty(n)
    for k in range(n):
        inner = np.max(X[k] - X[: k + 1] - c * (t[k] - t[: k + 1]))
        q[k] = max(x + X[k] - c * t[k], inner)
    return q


def log_tail_mp(z):
    """``log P(N > z)`` in 50-digit arithmetic."""
    with mp.workdps(50):
        return float(mp.log(mp.erfc(mp.mpf(z) / mp.sqrt(2)) / 2))


def bm_crossing_mp(u, c, T):
    """Reflection-principle ``P(sup_{t<=T} B(t) - c t > u)`` in high precision."""
    with mp.workdps(40):
        u, c, T = mp.mpf(u), mp.mpf(c), mp.mpf(T)
        r = mp.sqrt(T)
        return float(mp.ncdf(-(u + c * T) / r) + mp.exp(-2 * c * u) * mp.ncdf(-(u - c * T) / r))


def brownian_pickands_window(S):
    """``E exp(sup_{[0,S]} (sqrt(2) B(t) - t)) / S`` from the reflection law of the maximum."""
    with mp.workdps(30):
        S = mp.mpf(S)
        s = mp.sqrt(2 * S)

        def tail(m):
            return mp.ncdf(-(m + S) / s) + mp.exp(-m) * mp.ncdf(-(m - S) / s)

        return float((1 + mp.quad(lambda m: mp.exp(m) * tail(m), [0, S, 2 * S, mp.inf])) / S)


def line_pickands_window(S):
    """Same functional for ``Z(t) = N t``: the maximiser is explicit in ``N``."""
    def integrand(n):
        t = min(max(n / math.sqrt(2.0), 0.0), S)
        return math.exp(math.sqrt(2.0) * n * t - t * t - 0.5 * n * n) / math.sqrt(2 * math.pi)

    hi = math.sqrt(2.0) * S
    val = sum(integrate.quad(integrand, a, b, limit=200, epsabs=1e-12)[0]
              for a, b in ((-40.0, 0.0), (0.0, hi), (hi, hi + 40.0)))
    return val / S


def exp_max_expectation(lam, a):
    """``E exp(max(a, M))`` for ``M ~ Exp(lam)`` by direct quadrature."""
    f = lambda m: math.exp(max(a, m) - lam * m) * lam  # noqa: E731
    if a <= 0:
        return integrate.quad(f, 0.0, math.inf)[0]
    return integrate.quad(f, 0.0, a)[0] + integrate.quad(f, a, math.inf)[0]


def tilde_two_exp(lam, a):
    """``E exp(max(a + M1, M1 + M2))`` for independent ``Exp(lam)`` variables (2-d quadrature)."""
    f = lambda m2, m1: math.exp(max(a + m1, m1 + m2) - lam * (m1 + m2)) * lam * lam  # noqa: E731
    val, _ = integrate.dblquad(f, 0.0, 60.0, lambda m1: 0.0, lambda m1: 60.0, epsabs=1e-11, epsrel=1e-11)
    return val


def d_riemann(z0, h=0.01):
    """``int_{-inf}^{z0} int_0^inf exp(-(v - z)^2) dv dz`` by a 2-d midpoint sum.

    Two step sizes and one Richardson step remove the ``h^2`` error term.
    """
    def midpoint(step):
        z_lo = min(z0, 0.0) - 9.0
        nz = int(round((z0 - z_lo) / step))
        z = z_lo + step * (np.arange(nz) + 0.5)
        v_hi = max(z0, 0.0) + 9.0
        nv = int(round(v_hi / step))
        v = step * (np.arange(nv) + 0.5)
        total = 0.0
        for chunk in np.array_split(z, max(1, nz // 200)):
            total += np.exp(-(v[None, :] - chunk[:, None]) ** 2).sum()
        return total * step * step

    coarse, fine = midpoint(h), midpoint(h / 2)
    return (4.0 * fine - coarse) / 3.0
