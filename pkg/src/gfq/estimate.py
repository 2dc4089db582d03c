"""Crude Monte Carlo estimates of overflow probabilities.

``estimate_pi`` targets ``P(Q(T) > u)`` and ``estimate_pi_sup`` targets
``P(max_{t <= T} Q(t) > u)``, both on an equispaced grid with
``grid_points`` steps.  All levels in :func:`estimate_pair` share one path
ensemble, so the estimates are pathwise nonincreasing in ``u``.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from . import _rng
from . import simulate as sim
from ._parallel import run_batches
from .errors import DomainError, ResourceBudgetError, UnsupportedBranchError
from .variance_models import FractionalBrownian

DEFAULT_BUDGET = 2**35
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class MCEstimate:
    p_hat: float
    std_error: float
    ci_low: float
    ci_high: float
    replications: int
    grid_points: int
    seed: int
    hits: int

    def to_dict(self):
        return asdict(self)


def _interval(hits, n):
    p = hits / n
    se = math.sqrt(p * (1.0 - p) / n)
    if hits < 20:
        lo = 0.0 if hits == 0 else float(beta_dist.ppf(0.025, hits, n - hits + 1))
        hi = 1.0 if hits == n else float(beta_dist.ppf(0.975, hits + 1, n - hits))
    else:
        lo, hi = p - _Z95 * se, p + _Z95 * se
    return p, se, max(0.0, min(lo, p)), min(1.0, max(hi, p))


def make_estimate(hits, n, grid_points, seed):
    """Binomial estimate with a 95% interval (Clopper-Pearson below 20 hits)."""
    p, se, lo, hi = _interval(int(hits), int(n))
    return MCEstimate(p, se, lo, hi, int(n), int(grid_points), int(seed), int(hits))


def check_budget(points, budget=None):
    cap = DEFAULT_BUDGET if budget is None else budget
    if points > cap:
        raise ResourceBudgetError(f"requested {points:.3g} path points exceeds the budget {cap:.3g}")


def simulate_endpoints(spec, T, n_reps, grid_points, seed, threads=None, budget=None):
    """Per-replicate final workload ``Q(T)`` and running maximum over the grid."""
    if not isinstance(spec.model, FractionalBrownian):
        raise UnsupportedBranchError("Monte Carlo validation supports fractional Brownian inputs only")
    n_reps, n = int(n_reps), int(grid_points)
    if n_reps < 1:
        raise DomainError(f"need at least one replication, got {n_reps}")
    if n < 1:
        raise DomainError(f"need at least one grid step, got {grid_points}")
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    seed = _rng.check_seed(seed)
    check_budget(float(n_reps) * n, budget)
    H, scale = spec.model.hurst, spec.model.scale
    h = T / n
    drain = spec.c * h
    x = spec.x
    q_end = np.empty(n_reps)
    q_sup = np.empty(n_reps)

    if H == 0.5:
        sd = math.sqrt(scale * h)

        def work(a, b):
            sim.brownian_workload(seed, a, b - a, n, sd, drain, x, q_end[a:b], q_sup[a:b])

        run_batches(work, n_reps, 4096, threads)
    else:
        rows = max(1, 2**22 // (4 * sim._embedding_size(n)))

        def work(a, b):
            inc = sim.fgn_batch(H, n, h, seed, a, b - a, scale=scale)
            sim.lindley_rows(inc, drain, x, q_end[a:b], q_sup[a:b])

        run_batches(work, n_reps, rows, threads)
    return q_end, q_sup


def _degenerate(spec, u, n_reps, grid_points, seed):
    hits = n_reps if spec.x > u else 0
    return make_estimate(hits, n_reps, grid_points, seed)


def estimate_pair(spec, T, u_list, n_reps, grid_points, seed, threads=None, budget=None):
    """``(u, point estimate, sup estimate)`` for every level on shared paths."""
    us = [float(u) for u in u_list]
    if not us:
        raise DomainError("u_list must be nonempty")
    if any(b < a for a, b in zip(us, us[1:])):
        raise DomainError("u_list must be ascending")
    if T == 0:
        return [(u, _degenerate(spec, u, n_reps, grid_points, seed),
                 _degenerate(spec, u, n_reps, grid_points, seed)) for u in us]
    q_end, q_sup = simulate_endpoints(spec, T, n_reps, grid_points, seed, threads, budget)
    end_sorted = np.sort(q_end)
    sup_sorted = np.sort(q_sup)
    out = []
    for u in us:
        h1 = n_reps - np.searchsorted(end_sorted, u, side="right")
        h2 = n_reps - np.searchsorted(sup_sorted, u, side="right")
        out.append((u, make_estimate(h1, n_reps, grid_points, seed),
                    make_estimate(h2, n_reps, grid_points, seed)))
    return out


def estimate_pi(spec, T, u, n_reps, grid_points, seed, threads=None, budget=None):
    """Estimate ``P(Q(T) > u)``.  At ``T = 0`` the answer is ``1{x > u}``."""
    if not u > 0 and T > 0:
        raise DomainError(f"u must be positive, got {u}")
    return estimate_pair(spec, T, [u], n_reps, grid_points, seed, threads, budget)[0][1]


def estimate_pi_sup(spec, T, u, n_reps, grid_points, seed, threads=None, budget=None):
    """Estimate ``P(max_{t <= T} Q(t) > u)``."""
    if not u > 0 and T > 0:
        raise DomainError(f"u must be positive, got {u}")
    return estimate_pair(spec, T, [u], n_reps, grid_points, seed, threads, budget)[0][2]
