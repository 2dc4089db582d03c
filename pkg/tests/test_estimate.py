import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfq import estimate as est
from gfq import simulate as sim
from gfq.errors import DomainError, ResourceBudgetError, UnsupportedBranchError
from gfq.geometry import QueueSpec
from gfq.variance_models import FractionalBrownian, fbm_table


def bm(c=1.0, x=0.0):
    return QueueSpec(c, x, FractionalBrownian(0.5))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5000), st.data())
def test_interval_brackets_estimate(n, data):
    hits = data.draw(st.integers(0, n))
    e = est.make_estimate(hits, n, 8, 0)
    assert 0.0 <= e.ci_low <= e.p_hat <= e.ci_high <= 1.0
    assert e.p_hat == hits / n


def test_zero_hits_interval():
    e = est.make_estimate(0, 1000, 1, 0)
    assert e.p_hat == 0.0 and e.ci_low == 0.0
    # Clopper-Pearson upper bound for 0/n is 1 - 0.025**(1/n).
    assert e.ci_high == pytest.approx(1 - 0.025 ** (1 / 1000), rel=1e-10)


@pytest.mark.parametrize("x, u, expected", [(2.0, 1.0, 1.0), (0.5, 1.0, 0.0)])
def test_zero_horizon(x, u, expected):
    e = est.estimate_pi(bm(x=x), 0.0, u, 100, 16, seed=1)
    assert e.p_hat == expected
    assert e.std_error == 0.0


def test_initial_backlog_above_level_always_overflows():
    e = est.estimate_pi_sup(bm(x=3.0), 5.0, 2.0, 500, 64, seed=2)
    assert e.p_hat == 1.0


def test_brownian_point_estimate_near_exact():
    e = est.estimate_pi(bm(), 5.0, 1.0, 40_000, 512, seed=3)
    # A grid maximum undershoots the continuous one by about 0.5826 * sqrt(h),
    # so compare against the exact value at the shifted level.
    shifted = sim.exact_bm_crossing(1.0 + 0.5826 * np.sqrt(5.0 / 512), 1.0, 5.0)
    assert abs(e.p_hat - shifted) < 4 * e.std_error + 0.01 * shifted


def test_fractional_runs_and_sup_dominates_point():
    spec = QueueSpec(1.0, 0.0, FractionalBrownian(0.7))
    rows = est.estimate_pair(spec, 4.0, [0.5, 1.0, 2.0], 2000, 128, seed=4)
    for _, point, sup in rows:
        assert point.hits <= sup.hits


def test_monotone_in_level_and_duplicates_identical():
    rows = est.estimate_pair(bm(), 3.0, [0.1, 0.5, 0.5, 1.0, 2.0], 3000, 64, seed=5)
    hits = [r[1].hits for r in rows]
    assert hits == sorted(hits, reverse=True)
    assert rows[1][1] == rows[2][1] and rows[1][2] == rows[2][2]


def test_single_level_matches_pair():
    pair = est.estimate_pair(bm(), 2.0, [0.3, 0.8], 1000, 32, seed=6)
    assert est.estimate_pi(bm(), 2.0, 0.8, 1000, 32, seed=6) == pair[1][1]
    assert est.estimate_pi_sup(bm(), 2.0, 0.8, 1000, 32, seed=6) == pair[1][2]


def test_far_level_gives_zero_with_tight_interval():
    e = est.estimate_pi(bm(), 1.0, 40.0, 10**6, 4, seed=7)
    assert e.hits == 0 and e.ci_high < 1e-5


@pytest.mark.parametrize("levels", [[], [2.0, 1.0]])
def test_level_list_checked(levels):
    with pytest.raises(DomainError):
        est.estimate_pair(bm(), 1.0, levels, 10, 4, seed=0)


@pytest.mark.parametrize(
    "kwargs", [dict(n_reps=0), dict(grid_points=0), dict(T=-1.0), dict(seed=-3), dict(u=-1.0)]
)
def test_argument_checks(kwargs):
    args = dict(spec=bm(), T=1.0, u=1.0, n_reps=10, grid_points=4, seed=0)
    args.update(kwargs)
    with pytest.raises(DomainError):
        est.estimate_pi(**args)


def test_budget_enforced():
    with pytest.raises(ResourceBudgetError):
        est.estimate_pi(bm(), 1.0, 1.0, 1000, 1000, seed=0, budget=10**5)


def test_non_fbm_model_unsupported():
    with pytest.raises(UnsupportedBranchError):
        est.estimate_pi(QueueSpec(1.0, 0.0, fbm_table(0.5)), 1.0, 1.0, 10, 4, seed=0)


@pytest.mark.parametrize("H", [0.5, 0.3])
def test_thread_count_invariance(H):
    spec = QueueSpec(1.0, 0.0, FractionalBrownian(H))
    a = est.simulate_endpoints(spec, 2.0, 9000, 64, seed=8, threads=1)
    b = est.simulate_endpoints(spec, 2.0, 9000, 64, seed=8, threads=3)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
