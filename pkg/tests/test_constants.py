import math

import numpy as np
import pytest
from oracles import brownian_pickands_window, exp_max_expectation, line_pickands_window, tilde_two_exp

from gfq import constants as K
from gfq.errors import ConstantRequiredError, DomainError, ResourceBudgetError, UnsupportedBranchError
from gfq.geometry import QueueSpec
from gfq.regimes import OffsetFromPeak, PowerLaw, classify
from gfq.variance_models import FractionalBrownian

BM = K.LimitProcessSpec(K.standard_fbm(0.5))
LINE = K.LimitProcessSpec(K.standard_fbm(1.0))
FAST = dict(S=16.0, grid_step=2.0**-6, reps=4000, seed=1)


@pytest.mark.parametrize("d", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("a", [0.0, math.log(2), 2.0])
def test_brownian_closed_forms_match_quadrature(d, a):
    lam = 1 + d
    got = K.brownian_constant_oracles(d, a)
    assert got["piterbarg"] == pytest.approx(exp_max_expectation(lam, 0.0), rel=1e-10)
    assert got["piterbarg_a"] == pytest.approx(exp_max_expectation(lam, a), rel=1e-10)


@pytest.mark.parametrize("lam, a", [(2.0, 1.0), (3.0, 0.0), (4.0, 0.5)])
def test_tilde_closed_form_matches_double_integral(lam, a):
    got = K.brownian_constant_oracles(lam - 1, a)["piterbarg_tilde"]
    assert got == pytest.approx(tilde_two_exp(lam, a), rel=1e-7)


def test_tilde_frozen_value():
    assert K.brownian_constant_oracles(1.0, 1.0)["piterbarg_tilde"] == pytest.approx(6.1723, abs=1e-4)


def test_straight_line_closed_form_against_monte_carlo():
    exact = K.straight_line_constant_oracles(1.0)["piterbarg"]
    e = K.piterbarg(LINE, d=1.0, **FAST)
    assert abs(e.value - exact) < 3 * e.std_error


def test_closed_form_dispatch():
    assert K.closed_form("pickands", BM) == 1.0
    assert K.closed_form("pickands", LINE) == pytest.approx(1 / math.sqrt(math.pi))
    assert K.closed_form("piterbarg", BM, d=1.0) == 2.0
    assert K.closed_form("piterbarg", BM, d=None) is None
    assert K.closed_form("pickands", K.LimitProcessSpec(K.standard_fbm(0.3))) is None
    scaled = K.LimitProcessSpec(FractionalBrownian(0.5), premultiplier=2.0)
    assert K.closed_form("piterbarg", scaled, d=4.0) == pytest.approx(2.0)


def test_nonpositive_drift_rejected():
    with pytest.raises(DomainError):
        K.brownian_constant_oracles(0.0)
    with pytest.raises(DomainError):
        K.piterbarg(BM, d=-1.0, **FAST)


@pytest.mark.parametrize("S, expected", [(2.0, 1.9246602166562), (8.0, 1.2485578183214)])
def test_brownian_window_oracle_frozen(S, expected):
    assert brownian_pickands_window(S) == pytest.approx(expected, rel=1e-12)


def test_brownian_window_oracle_approaches_one_plus_two_over_s():
    # The gap to 1 + 2/S decays exponentially in S.
    assert brownian_pickands_window(32.0) == pytest.approx(1 + 2 / 32, rel=1e-6)
    assert brownian_pickands_window(128.0) == pytest.approx(1 + 2 / 128, rel=1e-12)


@pytest.mark.parametrize("proc, oracle", [(BM, brownian_pickands_window), (LINE, line_pickands_window)])
def test_pickands_window_against_oracle(proc, oracle):
    e = K.pickands(proc, S=4.0, grid_step=2.0**-6, reps=4000, seed=2)
    # A grid can only undershoot the line maximum, so allow a small bias there.
    assert abs(e.value - oracle(4.0)) < 3 * e.std_error + 0.005


@pytest.mark.parametrize("d", [0.5, 1.0, 3.0])
def test_brownian_piterbarg_a_monte_carlo(d):
    exact = K.brownian_constant_oracles(d, math.log(2))["piterbarg_a"]
    e = K.piterbarg_a(BM, d=d, a=math.log(2), **FAST)
    assert abs(e.value - exact) < 3 * e.std_error
    assert e.sup == "bridge"


def test_a_zero_is_bit_identical_to_plain_piterbarg():
    p = K.piterbarg(BM, d=1.0, **FAST)
    pa = K.piterbarg_a(BM, d=1.0, a=0.0, **FAST)
    assert pa.value == p.value and pa.std_error == p.std_error


def test_table_shares_paths_and_is_monotone_in_a():
    rows = K.piterbarg_table(BM, 1.0, [-math.inf, 0.0, 0.5, 1.0], **FAST)
    assert rows[0].kind == "piterbarg" and rows[0].value == rows[1].value
    vals = [r.value for r in rows]
    assert vals == sorted(vals)


def test_tilde_dominates_in_crude_mode():
    kw = dict(FAST, method="crude")
    p = K.piterbarg(BM, d=1.0, **kw)
    t = K.piterbarg_tilde(BM, d=1.0, a=0.5, **kw)
    assert t.value >= p.value
    assert t.value >= math.exp(0.5)


def test_empty_window_and_strong_drift():
    assert K.pickands(BM, S=0.0, grid_step=0.5, reps=10, seed=0).value == 1.0
    e = K.piterbarg(BM, d=1e6, S=1.0, grid_step=2.0**-6, reps=500, seed=0)
    assert e.value == pytest.approx(1.0, abs=1e-3)


def test_reproducible_and_thread_invariant():
    a = K.piterbarg(K.LimitProcessSpec(K.standard_fbm(0.3)), d=1.0, S=4.0, grid_step=2.0**-6,
                    reps=3000, seed=5, threads=1)
    b = K.piterbarg(K.LimitProcessSpec(K.standard_fbm(0.3)), d=1.0, S=4.0, grid_step=2.0**-6,
                    reps=3000, seed=5, threads=3)
    assert a == b


@pytest.mark.parametrize("kw, err", [(dict(grid_step=0.3), DomainError), (dict(reps=0), DomainError),
                                     (dict(budget=100), ResourceBudgetError),
                                     (dict(sup="bridge", proc=LINE), UnsupportedBranchError)])
def test_estimator_argument_checks(kw, err):
    args = dict(FAST, proc=BM, d=1.0)
    args.update(kw)
    with pytest.raises(err):
        K.piterbarg(**args)


def test_limiting_process_examples():
    s = QueueSpec(1.0, 0.0, FractionalBrownian(0.5))
    moderate = K.limiting_process(s, classify(s, OffsetFromPeak(0, 1)))
    np.testing.assert_allclose(moderate.variance([1.0, 4.0]), [1.0, 4.0], rtol=1e-12)
    short = K.limiting_process(s, classify(s, PowerLaw(1, 0.8)))
    assert short.power_law() == (0.5, 1.0)
    assert short.drift == pytest.approx(1.0)
    s = QueueSpec(1.0, 0.0, FractionalBrownian(0.75))
    assert K.limiting_process(s, classify(s, PowerLaw(1, 0.5))).power_law() == (0.75, 1.0)


def test_backlog_process_example():
    s = QueueSpec(1.0, 1.0, FractionalBrownian(0.5))
    proc, level = K.backlog_process(s, 0.5)
    assert proc.premultiplier == pytest.approx(3 / math.sqrt(2))
    assert proc.drift == pytest.approx(1.5)
    assert level == pytest.approx(3.0)
    # Rate a1**2 = 4.5 and drift 1.5 give an exponential supremum with parameter 4/3.
    assert K.closed_form("piterbarg", proc, proc.drift) == pytest.approx((4 / 3) / (1 / 3))


def test_cache_round_trip(tmp_path):
    proc = K.LimitProcessSpec(K.standard_fbm(0.3))
    q = K.ConstantQuery("piterbarg", proc, d=1.0)
    cache = K.ConstantsCache()
    with pytest.raises(ConstantRequiredError) as info:
        cache.resolve(q)
    assert info.value.query["kind"] == "piterbarg"
    small = K.estimate_query(q, S=2.0, grid_step=2.0**-5, reps=200, seed=0)
    big = K.estimate_query(q, S=2.0, grid_step=2.0**-5, reps=400, seed=0)
    cache.put(q, small)
    cache.put(q, big)
    assert cache.resolve(q) == (big.value, big)
    cache.save(tmp_path / "c.json")
    again = K.ConstantsCache.load(tmp_path / "c.json")
    assert len(again) == 2 and again.get(q) == big


def test_cache_auto_estimate():
    q = K.ConstantQuery("pickands", K.LimitProcessSpec(K.standard_fbm(0.3)))
    cache = K.ConstantsCache(auto_estimate=dict(S=2.0, grid_step=2.0**-5, reps=100, seed=0))
    value, est = cache.resolve(q)
    assert value > 0 and len(cache) == 1 and est.kind == "pickands"
    assert K.ConstantsCache().resolve(K.ConstantQuery("pickands", BM)) == (1.0, "closed-form")
