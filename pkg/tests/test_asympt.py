import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import d_riemann
from scipy.stats import norm

from gfq import asympt as A
from gfq import geometry as G
from gfq import regimes as R
from gfq.constants import ConstantsCache
from gfq.errors import ConstantRequiredError, DomainError, RegimeBoundaryError, UnsupportedBranchError
from gfq.variance_models import FractionalBrownian


def fbm(H=0.5, c=1.0, x=0.0):
    return G.QueueSpec(c, x, FractionalBrownian(H))


@pytest.fixture(scope="module")
def auto_cache():
    return ConstantsCache(auto_estimate=dict(S=4.0, grid_step=2.0**-5, reps=200, seed=0))


def test_moderate_empty_frozen_closed_form():
    u = 100.0
    got = A.approx_dispatch(fbm(), R.OffsetFromPeak(0, 1), u)
    expected = math.log(0.5) + 0.5 * math.log(8 * math.pi) + 0.5 * math.log(u) + G.gauss_tail_log(2 * math.sqrt(u))
    assert got.log_value == pytest.approx(expected, rel=1e-13)
    assert got.formula_id == "moderate-empty-point"


def test_short_empty_brownian_values():
    u = 1e4
    spec = fbm()
    m = G.m(spec, u, u**0.8)
    point = A.approx_dispatch(spec, R.PowerLaw(1, 0.8), u, "point")
    sup = A.approx_dispatch(spec, R.PowerLaw(1, 0.8), u, "sup")
    assert point.log_value == pytest.approx(math.log(2) + G.gauss_tail_log(m), rel=1e-13)
    assert sup.log_value == pytest.approx(2 * math.log(2) + G.gauss_tail_log(m), rel=1e-13)
    assert sup.formula_id == "short-empty-sup:omega-finite"


def test_fixed_horizon():
    got = A.approx_dispatch(fbm(x=1.0), R.FixedT(4), 10.0)
    assert got.log_value == pytest.approx(G.gauss_tail_log(6.5), rel=1e-14)
    assert got.formula_id == "fixed-horizon-point"
    sup = A.approx_dispatch(fbm(x=1.0), R.FixedT(4), 10.0, "sup")
    assert sup.delegate_to_mc
    with pytest.raises(UnsupportedBranchError):
        A.approx_dispatch(fbm(), R.FixedT(4), 10.0)


def test_backlog_delegations():
    u, spec, empty = 1e4, fbm(x=1.0), fbm()
    fam = R.PowerLaw(1, 0.5)
    sup = A.approx_dispatch(spec, fam, u, "sup")
    assert sup.formula_id == "short-backlog-sup:phi-zero"
    assert sup.log_value == pytest.approx(A.approx_short_empty(empty, fam, u, level=u - 1.0).log_value, rel=1e-14)
    far = R.OffsetFromPeak(1, 1)
    assert A.approx_dispatch(spec, far, u).log_value == A.approx_dispatch(empty, far, u).log_value
    assert A.approx_dispatch(spec, far, u).formula_id == "moderate-backlog-point:alpha-ge-half"


@pytest.mark.parametrize("family_of, target", [
    (lambda s: R.OffsetFromPeak(R.threshold_point(s), 0.5), "point"),
    (lambda s: R.ExpScale(R.threshold_sup(s)), "sup"),
])
def test_equal_branch_sum_decomposition(auto_cache, family_of, target):
    spec = fbm(0.25, x=1.0)
    got = A.approx_dispatch(spec, family_of(spec), 1e4, target, auto_cache)
    assert got.formula_id.endswith(":equal")
    assert np.logaddexp(*got.sum_decomposition) == pytest.approx(got.log_value, rel=1e-12)


def test_non_brownian_constant_needs_cache():
    with pytest.raises(ConstantRequiredError):
        A.approx_dispatch(fbm(0.25), R.PowerLaw(1, 0.5), 1e4, "sup", ConstantsCache())


@pytest.mark.parametrize("family, target", [
    (R.OffsetFromPeak(0, 1), "point"), (R.OffsetFromPeak(-2, 0.5), "sup"), (R.PowerLaw(1, 0.8), "point"),
    (R.PowerLaw(0.5, 1), "sup"), (R.PowerLaw(2, 1), "sup"),
])
def test_decreasing_in_level(family, target):
    vals = [A.approx_dispatch(fbm(), family, u, target).log_value for u in (1e2, 1e3, 1e4, 1e5)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_bad_target_and_boundary():
    with pytest.raises(DomainError):
        A.approx_dispatch(fbm(), R.PowerLaw(1, 0.8), 10.0, "mean")
    with pytest.raises(RegimeBoundaryError):
        A.approx_dispatch(fbm(), R.PowerLaw(1, 1), 10.0)


@pytest.mark.parametrize("z0", [-6.0, -1.0, 0.0, 1.0, 3.0])
def test_d_integral_against_riemann(z0):
    assert A.d_integral(z0) == pytest.approx(d_riemann(z0), abs=1e-8)


def test_d_integral_limits():
    assert A.d_integral(0.0) == pytest.approx(0.5, rel=1e-14)
    # Integrating sqrt(pi) Phi(sqrt(2) z) by parts gives a closed form.
    for z in (5.0, 50.0):
        r = math.sqrt(2) * z
        exact = math.sqrt(math.pi) * (z * norm.cdf(r) + norm.pdf(r) / math.sqrt(2))
        assert A.d_integral(z) == pytest.approx(exact, rel=1e-12)
    with mp.workdps(60):
        z = mp.mpf(-30)
        r = mp.sqrt(2) * z
        exact = mp.log(mp.sqrt(mp.pi) * (z * mp.ncdf(r) + mp.npdf(r) / mp.sqrt(2)))
    assert A.log_d_integral(-30.0) == pytest.approx(float(exact), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-20.0, 20.0), st.floats(0.01, 5.0))
def test_d_integral_increasing(z0, dz):
    assert A.log_d_integral(z0 + dz) > A.log_d_integral(z0)


def test_shift_exponent():
    assert A.shift_exponent(fbm(), 100.0, 1.0) == pytest.approx(2.0, rel=1e-14)
    assert A.shift_exponent(fbm(), 100.0, 0.0) == 0.0
    s = fbm(0.25)
    assert A.shift_exponent(s, 1e6, 1.0) / A.shift_exponent_limit(s, 1e6, 1.0) == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(DomainError):
        A.shift_exponent(fbm(), 1.0, 2.0)


@pytest.mark.parametrize("family, point, sup, flags", [
    (R.OffsetFromPeak(0, 1), 0.5, 0.0, ["degenerate-prefactor"]),
    (R.PowerLaw(2, 1), 1.0, 0.5, []),
])
def test_stationary_ratio_examples(family, point, sup, flags):
    got = A.stationary_ratio(fbm(), family)
    assert got["point"]["factor"] == pytest.approx(point)
    assert got["sup"]["factor"] == pytest.approx(sup)
    assert got["sup"]["flags"] == flags


def test_stationary_ratio_short_is_not_applicable():
    got = A.stationary_ratio(fbm(), R.PowerLaw(1, 0.5))
    assert got["point"]["relation"] == "n/a" and got["point"]["factor"] is None


def test_stationary_reference():
    assert A.stationary_reference_log(fbm(c=2.0), 3.0) == pytest.approx(-12.0)
    with pytest.raises(UnsupportedBranchError):
        A.stationary_reference_log(fbm(0.75), 3.0)


def test_estimate_serialises():
    d = A.approx_dispatch(fbm(), R.PowerLaw(1, 0.8), 10.0).to_dict()
    assert d["formula_id"] == "short-empty-point:omega-finite"
    assert math.exp(d["log_value"]) == pytest.approx(A.approx_dispatch(fbm(), R.PowerLaw(1, 0.8), 10.0).value)
