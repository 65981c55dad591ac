import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerated_tail, exact_tail, scipy_tail
from reapsim.disturbance import (
    BlockErrorQuery,
    DeviceParams,
    SignConvention,
    accumulated_error_probability,
    binomial_tail,
    block_error_probability,
    mttf_from_ledger,
    read_disturbance_probability,
    reap_error_probability,
)


def physical(**kw):
    kw.setdefault("p_override", None)
    return DeviceParams(**kw)


# -- per-cell disturbance probability ---------------------------------------

@pytest.mark.parametrize("convention", list(SignConvention))
def test_eq1_at_critical_current(convention):
    params = physical(t_read=1.0, tau=1.0, i_read=100.0, i_c0=100.0, delta=60.0, sign_convention=convention)
    assert read_disturbance_probability(params) == pytest.approx(1 - math.exp(-1), rel=1e-12)


def test_eq1_zero_pulse():
    assert read_disturbance_probability(physical(t_read=0.0, i_read=99.0)) == 0.0


def test_eq1_below_critical_current():
    params = physical(t_read=10.0, tau=1.0, delta=40.0, i_read=80.0, i_c0=100.0)
    expected = -math.expm1(-10.0 * math.exp(-8.0))
    assert math.exp(-8.0) == pytest.approx(3.3546e-4, rel=1e-4)
    assert read_disturbance_probability(params) == pytest.approx(expected, rel=1e-12)
    assert read_disturbance_probability(params) == pytest.approx(3.349e-3, rel=1e-3)


def test_eq1_as_printed_sign_flips_current_dependence():
    low = physical(i_read=20.0, delta=10.0, sign_convention="as_printed")
    high = physical(i_read=80.0, delta=10.0, sign_convention="as_printed")
    assert read_disturbance_probability(low) > read_disturbance_probability(high)


def test_override_wins():
    assert read_disturbance_probability(DeviceParams(p_override=0.25, t_read=0.0)) == 0.25
    assert DeviceParams().p_cell == 1e-8


@pytest.mark.parametrize(
    "kwargs",
    [dict(tau=0.0), dict(delta=-1.0), dict(i_c0=0.0), dict(i_read=-1.0), dict(t_read=-1.0), dict(p_override=1.5)],
)
def test_device_params_rejected(kwargs):
    with pytest.raises(ValueError):
        DeviceParams(**kwargs)


@given(
    a=st.floats(0.0, 200.0), b=st.floats(0.0, 200.0),
    t=st.floats(0.0, 50.0), delta=st.floats(1.0, 80.0),
)
def test_eq1_monotone_standard(a, b, t, delta):
    lo, hi = sorted((a, b))
    p_lo = read_disturbance_probability(physical(i_read=lo, t_read=t, delta=delta))
    p_hi = read_disturbance_probability(physical(i_read=hi, t_read=t, delta=delta))
    assert 0.0 <= p_lo <= p_hi <= 1.0
    assert read_disturbance_probability(physical(i_read=lo, t_read=t + 1.0, delta=delta)) >= p_lo
    if lo <= 100.0:
        # Above the critical current the barrier term changes sign and larger delta speeds switching.
        assert read_disturbance_probability(physical(i_read=lo, t_read=t, delta=delta + 1.0)) <= p_lo


# -- binomial tail -----------------------------------------------------------

def test_tail_fair_coin():
    assert binomial_tail(4, 0.5, 2) == pytest.approx(11 / 16, rel=1e-12)
    assert enumerated_tail(4, 0.5, 2) == 11 / 16


@pytest.mark.parametrize("trials", [0, 1, 7, 1000])
@pytest.mark.parametrize("p", [0.0, 1e-9, 0.5, 1.0])
def test_tail_certain_event(trials, p):
    assert binomial_tail(trials, p, 0) == 1.0


def test_tail_above_trials_is_zero():
    assert binomial_tail(5, 0.9, 6) == 0.0


def test_tail_small_p_large_trials():
    assert binomial_tail(5000, 1e-8, 2) == pytest.approx(exact_tail(5000, 1e-8, 2), rel=1e-9)
    assert binomial_tail(5000, 1e-8, 2) == pytest.approx(1.2497e-9, rel=1e-4)


@pytest.mark.parametrize("trials", range(0, 13))
@pytest.mark.parametrize("p", [0.5, 0.1, 1e-3])
def test_tail_matches_enumeration(trials, p):
    for k in range(trials + 2):
        expected = enumerated_tail(trials, p, k)
        got = binomial_tail(trials, p, k)
        assert got == pytest.approx(expected, rel=1e-9, abs=0.0 if expected else 1e-300)


@settings(max_examples=300)
@given(trials=st.integers(0, 30), p=st.floats(1e-6, 1 - 1e-6), k=st.integers(0, 31))
def test_tail_matches_exact_rational(trials, p, k):
    expected = exact_tail(trials, p, k)
    assert binomial_tail(trials, p, k) == pytest.approx(expected, rel=1e-9, abs=1e-300)


@settings(max_examples=200)
@given(trials=st.integers(31, 200_000), p=st.sampled_from([1e-8, 1e-5, 1e-3, 0.05, 0.5, 0.97]),
       frac=st.floats(0.0, 1.0))
def test_tail_matches_scipy_large(trials, p, frac):
    k = int(frac * trials)
    expected = scipy_tail(trials, p, k)
    got = binomial_tail(trials, p, k)
    if expected > 1e-290:
        assert got == pytest.approx(expected, rel=1e-7)
    else:
        assert got < 1e-280


# -- block-level failure probabilities ---------------------------------------

def test_single_read_block_error_reference_value():
    value = block_error_probability(1e-8, 100, 1)
    assert value == pytest.approx(4.95e-13, rel=1e-3)
    assert value == pytest.approx(5.0e-13, rel=0.02)


def test_single_one_bit_is_always_correctable():
    assert block_error_probability(0.7, 1, 1) == 0.0


def test_single_small_block_exact():
    expected = sum(math.comb(8, i) * 1e-3**i * (1 - 1e-3) ** (8 - i) for i in range(2, 9))
    assert block_error_probability(1e-3, 8, 1) == pytest.approx(expected, rel=1e-12)
    assert block_error_probability(1e-3, 8, 1) == pytest.approx(exact_tail(8, 1e-3, 2), rel=1e-12)


def test_accumulated_reference_value():
    value = accumulated_error_probability(1e-8, 100, 50, 1)
    assert value == pytest.approx(1.2497e-9, rel=1e-4)
    assert value == pytest.approx(1.3e-9, rel=0.05)


def test_accumulated_small_block_exact():
    assert accumulated_error_probability(1e-3, 8, 4, 1) == pytest.approx(exact_tail(32, 1e-3, 2), rel=1e-10)


def test_reap_reference_value():
    reap = reap_error_probability(1e-8, 100, 50, 1)
    assert reap == pytest.approx(2.475e-11, rel=1e-3)
    assert reap == pytest.approx(2.6e-11, rel=0.10)
    assert accumulated_error_probability(1e-8, 100, 50, 1) / reap == pytest.approx(50.5, rel=0.01)


def test_reap_log_domain_extreme():
    e1 = block_error_probability(1e-15, 100, 1)
    value = reap_error_probability(1e-15, 100, 10**9, 1)
    assert math.isfinite(value) and value > 0
    assert value == pytest.approx(1e9 * e1, rel=1e-6)


def test_query_rejects_bad_inputs():
    with pytest.raises(ValueError):
        BlockErrorQuery(p=1.5, n=3)
    with pytest.raises(ValueError):
        BlockErrorQuery(p=0.1, n=3, reads=0)
    with pytest.raises(ValueError):
        accumulated_error_probability(0.1, -1, 1)


probs = st.floats(0.0, 1.0)
ns = st.integers(0, 600)
reads = st.integers(1, 500)
ts = st.integers(0, 4)


@given(p=probs, n=ns, r=reads, t=ts)
def test_outputs_are_probabilities(p, n, r, t):
    for value in (
        block_error_probability(p, n, t),
        accumulated_error_probability(p, n, r, t),
        reap_error_probability(p, n, r, t),
    ):
        assert 0.0 <= value <= 1.0


@given(p=probs, n=ns, t=ts)
def test_reads_one_degenerates_bit_for_bit(p, n, t):
    single = block_error_probability(p, n, t)
    assert accumulated_error_probability(p, n, 1, t) == single
    assert reap_error_probability(p, n, 1, t) == single


@given(p=st.floats(0.0, 0.2), n=st.integers(0, 300), t=ts, dp=st.floats(0.0, 0.1), dn=st.integers(0, 50))
def test_block_error_monotone(p, n, t, dp, dn):
    base = block_error_probability(p, n, t)
    rel = 1e-12
    assert block_error_probability(min(1.0, p + dp), n, t) >= base * (1 - rel)
    assert block_error_probability(p, n + dn, t) >= base * (1 - rel)
    assert block_error_probability(p, n, t + 1) <= base * (1 + rel)


@given(p=st.floats(1e-9, 0.05), n=st.integers(1, 200), r=st.integers(1, 300), t=ts)
def test_accumulated_nondecreasing_in_reads(p, n, r, t):
    a = accumulated_error_probability(p, n, r, t)
    b = accumulated_error_probability(p, n, r + 1, t)
    assert b >= a * (1 - 1e-12)


@given(p=st.floats(1e-12, 0.999), n=st.integers(2, 300), r=st.integers(1, 400), t=ts)
def test_reap_never_worse(p, n, r, t):
    reap = reap_error_probability(p, n, r, t)
    acc = accumulated_error_probability(p, n, r, t)
    assert reap <= acc * (1 + 1e-9)


def test_mttf_examples():
    assert mttf_from_ledger(4e-9, 1e6) == pytest.approx(2.5e14)
    assert mttf_from_ledger(0.0, 1e6) == math.inf
    e_conv = accumulated_error_probability(1e-8, 100, 50)
    e_reap = reap_error_probability(1e-8, 100, 50)
    ratio = mttf_from_ledger(e_reap, 1e6) / mttf_from_ledger(e_conv, 1e6)
    assert ratio == pytest.approx(e_conv / e_reap, rel=1e-12)
    assert ratio == pytest.approx(50.5, rel=0.01)
    with pytest.raises(ValueError):
        mttf_from_ledger(-1.0, 1.0)
    with pytest.raises(ValueError):
        mttf_from_ledger(1.0, 0.0)
