"""Driver instruction-filter tests: delay, offset, noise, clamping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringadvisory import driver

DT = 0.1
V_MAX = 35.0


def _buffer_with(advice_values):
    buf = driver.AdviceBuffer()
    for a in advice_values:
        buf.push(a)
    return buf


def test_trait_sampling_frequencies():
    rng = np.random.default_rng(0)
    samples = [driver.sample_traits(rng) for _ in range(10_000)]
    delays = np.array([s.reaction_delay for s in samples])
    offsets = np.array([s.offset for s in samples])
    for d in driver.REACTION_DELAYS:
        assert 0.18 <= np.mean(delays == d) <= 0.22
    for m in driver.OFFSETS:
        assert 0.12 <= np.mean(offsets == m) <= 0.165


def test_trait_sampling_deterministic():
    a = driver.sample_traits(np.random.default_rng(42))
    b = driver.sample_traits(np.random.default_rng(42))
    assert a == b


def test_pre_delay_window_returns_sentinel():
    traits = driver.DriverTraits(reaction_delay=2.0, offset=0.0, noise_enabled=False)
    buf = _buffer_with([10.0] * 30)
    assert driver.filter_advice(buf, 10, traits, np.random.default_rng(0), DT, V_MAX) is None


def test_delay_and_offset_applied():
    traits = driver.DriverTraits(reaction_delay=3.0, offset=-2.5, noise_enabled=False)
    buf = _buffer_with([10.0] * 100)
    for t in range(30, 100):
        out = driver.filter_advice(buf, t, traits, np.random.default_rng(0), DT, V_MAX)
        assert out == 7.5


def test_delayed_value_is_the_historic_advice():
    traits = driver.DriverTraits(reaction_delay=2.0, offset=0.0, noise_enabled=False)
    buf = _buffer_with(list(range(100)))
    assert driver.filter_advice(buf, 50, traits, np.random.default_rng(0), DT, V_MAX) == 30.0


def test_lower_clamp():
    traits = driver.DriverTraits(reaction_delay=2.0, offset=-7.5, noise_enabled=False)
    buf = _buffer_with([2.0] * 30)
    assert driver.filter_advice(buf, 25, traits, np.random.default_rng(0), DT, V_MAX) == 0.0


def test_perfect_follower_passthrough():
    buf = _buffer_with([8.65])
    out = driver.filter_advice(buf, 0, driver.PERFECT_FOLLOWER, np.random.default_rng(0), DT, V_MAX)
    assert out == 8.65


def test_noise_reproducible_and_fresh_each_step():
    traits = driver.DriverTraits(reaction_delay=0.0, offset=0.0, noise_enabled=True)
    buf = _buffer_with([10.0] * 10)
    a = [driver.filter_advice(buf, t, traits, np.random.default_rng(9), DT, V_MAX)
         for t in range(5)]
    rng = np.random.default_rng(9)
    b = [10.0 + rng.standard_normal() for _ in range(1)]
    assert a[0] == pytest.approx(np.clip(b[0], 0, V_MAX))
    rng2 = np.random.default_rng(9)
    seq = [driver.filter_advice(buf, t, traits, rng2, DT, V_MAX) for t in range(5)]
    assert len(set(seq)) > 1  # fresh draw each step


@given(
    st.sampled_from(driver.REACTION_DELAYS),
    st.sampled_from(driver.OFFSETS),
    st.floats(0.0, 35.0),
    st.integers(0, 2 ** 31 - 1),
)
@settings(max_examples=60, deadline=None)
def test_output_always_in_speed_range(delay, offset, advice, seed):
    traits = driver.DriverTraits(delay, offset, noise_enabled=True)
    buf = _buffer_with([advice] * 100)
    out = driver.filter_advice(buf, 99, traits, np.random.default_rng(seed), DT, V_MAX)
    assert 0.0 <= out <= V_MAX
