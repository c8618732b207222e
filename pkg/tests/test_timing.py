import random
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from startlab.errors import InvalidRangeError, NegativeCompensationError
from startlab.timing import (
    ForeperiodRange,
    MonotonicClock,
    SimulatedClock,
    check_start_system_delay,
    compensate_latency_us,
    ms_to_us,
    round_photo_finish,
    sample_foreperiod,
)


class TestForeperiod:
    def test_never_outside_range_over_1e6_draws(self, rng):
        fp = ForeperiodRange()
        lo, hi = 3000, 2000
        for _ in range(1_000_000):
            v = sample_foreperiod(rng, fp)
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        assert 2000 <= lo and hi <= 3000
        assert lo == 2000 and hi == 3000  # both endpoints reachable

    def test_degenerate_two_value_range(self, rng):
        fp = ForeperiodRange(min_ms=2500, max_ms=2501)
        seen = {sample_foreperiod(rng, fp) for _ in range(200)}
        assert seen == {2500, 2501}

    def test_same_seed_same_draw(self):
        fp = ForeperiodRange()
        a = [sample_foreperiod(random.Random(77), fp) for _ in range(50)]
        b = [sample_foreperiod(random.Random(77), fp) for _ in range(50)]
        assert a == b

    def test_invalid_range_rejected(self):
        with pytest.raises(InvalidRangeError):
            ForeperiodRange(min_ms=3000, max_ms=3000)
        with pytest.raises(InvalidRangeError):
            ForeperiodRange(min_ms=3000, max_ms=2000)

    def test_uniformity_ks(self):
        # randomized PIT makes the null exactly uniform(0,1)
        fp = ForeperiodRange()
        rng = random.Random(4242)
        draws = np.array([sample_foreperiod(rng, fp) for _ in range(100_000)])
        jitter = np.random.default_rng(7).random(draws.size)
        u = (draws - fp.min_ms + jitter) / (fp.max_ms - fp.min_ms + 1)
        d, p = sps.kstest(u, "uniform")
        assert p > 0.01, f"KS rejected uniformity: D={d}, p={p}"


class TestCompensation:
    def test_solenoid_compensation(self):
        assert compensate_latency_us(ms_to_us(150.0), ms_to_us(8.7)) == ms_to_us(141.3)

    def test_zero_latency_is_identity(self):
        assert compensate_latency_us(123456, 0) == 123456

    def test_gap_widens_by_solenoid_startup(self):
        # raw visual - haptic gap of 15.1 ms becomes 23.8 ms once the haptic
        # channel sheds its 8.7 ms actuation delay
        visual_raw = ms_to_us(368.8)
        haptic_raw = visual_raw - ms_to_us(15.1)
        visual = compensate_latency_us(visual_raw, 0)
        haptic = compensate_latency_us(haptic_raw, ms_to_us(8.7))
        assert visual - haptic == ms_to_us(23.8)

    def test_latency_exceeding_measurement_rejected(self):
        with pytest.raises(NegativeCompensationError):
            compensate_latency_us(5000, 8700)

    @given(rt=st.integers(min_value=0, max_value=10**9), lat=st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=200)
    def test_add_then_compensate_roundtrips(self, rt, lat):
        assert compensate_latency_us(rt + lat, lat) == rt


class TestPhotoFinishRounding:
    def test_next_longer_hundredth(self):
        assert round_photo_finish(Decimal("1577.533")) == Decimal("1577.54")

    def test_exact_hundredth_unchanged(self):
        assert round_photo_finish(Decimal("10.800")) == Decimal("10.80")

    def test_haptic_fairness_value(self):
        assert round_photo_finish(Decimal("10.805")) == Decimal("10.81")

    def test_float_rejected(self):
        with pytest.raises(TypeError):
            round_photo_finish(10.805)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            round_photo_finish(Decimal("0"))

    @given(
        st.decimals(
            min_value=Decimal("0.001"),
            max_value=Decimal("100000"),
            allow_nan=False,
            allow_infinity=False,
            places=6,
        )
    )
    @settings(max_examples=300)
    def test_round_up_properties(self, t):
        rounded = round_photo_finish(t)
        assert rounded >= t
        assert rounded - t < Decimal("0.01")
        assert round_photo_finish(rounded) == rounded  # idempotent

    def test_monotone(self):
        values = [Decimal("10.800"), Decimal("10.801"), Decimal("10.805"), Decimal("10.81")]
        rounded = [round_photo_finish(v) for v in values]
        assert rounded == sorted(rounded)


class TestStartSystemDelayRule:
    def test_solenoid_non_compliant(self):
        verdict = check_start_system_delay(8700, constant=True)
        assert not verdict.compliant
        assert verdict.margin_us == -7700

    def test_boundary_compliant(self):
        verdict = check_start_system_delay(1000, constant=True)
        assert verdict.compliant
        assert verdict.margin_us == 0

    def test_fast_but_jittery_non_compliant(self):
        verdict = check_start_system_delay(500, constant=False)
        assert not verdict.compliant
        assert verdict.margin_us == 500


class TestClocks:
    def test_simulated_clock_steps(self):
        clock = SimulatedClock()
        assert clock.now_ms() == 0
        clock.advance(250)
        assert clock.now_ms() == 250
        clock.advance_to(1000)
        assert clock.now_ms() == 1000
        with pytest.raises(ValueError):
            clock.advance(-1)
        with pytest.raises(ValueError):
            clock.advance_to(10)

    def test_monotonic_clock_never_decreases(self):
        clock = MonotonicClock()
        a = clock.now_ms()
        b = clock.now_ms()
        assert b >= a >= 0
