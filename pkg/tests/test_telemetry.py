import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpustress import telemetry
from gpustress.model import TelemetrySample
from gpustress.synthgen import generate, preset, presets


def series(t, power=None, energy=None, clock=None, temp=50.0):
    n = len(t)
    power = np.zeros(n) if power is None else power
    energy = np.zeros(n) if energy is None else energy
    clock = np.full(n, 2000.0) if clock is None else clock
    return [TelemetrySample(float(a), temp, float(p), float(e), float(c))
            for a, p, e, c in zip(t, power, energy, clock)]


def test_energy_example():
    tel = series([0.0, 150.0, 300.0], energy=[1000.0, 5000.0, 8120.0])
    total, rate = telemetry.energy(tel)
    assert total == pytest.approx(7.12, abs=1e-12)
    assert rate == pytest.approx(23.73, abs=0.005)


def test_energy_equal_readings_and_errors():
    assert telemetry.energy(series([0.0, 10.0], energy=[5.0, 5.0])) == (0.0, 0.0)
    with pytest.raises(ValueError, match="1"):
        telemetry.energy(series([0.0, 1.0, 2.0], energy=[5.0, 4.0, 6.0]))


def test_energy_from_power_closed_forms():
    t = np.arange(301.0)
    assert telemetry.energy_from_power(series(t, power=np.full(301, 100.0))) == \
        pytest.approx(30.0, rel=1e-12)
    t = np.arange(101.0)
    assert telemetry.energy_from_power(series(t, power=t.copy())) == pytest.approx(5.0, rel=1e-12)


def test_delta_cf_examples():
    assert telemetry.delta_cf(series(range(10))) == 0.0
    # peak 2460, mean 1720: half the samples at 2460, half at 980
    clock = np.array([2460.0, 980.0] * 50)
    assert telemetry.delta_cf(series(range(100), clock=clock)) == pytest.approx(740.0, abs=1e-9)


def test_preset_traces():
    assert 4.82 <= telemetry.energy(generate(preset("gaussian")).telemetry)[0] <= 4.94
    assert 70.0 <= telemetry.delta_cf(generate(preset("hotspot")).telemetry) <= 90.0


def test_counter_matches_power_integral_on_every_preset():
    for p in presets():
        tel = generate(p).telemetry
        total, _ = telemetry.energy(tel)
        assert telemetry.energy_from_power(tel) == pytest.approx(total, rel=1e-9), p.name


@settings(max_examples=200)
@given(st.lists(st.floats(0.0, 3000.0), min_size=2, max_size=50))
def test_delta_cf_nonnegative_zero_iff_constant(clocks):
    d = telemetry.delta_cf(series(range(len(clocks)), clock=np.array(clocks)))
    assert d >= 0.0
    assert (d == 0.0) == (len(set(clocks)) == 1)


@settings(max_examples=200)
@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=30),
       st.lists(st.floats(0.0, 500.0), min_size=30, max_size=30))
def test_rate_is_total_over_span(dts, increments):
    t = np.concatenate([[0.0], np.cumsum(dts)])
    e = np.concatenate([[0.0], np.cumsum(increments[:len(dts)])])
    tel = series(t, energy=e)
    total, rate = telemetry.energy(tel)
    assert rate == pytest.approx(total * 1000.0 / (t[-1] - t[0]), rel=1e-12)
    # dropping interior samples keeps the endpoints and therefore the total
    assert telemetry.energy([tel[0], tel[-1]])[0] == total


def test_delta_cf_subnormal_spread_stays_positive():
    assert telemetry.delta_cf(series(range(2), clock=np.array([0.0, 5e-324]))) > 0.0
