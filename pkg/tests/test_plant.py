"""Plant simulator: update equations, sensor faults, episode loop."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquafarm.plant import (
    ALL_OFF,
    ActuatorState,
    Channel,
    EpisodeAborted,
    EpisodeRng,
    FarmState,
    PlantParams,
    Quality,
    SensorConfig,
    SensorReading,
    read_sensors,
    run_episode,
    step_plant,
)

QUIET = SensorConfig(noise_sigma={ch: 0.0 for ch in Channel},
                     dropout_prob=0.0, spike_prob=0.0)


def make_params(**kw):
    return PlantParams(**kw)


class TestStepPlant:
    def test_motor_fill_minus_drain(self):
        # level 90, fill 5 %/min, drain 1 %/min, dt 60 s -> 94
        params = make_params(fill_rate_pct_per_min=5.0, drain_rate_pct_per_min=1.0)
        state = FarmState(water_level=90.0)
        nxt = step_plant(state, ActuatorState(motor_on=True), params, EpisodeRng(0))
        assert nxt.water_level == pytest.approx(94.0)

    def test_temp_fixed_point_at_ambient(self):
        params = make_params(ambient_temp_c=26.0)
        state = FarmState(water_temp_c=26.0)
        nxt = step_plant(state, ALL_OFF, params, EpisodeRng(0))
        assert nxt.water_temp_c == pytest.approx(26.0)

    def test_heater_adds_rate_times_dt(self):
        params = make_params(ambient_temp_c=26.0, heater_c_per_min=0.5)
        state = FarmState(water_temp_c=26.0)
        nxt = step_plant(state, ActuatorState(heater_on=True), params, EpisodeRng(0))
        assert nxt.water_temp_c == pytest.approx(26.5)

    def test_time_advances_by_dt(self):
        nxt = step_plant(FarmState(), ALL_OFF, make_params(dt_s=60.0), EpisodeRng(0))
        assert nxt.time_s == 60.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            step_plant(FarmState(water_temp_c=float("nan")), ALL_OFF, make_params(), EpisodeRng(0))
        with pytest.raises(ValueError):
            make_params(drain_rate_pct_per_min=float("inf")).validate()

    def test_identical_inputs_identical_output(self):
        params = make_params(ph_drift_per_min=0.05, disease_onset_prob_per_tick=0.01)
        a = step_plant(FarmState(), ALL_OFF, params, EpisodeRng(7))
        b = step_plant(FarmState(), ALL_OFF, params, EpisodeRng(7))
        assert a == b

    @pytest.mark.parametrize("device,attr,direction", [
        ("motor_on", "water_level", 1),
        ("heater_on", "water_temp_c", 1),
        ("cooler_on", "water_temp_c", -1),
        ("humidifier_on", "air_humidity_pct", 1),
        ("dehumidifier_on", "air_humidity_pct", -1),
    ])
    def test_monotone_actuator_response(self, device, attr, direction):
        params = make_params()
        state = FarmState(water_level=50.0, water_temp_c=26.0, air_humidity_pct=55.0)
        on = step_plant(state, ActuatorState(**{device: True}), params, EpisodeRng(3))
        off = step_plant(state, ALL_OFF, params, EpisodeRng(3))
        assert direction * (getattr(on, attr) - getattr(off, attr)) >= 0

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), steps=st.integers(1, 400))
    def test_ranges_hold_under_random_actuation(self, seed, steps):
        params = make_params(ph_drift_per_min=0.1, disease_onset_prob_per_tick=0.02)
        rng = EpisodeRng(seed)
        pick = np.random.default_rng(seed + 1)
        state = FarmState(water_level=float(pick.uniform(0, 100)))
        for _ in range(steps):
            act = ActuatorState(*(bool(b) for b in pick.integers(0, 2, size=5)))
            state = step_plant(state, act, params, rng)
            assert 0.0 <= state.water_level <= 100.0
            assert 0.0 <= state.air_humidity_pct <= 100.0
            assert 0.0 <= state.ph <= 14.0
            assert 0.0 <= state.behavior_score <= 1.0

    def test_ranges_hold_over_ten_thousand_steps(self):
        params = make_params(ph_drift_per_min=0.2, disease_onset_prob_per_tick=0.001)
        rng = EpisodeRng(99)
        pick = np.random.default_rng(100)
        state = FarmState(water_level=50.0)
        for _ in range(10_000):
            act = ActuatorState(*(bool(b) for b in pick.integers(0, 2, size=5)))
            state = step_plant(state, act, params, rng)
            assert 0.0 <= state.water_level <= 100.0
            assert 0.0 <= state.air_humidity_pct <= 100.0
            assert 0.0 <= state.ph <= 14.0
            assert 0.0 <= state.behavior_score <= 1.0

    def test_disease_onset_frequency(self):
        # Bernoulli per healthy tick: frequency within 3*sqrt(p(1-p)/N).
        p, n = 0.01, 100_000
        params = make_params(disease_onset_prob_per_tick=p)
        rng = EpisodeRng(42)
        healthy = FarmState(diseased=False)
        onsets = sum(step_plant(healthy, ALL_OFF, params, rng).diseased for _ in range(n))
        bound = 3 * math.sqrt(p * (1 - p) / n)
        assert abs(onsets / n - p) < bound

    def test_behavior_decays_when_diseased(self):
        params = make_params()
        rng = EpisodeRng(5)
        state = FarmState(diseased=True, behavior_score=0.8)
        for _ in range(200):
            state = step_plant(state, ALL_OFF, params, rng)
        assert state.behavior_score < 0.55


class TestReadSensors:
    def test_noiseless_matches_state_exactly(self):
        state = FarmState(water_level=61.5, water_temp_c=25.25, air_humidity_pct=48.0,
                          ph=7.05, behavior_score=0.77)
        readings = read_sensors(state, QUIET, EpisodeRng(0))
        assert len(readings) == len(Channel)
        for r in readings:
            assert r.quality is Quality.OK
            assert r.value == state.channel_value(r.channel)
            assert r.timestamp_s == state.time_s

    def test_full_dropout(self):
        cfg = SensorConfig(dropout_prob=1.0)
        for r in read_sensors(FarmState(), cfg, EpisodeRng(0)):
            assert r.quality is Quality.MISSING
            assert r.value is None

    def test_fixed_seed_reproduces_sequences(self):
        cfg = SensorConfig(dropout_prob=0.1, spike_prob=0.1)
        a = [read_sensors(FarmState(), cfg, EpisodeRng(11)) for _ in range(1)]
        b = [read_sensors(FarmState(), cfg, EpisodeRng(11)) for _ in range(1)]
        assert a == b

    def test_spike_displaces_by_magnitude(self):
        cfg = SensorConfig(noise_sigma={ch: 0.0 for ch in Channel},
                           spike_prob=1.0,
                           spike_magnitude={ch: 9.0 for ch in Channel})
        state = FarmState()
        for r in read_sensors(state, cfg, EpisodeRng(0)):
            assert r.quality is Quality.OK  # spikes are not pre-flagged
            assert abs(abs(r.value - state.channel_value(r.channel)) - 9.0) < 1e-12


class TestRunEpisode:
    def test_single_tick_log(self):
        log = run_episode(make_params(), QUIET, None, n_ticks=1)
        assert len(log.records) == 1

    def test_null_controller_drains_to_zero(self):
        params = make_params(drain_rate_pct_per_min=2.0)
        log = run_episode(params, QUIET, None, n_ticks=60,
                          initial=FarmState(water_level=10.0))
        levels = [r.state.water_level for r in log.records]
        for a, b in zip(levels, levels[1:]):
            assert b == pytest.approx(max(a - 2.0, 0.0))
        assert log.final_state.water_level == 0.0

    def test_deterministic_under_seed(self):
        params = make_params(seed=9, disease_onset_prob_per_tick=0.01)
        cfg = SensorConfig(dropout_prob=0.05, spike_prob=0.02)
        a = run_episode(params, cfg, None, n_ticks=50)
        b = run_episode(params, cfg, None, n_ticks=50)
        assert a.records == b.records
        assert a.final_state == b.final_state

    def test_controller_failure_preserves_partial_log(self):
        def bad_controller(i, readings):
            if i == 3:
                raise RuntimeError("boom")
            return None

        with pytest.raises(EpisodeAborted) as err:
            run_episode(make_params(), QUIET, bad_controller, n_ticks=10)
        assert err.value.tick_index == 3
        assert len(err.value.log.records) == 3

    def test_rejects_zero_ticks(self):
        with pytest.raises(ValueError):
            run_episode(make_params(), QUIET, None, n_ticks=0)
