import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contentwur.energy import (
    SECONDS_PER_YEAR, EnergyLedger, EnergyParams, OutcomeKind, PollOutcome, Protocol, lifetime,
    lifetime_from_fractions, mean_power, simulate_poll,
)

from conftest import make_spec

ID, CONTENT = Protocol.ID_BASED, Protocol.CONTENT_BASED


def spec_with(eps):
    return make_spec([[0.5]], [[1.0]], [[1.0]], [eps])


class TestProtocol:
    def test_parse(self):
        assert Protocol.parse("ID") is ID and Protocol.parse(CONTENT) is CONTENT
        with pytest.raises(ValueError, match="unknown protocol"):
            Protocol.parse("lora")

    def test_wake_messages(self):
        assert ID.wake_messages == 1 and CONTENT.wake_messages == 3


class TestSimulatePoll:
    def test_silent_inside_band(self, rng):
        out = simulate_poll(CONTENT, spec_with(0.5), 0, 1.0, 1.0, 0.3, rng)
        assert out.kind is OutcomeKind.SILENT and not out.transmitted

    def test_boundary_counts_as_silent(self, rng):
        assert simulate_poll(CONTENT, spec_with(0.0), 0, 1.5, 1.0, 0.5, rng).kind is OutcomeKind.SILENT

    def test_silence_consumes_no_randomness(self):
        a, b = np.random.default_rng(3), np.random.default_rng(3)
        simulate_poll(CONTENT, spec_with(0.5), 0, 0.0, 0.0, 1.0, a)
        assert a.random() == b.random()

    def test_delivered_outside_band(self, rng):
        out = simulate_poll(CONTENT, spec_with(0.0), 0, 3.0, 1.0, 0.5, rng)
        assert out.kind is OutcomeKind.DELIVERED and out.value == 3.0 and out.delivered

    def test_id_ignores_threshold(self, rng):
        assert simulate_poll(ID, spec_with(0.0), 0, 1.0, 1.0, 5.0, rng).kind is OutcomeKind.DELIVERED

    def test_always_lost(self, rng):
        outs = [simulate_poll(ID, spec_with(1.0), 0, 0.0, 0.0, 0.0, rng) for _ in range(100)]
        assert all(o.kind is OutcomeKind.LOST and o.transmitted and not o.delivered for o in outs)

    def test_loss_frequency(self, rng):
        n = 100_000
        lost = sum(simulate_poll(ID, spec_with(0.04), 0, 0.0, 0.0, 0.0, rng).kind is OutcomeKind.LOST
                   for _ in range(n))
        assert abs(lost / n - 0.04) < 3 * math.sqrt(0.04 * 0.96 / n)

    def test_transmit_fraction_matches_silence_probability(self, rng):
        # static belief: x_hat = 0, P = 1, R = 1, theta = 1 -> p_silent = 2 Phi(1/sqrt 2) - 1
        n = 100_000
        y = rng.normal(size=n) + rng.normal(size=n)
        tx = sum(simulate_poll(CONTENT, spec_with(0.0), 0, float(v), 0.0, 1.0, rng).transmitted for v in y)
        p_tx = 1 - 0.5204998778130465
        assert abs(tx / n - p_tx) < 3 * math.sqrt(p_tx * (1 - p_tx) / n)

    def test_errors(self, rng):
        with pytest.raises(IndexError):
            simulate_poll(ID, spec_with(0.0), 1, 0.0, 0.0, 0.0, rng)
        with pytest.raises(ValueError):
            simulate_poll(CONTENT, spec_with(0.0), 0, 0.0, 0.0, -1.0, rng)


class TestLedger:
    def test_empty_step(self):
        led = EnergyLedger(3).charge_step([])
        assert led.total_steps == 1 and led.polls.sum() == 0

    def test_silent_and_lost(self):
        led = EnergyLedger(2).charge_step([PollOutcome(OutcomeKind.SILENT, 0), PollOutcome(OutcomeKind.LOST, 1)])
        assert list(led.polls) == [1, 1]
        assert list(led.transmissions) == [0, 1]
        assert list(led.silences) == [1, 0]

    def test_duplicate_poll(self):
        with pytest.raises(ValueError, match="more than once"):
            EnergyLedger(2).charge_step([PollOutcome(OutcomeKind.SILENT, 0)] * 2)

    def test_merge(self):
        a = EnergyLedger(2).charge_step([PollOutcome(OutcomeKind.DELIVERED, 0, 1.0)])
        b = EnergyLedger(2).charge_step([PollOutcome(OutcomeKind.SILENT, 1)]).charge_step([])
        m = EnergyLedger.merged([a, b])
        assert m.total_steps == 3 and list(m.polls) == [1, 1] and list(m.transmissions) == [1, 0]
        assert np.allclose(m.poll_fraction, [1 / 3, 1 / 3])


class TestLifetime:
    def test_idle(self):
        years = lifetime_from_fractions([0.0], [0.0], EnergyParams(), ID).network_years
        assert f"{years:.4g}" == "5.137"

    def test_content_full_duty(self):
        p = EnergyParams()
        assert mean_power(1.0, 1.0, p, CONTENT) == pytest.approx(0.09)
        assert f"{lifetime_from_fractions([1.0], [1.0], p, CONTENT).network_years:.3g}" == "0.0571"

    def test_id_one_poll_per_step(self):
        p = EnergyParams()
        assert mean_power(0.02, 0.02, p, ID) == pytest.approx(0.00238)
        assert f"{lifetime_from_fractions([0.02], [0.02], p, ID).network_years:.4g}" == "2.158"

    def test_year_length(self):
        assert SECONDS_PER_YEAR == 31_536_000

    def test_override_matches_plotted_id_points(self):
        p = EnergyParams(per_poll_overhead_joules=0.060)
        assert lifetime_from_fractions([0.02], [0.02], p, ID).network_years == pytest.approx(2.356, rel=5e-3)
        assert lifetime_from_fractions([1.0], [1.0], p, ID).network_years == pytest.approx(0.0856, rel=5e-3)

    def test_override_keeps_threshold_overhead(self):
        p = EnergyParams(per_poll_overhead_joules=0.060)
        assert p.wake_cost(CONTENT) - p.wake_cost(ID) == pytest.approx(2 * p.e_wake)

    def test_network_is_mean_of_sensors(self):
        led = EnergyLedger(2)
        for _ in range(10):
            led.charge_step([PollOutcome(OutcomeKind.DELIVERED, 0, 0.0)])
        rep = lifetime(led, EnergyParams(), ID)
        assert rep.network_years == pytest.approx(rep.per_sensor_years.mean())
        assert rep.per_sensor_years[1] == pytest.approx(162000 / 0.001 / SECONDS_PER_YEAR)

    def test_errors(self):
        with pytest.raises(ValueError, match="at least one"):
            lifetime(EnergyLedger(1), EnergyParams(), ID)
        with pytest.raises(ValueError, match="unbounded"):
            lifetime_from_fractions([0.0], [0.0], EnergyParams(e_sleep=0.0), ID)
        with pytest.raises(ValueError):
            EnergyParams(e_max=0.0)
        with pytest.raises(ValueError):
            EnergyParams(e_tx=-0.1)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5))
    def test_monotone_in_fractions(self, f_w, frac, d):
        p = EnergyParams()
        f_t = f_w * frac
        base = lifetime_from_fractions([f_t], [f_w], p, CONTENT).network_years
        more_tx = lifetime_from_fractions([min(f_t + d, f_w)], [f_w], p, CONTENT).network_years
        more_polls = lifetime_from_fractions([f_t], [min(f_w + d, 1.0)], p, CONTENT).network_years
        assert more_tx <= base and more_polls <= base

    @given(st.floats(1e-3, 1))
    def test_content_overhead_costs_lifetime(self, f):
        p = EnergyParams()
        assert (lifetime_from_fractions([f], [f], p, CONTENT).network_years
                < lifetime_from_fractions([f], [f], p, ID).network_years)
