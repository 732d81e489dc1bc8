"""Poll/response exchange over a packet-erasure channel and per-sensor energy accounting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SECONDS_PER_YEAR = 365 * 24 * 3600
TIMESTEP_SECONDS = 1.0


class Protocol(str, enum.Enum):
    ID_BASED = "id"
    CONTENT_BASED = "content"

    @property
    def wake_messages(self) -> int:
        # the content-based poll carries two threshold messages after the ID
        return 3 if self is Protocol.CONTENT_BASED else 1

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown protocol {value!r} (expected 'id' or 'content')") from None


@dataclass(frozen=True)
class EnergyParams:
    """Energy costs in joules; defaults follow the 9000 mAh / 5 V LoRa-class node.

    ``per_poll_overhead_joules``, when set, is the total energy of an ID-based
    polled step in which the sensor transmits (it replaces ``E_t + E_s + E_w``).
    Content-based polls add ``2 E_w`` for the threshold messages and a silent
    poll saves ``E_t``.
    """

    e_tx: float = 0.05
    e_sense: float = 0.01
    e_wake: float = 0.01
    e_sleep: float = 0.001
    e_max: float = 162_000.0
    per_poll_overhead_joules: float | None = None

    def __post_init__(self):
        for name in ("e_tx", "e_sense", "e_wake", "e_sleep"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.e_max > 0:
            raise ValueError("e_max must be positive")
        if self.per_poll_overhead_joules is not None and not self.per_poll_overhead_joules >= self.e_tx:
            raise ValueError("per_poll_overhead_joules must be at least e_tx")

    def wake_cost(self, protocol: Protocol) -> float:
        """Energy of a polled step excluding the uplink transmission."""
        if self.per_poll_overhead_joules is not None:
            return self.per_poll_overhead_joules - self.e_tx + (protocol.wake_messages - 1) * self.e_wake
        return self.e_sense + protocol.wake_messages * self.e_wake


class OutcomeKind(enum.Enum):
    DELIVERED = "delivered"
    LOST = "lost"
    SILENT = "silent"


@dataclass(frozen=True)
class PollOutcome:
    kind: OutcomeKind
    sensor: int
    value: float | None = None

    @property
    def transmitted(self) -> bool:
        return self.kind is not OutcomeKind.SILENT

    @property
    def delivered(self) -> bool:
        return self.kind is OutcomeKind.DELIVERED


def simulate_poll(protocol: Protocol, spec, n: int, y_n: float, x_hat_n: float, theta: float,
                  rng: np.random.Generator) -> PollOutcome:
    """Play one poll of sensor ``n``.

    Content-based sensors stay silent when ``|y_n - x_hat_n| <= theta``; a
    transmission is then erased on the uplink with probability ``epsilon_n``.
    """
    if not 0 <= n < spec.n_sensors:
        raise IndexError(f"sensor index {n} out of range for {spec.n_sensors} sensors")
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if protocol is Protocol.CONTENT_BASED and abs(y_n - x_hat_n) <= theta:
        return PollOutcome(OutcomeKind.SILENT, n)
    if rng.random() < spec.epsilon[n]:
        return PollOutcome(OutcomeKind.LOST, n)
    return PollOutcome(OutcomeKind.DELIVERED, n, float(y_n))


@dataclass
class EnergyLedger:
    """Per-sensor poll/transmission counters over elapsed timesteps."""

    n_sensors: int
    polls: np.ndarray = field(default=None)
    transmissions: np.ndarray = field(default=None)
    silences: np.ndarray = field(default=None)
    total_steps: int = 0

    def __post_init__(self):
        for name in ("polls", "transmissions", "silences"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n_sensors, dtype=np.int64))

    def charge_step(self, outcomes) -> "EnergyLedger":
        """Book one timestep with the given poll outcomes (at most one per sensor)."""
        sensors = [o.sensor for o in outcomes]
        if len(set(sensors)) != len(sensors):
            raise ValueError("a sensor was polled more than once in the same timestep")
        self.total_steps += 1
        for o in outcomes:
            self.polls[o.sensor] += 1
            if o.transmitted:
                self.transmissions[o.sensor] += 1
            else:
                self.silences[o.sensor] += 1
        return self

    @classmethod
    def merged(cls, ledgers) -> "EnergyLedger":
        ledgers = list(ledgers)
        if not ledgers:
            raise ValueError("nothing to merge")
        out = cls(ledgers[0].n_sensors)
        for led in ledgers:
            out.polls += led.polls
            out.transmissions += led.transmissions
            out.silences += led.silences
            out.total_steps += led.total_steps
        return out

    @property
    def poll_fraction(self) -> np.ndarray:
        return self.polls / self.total_steps

    @property
    def tx_fraction(self) -> np.ndarray:
        return self.transmissions / self.total_steps


@dataclass(frozen=True)
class LifetimeReport:
    per_sensor_years: np.ndarray
    network_years: float


def mean_power(f_tx, f_wake, params: EnergyParams, protocol: Protocol) -> np.ndarray:
    """Average power draw (J per 1 s timestep) for transmit and poll fractions."""
    f_tx = np.asarray(f_tx, dtype=float)
    f_wake = np.asarray(f_wake, dtype=float)
    return f_tx * params.e_tx + f_wake * params.wake_cost(protocol) + (1.0 - f_wake) * params.e_sleep


def lifetime_from_fractions(f_tx, f_wake, params: EnergyParams, protocol: Protocol) -> LifetimeReport:
    power = mean_power(f_tx, f_wake, params, protocol)
    if np.any(power <= 0):
        raise ValueError("zero power draw: lifetime is unbounded")
    years = params.e_max / power * TIMESTEP_SECONDS / SECONDS_PER_YEAR
    return LifetimeReport(np.atleast_1d(years), float(np.mean(years)))


def lifetime(ledger: EnergyLedger, params: EnergyParams, protocol: Protocol) -> LifetimeReport:
    if ledger.total_steps <= 0:
        raise ValueError("lifetime needs at least one elapsed timestep")
    return lifetime_from_fractions(ledger.tx_fraction, ledger.poll_fraction, params, protocol)
