"""Monte Carlo episodes, metric aggregation and (protocol, M, theta) sweeps."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyLedger, EnergyParams, OutcomeKind, Protocol, lifetime, simulate_poll
from .estimator import CensorSpec, FilterBelief, predict, update_no_packet, update_received
from .quadrature import QuadratureConfig
from .scheduler import ScheduleContext, select_next_scored
from .system import ProcessState, SystemSpec, build_benchmark, measure, step_process


@dataclass(frozen=True)
class ExperimentConfig:
    system: str | SystemSpec = "system1"
    n_sensors: int = 50
    protocol: Protocol = Protocol.CONTENT_BASED
    episodes: int = 100
    steps: int = 1000
    polls_per_step: int = 1
    theta_multiplier: float = 1.0
    energy: EnergyParams = field(default_factory=EnergyParams)
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if self.episodes < 1 or self.steps < 1:
            raise ValueError("episodes and steps must be at least 1")
        n = self.spec.n_sensors
        if not 1 <= self.polls_per_step <= n:
            raise ValueError(f"polls_per_step must be in [1, {n}], got {self.polls_per_step}")
        if not self.theta_multiplier >= 0:
            raise ValueError("theta_multiplier must be non-negative")
        if self.protocol is Protocol.CONTENT_BASED and not self.spec.identity_observation:
            raise ValueError("content-based polling requires H = I")

    @property
    def spec(self) -> SystemSpec:
        if isinstance(self.system, SystemSpec):
            return self.system
        return _benchmark(self.system, self.n_sensors)

    @property
    def effective_theta_multiplier(self) -> float:
        return self.theta_multiplier if self.protocol is Protocol.CONTENT_BASED else 0.0


_BENCHMARKS: dict[tuple[str, int], SystemSpec] = {}


def _benchmark(name: str, n: int) -> SystemSpec:
    key = (name, n)
    if key not in _BENCHMARKS:
        _BENCHMARKS[key] = build_benchmark(name, n)
    return _BENCHMARKS[key]


@dataclass
class EpisodeMetrics:
    sum_squared_error: float
    step_squared_error: np.ndarray
    ledger: EnergyLedger
    n_sensors: int

    @property
    def polls(self) -> np.ndarray:
        return self.ledger.polls

    @property
    def transmissions(self) -> np.ndarray:
        return self.ledger.transmissions

    @property
    def mse(self) -> float:
        return self.sum_squared_error / (self.step_squared_error.size * self.n_sensors)


@dataclass(frozen=True)
class ParetoPoint:
    protocol: Protocol
    polls_per_step: int
    theta_multiplier: float
    mean_mse: float
    mean_lifetime_years: float
    per_sensor_poll_freq: np.ndarray
    per_sensor_tx_freq: np.ndarray


@dataclass(frozen=True)
class AggregateResult:
    point: ParetoPoint
    episode_mse: np.ndarray


def episode_streams(base_seed: int, config_index: int, episode_index: int):
    """Random streams for one episode: ``(world, channel)``.

    The world stream (process and measurement noise) depends only on
    ``(base_seed, episode_index)`` so every configuration of a sweep tracks
    the same trajectories; the channel stream mixes in ``config_index``.
    """
    world = np.random.SeedSequence(int(base_seed), spawn_key=(0, int(episode_index)))
    channel = np.random.SeedSequence(int(base_seed), spawn_key=(1, int(config_index), int(episode_index)))
    return np.random.default_rng(world), np.random.default_rng(channel)


def episode_seed(base_seed: int, config_index: int, episode_index: int) -> int:
    """64-bit channel seed for a (base_seed, config_index, episode_index) tuple."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(1, int(config_index), int(episode_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def run_episode(cfg: ExperimentConfig, episode_index: int, config_index: int = 0) -> EpisodeMetrics:
    spec = cfg.spec
    n_sensors, dim = spec.n_sensors, spec.state_dim
    protocol = cfg.protocol
    c_theta = cfg.effective_theta_multiplier
    world_rng, channel_rng = episode_streams(cfg.base_seed, config_index, episode_index)

    truth = ProcessState(np.zeros(dim), 0)
    belief = FilterBelief.initial(dim)
    ledger = EnergyLedger(n_sensors)
    errors = np.empty(cfg.steps)
    for k in range(cfg.steps):
        truth = step_process(truth, spec, world_rng)
        y = measure(truth, spec, world_rng).y
        belief = predict(belief, spec)
        polled: set[int] = set()
        outcomes = []
        for _ in range(cfg.polls_per_step):
            ctx = ScheduleContext(belief, polled, c_theta)
            choice = select_next_scored(ctx, spec, protocol, cfg.quad)
            n = choice.sensor
            outcome = simulate_poll(protocol, spec, n, float(y[n]), float(belief.x_hat[n]),
                                    choice.theta, channel_rng)
            if outcome.kind is OutcomeKind.DELIVERED:
                belief = update_received(belief, spec, n, outcome.value)
            else:
                # silence and erasure look the same to the gateway
                belief = update_no_packet(belief, spec, CensorSpec(n, choice.theta), float(spec.epsilon[n]),
                                          cfg.quad, ratio=choice.variance_ratio)
            polled.add(n)
            outcomes.append(outcome)
        ledger.charge_step(outcomes)
        z = truth.x - belief.x_hat
        errors[k] = float(z @ z)
    return EpisodeMetrics(float(errors.sum()), errors, ledger, n_sensors)


def aggregate(cfg: ExperimentConfig, episodes: list[EpisodeMetrics]) -> AggregateResult:
    if not episodes:
        raise ValueError("aggregate needs at least one episode")
    n = episodes[0].n_sensors
    total_steps = sum(e.step_squared_error.size for e in episodes)
    mse = sum(e.sum_squared_error for e in episodes) / (total_steps * n)
    pooled = EnergyLedger.merged(e.ledger for e in episodes)
    life = lifetime(pooled, cfg.energy, cfg.protocol)
    point = ParetoPoint(
        protocol=cfg.protocol,
        polls_per_step=cfg.polls_per_step,
        theta_multiplier=cfg.effective_theta_multiplier,
        mean_mse=float(mse),
        mean_lifetime_years=life.network_years,
        per_sensor_poll_freq=pooled.poll_fraction,
        per_sensor_tx_freq=pooled.tx_fraction,
    )
    return AggregateResult(point, np.array([e.mse for e in episodes]))


def _job(args):
    cfg, episode_index, config_index = args
    return run_episode(cfg, episode_index, config_index)


def run_grid(grid: list[ExperimentConfig], jobs: int = 1) -> list[AggregateResult]:
    """Run every configuration of ``grid``; results keep the grid order."""
    if not grid:
        raise ValueError("empty experiment grid")
    tasks = [(cfg, e, ci) for ci, cfg in enumerate(grid) for e in range(cfg.episodes)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            metrics = list(pool.map(_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        metrics = [_job(t) for t in tasks]
    out, pos = [], 0
    for cfg in grid:
        out.append(aggregate(cfg, metrics[pos:pos + cfg.episodes]))
        pos += cfg.episodes
    return out


def sweep(grid: list[ExperimentConfig], jobs: int = 1) -> list[ParetoPoint]:
    """Pareto points of the grid, sorted by lifetime (ascending)."""
    points = [r.point for r in run_grid(grid, jobs)]
    return sorted(points, key=lambda p: (p.mean_lifetime_years, p.protocol.value,
                                         p.polls_per_step, p.theta_multiplier))


def expand_grid(base: ExperimentConfig, protocols, polls, thetas) -> list[ExperimentConfig]:
    """Cartesian grid; ID-based points ignore theta and appear once per M."""
    grid = []
    for proto in protocols:
        proto = Protocol.parse(proto)
        for m in polls:
            if proto is Protocol.ID_BASED:
                grid.append(replace(base, protocol=proto, polls_per_step=int(m), theta_multiplier=0.0))
            else:
                for c in thetas:
                    grid.append(replace(base, protocol=proto, polls_per_step=int(m), theta_multiplier=float(c)))
    return grid
