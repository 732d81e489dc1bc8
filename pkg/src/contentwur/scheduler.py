"""Greedy value-of-information poll scheduling.

The score of sensor ``n`` is the expected drop in ``trace(P)`` from polling
it, averaging over a delivered reading and a missing packet (silence or
erasure).  With ``c = P[:, n]`` and ``v = V / P_nn`` it reduces to

    p_silent * |c|^2 / P_nn * (1 - v)  +  (1 - eps_n) (1 - p_silent) * |P h_n|^2 / S_nn

so only ``v`` needs quadrature.  :func:`select_next` brackets ``v`` cheaply
and integrates only the candidates that can still win.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import Protocol
from .estimator import MIN_SILENT_PROBABILITY, FilterBelief, censored_variance_ratio_bracket
from .quadrature import QuadratureConfig, censored_moments
from .system import SystemSpec

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ScheduleContext:
    belief: FilterBelief
    already_polled: frozenset = field(default_factory=frozenset)
    theta_multiplier: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "already_polled", frozenset(self.already_polled))
        if not self.theta_multiplier >= 0:
            raise ValueError("theta_multiplier must be non-negative")


@dataclass(frozen=True)
class SensorScore:
    sensor: int
    expected_trace_reduction: float
    theta: float = 0.0
    variance_ratio: float | None = None


@dataclass
class _Terms:
    sensors: np.ndarray
    theta: np.ndarray
    p_silent: np.ndarray
    received_gain: np.ndarray
    censor_gain: np.ndarray
    r_ratio: np.ndarray


def threshold(belief: FilterBelief, n: int, theta_multiplier: float) -> float:
    return theta_multiplier * math.sqrt(max(float(belief.cov[n, n]), 0.0))


def _terms(ctx: ScheduleContext, spec: SystemSpec, protocol: Protocol, sensors) -> _Terms:
    sensors = np.asarray(sensors, dtype=np.int64)
    cov = ctx.belief.cov
    h = spec.H[sensors]
    ph = h @ cov                                  # rows are (P h_n)^T
    s = np.einsum("ij,ij->i", h, ph) + spec.R[sensors, sensors]
    eps = spec.epsilon[sensors]
    if protocol is Protocol.CONTENT_BASED and ctx.theta_multiplier > 0:
        if not spec.identity_observation:
            raise ValueError("content-based scheduling requires H = I")
        pnn = cov[sensors, sensors]
        theta = ctx.theta_multiplier * np.sqrt(pnn)
        p_sil = np.array([1.0 - math.erfc(t / math.sqrt(ss) * _INV_SQRT2) if t > 0 else 0.0
                          for t, ss in zip(theta, s)])
        col2 = np.einsum("ij,ij->i", ph, ph)
        with np.errstate(divide="ignore", invalid="ignore"):  # P_nn = 0 has p_sil = 0
            censor_gain = np.where(p_sil >= MIN_SILENT_PROBABILITY, p_sil * col2 / pnn, 0.0)
            r_ratio = np.sqrt(spec.R[sensors, sensors] / pnn)
    else:
        theta = np.zeros(sensors.size)
        p_sil = np.zeros(sensors.size)
        col2 = np.einsum("ij,ij->i", ph, ph)
        censor_gain = np.zeros(sensors.size)
        r_ratio = np.zeros(sensors.size)
    received_gain = (1.0 - eps) * (1.0 - p_sil) * np.divide(col2, s, out=np.zeros_like(s), where=s > 0)
    return _Terms(sensors, theta, p_sil, received_gain, censor_gain, r_ratio)


def _ratios(ctx: ScheduleContext, terms: _Terms, idx, quad: QuadratureConfig | None) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    mass, second = censored_moments(np.full(idx.size, ctx.theta_multiplier), terms.r_ratio[idx], quad)
    return second / mass


def _candidates(ctx: ScheduleContext, spec: SystemSpec) -> list[int]:
    return [n for n in range(spec.n_sensors) if n not in ctx.already_polled]


def score_sensor(ctx: ScheduleContext, spec: SystemSpec, n: int, protocol: Protocol,
                 quad: QuadratureConfig | None = None) -> SensorScore:
    """Expected trace reduction of polling sensor ``n`` (exact, no pruning)."""
    if not 0 <= n < spec.n_sensors:
        raise IndexError(f"sensor index {n} out of range for {spec.n_sensors} sensors")
    if n in ctx.already_polled:
        raise ValueError(f"sensor {n} was already polled in this timestep")
    t = _terms(ctx, spec, Protocol.parse(protocol), [n])
    ratio = None
    score = float(t.received_gain[0])
    if t.censor_gain[0] > 0:
        ratio = float(_ratios(ctx, t, [0], quad)[0])
        score += float(t.censor_gain[0]) * (1.0 - ratio)
    return SensorScore(n, score, float(t.theta[0]), ratio)


def score_all(ctx: ScheduleContext, spec: SystemSpec, protocol: Protocol,
              quad: QuadratureConfig | None = None) -> dict[int, float]:
    """Exact scores of every remaining candidate."""
    cands = _candidates(ctx, spec)
    t = _terms(ctx, spec, Protocol.parse(protocol), cands)
    scores = t.received_gain.copy()
    need = np.flatnonzero(t.censor_gain > 0)
    if need.size:
        scores[need] += t.censor_gain[need] * (1.0 - _ratios(ctx, t, need, quad))
    return {int(n): float(sc) for n, sc in zip(cands, scores)}


def select_next_scored(ctx: ScheduleContext, spec: SystemSpec, protocol: Protocol,
                       quad: QuadratureConfig | None = None) -> SensorScore:
    """Best candidate with its score; ties go to the lowest sensor index.

    Candidates whose score upper bound falls below an exactly computed score
    are discarded without quadrature; a discarded sensor can never be the argmax.
    """
    cands = _candidates(ctx, spec)
    if not cands:
        raise ValueError("no sensor left to poll in this timestep")
    t = _terms(ctx, spec, Protocol.parse(protocol), cands)
    exact = t.received_gain.copy()
    ratios = np.full(len(cands), np.nan)
    censored = t.censor_gain > 0
    if censored.any():
        pnn = ctx.belief.cov[t.sensors, t.sensors]
        v_lo, v_hi = censored_variance_ratio_bracket(pnn, spec.R[t.sensors, t.sensors], t.theta, quad)
        ub = t.received_gain + t.censor_gain * (1.0 - v_lo)
        lb = t.received_gain + t.censor_gain * (1.0 - v_hi)
        alive = censored & (ub >= lb.max())
        if alive.any():
            first = int(np.flatnonzero(alive)[np.argmax(ub[alive])])
            ratios[first] = _ratios(ctx, t, [first], quad)[0]
            best = max(exact[~censored].max(initial=-np.inf),
                       t.received_gain[first] + t.censor_gain[first] * (1.0 - ratios[first]))
            rest = np.flatnonzero(alive & (ub >= best))
            rest = rest[rest != first]
            if rest.size:
                ratios[rest] = _ratios(ctx, t, rest, quad)
        done = ~np.isnan(ratios)
        exact[done] += t.censor_gain[done] * (1.0 - ratios[done])
        # censored candidates never integrated cannot win; keep them out of the argmax
        exact[censored & ~done] = -np.inf
    k = int(np.argmax(exact))
    return SensorScore(int(t.sensors[k]), float(exact[k]), float(t.theta[k]),
                       None if np.isnan(ratios[k]) else float(ratios[k]))


def select_next(ctx: ScheduleContext, spec: SystemSpec, protocol: Protocol,
                quad: QuadratureConfig | None = None) -> int:
    return select_next_scored(ctx, spec, protocol, quad).sensor
