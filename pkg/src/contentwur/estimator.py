"""Gateway-side Kalman tracker with silence-aware (censored) updates.

All functions are pure: they return a new :class:`FilterBelief` and never
modify their inputs.  Sensor indices are zero-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .quadrature import QuadratureConfig, QuadratureError, censored_moments
from .system import SystemSpec

MIN_SILENT_PROBABILITY = 1e-14
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def std_normal_cdf(x: float) -> float:
    """Phi(x), computed through erfc so that both tails keep relative accuracy."""
    return 0.5 * math.erfc(-x * _INV_SQRT2)


def std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class FilterBelief:
    x_hat: np.ndarray
    cov: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        x = np.array(self.x_hat, dtype=float)
        p = _sym(np.array(self.cov, dtype=float))
        if p.shape != (x.size, x.size):
            raise ValueError(f"covariance shape {p.shape} does not match state size {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
            raise ValueError("belief must have finite entries")
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "cov", p)

    @classmethod
    def initial(cls, state_dim: int) -> "FilterBelief":
        return cls(np.zeros(state_dim), np.eye(state_dim), 0)


@dataclass(frozen=True)
class CensorSpec:
    """Silent band ``[x_hat_n - theta, x_hat_n + theta]`` for sensor ``sensor``."""

    sensor: int
    theta: float

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError(f"theta must be non-negative, got {self.theta}")

    def thresholds(self, belief: FilterBelief) -> tuple[float, float]:
        centre = float(belief.x_hat[self.sensor])
        return centre - self.theta, centre + self.theta


@dataclass(frozen=True)
class NoUpdateProbabilities:
    p_silent: float
    p_silent_given_no_update: float
    p_no_update: float


def _check_dims(belief: FilterBelief, spec: SystemSpec):
    if belief.x_hat.shape != (spec.state_dim,):
        raise ValueError(f"belief has dimension {belief.x_hat.size}, system has {spec.state_dim}")


def _check_sensor(spec: SystemSpec, n: int):
    if not (0 <= n < spec.n_sensors):
        raise IndexError(f"sensor index {n} out of range for {spec.n_sensors} sensors")


def _require_identity_observation(spec: SystemSpec):
    if not spec.identity_observation:
        raise ValueError("censored updates are only defined for H = I")


def predict(belief: FilterBelief, spec: SystemSpec) -> FilterBelief:
    _check_dims(belief, spec)
    a = spec.A
    return FilterBelief(a @ belief.x_hat, a @ belief.cov @ a.T + spec.Q, belief.step_index + 1)


def innovation_variance(belief: FilterBelief, spec: SystemSpec, n: int) -> float:
    """Diagonal entry ``S_nn`` of ``H P H^T + R``."""
    _check_dims(belief, spec)
    _check_sensor(spec, n)
    h = spec.H[n]
    return float(h @ belief.cov @ h + spec.R[n, n])


def update_received(belief: FilterBelief, spec: SystemSpec, n: int, y_n: float) -> FilterBelief:
    """Scalar Kalman update with the reading ``y_n`` of sensor ``n``.

    A zero innovation variance means the reading is already known exactly
    (``P h = 0`` and no noise), so the belief is returned unchanged.
    """
    s = innovation_variance(belief, spec, n)
    if s == 0.0:
        return FilterBelief(belief.x_hat, belief.cov, belief.step_index)
    if not s > 0:
        raise ValueError(f"innovation variance of sensor {n} is negative ({s})")
    h = spec.H[n]
    ph = belief.cov @ h
    gain = ph / s
    x_new = belief.x_hat + gain * (float(y_n) - float(h @ belief.x_hat))
    p_new = belief.cov - np.outer(gain, ph)
    return FilterBelief(x_new, p_new, belief.step_index)


def silent_probability(belief: FilterBelief, spec: SystemSpec, censor: CensorSpec) -> float:
    """Probability that the reading falls inside the silent band.

    Uses the predictive spread ``sqrt(P_nn + R_nn)`` of the reading around the
    estimate, which is the exact normaliser of the censored error density.
    """
    _check_dims(belief, spec)
    _require_identity_observation(spec)
    n = censor.sensor
    _check_sensor(spec, n)
    if censor.theta == 0:
        return 0.0
    spread2 = float(belief.cov[n, n] + spec.R[n, n])
    if not spread2 > 0:
        raise ValueError("predictive variance of the reading must be positive")
    t = censor.theta / math.sqrt(spread2)
    # 2 Phi(t) - 1 == 1 - 2 Phi(-t); the latter keeps precision in the big-t limit
    return 1.0 - math.erfc(t * _INV_SQRT2)


def no_update_probabilities(p_silent: float, epsilon_n: float) -> NoUpdateProbabilities:
    if not (0.0 <= p_silent <= 1.0 and 0.0 <= epsilon_n <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    p_no_update = epsilon_n + (1.0 - epsilon_n) * p_silent
    denom = p_silent + (1.0 - p_silent) * epsilon_n
    given = p_silent / denom if denom > 0 else 0.0
    return NoUpdateProbabilities(p_silent, given, p_no_update)


def _standardized(belief: FilterBelief, spec: SystemSpec, censor: CensorSpec) -> tuple[float, float]:
    n = censor.sensor
    pnn = float(belief.cov[n, n])
    if not pnn > 0:
        raise ValueError(f"prior variance of sensor {n} must be positive for a censored update")
    rnn = float(spec.R[n, n])
    return censor.theta / math.sqrt(pnn), math.sqrt(max(rnn, 0.0) / pnn)


def censored_moments_for(belief: FilterBelief, spec: SystemSpec, censor: CensorSpec,
                         quad: QuadratureConfig | None = None) -> tuple[float, float]:
    """Quadrature ``(silent mass, V / P_nn)`` for one censored sensor."""
    _check_dims(belief, spec)
    _require_identity_observation(spec)
    _check_sensor(spec, censor.sensor)
    if not censor.theta > 0:
        raise ValueError("censored covariance needs theta > 0")
    c, r = _standardized(belief, spec, censor)
    mass, second = censored_moments(c, r, quad)
    if mass[0] < MIN_SILENT_PROBABILITY:
        raise QuadratureError(f"silent probability {mass[0]:.3e} too small to condition on")
    return float(mass[0]), float(second[0] / mass[0])


def censored_from_ratio(cov: np.ndarray, n: int, ratio: float) -> np.ndarray:
    """``P(|silent)`` given ``ratio = V / P_nn``.

    Row and column ``n`` scale by ``ratio``; the other entries lose the part of
    their covariance explained by ``z_n`` in proportion ``1 - ratio``.
    """
    col = cov[:, n]
    return _sym(cov - (1.0 - ratio) * np.outer(col, col) / cov[n, n])


def censored_covariance(belief: FilterBelief, spec: SystemSpec, censor: CensorSpec,
                        quad: QuadratureConfig | None = None) -> np.ndarray:
    _, ratio = censored_moments_for(belief, spec, censor, quad)
    return censored_from_ratio(belief.cov, censor.sensor, ratio)


def censored_variance_ratio_bracket(pnn, rnn, theta, quad: QuadratureConfig | None = None):
    """Interval ``lo <= V / P_nn <= hi`` that contains the quadrature value (array friendly).

    ``y = z + w`` is jointly Gaussian with ``z``, so with ``S = P + R`` and
    ``t = theta / sqrt(S)`` the censored second moment is
    ``V / P = R / S + (P / S) * (1 - 2 t phi(t) / (2 Phi(t) - 1))``.
    The interval is that value widened by a margin well above the quadrature
    tolerance; it is only used to discard poll candidates that cannot win.
    """
    quad = quad or QuadratureConfig()
    pnn = np.asarray(pnn, dtype=float)
    rnn = np.asarray(rnn, dtype=float)
    s = pnn + rnn
    t = np.asarray(theta, dtype=float) / np.sqrt(s)
    band = 1.0 - special.erfc(t * _INV_SQRT2)  # 2 Phi(t) - 1, the silent mass
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(band > 0, 1.0 - 2.0 * t * np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi) / band, 0.0)
        c2 = np.asarray(theta, dtype=float) ** 2 / pnn
        margin = 1e-7 + 100.0 * (quad.rel_tol + quad.abs_tol * (1.0 + c2) / band)
    v = rnn / s + pnn / s * np.clip(g, 0.0, 1.0)
    return v - margin, v + margin


def _erf_taylor9(x: float) -> float:
    """Order-9 Maclaurin polynomial of ``erf(x / sqrt(2))``.

    For ``0 <= x <= 1`` the series alternates with decreasing terms and ends on
    a positive term, so the polynomial is an upper bound there.
    """
    return math.sqrt(2.0 / math.pi) * (x - x**3 / 6.0 + x**5 / 40.0 - x**7 / 336.0 + x**9 / 3456.0)


def censored_variance_upper_bound(belief: FilterBelief, spec: SystemSpec, censor: CensorSpec) -> float:
    """Closed-form upper bound on ``V / P_nn`` from splitting the error axis at ``|z_n| = 1``.

    Tail part (``|z_n| > 1``): the in-band probability is at most
    ``Phi((-1 - theta)/sqrt(R)) + Phi((theta - 1)/sqrt(R))``, times the Gaussian
    second moment of the tails.  Central part: the in-band probability is at
    most its value at ``z_n = 0``, times the Gaussian second moment on
    ``[-1, 1]``, whose error function is taken from the order-9 Taylor
    polynomial when that polynomial is a valid upper bound (``1/sqrt(P_nn) <= 1``).
    """
    _check_dims(belief, spec)
    _require_identity_observation(spec)
    n = censor.sensor
    _check_sensor(spec, n)
    if not censor.theta > 0:
        raise ValueError("the bound needs theta > 0")
    p_sil = silent_probability(belief, spec, censor)
    if p_sil < MIN_SILENT_PROBABILITY:
        raise QuadratureError(f"silent probability {p_sil:.3e} too small to condition on")
    pnn = float(belief.cov[n, n])
    rnn = float(spec.R[n, n])
    theta = censor.theta
    sr = math.sqrt(rnn)
    if sr > 0:
        tail_band = std_normal_cdf((-1.0 - theta) / sr) + std_normal_cdf((theta - 1.0) / sr)
        centre_band = 1.0 - math.erfc(theta / sr * _INV_SQRT2)
    else:
        tail_band = 1.0 if theta >= 1.0 else 0.0
        centre_band = 1.0
    tail_band = min(tail_band, 1.0)

    t = 1.0 / math.sqrt(pnn)
    # standardized second moments of N(0, 1) beyond t and inside [-t, t]
    tail_m2 = t * std_normal_pdf(t) + 0.5 * math.erfc(t * _INV_SQRT2)
    erf_t = _erf_taylor9(t) if t <= 1.0 else math.erf(t * _INV_SQRT2)
    centre_m2 = erf_t - 2.0 * t * std_normal_pdf(t)
    return (2.0 * tail_band * tail_m2 + centre_band * centre_m2) / p_sil


def update_no_packet(belief: FilterBelief, spec: SystemSpec, censor: CensorSpec, epsilon_n: float,
                     quad: QuadratureConfig | None = None, ratio: float | None = None) -> FilterBelief:
    """Update after a poll that produced no packet (silence or erasure, indistinguishable).

    A silent probability below ``MIN_SILENT_PROBABILITY`` leaves the belief
    unchanged.  ``ratio`` (``V / P_nn``) may be passed when it was already computed for
    the same belief and threshold, e.g. by the scheduler.
    """
    n = censor.sensor
    if not 0.0 <= epsilon_n <= 1.0:
        raise ValueError(f"erasure probability must lie in [0, 1], got {epsilon_n}")
    if censor.theta == 0:
        return FilterBelief(belief.x_hat, belief.cov, belief.step_index)
    probs = no_update_probabilities(silent_probability(belief, spec, censor), epsilon_n)
    q = probs.p_silent_given_no_update
    # a band this narrow cannot be resolved numerically; the scheduler ignores it too
    if q == 0.0 or probs.p_silent < MIN_SILENT_PROBABILITY:
        return FilterBelief(belief.x_hat, belief.cov, belief.step_index)
    if ratio is None:
        _, ratio = censored_moments_for(belief, spec, censor, quad)
    col = belief.cov[:, n]
    p_new = belief.cov - q * (1.0 - ratio) * np.outer(col, col) / belief.cov[n, n]
    return FilterBelief(belief.x_hat, p_new, belief.step_index)
