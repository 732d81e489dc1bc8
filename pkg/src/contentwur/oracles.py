"""Independent reference computations used to cross-check the simulator.

Nothing here calls the estimator or the quadrature kernel: fixed points come
from plain iteration, censored moments from truncated-normal formulas or
rejection sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


def lyapunov_fixed_point(a, q, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary covariance ``C = A C A^T + Q`` by fixed-point iteration."""
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    c = q.copy()
    for _ in range(max_iter):
        nxt = a @ c @ a.T + q
        if np.max(np.abs(nxt - c)) <= tol * max(1.0, np.max(np.abs(nxt))):
            return 0.5 * (nxt + nxt.T)
        c = nxt
    raise RuntimeError("Lyapunov iteration did not converge (is A stable?)")


def riccati_fixed_point(a, q, h, r, tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    """Steady-state posterior covariance when every sensor reports each step.

    Iterates ``P <- ((A P A^T + Q)^-1 + H^T R^-1 H)^-1`` (information form).
    """
    a, q, h, r = (np.asarray(m, dtype=float) for m in (a, q, h, r))
    info_obs = h.T @ np.linalg.solve(r, h)
    p = np.eye(a.shape[0])
    for _ in range(max_iter):
        prior = a @ p @ a.T + q
        nxt = np.linalg.inv(np.linalg.inv(prior) + info_obs)
        nxt = 0.5 * (nxt + nxt.T)
        if np.max(np.abs(nxt - p)) <= tol * max(1.0, np.max(np.abs(nxt))):
            return nxt
        p = nxt
    raise RuntimeError("Riccati iteration did not converge")


def truncated_normal_variance(half_width: float) -> float:
    """Variance of N(0, 1) restricted to ``[-half_width, half_width]``."""
    return float(stats.truncnorm(-half_width, half_width).var())


def censored_variance_closed_form(p: float, r: float, theta: float) -> float:
    """``Var(z | |z + w| <= theta)`` for ``z ~ N(0, p)``, ``w ~ N(0, r)``.

    ``z = (p / s) y + e`` with ``y = z + w``, ``s = p + r`` and ``e`` independent
    of ``y`` with variance ``p r / s``; conditioning on the band truncates ``y`` only.
    """
    s = p + r
    t = theta / math.sqrt(s)
    return (p / s) ** 2 * s * truncated_normal_variance(t) + p * r / s


def no_packet_variances(p: float, r: float, theta: float, epsilon: float) -> tuple[float, float]:
    """``(gateway rule, exact)`` scalar error variance after a poll without a packet.

    The gateway mixes the silent posterior with the prior ``p``.  The exact
    conditional variance instead mixes with ``Var(z | |z + w| > theta)``,
    because an erased packet can only come from an out-of-band reading.
    """
    s = p + r
    p_sil = 2.0 * stats.norm.cdf(theta / math.sqrt(s)) - 1.0
    q = p_sil / (p_sil + (1.0 - p_sil) * epsilon)
    v_in = censored_variance_closed_form(p, r, theta)
    v_out = (p - p_sil * v_in) / (1.0 - p_sil)
    return q * v_in + (1.0 - q) * p, q * v_in + (1.0 - q) * v_out


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: np.ndarray
    std_error: np.ndarray
    accepted: int


def mc_silent_probability(p: float, r: float, theta: float, samples: int,
                          rng: np.random.Generator) -> MonteCarloEstimate:
    z = rng.normal(0.0, math.sqrt(p), samples)
    w = rng.normal(0.0, math.sqrt(r), samples)
    hit = np.abs(z + w) <= theta
    f = hit.mean()
    return MonteCarloEstimate(np.array(f), np.array(math.sqrt(f * (1 - f) / samples)), int(hit.sum()))


def _sample_covariance(x: np.ndarray) -> MonteCarloEstimate:
    d = x - x.mean(axis=0)
    prods = d[:, :, None] * d[:, None, :]
    n = x.shape[0]
    return MonteCarloEstimate(prods.mean(axis=0) * n / (n - 1), prods.std(axis=0) / math.sqrt(n), n)


def mc_censored_covariance(cov, r_nn: float, n: int, theta: float, samples: int,
                           rng: np.random.Generator) -> MonteCarloEstimate:
    """Rejection estimate of ``Cov(z | |z_n + w_n| <= theta)`` for ``z ~ N(0, cov)``."""
    cov = np.asarray(cov, dtype=float)
    z = rng.multivariate_normal(np.zeros(cov.shape[0]), cov, size=samples, method="cholesky")
    w = rng.normal(0.0, math.sqrt(r_nn), samples)
    return _sample_covariance(z[np.abs(z[:, n] + w) <= theta])


def mc_no_packet_covariance(cov, r_nn: float, n: int, theta: float, epsilon: float, samples: int,
                            rng: np.random.Generator) -> MonteCarloEstimate:
    """Covariance of the error given that no packet arrived.

    A reading outside the band is transmitted and erased with probability ``epsilon``.
    """
    cov = np.asarray(cov, dtype=float)
    z = rng.multivariate_normal(np.zeros(cov.shape[0]), cov, size=samples, method="cholesky")
    w = rng.normal(0.0, math.sqrt(r_nn), samples)
    silent = np.abs(z[:, n] + w) <= theta
    lost = ~silent & (rng.random(samples) < epsilon)
    return _sample_covariance(z[silent | lost])


@dataclass(frozen=True)
class OracleComparison:
    name: str
    oracle: float
    implementation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.oracle - self.implementation) <= self.tolerance


def oracle_report(seed: int = 0, samples: int = 1_000_000) -> list[OracleComparison]:
    """Scalar spot checks of the estimator against the oracles above."""
    from .estimator import CensorSpec, FilterBelief, censored_covariance, silent_probability, update_no_packet
    from .system import SystemSpec, build_benchmark

    rng = np.random.default_rng(seed)
    out = []
    scalar = SystemSpec(np.array([[0.9]]), np.eye(1), np.eye(1), np.eye(1), np.array([0.04]))
    belief = FilterBelief(np.zeros(1), np.eye(1))
    censor = CensorSpec(0, 1.0)

    mc = mc_silent_probability(1.0, 1.0, 1.0, samples, rng)
    out.append(OracleComparison("silent probability (P=R=theta=1)", float(mc.value),
                                silent_probability(belief, scalar, censor), 3 * float(mc.std_error)))

    mc = mc_censored_covariance(np.eye(1), 1.0, 0, 1.0, samples, rng)
    out.append(OracleComparison("censored variance (P=R=theta=1)", float(mc.value[0, 0]),
                                float(censored_covariance(belief, scalar, censor)[0, 0]),
                                3 * float(mc.std_error[0, 0])))

    near_exact = SystemSpec(np.array([[0.9]]), np.eye(1), np.eye(1), np.array([[1e-12]]), np.array([0.0]))
    out.append(OracleComparison("censored variance (R->0, theta=1)", truncated_normal_variance(1.0),
                                float(censored_covariance(belief, near_exact, censor)[0, 0]), 1e-4))

    rule, exact = no_packet_variances(1.0, 1.0, 1.0, 0.04)
    out.append(OracleComparison("no-packet variance, gateway rule (eps=0.04)", rule,
                                float(update_no_packet(belief, scalar, censor, 0.04).cov[0, 0]), 1e-6))
    mc = mc_no_packet_covariance(np.eye(1), 1.0, 0, 1.0, 0.04, samples, rng)
    out.append(OracleComparison("no-packet variance, joint MC vs exact conditional", exact,
                                float(mc.value[0, 0]), 3 * float(mc.std_error[0, 0])))

    sys1 = build_benchmark("system1")
    lyap = lyapunov_fixed_point(sys1.A, sys1.Q)
    resid = lyap - sys1.A @ lyap @ sys1.A.T - sys1.Q
    out.append(OracleComparison("Lyapunov residual (system1)", 0.0, float(np.max(np.abs(resid))), 1e-8))
    return out
