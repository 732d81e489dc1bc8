"""Ground-truth linear Gaussian process, its measurements, and the benchmark systems."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

PSD_TOL = 1e-9


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def psd_factor(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """Return ``L`` with ``L @ L.T == cov`` for a symmetric PSD ``cov``.

    Uses an eigendecomposition so that semidefinite (and rounding-level
    indefinite) matrices are accepted; eigenvalues in ``[-tol, 0)`` are
    clamped to zero.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError("covariance is not symmetric")
    w, v = np.linalg.eigh(_symmetrize(cov))
    if w.size and w.min() < -tol * scale:
        raise ValueError(f"covariance is indefinite (min eigenvalue {w.min():.3e})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(mean, cov, rng: np.random.Generator) -> np.ndarray:
    """Draw one sample from N(mean, cov)."""
    mean = np.asarray(mean, dtype=float)
    factor = psd_factor(cov)
    if factor.shape[0] != mean.shape[0]:
        raise ValueError("mean and covariance dimensions disagree")
    return mean + factor @ rng.standard_normal(factor.shape[1])


def spectral_radius(a: np.ndarray, tol: float = 1e-10, max_squarings: int = 64) -> float:
    """Spectral radius as the limit of ``||A^m||^(1/m)`` with ``m = 2^k``.

    Power iteration by repeated squaring; unlike vector power iteration it
    also converges when the dominant eigenvalues are a complex pair.
    """
    b = np.asarray(a, dtype=float)
    log_scale = 0.0
    est = math.inf
    for k in range(max_squarings + 1):
        nrm = float(np.linalg.norm(b, 2))
        if nrm == 0.0:
            return 0.0
        b = b / nrm
        log_scale += math.log(nrm) / 2.0**k
        new = math.exp(log_scale)
        if abs(new - est) < tol:
            return new
        est = new
        b = b @ b
    return est


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Linear dynamical system ``x' = A x + v``, ``y = H x + w`` with erasure rates."""

    A: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    epsilon: np.ndarray
    name: str = field(default="custom")

    def __post_init__(self):
        for attr in ("A", "H", "Q", "R", "epsilon"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        p, n = self.state_dim, self.n_sensors
        if self.A.shape != (p, p):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.H.shape != (n, p):
            raise ValueError(f"H must be {n}x{p}, got {self.H.shape}")
        if self.Q.shape != (p, p):
            raise ValueError(f"Q must be {p}x{p}, got {self.Q.shape}")
        if self.R.shape != (n, n):
            raise ValueError(f"R must be {n}x{n}, got {self.R.shape}")
        if self.epsilon.shape != (n,):
            raise ValueError(f"epsilon must have length {n}, got {self.epsilon.shape}")
        if np.any((self.epsilon < 0) | (self.epsilon > 1)):
            raise ValueError("erasure probabilities must lie in [0, 1]")
        for label in ("Q", "R"):
            m = getattr(self, label)
            if np.linalg.eigvalsh(_symmetrize(m)).min() < -PSD_TOL:
                raise ValueError(f"{label} is not positive semidefinite")
        if np.any(~np.isfinite(self.A)) or np.any(~np.isfinite(self.H)):
            raise ValueError("A and H must be finite")
        if p and spectral_radius(self.A) >= 1.0:
            warnings.warn("A is not Schur stable (spectral radius >= 1)", stacklevel=3)

    @property
    def n_sensors(self) -> int:
        return self.H.shape[0]

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def identity_observation(self) -> bool:
        return self.H.shape[0] == self.H.shape[1] and np.array_equal(self.H, np.eye(self.H.shape[0]))

    @cached_property
    def q_factor(self) -> np.ndarray:
        return psd_factor(self.Q)

    @cached_property
    def r_factor(self) -> np.ndarray:
        return psd_factor(self.R)


@dataclass(frozen=True)
class ProcessState:
    x: np.ndarray
    step_index: int = 0


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    step_index: int = 0


def benchmark_update_matrix(which: str, n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=float)[:, None]
    j = np.arange(1, n + 1, dtype=float)[None, :]
    diag = i == j
    if which == "system1":
        hit = np.mod(i - 2 * j, 4) == 0
        return np.where(diag, 0.75, np.where(hit, -1.0 / 8.0, 0.0))
    if which == "system2":
        hit = np.mod(np.ceil(i - 2.3 * j), 4) == 0
        return np.where(diag, 0.8, np.where(hit, -1.0 / 9.0, 0.0))
    raise ValueError(f"unknown benchmark system {which!r} (expected 'system1' or 'system2')")


def benchmark_process_noise(n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=float)[:, None]
    j = np.arange(1, n + 1, dtype=float)[None, :]
    return np.where(i == j, (11.0 + np.mod(i, 5)) / 5.0, np.where(np.mod(i - j, 6) == 0, 1.0, 0.0))


def benchmark_erasure(n: int) -> np.ndarray:
    idx = np.arange(1, n + 1)
    return 0.02 * np.ceil((idx - 1) / 25.0)


def build_benchmark(which: str, n: int = 50) -> SystemSpec:
    """Build benchmark ``"system1"`` or ``"system2"`` with ``n`` sensors (H = R = I)."""
    which = str(which).lower()
    if which not in ("system1", "system2"):
        raise ValueError(f"unknown benchmark system {which!r} (expected 'system1' or 'system2')")
    if int(n) != n or n < 1:
        raise ValueError(f"number of sensors must be a positive integer, got {n!r}")
    n = int(n)
    return SystemSpec(
        A=benchmark_update_matrix(which, n),
        H=np.eye(n),
        Q=benchmark_process_noise(n),
        R=np.eye(n),
        epsilon=benchmark_erasure(n),
        name=which,
    )


def step_process(state: ProcessState, spec: SystemSpec, rng: np.random.Generator) -> ProcessState:
    x = np.asarray(state.x, dtype=float)
    if x.shape != (spec.state_dim,):
        raise ValueError(f"state has shape {x.shape}, expected ({spec.state_dim},)")
    noise = spec.q_factor @ rng.standard_normal(spec.state_dim)
    return ProcessState(spec.A @ x + noise, state.step_index + 1)


def measure(state: ProcessState, spec: SystemSpec, rng: np.random.Generator) -> Measurement:
    x = np.asarray(state.x, dtype=float)
    if x.shape != (spec.state_dim,):
        raise ValueError(f"state has shape {x.shape}, expected ({spec.state_dim},)")
    noise = spec.r_factor @ rng.standard_normal(spec.n_sensors)
    return Measurement(spec.H @ x + noise, state.step_index)
