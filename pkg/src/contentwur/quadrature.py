"""Adaptive Simpson quadrature for the censored (silent-sensor) error moments.

The integrals are taken in standardized units ``u = z / sqrt(P_nn)``:

    mass(c, r)   = int phi(u) * band(u) du
    second(c, r) = int u^2 phi(u) * band(u) du

with ``band(u) = Phi((c - u) / r) - Phi((-c - u) / r)``, the probability that
the measurement noise keeps the reading inside the silent band,
``c = theta / sqrt(P_nn)`` and ``r = sqrt(R_nn / P_nn)``.  ``mass`` is the
silent probability and ``second / mass`` is ``V / P_nn``.

The integrand is even, so the kernel integrates ``[0, h]`` and doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INITIAL_PANELS = 20


class QuadratureError(RuntimeError):
    """Raised when the adaptive quadrature cannot meet its tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    half_width_sigmas: float = 10.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 60

    def __post_init__(self):
        if not self.half_width_sigmas > 0:
            raise ValueError("half_width_sigmas must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be a positive integer")


@numba.njit(cache=True)
def _integrand(u, c, r):
    au = abs(u)
    if r == 0.0:
        band = 1.0 if au <= c else 0.0
    else:
        # Phi((c - |u|)/r) - Phi((-c - |u|)/r), both via erfc for tail accuracy
        band = 0.5 * math.erfc((au - c) / r * _INV_SQRT2) - 0.5 * math.erfc((au + c) / r * _INV_SQRT2)
    return math.exp(-0.5 * u * u) * _INV_SQRT_2PI * band


@numba.njit(cache=True)
def _simpson_moments(c, r, upper, abs_tol, rel_tol, max_depth):
    """Integrate (mass, second) over [0, upper]; returns (mass, second, converged)."""
    panels = _INITIAL_PANELS
    size = panels + max_depth + 2
    st_a = np.empty(size)
    st_b = np.empty(size)
    st_fa = np.empty(size)
    st_fm = np.empty(size)
    st_fb = np.empty(size)
    st_w0 = np.empty(size)
    st_w1 = np.empty(size)
    st_frac = np.empty(size)
    st_depth = np.empty(size, np.int64)

    h = upper / panels
    coarse0 = 0.0
    coarse1 = 0.0
    top = 0
    for i in range(panels - 1, -1, -1):
        a = i * h
        b = a + h
        m = 0.5 * (a + b)
        fa = _integrand(a, c, r)
        fm = _integrand(m, c, r)
        fb = _integrand(b, c, r)
        w0 = h / 6.0 * (fa + 4.0 * fm + fb)
        w1 = h / 6.0 * (fa * a * a + 4.0 * fm * m * m + fb * b * b)
        coarse0 += w0
        coarse1 += w1
        st_a[top] = a
        st_b[top] = b
        st_fa[top] = fa
        st_fm[top] = fm
        st_fb[top] = fb
        st_w0[top] = w0
        st_w1[top] = w1
        st_frac[top] = 1.0 / panels
        st_depth[top] = 0
        top += 1
    tol0 = max(abs_tol, rel_tol * abs(coarse0))
    tol1 = max(abs_tol, rel_tol * abs(coarse1))

    res0 = 0.0
    res1 = 0.0
    converged = True
    while top > 0:
        top -= 1
        a = st_a[top]
        b = st_b[top]
        fa = st_fa[top]
        fm = st_fm[top]
        fb = st_fb[top]
        frac = st_frac[top]
        depth = st_depth[top]
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = _integrand(lm, c, r)
        frm = _integrand(rm, c, r)
        hh = (b - a) / 12.0
        l0 = hh * (fa + 4.0 * flm + fm)
        r0 = hh * (fm + 4.0 * frm + fb)
        l1 = hh * (fa * a * a + 4.0 * flm * lm * lm + fm * m * m)
        r1 = hh * (fm * m * m + 4.0 * frm * rm * rm + fb * b * b)
        d0 = l0 + r0 - st_w0[top]
        d1 = l1 + r1 - st_w1[top]
        ok = abs(d0) <= 15.0 * tol0 * frac and abs(d1) <= 15.0 * tol1 * frac
        if ok or depth >= max_depth:
            if not ok:
                converged = False
            res0 += l0 + r0 + d0 / 15.0
            res1 += l1 + r1 + d1 / 15.0
        else:
            st_a[top] = m
            st_b[top] = b
            st_fa[top] = fm
            st_fm[top] = frm
            st_fb[top] = fb
            st_w0[top] = r0
            st_w1[top] = r1
            st_frac[top] = 0.5 * frac
            st_depth[top] = depth + 1
            top += 1
            st_a[top] = a
            st_b[top] = m
            st_fa[top] = fa
            st_fm[top] = flm
            st_fb[top] = fm
            st_w0[top] = l0
            st_w1[top] = l1
            st_frac[top] = 0.5 * frac
            st_depth[top] = depth + 1
            top += 1
    return res0, res1, converged


@numba.njit(cache=True)
def _batch_moments(c, r, half_width, abs_tol, rel_tol, max_depth, mass, second, converged):
    for k in range(c.size):
        upper = half_width
        if r[k] == 0.0 and c[k] < upper:
            upper = c[k]
        # half-range tolerances: the doubled result then meets the full-range ones
        m0, m1, ok = _simpson_moments(c[k], r[k], upper, 0.5 * abs_tol, rel_tol, max_depth)
        mass[k] = 2.0 * m0
        second[k] = 2.0 * m1
        converged[k] = ok


def censored_moments(c, r, quad: QuadratureConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(mass, second)`` for arrays of standardized half-widths ``c`` and noise ratios ``r``.

    Raises :class:`QuadratureError` if any integral fails to converge within
    ``quad.max_subdivisions`` bisection levels.
    """
    quad = quad or QuadratureConfig()
    c = np.ascontiguousarray(np.atleast_1d(np.asarray(c, dtype=float)))
    r = np.ascontiguousarray(np.atleast_1d(np.asarray(r, dtype=float)))
    c, r = np.broadcast_arrays(c, r)
    c = np.ascontiguousarray(c)
    r = np.ascontiguousarray(r)
    if np.any(c < 0) or np.any(r < 0) or not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
        raise ValueError("half-widths and noise ratios must be finite and non-negative")
    mass = np.empty(c.size)
    second = np.empty(c.size)
    converged = np.empty(c.size, dtype=np.bool_)
    _batch_moments(
        c, r, float(quad.half_width_sigmas), float(quad.abs_tol), float(quad.rel_tol),
        int(quad.max_subdivisions), mass, second, converged,
    )
    if not converged.all():
        bad = int(np.flatnonzero(~converged)[0])
        raise QuadratureError(
            f"adaptive Simpson did not converge in {quad.max_subdivisions} levels "
            f"(c={c[bad]:.6g}, r={r[bad]:.6g})"
        )
    return mass, second
