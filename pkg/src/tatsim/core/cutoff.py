"""Smooth temporal cutoff applied to boundary data before time reversal."""

from __future__ import annotations

import numpy as np


def _q(r):
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = np.exp(-1.0 / r[pos])
    return out


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, strictly increasing between."""
    a = _q(u)
    return a / (a + _q(1.0 - np.asarray(u, dtype=np.float64)))


def phi(s):
    """Base transition: 1 on (-inf, -1], 0 on [0, inf)."""
    s = np.asarray(s, dtype=np.float64)
    a = _q(-s)
    return a / (a + _q(1.0 + s))


def phi_prime(s):
    s = np.asarray(s, dtype=np.float64)
    a, b = _q(-s), _q(1.0 + s)
    # q'(r) = q(r) / r^2, so d/ds q(-s) = -a / s^2 and d/ds q(1+s) = b / (1+s)^2
    da = np.where(-s > 0, a / np.where(s != 0, s * s, 1.0), 0.0)
    db = np.where(1.0 + s > 0, b / np.where(1.0 + s != 0, (1.0 + s) ** 2, 1.0), 0.0)
    return (-da * b - a * db) / (a + b) ** 2


def cutoff_width(eps: float) -> float:
    """Ramp length ``alpha = min(eps, 1)``."""
    return min(eps, 1.0)


def cutoff(t, T: float, eps: float):
    """``phi((t - T) / alpha)``: 1 for ``t <= T - alpha``, 0 at ``t = T``.

    ``t`` may be a scalar or an array; values outside ``[0, T]`` are rejected.
    """
    if not T > 0 or not eps > 0:
        raise ValueError(f"need T > 0 and eps > 0, got T={T}, eps={eps}")
    t_arr = np.asarray(t, dtype=np.float64)
    slack = 1e-9 * max(T, 1.0)
    if np.any(t_arr < -slack) or np.any(t_arr > T + slack):
        raise ValueError(f"cutoff evaluated outside [0, {T}]")
    out = phi((t_arr - T) / cutoff_width(eps))
    return float(out) if out.ndim == 0 else out


def cutoff_derivative(t, T: float, eps: float):
    alpha = cutoff_width(eps)
    out = phi_prime((np.asarray(t, dtype=np.float64) - T) / alpha) / alpha
    return float(out) if out.ndim == 0 else out
