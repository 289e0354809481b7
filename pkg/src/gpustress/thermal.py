"""Lumped-capacitance fit of a temperature series.

The model is ``T(t) = T_inf + (T0 - T_inf) * exp(-t / tau)`` with ``t``
measured from the first sample. Rise time is the 95% settling time,
``tau * ln(20)``, and the steady-state window runs from the rise time to the
end of the trace.
"""

from __future__ import annotations

import math
import warnings
from typing import Sequence

import numpy as np

from .model import StressWarning, TelemetrySample, ThermalFit

SETTLING_FACTOR = math.log(20.0)
MIN_SAMPLES = 10
MAX_ITER = 200
STEP_TOL = 1e-9
TAU_BOUNDS = (1.0, 1e4)
T_INF_BOUNDS = (-20.0, 150.0)


def rise_time(tau_s: float) -> float:
    return tau_s * SETTLING_FACTOR


def _model(p, t):
    t_inf, t0, tau = p
    return t_inf + (t0 - t_inf) * np.exp(-t / tau)


def _jacobian(p, t):
    t_inf, t0, tau = p
    e = np.exp(-t / tau)
    return np.column_stack([1.0 - e, e, (t0 - t_inf) * e * t / tau**2])


def _clip(p):
    return np.array([np.clip(p[0], *T_INF_BOUNDS), p[1], np.clip(p[2], *TAU_BOUNDS)])


def initial_guess(t: np.ndarray, temp: np.ndarray) -> np.ndarray:
    """Log-linearized estimate from a provisional asymptote one degree past the extreme."""
    tail = temp[-max(1, len(temp) // 10):].mean()
    heating = tail >= temp[0]
    t_hat = temp.max() + 1.0 if heating else temp.min() - 1.0
    gap = np.abs(t_hat - temp)
    slope, intercept = np.polyfit(t, np.log(gap), 1)
    span = t[-1] - t[0]
    tau = -1.0 / slope if slope < 0 else span / 3.0
    t0 = t_hat - math.copysign(math.exp(intercept), t_hat - temp[0])
    return _clip(np.array([t_hat, t0, tau]))


def _levenberg_marquardt(t, temp, p):
    r = temp - _model(p, t)
    sse = float(r @ r)
    lam = 1e-3
    for it in range(1, MAX_ITER + 1):
        J = _jacobian(p, t)
        A = J.T @ J
        g = J.T @ r
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(np.diag(A)), g)
            except np.linalg.LinAlgError:
                step = np.zeros(3)
            trial = _clip(p + step)
            r_trial = temp - _model(trial, t)
            sse_trial = float(r_trial @ r_trial)
            if sse_trial <= sse or lam > 1e12:
                break
            lam *= 10.0
        delta = trial - p
        if sse_trial <= sse:
            p, r, sse = trial, r_trial, sse_trial
            lam = max(lam / 10.0, 1e-12)
        rel = np.max(np.abs(delta) / np.maximum(np.abs(p), 1e-12))
        if rel < STEP_TOL:
            return p, sse, it, True
        if lam > 1e12:
            return p, sse, it, False
    return p, sse, MAX_ITER, False


def fit_exponential(telemetry: Sequence[TelemetrySample]) -> ThermalFit:
    if len(telemetry) < MIN_SAMPLES:
        raise ValueError(f"thermal fit needs at least {MIN_SAMPLES} samples, got {len(telemetry)}")
    return fit_series([s.t for s in telemetry], [s.temp_c for s in telemetry])


def fit_series(t_abs, temp) -> ThermalFit:
    """Fit on raw arrays of sample times (s) and temperatures (degC)."""
    t_abs = np.asarray(t_abs, dtype=float)
    temp = np.asarray(temp, dtype=float)
    if len(t_abs) < MIN_SAMPLES:
        raise ValueError(f"thermal fit needs at least {MIN_SAMPLES} samples, got {len(t_abs)}")
    if not t_abs[-1] > t_abs[0]:
        raise ValueError("telemetry spans zero time")
    t = t_abs - t_abs[0]

    if np.ptp(temp) <= 1e-12 * max(1.0, abs(temp[0])):
        level = float(temp.mean())
        return ThermalFit(level, level, TAU_BOUNDS[0], 0.0, 0.0,
                          (float(t_abs[0]), float(t_abs[-1])), converged=True,
                          flags=("no_transient",))

    p, sse, iterations, converged = _levenberg_marquardt(t, temp, initial_guess(t, temp))
    flags = []
    if not converged:
        flags.append("unconverged")
        warnings.warn(f"thermal fit did not converge in {iterations} iterations; best effort kept",
                      StressWarning, stacklevel=2)
    if p[2] in TAU_BOUNDS:
        flags.append("tau_at_bound")
    if p[0] in T_INF_BOUNDS:
        flags.append("t_inf_at_bound")
    t_inf, t0, tau = (float(v) for v in p)
    t_r = rise_time(tau)
    start = min(float(t_abs[0]) + t_r, float(t_abs[-1]))
    return ThermalFit(t_inf, t0, tau, t_r, math.sqrt(sse / len(t)),
                      (start, float(t_abs[-1])), converged, iterations, tuple(flags))


def steady_state_temp(telemetry: Sequence[TelemetrySample], fit: ThermalFit) -> float:
    """Mean recorded temperature inside the steady-state window.

    Falls back to the fitted asymptote, with a warning, when the window has
    zero length or no sample lands in it.
    """
    return window_mean([s.t for s in telemetry], [s.temp_c for s in telemetry], fit)


def window_mean(t_abs, temp, fit: ThermalFit) -> float:
    lo, hi = fit.steady_window
    window = [T for t, T in zip(t_abs, temp) if lo <= t <= hi]
    if hi <= lo or not window:
        warnings.warn("steady-state window holds no samples; using fitted T_inf",
                      StressWarning, stacklevel=3)
        return fit.t_inf_c
    return math.fsum(window) / len(window)
