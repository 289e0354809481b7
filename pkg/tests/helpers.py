"""Builders shared by the test modules."""

import numpy as np

from gpustress.model import (InstructionClass, KernelCounters, StallCounters, TelemetrySample,
                             WorkloadTrace)


def exp_series(t_inf=65.0, t0=40.0, tau=60.0, n=300, dt=1.0, noise=0.0, seed=0, t_start=0.0):
    t = t_start + np.arange(n) * dt
    temp = t_inf + (t0 - t_inf) * np.exp(-(t - t_start) / tau)
    if noise:
        temp = temp + np.random.default_rng(seed).normal(0.0, noise, n)
    return t, temp


def telemetry_from(t, temp, power=20.0, clock=2000.0):
    samples = []
    e = 0.0
    for i, (ti, Ti) in enumerate(zip(t, temp)):
        if i:
            e += power * (ti - t[i - 1])
        samples.append(TelemetrySample(float(ti), float(Ti), power, e, clock))
    return tuple(samples)


def kernel(i=0, alu=1000, issued=500, active=2000, elapsed=2500, dram=4096,
           stalls=(3, 2, 1, 4), duration=0.01, **classes):
    executed = {InstructionClass.ALU: alu}
    executed.update({InstructionClass(k): v for k, v in classes.items()})
    return KernelCounters("k", i, executed, issued, active, elapsed, dram,
                          StallCounters(*stalls), duration)


def simple_trace(n=20, kernels=3, name="w"):
    t, temp = exp_series(n=n, tau=5.0)
    return WorkloadTrace(name, "test", telemetry_from(t, temp),
                         tuple(kernel(i) for i in range(kernels)))


def affine_tolerance(raw, scale, shift):
    """Forward error bound of min-max normalization after ``v -> scale * v + shift``.

    Normalizing rounds each transformed value once (relative eps) and divides
    by the spread, so the error scales with magnitude over spread.
    """
    eps = 2.0 ** -52
    mag = abs(shift) + 2 * scale * max(abs(v) for v in raw)
    spread = scale * (max(raw) - min(raw))
    return float("inf") if spread == 0 else 8 * eps * mag / spread + 1e-12


def rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


# criterion number -> (passed, detail); printed by the terminal summary hook
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
