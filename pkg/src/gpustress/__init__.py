"""Estimate and rank GPU workload stress from performance counters and telemetry."""

from .model import (AXES, RTX4060, HardwareSpec, KernelCounters, MetricSet, StallCounters,
                    StressProfile, StressWarning, TelemetrySample, ThermalFit, WorkloadTrace,
                    validate_trace)
from .ingest import load_reference, load_trace_dir, write_trace
from .stress import analyze_trace, compare
from .synthgen import SynthProfile, generate, preset, presets

__version__ = "0.1.0"

__all__ = ["AXES", "RTX4060", "HardwareSpec", "KernelCounters", "MetricSet", "StallCounters",
           "StressProfile", "StressWarning", "SynthProfile", "TelemetrySample", "ThermalFit",
           "WorkloadTrace", "analyze_trace", "compare", "generate", "load_reference", "load_trace_dir",
           "preset", "presets", "validate_trace", "write_trace"]
