"""Deterministic JSON / CSV report documents."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Mapping, Optional, Sequence

from . import roofline
from .ingest import ReferenceDataset, atomic_write_text
from .model import AXES, HardwareSpec, MetricSet, RooflinePoint, StressProfile, ThermalFit
from .stress import Analysis

ANALYSIS_SCHEMA = "gpustress.analysis/1"
COMPARISON_SCHEMA = "gpustress.comparison/1"
SIG_DIGITS = 6
COMPOSITE_NOTE = ("composite_index is toolkit-defined: the weighted mean of min-max normalized "
                  "radar axes over the compared set; it is not a published metric")


def sig(x):
    """Round floats to 6 significant digits; non-finite floats become ``None``."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}")
    if isinstance(x, int):
        return x
    if isinstance(x, Mapping):
        return {str(k): sig(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [sig(v) for v in x]
    return x


def dumps(doc) -> str:
    return json.dumps(sig(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def fit_dict(fit: Optional[ThermalFit]):
    if fit is None:
        return None
    return {"t_inf_c": fit.t_inf_c, "t0_c": fit.t0_c, "tau_s": fit.tau_s, "t_r_s": fit.t_r_s,
            "rmse_c": fit.rmse_c, "steady_window": list(fit.steady_window),
            "converged": fit.converged, "iterations": fit.iterations, "flags": list(fit.flags)}


def point_dict(p: Optional[RooflinePoint]):
    if p is None:
        return None
    return {"arithmetic_intensity": p.arithmetic_intensity,
            "throughput_gflops": p.throughput_gflops, "attainable_gflops": p.attainable_gflops,
            "efficiency_pct": p.efficiency_pct, "bound": p.bound.value,
            "above_ceiling": p.above_ceiling}


def analysis_document(a: Analysis, hw: HardwareSpec) -> dict:
    return {
        "schema": ANALYSIS_SCHEMA,
        "workload": a.workload_name,
        "category": a.category,
        "hardware": hw.to_dict(),
        "metrics": a.metrics.to_dict(),
        "thermal_fit": fit_dict(a.thermal_fit),
        "roofline": point_dict(a.roofline),
        "absent_axes": list(a.absent_axes),
        "warnings": list(a.warnings),
    }


def read_analysis(path) -> tuple[str, MetricSet, dict]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("schema") != ANALYSIS_SCHEMA:
        raise ValueError(f"{path}: not an analysis report (schema {doc.get('schema')!r})")
    return doc["workload"], MetricSet.from_dict(doc["metrics"]), doc


def comparison_document(profile: StressProfile, raw: Sequence[tuple[str, MetricSet]],
                        roof: Optional[Sequence[tuple[str, RooflinePoint]]] = None,
                        extra: Optional[Mapping[str, Mapping]] = None,
                        energy_mode: str = "total") -> dict:
    raw_by = dict(raw)
    workloads = []
    for p in sorted(profile.profiles, key=lambda p: p.rank):
        entry = {"name": p.name, "rank": p.rank, "composite_index": p.composite_index,
                 "normalized_axes": dict(p.normalized_axes),
                 "raw": raw_by[p.name].to_dict()}
        if extra and p.name in extra:
            entry.update(extra[p.name])
        workloads.append(entry)
    doc = {
        "schema": COMPARISON_SCHEMA,
        "note": COMPOSITE_NOTE,
        "energy_axis": energy_mode,
        "axes": list(profile.axes),
        "weights": dict(profile.weights),
        "flags": list(profile.flags),
        "workloads": workloads,
        "ranking": [[w["name"], w["composite_index"]] for w in workloads],
        "radar": {"axes": list(profile.axes),
                  "polygons": {p.name: [p.normalized_axes[a] for a in profile.axes]
                               for p in profile.profiles}},
    }
    if roof:
        labels = roofline.cluster(roof)
        doc["roofline"] = [dict(point_dict(pt), name=name, cluster=label)
                           for (name, pt), label in zip(roof, labels)]
    return doc


def comparison_csv(profile: StressProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["workload", "rank", "composite_index", *profile.axes])
    for p in sorted(profile.profiles, key=lambda p: p.rank):
        w.writerow([p.name, p.rank, sig(p.composite_index),
                    *(sig(p.normalized_axes[a]) for a in profile.axes)])
    return buf.getvalue()


def roofline_rows(points: Sequence[tuple[str, RooflinePoint]]) -> list[list]:
    labels = roofline.cluster(points) if points else []
    return [[name, sig(p.arithmetic_intensity), sig(p.throughput_gflops),
             sig(p.attainable_gflops), sig(p.efficiency_pct), p.bound.value, label,
             "above_ceiling" if p.above_ceiling else ""]
            for (name, p), label in zip(points, labels)]


ROOFLINE_HEADER = ["workload", "arithmetic_intensity", "throughput_gflops", "attainable_gflops",
                   "efficiency_pct", "bound", "cluster", "flag"]


def reference_roofline(ref: ReferenceDataset) -> list[tuple[str, RooflinePoint]]:
    import warnings

    from .model import StressWarning

    pts = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StressWarning)
        for e in ref:
            if e.roofline is not None:
                pts.append((e.name, roofline.place(e.roofline[0], e.roofline[1], ref.hardware)))
    return pts


def write(path, text: str) -> None:
    atomic_write_text(path, text)


__all__ = ["AXES", "analysis_document", "comparison_document", "comparison_csv", "dumps",
           "read_analysis", "reference_roofline", "roofline_rows", "sig", "write"]
