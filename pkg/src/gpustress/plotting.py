"""SVG radar and roofline figures (matplotlib, Agg backend).

Output is deterministic: the SVG date stamp is removed and element ids use a
fixed hash salt. Each workload series carries a stable ``gid`` (``radar-<name>``
and ``roofline-<name>``) so figures can be checked structurally.
"""

from __future__ import annotations

import io
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .ingest import atomic_write_text  # noqa: E402
from .model import HardwareSpec, RooflinePoint, StressProfile  # noqa: E402

_RC = {"svg.hashsalt": "gpustress", "svg.fonttype": "none", "font.size": 9}


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def radar_svg(profile: StressProfile) -> str:
    axes = list(profile.axes)
    angles = np.linspace(0.0, 2.0 * np.pi, len(axes), endpoint=False)
    closed = np.concatenate([angles, angles[:1]])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 6), subplot_kw={"projection": "polar"})
        cmap = plt.get_cmap("tab10")
        for i, p in enumerate(sorted(profile.profiles, key=lambda p: p.rank)):
            vals = [p.normalized_axes[a] for a in axes]
            vals.append(vals[0])
            (line,) = ax.plot(closed, vals, color=cmap(i % 10), linewidth=1.2,
                              label=f"{p.rank}. {p.name}")
            (fill,) = ax.fill(closed, vals, color=cmap(i % 10), alpha=0.08)
            line.set_gid(f"radar-{p.name}")
            fill.set_gid(f"radar-fill-{p.name}")
        ax.set_xticks(angles)
        ax.set_xticklabels(axes)
        ax.set_ylim(0.0, 1.0)
        ax.set_yticks([0.25, 0.5, 0.75, 1.0])
        ax.legend(loc="upper left", bbox_to_anchor=(1.05, 1.0), frameon=False)
        ax.set_title("normalized stress axes (1 = most stress)")
        return _svg(fig)


def roofline_svg(points: Sequence[tuple[str, RooflinePoint]], hw: HardwareSpec) -> str:
    ridge = hw.ridge_point
    ais = [p.arithmetic_intensity for _, p in points] or [ridge]
    lo = min(min(ais), ridge) / 10.0
    hi = max(max(ais), ridge) * 10.0
    x = np.geomspace(lo, hi, 256)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        ax.plot(x, np.minimum(hw.peak_gflops, hw.peak_bandwidth_gbps * x), color="tab:red",
                linewidth=1.5, label="ceiling")
        ax.axvline(ridge, color="tab:red", linestyle=":", linewidth=0.8)
        for name, p in points:
            marker = "^" if p.above_ceiling else "o"
            pts = ax.scatter([p.arithmetic_intensity], [max(p.throughput_gflops, 1e-6)],
                             marker=marker, s=28, zorder=3)
            pts.set_gid(f"roofline-{name}")
            ax.annotate(name, (p.arithmetic_intensity, max(p.throughput_gflops, 1e-6)),
                        textcoords="offset points", xytext=(4, 3), fontsize=7)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("arithmetic intensity (FLOP/byte)")
        ax.set_ylabel("throughput (GFLOP/s)")
        ax.set_title(f"{hw.name}: {hw.peak_gflops:g} GFLOP/s, {hw.peak_bandwidth_gbps:g} GB/s")
        ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
        return _svg(fig)


def write_radar(profile: StressProfile, path) -> None:
    atomic_write_text(path, radar_svg(profile))


def write_roofline(points, hw: HardwareSpec, path) -> None:
    atomic_write_text(path, roofline_svg(points, hw))
