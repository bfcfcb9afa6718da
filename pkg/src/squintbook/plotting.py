"""Batch figures rendered from a finished sweep (PNG, Agg backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import db  # noqa: E402
from .sweep import SweepResult, coverage_bandwidth_index  # noqa: E402

__all__ = ["render_figures"]

_STYLE = {
    "cbf": dict(color="k", ls=":"),
    "proposed": dict(color="tab:blue", ls="-"),
    "narrowband": dict(color="tab:orange", ls="--"),
    "narrowband_tuned": dict(color="tab:red", ls="-."),
    "narrowband_wb": dict(color="tab:green", ls="--"),
}


def _inr_figure(result: SweepResult, path: str) -> None:
    bw = coverage_bandwidth_index(result.config)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, b, p in result.reported():
        if b != bw:
            continue
        freqs = result.channels[b].grid.frequencies / 1e9
        ax.plot(freqs, db(np.asarray(p.inr_curve)), label=name, **_STYLE.get(name, {}))
    ax.set_xlabel("frequency (GHz)")
    ax.set_ylabel("mean uplink INR (dB)")
    ax.set_title(f"bandwidth {result.config.bandwidths_hz[bw] / 1e9:g} GHz")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _se_figure(result: SweepResult, path: str) -> None:
    bws = np.array(result.config.bandwidths_hz) / 1e9
    series: dict[str, list[float]] = {}
    for name, b, p in result.reported():
        series.setdefault(name, [np.nan] * len(bws))[b] = p.mean_rate
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in series.items():
        ax.plot(bws, values, marker="o", label=name, **_STYLE.get(name, {}))
    ax.set_xlabel("bandwidth (GHz)")
    ax.set_ylabel("mean sum spectral efficiency (bps/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _coverage_figure(result: SweepResult, path: str) -> None:
    bw = coverage_bandwidth_index(result.config)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for name, b, p in result.reported():
        if b != bw or name == "cbf":
            continue
        freqs = result.channels[b].grid.frequencies / 1e9
        for ax, curve in zip(axes, (p.coverage_tx, p.coverage_rx)):
            ax.plot(freqs, db(np.asarray(curve)), label=name, **_STYLE.get(name, {}))
    for ax, side in zip(axes, ("transmit", "receive")):
        ax.set_xlabel("frequency (GHz)")
        ax.set_title(f"{side} coverage variance")
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("coverage variance (dB)")
    if axes[0].get_legend_handles_labels()[0]:
        axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(result: SweepResult, out_dir: str | os.PathLike) -> list[str]:
    """Write the three summary figures next to the CSVs; returns their file names."""
    names = ["inr_vs_freq.png", "se_vs_bandwidth.png", "coverage_variance_vs_freq.png"]
    for name, fn in zip(names, (_inr_figure, _se_figure, _coverage_figure)):
        fn(result, os.path.join(out_dir, name))
    return names
