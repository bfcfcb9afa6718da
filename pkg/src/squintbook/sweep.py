"""Bandwidth x coverage-budget sweeps and their CSV/JSON artifacts.

One sweep point is a (bandwidth, design, budget) triple; CBF has a single
point per bandwidth.  Points run independently (optionally in a process
pool) and are assembled by key, so the written files do not depend on
completion order.

Tuning is a recorded argmax over the budget grid, never a hidden search:

* ``proposed``, ``narrowband_tuned`` and ``narrowband_wb`` use the budget
  with the largest band-averaged rate;
* ``narrowband`` (untuned) uses the budget with the largest rate on the
  center subcarrier, i.e. the choice a narrowband designer would make.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .channel import ChannelTensor, load_channel, save_channel, synth_nearfield_si
from .config import RunConfig
from .design import Codebook, DesignScenario, Label, design, save_codebook
from .evaluate import coverage_variance_curve, evaluate_population
from .metrics import db
from .solver import InfeasibleBudgetError

__all__ = ["PointResult", "SweepResult", "run_sweep", "write_artifacts", "INR_HEADER", "SE_HEADER", "COV_HEADER"]

logger = logging.getLogger(__name__)

INR_HEADER = ["baseline", "bandwidth_ghz", "freq_ghz", "mean_inr_db"]
SE_HEADER = ["baseline", "bandwidth_ghz", "sigma2_db", "mean_R_bpshz", "mean_gamma"]
COV_HEADER = ["baseline", "side", "freq_ghz", "sigma2_hat_db"]

UNTUNED = "narrowband"
TUNED_NB = "narrowband_tuned"


@dataclass
class PointResult:
    bandwidth_index: int
    label: str
    sigma2_index: int  # -1 for CBF
    status: str  # "ok" or "infeasible"
    seconds: float
    mean_rate: float = math.nan
    mean_rate_center: float = math.nan
    mean_gamma: float = math.nan
    inr_curve: np.ndarray | None = None  # (K,) linear, mean over users
    coverage_tx: np.ndarray | None = None  # (K,)
    coverage_rx: np.ndarray | None = None
    codebooks: tuple[Codebook, Codebook] | None = None
    message: str = ""

    @property
    def key(self) -> tuple[int, str, int]:
        return (self.bandwidth_index, self.label, self.sigma2_index)


@dataclass
class SweepResult:
    config: RunConfig
    points: list[PointResult]
    channels: list[ChannelTensor]
    tuned: dict[tuple[str, int], int] = field(default_factory=dict)  # (reported baseline, bw) -> sigma2 index

    def point(self, bw: int, label: str, s: int) -> PointResult:
        for p in self.points:
            if p.key == (bw, label, s):
                return p
        raise KeyError((bw, label, s))

    def reported(self) -> list[tuple[str, int, PointResult]]:
        """``(reported baseline, bandwidth index, point)`` for every curve that is written out."""
        out = []
        for bw in range(len(self.config.bandwidths_hz)):
            for name in _reported_names(self.config.baselines):
                if name == Label.CBF.value:
                    p = self.point(bw, name, -1)
                else:
                    s = self.tuned.get((name, bw))
                    if s is None:
                        continue
                    family = Label.NARROWBAND.value if name == TUNED_NB else name
                    p = self.point(bw, family, s)
                out.append((name, bw, p))
        return out


def _reported_names(baselines: list[Label]) -> list[str]:
    names = []
    for lb in baselines:
        names.append(lb.value)
        if lb is Label.NARROWBAND:
            names.append(TUNED_NB)
    return names


def build_channel(cfg: RunConfig, bw_index: int) -> ChannelTensor:
    sub = cfg.subcarriers(cfg.bandwidths_hz[bw_index])
    if cfg.channel_path:
        tensor = load_channel(cfg.channel_path)
        if tensor.nt != cfg.geometry("tx").num_elements or tensor.nr != cfg.geometry("rx").num_elements:
            raise ValueError("imported channel does not match the configured arrays")
        if tensor.num_subcarriers != sub.num_subcarriers:
            raise ValueError("imported channel does not match num_subcarriers")
        return ChannelTensor(tensor.entries, sub, tensor.normalized)
    return synth_nearfield_si(cfg.geometry("tx"), cfg.geometry("rx"), cfg.separation_wavelengths,
                              sub, cfg.kappa_db, seed=cfg.seed)


def _scenario(cfg: RunConfig, channel: ChannelTensor, sigma2_db: float) -> DesignScenario:
    grid = cfg.coverage_grid()
    return DesignScenario.with_budget_db(
        sigma2_db,
        tx_geom=cfg.geometry("tx"), rx_geom=cfg.geometry("rx"), tx_grid=grid, rx_grid=grid,
        subcarriers=channel.grid, channel=channel, spec=cfg.quantization(),
        outer_rounds=cfg.outer_rounds, solver=cfg.solver())


def run_point(cfg: RunConfig, bw_index: int, label: str, sigma2_index: int,
              channel: ChannelTensor | None = None) -> PointResult:
    start = time.perf_counter()
    channel = channel if channel is not None else build_channel(cfg, bw_index)
    sigma2 = 0.0 if sigma2_index < 0 else cfg.sigma2_db[sigma2_index]
    sc = _scenario(cfg, channel, sigma2)
    cbf = design(sc, Label.CBF)
    try:
        f, w = cbf if label == Label.CBF.value else design(sc, label)
    except InfeasibleBudgetError as exc:
        logger.warning("bandwidth %g GHz, %s, sigma2 %g dB: %s",
                       cfg.bandwidths_hz[bw_index] / 1e9, label, sigma2, exc)
        return PointResult(bw_index, label, sigma2_index, "infeasible", time.perf_counter() - start,
                           message=str(exc))
    res = evaluate_population(cfg.link_budget(), channel, f, w, sc.tx_geom, sc.rx_geom, sc.subcarriers,
                              cfg.users(), cbf_pair=cbf)
    freqs = sc.subcarriers.frequencies
    return PointResult(
        bw_index, label, sigma2_index, "ok", time.perf_counter() - start,
        mean_rate=res.mean_rate,
        mean_rate_center=float(np.mean(res.rate[:, sc.center_index])),
        mean_gamma=res.mean_gamma,
        inr_curve=res.mean_inr_per_subcarrier(),
        coverage_tx=coverage_variance_curve(f, sc.tx_geom, sc.tx_grid, freqs),
        coverage_rx=coverage_variance_curve(w, sc.rx_geom, sc.rx_grid, freqs),
        codebooks=(f, w),
    )


def _run_point_from_doc(doc: dict, bw_index: int, label: str, sigma2_index: int) -> PointResult:
    # process-pool entry point; the config travels as its (picklable) document
    return run_point(RunConfig(doc), bw_index, label, sigma2_index)


def _argmax(values: list[tuple[int, float]]) -> int | None:
    best = None
    for idx, v in values:
        if math.isfinite(v) and (best is None or v > best[1]):
            best = (idx, v)
    return None if best is None else best[0]


def select_tuned(cfg: RunConfig, points: list[PointResult]) -> dict[tuple[str, int], int]:
    by_key = {p.key: p for p in points}
    tuned = {}
    for bw in range(len(cfg.bandwidths_hz)):
        for name in _reported_names(cfg.baselines):
            if name == Label.CBF.value:
                continue
            family = Label.NARROWBAND.value if name == TUNED_NB else name
            ok = [by_key[(bw, family, s)] for s in range(len(cfg.sigma2_db))
                  if by_key[(bw, family, s)].status == "ok"]
            attr = "mean_rate_center" if name == UNTUNED else "mean_rate"
            choice = _argmax([(p.sigma2_index, getattr(p, attr)) for p in ok])
            if choice is not None:
                tuned[(name, bw)] = choice
    return tuned


def run_sweep(cfg: RunConfig, workers: int = 1) -> SweepResult:
    tasks = []
    for bw in range(len(cfg.bandwidths_hz)):
        for lb in cfg.baselines:
            if lb is Label.CBF:
                tasks.append((bw, lb.value, -1))
            else:
                tasks.extend((bw, lb.value, s) for s in range(len(cfg.sigma2_db)))
    channels = [build_channel(cfg, bw) for bw in range(len(cfg.bandwidths_hz))]
    if workers <= 1:
        points = [run_point(cfg, bw, lb, s, channels[bw]) for bw, lb, s in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point_from_doc, cfg.document, *t) for t in tasks]
            points = [f.result() for f in futures]
    order = {lb.value: i for i, lb in enumerate(Label)}
    points.sort(key=lambda p: (p.bandwidth_index, order[p.label], p.sigma2_index))
    return SweepResult(cfg, points, channels, select_tuned(cfg, points))


# ---------------------------------------------------------------- output


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(float(v)) for v in row])
    return buf.getvalue()


def inr_rows(result: SweepResult) -> list[list]:
    rows = []
    for name, bw, p in result.reported():
        freqs = result.channels[bw].grid.frequencies
        for f, inr in zip(freqs, p.inr_curve):
            rows.append([name, result.config.bandwidths_hz[bw] / 1e9, f / 1e9, db(float(inr))])
    return rows


def se_rows(result: SweepResult) -> list[list]:
    cfg = result.config
    rows = []
    for p in result.points:
        s = math.nan if p.sigma2_index < 0 else cfg.sigma2_db[p.sigma2_index]
        rows.append([p.label, cfg.bandwidths_hz[p.bandwidth_index] / 1e9, s, p.mean_rate, p.mean_gamma])
    return rows


def coverage_rows(result: SweepResult) -> list[list]:
    """Per-frequency coverage variance of every reported codebook at the widest bandwidth."""
    bw = coverage_bandwidth_index(result.config)
    rows = []
    for name, b, p in result.reported():
        if b != bw:
            continue
        freqs = result.channels[bw].grid.frequencies
        for side, curve in (("tx", p.coverage_tx), ("rx", p.coverage_rx)):
            for f, v in zip(freqs, curve):
                rows.append([name, side, f / 1e9, db(float(v))])
    return rows


def coverage_bandwidth_index(cfg: RunConfig) -> int:
    return int(np.argmax(cfg.bandwidths_hz))


def write_artifacts(result: SweepResult, out_dir: str | os.PathLike) -> dict:
    """Write channel, codebooks, CSVs and ``summary.json``; returns the summary."""
    cfg = result.config
    os.makedirs(out_dir, exist_ok=True)
    cb_dir = os.path.join(out_dir, "codebooks")
    os.makedirs(cb_dir, exist_ok=True)
    curves = result.reported()

    channel_files = []
    for bw, tensor in enumerate(result.channels):
        name = f"channel_bw{_fmt(cfg.bandwidths_hz[bw] / 1e9)}ghz.cht"
        save_channel(tensor, os.path.join(out_dir, name))
        channel_files.append(name)

    codebook_files = []
    for name, bw, p in curves:
        stem = f"{name}_bw{_fmt(cfg.bandwidths_hz[bw] / 1e9)}ghz"
        for side, cb in zip(("tx", "rx"), p.codebooks):
            fname = f"{stem}_{side}.json"
            save_codebook(cb, os.path.join(cb_dir, fname))
            codebook_files.append(os.path.join("codebooks", fname))

    tables = {
        "inr_vs_freq.csv": (INR_HEADER, inr_rows(result)),
        "se_vs_bandwidth.csv": (SE_HEADER, se_rows(result)),
        "coverage_variance_vs_freq.csv": (COV_HEADER, coverage_rows(result)),
    }
    for fname, (header, rows) in tables.items():
        with open(os.path.join(out_dir, fname), "w", newline="") as fh:
            fh.write(_csv_text(header, rows))

    k = cfg.num_subcarriers
    n_bw = len(cfg.bandwidths_hz)
    reported = _reported_names(cfg.baselines)
    cov_bw = coverage_bandwidth_index(cfg)
    n_points = sum(1 if lb is Label.CBF else len(cfg.sigma2_db) for lb in cfg.baselines)
    summary = {
        "name": cfg.document.get("name"),
        "seed": cfg.seed,
        "generated_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.document,
        "diagnostics": [str(d) for d in cfg.diagnostics],
        "row_counts": {
            "inr_vs_freq.csv": {"rows": len(tables["inr_vs_freq.csv"][1]),
                                "curves": len(curves), "frequencies": k},
            "se_vs_bandwidth.csv": {"rows": len(tables["se_vs_bandwidth.csv"][1]),
                                    "bandwidths": n_bw, "points_per_bandwidth": n_points, "frequencies": 1},
            "coverage_variance_vs_freq.csv": {"rows": len(tables["coverage_variance_vs_freq.csv"][1]),
                                              "bandwidth_ghz": cfg.bandwidths_hz[cov_bw] / 1e9,
                                              "curves": sum(b == cov_bw for _, b, _ in curves),
                                              "sides": 2, "frequencies": k},
        },
        "tuned_sigma2_db": {
            name: {_fmt(cfg.bandwidths_hz[bw] / 1e9): cfg.sigma2_db[s]
                   for (n, bw), s in sorted(result.tuned.items()) if n == name}
            for name in reported if name != Label.CBF.value
        },
        "points": [
            {"bandwidth_ghz": cfg.bandwidths_hz[p.bandwidth_index] / 1e9, "baseline": p.label,
             "sigma2_db": None if p.sigma2_index < 0 else cfg.sigma2_db[p.sigma2_index],
             "status": p.status, "seconds": round(p.seconds, 3), "message": p.message}
            for p in result.points
        ],
        "files": {"channels": channel_files, "codebooks": codebook_files},
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, allow_nan=False, default=str)
        fh.write("\n")
    return summary
