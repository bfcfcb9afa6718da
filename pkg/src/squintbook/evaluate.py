"""Vectorized evaluation of codebook pairs over a population of user pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, CoverageGrid, SubcarrierGrid
from .metrics import LinkBudget, normalized_sum_se, sum_se

__all__ = ["UserPopulation", "PopulationResult", "evaluate_population", "coverage_variance_curve"]


@dataclass(frozen=True)
class UserPopulation:
    """Downlink/uplink user pairs drawn uniformly in azimuth and elevation (degrees)."""

    az_range_deg: tuple[float, float] = (-67.5, 67.5)
    el_range_deg: tuple[float, float] = (-37.5, 37.5)
    count: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("user count must be >= 1")
        for lo, hi in (self.az_range_deg, self.el_range_deg):
            if hi < lo:
                raise ValueError("empty user angle range")

    def directions(self) -> tuple[np.ndarray, np.ndarray]:
        """``(downlink, uplink)`` arrays of shape (count, 2) in radians (az, el)."""
        rng = np.random.default_rng(self.seed)
        out = []
        for _ in range(2):
            az = rng.uniform(*self.az_range_deg, size=self.count)
            el = rng.uniform(*self.el_range_deg, size=self.count)
            out.append(np.radians(np.column_stack([az, el])))
        return out[0], out[1]


def _user_channels(geom: ArrayGeometry, dirs: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    # (U, K, N) line-of-sight responses
    az, el = dirs[:, 0], dirs[:, 1]
    pos = geom.elements
    phi = (pos[:, 0][None] * (np.sin(az) * np.cos(el))[:, None]
           + pos[:, 1][None] * (np.cos(az) * np.cos(el))[:, None]
           + pos[:, 2][None] * np.sin(el)[:, None])
    ratio = freqs / geom.carrier_freq_hz
    return np.exp(2j * np.pi * ratio[None, :, None] * phi[:, None, :])


@dataclass
class PopulationResult:
    rate: np.ndarray  # (U, K)
    inr_rx: np.ndarray  # (U, K) linear
    snr_tx: np.ndarray
    snr_rx: np.ndarray
    gamma: np.ndarray | None

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rate))

    @property
    def mean_gamma(self) -> float:
        return float("nan") if self.gamma is None else float(np.mean(self.gamma))

    def mean_inr_per_subcarrier(self) -> np.ndarray:
        return np.mean(self.inr_rx, axis=0)


def _select(x: np.ndarray, h: np.ndarray, side: str):
    g = np.abs(np.einsum("ukn,nm->ukm", h.conj(), x)) ** 2
    if side == "transmit":
        score = g / x.shape[0]
    else:
        norms = np.sum(np.abs(x) ** 2, axis=0)
        score = np.divide(g, norms, out=np.zeros_like(g), where=norms > 0)
    idx = np.argmax(np.mean(score, axis=1), axis=1)
    return idx, np.take_along_axis(g, idx[:, None, None], axis=2)[:, :, 0]


def evaluate_population(
    budget: LinkBudget,
    channel,
    f_codebook,
    w_codebook,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    subcarriers: SubcarrierGrid,
    users: UserPopulation,
    cbf_pair=None,
) -> PopulationResult:
    f = np.asarray(getattr(f_codebook, "weights", f_codebook))
    w = np.asarray(getattr(w_codebook, "weights", w_codebook))
    h_si = np.asarray(getattr(channel, "entries", channel))
    freqs = subcarriers.frequencies
    dl, ul = users.directions()
    h_tx = _user_channels(tx_geom, dl, freqs)
    h_rx = _user_channels(rx_geom, ul, freqs)
    nt, nr = f.shape[0], w.shape[0]

    i, g_tx = _select(f, h_tx, "transmit")
    j, g_rx = _select(w, h_rx, "receive")
    fsel, wsel = f[:, i], w[:, j]  # (N, U)
    wnorm = np.sum(np.abs(wsel) ** 2, axis=0)
    snr_tx = budget.snr_bar_tx * g_tx / nt ** 2
    snr_rx = budget.snr_bar_rx * g_rx / (nr * wnorm[:, None])
    coupling = np.einsum("ru,krt,tu->uk", wsel.conj(), h_si, fsel)
    inr = budget.inr_bar_rx * np.abs(coupling) ** 2 / (nt ** 2 * nr * wnorm[:, None])
    rate, _ = sum_se(snr_tx, snr_rx, inr)

    gamma = None
    if cbf_pair is not None:
        fc = np.asarray(getattr(cbf_pair[0], "weights", cbf_pair[0]))
        wc = np.asarray(getattr(cbf_pair[1], "weights", cbf_pair[1]))
        _, gc_tx = _select(fc, h_tx, "transmit")
        jc, gc_rx = _select(wc, h_rx, "receive")
        wc_norm = np.sum(np.abs(wc[:, jc]) ** 2, axis=0)
        gamma = normalized_sum_se(rate, budget.snr_bar_tx * gc_tx / nt ** 2,
                                  budget.snr_bar_rx * gc_rx / (nr * wc_norm[:, None]))
    return PopulationResult(rate, inr, snr_tx, snr_rx, gamma)


def coverage_variance_curve(codebook, geom: ArrayGeometry, grid: CoverageGrid, freqs_hz) -> np.ndarray:
    """Coverage variance of ``codebook`` at each frequency in ``freqs_hz``."""
    from .array import steering_tensor

    x = np.asarray(getattr(codebook, "weights", codebook))
    a = steering_tensor(geom, grid, freqs_hz)
    n, m = x.shape
    gains = np.einsum("knm,nm->km", a.conj(), x)
    return np.sum(np.abs(n - gains) ** 2, axis=1) / (n ** 2 * m)
