"""Link-level metrics for full-duplex codebooks.

All budgets are expressed through the three upper bounds (dB): average
downlink SNR, average uplink SNR and average uplink INR.  In those terms

    snr_tx[k] = SNR_tx_bar * |h_tx[k]^H f|^2 / Nt^2
    snr_rx[k] = SNR_rx_bar * |h_rx[k]^H w|^2 / (Nr ||w||^2)
    inr_rx[k] = INR_rx_bar * |w^H H[k] f|^2 / (Nt^2 Nr ||w||^2)

and ``R[k] = log2(1 + snr_tx/(1 + inr_tx)) + log2(1 + snr_rx/(1 + inr_rx))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, CoverageGrid, steering_matrix
from .channel import UserChannel

__all__ = [
    "LinkBudget",
    "MetricsReport",
    "snr_tx",
    "snr_rx",
    "inr_rx",
    "avg_inr_codebooks",
    "sum_se",
    "normalized_sum_se",
    "coverage_variance",
    "select_beams",
    "evaluate_pair",
    "db",
    "undb",
]


def db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def undb(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def _weights(x) -> np.ndarray:
    return np.asarray(getattr(x, "weights", x), dtype=complex)


def _entries(h) -> np.ndarray:
    h = np.asarray(getattr(h, "entries", h), dtype=complex)
    return h[None] if h.ndim == 1 else h


@dataclass(frozen=True)
class LinkBudget:
    snr_bar_tx_db: float = 10.0
    snr_bar_rx_db: float = 10.0
    inr_bar_rx_db: float = 80.0

    def __post_init__(self) -> None:
        for name in ("snr_bar_tx_db", "snr_bar_rx_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if math.isnan(self.inr_bar_rx_db) or self.inr_bar_rx_db == math.inf:
            raise ValueError("inr_bar_rx_db must be finite or -inf")

    @property
    def snr_bar_tx(self) -> float:
        return float(undb(self.snr_bar_tx_db))

    @property
    def snr_bar_rx(self) -> float:
        return float(undb(self.snr_bar_rx_db))

    @property
    def inr_bar_rx(self) -> float:
        return 0.0 if self.inr_bar_rx_db == -math.inf else float(undb(self.inr_bar_rx_db))


def snr_tx(budget: LinkBudget, h_tx, f) -> np.ndarray:
    h = _entries(h_tx)
    f = _weights(f)
    if h.shape[1] != f.shape[0]:
        raise ValueError(f"channel has {h.shape[1]} antennas, beam has {f.shape[0]}")
    nt = h.shape[1]
    return budget.snr_bar_tx * np.abs(h.conj() @ f) ** 2 / nt ** 2


def snr_rx(budget: LinkBudget, h_rx, w) -> np.ndarray:
    h = _entries(h_rx)
    w = _weights(w)
    if h.shape[1] != w.shape[0]:
        raise ValueError(f"channel has {h.shape[1]} antennas, beam has {w.shape[0]}")
    wn = float(np.vdot(w, w).real)
    if wn == 0:
        raise ValueError("receive beam must be nonzero")
    return budget.snr_bar_rx * np.abs(h.conj() @ w) ** 2 / (h.shape[1] * wn)


def inr_rx(budget: LinkBudget, channel, f, w) -> np.ndarray:
    h = _entries_si(channel)
    f, w = _weights(f), _weights(w)
    if h.shape[2] != f.shape[0] or h.shape[1] != w.shape[0]:
        raise ValueError("beam dimensions do not match the self-interference channel")
    wn = float(np.vdot(w, w).real)
    if wn == 0:
        raise ValueError("receive beam must be nonzero")
    nr, nt = h.shape[1], h.shape[2]
    coupling = np.einsum("r,krt,t->k", w.conj(), h, f)
    return budget.inr_bar_rx * np.abs(coupling) ** 2 / (nt ** 2 * nr * wn)


def _entries_si(channel) -> np.ndarray:
    h = np.asarray(getattr(channel, "entries", channel), dtype=complex)
    return h[None] if h.ndim == 2 else h


def avg_inr_codebooks(budget: LinkBudget, channel, f_codebook, w_codebook) -> tuple[float, float]:
    """Average uplink INR over subcarriers and all beam pairs.

    Returns ``(exact, frobenius_approx)``; the approximation replaces every
    ``||w_j||^2`` by ``Nr`` and so is exact for unit-modulus receive beams.
    """
    h = _entries_si(channel)
    f, w = _weights(f_codebook), _weights(w_codebook)
    if h.shape[2] != f.shape[0] or h.shape[1] != w.shape[0]:
        raise ValueError("codebook dimensions do not match the self-interference channel")
    wnorm = np.sum(np.abs(w) ** 2, axis=0)
    if np.any(wnorm == 0):
        raise ValueError("receive codebook has an all-zero column")
    k, nr, nt = h.shape
    coupling = np.abs(np.einsum("rj,krt,ti->kji", w.conj(), h, f)) ** 2  # (K, Mr, Mt)
    exact = budget.inr_bar_rx * np.mean(coupling / (nt ** 2 * nr * wnorm[None, :, None]))
    approx = budget.inr_bar_rx * np.sum(coupling) / (nt ** 2 * nr ** 2 * k * f.shape[1] * w.shape[1])
    return float(exact), float(approx)


def sum_se(snr_tx_k, snr_rx_k, inr_rx_k, inr_tx_k=None) -> tuple[np.ndarray, float]:
    """Per-subcarrier sum spectral efficiency ``R[k]`` and its mean.

    ``inr_tx_k`` (cross-link interference) defaults to zero.
    """
    st = np.asarray(snr_tx_k, dtype=float)
    sr = np.asarray(snr_rx_k, dtype=float)
    ir = np.asarray(inr_rx_k, dtype=float)
    it = np.zeros_like(st) if inr_tx_k is None else np.asarray(inr_tx_k, dtype=float)
    if not (st.shape == sr.shape == ir.shape == it.shape):
        raise ValueError("per-subcarrier arrays must share a shape")
    if np.any(st < 0) or np.any(sr < 0) or np.any(ir < 0) or np.any(it < 0):
        raise ValueError("SNR/INR values must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(np.isinf(ir), 0.0, sr / (1.0 + ir))
    r = np.log2(1.0 + st / (1.0 + it)) + np.log2(1.0 + up)
    return r, float(np.mean(r))


def normalized_sum_se(r_k, cbf_snr_tx_k, cbf_snr_rx_k) -> np.ndarray:
    """``R[k]`` divided by the interference-free rate of the CBF beams for the same users."""
    st = np.asarray(cbf_snr_tx_k, dtype=float)
    sr = np.asarray(cbf_snr_rx_k, dtype=float)
    if np.any(st <= 0) or np.any(sr <= 0):
        raise ValueError("reference CBF SNRs must be positive")
    denom = np.log2(1.0 + st) + np.log2(1.0 + sr)
    return np.asarray(r_k, dtype=float) / denom


def coverage_variance(codebook, geom: ArrayGeometry, grid: CoverageGrid, f_hz: float) -> float:
    """``||N 1 - diag(A(f)^H X)||^2 / (N^2 M)`` for a codebook serving ``grid``."""
    x = _weights(codebook)
    cb_grid = getattr(codebook, "grid", None)
    if cb_grid is not None and cb_grid != grid:
        raise ValueError("codebook grid differs from the evaluation grid")
    a = steering_matrix(geom, grid, f_hz)
    if a.shape != x.shape:
        raise ValueError(f"steering matrix {a.shape} vs codebook {x.shape}")
    n, m = x.shape
    gains = np.sum(a.conj() * x, axis=0)
    return float(np.sum(np.abs(n - gains) ** 2) / (n ** 2 * m))


def select_beams(codebook, user_channel: UserChannel | np.ndarray, side: str | None = None) -> tuple[int, np.ndarray]:
    """Beam maximizing subcarrier-average gain toward a user.

    Transmit side uses ``|h^H f|^2 / Nt``; receive side ``|h^H w|^2 / ||w||^2``.
    Returns the column index (lowest on ties) and that beam's per-subcarrier gain.
    """
    x = _weights(codebook)
    h = _entries(user_channel)
    side = side or getattr(user_channel, "side", "transmit")
    if x.shape[1] == 0:
        raise ValueError("codebook is empty")
    g = np.abs(h.conj() @ x) ** 2  # (K, M)
    if side == "transmit":
        g = g / x.shape[0]
    elif side == "receive":
        norms = np.sum(np.abs(x) ** 2, axis=0)
        g = np.divide(g, norms, out=np.zeros_like(g), where=norms > 0)
    else:
        raise ValueError(f"unknown side {side!r}")
    idx = int(np.argmax(np.mean(g, axis=0)))
    return idx, g[:, idx]


@dataclass
class MetricsReport:
    snr_tx: np.ndarray
    snr_rx: np.ndarray
    inr_rx: np.ndarray
    sinr_tx: np.ndarray
    sinr_rx: np.ndarray
    rate: np.ndarray
    gamma: np.ndarray | None = None

    @property
    def mean_rate(self) -> float:
        return float(np.mean(self.rate))

    @property
    def mean_gamma(self) -> float:
        return float("nan") if self.gamma is None else float(np.mean(self.gamma))


def evaluate_pair(budget: LinkBudget, channel, f_codebook, w_codebook, h_tx, h_rx,
                  cbf_pair=None) -> MetricsReport:
    """Select SNR-maximizing beams for one downlink/uplink user pair and score them.

    ``cbf_pair`` = (F_cbf, W_cbf) enables the normalized sum spectral efficiency.
    """
    i, _ = select_beams(f_codebook, h_tx, "transmit")
    j, _ = select_beams(w_codebook, h_rx, "receive")
    f = _weights(f_codebook)[:, i]
    w = _weights(w_codebook)[:, j]
    st = snr_tx(budget, h_tx, f)
    sr = snr_rx(budget, h_rx, w)
    ir = inr_rx(budget, channel, f, w)
    r, _ = sum_se(st, sr, ir)
    gamma = None
    if cbf_pair is not None:
        fc_cb, wc_cb = cbf_pair
        ic, _ = select_beams(fc_cb, h_tx, "transmit")
        jc, _ = select_beams(wc_cb, h_rx, "receive")
        gamma = normalized_sum_se(r, snr_tx(budget, h_tx, _weights(fc_cb)[:, ic]),
                                  snr_rx(budget, h_rx, _weights(wc_cb)[:, jc]))
    return MetricsReport(st, sr, ir, st, sr / (1.0 + ir), r, gamma)
