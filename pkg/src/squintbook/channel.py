"""Self-interference and user channels, normalization, and the CHT1 file format.

The self-interference surrogate places the receive array ``separation``
carrier wavelengths from the transmit array along +x and combines

* a spherical-wave line-of-sight term ``(r0 / r_nm) exp(-j 2 pi r_nm f_k / fc)``
  over every element pair, and
* a seeded, frequency-selective scattered term: a few specular reflections,
  each a rank-one plane-wave path ``g_p a_rx(psi_p, f) a_tx(omega_p, f)^H``
  with complex Gaussian gain ``g_p``, random departure/arrival directions and
  a random excess path length,

mixed at power ratio ``kappa`` (LOS : scattered) and normalized so the
average Frobenius energy per subcarrier is ``Nt * Nr``.

CHT1 layout: ``b"CHT1\\n"``, one line of JSON header
``{"k", "nr", "nt", "fc_hz", "bw_hz", "normalized"}`` ending in ``\\n``, then
``K*Nr*Nt`` little-endian float64 (real, imag) pairs, k-major then row-major.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .array import ArrayGeometry, Direction, SubcarrierGrid, _path_phase, steering_vector

__all__ = [
    "ChannelTensor",
    "UserChannel",
    "ChannelFormatError",
    "synth_nearfield_si",
    "synth_los_user",
    "normalize_si",
    "save_channel",
    "load_channel",
]

MAGIC = b"CHT1\n"
NORM_RTOL = 1e-9
# scattered-path model of the surrogate
NUM_SCATTER_PATHS = 6
SCATTER_EXCESS_RANGE = (2.0, 30.0)  # excess path length, carrier wavelengths
SCATTER_AZ_RANGE = (-np.pi / 2, np.pi / 2)
SCATTER_EL_RANGE = (-np.pi / 4, np.pi / 4)


class ChannelFormatError(ValueError):
    """Malformed or inconsistent CHT1 channel file."""


@dataclass(frozen=True)
class ChannelTensor:
    entries: np.ndarray  # (K, Nr, Nt)
    grid: SubcarrierGrid
    normalized: bool = False

    def __post_init__(self) -> None:
        h = np.array(self.entries, dtype=complex)
        if h.ndim != 3:
            raise ValueError("channel tensor must have shape (K, Nr, Nt)")
        if h.shape[0] != self.grid.num_subcarriers:
            raise ValueError(
                f"channel has {h.shape[0]} subcarriers, grid has {self.grid.num_subcarriers}"
            )
        if not np.all(np.isfinite(h)):
            raise ValueError("channel entries must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)
        if self.normalized:
            target = self.nt * self.nr
            if abs(self.mean_energy() - target) > NORM_RTOL * target:
                raise ValueError("tensor flagged normalized but mean energy != Nt*Nr")

    @property
    def num_subcarriers(self) -> int:
        return self.entries.shape[0]

    @property
    def nr(self) -> int:
        return self.entries.shape[1]

    @property
    def nt(self) -> int:
        return self.entries.shape[2]

    def mean_energy(self) -> float:
        return float(np.mean(np.sum(np.abs(self.entries) ** 2, axis=(1, 2))))


@dataclass(frozen=True)
class UserChannel:
    entries: np.ndarray  # (K, N)
    side: Literal["transmit", "receive"]

    def __post_init__(self) -> None:
        h = np.array(self.entries, dtype=complex)
        if h.ndim != 2:
            raise ValueError("user channel must have shape (K, N)")
        if self.side not in ("transmit", "receive"):
            raise ValueError("side must be 'transmit' or 'receive'")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)


def normalize_si(tensor: ChannelTensor) -> ChannelTensor:
    """Rescale so that ``mean_k ||H[k]||_F^2 == Nt * Nr``."""
    energy = tensor.mean_energy()
    if energy <= 0:
        raise ValueError("cannot normalize an all-zero channel")
    scale = math.sqrt(tensor.nt * tensor.nr / energy)
    return ChannelTensor(tensor.entries * scale, tensor.grid, normalized=True)


def synth_nearfield_si(
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    array_separation_wavelengths: float,
    grid: SubcarrierGrid,
    rician_kappa_db: float = 10.0,
    seed: int = 0,
) -> ChannelTensor:
    if not array_separation_wavelengths > 0:
        raise ValueError("array separation must be positive")
    offset = np.array([array_separation_wavelengths, 0.0, 0.0])
    rx_pos = rx_geom.elements + offset
    diff = rx_pos[:, None, :] - tx_geom.elements[None, :, :]
    r = np.linalg.norm(diff, axis=-1)  # (Nr, Nt)
    if np.any(r <= 0):
        raise ValueError("transmit and receive elements overlap")
    r0 = float(np.linalg.norm(offset))

    ratio = grid.frequencies / grid.carrier_freq_hz
    los = (r0 / r)[None] * np.exp(-2j * np.pi * r[None] * ratio[:, None, None])

    if math.isinf(rician_kappa_db) and rician_kappa_db > 0:
        h = los
    else:
        rng = np.random.default_rng(seed)
        p = NUM_SCATTER_PATHS
        gains = (rng.standard_normal(p) + 1j * rng.standard_normal(p)) / math.sqrt(2 * p)
        dep = _path_phase(tx_geom.elements, rng.uniform(*SCATTER_AZ_RANGE, p), rng.uniform(*SCATTER_EL_RANGE, p))
        arr = _path_phase(rx_geom.elements, rng.uniform(*SCATTER_AZ_RANGE, p), rng.uniform(*SCATTER_EL_RANGE, p))
        delays = r0 + rng.uniform(*SCATTER_EXCESS_RANGE, size=p)
        a_t = np.exp(2j * np.pi * ratio[:, None, None] * dep[None])  # (K, Nt, P)
        a_r = np.exp(2j * np.pi * ratio[:, None, None] * arr[None])  # (K, Nr, P)
        coef = gains[None, :] * np.exp(-2j * np.pi * ratio[:, None] * delays[None, :])  # (K, P)
        nlos = np.einsum("krp,kp,ktp->krt", a_r, coef, a_t.conj())
        los_power = np.mean(np.abs(los) ** 2)
        nlos_power = np.mean(np.abs(nlos) ** 2)
        kappa = 10.0 ** (rician_kappa_db / 10.0)
        # LOS : scattered power = kappa : 1
        h = math.sqrt(kappa / (1 + kappa)) * los / math.sqrt(los_power) \
            + math.sqrt(1 / (1 + kappa)) * nlos / math.sqrt(nlos_power)
    return normalize_si(ChannelTensor(h, grid))


def synth_los_user(
    geom: ArrayGeometry,
    direction: Direction,
    grid: SubcarrierGrid,
    side: Literal["transmit", "receive"] = "transmit",
) -> UserChannel:
    """Line-of-sight user channel ``h[k] = a(theta_user, f_k)``."""
    h = np.stack([steering_vector(geom, direction, f) for f in grid.frequencies])
    return UserChannel(h, side)


def save_channel(tensor: ChannelTensor, path: str | os.PathLike) -> None:
    header = {
        "k": tensor.num_subcarriers,
        "nr": tensor.nr,
        "nt": tensor.nt,
        "fc_hz": tensor.grid.carrier_freq_hz,
        "bw_hz": tensor.grid.bandwidth_hz,
        "normalized": bool(tensor.normalized),
    }
    payload = np.ascontiguousarray(tensor.entries, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, separators=(",", ":")).encode("ascii") + b"\n")
        fh.write(payload)


def load_channel(path: str | os.PathLike) -> ChannelTensor:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise ChannelFormatError("missing CHT1 magic")
    end = blob.find(b"\n", len(MAGIC))
    if end < 0:
        raise ChannelFormatError("unterminated header line")
    try:
        header = json.loads(blob[len(MAGIC):end].decode("ascii"))
        k, nr, nt = int(header["k"]), int(header["nr"]), int(header["nt"])
        fc, bw = float(header["fc_hz"]), float(header["bw_hz"])
        normalized = bool(header["normalized"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise ChannelFormatError(f"malformed header: {exc}") from exc
    if k < 1 or nr < 1 or nt < 1:
        raise ChannelFormatError(f"invalid dimensions k={k}, nr={nr}, nt={nt}")
    payload = blob[end + 1:]
    expected = k * nr * nt * 16
    if len(payload) != expected:
        raise ChannelFormatError(f"payload length {len(payload)} != expected {expected}")
    h = np.frombuffer(payload, dtype="<c16").reshape(k, nr, nt).astype(complex)
    if not np.all(np.isfinite(h)):
        raise ChannelFormatError("payload contains non-finite values")
    try:
        grid = SubcarrierGrid(fc, bw, k)
    except ValueError as exc:
        raise ChannelFormatError(str(exc)) from exc
    return ChannelTensor(h, grid, normalized=normalized)
