"""Array geometry, frequency-dependent steering vectors and coverage grids.

Element coordinates are stored in units of the carrier wavelength, so the
phase of element ``i`` toward direction (az, el) at frequency ``f`` is
``2*pi * (f / fc) * Phi_i`` with

    Phi_i = x_i sin(az) cos(el) + y_i cos(az) cos(el) + z_i sin(el).

Angles are radians everywhere in the library; degrees appear only at the
CLI/config boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ArrayGeometry",
    "Direction",
    "CoverageGrid",
    "SubcarrierGrid",
    "element_response",
    "steering_vector",
    "steering_matrix",
    "steering_tensor",
    "subcarrier_frequencies",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna element positions (carrier wavelengths) and the carrier frequency."""

    elements: np.ndarray
    carrier_freq_hz: float

    def __post_init__(self) -> None:
        pos = np.array(self.elements, dtype=float).reshape(-1, 3)
        if pos.shape[0] < 1:
            raise ValueError("array needs at least one element")
        if not np.all(np.isfinite(pos)):
            raise ValueError("element coordinates must be finite")
        if not (self.carrier_freq_hz > 0 and math.isfinite(self.carrier_freq_hz)):
            raise ValueError("carrier frequency must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "elements", pos)
        object.__setattr__(self, "carrier_freq_hz", float(self.carrier_freq_hz))

    @classmethod
    def planar(cls, nx: int, ny: int, carrier_freq_hz: float, spacing: float = 0.5) -> "ArrayGeometry":
        """Centered ``nx`` x ``ny`` planar array in the x-z plane.

        Broadside (az = el = 0) is the +y axis, so every element has
        ``Phi_i = 0`` there.  ``nx`` elements run along x (azimuth), ``ny``
        along z (elevation).
        """
        if nx < 1 or ny < 1:
            raise ValueError("planar array dimensions must be >= 1")
        xs = (np.arange(nx) - (nx - 1) / 2.0) * spacing
        zs = (np.arange(ny) - (ny - 1) / 2.0) * spacing
        xx, zz = np.meshgrid(xs, zs, indexing="ij")
        pos = np.column_stack([xx.ravel(), np.zeros(nx * ny), zz.ravel()])
        return cls(pos, carrier_freq_hz)

    @property
    def num_elements(self) -> int:
        return int(self.elements.shape[0])


@dataclass(frozen=True)
class Direction:
    azimuth_rad: float
    elevation_rad: float

    def __post_init__(self) -> None:
        az, el = float(self.azimuth_rad), float(self.elevation_rad)
        if not (-math.pi <= az < math.pi):
            raise ValueError(f"azimuth {az} outside [-pi, pi)")
        if not (-math.pi / 2 <= el <= math.pi / 2):
            raise ValueError(f"elevation {el} outside [-pi/2, pi/2]")
        object.__setattr__(self, "azimuth_rad", az)
        object.__setattr__(self, "elevation_rad", el)

    @classmethod
    def from_degrees(cls, az_deg: float, el_deg: float) -> "Direction":
        return cls(math.radians(az_deg), math.radians(el_deg))

    @property
    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.azimuth_rad), math.degrees(self.elevation_rad)


@dataclass(frozen=True)
class CoverageGrid:
    """Ordered serving directions; column ``j`` of a codebook serves ``directions[j]``."""

    directions: tuple[Direction, ...]

    def __post_init__(self) -> None:
        dirs = tuple(self.directions)
        if not dirs:
            raise ValueError("coverage grid must be nonempty")
        keys = [(d.azimuth_rad, d.elevation_rad) for d in dirs]
        if len(set(keys)) != len(keys):
            raise ValueError("coverage grid contains duplicate directions")
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def from_ranges_deg(
        cls,
        az_min: float,
        az_max: float,
        az_step: float,
        el_min: float,
        el_max: float,
        el_step: float,
    ) -> "CoverageGrid":
        """Rectangular grid, azimuth-major (elevation varies fastest)."""
        azs = _inclusive_range(az_min, az_max, az_step)
        els = _inclusive_range(el_min, el_max, el_step)
        return cls(tuple(Direction.from_degrees(a, e) for a in azs for e in els))

    @classmethod
    def from_degrees(cls, pairs: Iterable[Sequence[float]]) -> "CoverageGrid":
        return cls(tuple(Direction.from_degrees(a, e) for a, e in pairs))

    def __len__(self) -> int:
        return len(self.directions)

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        az = np.array([d.azimuth_rad for d in self.directions])
        el = np.array([d.elevation_rad for d in self.directions])
        return az, el


def _inclusive_range(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0:
        raise ValueError("grid step must be positive")
    if hi < lo:
        raise ValueError("grid range is empty")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


@dataclass(frozen=True)
class SubcarrierGrid:
    carrier_freq_hz: float
    bandwidth_hz: float
    num_subcarriers: int

    def __post_init__(self) -> None:
        if self.bandwidth_hz < 0:
            raise ValueError("bandwidth must be >= 0")
        if self.num_subcarriers < 1:
            raise ValueError("need at least one subcarrier")
        if not self.carrier_freq_hz > 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def frequencies(self) -> np.ndarray:
        return subcarrier_frequencies(self)

    @property
    def center_index(self) -> int:
        """Zero-based index of the subcarrier designated as the carrier (k0)."""
        return (self.num_subcarriers + 1) // 2 - 1


def subcarrier_frequencies(grid: SubcarrierGrid) -> np.ndarray:
    """Mid-rise subcarrier centers ``fc - B/2 + (k - 1/2) B/K`` for k = 1..K."""
    if grid.bandwidth_hz < 0:
        raise ValueError("bandwidth must be >= 0")
    k = np.arange(1, grid.num_subcarriers + 1, dtype=float)
    spacing = grid.bandwidth_hz / grid.num_subcarriers
    return grid.carrier_freq_hz - grid.bandwidth_hz / 2.0 + (k - 0.5) * spacing


def _path_phase(elements: np.ndarray, az: np.ndarray, el: np.ndarray) -> np.ndarray:
    # (N, M) table of Phi_i for each direction
    x, y, z = elements[:, 0:1], elements[:, 1:2], elements[:, 2:3]
    az = np.atleast_1d(az)[None, :]
    el = np.atleast_1d(el)[None, :]
    return x * np.sin(az) * np.cos(el) + y * np.cos(az) * np.cos(el) + z * np.sin(el)


def element_response(geom: ArrayGeometry, i: int, direction: Direction, f_hz: float) -> complex:
    if not 0 <= i < geom.num_elements:
        raise IndexError(f"element index {i} out of range for {geom.num_elements} elements")
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    phi = _path_phase(geom.elements[i : i + 1], np.array([direction.azimuth_rad]), np.array([direction.elevation_rad]))
    return complex(np.exp(2j * np.pi * (f_hz / geom.carrier_freq_hz) * phi[0, 0]))


def steering_vector(geom: ArrayGeometry, direction: Direction, f_hz: float) -> np.ndarray:
    """Length-N array response ``a(theta, f)``; every entry has unit modulus."""
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    phi = _path_phase(geom.elements, np.array([direction.azimuth_rad]), np.array([direction.elevation_rad]))
    return np.exp(2j * np.pi * (f_hz / geom.carrier_freq_hz) * phi[:, 0])


def steering_matrix(geom: ArrayGeometry, grid: CoverageGrid, f_hz: float) -> np.ndarray:
    """N x M matrix whose column ``j`` is the response toward ``grid.directions[j]``."""
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    az, el = grid.angles()
    phi = _path_phase(geom.elements, az, el)
    return np.exp(2j * np.pi * (f_hz / geom.carrier_freq_hz) * phi)


def steering_tensor(geom: ArrayGeometry, grid: CoverageGrid, freqs_hz: np.ndarray) -> np.ndarray:
    """Stack of steering matrices, shape (K, N, M), one per frequency."""
    freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    if np.any(freqs <= 0):
        raise ValueError("frequencies must be positive")
    az, el = grid.angles()
    phi = _path_phase(geom.elements, az, el)
    ratio = freqs / geom.carrier_freq_hz
    return np.exp(2j * np.pi * ratio[:, None, None] * phi[None, :, :])
