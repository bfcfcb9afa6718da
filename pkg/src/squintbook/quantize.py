"""Realizable phase/amplitude sets and nearest-point projection onto them.

Each antenna weight is ``A * exp(j*theta)`` with ``theta`` from a uniform
``phase_bits`` phase shifter over [0, 2*pi) and ``A`` from a stepped
attenuator with ``2**amp_bits`` levels spaced ``amp_step_db`` apart, the
largest being 0 dB.  There is no "off" state.

Projection picks the nearest phase first (shortest angular distance), then
the amplitude nearest to ``|w| cos(theta* - theta)``.  Because every level
is strictly positive this equals the joint Euclidean minimizer over the
product set.  Ties resolve toward the lower phase index, then the lower
amplitude index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "QuantizationSpec",
    "project_weight",
    "project_matrix",
    "project_indices",
    "box_project",
    "is_realizable",
]

_OVERSHOOT_TOL = 1e-9


@dataclass(frozen=True)
class QuantizationSpec:
    phase_bits: int
    amp_bits: int
    amp_step_db: float = 0.5

    def __post_init__(self) -> None:
        if int(self.phase_bits) != self.phase_bits or self.phase_bits < 1:
            raise ValueError("phase_bits must be an integer >= 1")
        if int(self.amp_bits) != self.amp_bits or self.amp_bits < 0:
            raise ValueError("amp_bits must be an integer >= 0")
        if not self.amp_step_db > 0:
            raise ValueError("amp_step_db must be positive")

    @cached_property
    def phases(self) -> np.ndarray:
        n = 2 ** self.phase_bits
        return 2 * np.pi * np.arange(n) / n

    @cached_property
    def amplitudes(self) -> np.ndarray:
        q = np.arange(2 ** self.amp_bits)
        return 10.0 ** (-q * self.amp_step_db / 20.0)

    @property
    def min_amplitude(self) -> float:
        return float(self.amplitudes[-1])

    def value(self, q_amp, p_phase) -> np.ndarray:
        """Complex weight(s) for amplitude index ``q_amp`` and phase index ``p_phase``."""
        return self.amplitudes[q_amp] * np.exp(1j * self.phases[p_phase])


def project_indices(spec: QuantizationSpec, w) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude and phase indices of the nearest realizable weight, entrywise."""
    w = np.asarray(w, dtype=complex)
    mag = np.abs(w)
    if np.any(~np.isfinite(mag)):
        raise ValueError("weights must be finite")
    if np.any(mag > 1 + _OVERSHOOT_TOL):
        raise ValueError(f"weight magnitude {mag.max():.6g} exceeds 1")
    mag = np.minimum(mag, 1.0)
    theta = np.mod(np.angle(w), 2 * np.pi)

    diff = np.abs(theta[..., None] - spec.phases)
    ang_dist = np.minimum(diff, 2 * np.pi - diff)
    p = np.argmin(ang_dist, axis=-1)  # first minimum -> lower index on ties

    target = mag * np.cos(spec.phases[p] - theta)
    q = np.argmin(np.abs(spec.amplitudes - target[..., None]), axis=-1)
    return q, p


def project_weight(spec: QuantizationSpec, w: complex) -> tuple[float, float, complex]:
    """Project one weight; returns ``(amplitude, phase, value)``."""
    q, p = project_indices(spec, np.array([w]))
    amp = float(spec.amplitudes[q[0]])
    phase = float(spec.phases[p[0]])
    return amp, phase, complex(spec.value(q[0], p[0]))


def project_matrix(spec: QuantizationSpec, m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    q, p = project_indices(spec, m)
    return spec.value(q, p)


def box_project(m) -> np.ndarray:
    """Scale entries with modulus above 1 back onto the unit circle."""
    m = np.asarray(m, dtype=complex)
    mag = np.abs(m)
    return m / np.maximum(mag, 1.0)


def is_realizable(spec: QuantizationSpec, m, atol: float = 1e-12) -> bool:
    """True if every entry equals some ``A e^{j theta}`` from the spec's sets."""
    m = np.asarray(m, dtype=complex)
    q, p = project_indices(spec, np.clip(np.abs(m), 0, 1) * np.exp(1j * np.angle(m)))
    return bool(np.all(np.abs(spec.value(q, p) - m) <= atol))
