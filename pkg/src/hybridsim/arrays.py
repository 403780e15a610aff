"""Uniform planar arrays: steering weights, array factor, phase quantization,
and the block-diagonal analog precoding matrix of a partially connected front end.

Convention: the array lies in the yz plane with broadside along x. Elevation
theta is measured from the z axis (broadside at theta = 90 deg), azimuth phi
from the x axis in the xy plane. Element (n, m) sits at position
(n * spacing) along y and (m * spacing) along z, flat index n * m_z + m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    """Shape mismatch between weights, geometries or matrices."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar array layout: m_y x m_z elements spaced in wavelengths."""

    m_y: int
    m_z: int
    spacing: float = 0.5

    def __post_init__(self):
        if self.m_y < 1 or self.m_z < 1:
            raise ValueError(f"element counts must be positive, got {self.m_y}x{self.m_z}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def size(self) -> int:
        return self.m_y * self.m_z

    def element_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (n, m) index arrays in the canonical element order."""
        n, m = np.meshgrid(np.arange(self.m_y), np.arange(self.m_z), indexing="ij")
        return n.ravel(), m.ravel()


@dataclass(frozen=True)
class SteeringAngles:
    """Direction (theta, phi) in degrees; theta from z axis, phi from x axis."""

    theta_deg: float
    phi_deg: float

    def __post_init__(self):
        if not 0.0 <= self.theta_deg <= 180.0:
            raise ValueError(f"theta must be in [0, 180] deg, got {self.theta_deg}")
        if not -90.0 <= self.phi_deg <= 90.0:
            raise ValueError(f"phi must be in [-90, 90] deg, got {self.phi_deg}")

    @property
    def theta_rad(self) -> float:
        return float(np.deg2rad(self.theta_deg))

    @property
    def phi_rad(self) -> float:
        return float(np.deg2rad(self.phi_deg))


@dataclass
class AnalogWeights:
    """Unit-modulus phase-shifter settings for one array or sub-array."""

    weights: np.ndarray
    phase_bits: int = 8

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=complex)
        if self.weights.ndim != 1:
            raise DimensionError("weights must be a 1-D vector")

    def __len__(self) -> int:
        return len(self.weights)


@dataclass
class HybridAnalogMatrix:
    """Block-diagonal analog precoder: one weight column per RF chain."""

    per_subarray: list[AnalogWeights]

    def __post_init__(self):
        lengths = {len(w) for w in self.per_subarray}
        if len(lengths) != 1:
            raise DimensionError(f"sub-array weight lengths differ: {sorted(lengths)}")

    @property
    def n_chains(self) -> int:
        return len(self.per_subarray)

    @property
    def m_sub(self) -> int:
        return len(self.per_subarray[0])

    @property
    def n_antennas(self) -> int:
        return self.n_chains * self.m_sub

    def as_matrix(self) -> np.ndarray:
        """Dense M x M_RF matrix; rows outside a sub-array block are exactly zero."""
        f_a = np.zeros((self.n_antennas, self.n_chains), dtype=complex)
        for i, w in enumerate(self.per_subarray):
            f_a[i * self.m_sub:(i + 1) * self.m_sub, i] = w.weights
        return f_a

    def apply(self, s: np.ndarray) -> np.ndarray:
        """Per-antenna signal for a chain-domain vector (or (M_RF, T) block)."""
        s = np.asarray(s)
        if s.shape[0] != self.n_chains:
            raise DimensionError(f"expected {self.n_chains} chain signals, got {s.shape[0]}")
        cols = [w.weights[:, None] * s[i][None, ...] if s.ndim > 1
                else w.weights * s[i]
                for i, w in enumerate(self.per_subarray)]
        return np.concatenate(cols, axis=0)


def _phase_args(geom: ArrayGeometry, direction: SteeringAngles) -> np.ndarray:
    """Per-element spatial phase 2*pi*spacing*(m*cos(theta) + n*sin(theta)*sin(phi))."""
    n, m = geom.element_grid()
    th, ph = direction.theta_rad, direction.phi_rad
    return 2.0 * np.pi * geom.spacing * (m * np.cos(th) + n * np.sin(th) * np.sin(ph))


def steering_vector(geom: ArrayGeometry, target: SteeringAngles,
                    phase_bits: int = 8) -> AnalogWeights:
    """Phase-conjugate weights that point the array at the target direction.

    Unquantized: call quantize_phases explicitly to model finite resolution.
    """
    return AnalogWeights(np.exp(-1j * _phase_args(geom, target)), phase_bits=phase_bits)


def array_factor(geom: ArrayGeometry, w: AnalogWeights,
                 direction: SteeringAngles) -> complex:
    """Complex array gain of the weight vector in the given direction; |AF| <= M."""
    if len(w) != geom.size:
        raise DimensionError(f"weights length {len(w)} != array size {geom.size}")
    return complex(np.sum(w.weights * np.exp(1j * _phase_args(geom, direction))))


def quantize_phases(w: AnalogWeights, bits: int) -> AnalogWeights:
    """Round each phase to the nearest step of 2*pi / 2**bits; magnitudes kept."""
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    step = 2.0 * np.pi / (1 << bits)
    phases = np.round(np.angle(w.weights) / step) * step
    return AnalogWeights(np.abs(w.weights) * np.exp(1j * phases), phase_bits=bits)


def build_analog_precoder(subarrays: list[AnalogWeights]) -> HybridAnalogMatrix:
    """Assemble the block-diagonal analog matrix from per-chain weight vectors."""
    return HybridAnalogMatrix(list(subarrays))
