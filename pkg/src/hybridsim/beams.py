"""Exhaustive beam-pair selection over steering-angle codebooks and the
sub-array assignment that turns per-user beams into the analog configuration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import (AnalogWeights, ArrayGeometry, HybridAnalogMatrix,
                     SteeringAngles, build_analog_precoder, quantize_phases,
                     steering_vector)
from .channel import BsArray, ChannelRealization, ConfigurationError


@dataclass(frozen=True)
class BeamCodebook:
    """Grid of candidate steering directions for one side of a link."""

    entries: tuple[SteeringAngles, ...]
    quantized: bool = True
    phase_bits: int = 8

    def __post_init__(self):
        if not self.entries:
            raise ValueError("codebook must be non-empty")
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("codebook entries must be unique")

    @classmethod
    def azimuth_grid(cls, start_deg: float = -60.0, stop_deg: float = 60.0,
                     step_deg: float = 1.0, theta_deg: float = 90.0,
                     quantized: bool = True, phase_bits: int = 8) -> "BeamCodebook":
        n = int(round((stop_deg - start_deg) / step_deg)) + 1
        phis = start_deg + step_deg * np.arange(n)
        return cls(tuple(SteeringAngles(theta_deg, float(p)) for p in phis),
                   quantized=quantized, phase_bits=phase_bits)

    def weights(self, geom: ArrayGeometry) -> np.ndarray:
        """(n_entries, M) weight matrix for the codebook over a geometry."""
        rows = []
        for angles in self.entries:
            w = steering_vector(geom, angles, phase_bits=self.phase_bits)
            if self.quantized:
                w = quantize_phases(w, self.phase_bits)
            rows.append(w.weights)
        return np.array(rows)


def search_beam_pair(channel: ChannelRealization, user: int,
                     tx_codebook: BeamCodebook, rx_codebook: BeamCodebook,
                     tx_geom: ArrayGeometry, rx_geom: ArrayGeometry,
                     subarray: int | None = None
                     ) -> tuple[SteeringAngles, SteeringAngles, float]:
    """Best (tx, rx) steering pair for one link by wideband received power.

    Maximizes sum_k |w H^u[k] f|^2 over the codebook product; noise is
    beam-independent after unit-modulus combining so this is the SNR argmax.
    Ties break to the lowest (tx, rx) codebook index. The candidate transmit
    beam lives on a single sub-array (default: sub-array = user index).
    """
    hf = channel.freq[user]                              # (F, N, M)
    m_sub = tx_geom.size
    i = user if subarray is None else subarray
    hf = hf[:, :, i * m_sub:(i + 1) * m_sub]
    w_rx = rx_codebook.weights(rx_geom)                  # (R, N)
    w_tx = tx_codebook.weights(tx_geom)                  # (T, m_sub)
    g = np.einsum("rn,fnm->rfm", w_rx, hf)
    amp = np.einsum("rfm,tm->rtf", g, w_tx)
    power = np.sum(np.abs(amp) ** 2, axis=2)             # (R, T)
    # lowest tx index wins ties, then lowest rx index
    best = np.unravel_index(int(np.argmax(power.T)), power.T.shape)
    t_idx, r_idx = best
    return (tx_codebook.entries[t_idx], rx_codebook.entries[r_idx],
            float(power[r_idx, t_idx]))


def assign_subarrays(best_pairs: list[tuple[SteeringAngles, SteeringAngles]],
                     bs: BsArray, ue_geoms: list[ArrayGeometry],
                     phase_bits: int = 8, quantized: bool = True
                     ) -> tuple[HybridAnalogMatrix, list[AnalogWeights]]:
    """Fixed one-to-one map: user u is served by sub-array u.

    Returns the block-diagonal analog precoder and the per-user combiners.
    """
    k = len(best_pairs)
    if k > bs.n_subarrays:
        raise ConfigurationError(
            f"{k} users exceed {bs.n_subarrays} RF chains")
    tx_weights = []
    combiners = []
    for u, (tx_angles, rx_angles) in enumerate(best_pairs):
        f = steering_vector(bs.subarray, tx_angles, phase_bits=phase_bits)
        w = steering_vector(ue_geoms[u], rx_angles, phase_bits=phase_bits)
        if quantized:
            f = quantize_phases(f, phase_bits)
            w = quantize_phases(w, phase_bits)
        tx_weights.append(f)
        combiners.append(w)
    # idle chains keep a broadside beam so F_A stays full size
    broadside = SteeringAngles(90.0, 0.0)
    for _ in range(bs.n_subarrays - k):
        f = steering_vector(bs.subarray, broadside, phase_bits=phase_bits)
        tx_weights.append(quantize_phases(f, phase_bits) if quantized else f)
    return build_analog_precoder(tx_weights), combiners
