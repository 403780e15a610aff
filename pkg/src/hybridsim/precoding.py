"""Per-subcarrier digital precoding: regularized zero-forcing, power
normalization over the hybrid cascade, and symbol precoding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import DimensionError, HybridAnalogMatrix


class SingularSubcarrierError(np.linalg.LinAlgError):
    """Unregularized inversion hit a singular system at a specific subcarrier."""

    def __init__(self, subcarrier: int):
        super().__init__(f"singular K x K system at subcarrier {subcarrier}; "
                         f"use gamma > 0")
        self.subcarrier = subcarrier


@dataclass
class DigitalPrecoder:
    """Per-subcarrier M_RF x K matrices plus regularization and power scale."""

    matrices: np.ndarray          # (n_fft, M_RF, K)
    gamma: float
    alpha: float = 1.0

    @property
    def n_fft(self) -> int:
        return self.matrices.shape[0]

    @classmethod
    def identity(cls, n_fft: int, n_chains: int,
                 n_streams: int | None = None) -> "DigitalPrecoder":
        """Analog-only baseline: F_D[k] routes stream u straight to chain u
        on every subcarrier (square identity when n_streams == n_chains)."""
        if n_streams is None:
            n_streams = n_chains
        eye = np.broadcast_to(np.eye(n_chains, n_streams, dtype=complex),
                              (n_fft, n_chains, n_streams)).copy()
        return cls(matrices=eye, gamma=0.0)


def rzf(h_tilde: np.ndarray, gamma: float) -> DigitalPrecoder:
    """F_D[k] = H[k]^H (gamma I + H[k] H[k]^H)^-1 for every subcarrier.

    h_tilde: (n_fft, K, M_RF) with K <= M_RF. gamma = 0 gives zero-forcing.
    """
    h_tilde = np.asarray(h_tilde, dtype=complex)
    if h_tilde.ndim != 3:
        raise DimensionError("h_tilde must be (n_fft, K, M_RF)")
    n_fft, k, m_rf = h_tilde.shape
    if k > m_rf:
        raise DimensionError(f"K={k} streams exceed M_RF={m_rf} chains")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    gram = h_tilde @ np.conj(np.swapaxes(h_tilde, 1, 2))
    gram += gamma * np.eye(k)
    try:
        sol = np.linalg.solve(gram, h_tilde)            # (n_fft, K, M_RF)
    except np.linalg.LinAlgError:
        for idx in range(n_fft):
            if abs(np.linalg.det(gram[idx])) < np.finfo(float).tiny:
                raise SingularSubcarrierError(idx) from None
        raise
    f_d = np.conj(np.swapaxes(sol, 1, 2))               # (n_fft, M_RF, K)
    return DigitalPrecoder(matrices=f_d, gamma=gamma)


def normalize(f_a: HybridAnalogMatrix, f_d: DigitalPrecoder) -> float:
    """Power scale alpha = 1 / sqrt(mean_k ||F_A F_D[k]||_F^2).

    With E[s^H s] = 1 per subcarrier, alpha enforces unit average transmit
    power over the band (aggregate, not per-subcarrier, so the precoder's
    spectral shaping is preserved).
    """
    fa = f_a.as_matrix()
    if fa.shape[1] != f_d.matrices.shape[1]:
        raise DimensionError("analog columns != digital rows")
    cascade = fa[None] @ f_d.matrices
    mean_sq = np.mean(np.sum(np.abs(cascade) ** 2, axis=(1, 2)))
    if mean_sq == 0:
        raise ValueError("all-zero precoder cannot be normalized")
    return float(1.0 / np.sqrt(mean_sq))


def precode(s: np.ndarray, f_a: HybridAnalogMatrix, f_d: DigitalPrecoder,
            alpha: float) -> np.ndarray:
    """x[k] = alpha * F_A * F_D[k] * s[k]; s shape (n_fft, K) -> (n_fft, M)."""
    s = np.asarray(s, dtype=complex)
    if s.shape[0] != f_d.n_fft or s.shape[1] != f_d.matrices.shape[2]:
        raise DimensionError(
            f"symbols {s.shape} incompatible with precoder "
            f"({f_d.n_fft}, {f_d.matrices.shape[2]})")
    chain = np.einsum("frk,fk->fr", f_d.matrices, s)
    fa = f_a.as_matrix()
    return alpha * chain @ fa.T
