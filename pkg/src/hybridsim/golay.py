"""Golay complementary pairs, the multi-chain training field, and the
correlation-based reduced-channel estimator.

Each RF chain trains in its own time slot so estimates are exactly orthogonal
under any frequency-selective channel. A slot carries Ga twice, Gb twice and a
trailing guard; the leading copy of each sequence acts as a cyclic prefix, so
correlating the second copy yields the circular correlation of the channel for
any impulse response up to the sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FramingError(ValueError):
    """Received stream does not cover the expected training layout."""


@dataclass(frozen=True)
class GolayPair:
    """Binary (+-1) complementary pair: autocorrelations sum to 2L * delta."""

    a: np.ndarray
    b: np.ndarray

    @property
    def length(self) -> int:
        return len(self.a)


def golay_pair(n: int) -> GolayPair:
    """Complementary pair of length 2**n by recursive doubling."""
    if not 1 <= n <= 10:
        raise ValueError(f"n must be in [1, 10], got {n}")
    a = np.array([1], dtype=np.int64)
    b = np.array([1], dtype=np.int64)
    for _ in range(n):
        a, b = np.concatenate([a, b]), np.concatenate([a, -b])
    return GolayPair(a, b)


@dataclass(frozen=True)
class TrainingField:
    """Time-division training: chain i transmits its Golay slot, others silent.

    signals has shape (m_rf, m_rf * slot_len); slot layout is
    [Ga, Ga, Gb, Gb, guard] with segment length L each.
    """

    signals: np.ndarray
    pair: GolayPair
    slot_len: int

    @property
    def n_chains(self) -> int:
        return self.signals.shape[0]

    @property
    def length(self) -> int:
        return self.signals.shape[1]


def build_cef(m_rf: int, pair_length: int = 128) -> TrainingField:
    """Channel-estimation field with one slot per RF chain."""
    if m_rf < 1:
        raise ValueError(f"m_rf must be >= 1, got {m_rf}")
    n = int(np.log2(pair_length))
    if 1 << n != pair_length:
        raise ValueError(f"pair_length must be a power of two, got {pair_length}")
    pair = golay_pair(n)
    slot = np.concatenate([pair.a, pair.a, pair.b, pair.b,
                           np.zeros(pair_length, dtype=np.int64)])
    signals = np.zeros((m_rf, m_rf * len(slot)), dtype=float)
    for i in range(m_rf):
        signals[i, i * len(slot):(i + 1) * len(slot)] = slot
    return TrainingField(signals=signals, pair=pair, slot_len=len(slot))


def complementary_estimate(rx_a: np.ndarray, rx_b: np.ndarray,
                           pair: GolayPair) -> np.ndarray:
    """Channel impulse response (length L) from circularly received Ga/Gb copies.

    Exact for any channel with support <= L: the spectra of a complementary
    pair satisfy |A|^2 + |B|^2 = 2L on every bin, so the combined correlator
    inverts the channel without division by near-zeros.
    """
    L = pair.length
    af = np.fft.fft(pair.a)
    bf = np.fft.fft(pair.b)
    num = np.fft.fft(rx_a) * np.conj(af) + np.fft.fft(rx_b) * np.conj(bf)
    return np.fft.ifft(num) / (2.0 * L)


def estimate_reduced_channel(rx_training: list[np.ndarray], field: TrainingField,
                             n_fft: int = 512,
                             truth: np.ndarray | None = None):
    """Per-user, per-chain channel estimate from the received training field.

    rx_training: one combined (scalar) sample stream per user, starting at the
    first CEF sample. Returns (estimate, nmse_db) where estimate has shape
    (n_fft, K, m_rf); nmse_db is None unless a truth array is supplied.
    """
    L = field.pair.length
    n_users = len(rx_training)
    est = np.zeros((n_fft, n_users, field.n_chains), dtype=complex)
    for u, rx in enumerate(rx_training):
        if len(rx) < field.length:
            raise FramingError(
                f"user {u}: stream of {len(rx)} samples, need {field.length}")
        for i in range(field.n_chains):
            base = i * field.slot_len
            rx_a = rx[base + L:base + 2 * L]
            rx_b = rx[base + 3 * L:base + 4 * L]
            taps = complementary_estimate(rx_a, rx_b, field.pair)
            est[:, u, i] = np.fft.fft(taps, n_fft)
    nmse_db = None
    if truth is not None:
        err = np.sum(np.abs(est - truth) ** 2)
        ref = np.sum(np.abs(truth) ** 2)
        nmse_db = 10.0 * np.log10(err / ref) if err > 0 else -np.inf
    return est, nmse_db
