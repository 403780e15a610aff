"""SC-FDE transceiver chain: QPSK mapping, frame assembly with cyclic-prefix
blocks, Golay timing synchronization, precoded-channel estimation, MMSE
frequency-domain equalization and link metrics.

Frame layout (samples, in order):
  STF        repeated Golay segments plus a negated terminator, sent from all
             sub-arrays through the analog beams only;
  CEF        per-sub-array Golay slots (see golay.build_cef), analog only;
  pCEF       per-user Golay pilot blocks passed through alpha * F_A * F_D,
             training the scalar precoded channel for the equalizer;
  header     one constant CRC-protected block per stream, precoded like data;
  data       512-symbol blocks with 128-sample cyclic prefix, precoded.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .arrays import DimensionError, HybridAnalogMatrix
from .channel import CP_LEN, N_FFT
from .golay import GolayPair, TrainingField, build_cef, golay_pair
from .ldpc import N_CODED, N_INFO, ldpc_decode, ldpc_encode
from .precoding import DigitalPrecoder, precode

BLOCK_LEN = N_FFT + CP_LEN           # 640 samples
BITS_PER_BLOCK = 2 * N_FFT           # QPSK
EVM_FLOOR_DB = -100.0

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


class FrameNotFoundError(RuntimeError):
    """Synchronization metric stayed below threshold."""


class PayloadError(ValueError):
    """User payloads inconsistent with the frame layout."""


# ---------------------------------------------------------------------------
# modulation

def map_qpsk(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped QPSK, unit average energy; bit pair 00 -> (+1+1j)/sqrt(2).

    First bit of each pair selects the real sign, second the imaginary sign
    (0 -> +1, 1 -> -1).
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise ValueError("bit count must be even")
    pairs = bits.reshape(bits.shape[:-1] + (-1, 2))
    return _INV_SQRT2 * ((1.0 - 2.0 * pairs[..., 0]) + 1j * (1.0 - 2.0 * pairs[..., 1]))


def demap_qpsk(symbols: np.ndarray, noise_var: float) -> np.ndarray:
    """Exact per-bit LLRs (positive favors bit 0) under complex AWGN."""
    symbols = np.asarray(symbols)
    scale = 2.0 * np.sqrt(2.0) / noise_var
    llrs = np.empty(symbols.shape + (2,))
    llrs[..., 0] = scale * symbols.real
    llrs[..., 1] = scale * symbols.imag
    return llrs.reshape(symbols.shape[:-1] + (-1,))


def hard_bits(symbols: np.ndarray) -> np.ndarray:
    s = np.asarray(symbols)
    out = np.empty(s.shape + (2,), dtype=np.uint8)
    out[..., 0] = s.real < 0
    out[..., 1] = s.imag < 0
    return out.reshape(s.shape[:-1] + (-1,))


# ---------------------------------------------------------------------------
# frame configuration and layout

HEADER_MAGIC = b"hybridsim-frame-v1"


def header_bits() -> np.ndarray:
    """Constant CRC32-protected header filling exactly one block."""
    payload_len = BITS_PER_BLOCK // 8 - 4
    payload = (HEADER_MAGIC * (payload_len // len(HEADER_MAGIC) + 1))[:payload_len]
    crc = zlib.crc32(payload).to_bytes(4, "little")
    return np.unpackbits(np.frombuffer(payload + crc, dtype=np.uint8))


def check_header(bits: np.ndarray) -> bool:
    data = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
    return zlib.crc32(data[:-4]).to_bytes(4, "little") == data[-4:]


@dataclass(frozen=True)
class FrameConfig:
    n_users: int
    n_chains: int
    codewords_per_user: int = 10
    stf_reps: int = 4
    golay_n: int = 7                 # CEF sequence length 128
    max_decode_iters: int = 20

    @property
    def data_blocks(self) -> int:
        coded = self.codewords_per_user * N_CODED
        return -(-coded // BITS_PER_BLOCK)

    @property
    def filler_bits(self) -> int:
        return self.data_blocks * BITS_PER_BLOCK - self.codewords_per_user * N_CODED


@dataclass(frozen=True)
class FrameLayout:
    """Sample offsets of every field within the frame."""

    stf_len: int
    cef_len: int
    pcef_len: int
    n_payload_blocks: int            # header + data

    @property
    def stf_start(self) -> int:
        return 0

    @property
    def cef_start(self) -> int:
        return self.stf_len

    @property
    def pcef_start(self) -> int:
        return self.stf_len + self.cef_len

    @property
    def payload_start(self) -> int:
        return self.pcef_start + self.pcef_len

    @property
    def total_len(self) -> int:
        return self.payload_start + self.n_payload_blocks * BLOCK_LEN


def stf_waveform(reps: int = 4, golay_n: int = 7) -> np.ndarray:
    """Repeated Ga segments with a negated terminator for an unambiguous peak."""
    ga = golay_pair(golay_n).a.astype(float)
    return np.concatenate([np.tile(ga, reps), -ga])


def pilot_pair() -> GolayPair:
    """Block-length Golay pair used by the precoded CEF."""
    return golay_pair(int(np.log2(N_FFT)))


def _cp(block_time: np.ndarray) -> np.ndarray:
    """Prepend the last CP_LEN samples; operates on (..., n_fft)."""
    return np.concatenate([block_time[..., -CP_LEN:], block_time], axis=-1)


def _precode_block(s_freq: np.ndarray, f_a: HybridAnalogMatrix,
                   f_d: DigitalPrecoder, alpha: float) -> np.ndarray:
    """Frequency-domain stream vectors (n_fft, K) -> CP'd antenna samples (M, 640)."""
    x_freq = precode(s_freq, f_a, f_d, alpha)            # (n_fft, M)
    x_time = np.fft.ifft(x_freq, axis=0).T               # (M, n_fft)
    return _cp(x_time)


@dataclass
class FrameResult:
    samples: np.ndarray              # (M, total_len)
    layout: FrameLayout
    config: FrameConfig
    cef: TrainingField
    info_bits: list[np.ndarray]      # per user (codewords, N_INFO)
    coded_bits: list[np.ndarray]     # per user, flat incl. filler
    tx_symbols: list[np.ndarray]     # per user (payload_blocks, n_fft) time symbols


def build_frame(user_bits: list[np.ndarray], f_a: HybridAnalogMatrix,
                f_d: DigitalPrecoder, alpha: float,
                cfg: FrameConfig) -> FrameResult:
    """Assemble one multi-user frame into per-antenna time-domain samples."""
    k = cfg.n_users
    if len(user_bits) != k:
        raise PayloadError(f"expected {k} payloads, got {len(user_bits)}")
    root_k = np.sqrt(float(k))

    info_bits, coded, tx_syms = [], [], []
    hdr = map_qpsk(header_bits())
    for u, bits in enumerate(user_bits):
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1, N_INFO)
        if bits.shape[0] != cfg.codewords_per_user:
            raise PayloadError(
                f"user {u}: {bits.shape[0]} codewords, expected {cfg.codewords_per_user}")
        cw = ldpc_encode(bits).reshape(-1)
        padded = np.concatenate([cw, np.zeros(cfg.filler_bits, dtype=np.uint8)])
        syms = map_qpsk(padded).reshape(cfg.data_blocks, N_FFT)
        info_bits.append(bits)
        coded.append(padded)
        tx_syms.append(np.concatenate([hdr[None, :], syms], axis=0))

    # preamble: STF on every chain, then per-chain CEF slots, analog only
    stf = stf_waveform(cfg.stf_reps, cfg.golay_n)
    cef = build_cef(cfg.n_chains, 1 << cfg.golay_n)
    stf_ant = f_a.apply(np.tile(stf, (cfg.n_chains, 1)))
    cef_ant = f_a.apply(cef.signals)

    # precoded CEF: two Golay pilot blocks per user, one user at a time
    pair = pilot_pair()
    pcef_blocks = []
    for u in range(k):
        for seq in (pair.a, pair.b):
            s = np.zeros((N_FFT, k), dtype=complex)
            s[:, u] = np.fft.fft(seq.astype(float)) / root_k
            pcef_blocks.append(_precode_block(s, f_a, f_d, alpha))

    # payload blocks: header + data, all users spatially multiplexed
    payload_blocks = []
    n_payload = 1 + cfg.data_blocks
    for b in range(n_payload):
        s = np.stack([np.fft.fft(tx_syms[u][b]) / root_k for u in range(k)], axis=1)
        payload_blocks.append(_precode_block(s, f_a, f_d, alpha))

    samples = np.concatenate([stf_ant, cef_ant] + pcef_blocks + payload_blocks, axis=1)
    layout = FrameLayout(stf_len=len(stf), cef_len=cef.length,
                         pcef_len=2 * k * BLOCK_LEN, n_payload_blocks=n_payload)
    return FrameResult(samples=samples, layout=layout, config=cfg, cef=cef,
                       info_bits=info_bits, coded_bits=coded, tx_symbols=tx_syms)


# ---------------------------------------------------------------------------
# receiver

def synchronize(rx: np.ndarray, cfg: FrameConfig, search_window: int = 2048,
                threshold: float = 0.05) -> int:
    """Frame start index from the Golay STF correlation peak."""
    template = stf_waveform(cfg.stf_reps, cfg.golay_n)
    limit = min(len(rx), search_window + len(template))
    if limit < len(template):
        raise FrameNotFoundError("stream shorter than the sync template")
    corr = np.abs(np.correlate(rx[:limit], template, mode="valid"))
    idx = int(np.argmax(corr))
    energy = float(np.sum(np.abs(rx[idx:idx + len(template)]) ** 2))
    t_energy = float(np.sum(template ** 2))
    if energy == 0 or corr[idx] ** 2 < threshold * energy * t_energy:
        raise FrameNotFoundError("no frame found within the search window")
    return idx


def estimate_precoded_channel(rx: np.ndarray, layout: FrameLayout, user: int,
                              pair: GolayPair | None = None) -> np.ndarray:
    """Scalar precoded channel g[k] for one user from its pilot block pair."""
    pair = pair or pilot_pair()
    base = layout.pcef_start + 2 * user * BLOCK_LEN
    ya = np.fft.fft(rx[base + CP_LEN:base + BLOCK_LEN])
    yb = np.fft.fft(rx[base + BLOCK_LEN + CP_LEN:base + 2 * BLOCK_LEN])
    af = np.fft.fft(pair.a.astype(float))
    bf = np.fft.fft(pair.b.astype(float))
    return (ya * np.conj(af) + yb * np.conj(bf)) / (np.abs(af) ** 2 + np.abs(bf) ** 2)


def fde_equalize(rx_block: np.ndarray, precoded_channel_est: np.ndarray,
                 noise_var: float) -> np.ndarray:
    """Per-subcarrier MMSE scalar equalizer; returns time-domain symbols."""
    g = np.asarray(precoded_channel_est)
    if rx_block.shape != g.shape:
        raise DimensionError("block and channel estimate lengths differ")
    eq = np.conj(g) * rx_block / (np.abs(g) ** 2 + noise_var)
    return np.fft.ifft(eq)


def equalizer_noise_var(g: np.ndarray, rho: float) -> float:
    """Post-equalization symbol error variance for unit-energy symbols."""
    if rho <= 0:
        return 1e-12
    return float(np.mean(rho / (np.abs(g) ** 2 + rho)))


@dataclass
class ReceiveResult:
    sync_index: int
    g_est: np.ndarray                # (n_fft,)
    eq_symbols: np.ndarray           # (payload_blocks, n_fft)
    header_ok: bool
    info_bits: np.ndarray            # (codewords, N_INFO)
    converged: np.ndarray            # (codewords,)
    noise_var_est: float


def receive_frame(rx: np.ndarray, cfg: FrameConfig, layout: FrameLayout,
                  user: int, noise_var: float,
                  sync_window: int = 2048) -> ReceiveResult:
    """Demodulate and decode one user's combined sample stream."""
    start = synchronize(rx, cfg, search_window=sync_window)
    rx = rx[start:]
    if len(rx) < layout.total_len:
        raise FrameNotFoundError("frame truncated after synchronization")
    g = estimate_precoded_channel(rx, layout, user)
    rho = noise_var
    nu2 = max(equalizer_noise_var(g, rho), 1e-12)

    eq_blocks = np.empty((layout.n_payload_blocks, N_FFT), dtype=complex)
    for b in range(layout.n_payload_blocks):
        base = layout.payload_start + b * BLOCK_LEN
        y = np.fft.fft(rx[base + CP_LEN:base + BLOCK_LEN])
        eq_blocks[b] = fde_equalize(y, g, rho)

    hdr_ok = check_header(hard_bits(eq_blocks[0]))
    llrs = demap_qpsk(eq_blocks[1:].reshape(-1), nu2).reshape(-1)
    llrs = llrs[:cfg.codewords_per_user * N_CODED].reshape(-1, N_CODED)
    bits, conv = ldpc_decode(llrs, max_iters=cfg.max_decode_iters)
    return ReceiveResult(sync_index=start, g_est=g, eq_symbols=eq_blocks,
                         header_ok=hdr_ok, info_bits=bits, converged=conv,
                         noise_var_est=nu2)


# ---------------------------------------------------------------------------
# metrics

@dataclass
class Metrics:
    ber: float
    per: float
    evm_db: float

    def __post_init__(self):
        if not (0.0 <= self.ber <= 1.0 and 0.0 <= self.per <= 1.0):
            raise ValueError("rates must lie in [0, 1]")


def evm_db(ref_symbols: np.ndarray, eq_symbols: np.ndarray) -> float:
    ref = np.asarray(ref_symbols).reshape(-1)
    eq = np.asarray(eq_symbols).reshape(-1)
    if ref.size == 0:
        raise ValueError("empty symbol sequences")
    err = np.mean(np.abs(eq - ref) ** 2)
    p_ref = np.mean(np.abs(ref) ** 2)
    if err == 0:
        return EVM_FLOOR_DB
    return max(float(10.0 * np.log10(err / p_ref)), EVM_FLOOR_DB)


def compute_metrics(tx_bits: list[np.ndarray], rx_bits: list[np.ndarray],
                    tx_symbols: np.ndarray, eq_symbols: np.ndarray) -> Metrics:
    """Link metrics over a run; bit arrays are per-frame entries."""
    if len(tx_bits) == 0 or len(tx_bits) != len(rx_bits):
        raise ValueError("need one rx bit array per tx frame")
    total_err = 0
    total_bits = 0
    frames_bad = 0
    for tx, rx in zip(tx_bits, rx_bits):
        errs = int(np.sum(np.asarray(tx, dtype=np.uint8)
                          != np.asarray(rx, dtype=np.uint8)))
        total_err += errs
        total_bits += np.asarray(tx).size
        frames_bad += errs > 0
    return Metrics(ber=total_err / total_bits,
                   per=frames_bad / len(tx_bits),
                   evm_db=evm_db(tx_symbols, eq_symbols))
