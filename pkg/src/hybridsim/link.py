"""End-to-end experiment engine: beam acquisition, per-frame Golay training,
precoder design and the Monte Carlo frame loop, with paired seeds and paired
channel realizations across precoder modes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import AnalogWeights, HybridAnalogMatrix
from .beams import BeamCodebook, assign_subarrays, search_beam_pair
from .channel import (CP_LEN, ChannelRealization, apply_impairments,
                      generate_channel, randomize_rays, reduce_channel,
                      transmit)
from .golay import build_cef, estimate_reduced_channel
from .ldpc import N_INFO
from .phy import (FrameConfig, FrameNotFoundError, Metrics, build_frame,
                  compute_metrics, receive_frame)
from .precoding import DigitalPrecoder, normalize, rzf
from .scenario import Scenario

# rng stream ids for the documented seed split (seed, stream, frame index)
BITS_STREAM = 0
NOISE_STREAM = 1
TRAIN_STREAM = 2
DRIFT_STREAM = 3


def frame_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Monte Carlo seed split: one generator per (seed, stream, frame)."""
    return np.random.default_rng((seed, stream, index))


def auto_gamma(sc: Scenario) -> float:
    """MMSE-flavored default: K * sigma^2 / P for the chain-level budget.

    Chain signals carry power 1/M_sub under the unit total constraint and
    combined noise is N * noise_power, giving K * M_sub * N * noise_power.
    """
    return (sc.n_users * sc.bs.subarray.size * sc.ue.size * sc.noise_power)


@dataclass
class ModeResult:
    mode: str
    metrics: list[Metrics]                     # per user
    g_traces: list[np.ndarray]                 # per user |precoded channel|
    constellations: list[np.ndarray]           # per user equalized samples
    sync_failures: int = 0


@dataclass
class RunReport:
    scenario: Scenario
    channel_checksum: int
    beams: list[tuple]                         # per user (tx, rx) angles
    h_tilde_trace: np.ndarray                  # (n_fft, K, M_RF)
    mode_results: dict[str, ModeResult] = field(default_factory=dict)


def realize_channel(sc: Scenario, frame_index: int | None = None
                    ) -> ChannelRealization:
    """Channel for one frame; drift resamples reflections deterministically."""
    rays = sc.rays_per_user
    if frame_index is not None and sc.drift is not None:
        rng = frame_rng(sc.seed, DRIFT_STREAM, frame_index)
        d = sc.drift
        rays = [
            [user_rays[0]] + randomize_rays(user_rays[1:], rng,
                                            gain_jitter_db=d.gain_jitter_db,
                                            phase_jitter=d.phase_jitter)
            if d.keep_los else
            randomize_rays(user_rays, rng, gain_jitter_db=d.gain_jitter_db,
                           phase_jitter=d.phase_jitter)
            for user_rays in rays]
    h = generate_channel(sc.bs, [sc.ue] * sc.n_users, rays, rng_seed=sc.seed)
    if sc.impairments is not None:
        h = apply_impairments(h, sc.impairments, m_sub=sc.bs.subarray.size)
    return h


def acquire_beams(sc: Scenario, h: ChannelRealization
                  ) -> tuple[HybridAnalogMatrix, list[AnalogWeights], list[tuple]]:
    grid = sc.beam_grid
    tx_book = BeamCodebook.azimuth_grid(grid.start_deg, grid.stop_deg,
                                        grid.step_deg, phase_bits=sc.phase_bits)
    rx_book = BeamCodebook.azimuth_grid(grid.start_deg, grid.stop_deg,
                                        grid.step_deg, phase_bits=sc.phase_bits)
    pairs = []
    for u in range(sc.n_users):
        tx_a, rx_a, _ = search_beam_pair(h, u, tx_book, rx_book,
                                         sc.bs.subarray, sc.ue)
        pairs.append((tx_a, rx_a))
    f_a, combiners = assign_subarrays(pairs, sc.bs, [sc.ue] * sc.n_users,
                                      phase_bits=sc.phase_bits)
    return f_a, combiners, pairs


def train_reduced_channel(sc: Scenario, h: ChannelRealization,
                          f_a: HybridAnalogMatrix,
                          combiners: list[AnalogWeights],
                          rng: np.random.Generator) -> np.ndarray:
    """Golay training exchange: CEF over the air, per-user estimation."""
    cef = build_cef(f_a.n_chains)
    x = np.pad(f_a.apply(cef.signals), ((0, 0), (0, CP_LEN)))
    rx_users = transmit(x, h, noise_power=sc.noise_power, rng=rng)
    streams = [w.weights @ y for w, y in zip(combiners, rx_users)]
    est, _ = estimate_reduced_channel(streams, cef)
    return est


def design_precoder(mode: str, h_tilde: np.ndarray, sc: Scenario,
                    f_a: HybridAnalogMatrix) -> tuple[DigitalPrecoder, float]:
    if mode == "analog_only":
        f_d = DigitalPrecoder.identity(h_tilde.shape[0], f_a.n_chains,
                                       n_streams=sc.n_users)
    elif mode == "zf":
        f_d = rzf(h_tilde, 0.0)
    elif mode == "rzf":
        gamma = auto_gamma(sc) if sc.gamma is None else sc.gamma
        f_d = rzf(h_tilde, gamma)
    else:
        raise ValueError(f"unknown precoder mode '{mode}'")
    alpha = normalize(f_a, f_d)
    f_d.alpha = alpha
    return f_d, alpha


def run_mode(sc: Scenario, f_a: HybridAnalogMatrix,
             combiners: list[AnalogWeights], mode: str) -> ModeResult:
    """Monte Carlo frame loop for one precoder mode.

    Every frame redoes the training exchange and precoder design against that
    frame's channel, mirroring an estimate-precode-transmit measurement cycle.
    All rng streams depend only on (scenario seed, frame index), so modes are
    exactly paired.
    """
    k = sc.n_users
    cfg = FrameConfig(n_users=k, n_chains=f_a.n_chains,
                      codewords_per_user=sc.codewords_per_frame,
                      max_decode_iters=sc.decoder_iters)
    rho = sc.ue.size * sc.noise_power       # combined-noise variance per sample
    tx_frames = [[] for _ in range(k)]
    rx_frames = [[] for _ in range(k)]
    eq_syms = [[] for _ in range(k)]
    ref_syms = [[] for _ in range(k)]
    g_last = [None] * k
    sync_failures = 0
    for i in range(sc.frames):
        h = realize_channel(sc, frame_index=i)
        if sc.oracle_csi:
            h_tilde = reduce_channel(h, f_a, combiners)
        else:
            h_tilde = train_reduced_channel(
                sc, h, f_a, combiners, frame_rng(sc.seed, TRAIN_STREAM, i))
        f_d, alpha = design_precoder(mode, h_tilde, sc, f_a)

        rng = frame_rng(sc.seed, BITS_STREAM, i)
        bits = [rng.integers(0, 2, size=(sc.codewords_per_frame, N_INFO),
                             dtype=np.uint8) for _ in range(k)]
        frame = build_frame(bits, f_a, f_d, alpha, cfg)
        # guard tail so channel delay plus sync offset never truncates the frame
        x = np.pad(frame.samples, ((0, 0), (sc.timing_offset, CP_LEN)))
        noise_rng = frame_rng(sc.seed, NOISE_STREAM, i)
        rx_users = transmit(x, h, noise_power=sc.noise_power, rng=noise_rng)
        for u in range(k):
            stream = combiners[u].weights @ rx_users[u]
            try:
                res = receive_frame(stream, cfg, frame.layout, u, rho,
                                    sync_window=max(sc.timing_offset, 16))
            except FrameNotFoundError:
                sync_failures += 1
                tx_frames[u].append(bits[u].reshape(-1))
                rx_frames[u].append(1 - bits[u].reshape(-1))   # count as lost
                continue
            tx_frames[u].append(bits[u].reshape(-1))
            rx_frames[u].append(res.info_bits.reshape(-1))
            eq_syms[u].append(res.eq_symbols[1:])              # data blocks
            ref_syms[u].append(frame.tx_symbols[u][1:])
            g_last[u] = np.abs(res.g_est)
    metrics = []
    constellations = []
    for u in range(k):
        ref = (np.concatenate([r.reshape(-1) for r in ref_syms[u]])
               if ref_syms[u] else np.ones(1))
        eq = (np.concatenate([e.reshape(-1) for e in eq_syms[u]])
              if eq_syms[u] else np.full(1, np.inf + 0j))
        metrics.append(compute_metrics(tx_frames[u], rx_frames[u], ref, eq))
        constellations.append(eq[:1024] if eq_syms[u] else np.empty(0, complex))
    return ModeResult(mode=mode, metrics=metrics, g_traces=list(g_last),
                      constellations=constellations, sync_failures=sync_failures)


def run_scenario(sc: Scenario) -> RunReport:
    """Full experiment: beams from the base channel, then the selected modes
    over identical per-frame channel realizations and noise."""
    h_base = realize_channel(sc)
    f_a, combiners, pairs = acquire_beams(sc, h_base)
    h_tilde_base = reduce_channel(h_base, f_a, combiners)
    report = RunReport(scenario=sc, channel_checksum=h_base.checksum(),
                       beams=pairs, h_tilde_trace=h_tilde_base)
    for mode in sc.modes:
        report.mode_results[mode] = run_mode(sc, f_a, combiners, mode)
    return report
