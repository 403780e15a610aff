"""Geometric ray channel between the partially connected BS and each UE.

A channel realization is canonically a per-user FIR tap tensor (delay, N, M)
with support inside the cyclic prefix, so per-block frequency-domain transfer
and time-domain convolution are two exact views of the same object. Hardware
impairments (band-edge rolloff, RF-chain power imbalance) reshape the taps in
the frequency domain and carry a one-sample delay so the reshaped response
stays strictly causal.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .arrays import AnalogWeights, ArrayGeometry, DimensionError, HybridAnalogMatrix, SteeringAngles

N_FFT = 512
CP_LEN = 128


class ConfigurationError(ValueError):
    """Scenario parameters violate a structural constraint."""


@dataclass(frozen=True)
class Ray:
    """One propagation path: departure/arrival directions, complex gain, sample delay."""

    aod: SteeringAngles
    aoa: SteeringAngles
    gain: complex
    delay: int = 0

    def __post_init__(self):
        if not 0 <= self.delay < CP_LEN:
            raise ConfigurationError(
                f"ray delay {self.delay} outside cyclic prefix [0, {CP_LEN})")
        if abs(self.gain) == 0:
            raise ConfigurationError("ray gain must be nonzero")


@dataclass(frozen=True)
class BsArray:
    """BS front end: n_subarrays boards of identical geometry spaced along y."""

    subarray: ArrayGeometry
    n_subarrays: int = 2
    separation_wl: float = 10.0

    @property
    def n_antennas(self) -> int:
        return self.subarray.size * self.n_subarrays

    def response(self, direction: SteeringAngles) -> np.ndarray:
        """Plane-wave propagation response across all M antennas.

        Boards see a common per-board phase offset from their physical
        separation; element responses use the positive-exponent kernel so a
        steering_vector weight set is the matched (conjugate) excitation.
        """
        n, m = self.subarray.element_grid()
        th, ph = direction.theta_rad, direction.phi_rad
        elem = np.exp(2j * np.pi * self.subarray.spacing
                      * (m * np.cos(th) + n * np.sin(th) * np.sin(ph)))
        boards = np.exp(2j * np.pi * self.separation_wl
                        * np.arange(self.n_subarrays) * np.sin(th) * np.sin(ph))
        return np.concatenate([b * elem for b in boards])


def ue_response(geom: ArrayGeometry, direction: SteeringAngles) -> np.ndarray:
    """Plane-wave response of a single-board UE array."""
    n, m = geom.element_grid()
    th, ph = direction.theta_rad, direction.phi_rad
    return np.exp(2j * np.pi * geom.spacing
                  * (m * np.cos(th) + n * np.sin(th) * np.sin(ph)))


@dataclass
class ImpairmentProfile:
    """Front-end non-idealities applied on top of the propagation channel."""

    edge_rolloff_db: float = 6.0
    chain_imbalance_db: tuple[float, ...] = (0.0, -1.0)
    noise_power: float = 0.0

    def __post_init__(self):
        if self.edge_rolloff_db < 0:
            raise ConfigurationError("edge rolloff must be >= 0 dB")

    def subcarrier_gain(self, n_fft: int = N_FFT) -> np.ndarray:
        """Real raised-cosine shape: 1 at the band center (bin n_fft/2),
        10**(-rolloff/20) at the edge bins."""
        edge = 10.0 ** (-self.edge_rolloff_db / 20.0)
        k = np.arange(n_fft)
        return edge + (1.0 - edge) * 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n_fft))


@dataclass
class ChannelRealization:
    """Per-user FIR taps (n_taps, N, M); frequency view derived on demand."""

    taps: list[np.ndarray]
    n_fft: int = N_FFT
    rng_seed: int | None = None
    _freq: list[np.ndarray] | None = field(default=None, repr=False)

    @property
    def n_users(self) -> int:
        return len(self.taps)

    @property
    def freq(self) -> list[np.ndarray]:
        """Per-user (n_fft, N, M) frequency response."""
        if self._freq is None:
            self._freq = [np.fft.fft(t, self.n_fft, axis=0) for t in self.taps]
        return self._freq

    def checksum(self) -> int:
        """Stable digest identifying this realization in run reports."""
        crc = 0
        for t in self.taps:
            crc = zlib.crc32(np.ascontiguousarray(t).tobytes(), crc)
        return crc


def generate_channel(bs: BsArray, ue_geoms: list[ArrayGeometry],
                     rays_per_user: list[list[Ray]],
                     rng_seed: int | None = None) -> ChannelRealization:
    """Sum-of-rays channel: tap at each ray delay is gain * outer(a_rx, a_tx)."""
    if len(ue_geoms) != len(rays_per_user):
        raise ConfigurationError("one ray list required per user")
    taps = []
    for geom, rays in zip(ue_geoms, rays_per_user):
        t = np.zeros((CP_LEN, geom.size, bs.n_antennas), dtype=complex)
        for ray in rays:
            t[ray.delay] += ray.gain * np.outer(ue_response(geom, ray.aoa),
                                                bs.response(ray.aod))
        taps.append(t)
    return ChannelRealization(taps=taps, rng_seed=rng_seed)


def randomize_rays(rays: list[Ray], rng: np.random.Generator,
                   gain_jitter_db: float = 0.0,
                   phase_jitter: bool = True,
                   angle_jitter_deg: float = 0.0) -> list[Ray]:
    """Stochastic wrapper for Monte Carlo sweeps: jitter a base ray list."""
    out = []
    for ray in rays:
        g = abs(ray.gain) * 10.0 ** (rng.normal(0.0, gain_jitter_db) / 20.0)
        ph = rng.uniform(0, 2 * np.pi) if phase_jitter else np.angle(ray.gain)
        aod = SteeringAngles(ray.aod.theta_deg,
                             float(np.clip(ray.aod.phi_deg + rng.normal(0, angle_jitter_deg), -90, 90)))
        aoa = SteeringAngles(ray.aoa.theta_deg,
                             float(np.clip(ray.aoa.phi_deg + rng.normal(0, angle_jitter_deg), -90, 90)))
        out.append(Ray(aod=aod, aoa=aoa, gain=g * np.exp(1j * ph), delay=ray.delay))
    return out


def apply_impairments(h: ChannelRealization, imp: ImpairmentProfile,
                      m_sub: int | None = None) -> ChannelRealization:
    """Scale every H^u[k] by the rolloff shape and per-chain gain offsets.

    The rolloff shape is applied with one sample of delay so the reshaped
    taps remain causal and exactly representable inside the cyclic prefix
    (the raised cosine in k has a 3-tap impulse response at lags -1, 0, +1).
    """
    g = imp.subcarrier_gain(h.n_fft)
    phase = np.exp(-2j * np.pi * np.arange(h.n_fft) / h.n_fft)
    shape = (g * phase)[:, None, None]
    taps_out = []
    for t in h.taps:
        n_ant = t.shape[2]
        if m_sub is None:
            m_sub_u = n_ant // len(imp.chain_imbalance_db)
        else:
            m_sub_u = m_sub
        if n_ant % m_sub_u != 0:
            raise DimensionError(f"{n_ant} antennas not divisible into chains of {m_sub_u}")
        chain_gain = np.repeat(
            10.0 ** (np.asarray(imp.chain_imbalance_db) / 20.0), m_sub_u)
        if len(chain_gain) != n_ant:
            raise DimensionError("imbalance vector length != number of RF chains")
        freq = np.fft.fft(t, h.n_fft, axis=0) * shape * chain_gain[None, None, :]
        t_new = np.fft.ifft(freq, axis=0)
        tail = np.abs(t_new[CP_LEN:]).max() if h.n_fft > CP_LEN else 0.0
        if tail > 1e-9 * max(np.abs(t_new).max(), 1e-300):
            raise ConfigurationError(
                "impaired taps exceed the cyclic prefix; reduce ray delays")
        taps_out.append(t_new[:CP_LEN])
    return ChannelRealization(taps=taps_out, n_fft=h.n_fft, rng_seed=h.rng_seed)


def transmit(x_time: np.ndarray, h: ChannelRealization, noise_power: float = 0.0,
             rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Convolve per-antenna samples with each user's taps and add AWGN.

    x_time: (M, T). Returns per-user (N, T) streams (linear convolution,
    trailing tail truncated to the input length).
    """
    x_time = np.asarray(x_time, dtype=complex)
    if x_time.ndim != 2:
        raise DimensionError("x_time must be (n_antennas, n_samples)")
    n_ant, n_samp = x_time.shape
    nfft = 1
    while nfft < n_samp + CP_LEN:
        nfft *= 2
    xf = np.fft.fft(x_time, nfft, axis=1)                      # (M, F)
    out = []
    for u, t in enumerate(h.taps):
        if t.shape[2] != n_ant:
            raise DimensionError(
                f"user {u}: channel expects {t.shape[2]} antennas, got {n_ant}")
        tf = np.fft.fft(t, nfft, axis=0)                       # (F, N, M)
        yf = np.einsum("fnm,mf->nf", tf, xf)
        y = np.fft.ifft(yf, axis=1)[:, :n_samp]
        if noise_power > 0.0:
            if rng is None:
                raise ValueError("rng required when noise_power > 0")
            scale = np.sqrt(noise_power / 2.0)
            y = y + rng.normal(scale=scale, size=y.shape) \
                  + 1j * rng.normal(scale=scale, size=y.shape)
        out.append(y)
    return out


def reduce_channel(h: ChannelRealization, f_a: HybridAnalogMatrix,
                   combiners: list[AnalogWeights]) -> np.ndarray:
    """Effective digital-domain channel: row u of H_tilde[k] = w_u H^u[k] F_A.

    Returns (n_fft, K, M_RF).
    """
    if len(combiners) != h.n_users:
        raise DimensionError("one combiner required per user")
    fa = f_a.as_matrix()
    rows = []
    for u, (w, hf) in enumerate(zip(combiners, h.freq)):
        if len(w) != hf.shape[1]:
            raise DimensionError(
                f"user {u}: combiner length {len(w)} != {hf.shape[1]} antennas")
        if hf.shape[2] != fa.shape[0]:
            raise DimensionError("analog matrix rows != channel antennas")
        rows.append(np.einsum("n,fnm,mr->fr", w.weights, hf, fa))
    return np.stack(rows, axis=1)
