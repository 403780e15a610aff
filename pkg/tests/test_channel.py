import numpy as np
import pytest

from hybridsim.arrays import (AnalogWeights, ArrayGeometry, DimensionError,
                              SteeringAngles, build_analog_precoder,
                              steering_vector)
from hybridsim.channel import (CP_LEN, N_FFT, BsArray, ConfigurationError,
                               ImpairmentProfile, Ray, apply_impairments,
                               generate_channel, randomize_rays,
                               reduce_channel, transmit)

from conftest import make_ray

MONO = ArrayGeometry(1, 1)
MONO_BS = BsArray(subarray=MONO, n_subarrays=1)


def test_ray_delay_must_fit_cyclic_prefix():
    with pytest.raises(ConfigurationError):
        make_ray(0.0, delay=CP_LEN)
    with pytest.raises(ConfigurationError):
        make_ray(0.0, delay=-1)
    with pytest.raises(ConfigurationError):
        Ray(aod=SteeringAngles(90, 0), aoa=SteeringAngles(90, 0), gain=0.0)


def test_single_ray_flat_channel():
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0)]])
    assert np.allclose(h.freq[0][:, 0, 0], 1.0, atol=1e-12)


def test_pure_delay_is_allpass_with_phase_ramp():
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0, delay=16)]])
    resp = h.freq[0][:, 0, 0]
    k = np.arange(N_FFT)
    assert np.allclose(np.abs(resp), 1.0, atol=1e-12)
    assert np.allclose(resp, np.exp(-2j * np.pi * k * 16 / N_FFT), atol=1e-12)


def test_two_ray_response_matches_dft_oracle():
    rays = [[make_ray(0.0, gain_db=0.0, delay=0),
             make_ray(0.0, gain_db=20 * np.log10(0.5), delay=20)]]
    h = generate_channel(MONO_BS, [MONO], rays)
    impulse = np.zeros(N_FFT)
    impulse[0], impulse[20] = 1.0, 0.5
    assert np.allclose(h.freq[0][:, 0, 0], np.fft.fft(impulse), atol=1e-9)


def test_generate_requires_one_ray_list_per_user():
    with pytest.raises(ConfigurationError):
        generate_channel(MONO_BS, [MONO, MONO], [[make_ray(0.0)]])


def test_determinism_and_checksum():
    rays = [[make_ray(-5.0), make_ray(8.0, 12.0, -7.0, 40.0, 14)]]
    bs = BsArray(subarray=ArrayGeometry(8, 2), n_subarrays=2)
    h1 = generate_channel(bs, [ArrayGeometry(2, 2)], rays, rng_seed=5)
    h2 = generate_channel(bs, [ArrayGeometry(2, 2)], rays, rng_seed=5)
    assert h1.checksum() == h2.checksum()
    assert np.array_equal(h1.taps[0], h2.taps[0])


def test_board_separation_phase(bs, ue):
    # boards along y see a relative phase set by their physical separation
    direction = SteeringAngles(90.0, 10.0)
    resp = bs.response(direction)
    m_sub = bs.subarray.size
    ratio = resp[m_sub:] / resp[:m_sub]
    expect = np.exp(2j * np.pi * bs.separation_wl * np.sin(direction.theta_rad)
                    * np.sin(direction.phi_rad))
    assert np.allclose(ratio, expect, atol=1e-12)


def test_impairment_identity_profile():
    imp = ImpairmentProfile(edge_rolloff_db=0.0, chain_imbalance_db=(0.0,))
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0, delay=3)]])
    h2 = apply_impairments(h, imp)
    # rolloff 0 leaves magnitudes; the one-sample causality delay remains
    k = np.arange(N_FFT)
    assert np.allclose(h2.freq[0][:, 0, 0],
                       h.freq[0][:, 0, 0] * np.exp(-2j * np.pi * k / N_FFT),
                       atol=1e-9)


def test_rolloff_edge_to_center_ratio():
    imp = ImpairmentProfile(edge_rolloff_db=6.0, chain_imbalance_db=(0.0,))
    g = imp.subcarrier_gain()
    assert g[N_FFT // 2] == pytest.approx(1.0)
    assert g[0] / g[N_FFT // 2] == pytest.approx(10 ** (-6 / 20), abs=1e-9)


def test_chain_imbalance_scales_column_blocks(bs, ue):
    h = generate_channel(bs, [ue], [[make_ray(-5.0), make_ray(20.0, -10.0, -6.0)]])
    imp = ImpairmentProfile(edge_rolloff_db=0.0, chain_imbalance_db=(0.0, -1.0))
    h2 = apply_impairments(h, imp, m_sub=bs.subarray.size)
    m_sub = bs.subarray.size

    def block_norms(ch):
        f = ch.freq[0]
        return (np.linalg.norm(f[:, :, :m_sub]), np.linalg.norm(f[:, :, m_sub:]))

    n0_a, n0_b = block_norms(h)
    n1_a, n1_b = block_norms(h2)
    delta_db = 20 * np.log10((n1_b / n0_b) / (n1_a / n0_a))
    assert delta_db == pytest.approx(-1.0, abs=1e-9)


def test_impaired_taps_stay_inside_cyclic_prefix():
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0, delay=100)]])
    imp = ImpairmentProfile(edge_rolloff_db=6.0, chain_imbalance_db=(0.0,))
    h2 = apply_impairments(h, imp)
    assert h2.taps[0].shape[0] == CP_LEN


def test_transmit_identity_channel_zero_noise():
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0)]])
    x = (np.arange(40, dtype=float) + 1j)[None, :]
    y = transmit(x, h)[0]
    assert np.allclose(y, x, atol=1e-9)


def test_transmit_noise_variance():
    # negligible channel gain: output is essentially the injected noise
    rays = [[Ray(aod=SteeringAngles(90, 0), aoa=SteeringAngles(90, 0), gain=1e-12)]]
    h = generate_channel(MONO_BS, [MONO], rays)
    rng = np.random.default_rng(7)
    y = transmit(np.zeros((1, 100000), dtype=complex), h, noise_power=0.3, rng=rng)[0]
    assert np.var(y) == pytest.approx(0.3, rel=0.05)


def test_transmit_requires_rng_with_noise():
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0)]])
    with pytest.raises(ValueError):
        transmit(np.zeros((1, 10), dtype=complex), h, noise_power=0.1)


def test_transmit_linearity():
    rays = [[make_ray(0.0, delay=0), make_ray(0.0, gain_db=-6.0, delay=9)]]
    h = generate_channel(MONO_BS, [MONO], rays)
    rng = np.random.default_rng(8)
    x1 = rng.normal(size=(1, 256)) + 1j * rng.normal(size=(1, 256))
    x2 = rng.normal(size=(1, 256)) + 1j * rng.normal(size=(1, 256))
    lhs = transmit(2.0 * x1 + 0.5j * x2, h)[0]
    rhs = 2.0 * transmit(x1, h)[0] + 0.5j * transmit(x2, h)[0]
    assert np.allclose(lhs, rhs, atol=1e-9 * np.abs(lhs).max())


def test_cp_framed_block_matches_frequency_product():
    rays = [[make_ray(0.0, delay=0), make_ray(0.0, gain_db=-3.0, delay=25)]]
    h = generate_channel(MONO_BS, [MONO], rays)
    rng = np.random.default_rng(9)
    block = rng.normal(size=N_FFT) + 1j * rng.normal(size=N_FFT)
    x = np.concatenate([block[-CP_LEN:], block])[None, :]
    y = transmit(np.pad(x, ((0, 0), (0, CP_LEN))), h)[0]
    rx_block = y[0, CP_LEN:CP_LEN + N_FFT]
    assert np.allclose(np.fft.fft(rx_block),
                       h.freq[0][:, 0, 0] * np.fft.fft(block), atol=1e-8)


def test_transmit_dimension_checks():
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0)]])
    with pytest.raises(DimensionError):
        transmit(np.zeros(10, dtype=complex), h)
    with pytest.raises(DimensionError):
        transmit(np.zeros((3, 10), dtype=complex), h)


def test_reduce_channel_identity_stages():
    h = generate_channel(MONO_BS, [MONO], [[make_ray(0.0, delay=5)]])
    f_a = build_analog_precoder([AnalogWeights(np.ones(1))])
    ht = reduce_channel(h, f_a, [AnalogWeights(np.ones(1))])
    assert ht.shape == (N_FFT, 1, 1)
    assert np.allclose(ht[:, 0, 0], h.freq[0][:, 0, 0], atol=1e-12)


def test_reduce_channel_matched_beams_peak(bs, ue):
    # TX steered at the AoD and RX at the AoA: |H_tilde| = gain * M_sub * N
    ray = make_ray(12.0, -7.0)
    h = generate_channel(bs, [ue], [[ray]])
    f = steering_vector(bs.subarray, ray.aod)
    w = steering_vector(ue, ray.aoa)
    idle = steering_vector(bs.subarray, SteeringAngles(90.0, 0.0))
    f_a = build_analog_precoder([f, idle])
    ht = reduce_channel(h, f_a, [w])
    assert np.allclose(np.abs(ht[:, 0, 0]), bs.subarray.size * ue.size, atol=1e-9)


def test_reduce_channel_dominant_diagonal(bs, ue):
    # at 10 deg separation the wrong beam still sits inside the 8-element
    # main lobe, so suppression is a handful of dB; at 60 deg it is deep
    for sep, ratio in ((5.0, 5.0), (30.0, 100.0)):
        rays = [[make_ray(-sep)], [make_ray(sep)]]
        h = generate_channel(bs, [ue, ue], rays)
        f_a = build_analog_precoder([
            steering_vector(bs.subarray, SteeringAngles(90, -sep)),
            steering_vector(bs.subarray, SteeringAngles(90, sep))])
        combiners = [steering_vector(ue, SteeringAngles(90, 0)) for _ in range(2)]
        ht = reduce_channel(h, f_a, combiners)
        for u in range(2):
            diag = np.mean(np.abs(ht[:, u, u]) ** 2)
            cross = np.mean(np.abs(ht[:, u, 1 - u]) ** 2)
            assert diag > ratio * cross
            assert cross > 0


def test_reduce_channel_dimension_checks(bs, ue):
    h = generate_channel(bs, [ue], [[make_ray(0.0)]])
    f_a = build_analog_precoder([AnalogWeights(np.ones(16)),
                                 AnalogWeights(np.ones(16))])
    with pytest.raises(DimensionError):
        reduce_channel(h, f_a, [])
    with pytest.raises(DimensionError):
        reduce_channel(h, f_a, [AnalogWeights(np.ones(3))])


def test_randomize_rays_jitters_but_keeps_structure():
    base = [make_ray(-5.0, delay=4), make_ray(10.0, 3.0, -6.0, 90.0, 30)]
    rng = np.random.default_rng(10)
    out = randomize_rays(base, rng, gain_jitter_db=1.0, phase_jitter=True)
    assert len(out) == len(base)
    for b, o in zip(base, out):
        assert o.delay == b.delay
        assert o.aod == b.aod and o.aoa == b.aoa
        assert abs(o.gain) > 0
    # no jitter at all reproduces the base gains
    same = randomize_rays(base, rng, gain_jitter_db=0.0, phase_jitter=False)
    for b, o in zip(base, same):
        assert o.gain == pytest.approx(b.gain, abs=1e-12)
