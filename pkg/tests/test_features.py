import numpy as np
import pytest

from monoloc.features import (
    FeatureTensor,
    StftSpec,
    dump_tensor,
    from_subbands,
    load_tensor,
    stft_features,
    to_subbands,
)

FS = 16000


def test_frame_count_example():
    assert StftSpec().frame_count(3200) == 22


def test_frame_count_formula_random_lengths():
    spec = StftSpec()
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(512, 20000))
        x = rng.normal(size=n)
        ft = stft_features(x, spec)
        assert ft.frame_count == 1 + (n - 512) // 128
        assert ft.freq_bins == 256
        assert ft.segment_len == n


def test_segment_shorter_than_frame_rejected():
    with pytest.raises(ValueError, match="shorter"):
        stft_features(np.zeros(511))


def test_all_zero_segment_phase_convention():
    ft = stft_features(np.zeros(1024))
    re, im, sin, cos = ft.data
    assert np.all(re == 0.0)
    assert np.all(im == 0.0)
    assert np.all(sin == 0.0)
    assert np.all(cos == 1.0)


def test_sinusoid_concentrates_at_bin_center():
    # 1000 Hz sits exactly on bin 32 of a 512-point FFT at 16 kHz. The oracle
    # below evaluates the windowed DFT sums directly (no fft call).
    from scipy.signal import get_window

    freq_bin = 32
    n = 3200
    t = np.arange(n) / FS
    x = np.sin(2 * np.pi * 1000.0 * t)
    ft = stft_features(x)

    window = get_window("hann", 512, fftbins=True)
    frame = x[:512] * window
    k = np.arange(256)[:, None]
    nn = np.arange(512)[None, :]
    oracle = (frame[None, :] * np.exp(-2j * np.pi * k * nn / 512)).sum(axis=1)

    mag = np.hypot(ft.data[0, :, 0], ft.data[1, :, 0])
    np.testing.assert_allclose(mag, np.abs(oracle), rtol=1e-5, atol=1e-4)

    target = mag[freq_bin]
    others = np.delete(mag, [freq_bin - 1, freq_bin, freq_bin + 1])
    assert target >= 10.0 * others.max()


def test_phase_identities_random_segments():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(512, 6000))
        x = rng.normal(size=n)
        ft = stft_features(x)
        re, im, sin, cos = (ft.data[i].astype(np.float64) for i in range(4))
        assert np.max(np.abs(sin**2 + cos**2 - 1.0)) <= 1e-6
        mag = np.hypot(re, im)
        assert np.max(np.abs(mag * cos - re) / (mag + 1.0)) <= 1e-6
        assert np.max(np.abs(mag * sin - im) / (mag + 1.0)) <= 1e-6
        assert np.max(np.abs(sin)) <= 1.0
        assert np.max(np.abs(cos)) <= 1.0


def test_parseval_proportionality_white_noise():
    from scipy.signal import get_window

    rng = np.random.default_rng(2)
    x = rng.normal(size=16000)
    spec = StftSpec()
    ft = stft_features(x, spec)
    re, im = ft.data[0].astype(np.float64), ft.data[1].astype(np.float64)
    mag2 = re**2 + im**2
    one_sided = 2.0 * mag2[1:].sum() + mag2[0].sum()

    window = get_window("hann", 512, fftbins=True)
    starts = np.arange(ft.frame_count) * 128
    frames = x[starts[:, None] + np.arange(512)] * window
    windowed_energy = float(np.sum(frames**2))
    ratio = one_sided / (512.0 * windowed_energy)
    assert abs(ratio - 1.0) < 0.01


def test_subband_shapes():
    ft = stft_features(np.random.default_rng(3).normal(size=3200))
    sb = to_subbands(ft, 16)
    assert sb.data.shape == (64, 16, 22)
    sb1 = to_subbands(ft, 1)
    assert sb1.data.shape == (4, 256, 22)
    np.testing.assert_array_equal(sb1.data, ft.data)


def test_subband_block_mapping():
    ft = stft_features(np.random.default_rng(4).normal(size=1024))
    sb = to_subbands(ft, 16)
    rows = 256 // 16
    for band in (0, 3, 15):
        block = sb.data[4 * band : 4 * (band + 1)]
        np.testing.assert_array_equal(
            block, ft.data[:, band * rows : (band + 1) * rows, :]
        )


def test_subband_roundtrip_exact():
    ft = stft_features(np.random.default_rng(5).normal(size=2048))
    for n in (1, 2, 4, 8, 16, 32):
        back = from_subbands(to_subbands(ft, n), ft.segment_len)
        np.testing.assert_array_equal(back.data, ft.data)


def test_subband_nondivisor_rejected():
    ft = stft_features(np.zeros(1024))
    with pytest.raises(ValueError, match="divide"):
        to_subbands(ft, 7)


def test_stft_spec_validation():
    with pytest.raises(ValueError):
        StftSpec(frame_len_samples=128, hop_samples=256)
    with pytest.raises(ValueError):
        StftSpec(fft_size=256, frame_len_samples=512)
    with pytest.raises(ValueError):
        StftSpec(freq_bins=512)


def test_tensor_dump_roundtrip(tmp_path):
    data = np.random.default_rng(6).normal(size=(4, 8, 3)).astype(np.float32)
    path = tmp_path / "tensor.bin"
    dump_tensor(path, data)
    np.testing.assert_array_equal(load_tensor(path), data)
