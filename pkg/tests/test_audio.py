import numpy as np
import pytest
from scipy.io import wavfile

from sparsebss.audio import Spectrogram, Waveform, istft, read_wav, stft, write_wav


def sine(freq, fs, seconds, channels=1):
    t = np.arange(int(fs * seconds)) / fs
    x = np.sin(2 * np.pi * freq * t)
    return Waveform(sample_rate=fs, samples=np.tile(x, (channels, 1)))


class TestStft:
    def test_zero_signal_gives_zero_spectrogram(self):
        w = Waveform(16000, np.zeros((2, 4000)))
        s = stft(w, fft_size=512, hop=256)
        assert s.n_bins == 257
        assert np.abs(s.data).max() == 0.0

    def test_impulse_at_frame_center_is_flat(self):
        fft_size, hop = 512, 256
        pad = fft_size - hop
        # place the impulse at the center of frame t: padded index t*hop + fft/2
        t = 4
        idx = t * hop + fft_size // 2 - pad
        x = np.zeros(4000)
        x[idx] = 1.0
        s = stft(Waveform(16000, x), fft_size=fft_size, hop=hop)
        mags = np.abs(s.data[:, t, 0])
        assert mags.max() - mags.min() < 1e-9

    def test_sine_peak_bin(self):
        w = sine(1000.0, 16000, 1.0)
        s = stft(w, fft_size=4096, hop=2048)
        # bin = f * fft / fs
        mid = s.n_frames // 2
        assert np.argmax(np.abs(s.data[:, mid, 0])) == 256

    def test_empty_signal_rejected(self):
        with pytest.raises(ValueError):
            stft(Waveform(16000, np.zeros((1, 0))), fft_size=512, hop=256)

    def test_bad_params_rejected(self):
        w = sine(440.0, 16000, 0.1)
        with pytest.raises(ValueError):
            stft(w, fft_size=500, hop=250)  # not a power of two
        with pytest.raises(ValueError):
            stft(w, fft_size=512, hop=100)  # hop does not divide fft
        with pytest.raises(ValueError):
            stft(w, fft_size=512, hop=512)  # no overlap

    def test_parseval(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(5000)
        w = Waveform(16000, x)
        fft_size, hop = 512, 128
        s = stft(w, fft_size=fft_size, hop=hop)
        # per-frame rfft Parseval, then compensate the accumulated squared window
        mags = np.abs(s.data[:, :, 0]) ** 2
        frame_energy = (mags[0] + 2 * mags[1:-1].sum(axis=0) + mags[-1]) / fft_size
        window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(fft_size) / fft_size)
        # interior value of sum_m w^2(n - m*hop): constant for the periodic Hann window
        cover = (window[0::hop] ** 2).sum()
        assert abs(frame_energy.sum() / cover - (x**2).sum()) < 1e-6 * (x**2).sum()


class TestIstftRoundTrip:
    @pytest.mark.parametrize("hop_div", [2, 4])
    def test_random_round_trip(self, hop_div):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 4321))
        w = Waveform(16000, x)
        fft_size = 512
        s = stft(w, fft_size=fft_size, hop=fft_size // hop_div)
        y = istft(s)
        assert y.samples.shape == x.shape
        assert np.abs(y.samples - x).max() < 1e-10

    def test_zero_spectrogram(self):
        s = Spectrogram(fft_size=512, hop=256, sample_rate=16000,
                        data=np.zeros((257, 8, 1), dtype=complex), n_samples=1500)
        y = istft(s)
        assert np.abs(y.samples).max() == 0.0
        assert y.length == 1500

    def test_sine_round_trip_snr(self):
        w = sine(523.0, 16000, 0.7)
        y = istft(stft(w, fft_size=1024, hop=256))
        err = y.samples - w.samples
        snr = 10 * np.log10((w.samples**2).sum() / max((err**2).sum(), 1e-300))
        assert snr > 200.0

    def test_non_cola_hop_rejected(self):
        s = Spectrogram(fft_size=512, hop=512, sample_rate=16000,
                        data=np.zeros((257, 4, 1), dtype=complex))
        with pytest.raises(ValueError):
            istft(s)


class TestWavIO:
    def test_float32_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, size=(2, 1000)).astype(np.float32).astype(np.float64)
        w = Waveform(16000, x)
        p = tmp_path / "x.wav"
        write_wav(p, w)
        back = read_wav(p)
        assert back.sample_rate == 16000
        assert back.channels == 2
        assert np.array_equal(back.samples.astype(np.float32), x.astype(np.float32))

    def test_pcm16_scaling(self, tmp_path):
        p = tmp_path / "p.wav"
        wavfile.write(str(p), 16000, np.array([32767, -32768, 0], dtype=np.int16))
        w = read_wav(p)
        np.testing.assert_allclose(w.samples[0], [32767 / 32768, -1.0, 0.0])

    def test_header_echo(self, tmp_path):
        p = tmp_path / "h.wav"
        write_wav(p, Waveform(16000, np.zeros((2, 100))))
        w = read_wav(p)
        assert w.sample_rate == 16000
        assert w.channels == 2

    def test_malformed_file_rejected(self, tmp_path):
        p = tmp_path / "bad.wav"
        p.write_bytes(b"this is not a wav file at all")
        with pytest.raises(ValueError, match="bad.wav"):
            read_wav(p)

    def test_unsupported_codec_rejected(self, tmp_path):
        p = tmp_path / "u8.wav"
        wavfile.write(str(p), 8000, np.array([0, 255], dtype=np.uint8))
        with pytest.raises(ValueError, match="unsupported"):
            read_wav(p)

    def test_pcm16_write(self, tmp_path):
        p = tmp_path / "w16.wav"
        write_wav(p, Waveform(16000, np.array([[0.5, -0.25]])), encoding="pcm16")
        rate, data = wavfile.read(str(p))
        assert data.dtype == np.int16
        np.testing.assert_array_equal(data, [16384, -8192])
