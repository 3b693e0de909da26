"""WAV file I/O and the short-time Fourier transform pair.

Audio is carried as float64 multichannel arrays; spectrograms as one-sided
complex tensors of shape (F, T, M) with F = fft_size/2 + 1.  The analysis
and synthesis windows are both periodic Hann; the inverse transform uses
weighted overlap-add with explicit normalization by the accumulated squared
window, which makes stft -> istft exact (to rounding) on the interior.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile


@dataclass
class Waveform:
    """Multichannel time-domain signal.

    samples has shape (channels, length); nominal range [-1, 1].
    """

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def length(self):
        return self.samples.shape[1]


@dataclass
class Spectrogram:
    """One-sided complex STFT tensor, data shape (F, T, M)."""

    fft_size: int
    hop: int
    sample_rate: int
    data: np.ndarray
    n_samples: int = field(default=0)  # original signal length, for exact istft trimming

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise ValueError(f"spectrogram data must be (F, T, M), got shape {self.data.shape}")
        if self.data.shape[0] != self.fft_size // 2 + 1:
            raise ValueError(
                f"bin count {self.data.shape[0]} inconsistent with fft_size {self.fft_size}"
            )
        if self.data.shape[1] < 1:
            raise ValueError("spectrogram must contain at least one frame")

    @property
    def n_bins(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]


def _hann_periodic(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _validate_stft_params(fft_size, hop):
    if fft_size <= 0 or (fft_size & (fft_size - 1)) != 0:
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if hop <= 0 or fft_size % hop != 0:
        raise ValueError(f"hop ({hop}) must divide fft_size ({fft_size})")


def stft(w: Waveform, fft_size: int = 4096, hop: int = 2048) -> Spectrogram:
    """Hann-windowed one-sided STFT of every channel.

    The signal is zero-padded by fft_size - hop at both ends (plus tail
    alignment) so the inverse transform reconstructs every original sample
    exactly.
    """
    _validate_stft_params(fft_size, hop)
    if hop > fft_size // 2:
        raise ValueError(f"hop {hop} violates the overlap-add constraint (need hop <= fft/2)")
    if w.length == 0:
        raise ValueError("cannot transform an empty signal")
    pad = fft_size - hop
    length = w.length + 2 * pad
    n_frames = int(np.ceil(max(length - fft_size, 0) / hop)) + 1
    total = (n_frames - 1) * hop + fft_size
    x = np.zeros((w.channels, total))
    x[:, pad:pad + w.length] = w.samples
    window = _hann_periodic(fft_size)
    starts = np.arange(n_frames) * hop
    frames = np.stack([x[:, s:s + fft_size] for s in starts], axis=1)  # (M, T, fft)
    spec = np.fft.rfft(frames * window, axis=-1)  # (M, T, F)
    return Spectrogram(
        fft_size=fft_size,
        hop=hop,
        sample_rate=w.sample_rate,
        data=spec.transpose(2, 1, 0),
        n_samples=w.length,
    )


def istft(s: Spectrogram) -> Waveform:
    """Weighted overlap-add inverse of :func:`stft`."""
    _validate_stft_params(s.fft_size, s.hop)
    if s.hop > s.fft_size // 2:
        raise ValueError(
            f"hop {s.hop} violates the overlap-add constraint (need hop <= fft/2)"
        )
    fft_size, hop = s.fft_size, s.hop
    window = _hann_periodic(fft_size)
    spec = s.data.transpose(2, 1, 0)  # (M, T, F)
    frames = np.fft.irfft(spec, n=fft_size, axis=-1) * window  # (M, T, fft)
    n_frames = frames.shape[1]
    total = (n_frames - 1) * hop + fft_size
    out = np.zeros((frames.shape[0], total))
    wsum = np.zeros(total)
    for t in range(n_frames):
        sl = slice(t * hop, t * hop + fft_size)
        out[:, sl] += frames[:, t]
        wsum[sl] += window * window
    good = wsum > 1e-12
    out[:, good] /= wsum[good]
    pad = fft_size - hop
    length = s.n_samples if s.n_samples > 0 else total - 2 * pad
    return Waveform(sample_rate=s.sample_rate, samples=out[:, pad:pad + length])


def read_wav(path) -> Waveform:
    """Read a RIFF/WAVE file (PCM 16-bit or IEEE float-32, any channel count).

    16-bit samples are scaled by 1/32768.
    """
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValueError(f"cannot parse WAV file {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    elif data.dtype == np.float64:
        samples = data
    else:
        raise ValueError(
            f"unsupported WAV codec in {path}: dtype {data.dtype} "
            "(only PCM 16-bit and IEEE float-32 are handled)"
        )
    if samples.ndim == 1:
        samples = samples[None, :]
    else:
        samples = samples.T  # scipy stores (length, channels)
    return Waveform(sample_rate=int(rate), samples=samples)


def write_wav(path, w: Waveform, encoding: str = "float32"):
    """Write a waveform as RIFF/WAVE, IEEE float-32 (default) or PCM 16-bit."""
    data = w.samples.T
    if data.shape[1] == 1:
        data = data[:, 0]
    if encoding == "float32":
        wavfile.write(str(path), w.sample_rate, data.astype(np.float32))
    elif encoding == "pcm16":
        clipped = np.clip(data, -1.0, 32767.0 / 32768.0)
        wavfile.write(str(path), w.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise ValueError(f"unknown encoding {encoding!r} (use 'float32' or 'pcm16')")
