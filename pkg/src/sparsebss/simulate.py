"""Room simulation and synthetic test-signal generation.

The mixing chain is the image-source method on a rectangular room: wall
absorption comes from the Sabine relation for a requested reverberation
time, every image contributes a 1/distance-attenuated impulse at its
travel delay (linear-interpolation fractional delay), and mixtures are
formed by convolving dry sources with the simulated responses.

Synthetic sources are built directly from the low-rank nonnegative model
(peaked spectral templates, sparse activations, random phases) so that
engine-level oracle tests run on data the source model describes exactly.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .audio import Spectrogram, Waveform, istft

SPEED_OF_SOUND = 343.0


@dataclass
class RoomSpec:
    """Rectangular room geometry plus acoustic parameters."""

    dimensions: np.ndarray          # (3,) meters
    t60: float                      # seconds
    mic_positions: np.ndarray       # (M, 3) meters
    source_positions: np.ndarray    # (N, 3) meters
    sample_rate: int = 16000
    rir_length: int = None          # samples; derived from t60 when omitted
    max_order: int = None           # reflection bounce cap; None = distance-capped

    def __post_init__(self):
        self.dimensions = np.asarray(self.dimensions, dtype=np.float64)
        self.mic_positions = np.atleast_2d(np.asarray(self.mic_positions, dtype=np.float64))
        self.source_positions = np.atleast_2d(
            np.asarray(self.source_positions, dtype=np.float64)
        )
        if self.dimensions.shape != (3,) or np.any(self.dimensions <= 0):
            raise ValueError("room dimensions must be three positive lengths")
        if self.t60 < 0:
            raise ValueError("t60 must be nonnegative")
        for name, pos in (("microphone", self.mic_positions),
                          ("source", self.source_positions)):
            if pos.shape[1] != 3:
                raise ValueError(f"{name} positions must be (n, 3)")
            if np.any(pos <= 0) or np.any(pos >= self.dimensions):
                raise ValueError(f"every {name} position must lie strictly inside the room")
        if self.rir_length is None:
            self.rir_length = default_rir_length(self)

    @property
    def n_mics(self):
        return self.mic_positions.shape[0]

    @property
    def n_sources(self):
        return self.source_positions.shape[0]


def default_rir_length(room: RoomSpec) -> int:
    """1.2 x t60 worth of samples, at least enough for every direct path."""
    dists = np.linalg.norm(
        room.source_positions[:, None, :] - room.mic_positions[None, :, :], axis=-1
    )
    direct = int(np.ceil(dists.max() / SPEED_OF_SOUND * room.sample_rate)) + 8
    return max(int(1.2 * room.t60 * room.sample_rate), direct)


def sabine_alpha(room: RoomSpec) -> float:
    """Average wall absorption 0.161 V / (S t60), clamped to (0, 0.99];
    zero reverberation time means fully absorbing walls (anechoic)."""
    if room.t60 == 0.0:
        return 1.0
    lx, ly, lz = room.dimensions
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    return min(0.161 * volume / (surface * room.t60), 0.99)


def image_source_rir(room: RoomSpec, source_index: int, mic_index: int,
                     max_order: int = None) -> np.ndarray:
    """Impulse response between one source and one microphone.

    Every image source contributes beta^bounces / distance at its travel
    delay, where beta = sqrt(1 - alpha); fractional delays are spread over
    the two neighbouring samples by linear interpolation.
    """
    src = room.source_positions[source_index]
    mic = room.mic_positions[mic_index]
    if np.linalg.norm(src - mic) < 1e-9:
        raise ValueError("source and microphone are collocated")
    if max_order is None:
        max_order = room.max_order
    fs = room.sample_rate
    n_samples = room.rir_length
    alpha = sabine_alpha(room)
    beta = np.sqrt(max(1.0 - alpha, 0.0))

    reach = SPEED_OF_SOUND * n_samples / fs
    counts = np.ceil(reach / (2.0 * room.dimensions)).astype(int) + 1
    if max_order is not None:
        counts = np.minimum(counts, max_order + 1)
    axes = [np.arange(-c, c + 1) for c in counts]
    r = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    p = np.stack(np.meshgrid([0, 1], [0, 1], [0, 1], indexing="ij"), axis=-1).reshape(-1, 3)

    # image positions (1 - 2p) s + 2 r L and bounce counts sum_axis |2r - p|
    pos = (1 - 2 * p)[None, :, :] * src[None, None, :] \
        + 2.0 * r[:, None, :] * room.dimensions[None, None, :]
    bounces = np.abs(2 * r[:, None, :] - p[None, :, :]).sum(axis=-1)
    dist = np.linalg.norm(pos - mic[None, None, :], axis=-1)

    keep = dist > 1e-9
    if max_order is not None:
        keep &= bounces <= max_order
    if beta == 0.0:
        keep &= bounces == 0
    dist = dist[keep]
    bounces = bounces[keep]

    amp = np.where(bounces > 0, beta**bounces, 1.0) / dist
    delay = dist / SPEED_OF_SOUND * fs
    nearest = np.round(delay)
    delay = np.where(np.abs(delay - nearest) < 1e-9, nearest, delay)
    base = np.floor(delay).astype(int)
    frac = delay - base
    h = np.zeros(n_samples + 1)
    inside = base < n_samples
    np.add.at(h, base[inside], amp[inside] * (1.0 - frac[inside]))
    np.add.at(h, base[inside] + 1, amp[inside] * frac[inside])
    return h[:n_samples]


def simulate_rirs(room: RoomSpec) -> np.ndarray:
    """All source-to-mic responses, shape (N, M, rir_length)."""
    return np.stack([
        np.stack([image_source_rir(room, n, m) for m in range(room.n_mics)])
        for n in range(room.n_sources)
    ])


def convolve_mix(sources, rirs, reference_mic=0):
    """Convolutive mixture x_m = sum_n s_n * rir_{n,m}.

    sources: list of equal-rate Waveform (or (N, L) array + sample_rate via
    Waveform inputs only); rirs: (N, M, rir_length).  Returns the mixture
    Waveform (M channels) and the per-source spatial images at the
    reference mic, (N, L), time-aligned with the mixture.
    """
    rirs = np.asarray(rirs, dtype=np.float64)
    n_src, n_mic, _ = rirs.shape
    if len(sources) != n_src:
        raise ValueError(f"{len(sources)} sources but {n_src} responses")
    rate = sources[0].sample_rate
    if any(s.sample_rate != rate for s in sources):
        raise ValueError("all sources must share one sample rate")
    length = max(s.length for s in sources)
    mono = np.zeros((n_src, length))
    for n, s in enumerate(sources):
        if s.channels != 1:
            raise ValueError("dry sources must be mono")
        mono[n, :s.length] = s.samples[0]
    mixture = np.zeros((n_mic, length))
    references = np.zeros((n_src, length))
    for n in range(n_src):
        for m in range(n_mic):
            img = fftconvolve(mono[n], rirs[n, m])[:length]
            mixture[m] += img
            if m == reference_mic:
                references[n] = img
    return Waveform(sample_rate=rate, samples=mixture), references


@dataclass
class SynthSources:
    """Synthetic sources plus the exact low-rank data they were built from."""

    waveforms: list
    spectrograms: list                  # complex (F, T) per source
    basis: list                         # (F, K) per source
    activation: list                    # (K, T) per source
    fft_size: int = field(default=0)
    hop: int = field(default=0)


def synth_nmf_sources(n_bins, n_frames, n_basis, seed=0, n_sources=2,
                      sample_rate=16000, active_prob=0.4) -> SynthSources:
    """Generate waveforms whose power spectrograms have exact rank-K
    nonnegative structure with sparse activations.

    Spectral templates are sums of a few random frequency bumps; activations
    are exponential magnitudes gated by a Bernoulli(active_prob) mask, so
    the generating activation matrices are mostly zero.  The complex
    spectrogram is sqrt(W H) with random phases and the waveform its
    inverse transform.
    """
    fft_size = 2 * (n_bins - 1)
    if fft_size <= 0 or (fft_size & (fft_size - 1)) != 0:
        raise ValueError(f"n_bins must be fft/2 + 1 for a power-of-two fft, got {n_bins}")
    hop = fft_size // 2
    rng = np.random.default_rng(seed)
    freqs = np.arange(n_bins)

    waveforms, spectrograms, bases, activations = [], [], [], []
    for _ in range(n_sources):
        w = np.zeros((n_bins, n_basis))
        for k in range(n_basis):
            n_bumps = rng.integers(1, 4)
            centers = rng.uniform(0.02, 0.9, n_bumps) * n_bins
            widths = rng.uniform(0.01, 0.08, n_bumps) * n_bins
            gains = rng.uniform(0.3, 1.0, n_bumps)
            for c, s, g in zip(centers, widths, gains):
                w[:, k] += g * np.exp(-0.5 * ((freqs - c) / s) ** 2)
            w[:, k] += 1e-3
        mask = rng.random((n_basis, n_frames)) < active_prob
        h = mask * rng.exponential(1.0, (n_basis, n_frames))
        power = w @ h
        phase = rng.uniform(0.0, 2.0 * np.pi, (n_bins, n_frames))
        phase[0] = 0.0
        phase[-1] = 0.0
        spec = np.sqrt(power) * np.exp(1j * phase)
        wav = istft(Spectrogram(fft_size=fft_size, hop=hop, sample_rate=sample_rate,
                                data=spec[:, :, None]))
        peak = np.abs(wav.samples).max()
        gain = 0.5 / peak if peak > 0 else 1.0
        wav.samples *= gain
        waveforms.append(wav)
        spectrograms.append(spec * gain)
        bases.append(w * gain)          # keep W H consistent with |spec|^2
        activations.append(h * gain)
    return SynthSources(waveforms, spectrograms, bases, activations,
                        fft_size=fft_size, hop=hop)


def two_source_room(t60, angles_deg, dimensions=(8.0, 8.0, 3.0), mic_spacing=0.0283,
                    source_distance=2.0, sample_rate=16000, rir_length=None,
                    max_order=None) -> RoomSpec:
    """Standard two-mic, two-source geometry: mics at the room center,
    sources at the given angles from broadside at a fixed distance."""
    dims = np.asarray(dimensions, dtype=np.float64)
    center = dims / 2.0
    half = np.array([mic_spacing / 2.0, 0.0, 0.0])
    mics = np.stack([center - half, center + half])
    srcs = []
    for ang in angles_deg:
        rad = np.deg2rad(ang)
        srcs.append(center + source_distance * np.array([np.sin(rad), np.cos(rad), 0.0]))
    return RoomSpec(
        dimensions=dims, t60=t60, mic_positions=mics,
        source_positions=np.stack(srcs), sample_rate=sample_rate,
        rir_length=rir_length, max_order=max_order,
    )
