"""EMG feature extraction.

Turns a multichannel EMG recording into a per-frame feature matrix:
each channel is band-limited with a triangular FIR filter, sliced into
overlapping frames, and summarized by five time-domain descriptors plus
the non-redundant magnitude bins of a short STFT.  With the default
16-point STFT that is 5 + 9 = 14 features per channel, so an 8-channel
recording yields 112 dimensions per frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, ParameterError

TD_FEATURE_NAMES = ("rms", "mean", "energy", "absmean", "zcr")


@dataclass
class FramingConfig:
    """Frame geometry and front-end filter settings."""

    frame_length_s: float = 0.031
    frame_stride_s: float = 0.0116
    filter_cutoff_hz: float = 115.0
    stft_points: int = 16

    def validate(self) -> None:
        if self.frame_length_s <= 0 or self.frame_stride_s <= 0:
            raise ParameterError("frame length and stride must be positive")
        if self.filter_cutoff_hz <= 0:
            raise ParameterError("filter cutoff must be positive")
        if self.stft_points < 2:
            raise ParameterError("stft_points must be at least 2")
        if self.frame_length_s < self.frame_stride_s:
            raise ParameterError("frame_length_s must be >= frame_stride_s")


@dataclass
class EmgRecording:
    """Raw multichannel EMG samples for one utterance."""

    samples: np.ndarray  # channels x T
    sample_rate_hz: float = 1000.0
    session_id: str = "default"
    utterance_id: str = "utt"
    mode: str = "silent"  # silent | vocalized

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise ParameterError("samples must be a channels x T matrix with T >= 1")
        if self.sample_rate_hz <= 0:
            raise ParameterError("sample_rate_hz must be positive")
        if self.mode not in ("silent", "vocalized"):
            raise ParameterError(f"mode must be 'silent' or 'vocalized', got {self.mode!r}")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class FeatureMatrix:
    """frames x dims matrix with a named feature layout."""

    data: np.ndarray
    dim_labels: list[str] = field(default_factory=list)
    frame_stride_s: float = 0.0116
    frame_length_s: float = 0.031

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ParameterError("feature data must be 2-D (frames x dims)")
        if not np.isfinite(self.data).all():
            raise ParameterError("feature data contains NaN/Inf")
        if len(self.dim_labels) != self.data.shape[1]:
            raise ParameterError(
                f"dim_labels length {len(self.dim_labels)} != dims {self.data.shape[1]}"
            )

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]


def _round_half_up(x: float) -> int:
    """round() with deterministic half-away-from-zero (no banker's rounding)."""
    return int(np.floor(x + 0.5)) if x >= 0 else -int(np.floor(-x + 0.5))


def triangular_kernel(sample_rate_hz: float, cutoff_hz: float) -> np.ndarray:
    """Unit-area symmetric triangular FIR taps.

    Half-width h = round(fs / cutoff) samples, so the kernel (the
    self-convolution of a length-h boxcar) puts its first spectral null
    at approximately the cutoff frequency.  Kernel length is 2h - 1.
    """
    if cutoff_hz <= 0 or sample_rate_hz <= 0:
        raise ParameterError("cutoff and sample rate must be positive")
    if sample_rate_hz <= 2 * cutoff_hz:
        raise ParameterError("sample rate must exceed twice the filter cutoff")
    half = max(_round_half_up(sample_rate_hz / cutoff_hz), 1)
    taps = np.concatenate([np.arange(1, half + 1), np.arange(half - 1, 0, -1)]).astype(np.float64)
    return taps / (half * half)  # sums to exactly h^2 / h^2 = 1


def triangular_filter(
    signal: np.ndarray, sample_rate_hz: float, cutoff_hz: float
) -> np.ndarray:
    """Band-limit a 1-D signal with the unit-area triangular kernel.

    Same-length output: center-aligned convolution with edge-replicated
    padding, so DC gain is exactly 1 everywhere and constant signals
    pass through unchanged.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size < 1:
        raise EmptyInputError("signal must be a non-empty 1-D sequence")
    kernel = triangular_kernel(sample_rate_hz, cutoff_hz)
    pad = (kernel.size - 1) // 2
    padded = np.pad(signal, pad, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def frame_signal(
    signal: np.ndarray, sample_rate_hz: float, cfg: FramingConfig | None = None
) -> np.ndarray:
    """Slice a signal into frames that lie fully inside it.

    Frame k covers samples [round(k*stride*fs), round(k*stride*fs) + L)
    with L = round(frame_length*fs).  Returns an array of shape
    (num_frames, L).
    """
    cfg = cfg or FramingConfig()
    cfg.validate()
    signal = np.asarray(signal, dtype=np.float64)
    frame_len = _round_half_up(cfg.frame_length_s * sample_rate_hz)
    stride = cfg.frame_stride_s * sample_rate_hz
    if frame_len < 1:
        raise ParameterError("frame length shorter than one sample")
    if signal.size < frame_len:
        raise EmptyInputError(
            f"signal of {signal.size} samples is shorter than one {frame_len}-sample frame"
        )
    starts = []
    k = 0
    while True:
        start = _round_half_up(k * stride)
        if start + frame_len > signal.size:
            break
        starts.append(start)
        k += 1
    return np.stack([signal[s : s + frame_len] for s in starts])


def td_descriptors(frame: np.ndarray) -> np.ndarray:
    """Five time-domain descriptors: RMS, mean, energy, mean |x|, ZCR.

    ZCR counts strict sign changes (x_i * x_{i+1} < 0) over n-1 sample
    pairs; zeros never count as crossings.  A single-sample frame has
    ZCR 0.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size < 1:
        raise EmptyInputError("frame must contain at least one sample")
    sq = frame * frame
    rms = float(np.sqrt(sq.mean()))
    mean = float(frame.mean())
    energy = float(sq.sum())
    absmean = float(np.abs(frame).mean())
    if frame.size == 1:
        zcr = 0.0
    else:
        crossings = np.count_nonzero(frame[:-1] * frame[1:] < 0)
        zcr = crossings / (frame.size - 1)
    return np.array([rms, mean, energy, absmean, zcr])


def stft_mags(frame: np.ndarray, stft_points: int = 16) -> np.ndarray:
    """Averaged DFT magnitude bins of a short rectangular-window STFT.

    Slides a stft_points-sample window across the frame with hop
    stft_points/2, takes the DFT magnitude of each fully-contained
    window, averages per bin, and returns the non-redundant bins
    0..stft_points/2 inclusive (9 values for 16 points).
    """
    frame = np.asarray(frame, dtype=np.float64)
    if stft_points < 2:
        raise ParameterError("stft_points must be at least 2")
    if frame.size < stft_points:
        raise ParameterError(
            f"frame of {frame.size} samples shorter than {stft_points}-point STFT window"
        )
    hop = max(stft_points // 2, 1)
    windows = [
        frame[start : start + stft_points]
        for start in range(0, frame.size - stft_points + 1, hop)
    ]
    mags = np.abs(np.fft.rfft(np.stack(windows), n=stft_points, axis=1))
    return mags.mean(axis=0)


def feature_dim_labels(channels: int, stft_points: int = 16) -> list[str]:
    """Per-dimension names: ch{c}_{descriptor} then ch{c}_stft{bin}."""
    labels = []
    n_bins = stft_points // 2 + 1
    for c in range(channels):
        labels.extend(f"ch{c}_{name}" for name in TD_FEATURE_NAMES)
        labels.extend(f"ch{c}_stft{b}" for b in range(n_bins))
    return labels


def featurize_recording(
    rec: EmgRecording, cfg: FramingConfig | None = None
) -> FeatureMatrix:
    """Full front end: filter, frame, and describe every channel.

    Per channel and frame: 5 time-domain descriptors + stft_points/2+1
    magnitude bins, concatenated across channels in channel order.
    """
    cfg = cfg or FramingConfig()
    cfg.validate()
    per_channel = []
    for c in range(rec.channels):
        filtered = triangular_filter(rec.samples[c], rec.sample_rate_hz, cfg.filter_cutoff_hz)
        frames = frame_signal(filtered, rec.sample_rate_hz, cfg)
        td = np.stack([td_descriptors(f) for f in frames])
        spec = np.stack([stft_mags(f, cfg.stft_points) for f in frames])
        per_channel.append(np.hstack([td, spec]))
    data = np.hstack(per_channel)
    return FeatureMatrix(
        data=data,
        dim_labels=feature_dim_labels(rec.channels, cfg.stft_points),
        frame_stride_s=cfg.frame_stride_s,
        frame_length_s=cfg.frame_length_s,
    )
