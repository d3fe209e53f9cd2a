"""Log-mel spectrogram computation for audio waveforms.

Audio frames are Hann-windowed, transformed to power spectra, pooled
through a triangular mel filterbank, floored, and log-compressed.  The
result is both the transduction training target and the recognizer
input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ParameterError
from .signals import FeatureMatrix


@dataclass
class MelConfig:
    sample_rate_hz: float = 16000.0
    n_fft: int = 512
    hop: int = 186  # ~11.6 ms at 16 kHz, matching the EMG frame stride
    n_mels: int = 80
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0
    log_floor: float = 1e-10

    def validate(self) -> None:
        if not (0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate_hz / 2):
            raise ParameterError("need 0 <= fmin < fmax <= sample_rate/2")
        if self.n_mels < 1:
            raise ParameterError("n_mels must be >= 1")
        if self.hop < 1:
            raise ParameterError("hop must be >= 1")
        if self.n_fft < 2:
            raise ParameterError("n_fft must be >= 2")
        if self.log_floor <= 0:
            raise ParameterError("log_floor must be positive")


@dataclass
class MelSpectrogram:
    """frames x n_mels log-power matrix plus the config that produced it."""

    data: np.ndarray
    config: MelConfig

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if not np.isfinite(self.data).all():
            raise ParameterError("mel spectrogram contains NaN/Inf")
        floor = np.log(self.config.log_floor)
        if self.data.size and self.data.min() < floor - 1e-12:
            raise ParameterError("mel spectrogram entries below log(log_floor)")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_mels(self) -> int:
        return self.data.shape[1]


def hz_to_mel(f):
    """Map frequency in Hz to mel: 2595 * log10(1 + f/700)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ParameterError("frequency must be non-negative")
    out = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(m):
    """Inverse of hz_to_mel: 700 * (10^(m/2595) - 1)."""
    m = np.asarray(m, dtype=np.float64)
    out = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(out) if out.ndim == 0 else out


def mel_band_centers_hz(cfg: MelConfig) -> np.ndarray:
    """Peak frequencies of the filterbank: n_mels points equally spaced in mel."""
    lo, hi = hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz)
    if cfg.n_mels == 1:
        return np.array([mel_to_hz((lo + hi) / 2.0)])
    return mel_to_hz(np.linspace(lo, hi, cfg.n_mels))


def mel_filterbank(cfg: MelConfig) -> np.ndarray:
    """Triangular filters, n_mels x (n_fft/2 + 1).

    Triangles are uniform in mel: filter i peaks at the i-th of n_mels
    mel-equally-spaced points between fmin and fmax, and falls linearly
    (in mel) to 0 at the neighbouring peaks, so adjacent filters share
    their crossover region.  Each row is rescaled so its largest
    sampled bin weight is exactly 1 (peaks rarely coincide with bin
    centers).
    """
    cfg.validate()
    n_bins = cfg.n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * cfg.sample_rate_hz / cfg.n_fft
    bin_mel = hz_to_mel(bin_hz)
    lo, hi = hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz)
    if cfg.n_mels == 1:
        peaks = np.array([(lo + hi) / 2.0])
        half_width = (hi - lo) / 2.0
    else:
        peaks = np.linspace(lo, hi, cfg.n_mels)
        half_width = peaks[1] - peaks[0]
    if half_width <= 0:
        raise ParameterError("degenerate mel range")
    weights = np.maximum(0.0, 1.0 - np.abs(bin_mel[None, :] - peaks[:, None]) / half_width)
    maxima = weights.max(axis=1)
    if np.any(maxima <= 0):
        raise ParameterError(
            f"{int((maxima <= 0).sum())} mel filters span zero FFT bins; "
            "reduce n_mels or increase n_fft"
        )
    return weights / maxima[:, None]


def log_mel(audio: np.ndarray, cfg: MelConfig | None = None) -> MelSpectrogram:
    """Log-mel spectrogram of a waveform.

    Frames of n_fft samples at hop stride (fully inside the signal), a
    Hann window, power spectrum, filterbank product, floor at
    log_floor, then natural log.
    """
    cfg = cfg or MelConfig()
    cfg.validate()
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1 or audio.size < cfg.n_fft:
        raise EmptyInputError(
            f"audio of {audio.size} samples is shorter than n_fft={cfg.n_fft}"
        )
    n_frames = 1 + (audio.size - cfg.n_fft) // cfg.hop
    window = np.hanning(cfg.n_fft)
    starts = np.arange(n_frames) * cfg.hop
    frames = np.stack([audio[s : s + cfg.n_fft] for s in starts]) * window
    power = np.abs(np.fft.rfft(frames, n=cfg.n_fft, axis=1)) ** 2
    fb = mel_filterbank(cfg)
    mel_power = power @ fb.T
    data = np.log(np.maximum(mel_power, cfg.log_floor))
    return MelSpectrogram(data=data, config=cfg)


def mel_to_feature_matrix(mel: MelSpectrogram) -> FeatureMatrix:
    """Repackage a mel spectrogram in the shared feature container.

    dim_labels carry the band center frequencies in Hz.
    """
    centers = mel_band_centers_hz(mel.config)
    return FeatureMatrix(
        data=mel.data,
        dim_labels=[f"mel_{c:.2f}hz" for c in centers],
        frame_stride_s=mel.config.hop / mel.config.sample_rate_hz,
        frame_length_s=mel.config.n_fft / mel.config.sample_rate_hz,
    )
