"""STFT-based log-Mel spectrogram extraction with fixed-length padding.

Frames cover [t*hop, t*hop + win_length), Hann-windowed and zero-padded to
n_fft before the DFT, so T = 1 + floor((N - win_length)/hop).  Mel warping
uses the HTK formula 2595*log10(1 + f/700); triangular filters are
normalized to unit peak.  Output is natural-log power clamped at
``log_floor``, which doubles as the right-padding value (spectral silence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform, hann_window

LOG_FLOOR_DEFAULT = 1e-5


@dataclass(frozen=True)
class MelConfig:
    n_fft: int = 1024
    hop: int = 256
    win_length: int = 1024
    n_mels: int = 80
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = LOG_FLOOR_DEFAULT

    def validate(self, sample_rate: int) -> None:
        if self.win_length > self.n_fft:
            raise ValueError(f"win_length {self.win_length} > n_fft {self.n_fft}")
        if not (0 < self.hop <= self.win_length):
            raise ValueError(f"hop {self.hop} outside (0, win_length]")
        if not (0 <= self.f_min < self.f_max <= sample_rate / 2):
            raise ValueError(
                f"need 0 <= f_min < f_max <= Nyquist, got {self.f_min}..{self.f_max} "
                f"at {sample_rate} Hz"
            )
        if not (80 <= self.n_mels <= 128):
            raise ValueError(f"n_mels must be within 80..128, got {self.n_mels}")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    @property
    def silence_value(self) -> float:
        return float(np.log(self.log_floor))


@dataclass(frozen=True)
class MelSpectrogram:
    """Log-Mel energies, float32 [n_mels, T], plus the frame rate in frames/s."""

    values: np.ndarray
    frame_rate: float


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters [n_mels, n_fft//2 + 1] and their center Hz."""

    weights: np.ndarray
    center_freqs: np.ndarray


def hz_to_mel(f):
    """HTK mel scale: 2595*log10(1 + f/700)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be nonnegative")
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def frame_count(n_samples: int, cfg: MelConfig) -> int:
    if n_samples < cfg.win_length:
        raise ValueError(
            f"signal length {n_samples} shorter than one window ({cfg.win_length})"
        )
    return 1 + (n_samples - cfg.win_length) // cfg.hop


def mel_filterbank(cfg: MelConfig, sample_rate: int) -> MelFilterbank:
    """Build unit-peak triangular filters on a uniform mel grid."""
    n_bins = cfg.n_fft // 2 + 1
    bin_freqs = np.arange(n_bins, dtype=np.float64) * sample_rate / cfg.n_fft
    mel_pts = np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2)
    bin_mels = hz_to_mel(bin_freqs)
    weights = np.zeros((cfg.n_mels, n_bins), dtype=np.float64)
    for i in range(cfg.n_mels):
        lo, center, hi = mel_pts[i], mel_pts[i + 1], mel_pts[i + 2]
        rising = (bin_mels - lo) / (center - lo)
        falling = (hi - bin_mels) / (hi - center)
        row = np.clip(np.minimum(rising, falling), 0.0, None)
        peak = row.max()
        if peak <= 0:
            raise ValueError(
                f"mel band {i} captures no FFT bin; n_mels too large for n_fft"
            )
        weights[i] = row / peak  # unit peak after sampling onto the bin grid
    return MelFilterbank(weights=weights, center_freqs=mel_to_hz(mel_pts[1:-1]))


def stft(w: Waveform, cfg: MelConfig) -> np.ndarray:
    """Complex spectrum frames [n_fft//2 + 1, T] (complex128)."""
    cfg.validate(w.sample_rate)
    x = w.samples
    n_frames = frame_count(x.size, cfg)
    idx = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.win_length)[None, :]
    frames = x[idx] * hann_window(cfg.win_length).astype(np.float64)
    return np.fft.rfft(frames, n=cfg.n_fft, axis=1).T


def mel_spectrogram(w: Waveform, cfg: MelConfig) -> MelSpectrogram:
    """log(max(filterbank @ |STFT|^2, log_floor)), natural log, float32."""
    spec = stft(w, cfg)
    power = np.abs(spec) ** 2
    fb = mel_filterbank(cfg, w.sample_rate)
    mel = fb.weights @ power
    values = np.log(np.maximum(mel, cfg.log_floor)).astype(np.float32)
    return MelSpectrogram(values=values, frame_rate=w.sample_rate / cfg.hop)


def pad_mel(
    m: MelSpectrogram, target_frames: int, log_floor: float = LOG_FLOOR_DEFAULT
) -> MelSpectrogram:
    """Right-pad with log(log_floor) (silence) to exactly target_frames columns."""
    n_frames = m.values.shape[1]
    if n_frames > target_frames:
        raise ValueError(f"frame count {n_frames} exceeds pad target {target_frames}")
    if n_frames == target_frames:
        return m
    fill = np.float32(np.log(log_floor))
    padded = np.full((m.values.shape[0], target_frames), fill, dtype=np.float32)
    padded[:, :n_frames] = m.values
    return MelSpectrogram(values=padded, frame_rate=m.frame_rate)
