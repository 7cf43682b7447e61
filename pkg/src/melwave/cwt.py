"""Continuous wavelet transform with the Morlet basis.

Two routes compute the same transform: ``cwt_direct`` is the O(N^2)
Riemann-sum reference evaluated at every sample shift, ``cwt_fft`` the
per-scale FFT convolution fast path.  Both truncate the kernel at +-6
standard deviations (tail mass < 1e-8) and zero-pad the signal at the
boundaries, so they agree to FFT roundoff everywhere.

The analysis kernel at shift y and scale s is
exp(-i*omega0*(t-y)/s) * exp(-(t-y)^2 / (2 s^2)), i.e. the conjugate of the
Morlet atom psi(u) = exp(i*omega0*u) exp(-u^2/2) sampled at u = (t-y)/s.
An optional 1/sqrt(s) amplitude normalization (on by default) makes
magnitudes comparable across scales.

Scalograms are log(1 + |W|) sampled at Mel frame centers, so the wavelet
feature is frame-aligned with the Mel spectrogram it accompanies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .melspec import MelConfig, frame_count

TAIL_SIGMAS = 6.0


@dataclass(frozen=True)
class CwtConfig:
    omega0: float = 6.0
    n_scales: int = 64
    f_lo: float = 20.0
    f_hi: float | None = None  # None -> Nyquist
    normalize: bool = True

    def validate(self, sample_rate: int) -> None:
        if self.omega0 < 5.0:
            raise ValueError(f"omega0 must be >= 5, got {self.omega0}")
        if self.n_scales < 2:
            raise ValueError("n_scales must be >= 2")
        f_hi = self.resolved_f_hi(sample_rate)
        if not (0 < self.f_lo < f_hi <= sample_rate / 2):
            raise ValueError(
                f"need 0 < f_lo < f_hi <= Nyquist, got {self.f_lo}..{f_hi} "
                f"at {sample_rate} Hz"
            )

    def resolved_f_hi(self, sample_rate: int) -> float:
        return sample_rate / 2.0 if self.f_hi is None else self.f_hi


@dataclass(frozen=True)
class ScaleGrid:
    """Geometric scales in samples, indexed by descending pseudo-frequency."""

    scales: np.ndarray
    pseudo_freqs: np.ndarray

    def __len__(self) -> int:
        return self.scales.size


@dataclass(frozen=True)
class Scalogram:
    """log(1 + |W|) at Mel frame centers, float32 [n_scales, T]."""

    values: np.ndarray
    grid: ScaleGrid


def build_scale_grid(cfg: CwtConfig, sample_rate: int) -> ScaleGrid:
    """Geometric pseudo-frequency grid from f_hi down to f_lo."""
    cfg.validate(sample_rate)
    pf = np.geomspace(cfg.resolved_f_hi(sample_rate), cfg.f_lo, cfg.n_scales)
    scales = cfg.omega0 * sample_rate / (2.0 * np.pi * pf)
    return ScaleGrid(scales=scales, pseudo_freqs=pf)


def morlet_psi(t, omega0: float = 6.0) -> np.ndarray:
    """Morlet atom psi(t) = exp(i*omega0*t) * exp(-t^2/2)."""
    t = np.asarray(t, dtype=np.float64)
    return np.exp(1j * omega0 * t) * np.exp(-0.5 * t * t)


def kernel_halfwidth(scale: float) -> int:
    return int(math.ceil(TAIL_SIGMAS * scale))


def morlet_kernel(
    scale: float,
    omega0: float = 6.0,
    normalize: bool = True,
    support: int | None = None,
) -> np.ndarray:
    """Sample psi(n/scale) for n in [-support, support], complex128.

    support defaults to ceil(6*scale); the 1/sqrt(scale) factor is applied
    when *normalize* is set.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    half = kernel_halfwidth(scale) if support is None else int(support)
    n = np.arange(-half, half + 1, dtype=np.float64)
    kern = morlet_psi(n / scale, omega0)
    if normalize:
        kern = kern / math.sqrt(scale)
    return kern


def _samples_of(w) -> np.ndarray:
    """Accept a Waveform or any 1-D array-like."""
    return np.asarray(getattr(w, "samples", w), dtype=np.float64)


def cwt_direct(w, grid: ScaleGrid, cfg: CwtConfig) -> np.ndarray:
    """O(N^2) reference: the Riemann sum of the transform at every shift."""
    x = _samples_of(w)
    n = x.size
    if n == 0:
        raise ValueError("signal is empty")
    out = np.empty((len(grid), n), dtype=np.complex128)
    for j, scale in enumerate(grid.scales):
        half = kernel_halfwidth(scale)
        kern = np.conj(morlet_kernel(scale, cfg.omega0, cfg.normalize))
        for y in range(n):
            lo = max(0, y - half)
            hi = min(n, y + half + 1)
            out[j, y] = np.dot(x[lo:hi], kern[lo - y + half : hi - y + half])
    return out


def cwt_fft(w, grid: ScaleGrid, cfg: CwtConfig) -> np.ndarray:
    """Fast path: per-scale linear convolution via FFT, zero-padded ends."""
    x = _samples_of(w)
    n = x.size
    if n == 0:
        raise ValueError("signal is empty")
    half_max = kernel_halfwidth(float(np.max(grid.scales)))
    m = 1 << (n + 2 * half_max).bit_length()
    spectrum = np.fft.fft(x, m)
    out = np.empty((len(grid), n), dtype=np.complex128)
    for j, scale in enumerate(grid.scales):
        half = kernel_halfwidth(scale)
        kern = np.conj(morlet_kernel(scale, cfg.omega0, cfg.normalize))
        padded = np.zeros(m, dtype=np.complex128)
        padded[: 2 * half + 1] = kern[::-1]
        conv = np.fft.ifft(spectrum * np.fft.fft(padded))
        out[j] = conv[half : half + n]
    return out


def scalogram_at_frames(
    field: np.ndarray, mel_cfg: MelConfig, grid: ScaleGrid
) -> Scalogram:
    """Sample |W| at Mel frame centers (t*hop + win_length//2), log(1+.)."""
    n = field.shape[1]
    n_frames = frame_count(n, mel_cfg)
    centers = np.arange(n_frames) * mel_cfg.hop + mel_cfg.win_length // 2
    centers = np.minimum(centers, n - 1)  # clamp: center past last sample
    values = np.log1p(np.abs(field[:, centers])).astype(np.float32)
    return Scalogram(values=values, grid=grid)


def pad_scalogram(s: Scalogram, target_frames: int) -> Scalogram:
    """Right-pad with zeros (log1p of silence) to exactly target_frames."""
    n_frames = s.values.shape[1]
    if n_frames > target_frames:
        raise ValueError(f"frame count {n_frames} exceeds pad target {target_frames}")
    if n_frames == target_frames:
        return s
    padded = np.zeros((s.values.shape[0], target_frames), dtype=np.float32)
    padded[:, :n_frames] = s.values
    return Scalogram(values=padded, grid=s.grid)
