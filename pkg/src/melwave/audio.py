"""WAV ingestion and deterministic synthetic test signals.

The reader accepts mono PCM16 RIFF/WAVE only; samples are scaled by 1/32768
so the int16 range maps into [-1, 1).  No resampling: a sample-rate mismatch
downstream is a hard error, never a silent conversion.

``synth_signal`` produces the desk-scale stand-in corpus: sines, linear
chirps, impulse trains and seeded mixtures, peak-normalized to 0.9 and
bit-deterministic for a fixed (spec, sample_rate).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SAMPLE_RATE = 22050

SYNTH_KINDS = ("sine", "chirp", "impulse_train", "mixture")


class WavFormatError(ValueError):
    """The file is not a mono PCM16 RIFF/WAVE stream."""


@dataclass(frozen=True)
class Waveform:
    """Mono audio: float64 samples in [-1, 1] plus the sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if s.size and (np.abs(s).max() > 1.0 or not np.all(np.isfinite(s))):
            raise ValueError("samples must be finite and within [-1, 1]")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic signal.

    kind "sine": sum of sin(2*pi*f*t) components (frequencies/amplitudes
    pairwise).  "chirp": linear sweep frequencies[0] -> frequencies[1].
    "impulse_train": clicks at rate frequencies[0].  "mixture": 2..4
    components drawn deterministically from *seed*; the explicit
    frequency/amplitude lists are ignored.
    """

    kind: str
    frequencies: tuple = ()
    amplitudes: tuple = ()
    duration: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SYNTH_KINDS:
            raise ValueError(f"unknown synth kind {self.kind!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))


def read_wav(path) -> Waveform:
    """Read a mono PCM16 WAV file, scaling samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as f:
            n_channels = f.getnchannels()
            sampwidth = f.getsampwidth()
            comptype = f.getcomptype()
            rate = f.getframerate()
            n_frames = f.getnframes()
            payload = f.readframes(n_frames)
    except (wave.Error, EOFError, OSError) as exc:
        if isinstance(exc, OSError) and not isinstance(exc, wave.Error):
            raise
        raise WavFormatError(f"{path}: malformed RIFF/WAVE ({exc})") from exc
    if comptype != "NONE":
        raise WavFormatError(f"{path}: PCM required, got compression {comptype!r}")
    if n_channels != 1:
        raise WavFormatError(f"{path}: mono required, got {n_channels} channels")
    if sampwidth != 2:
        raise WavFormatError(f"{path}: 16-bit PCM required, got {8 * sampwidth}-bit")
    data = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples=data, sample_rate=rate)


def write_wav(path, w: Waveform) -> None:
    """Write a Waveform as mono PCM16 (round-to-nearest int16)."""
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(w.sample_rate)
        f.writeframes(pcm.tobytes())


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window w[i] = 0.5 - 0.5*cos(2*pi*i/(n-1)), float32."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    i = np.arange(n, dtype=np.float64)
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * i / (n - 1))).astype(np.float32)


def _check_freqs(freqs, nyquist):
    for f in freqs:
        if f <= 0 or f >= nyquist:
            raise ValueError(f"frequency {f} Hz outside (0, Nyquist={nyquist})")


def _mixture_components(seed: int, nyquist: float):
    """Deterministic 2..4 component draw for the 'mixture' kind."""
    rng = np.random.default_rng(np.random.SeedSequence([0x6D697874, seed]))
    n_comp = int(rng.integers(2, 5))
    comps = []
    for _ in range(n_comp):
        kind = ("sine", "sine", "chirp", "impulse_train")[int(rng.integers(0, 4))]
        amp = float(rng.uniform(0.3, 1.0))
        if kind == "chirp":
            f0 = float(rng.uniform(80.0, 2000.0))
            f1 = float(rng.uniform(f0, min(6000.0, nyquist * 0.9)))
            comps.append(("chirp", (f0, f1), amp))
        elif kind == "impulse_train":
            comps.append(("impulse_train", (float(rng.uniform(60.0, 300.0)),), amp))
        else:
            comps.append(("sine", (float(rng.uniform(80.0, 6000.0)),), amp))
    return comps


def _render(kind, freqs, amp, t, sample_rate):
    if kind == "sine":
        return amp * np.sin(2.0 * np.pi * freqs[0] * t)
    if kind == "chirp":
        f0, f1 = freqs
        d = t[-1] + 1.0 / sample_rate
        phase = 2.0 * np.pi * (f0 * t + (f1 - f0) * t * t / (2.0 * d))
        return amp * np.sin(phase)
    # impulse train: one click per period, placed on the nearest sample
    period = sample_rate / freqs[0]
    out = np.zeros_like(t)
    idx = np.round(np.arange(0.0, t.size, period)).astype(np.int64)
    out[idx[idx < t.size]] = amp
    return out


def synth_signal(spec: SynthSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Render a SynthSpec at *sample_rate*, peak-normalized to 0.9."""
    nyquist = sample_rate / 2.0
    n = int(round(spec.duration * sample_rate))
    t = np.arange(n, dtype=np.float64) / sample_rate
    if spec.kind == "mixture":
        comps = _mixture_components(spec.seed, nyquist)
    else:
        if not spec.frequencies:
            raise ValueError(f"{spec.kind} requires at least one frequency")
        if spec.kind == "chirp":
            if len(spec.frequencies) != 2:
                raise ValueError("chirp requires exactly (f_start, f_end)")
            comps = [("chirp", spec.frequencies, _amp(spec.amplitudes, 0))]
        elif spec.kind == "impulse_train":
            comps = [("impulse_train", spec.frequencies[:1], _amp(spec.amplitudes, 0))]
        else:
            comps = [
                ("sine", (f,), _amp(spec.amplitudes, i))
                for i, f in enumerate(spec.frequencies)
            ]
    x = np.zeros(n, dtype=np.float64)
    for kind, freqs, amp in comps:
        _check_freqs(freqs, nyquist)
        x += _render(kind, freqs, amp, t, sample_rate)
    peak = np.abs(x).max()
    if peak > 0:
        x *= 0.9 / peak
    return Waveform(samples=x, sample_rate=sample_rate)


def describe_components(seed: int, sample_rate: int = DEFAULT_SAMPLE_RATE) -> str:
    """Human-readable summary of a mixture's seeded components."""
    comps = _mixture_components(seed, sample_rate / 2.0)
    parts = []
    for kind, freqs, amp in comps:
        if kind == "chirp":
            parts.append(f"chirp {freqs[0]:.0f}-{freqs[1]:.0f}Hz a{amp:.2f}")
        elif kind == "impulse_train":
            parts.append(f"pulses {freqs[0]:.0f}Hz a{amp:.2f}")
        else:
            parts.append(f"sine {freqs[0]:.0f}Hz a{amp:.2f}")
    return " + ".join(parts)


def _amp(amps, i):
    return amps[i] if i < len(amps) else 1.0
