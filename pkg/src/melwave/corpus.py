"""Synthetic corpus generation and manifest handling.

Layout mirrors the common single-speaker dataset convention:

    root/
      metadata.csv      one line per utterance: id|text|text (exactly 2 pipes)
      wavs/<id>.wav     mono PCM16

Generated utterances are seeded mixtures (see audio.SynthSpec kind
"mixture") with durations drawn uniformly from 0.5..2.0 seconds; the text
columns carry a description of the mixture components.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import DEFAULT_SAMPLE_RATE, SynthSpec, describe_components, synth_signal, write_wav

METADATA = "metadata.csv"
WAV_DIR = "wavs"
ID_PATTERN = "SYN-%04d"

_CORPUS_TAG = 0x636F7270  # choice of per-utterance stream, nothing magic


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    utt_id: str
    wav_path: Path
    text: str


def load_manifest(root) -> list[CorpusEntry]:
    """Read and validate root/metadata.csv; every listed wav must exist."""
    root = Path(root)
    meta = root / METADATA
    if not meta.is_file():
        raise ManifestError(f"missing {meta}")
    entries = []
    seen = set()
    for lineno, line in enumerate(meta.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if line.count("|") != 2:
            raise ManifestError(
                f"{meta}:{lineno}: expected exactly 2 '|' separators, got {line.count('|')}"
            )
        utt_id, text, _norm = line.split("|")
        if not utt_id or "/" in utt_id or utt_id != utt_id.strip():
            raise ManifestError(f"{meta}:{lineno}: bad utterance id {utt_id!r}")
        if utt_id in seen:
            raise ManifestError(f"{meta}:{lineno}: duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        wav = root / WAV_DIR / f"{utt_id}.wav"
        if not wav.is_file():
            raise ManifestError(f"{meta}:{lineno}: missing audio file {wav}")
        entries.append(CorpusEntry(utt_id=utt_id, wav_path=wav, text=text))
    if not entries:
        raise ManifestError(f"{meta}: no utterances")
    return entries


def gen_corpus(
    root, n_utts: int, seed: int, sample_rate: int = DEFAULT_SAMPLE_RATE
) -> list[CorpusEntry]:
    """Write n_utts seeded mixture utterances plus their manifest under root."""
    if n_utts < 1:
        raise ValueError(f"n_utts must be >= 1, got {n_utts}")
    root = Path(root)
    (root / WAV_DIR).mkdir(parents=True, exist_ok=True)
    entries = []
    lines = []
    for i in range(n_utts):
        rng = np.random.default_rng(np.random.SeedSequence([_CORPUS_TAG, seed, i]))
        duration = float(rng.uniform(0.5, 2.0))
        mix_seed = int(rng.integers(0, 2**31 - 1))
        utt_id = ID_PATTERN % i
        wav_path = root / WAV_DIR / f"{utt_id}.wav"
        spec = SynthSpec(kind="mixture", duration=duration, seed=mix_seed)
        write_wav(wav_path, synth_signal(spec, sample_rate))
        text = f"{describe_components(mix_seed, sample_rate)} ({duration:.2f}s)"
        if "|" in text:
            raise ValueError("description must not contain '|'")
        entries.append(CorpusEntry(utt_id=utt_id, wav_path=wav_path, text=text))
        lines.append(f"{utt_id}|{text}|{text}")
    (root / METADATA).write_text("\n".join(lines) + "\n")
    return entries
