"""Flat key=value run configuration shared by every CLI subcommand.

One file drives feature extraction, basis fitting, and training so that a
run directory is reproducible from its config echo alone.  Unknown keys are
rejected rather than ignored; a typo should fail loudly, not silently train
with a default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .cwt import CwtConfig
from .melspec import MelConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    sample_rate: int = 22050
    n_fft: int = 1024
    hop: int = 256
    win_length: int = 1024
    n_mels: int = 80
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-5
    omega0: float = 6.0
    n_scales: int = 64
    cwt_f_lo: float = 20.0
    cwt_f_hi: float = 0.0  # 0 = up to Nyquist
    cwt_normalize: bool = True
    rank: int = 16
    pad_frames: int = 0  # 0 = longest utterance in the corpus
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 200
    batch_size: int = 0
    noise_sigma: float = 0.1
    seed: int = 0
    aux_enabled: bool = True
    aux_weight: float = 1.0

    def to_mel_config(self) -> MelConfig:
        cfg = MelConfig(
            n_fft=self.n_fft,
            hop=self.hop,
            win_length=self.win_length,
            n_mels=self.n_mels,
            f_min=self.f_min,
            f_max=self.f_max,
            log_floor=self.log_floor,
        )
        cfg.validate(self.sample_rate)
        return cfg

    def to_cwt_config(self) -> CwtConfig:
        cfg = CwtConfig(
            omega0=self.omega0,
            n_scales=self.n_scales,
            f_lo=self.cwt_f_lo,
            f_hi=self.cwt_f_hi if self.cwt_f_hi > 0 else None,
            normalize=self.cwt_normalize,
        )
        cfg.validate(self.sample_rate)
        return cfg

    def to_train_config(self) -> TrainConfig:
        cfg = TrainConfig(
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            steps=self.steps,
            batch_size=self.batch_size,
            noise_sigma=self.noise_sigma,
            seed=self.seed,
            aux_enabled=self.aux_enabled,
            aux_weight=self.aux_weight,
        )
        cfg.validate()
        return cfg

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name}={text}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELDS[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r} (expected {kind})") from None
    raise ConfigError(f"unhandled field type {kind} for {key}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file (if any), then explicit overrides."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values.update(parse_config_text(p.read_text(), source=str(p)))
    for key, val in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    cfg = RunConfig(**values)
    # fail fast on cross-field contradictions
    cfg.to_mel_config()
    cfg.to_cwt_config()
    cfg.to_train_config()
    return cfg
