"""melwave: Mel-spectrogram enhancement with a wavelet side objective.

The pipeline: synthesize or ingest a small speech-like corpus, extract
paired Mel spectrograms and Morlet scalograms, compress the scalograms with
a corpus-global truncated-SVD basis, then train a residual enhancement
stack whose shared trunk also feeds an auxiliary coefficient predictor.
Everything numeric is seeded and reproducible down to the byte.
"""

from .audio import SynthSpec, Waveform, read_wav, synth_signal, write_wav
from .config import RunConfig, load_config
from .cwt import (
    CwtConfig,
    ScaleGrid,
    Scalogram,
    build_scale_grid,
    cwt_direct,
    cwt_fft,
    morlet_kernel,
    morlet_psi,
    scalogram_at_frames,
)
from .lowrank import Basis, fit_global_basis, project, reconstruct, retained_energy
from .melspec import MelConfig, MelSpectrogram, mel_filterbank, mel_spectrogram, stft
from .nets import CwtNet, ParamStore, PostNet, SharedTrunk, build_nets, init_params
from .tensor_store import read_tensor, write_tensor
from .train import LossReport, TrainConfig, TrainingDivergedError, train_loop

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "CwtConfig",
    "CwtNet",
    "LossReport",
    "MelConfig",
    "MelSpectrogram",
    "ParamStore",
    "PostNet",
    "RunConfig",
    "ScaleGrid",
    "Scalogram",
    "SharedTrunk",
    "SynthSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "Waveform",
    "build_nets",
    "build_scale_grid",
    "cwt_direct",
    "cwt_fft",
    "fit_global_basis",
    "init_params",
    "load_config",
    "mel_filterbank",
    "mel_spectrogram",
    "morlet_kernel",
    "morlet_psi",
    "project",
    "read_tensor",
    "read_wav",
    "reconstruct",
    "retained_energy",
    "scalogram_at_frames",
    "stft",
    "synth_signal",
    "train_loop",
    "write_tensor",
    "write_wav",
    "__version__",
]
