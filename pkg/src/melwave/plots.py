"""Image output: a bit-exact grayscale dump plus report figures.

The PGM path is the stable, byte-specified artifact (P5, maxval 255,
rows = first tensor dimension, linear min-max mapping, constant input maps
to mid-gray).  The matplotlib figures are operator aids written next to the
delimited outputs by the train and eval commands; nothing downstream parses
them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def pgm_bytes(matrix: np.ndarray) -> bytes:
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError(f"need a 2-D array, got shape {m.shape}")
    h, w = m.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    m = m.astype(np.float64)
    lo = float(m.min())
    hi = float(m.max())
    if hi == lo:
        payload = np.full((h, w), 128, dtype=np.uint8)
    else:
        scaled = np.rint((m - lo) * (255.0 / (hi - lo)))
        payload = np.clip(scaled, 0, 255).astype(np.uint8)
    return header + payload.tobytes()


def write_pgm(path, matrix: np.ndarray) -> None:
    Path(path).write_bytes(pgm_bytes(matrix))


def _imshow(ax, values, title):
    ax.imshow(np.asarray(values), aspect="auto", origin="lower", interpolation="nearest")
    ax.set_title(title)
    ax.set_xlabel("frame")


def save_loss_curve(path, reports) -> None:
    """Loss trace figure: one line per column of the CSV."""
    steps = [r.step for r in reports]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, [r.loss_total for r in reports], label="total")
    ax.plot(steps, [r.loss_baseline for r in reports], label="baseline")
    ax.plot(steps, [r.loss_wavelet for r in reports], label="wavelet")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_mel_comparison(path, noisy, enhanced, target) -> None:
    """Side-by-side Mel panels: network input, network output, ground truth."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6), sharey=True)
    _imshow(axes[0], noisy, "noisy input")
    _imshow(axes[1], enhanced, "enhanced")
    _imshow(axes[2], target, "target")
    axes[0].set_ylabel("mel bin")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_scalogram_comparison(path, reconstructed, target) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    _imshow(axes[0], reconstructed, "reconstructed")
    _imshow(axes[1], target, "target")
    axes[0].set_ylabel("scale index")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
