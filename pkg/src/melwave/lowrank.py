"""Truncated-SVD compression of scalograms with a corpus-global basis.

The basis is fit once over the horizontally concatenated training frames
(scales are features, frames are samples) and persisted, so compressed
targets are comparable across utterances.  SVD sign ambiguity is removed by
forcing the largest-magnitude entry of each basis column positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor_store import read_tensor, write_tensor

U_FILE = "U.ftn"
SV_FILE = "singular_values.ftn"


@dataclass(frozen=True)
class Basis:
    """Orthonormal columns U [n_scales, k] and the top-k singular values.

    U is float32 (the persisted precision); singular_values are kept float64
    in memory so energy ratios computed right after a fit are exact to
    far better than the f32 file precision.
    """

    U: np.ndarray
    singular_values: np.ndarray

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def n_scales(self) -> int:
        return self.U.shape[0]


def svd_full(matrix: np.ndarray):
    """Economy SVD (U, S, V) with M = U @ diag(S) @ V.T, S descending."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"need a nonempty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite entries in SVD input")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return u, s, vh.T


def fit_global_basis(frames: np.ndarray, k: int) -> Basis:
    """Top-k left singular vectors of the concatenated training frames."""
    frames = np.asarray(frames, dtype=np.float64)
    n_scales, total_frames = frames.shape
    if not (1 <= k <= n_scales):
        raise ValueError(f"rank k={k} outside 1..{n_scales}")
    if total_frames < k:
        raise ValueError(f"need at least k={k} frames, got {total_frames}")
    u, s, _ = svd_full(frames)
    u_k = u[:, :k].copy()
    # fix the sign ambiguity: largest-|entry| of each column made positive
    for j in range(k):
        col = u_k[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            u_k[:, j] = -col
    return Basis(U=u_k.astype(np.float32), singular_values=s[:k].copy())


def project(scal_values: np.ndarray, basis: Basis) -> np.ndarray:
    """coeffs = U^T @ scalogram, float32 [k, T]."""
    values = np.asarray(scal_values, dtype=np.float64)
    if values.shape[0] != basis.n_scales:
        raise ValueError(
            f"scalogram has {values.shape[0]} scales, basis expects {basis.n_scales}"
        )
    return (basis.U.astype(np.float64).T @ values).astype(np.float32)


def reconstruct(coeffs: np.ndarray, basis: Basis) -> np.ndarray:
    """U @ coeffs back into the full scalogram domain, float32 [n_scales, T]."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape[0] != basis.k:
        raise ValueError(f"coeffs have {c.shape[0]} rows, basis rank is {basis.k}")
    return (basis.U.astype(np.float64) @ c).astype(np.float32)


def retained_energy(basis: Basis, frames: np.ndarray) -> float:
    """sum of the kept sigma^2 over the total spectral energy ||frames||_F^2."""
    total = float(np.sum(np.asarray(frames, dtype=np.float64) ** 2))
    kept = float(np.sum(basis.singular_values.astype(np.float64) ** 2))
    return kept / total if total > 0 else 1.0


def save_basis(directory, basis: Basis) -> None:
    """Persist as two FTN1 tensors (U.ftn, singular_values.ftn) in *directory*."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(d / U_FILE, basis.U)
    write_tensor(d / SV_FILE, basis.singular_values.astype(np.float32))


def load_basis(directory) -> Basis:
    d = Path(directory)
    u = read_tensor(d / U_FILE)
    s = read_tensor(d / SV_FILE)
    if u.ndim != 2 or s.ndim != 1 or s.size != u.shape[1]:
        raise ValueError(f"{d}: inconsistent basis tensors {u.shape} / {s.shape}")
    return Basis(U=u, singular_values=s.astype(np.float64))
