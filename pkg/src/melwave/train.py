"""Training loop: baseline reconstruction loss plus the wavelet side objective.

The decoder under enhancement is stood in for by additive Gaussian noise on
the ground-truth Mel: mel_noisy = mel_gt + sigma * eps.  Each trace row s is
the loss at the parameters after s updates, evaluated with that row's own
noise draw; rows therefore run 0..steps inclusive and the final row can be
regenerated bit-for-bit from the checkpoint alone.

Randomness is addressed by purpose so no draw depends on loop history:

  SeedSequence([seed, 0])      parameter init (see nets.init_params)
  SeedSequence([seed, 1, s])   decoder noise for trace row s
  SeedSequence([seed, 2, s])   minibatch selection for trace row s

All loss math runs in float64; parameters round-trip through float32 after
every update so checkpoints and traces stay platform-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nets import CwtNet, ParamStore, PostNet, SharedTrunk, build_nets

TRACE_HEADER = "step,loss_baseline,loss_wavelet,loss_total"
TRACE_FILE = "loss_trace.csv"


class TrainingDivergedError(RuntimeError):
    """Raised when a gradient or update stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 200
    batch_size: int = 0  # 0 means the whole corpus every step
    noise_sigma: float = 0.1
    seed: int = 0
    aux_enabled: bool = True
    aux_weight: float = 1.0

    def validate(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 0:
            raise ValueError(f"batch_size must be >= 0, got {self.batch_size}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.aux_weight < 0:
            raise ValueError(f"aux_weight must be >= 0, got {self.aux_weight}")


@dataclass(frozen=True)
class LossReport:
    step: int
    loss_total: float
    loss_baseline: float
    loss_wavelet: float


# ---------------------------------------------------------------------------
# addressable randomness
# ---------------------------------------------------------------------------

def noise_for_step(seed: int, step: int, shape) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1, step]))
    return rng.standard_normal(shape)


def batch_indices_for_step(seed: int, step: int, n_items: int, batch_size: int):
    """Sorted without-replacement sample; full range when batch_size is 0."""
    if batch_size <= 0 or batch_size >= n_items:
        return np.arange(n_items)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, step]))
    return np.sort(rng.choice(n_items, size=batch_size, replace=False))


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def mse(a: np.ndarray, b: np.ndarray) -> float:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


def wavelet_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared coefficient error over every (row, frame) cell."""
    if pred.shape != target.shape:
        raise ValueError(f"coefficient shapes differ: {pred.shape} vs {target.shape}")
    return mse(pred, target)


def wavelet_loss_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return (2.0 / d.size) * d


def baseline_loss(trunk_out, post_out, mel_gt) -> float:
    return mse(trunk_out, mel_gt) + mse(post_out, mel_gt)


# ---------------------------------------------------------------------------
# forward / backward over the three nets
# ---------------------------------------------------------------------------

@dataclass
class StepValues:
    loss_total: float
    loss_baseline: float
    loss_wavelet: float
    trunk_out: np.ndarray
    post_out: np.ndarray
    coeff_pred: np.ndarray
    caches: tuple


def forward_all(params, trunk: SharedTrunk, post: PostNet, cwt: CwtNet, mel_noisy):
    trunk_out, trunk_cache = trunk.forward(params, mel_noisy)
    post_out, post_cache = post.forward(params, trunk_out)
    coeff_pred, cwt_cache = cwt.forward(params, trunk_out)
    return trunk_out, post_out, coeff_pred, (trunk_cache, post_cache, cwt_cache)


def compute_losses(
    params,
    nets,
    mel_noisy: np.ndarray,
    mel_gt: np.ndarray,
    coeff_gt: np.ndarray,
    cfg: TrainConfig,
) -> StepValues:
    trunk, post, cwt = nets
    trunk_out, post_out, coeff_pred, caches = forward_all(
        params, trunk, post, cwt, mel_noisy
    )
    loss_base = baseline_loss(trunk_out, post_out, mel_gt)
    # the reported wavelet term is the objective's contribution: zero when the
    # side task is ablated, so loss_total == loss_baseline + loss_wavelet holds
    # row by row in both modes
    loss_wav = cfg.aux_weight * wavelet_loss(coeff_pred, coeff_gt) if cfg.aux_enabled else 0.0
    return StepValues(
        loss_total=loss_base + loss_wav,
        loss_baseline=loss_base,
        loss_wavelet=loss_wav,
        trunk_out=trunk_out,
        post_out=post_out,
        coeff_pred=coeff_pred,
        caches=caches,
    )


def compute_gradients(
    params,
    nets,
    values: StepValues,
    mel_gt: np.ndarray,
    coeff_gt: np.ndarray,
    cfg: TrainConfig,
) -> dict[str, np.ndarray]:
    trunk, post, cwt = nets
    trunk_cache, post_cache, cwt_cache = values.caches
    gt = np.asarray(mel_gt, dtype=np.float64)

    n = gt.size
    g_trunk_direct = (2.0 / n) * (values.trunk_out - gt)
    g_post_out = (2.0 / n) * (values.post_out - gt)

    g_trunk_out, post_grads = post.backward(params, post_cache, g_post_out)
    g_trunk_out = g_trunk_out + g_trunk_direct

    grads = dict(post_grads)
    if cfg.aux_enabled:
        g_coeff = cfg.aux_weight * wavelet_loss_grad(values.coeff_pred, coeff_gt)
        g_from_cwt, cwt_grads = cwt.backward(params, cwt_cache, g_coeff)
        grads.update(cwt_grads)
        g_trunk_out = g_trunk_out + g_from_cwt
    else:
        # ablated branch: explicit zeros so every parameter has a gradient
        # entry and the optimizer state stays aligned with the store
        for name, shape, _ in cwt.param_specs():
            grads[name] = np.zeros(shape, dtype=np.float64)

    _, trunk_grads = trunk.backward(params, trunk_cache, g_trunk_out)
    grads.update(trunk_grads)
    return grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

class AdamState:
    def __init__(self, store: ParamStore):
        self.t = 0
        self.m = {n: np.zeros(p.shape, dtype=np.float64) for n, p in store.params.items()}
        self.v = {n: np.zeros(p.shape, dtype=np.float64) for n, p in store.params.items()}


def adam_step(store: ParamStore, state: AdamState, grads: dict, cfg: TrainConfig) -> None:
    """One update; bias-corrected, eps added after the square root."""
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    for name, p in store.params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        update = cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        new_p = p.astype(np.float64) - update
        if not np.all(np.isfinite(new_p)):
            raise TrainingDivergedError(f"non-finite update for {name}")
        store.params[name] = new_p.astype(np.float32)


# ---------------------------------------------------------------------------
# loop
# ---------------------------------------------------------------------------

def train_loop(
    store: ParamStore,
    mel_gt: np.ndarray,
    coeff_gt: np.ndarray,
    cfg: TrainConfig,
    nets=None,
    on_step=None,
) -> list[LossReport]:
    """Run cfg.steps updates; returns steps+1 reports (row s = after s updates)."""
    cfg.validate()
    mel_gt = np.asarray(mel_gt, dtype=np.float64)
    coeff_gt = np.asarray(coeff_gt, dtype=np.float64)
    if mel_gt.ndim != 3 or coeff_gt.ndim != 3:
        raise ValueError("expected batched [B, C, T] inputs")
    if mel_gt.shape[0] != coeff_gt.shape[0] or mel_gt.shape[2] != coeff_gt.shape[2]:
        raise ValueError(
            f"mel batch {mel_gt.shape} and coefficient batch {coeff_gt.shape} disagree"
        )
    if nets is None:
        nets = build_nets(k=coeff_gt.shape[1], n_mels=mel_gt.shape[1])

    n_items = mel_gt.shape[0]
    adam = AdamState(store)
    reports: list[LossReport] = []
    for s in range(cfg.steps + 1):
        idx = batch_indices_for_step(cfg.seed, s, n_items, cfg.batch_size)
        gt = mel_gt[idx]
        cf = coeff_gt[idx]
        noise = noise_for_step(cfg.seed, s, gt.shape)
        noisy = gt + cfg.noise_sigma * noise

        params = store.as_float64()
        values = compute_losses(params, nets, noisy, gt, cf, cfg)
        if not np.isfinite(values.loss_total):
            raise TrainingDivergedError(f"non-finite loss at step {s}")
        report = LossReport(s, values.loss_total, values.loss_baseline, values.loss_wavelet)
        reports.append(report)
        if on_step is not None:
            on_step(report)
        if s == cfg.steps:
            break

        grads = compute_gradients(params, nets, values, gt, cf, cfg)
        adam_step(store, adam, grads, cfg)
    return reports


# ---------------------------------------------------------------------------
# trace file
# ---------------------------------------------------------------------------

def write_trace(path, reports: list[LossReport]) -> None:
    lines = [TRACE_HEADER]
    for r in reports:
        lines.append(
            "%d,%.9g,%.9g,%.9g" % (r.step, r.loss_baseline, r.loss_wavelet, r.loss_total)
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path) -> list[LossReport]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"{path}: missing trace header")
    reports = []
    for line in lines[1:]:
        if not line.strip():
            continue
        step, lb, lw, lt = line.split(",")
        reports.append(LossReport(int(step), float(lt), float(lb), float(lw)))
    return reports
