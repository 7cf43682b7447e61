"""Trainable components with explicit forward math and hand-derived backprop.

Three networks share one parameter store:

  SharedTrunk  x + tanh(conv 80->80 k5)            residual, shape-preserving
  PostNet      5 convs k5 (conv->norm->tanh x4, bare conv last) + residual
  CwtNet       conv->norm->relu x2, then two per-frame linear layers -> k rows

All ops take [C, T] or batched [B, C, T] arrays and compute in the dtype
they are given; training feeds float64 copies of the float32 store so
gradients accumulate in 64-bit.  Convolutions are cross-correlations with
zero same-padding (odd kernels only).  Normalization is per frame across
channels (batch-size independent), epsilon 1e-5.

Every backward here is checked against central finite differences in the
test suite; keep them exact, not approximate.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor_store import read_tensor, write_tensor

NORM_EPS = 1e-5
MANIFEST = "manifest.txt"


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ValueError(f"expected [C, T] or [B, C, T], got shape {x.shape}")


def _unbatch(y, squeeze):
    return y[0] if squeeze else y


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def _im2col(x, kernel):
    """[B, C, T] -> [B, C*kernel, T] with zero same-padding."""
    pad = (kernel - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    cols = sliding_window_view(xp, kernel, axis=2)  # [B, C, T, kernel]
    b, c, t, k = cols.shape
    return np.ascontiguousarray(cols.transpose(0, 1, 3, 2)).reshape(b, c * k, t)


def conv1d_forward(weights: np.ndarray, bias: np.ndarray, x) -> np.ndarray:
    """Same-padded cross-correlation: weights [out, in, kernel], x [.., in, T]."""
    xb, squeeze = _batched(x)
    out_ch, in_ch, kernel = weights.shape
    if kernel % 2 == 0:
        raise ValueError(f"kernel must be odd, got {kernel}")
    if xb.shape[1] != in_ch:
        raise ValueError(f"input has {xb.shape[1]} channels, layer expects {in_ch}")
    cols = _im2col(xb, kernel)
    y = np.matmul(weights.reshape(out_ch, in_ch * kernel), cols) + bias[:, None]
    return _unbatch(y, squeeze)


def conv1d_backward(weights: np.ndarray, x, grad_out):
    """Exact gradients of conv1d_forward: returns (grad_x, grad_w, grad_b)."""
    xb, squeeze = _batched(x)
    gb, _ = _batched(grad_out)
    out_ch, in_ch, kernel = weights.shape
    if gb.shape[1] != out_ch or xb.shape[1] != in_ch or gb.shape[2] != xb.shape[2]:
        raise ValueError(
            f"gradient shape {gb.shape} does not match input {xb.shape} "
            f"and weights {weights.shape}"
        )
    n_b, _, n_t = xb.shape
    pad = (kernel - 1) // 2
    cols = _im2col(xb, kernel)
    grad_b = gb.sum(axis=(0, 2))
    grad_w = np.matmul(gb, cols.transpose(0, 2, 1)).sum(axis=0)
    grad_w = grad_w.reshape(out_ch, in_ch, kernel)
    gcols = np.matmul(weights.reshape(out_ch, in_ch * kernel).T, gb)
    gcols = gcols.reshape(n_b, in_ch, kernel, n_t)
    gxp = np.zeros((n_b, in_ch, n_t + 2 * pad), dtype=gcols.dtype)
    for j in range(kernel):
        gxp[:, :, j : j + n_t] += gcols[:, :, j, :]
    grad_x = gxp[:, :, pad : pad + n_t]
    return _unbatch(grad_x, squeeze), grad_w, grad_b


def linear_forward(weights: np.ndarray, bias: np.ndarray, x) -> np.ndarray:
    """Time-distributed affine map: weights [out, in], x [.., in, T]."""
    xb, squeeze = _batched(x)
    if xb.shape[1] != weights.shape[1]:
        raise ValueError(f"input dim {xb.shape[1]} != weight dim {weights.shape[1]}")
    y = np.matmul(weights, xb) + bias[:, None]
    return _unbatch(y, squeeze)


def linear_backward(weights: np.ndarray, x, grad_out):
    xb, squeeze = _batched(x)
    gb, _ = _batched(grad_out)
    grad_w = np.matmul(gb, xb.transpose(0, 2, 1)).sum(axis=0)
    grad_b = gb.sum(axis=(0, 2))
    grad_x = np.matmul(weights.T, gb)
    return _unbatch(grad_x, squeeze), grad_w, grad_b


def channel_norm_forward(gain: np.ndarray, shift: np.ndarray, x):
    """Per-frame normalization across channels, then per-channel affine.

    Returns (y, cache) where cache feeds channel_norm_backward.
    """
    xb, squeeze = _batched(x)
    mu = xb.mean(axis=1, keepdims=True)
    xc = xb - mu
    var = np.mean(xc * xc, axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = xc * inv_std
    y = gain[:, None] * xhat + shift[:, None]
    return _unbatch(y, squeeze), (xhat, inv_std, squeeze)


def channel_norm_backward(gain: np.ndarray, cache, grad_out):
    xhat, inv_std, squeeze = cache
    gb, _ = _batched(grad_out)
    grad_gain = (gb * xhat).sum(axis=(0, 2))
    grad_shift = gb.sum(axis=(0, 2))
    gxhat = gain[:, None] * gb
    mean_g = gxhat.mean(axis=1, keepdims=True)
    mean_gx = np.mean(gxhat * xhat, axis=1, keepdims=True)
    grad_x = inv_std * (gxhat - mean_g - xhat * mean_gx)
    return _unbatch(grad_x, squeeze), grad_gain, grad_shift


def relu_forward(x):
    y = np.maximum(x, 0.0)
    return y, x > 0


def relu_backward(mask, grad_out):
    return grad_out * mask


def tanh_forward(x):
    y = np.tanh(x)
    return y, y


def tanh_backward(y, grad_out):
    return grad_out * (1.0 - y * y)


# ---------------------------------------------------------------------------
# parameter store
# ---------------------------------------------------------------------------

class ParamStore:
    """Ordered name -> float32 parameter map with float64 gradient slots."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        self.params[name] = np.asarray(value, dtype=np.float32)
        self.grads[name] = np.zeros(self.params[name].shape, dtype=np.float64)

    def names(self):
        return list(self.params)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def accumulate(self, grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            self.grads[name] += g

    def as_float64(self) -> dict[str, np.ndarray]:
        return {name: p.astype(np.float64) for name, p in self.params.items()}

    def save(self, directory) -> None:
        """Checkpoint: one FTN1 file per parameter plus a name->shape manifest."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        lines = []
        for name, p in self.params.items():
            write_tensor(d / f"{name}.ftn", p)
            lines.append(f"{name} {'x'.join(str(s) for s in p.shape)}")
        (d / MANIFEST).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, directory) -> "ParamStore":
        d = Path(directory)
        store = cls()
        for line in (d / MANIFEST).read_text().splitlines():
            if not line.strip():
                continue
            name, shape_txt = line.split()
            shape = tuple(int(s) for s in shape_txt.split("x"))
            p = read_tensor(d / f"{name}.ftn")
            if p.shape != shape:
                raise ValueError(f"{name}: manifest says {shape}, file has {p.shape}")
            store.add(name, p)
        return store


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------

def _uniform_bound(in_ch: int, kernel: int = 1) -> float:
    return math.sqrt(1.0 / (in_ch * kernel))


class SharedTrunk:
    """x + tanh(conv(x)): the shared stage both branch gradients flow through."""

    def __init__(self, channels: int = 80, kernel: int = 5, prefix: str = "trunk"):
        self.channels = channels
        self.kernel = kernel
        self.prefix = prefix

    def param_specs(self):
        c, k = self.channels, self.kernel
        bound = _uniform_bound(c, k)
        return [
            (f"{self.prefix}.conv.w", (c, c, k), bound),
            (f"{self.prefix}.conv.b", (c,), bound),
        ]

    def forward(self, params, x):
        z = conv1d_forward(
            params[f"{self.prefix}.conv.w"], params[f"{self.prefix}.conv.b"], x
        )
        t, t_cache = tanh_forward(z)
        return x + t, (x, t_cache)

    def backward(self, params, cache, grad_out):
        x, t_cache = cache
        gz = tanh_backward(t_cache, grad_out)
        gx_conv, gw, gb = conv1d_backward(params[f"{self.prefix}.conv.w"], x, gz)
        grads = {f"{self.prefix}.conv.w": gw, f"{self.prefix}.conv.b": gb}
        return grad_out + gx_conv, grads


class CwtNet:
    """Mel [80, T] -> compressed-scalogram prediction [k, T]."""

    def __init__(
        self,
        out_dim: int,
        in_channels: int = 80,
        hidden: int = 128,
        kernel: int = 5,
        prefix: str = "cwtnet",
    ):
        self.out_dim = out_dim
        self.in_channels = in_channels
        self.hidden = hidden
        self.kernel = kernel
        self.prefix = prefix

    def param_specs(self):
        p, h, k = self.prefix, self.hidden, self.kernel
        c_in = self.in_channels
        return [
            (f"{p}.conv1.w", (h, c_in, k), _uniform_bound(c_in, k)),
            (f"{p}.conv1.b", (h,), _uniform_bound(c_in, k)),
            (f"{p}.norm1.gain", (h,), None),
            (f"{p}.norm1.shift", (h,), None),
            (f"{p}.conv2.w", (h, h, k), _uniform_bound(h, k)),
            (f"{p}.conv2.b", (h,), _uniform_bound(h, k)),
            (f"{p}.norm2.gain", (h,), None),
            (f"{p}.norm2.shift", (h,), None),
            (f"{p}.lin1.w", (h, h), _uniform_bound(h)),
            (f"{p}.lin1.b", (h,), _uniform_bound(h)),
            (f"{p}.lin2.w", (self.out_dim, h), _uniform_bound(h)),
            (f"{p}.lin2.b", (self.out_dim,), _uniform_bound(h)),
        ]

    def forward(self, params, x):
        p = self.prefix
        xb = np.asarray(x)
        if xb.shape[-2] != self.in_channels:
            raise ValueError(
                f"input has {xb.shape[-2]} channels, expected {self.in_channels}"
            )
        z1 = conv1d_forward(params[f"{p}.conv1.w"], params[f"{p}.conv1.b"], xb)
        n1, n1_cache = channel_norm_forward(
            params[f"{p}.norm1.gain"], params[f"{p}.norm1.shift"], z1
        )
        h1, m1 = relu_forward(n1)
        z2 = conv1d_forward(params[f"{p}.conv2.w"], params[f"{p}.conv2.b"], h1)
        n2, n2_cache = channel_norm_forward(
            params[f"{p}.norm2.gain"], params[f"{p}.norm2.shift"], z2
        )
        h2, m2 = relu_forward(n2)
        z3 = linear_forward(params[f"{p}.lin1.w"], params[f"{p}.lin1.b"], h2)
        h3, m3 = relu_forward(z3)
        y = linear_forward(params[f"{p}.lin2.w"], params[f"{p}.lin2.b"], h3)
        return y, (xb, n1_cache, m1, h1, n2_cache, m2, h2, m3, h3)

    def backward(self, params, cache, grad_out):
        p = self.prefix
        x, n1_cache, m1, h1, n2_cache, m2, h2, m3, h3 = cache
        grads = {}
        gh3, grads[f"{p}.lin2.w"], grads[f"{p}.lin2.b"] = linear_backward(
            params[f"{p}.lin2.w"], h3, grad_out
        )
        gz3 = relu_backward(m3, gh3)
        gh2, grads[f"{p}.lin1.w"], grads[f"{p}.lin1.b"] = linear_backward(
            params[f"{p}.lin1.w"], h2, gz3
        )
        gn2 = relu_backward(m2, gh2)
        gz2, grads[f"{p}.norm2.gain"], grads[f"{p}.norm2.shift"] = (
            channel_norm_backward(params[f"{p}.norm2.gain"], n2_cache, gn2)
        )
        gh1, grads[f"{p}.conv2.w"], grads[f"{p}.conv2.b"] = conv1d_backward(
            params[f"{p}.conv2.w"], h1, gz2
        )
        gn1 = relu_backward(m1, gh1)
        gz1, grads[f"{p}.norm1.gain"], grads[f"{p}.norm1.shift"] = (
            channel_norm_backward(params[f"{p}.norm1.gain"], n1_cache, gn1)
        )
        gx, grads[f"{p}.conv1.w"], grads[f"{p}.conv1.b"] = conv1d_backward(
            params[f"{p}.conv1.w"], x, gz1
        )
        return gx, grads


class PostNet:
    """Five-conv residual refinement stack; the last conv is linear (no act)."""

    def __init__(
        self,
        channels: int = 80,
        hidden: int = 128,
        kernel: int = 5,
        n_layers: int = 5,
        prefix: str = "postnet",
    ):
        if n_layers < 2:
            raise ValueError("PostNet needs at least an input and an output conv")
        self.channels = channels
        self.hidden = hidden
        self.kernel = kernel
        self.n_layers = n_layers
        self.prefix = prefix

    def _dims(self, i):
        c_in = self.channels if i == 0 else self.hidden
        c_out = self.channels if i == self.n_layers - 1 else self.hidden
        return c_in, c_out

    def param_specs(self):
        specs = []
        for i in range(self.n_layers):
            c_in, c_out = self._dims(i)
            bound = _uniform_bound(c_in, self.kernel)
            specs.append((f"{self.prefix}.conv{i + 1}.w", (c_out, c_in, self.kernel), bound))
            specs.append((f"{self.prefix}.conv{i + 1}.b", (c_out,), bound))
            if i < self.n_layers - 1:
                specs.append((f"{self.prefix}.norm{i + 1}.gain", (c_out,), None))
                specs.append((f"{self.prefix}.norm{i + 1}.shift", (c_out,), None))
        return specs

    def forward(self, params, x):
        p = self.prefix
        h = np.asarray(x)
        caches = []
        for i in range(self.n_layers):
            h_in = h
            h = conv1d_forward(params[f"{p}.conv{i + 1}.w"], params[f"{p}.conv{i + 1}.b"], h)
            if i < self.n_layers - 1:
                h, n_cache = channel_norm_forward(
                    params[f"{p}.norm{i + 1}.gain"], params[f"{p}.norm{i + 1}.shift"], h
                )
                h, t_cache = tanh_forward(h)
                caches.append((h_in, n_cache, t_cache))
            else:
                caches.append((h_in, None, None))
        return np.asarray(x) + h, caches

    def backward(self, params, caches, grad_out):
        p = self.prefix
        grads = {}
        g = grad_out
        for i in reversed(range(self.n_layers)):
            h_in, n_cache, t_cache = caches[i]
            if i < self.n_layers - 1:
                g = tanh_backward(t_cache, g)
                g, grads[f"{p}.norm{i + 1}.gain"], grads[f"{p}.norm{i + 1}.shift"] = (
                    channel_norm_backward(params[f"{p}.norm{i + 1}.gain"], n_cache, g)
                )
            g, grads[f"{p}.conv{i + 1}.w"], grads[f"{p}.conv{i + 1}.b"] = (
                conv1d_backward(params[f"{p}.conv{i + 1}.w"], h_in, g)
            )
        return grad_out + g, grads


def build_nets(k: int, n_mels: int = 80, hidden: int = 128):
    """The paradigm's three trainable components with their default shapes."""
    return (
        SharedTrunk(channels=n_mels),
        PostNet(channels=n_mels, hidden=hidden),
        CwtNet(out_dim=k, in_channels=n_mels, hidden=hidden),
    )


def init_params(seed: int, k: int = 16, n_mels: int = 80, hidden: int = 128) -> ParamStore:
    """Uniform(-s, s) with s = sqrt(1/(in_ch*kernel)); norm gain 1, shift 0."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    store = ParamStore()
    for net in build_nets(k, n_mels, hidden):
        for name, shape, bound in net.param_specs():
            if bound is None:
                value = np.ones(shape) if name.endswith(".gain") else np.zeros(shape)
            else:
                value = rng.uniform(-bound, bound, size=shape)
            store.add(name, value.astype(np.float32))
    return store
