"""Acceptance gate: the ten release criteria, one test per criterion.

Each test prints a single PASS line with its measured numbers; tolerances
are stated inline and are not loosened anywhere else in the suite.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from melwave.cli import main
from melwave.cwt import (
    CwtConfig,
    build_scale_grid,
    cwt_direct,
    cwt_fft,
    morlet_psi,
)
from melwave.lowrank import svd_full
from melwave.nets import (
    build_nets,
    channel_norm_backward,
    channel_norm_forward,
    conv1d_backward,
    conv1d_forward,
    init_params,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
    tanh_backward,
    tanh_forward,
)
from melwave.plots import pgm_bytes
from melwave.tensor_store import read_tensor, write_tensor
from melwave.train import (
    TrainConfig,
    baseline_loss,
    compute_gradients,
    compute_losses,
    read_trace,
    train_loop,
    wavelet_loss,
)

SR = 22050


# ---------------------------------------------------------------------------
# shared full-scale pipeline (criteria 6 and 7)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    corpus = root / "corpus"
    features = root / "features"
    basis = root / "basis"
    run = root / "run"
    t0 = time.monotonic()
    assert main(["gen-corpus", str(corpus), "--n-utts", "20", "--seed", "7"]) == 0
    assert main(["extract", str(corpus), str(features), "--seed", "7"]) == 0
    assert main(["fit-basis", str(features), str(basis), "--rank", "16", "--seed", "7"]) == 0
    assert main(["train", str(features), str(basis), str(run), "--seed", "7"]) == 0
    elapsed = time.monotonic() - t0
    return {"run": run, "elapsed": elapsed}


def _tree_bytes(d: Path, skip=(".png",)):
    return {
        str(p.relative_to(d)): p.read_bytes()
        for p in sorted(d.rglob("*"))
        if p.is_file() and p.suffix not in skip
    }


# ---------------------------------------------------------------------------
# 1. transform equivalence against the direct-sum oracle
# ---------------------------------------------------------------------------

def test_c01_fft_path_matches_direct_oracle():
    rng = np.random.default_rng(101)
    x = rng.standard_normal(2048)
    cfg = CwtConfig(omega0=6.0, n_scales=16, f_lo=100.0, f_hi=None)
    grid = build_scale_grid(cfg, 8000)
    t0 = time.monotonic()
    fast = cwt_fft(x, grid, cfg)
    slow = cwt_direct(x, grid, cfg)
    elapsed = time.monotonic() - t0
    worst = 0.0
    for j in range(grid.scales.size):
        denom = np.max(np.abs(slow[j]))
        worst = max(worst, float(np.max(np.abs(fast[j] - slow[j])) / denom))
    assert worst <= 1e-6
    assert elapsed < 10.0
    print(f"C1 PASS: max relative deviation {worst:.3g} (<=1e-6) in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 2. ridge localization for pure tones
# ---------------------------------------------------------------------------

def test_c02_tone_ridges_land_within_one_scale_step():
    cfg = CwtConfig(omega0=6.0, n_scales=64, f_lo=20.0, f_hi=None)
    grid = build_scale_grid(cfg, SR)
    pf = grid.pseudo_freqs
    step = np.log(pf[0] / pf[1])  # uniform in log by construction
    t = np.arange(SR) / SR
    margin = int(np.ceil(6.0 * grid.scales.max()))
    hits = []
    for f in (220.0, 880.0, 3520.0):
        w = cwt_fft(np.sin(2 * np.pi * f * t), grid, cfg)
        ridge = np.abs(w)[:, margin:-margin].mean(axis=1)
        got = pf[int(np.argmax(ridge))]
        dev = abs(np.log(got / f))
        assert dev <= step + 1e-12, (f, got)
        hits.append((f, got))
    print("C2 PASS: " + ", ".join(f"{f:g}Hz->{g:.1f}Hz" for f, g in hits)
          + f" (within one step of {np.exp(step):.4f}x)")


# ---------------------------------------------------------------------------
# 3. mother wavelet identities
# ---------------------------------------------------------------------------

def test_c03_morlet_identities():
    assert morlet_psi(np.array([0.0]))[0] == 1.0 + 0.0j
    mag1 = abs(morlet_psi(np.array([1.0]))[0])
    assert abs(mag1 - np.exp(-0.5)) <= 1e-9
    ts = np.linspace(-4.0, 4.0, 41)
    sym = np.max(np.abs(morlet_psi(-ts) - np.conj(morlet_psi(ts))))
    assert sym <= 1e-12
    print(f"C3 PASS: psi(0)=1, |psi(1)| err {abs(mag1 - np.exp(-0.5)):.2g} (<=1e-9), "
          f"conjugate symmetry {sym:.2g} (<=1e-12)")


# ---------------------------------------------------------------------------
# 4. factorization identities
# ---------------------------------------------------------------------------

def test_c04_svd_defining_identities():
    results = []
    for shape, seed in (((20, 30), 40), ((64, 500), 41)):
        a = np.random.default_rng(seed).standard_normal(shape)
        u, s, v = svd_full(a)
        recon = np.linalg.norm(a - (u * s) @ v.T) / np.linalg.norm(a)
        assert recon <= 1e-5
        r = s.size
        orth = max(
            np.max(np.abs(u.T @ u - np.eye(r))),
            np.max(np.abs(v.T @ v - np.eye(r))),
        )
        assert orth <= 1e-6
        worst_ek = 0.0
        for k in (1, r // 2, r - 1):
            ak = (u[:, :k] * s[:k]) @ v[:, :k].T
            resid = np.linalg.norm(a - ak)
            expect = np.sqrt(np.sum(s[k:] ** 2))
            worst_ek = max(worst_ek, abs(resid - expect) / expect)
        assert worst_ek <= 1e-4
        results.append((shape, recon, orth, worst_ek))
    print("C4 PASS: " + "; ".join(
        f"{sh}: recon {r:.2g}, orth {o:.2g}, eckart-young {e:.2g}"
        for sh, r, o, e in results))


# ---------------------------------------------------------------------------
# 5. gradient checks, layers and whole networks
# ---------------------------------------------------------------------------

def _fd(fn, x, idx, h=1e-5):
    xp = x.copy()
    xp[idx] += h
    xm = x.copy()
    xm[idx] -= h
    return (fn(xp) - fn(xm)) / (2.0 * h)


def _compare_sampled(fn, x, analytic, rng, n, tol, label, worst_box):
    picks = rng.choice(x.size, size=min(n, x.size), replace=False)
    for flat in picks:
        idx = np.unravel_index(int(flat), x.shape)
        err = abs(analytic[idx] - _fd(fn, x, idx)) / max(
            abs(analytic[idx]) + abs(_fd(fn, x, idx)), 1e-6
        )
        assert err <= tol, f"{label}{idx}: rel err {err:.3g}"
        worst_box[0] = max(worst_box[0], err)


def test_c05_gradient_checks_layers_and_networks():
    tol = 1e-4
    rng = np.random.default_rng(500)
    worst = [0.0]
    t0 = time.monotonic()

    # conv layer
    x = rng.standard_normal((2, 3, 7))
    w = rng.standard_normal((4, 3, 5)) * 0.3
    b = rng.standard_normal(4) * 0.1
    r = rng.standard_normal((2, 4, 7))
    gx, gw, gb = conv1d_backward(w, x, r)
    _compare_sampled(lambda v: np.sum(conv1d_forward(v, b, x) * r), w, gw, rng, 20, tol, "conv.w", worst)
    _compare_sampled(lambda v: np.sum(conv1d_forward(w, v, x) * r), b, gb, rng, 4, tol, "conv.b", worst)
    _compare_sampled(lambda v: np.sum(conv1d_forward(w, b, v) * r), x, gx, rng, 20, tol, "conv.x", worst)

    # linear layer
    x = rng.standard_normal((2, 6, 4))
    w = rng.standard_normal((3, 6)) * 0.4
    b = rng.standard_normal(3) * 0.1
    r = rng.standard_normal((2, 3, 4))
    gx, gw, gb = linear_backward(w, x, r)
    _compare_sampled(lambda v: np.sum(linear_forward(v, b, x) * r), w, gw, rng, 18, tol, "lin.w", worst)
    _compare_sampled(lambda v: np.sum(linear_forward(w, v, x) * r), b, gb, rng, 3, tol, "lin.b", worst)
    _compare_sampled(lambda v: np.sum(linear_forward(w, b, v) * r), x, gx, rng, 20, tol, "lin.x", worst)

    # channel norm
    x = rng.standard_normal((2, 5, 6))
    gain = 1.0 + 0.2 * rng.standard_normal(5)
    shift = 0.1 * rng.standard_normal(5)
    r = rng.standard_normal((2, 5, 6))

    def norm_loss(g_, s_, x_):
        return np.sum(channel_norm_forward(g_, s_, x_)[0] * r)

    _, cache = channel_norm_forward(gain, shift, x)
    gx, ggain, gshift = channel_norm_backward(gain, cache, r)
    _compare_sampled(lambda v: norm_loss(v, shift, x), gain, ggain, rng, 5, tol, "norm.gain", worst)
    _compare_sampled(lambda v: norm_loss(gain, v, x), shift, gshift, rng, 5, tol, "norm.shift", worst)
    _compare_sampled(lambda v: norm_loss(gain, shift, v), x, gx, rng, 20, tol, "norm.x", worst)

    # activations (keep clear of the relu kink)
    x = rng.standard_normal((3, 5)) + np.sign(rng.standard_normal((3, 5))) * 0.05
    r = rng.standard_normal((3, 5))
    _, mask = relu_forward(x)
    _compare_sampled(lambda v: np.sum(relu_forward(v)[0] * r), x,
                     relu_backward(mask, r), rng, 15, tol, "relu.x", worst)
    _, y = tanh_forward(x)
    _compare_sampled(lambda v: np.sum(tanh_forward(v)[0] * r), x,
                     tanh_backward(y, r), rng, 15, tol, "tanh.x", worst)

    # whole networks at the stated input size
    n_mels, hidden, k = 80, 128, 16
    trunk, post, cwt = build_nets(k=k, n_mels=n_mels, hidden=hidden)
    params = init_params(501, k=k, n_mels=n_mels, hidden=hidden).as_float64()
    x = rng.standard_normal((n_mels, 8))
    for net, out_ch in ((trunk, n_mels), (post, n_mels), (cwt, k)):
        r = rng.standard_normal((out_ch, 8))
        out, cache = net.forward(params, x)
        assert out.shape == r.shape
        gx, grads = net.backward(params, cache, r)

        def loss_for(pname):
            def fn(v):
                trial = dict(params)
                trial[pname] = v
                return np.sum(net.forward(trial, x)[0] * r)
            return fn

        for pname in grads:
            _compare_sampled(loss_for(pname), params[pname], grads[pname],
                             rng, 6, tol, pname, worst)
        _compare_sampled(lambda v: np.sum(net.forward(params, v)[0] * r),
                         x, gx, rng, 10, tol, f"{net.prefix}.x", worst)
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    print(f"C5 PASS: max relative error {worst[0]:.3g} (<=1e-4) in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 6. loss identities
# ---------------------------------------------------------------------------

def test_c06_loss_identities(pipeline):
    # hand arithmetic
    assert abs(wavelet_loss(np.array([1.0, 2.0]), np.zeros(2)) - 2.5) <= 1e-9
    t = np.linspace(-1, 1, 12).reshape(3, 4)
    assert abs(wavelet_loss(t + 1.0, t) - 1.0) <= 1e-9
    assert wavelet_loss(t, t) == 0.0
    gt = np.zeros((2, 2))
    assert abs(baseline_loss(gt + 2.0, gt + 1.0, gt) - 5.0) <= 1e-9
    assert abs(baseline_loss(gt, gt, gt)) <= 1e-9

    # additivity at every step of the full-scale training run
    reports = read_trace(Path(pipeline["run"]) / "loss_trace.csv")
    assert len(reports) == 201
    worst = max(abs(r.loss_total - (r.loss_baseline + r.loss_wavelet)) for r in reports)
    assert worst <= 1e-6
    print(f"C6 PASS: hand cases exact to 1e-9, per-step additivity gap {worst:.3g} (<=1e-6)")


# ---------------------------------------------------------------------------
# 7. training smoke test at the stated scale
# ---------------------------------------------------------------------------

def test_c07_training_reduces_both_losses(pipeline):
    reports = read_trace(Path(pipeline["run"]) / "loss_trace.csv")
    first, last = reports[1], reports[200]
    assert last.loss_total <= 0.5 * first.loss_total
    assert last.loss_wavelet <= 0.7 * first.loss_wavelet
    assert pipeline["elapsed"] < 300.0
    print(f"C7 PASS: total {first.loss_total:.4g}->{last.loss_total:.4g} "
          f"({last.loss_total / first.loss_total:.2f}x<=0.5), wavelet "
          f"{first.loss_wavelet:.4g}->{last.loss_wavelet:.4g} "
          f"({last.loss_wavelet / first.loss_wavelet:.2f}x<=0.7), "
          f"pipeline {pipeline['elapsed']:.0f}s (<300s)")


# ---------------------------------------------------------------------------
# 8. the side task reaches the shared pathway
# ---------------------------------------------------------------------------

def test_c08_aux_task_reaches_shared_trunk():
    rng = np.random.default_rng(800)
    mel = rng.normal(size=(3, 80, 12))
    coeff = rng.normal(size=(3, 16, 12))
    noisy = mel + 0.1 * rng.normal(size=mel.shape)
    nets = build_nets(k=16, n_mels=80)
    params = init_params(800, k=16, n_mels=80).as_float64()
    diffs = {}
    grads = {}
    for aux in (True, False):
        cfg = TrainConfig(steps=1, seed=0, aux_enabled=aux)
        values = compute_losses(params, nets, noisy, mel, coeff, cfg)
        grads[aux] = compute_gradients(params, nets, values, mel, coeff, cfg)
    for name in ("trunk.conv.w", "trunk.conv.b"):
        diffs[name] = float(np.max(np.abs(grads[True][name] - grads[False][name])))
    assert max(diffs.values()) > 0.0
    print("C8 PASS: max-abs trunk gradient difference "
          + ", ".join(f"{n}={d:.3g}" for n, d in diffs.items()) + " (>0)")


# ---------------------------------------------------------------------------
# 9. byte-identical reruns
# ---------------------------------------------------------------------------

def test_c09_pipeline_determinism(tmp_path):
    # every stage through the real CLI, twice, at a scale that keeps the
    # suite fast; determinism is scale-independent
    trees = []
    for name in ("one", "two"):
        root = tmp_path / name
        cfg = root / "run.cfg"
        root.mkdir()
        cfg.write_text("steps=25\nseed=3\nrank=8\n")
        c = ["--config", str(cfg)]
        assert main(["gen-corpus", str(root / "corpus"), "--n-utts", "6"] + c) == 0
        assert main(["extract", str(root / "corpus"), str(root / "features")] + c) == 0
        assert main(["fit-basis", str(root / "features"), str(root / "basis")] + c) == 0
        assert main(["train", str(root / "features"), str(root / "basis"),
                     str(root / "run")] + c) == 0
        trees.append({
            "corpus": _tree_bytes(root / "corpus"),
            "features": _tree_bytes(root / "features"),
            "basis": _tree_bytes(root / "basis"),
            "run": _tree_bytes(root / "run"),
        })
    for stage in ("corpus", "features", "basis", "run"):
        assert trees[0][stage] == trees[1][stage], f"{stage} differs between runs"
    n_files = sum(len(v) for v in trees[0].values())
    print(f"C9 PASS: {n_files} files byte-identical across two full runs")


# ---------------------------------------------------------------------------
# 10. serialization round trips
# ---------------------------------------------------------------------------

def test_c10_format_round_trips(tmp_path):
    rng = np.random.default_rng(1000)
    path = tmp_path / "t.ftn"
    for i in range(1000):
        ndim = int(rng.integers(1, 5))
        shape = tuple(int(rng.integers(1, 7)) for _ in range(ndim))
        t = rng.standard_normal(shape).astype(np.float32)
        write_tensor(path, t)
        back = read_tensor(path)
        assert back.shape == t.shape
        assert back.tobytes() == t.tobytes(), f"tensor {i} not bit-exact"

    two_by_three = np.array([[0.0, 3.0, 6.0], [9.0, 12.0, 15.0]], dtype=np.float32)
    data = pgm_bytes(two_by_three)
    assert data == b"P5\n3 2\n255\n" + bytes([0, 51, 102, 153, 204, 255])
    flat = pgm_bytes(np.full((2, 2), 7.0, dtype=np.float32))
    assert flat == b"P5\n2 2\n255\n" + bytes([128] * 4)
    assert data[11] == 0 and data[16] == 255  # min and max cells
    print("C10 PASS: 1000 tensors bit-exact, PGM examples byte-exact")
