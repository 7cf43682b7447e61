"""Command-line surface.

Subcommands: gen-corpus, extract, fit-basis, train, eval, plot.  Every
command exits 0 on success and nonzero on any failure; diagnostics go to
stderr, data goes to files (eval and fit-basis additionally print their
metric lines to stdout as key=value).  Existing outputs are skipped unless
--force is given, so pipelines can be rerun incrementally.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import corpus as corpus_mod
from . import lowrank, plots
from . import train as train_mod
from .audio import read_wav
from .config import RunConfig
from .cwt import build_scale_grid, cwt_fft, pad_scalogram, scalogram_at_frames
from .melspec import frame_count, mel_spectrogram, pad_mel
from .nets import ParamStore, build_nets, init_params
from .tensor_store import read_tensor, write_tensor

META_FILE = "features.meta"
PSEUDO_FREQS_FILE = "pseudo_freqs.ftn"
MEL_SUFFIX = ".mel.ftn"
SCAL_SUFFIX = ".scal.ftn"
CHECKPOINT_DIR = "checkpoint"
CONFIG_ECHO = "config.txt"


class CliError(RuntimeError):
    pass


def _load_run_config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "no_aux", False):
        overrides["aux_enabled"] = False
    return config_mod.load_config(args.config, overrides)


def _skip(path, force: bool) -> bool:
    if force or not Path(path).exists():
        return False
    print(f"skip: {path} exists (use --force to overwrite)", file=sys.stderr)
    return True


# ---------------------------------------------------------------------------
# gen-corpus
# ---------------------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    cfg = _load_run_config(args)
    out = Path(args.out_dir)
    if _skip(out / corpus_mod.METADATA, args.force):
        return 0
    entries = corpus_mod.gen_corpus(out, args.n_utts, cfg.seed, cfg.sample_rate)
    print(f"wrote {len(entries)} utterances under {out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

def cmd_extract(args) -> int:
    cfg = _load_run_config(args)
    mel_cfg = cfg.to_mel_config()
    cwt_cfg = cfg.to_cwt_config()
    grid = build_scale_grid(cwt_cfg, cfg.sample_rate)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    entries = corpus_mod.load_manifest(args.corpus_dir)
    failures = 0

    # first pass: read audio and settle the shared padded length
    loaded = []
    frame_counts = {}
    for e in entries:
        try:
            w = read_wav(e.wav_path)
            if w.sample_rate != cfg.sample_rate:
                raise CliError(
                    f"sample rate {w.sample_rate} != configured {cfg.sample_rate}"
                )
            frame_counts[e.utt_id] = frame_count(len(w), mel_cfg)
            loaded.append((e, w))
        except (CliError, ValueError, OSError) as exc:
            failures += 1
            print(f"error: {e.wav_path}: {exc}", file=sys.stderr)
    if not loaded:
        print("error: no usable utterances", file=sys.stderr)
        return 1
    pad_frames = cfg.pad_frames if cfg.pad_frames > 0 else max(frame_counts.values())

    for e, w in loaded:
        mel_path = out / f"{e.utt_id}{MEL_SUFFIX}"
        scal_path = out / f"{e.utt_id}{SCAL_SUFFIX}"
        if not args.force and mel_path.exists() and scal_path.exists():
            continue
        try:
            mel = pad_mel(mel_spectrogram(w, mel_cfg), pad_frames, mel_cfg.log_floor)
            field = cwt_fft(w, grid, cwt_cfg)
            scal = pad_scalogram(scalogram_at_frames(field, mel_cfg, grid), pad_frames)
            write_tensor(mel_path, mel.values)
            write_tensor(scal_path, scal.values)
        except ValueError as exc:
            failures += 1
            print(f"error: {e.wav_path}: {exc}", file=sys.stderr)

    write_tensor(out / PSEUDO_FREQS_FILE, grid.pseudo_freqs.astype(np.float32))
    meta = {
        "n_utts": len(loaded),
        "sample_rate": cfg.sample_rate,
        "n_mels": cfg.n_mels,
        "n_scales": cfg.n_scales,
        "pad_frames": pad_frames,
        "hop": cfg.hop,
        "win_length": cfg.win_length,
        "n_fft": cfg.n_fft,
        "log_floor": repr(cfg.log_floor),
        "omega0": repr(cfg.omega0),
        "cwt_f_lo": repr(cwt_cfg.f_lo),
        "cwt_f_hi": repr(cwt_cfg.resolved_f_hi(cfg.sample_rate)),
        "cwt_normalize": "true" if cwt_cfg.normalize else "false",
    }
    (out / META_FILE).write_text(
        "\n".join(f"{k}={v}" for k, v in meta.items()) + "\n"
    )
    return 1 if failures else 0


def read_features_meta(features_dir) -> dict:
    path = Path(features_dir) / META_FILE
    if not path.is_file():
        raise CliError(f"missing {path} (run extract first)")
    meta = {}
    for line in path.read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key] = value
    return meta


def load_feature_set(features_dir):
    """All feature pairs, sorted by utterance id -> (ids, mel [B,M,T], scal [B,S,T])."""
    d = Path(features_dir)
    mel_paths = sorted(d.glob(f"*{MEL_SUFFIX}"))
    if not mel_paths:
        raise CliError(f"no {MEL_SUFFIX} files under {d}")
    ids, mels, scals = [], [], []
    for mp in mel_paths:
        utt_id = mp.name[: -len(MEL_SUFFIX)]
        sp = d / f"{utt_id}{SCAL_SUFFIX}"
        if not sp.is_file():
            raise CliError(f"missing scalogram for {utt_id}: {sp}")
        mel = read_tensor(mp)
        scal = read_tensor(sp)
        if mel.ndim != 2 or scal.ndim != 2 or mel.shape[1] != scal.shape[1]:
            raise CliError(f"{utt_id}: inconsistent feature shapes {mel.shape} / {scal.shape}")
        ids.append(utt_id)
        mels.append(mel)
        scals.append(scal)
    mel_shapes = {m.shape for m in mels}
    scal_shapes = {s.shape for s in scals}
    if len(mel_shapes) != 1 or len(scal_shapes) != 1:
        raise CliError(
            "feature shapes differ across utterances: "
            f"mel {sorted(map(str, mel_shapes))}, scalogram {sorted(map(str, scal_shapes))}"
        )
    return ids, np.stack(mels), np.stack(scals)


# ---------------------------------------------------------------------------
# fit-basis
# ---------------------------------------------------------------------------

def cmd_fit_basis(args) -> int:
    cfg = _load_run_config(args)
    out = Path(args.out_dir)
    if _skip(out / lowrank.U_FILE, args.force):
        return 0
    _, _, scals = load_feature_set(args.features_dir)
    frames = np.concatenate(list(scals), axis=1)  # [n_scales, total_frames]
    k = args.rank if args.rank is not None else cfg.rank
    basis = lowrank.fit_global_basis(frames, k)
    lowrank.save_basis(out, basis)
    print("retained_energy=%.9g" % lowrank.retained_energy(basis, frames))
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _project_batch(scals: np.ndarray, basis) -> np.ndarray:
    return np.stack([lowrank.project(s, basis) for s in scals])


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    out = Path(args.out_dir)
    trace_path = out / train_mod.TRACE_FILE
    if _skip(trace_path, args.force):
        return 0
    out.mkdir(parents=True, exist_ok=True)

    _, mels, scals = load_feature_set(args.features_dir)
    basis = lowrank.load_basis(args.basis_dir)
    if mels.shape[1] != cfg.n_mels:
        raise CliError(f"features have {mels.shape[1]} mel bins, config says {cfg.n_mels}")
    if scals.shape[1] != basis.n_scales:
        raise CliError(
            f"features have {scals.shape[1]} scales, basis expects {basis.n_scales}"
        )
    coeffs = _project_batch(scals, basis)

    train_cfg = cfg.to_train_config()
    store = init_params(train_cfg.seed, k=basis.k, n_mels=cfg.n_mels)
    reports = train_mod.train_loop(store, mels, coeffs, train_cfg)

    store.save(out / CHECKPOINT_DIR)
    train_mod.write_trace(trace_path, reports)
    (out / CONFIG_ECHO).write_text(cfg.to_text())
    plots.save_loss_curve(out / "loss_curve.png", reports)
    final = reports[-1]
    print(
        f"step {final.step}: total {final.loss_total:.6g} "
        f"baseline {final.loss_baseline:.6g} wavelet {final.loss_wavelet:.6g}",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    train_cfg = cfg.to_train_config()
    store = ParamStore.load(args.checkpoint)
    _, mels, scals = load_feature_set(args.features_dir)
    basis = lowrank.load_basis(args.basis_dir)
    coeff_gt = _project_batch(scals, basis).astype(np.float64)
    mel_gt = mels.astype(np.float64)
    scal_gt = scals.astype(np.float64)

    nets = build_nets(k=basis.k, n_mels=mel_gt.shape[1])
    trunk, post, cwt = nets
    params = store.as_float64()

    # same decoder stand-in draw as the final trace row, so evaluating on the
    # training set reproduces that row's losses
    noise = train_mod.noise_for_step(train_cfg.seed, train_cfg.steps, mel_gt.shape)
    noisy = mel_gt + train_cfg.noise_sigma * noise

    trunk_out, _ = trunk.forward(params, noisy)
    post_out, _ = post.forward(params, trunk_out)
    coeff_pred, _ = cwt.forward(params, trunk_out)

    mel_mse = train_mod.mse(post_out, mel_gt)
    wavelet_mse = train_mod.mse(coeff_pred, coeff_gt)

    coeff_from_post, _ = cwt.forward(params, post_out)
    recon = np.stack([lowrank.reconstruct(c.astype(np.float32), basis) for c in coeff_from_post])
    wavelet_recon_mse = train_mod.mse(recon, scal_gt)

    print("mel_mse=%.9g" % mel_mse)
    print("wavelet_mse=%.9g" % wavelet_mse)
    print("wavelet_recon_mse=%.9g" % wavelet_recon_mse)

    if args.figures_dir is not None:
        fig_dir = Path(args.figures_dir)
        fig_dir.mkdir(parents=True, exist_ok=True)
        plots.save_mel_comparison(
            fig_dir / "mel_comparison.png", noisy[0], post_out[0], mel_gt[0]
        )
        plots.save_scalogram_comparison(
            fig_dir / "scalogram_comparison.png", recon[0], scal_gt[0]
        )
    return 0


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def cmd_plot(args) -> int:
    if _skip(args.out_image, args.force):
        return 0
    t = read_tensor(args.tensor_file)
    if t.ndim != 2:
        raise CliError(f"plot needs a 2-D tensor, got {t.ndim}-D from {args.tensor_file}")
    plots.write_pgm(args.out_image, t)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub, train_only: bool = False):
    sub.add_argument("--config", default=None, help="key=value config file")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--force", action="store_true", help="overwrite existing outputs")
    if train_only:
        sub.add_argument(
            "--no-aux", action="store_true", help="disable the wavelet side objective"
        )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="melwave",
        description="Mel + wavelet feature pipeline with a trainable enhancement stack",
    )
    sp = p.add_subparsers(dest="command", required=True)

    g = sp.add_parser("gen-corpus", help="write a synthetic corpus")
    g.add_argument("out_dir")
    g.add_argument("--n-utts", type=int, default=20)
    _add_common(g)
    g.set_defaults(func=cmd_gen_corpus)

    e = sp.add_parser("extract", help="compute Mel + scalogram features")
    e.add_argument("corpus_dir")
    e.add_argument("out_dir")
    _add_common(e)
    e.set_defaults(func=cmd_extract)

    f = sp.add_parser("fit-basis", help="fit the global low-rank scalogram basis")
    f.add_argument("features_dir")
    f.add_argument("out_dir")
    f.add_argument("--rank", type=int, default=None, help="override the config rank")
    _add_common(f)
    f.set_defaults(func=cmd_fit_basis)

    t = sp.add_parser("train", help="train the enhancement stack")
    t.add_argument("features_dir")
    t.add_argument("basis_dir")
    t.add_argument("out_dir")
    _add_common(t, train_only=True)
    t.set_defaults(func=cmd_train)

    v = sp.add_parser("eval", help="report checkpoint metrics on a feature set")
    v.add_argument("checkpoint")
    v.add_argument("features_dir")
    v.add_argument("basis_dir")
    v.add_argument("--figures-dir", default=None, help="also write comparison figures")
    _add_common(v)
    v.set_defaults(func=cmd_eval)

    pl = sp.add_parser("plot", help="render a 2-D tensor file as a PGM image")
    pl.add_argument("tensor_file")
    pl.add_argument("out_image")
    _add_common(pl)
    pl.set_defaults(func=cmd_plot)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, train_mod.TrainingDivergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
