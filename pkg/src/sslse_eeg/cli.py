"""Command line front end.

Subcommands map onto the pipeline stages: synth, encode, pretrain, finetune,
ablate, transfer, report. Each run gets a fresh timestamped directory that is
never overwritten, with the fully materialized configuration echoed into it.
Machine-readable JSON lines go to stdout; the human summary goes to stderr.

This module imports only the standard library at the top level so main() can
cap BLAS thread pools (SSLSE_THREADS) before numpy is ever loaded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _apply_thread_cap() -> None:
    cap = os.environ.get("SSLSE_THREADS")
    if not cap:
        return
    for var in _THREAD_VARS:
        os.environ.setdefault(var, cap)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    sys.stdout.flush()


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _make_run_dir(out: str | None, command: str) -> Path:
    base = Path(out) if out else Path("runs")
    stamp = time.strftime("%Y%m%d-%H%M%S")
    candidate = base / f"{command}-{stamp}"
    suffix = 0
    while True:
        try:
            candidate.mkdir(parents=True, exist_ok=False)
            return candidate
        except FileExistsError:
            suffix += 1
            candidate = base / f"{command}-{stamp}-{suffix}"


def _load_run_config(args):
    from .config import load_config
    from .errors import MissingInput

    path = Path(args.config)
    if not path.exists():
        raise MissingInput(f"config not found: {path}")
    cfg = load_config(path)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.ssl.seed = args.seed
        cfg.eval.seed = args.seed
    if getattr(args, "se", None) is not None:
        # cfg.model is the same object cfg.ssl.encoder holds, so this
        # override reaches both stages.
        cfg.model.se_enabled = args.se == "on"
    return cfg


def _read_label_sidecar(path: Path) -> dict[int, int]:
    labels: dict[int, int] = {}
    for line in path.read_text().splitlines():
        if line.strip():
            row = json.loads(line)
            labels[int(row["window"])] = int(row["label"])
    return labels


def _load_recording(cfg):
    from .errors import MissingInput
    from .ingest import parse_csv, parse_edf, synthesize_recording

    ing = cfg.ingest
    if ing.kind == "synth":
        return synthesize_recording(ing.synth)
    if ing.kind == "edf":
        path = Path(ing.path)
        if not path.exists():
            raise MissingInput(f"EDF file not found: {path}")
        rec = parse_edf(path.read_bytes())
        sidecar = path.with_name(path.stem + ".labels.jsonl")
        if sidecar.exists():
            labels = _read_label_sidecar(sidecar)
            if labels:
                rec.window_labels = labels
                rec.num_classes = max(labels.values()) + 1
        return rec
    if ing.kind == "csv":
        path = Path(ing.path)
        if not path.exists():
            raise MissingInput(f"CSV file not found: {path}")
        return parse_csv(path.read_text(), ing.csv_rate_hz, source_id=path.stem)
    raise MissingInput(f"ingest kind {ing.kind!r} does not provide a recording")


def _load_images(cfg) -> list:
    from .errors import MissingInput
    from .imaging import ColorLut, encode_window, read_image
    from .ingest import iter_windows

    ing = cfg.ingest
    if ing.kind == "images":
        root = Path(ing.path)
        if not root.is_dir():
            raise MissingInput(f"images directory not found: {root}")
        paths = sorted(root.glob("*.eegimg"))
        if not paths:
            raise MissingInput(f"no .eegimg files under {root}")
        return [read_image(p) for p in paths]

    rec = _load_recording(cfg)
    lut = None
    if cfg.imaging.lut_path is not None:
        lut_path = Path(cfg.imaging.lut_path)
        if not lut_path.exists():
            raise MissingInput(f"LUT file not found: {lut_path}")
        lut = ColorLut.from_file(lut_path)
    images = []
    for w, block, label in iter_windows(rec, cfg.window):
        images.append(encode_window(
            block, cfg.window, rec.sample_rate_hz, lut=lut,
            out_h=cfg.imaging.out_h, out_w=cfg.imaging.out_w,
            label=label, source_id=rec.source_id, window_index=w,
            resize_mode=cfg.imaging.resize_mode))
    return images


# --- subcommands ------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _load_run_config(args)
    from .config import config_json
    from .errors import ConfigParse
    from .ingest import synthesize_recording, write_edf

    if cfg.ingest.kind != "synth":
        raise ConfigParse("synth needs an ingest.synth section, "
                          f"got ingest kind {cfg.ingest.kind!r}")
    rec = synthesize_recording(cfg.ingest.synth)
    run_dir = _make_run_dir(args.out, "synth")
    (run_dir / "config.json").write_text(config_json(cfg))
    edf_path = run_dir / "recording.edf"
    edf_path.write_bytes(write_edf(rec))
    with (run_dir / "recording.labels.jsonl").open("w") as fh:
        for w in sorted(rec.window_labels or {}):
            fh.write(json.dumps({"window": w, "label": rec.window_labels[w]}) + "\n")
    _emit({"event": "synth", "run_dir": str(run_dir), "edf": str(edf_path),
           "channels": rec.channels, "samples": rec.n_samples,
           "windows": len(rec.window_labels or {})})
    _say(f"wrote {edf_path} ({rec.channels} ch, {rec.duration_s:.1f} s, "
         f"{len(rec.window_labels or {})} labeled windows)")
    return 0


def cmd_encode(args) -> int:
    cfg = _load_run_config(args)
    from .config import config_json
    from .imaging import manifest_line, write_image, write_png

    images = _load_images(cfg)
    run_dir = _make_run_dir(args.out, "encode")
    (run_dir / "config.json").write_text(config_json(cfg))
    img_dir = run_dir / "images"
    img_dir.mkdir()
    lines = []
    for img in images:
        name = f"{img.source_id or 'rec'}-{img.window_index:05d}.eegimg"
        write_image(img, img_dir / name)
        lines.append(manifest_line(name, img))
        if cfg.imaging.png_export:
            write_png(img, img_dir / (name[:-len(".eegimg")] + ".png"))
    (run_dir / "manifest.jsonl").write_text("\n".join(lines) + "\n")
    _emit({"event": "encode", "run_dir": str(run_dir), "images": len(images)})
    _say(f"encoded {len(images)} windows into {img_dir}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load_run_config(args)
    if args.epochs is not None:
        cfg.ssl.epochs = args.epochs
    from .checkpoint import (load_checkpoint, save_checkpoint,
                             tensors_to_params, unpack_optimizer)
    from .config import config_json, effective_config
    from .contrastive import pretrain
    from .errors import MissingInput
    from .report import render_loss_curve

    params = None
    opt = None
    start_epoch = 0
    if args.resume is not None:
        rpath = Path(args.resume)
        if not rpath.exists():
            raise MissingInput(f"checkpoint not found: {rpath}")
        loaded = load_checkpoint(rpath)
        params = tensors_to_params(loaded.params)
        opt = unpack_optimizer(loaded.optimizer)
        start_epoch = loaded.epoch

    images = _load_images(cfg)
    run_dir = _make_run_dir(args.out, "pretrain")
    (run_dir / "config.json").write_text(config_json(cfg))
    ckpt_dir = run_dir / "checkpoints"
    ckpt_dir.mkdir()
    cfg_dict = effective_config(cfg)
    final_opt: dict = {"state": opt}

    def on_epoch(epoch, p, state, entry):
        # The checkpoint's epoch field counts completed epochs, so a resume
        # starts exactly where this file left off.
        final_opt["state"] = state
        save_checkpoint(ckpt_dir / f"epoch-{epoch + 1:04d}.ckpt", cfg_dict,
                        p, state, epoch + 1, cfg.seed)

    params, history = pretrain(images, cfg.ssl, params=params, opt_state=opt,
                               start_epoch=start_epoch, on_epoch=on_epoch)
    with (run_dir / "history.jsonl").open("w") as fh:
        for entry in history:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            _emit({"event": "epoch", **entry})
    if history:
        render_loss_curve(history, run_dir / "loss_curve.png")
    save_checkpoint(run_dir / "final.ckpt", cfg_dict, params,
                    final_opt["state"], cfg.ssl.epochs, cfg.seed)
    _emit({"event": "pretrained", "run_dir": str(run_dir),
           "epochs": len(history),
           "final_loss": history[-1]["mean_loss"] if history else None})
    _say(f"pretrained for {len(history)} epoch(s); checkpoint at "
         f"{run_dir / 'final.ckpt'}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_run_config(args)
    if args.epochs is not None:
        cfg.eval.epochs = args.epochs
    from .checkpoint import load_checkpoint, tensors_to_params
    from .config import config_json, parse_config
    from .errors import MissingInput
    from .evaluate import finetune

    if args.resume is None:
        raise MissingInput("finetune needs --resume with a pretraining checkpoint")
    rpath = Path(args.resume)
    if not rpath.exists():
        raise MissingInput(f"checkpoint not found: {rpath}")
    loaded = load_checkpoint(rpath)
    enc_cfg = parse_config(loaded.config).model
    if getattr(args, "se", None) is not None:
        enc_cfg.se_enabled = args.se == "on"
    params = tensors_to_params(loaded.params)

    images = _load_images(cfg)
    run_dir = _make_run_dir(args.out, "finetune")
    (run_dir / "config.json").write_text(config_json(cfg))
    _, report = finetune(params, images, cfg.eval, enc_cfg)
    (run_dir / "metrics.json").write_text(report.to_json() + "\n")
    _emit({"event": "metrics", **json.loads(report.to_json())})
    _say(f"accuracy {report.accuracy:.4f}, macro F1 {report.macro_f1:.4f} "
         f"on {report.n} held-out windows ({run_dir / 'metrics.json'})")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_run_config(args)
    if args.epochs is not None:
        cfg.ssl.epochs = args.epochs
        cfg.eval.epochs = args.epochs
    from .config import config_json
    from .evaluate import run_ablation
    from .report import render_ablation_chart, write_metrics_csv

    images = _load_images(cfg)
    run_dir = _make_run_dir(args.out, "ablate")
    (run_dir / "config.json").write_text(config_json(cfg))
    result = run_ablation(images, cfg.eval, cfg.ssl)
    rows = [json.loads(r.to_json()) for r in result.reports]
    (run_dir / "ablation.json").write_text(
        json.dumps(rows, indent=2, sort_keys=True) + "\n")
    (run_dir / "table.txt").write_text(result.table + "\n")
    write_metrics_csv(rows, run_dir / "ablation.csv")
    render_ablation_chart(rows, run_dir / "ablation_chart.png")
    for row in rows:
        _emit({"event": "cell", **row})
    _say(result.table)
    _say(f"grid artifacts under {run_dir}")
    return 0


def cmd_transfer(args) -> int:
    cfg_a = _load_run_config(args)
    from .config import config_json, load_config
    from .errors import MissingInput
    from .evaluate import run_transfer

    path_b = Path(args.config_b)
    if not path_b.exists():
        raise MissingInput(f"config not found: {path_b}")
    cfg_b = load_config(path_b)
    if args.seed is not None:
        cfg_b.seed = args.seed
        cfg_b.ssl.seed = args.seed
        cfg_b.eval.seed = args.seed
    if args.epochs is not None:
        cfg_a.ssl.epochs = args.epochs
        cfg_b.eval.epochs = args.epochs

    images_a = _load_images(cfg_a)
    images_b = _load_images(cfg_b)
    run_dir = _make_run_dir(args.out, "transfer")
    (run_dir / "config.json").write_text(config_json(cfg_a))
    (run_dir / "config_b.json").write_text(config_json(cfg_b))
    report = run_transfer(images_a, images_b, cfg_b.eval, cfg_a.ssl)
    (run_dir / "metrics.json").write_text(report.to_json() + "\n")
    _emit({"event": "metrics", **json.loads(report.to_json())})
    _say(f"transfer accuracy {report.accuracy:.4f}, macro F1 "
         f"{report.macro_f1:.4f} on {report.n} held-out windows")
    return 0


def cmd_report(args) -> int:
    from .errors import MissingInput
    from .report import render_run_report

    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise MissingInput(f"run directory not found: {run_dir}")
    written = render_run_report(run_dir)
    for path in written:
        _emit({"event": "artifact", "path": str(path)})
    _say(f"rendered {len(written)} artifact(s) under {run_dir}")
    return 0


# --- parser and entry point ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sslse",
        description="EEG windows to images, contrastive pretraining, "
                    "frozen-encoder evaluation, and the gating ablation grid.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, resume=False):
        sp.add_argument("--config", required=True,
                        help="run configuration JSON")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the seed for every stage")
        sp.add_argument("--out", default=None,
                        help="parent directory for run directories (default runs/)")
        sp.add_argument("--se", choices=("on", "off"), default=None,
                        help="override channel gating in the encoder")
        sp.add_argument("--epochs", type=int, default=None,
                        help="override the invoked stage's epoch count")
        if resume:
            sp.add_argument("--resume", default=None,
                            help="checkpoint file to continue from")

    commands = (
        ("synth", cmd_synth, False,
         "write a synthetic labeled recording as EDF plus a label sidecar"),
        ("encode", cmd_encode, False,
         "window a recording and write one image file per window"),
        ("pretrain", cmd_pretrain, True,
         "contrastive pretraining with per-epoch checkpoints"),
        ("finetune", cmd_finetune, True,
         "train the classification head from a checkpointed encoder"),
        ("ablate", cmd_ablate, False,
         "run the 2x2 gating/pretraining grid on one shared split"),
        ("transfer", cmd_transfer, False,
         "pretrain on corpus A, evaluate with labels from corpus B"),
    )
    for name, fn, resume, doc in commands:
        sp = sub.add_parser(name, help=doc, description=doc)
        common(sp, resume=resume)
        if name == "transfer":
            sp.add_argument("--config-b", dest="config_b", required=True,
                            help="configuration for the labeled corpus")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("report", help="re-render figures and CSVs for a run",
                        description="re-render figures and CSVs for a run")
    sp.add_argument("run_dir", help="run directory holding the artifacts")
    sp.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    from .errors import PipelineError

    try:
        return args.func(args)
    except PipelineError as exc:
        _emit({"event": "error", "category": type(exc).__name__,
               "message": str(exc)})
        _say(f"error[{type(exc).__name__}]: {exc}")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
