"""Command-line interface: synth, preprocess, train, eval, predict, params,
gradcheck.

Exit codes: 0 success, 1 runtime/data failure (message on stderr), 2 usage
error (argparse).  Every subcommand that takes --seed is fully reproducible:
identical flags produce byte-identical file outputs under a single-threaded
numeric configuration.  AZARNET_THREADS caps preprocessing worker threads.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import CLASS_NAMES, generate_dataset, load_manifest, resolve_audio_path
from .dsp import load_spectrogram, preprocess, save_spectrogram, spectrogram_cache_path
from .errors import AzarNetError, ConfigError
from .gradcheck import (
    LAYER_TOLERANCE,
    MODEL_TOLERANCE,
    check_model,
    run_layer_suite,
)
from .metrics import class_report, confusion_matrix, report_to_text, write_report_csv
from .model import ModelConfig, build_azarnet, load_checkpoint, save_checkpoint
from .rng import Rng
from .training import TrainConfig, predict_probs, stratified_split, train


def _worker_count() -> int:
    env = os.environ.get("AZARNET_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"AZARNET_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"AZARNET_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def _parse_ints(text: str, flag: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _parse_floats(text: str, flag: str) -> tuple:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def cmd_synth(args) -> int:
    manifest = generate_dataset(args.per_class, args.seed, args.out)
    print(manifest)
    return 0


def cmd_preprocess(args) -> int:
    records = load_manifest(args.manifest)
    cache_dir = Path(args.cache)
    cache_dir.mkdir(parents=True, exist_ok=True)

    def one(record):
        wav = resolve_audio_path(args.manifest, record)
        out = spectrogram_cache_path(cache_dir, wav)
        if out.exists() and out.stat().st_mtime >= wav.stat().st_mtime:
            return ("skipped", wav, None)
        save_spectrogram(out, preprocess(wav))
        return ("written", wav, None)

    written = skipped = 0
    failures = []
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        futures = [pool.submit(one, rec) for rec in records]
        for record, fut in zip(records, futures):
            try:
                status, _, _ = fut.result()
            except (AzarNetError, OSError) as e:
                failures.append((record.path, e))
                print(f"error: {record.path}: {e}", file=sys.stderr)
                continue
            if status == "written":
                written += 1
            else:
                skipped += 1
    print(f"cached {written} spectrogram(s), {skipped} up to date, {len(failures)} failed")
    return 1 if failures else 0


def _load_cached_arrays(manifest_path, cache_dir, records):
    """Stack cached spectrograms into (X [N,256,256,1] float32, y [N] int64)."""
    xs = []
    ys = []
    for record in records:
        wav = resolve_audio_path(manifest_path, record)
        cache = spectrogram_cache_path(cache_dir, wav)
        if not cache.exists():
            raise AzarNetError(
                f"no cached spectrogram for {record.path} (expected {cache}); "
                "run `azarnet preprocess` first"
            )
        xs.append(load_spectrogram(cache))
        ys.append(CLASS_NAMES.index(record.label))
    x = np.stack(xs).astype(np.float32)[..., None]
    return x, np.asarray(ys, dtype=np.int64)


def _split_records(records, fraction, seed):
    """Honor frozen manifest splits when every record carries one; otherwise
    stratified-split with an rng derived from the seed."""
    if records and all(r.split is not None for r in records):
        return (
            [r for r in records if r.split == "train"],
            [r for r in records if r.split == "test"],
        )
    return stratified_split(records, fraction, Rng(seed).spawn(1000))


def cmd_train(args) -> int:
    records = load_manifest(args.manifest)
    train_recs, test_recs = _split_records(records, args.split, args.seed)
    x_tr, y_tr = _load_cached_arrays(args.manifest, args.cache, train_recs)
    x_te, y_te = _load_cached_arrays(args.manifest, args.cache, test_recs)

    model = build_azarnet(ModelConfig(seed=args.seed, l1=args.l1, l2=args.l2))
    cfg = TrainConfig(
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        learning_rate=args.lr,
        early_stop_patience=args.patience,
        split_fraction=args.split,
        seed=args.seed,
        target_train_acc=args.target_train_acc,
    )
    def log_epoch(s):
        val = f"  val loss {s.val_loss:.4f} acc {s.val_acc:.3f}" if s.val_loss is not None else ""
        print(
            f"epoch {s.epoch}/{cfg.max_epochs}  train loss {s.train_loss:.4f}"
            f" acc {s.train_acc:.3f}{val}",
            file=sys.stderr,
        )

    history = train(model, (x_tr, y_tr), (x_te, y_te), cfg, log=log_epoch)

    out = Path(args.out)
    save_checkpoint(model, out)
    history_path = Path(args.history) if args.history else out.with_suffix(".history.csv")
    history.write_csv(history_path)

    probs = predict_probs(model, x_te, cfg.batch_size)
    report = class_report(confusion_matrix(probs.argmax(axis=1), y_te))
    last = history.epochs[-1]
    print(
        f"trained {last.epoch} epoch(s)"
        + (f", best validation at epoch {history.best_epoch}" if history.best_epoch else "")
        + (" (stopped early)" if history.stopped_early else "")
    )
    print(f"checkpoint: {out}")
    print(f"history:    {history_path}")
    print(report_to_text(report))
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    records = load_manifest(args.manifest)
    x, y = _load_cached_arrays(args.manifest, args.cache, records)
    probs = predict_probs(model, x, args.batch_size)
    report = class_report(confusion_matrix(probs.argmax(axis=1), y), model.class_names)
    print(report_to_text(report))
    write_report_csv(report, args.report_csv)
    print(f"report CSV: {args.report_csv}")
    return 0


def cmd_predict(args) -> int:
    model = load_checkpoint(args.model)
    spec = preprocess(args.audio)
    probs = model.forward(spec.astype(np.float32)[None, :, :, None])[0]
    name_w = max(len(n) for n in model.class_names)
    for name, p in zip(model.class_names, probs):
        print(f"{name:<{name_w}}  {p:.4f}")
    print(f"predicted: {model.class_names[int(probs.argmax())]}")
    return 0


def _config_from_args(args) -> ModelConfig:
    kwargs = {}
    if args.input_shape:
        kwargs["input_shape"] = _parse_ints(args.input_shape, "--input-shape")
    if args.filters:
        kwargs["conv_filters"] = _parse_ints(args.filters, "--filters")
    if args.dropout:
        kwargs["dropout_rates"] = _parse_floats(args.dropout, "--dropout")
    if args.gru_units:
        kwargs["gru_units"] = _parse_ints(args.gru_units, "--gru-units")
    if args.bottleneck is not None:
        kwargs["bottleneck"] = args.bottleneck
    if args.classes is not None:
        kwargs["classes"] = args.classes
    return ModelConfig(**kwargs)


def cmd_params(args) -> int:
    model = build_azarnet(_config_from_args(args))
    rows, total = model.count_params()
    shapes = model.output_shapes()
    name_w = max(len(name) for name, _ in rows)
    print(f"{'Layer':<{name_w}}  {'Output shape':<16}  {'# Parameters':>12}")
    for (name, count), (_, shape) in zip(rows, shapes):
        dims = ", ".join(str(d) for d in shape)
        print(f"{name:<{name_w}}  {'(' + dims + ')':<16}  {count:>12}")
    print(f"Total parameters: {total}")
    return 0


def cmd_gradcheck(args) -> int:
    results = run_layer_suite(args.seed)
    failed = False
    for name, err in results.items():
        ok = err < LAYER_TOLERANCE
        failed |= not ok
        print(f"{name:<14} {err:.3e}  {'ok' if ok else f'FAIL (tolerance {LAYER_TOLERANCE:g})'}")
    model_err = check_model(args.seed)
    ok = model_err < MODEL_TOLERANCE
    failed |= not ok
    print(f"{'model':<14} {model_err:.3e}  {'ok' if ok else f'FAIL (tolerance {MODEL_TOLERANCE:g})'}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="azarnet", description="Dastgah classification pipeline"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--per-class", type=int, default=5, help="clips per class (default 5)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("preprocess", help="cache spectrograms for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True, help="cache directory for .spec files")
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("train", help="train a model on cached spectrograms")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.aznet)")
    p.add_argument("--history", help="history CSV path (default: <out>.history.csv)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=100, help="max epochs (default 100)")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default 1e-3)")
    p.add_argument("--l1", type=float, default=0.01, help="L1 penalty coefficient (default 0.01)")
    p.add_argument("--l2", type=float, default=0.01, help="L2 penalty coefficient (default 0.01)")
    p.add_argument("--patience", type=int, default=10, help="early-stop patience (default 10)")
    p.add_argument("--split", type=float, default=0.8, help="train fraction (default 0.8)")
    p.add_argument(
        "--target-train-acc",
        type=float,
        default=None,
        help="stop once full-train-set accuracy reaches this value",
    )
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--report-csv", default="report.csv", help="where to write the report CSV")
    p.add_argument("--batch-size", type=int, default=16)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="classify one WAV file")
    p.add_argument("--model", required=True)
    p.add_argument("--audio", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("params", help="print the layer/shape/parameter table")
    p.add_argument("--input-shape", help="H,W,C (default 256,256,1)")
    p.add_argument("--filters", help="conv filters, e.g. 16,32,32,32,64")
    p.add_argument("--dropout", help="dropout rates, e.g. 0.1,0.2,0.3,0.3,0.4")
    p.add_argument("--gru-units", help="GRU units, e.g. 50,100")
    p.add_argument("--bottleneck", type=int)
    p.add_argument("--classes", type=int)
    p.set_defaults(fn=cmd_params)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except AzarNetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
