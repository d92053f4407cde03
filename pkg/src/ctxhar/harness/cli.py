"""Command-line entry point: ``ctxhar <subcommand> [--seed N] [--config F] [--out DIR]``."""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .. import __version__
from ..attributes import AttributeClassMap
from ..attrnet import TrainConfig, forward, loss_history_csv, load_network, save_network, train
from ..metrics import (accuracy, confusion_csv, confusion_matrix, f1_report, mutual_information,
                       per_class_csv)
from ..segments import SegmentTable, ingest_dataset, table_to_csv
from ..shallow import BACKEND
from ..shallow.heads import HEAD_KINDS, fit_head, load_head, save_head
from ..simgen import generate, generate_raw, parse_scenario
from .config import ExperimentConfig, load_experiment
from .experiments import run_comparison, run_noise_sweep, write_results

WINDOWS_FILE = "windows.npz"


def _manifest(command: str, body: str, **extra) -> str:
    lines = ["# ctxhar manifest", f"# version: {__version__}", f"# command: {command}",
             f"# forest backend: {BACKEND}"]
    lines += [f"# {k}: {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n" + body


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _experiment(args) -> ExperimentConfig:
    cfg = load_experiment(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _dataset_path(path: str) -> Path:
    p = Path(path)
    return p / "dataset.csv" if p.is_dir() else p


def cmd_simulate(args) -> int:
    if args.config:
        text = Path(args.config).read_text()
        spec = parse_scenario(text, base_dir=Path(args.config).parent)
    else:
        text = resources.files("ctxhar.data").joinpath("scenario_default.cfg").read_text()
        spec = parse_scenario(text)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    data = generate_raw(spec, args.window, args.channels) if args.raw else generate(spec)
    out = _out_dir(args)
    (out / "dataset.csv").write_text(table_to_csv(data))
    if args.raw:
        with open(out / WINDOWS_FILE, "wb") as fh:
            np.savez(fh, windows=data.windows)
    (out / "manifest.txt").write_text(
        _manifest("simulate", text, seed=spec.seed, raw=args.raw, window=args.window, channels=args.channels)
    )
    print(f"wrote {len(data)} segments from {spec.n_recordings} recordings to {out}")
    return 0


def _windows_for(data_path: Path, n: int) -> np.ndarray:
    wpath = data_path.parent / WINDOWS_FILE
    if not wpath.exists():
        raise FileNotFoundError(f"{wpath} not found; run 'simulate --raw' first")
    with np.load(wpath, allow_pickle=False) as z:
        windows = z["windows"]
    if len(windows) != n:
        raise ValueError(f"{wpath} has {len(windows)} windows for {n} segments")
    return windows


def cmd_train_attrnet(args) -> int:
    cfg = load_experiment(args.config).attrnet
    seed = 0 if args.seed is None else args.seed
    tc = TrainConfig(learning_rate=cfg.learning_rate, batch_size=cfg.batch_size,
                     epochs=args.epochs or cfg.epochs, seed=seed, optimizer=cfg.optimizer,
                     filters=cfg.filters, hidden=cfg.hidden)
    data_path = _dataset_path(args.data)
    data = ingest_dataset(data_path)
    if data.attributes is None:
        raise ValueError("training targets need attribute columns in the dataset")
    windows = _windows_for(data_path, len(data))
    net, history = train(tc, windows, data.attributes)
    out = _out_dir(args)
    save_network(net, out / "network.npz", tc)
    (out / "loss.csv").write_text(loss_history_csv(history))
    body = "".join(f"{k} = {v}\n" for k, v in vars(tc).items())
    (out / "manifest.txt").write_text(_manifest("train-attrnet", "[attrnet]\n" + body, data=data_path))
    print(f"final mean BCE {history[-1]:.4f} after {tc.epochs} epochs")
    return 0


def cmd_export_posteriors(args) -> int:
    net = load_network(args.model)
    data_path = _dataset_path(args.data)
    data = ingest_dataset(data_path)
    windows = _windows_for(data_path, len(data))
    pi = forward(net, windows)
    exported = SegmentTable(data.recording, data.frame, data.step, data.cls, pi, data.attributes)
    out = _out_dir(args)
    (out / "dataset.csv").write_text(table_to_csv(exported))
    (out / "manifest.txt").write_text(_manifest("export-posteriors", "", model=args.model, data=data_path))
    print(f"exported {len(exported)} posteriors to {out / 'dataset.csv'}")
    return 0


def cmd_fit(args) -> int:
    data = ingest_dataset(_dataset_path(args.data))
    seed = 0 if args.seed is None else args.seed
    n_classes = args.classes or int(data.cls.max()) + 1
    n_steps = args.steps or int(data.step.max()) + 1
    gmap = AttributeClassMap.load(args.gmap, n_classes=n_classes) if args.gmap else None
    options = {"trees": args.trees, "seed": seed, "n_jobs": args.jobs} if args.kind == "rf" else {}
    head = fit_head(args.kind, data, args.context, n_classes, n_steps, gmap=gmap, options=options)
    out = _out_dir(args)
    save_head(head, out / "model.npz")
    (out / "manifest.txt").write_text(_manifest(
        "fit", "", kind=args.kind, context=args.context, seed=seed, trees=args.trees, data=args.data))
    print(f"saved {args.kind} model to {out / 'model.npz'}")
    return 0


def cmd_eval(args) -> int:
    head = load_head(args.model)
    data = ingest_dataset(_dataset_path(args.data), n_classes=head.n_classes, n_steps=head.n_steps)
    pred = head.predict(data)
    acc = accuracy(data.cls, pred)
    report = f1_report(data.cls, pred, head.n_classes)
    f1 = report.macro
    line = f"{head.kind},{'true' if head.use_steps else 'none'},{acc!r},{f1!r}\n"
    print(f"{head.kind}: accuracy {acc:.4f}  macro-F1 {f1:.4f}")
    if report.absent:
        print(f"classes absent from truth and prediction (F1 counted as 0): {list(report.absent)}")
    if args.out:
        out = _out_dir(args)
        (out / "eval.csv").write_text("model,context,accuracy,macro_f1\n" + line)
        (out / "per_class.csv").write_text(per_class_csv(report, head.class_names))
        (out / "confusion.csv").write_text(
            confusion_csv(confusion_matrix(data.cls, pred, head.n_classes), head.class_names))
        (out / "manifest.txt").write_text(_manifest("eval", "", model=args.model, data=args.data))
    return 0


def cmd_compare(args) -> int:
    cfg = _experiment(args)
    table = run_comparison(cfg)
    write_results(table, _out_dir(args), _manifest("compare", cfg.to_text()))
    for r in table.aggregate():
        print(f"{r['model']:>5} {r['context']:>5}  F1 {r['mean_f1']:.4f} ± {r['std_f1']:.4f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _experiment(args)
    table = run_noise_sweep(cfg)
    write_results(table, _out_dir(args), _manifest("sweep-noise", cfg.to_text()), sweep=True)
    for r in table.aggregate():
        p = "base" if r["p"] is None else f"{r['p']:.2f}"
        print(f"{r['model']:>5} {p:>5}  F1 {r['mean_f1']:.4f} ± {r['std_f1']:.4f}")
    return 0


def cmd_mutualinfo(args) -> int:
    data = ingest_dataset(_dataset_path(args.data))
    h_c, h_cs, mi = mutual_information(data.cls, data.step)
    print(f"H(C) = {h_c:.4f} bit")
    print(f"H(C|S) = {h_cs:.4f} bit")
    print(f"I(C,S) = {mi:.4f} bit")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed (overrides the config)")
    common.add_argument("--config", default=None, help="config file")
    common.add_argument("--out", default=None, help="output directory")

    parser = argparse.ArgumentParser(prog="ctxhar", description="Attribute-based activity recognition with process context.")
    parser.add_argument("--version", action="version", version=f"ctxhar {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset (scenario config)")
    p.add_argument("--raw", action="store_true", help="also write raw windows")
    p.add_argument("--window", type=int, default=None, help="frames per raw window")
    p.add_argument("--channels", type=int, default=None, help="channels per raw window")
    p.set_defaults(func=cmd_simulate, need_out=True)

    p = sub.add_parser("train-attrnet", parents=[common], help="train the attribute network on raw windows")
    p.add_argument("--data", required=True, help="dataset CSV (or its directory) with windows.npz alongside")
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(func=cmd_train_attrnet, need_out=True)

    p = sub.add_parser("export-posteriors", parents=[common], help="run a trained network over raw windows")
    p.add_argument("--model", required=True, help="network checkpoint")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_export_posteriors, need_out=True)

    p = sub.add_parser("fit", parents=[common], help="fit one classifier head")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=HEAD_KINDS, required=True)
    p.add_argument("--context", action="store_true", help="use the process-step column")
    p.add_argument("--trees", type=int, default=500)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--gmap", default=None, help="attribute-to-class map file (gdap/nn)")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_fit, need_out=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate a fitted head on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval, need_out=False)

    p = sub.add_parser("compare", parents=[common], help="compare heads with and without context")
    p.set_defaults(func=cmd_compare, need_out=True)

    p = sub.add_parser("sweep-noise", parents=[common], help="corrupt the step sequence at increasing rates")
    p.set_defaults(func=cmd_sweep, need_out=True)

    p = sub.add_parser("mutualinfo", parents=[common], help="H(C), H(C|S) and I(C,S) of a dataset")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_mutualinfo, need_out=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.need_out and not args.out:
        parser.error(f"{args.command} needs --out")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"ctxhar {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
