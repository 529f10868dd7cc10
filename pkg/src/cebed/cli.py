"""``cebed`` command line: generate datasets, train models, run suites, render reports."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from cebed import data
from cebed.bench import SUITES, SUITE_ALIASES, BenchConfig, BenchReport, report_filename, run_suite
from cebed.data import ScenarioFamily
from cebed.estimators import NeuralEstimator
from cebed.models import MODEL_NAMES, canonical_name

OUTPUT_ROOT_ENV = "CEBED_OUTPUT_ROOT"
RUN_CONFIG = "run_config.json"

log = logging.getLogger("cebed")


def parse_range(text: str) -> tuple[float, ...]:
    """``"0:20:5"`` (inclusive), ``"0,10,20"`` or a single value."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise argparse.ArgumentTypeError(f"invalid range {text!r}; expected start:stop:step")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + i * step) for i in range(n))
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid value list {text!r}") from None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "cebed-runs"))


def _write_config(directory: Path, config: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / RUN_CONFIG).write_text(json.dumps(config, indent=1, sort_keys=True) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cebed", description="OFDM channel estimation benchmark toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    g = sub.add_parser("generate", help="generate and split a scenario dataset")
    g.add_argument("--profile", default="umi-like", choices=["umi-like", "uma-like"])
    g.add_argument("--nr", type=int, default=1, choices=[1, 4, 8, 16])
    g.add_argument("--nfp", type=int, default=72, choices=[36, 72])
    g.add_argument("--nsp", type=int, default=2, choices=[1, 2])
    g.add_argument("--snr", type=parse_range, default=parse_range("0:20:5"), help="SNR domains in dB, start:stop:step")
    g.add_argument("--speed", type=parse_range, default=parse_range("0:15:5"), help="speed domains in m/s")
    g.add_argument("--num-samples", type=int, default=15000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)

    t = sub.add_parser("train", help="train one deep baseline on a saved dataset")
    t.add_argument("--model", required=True, type=str, help=f"one of {', '.join(MODEL_NAMES)}")
    t.add_argument("--dataset", type=Path, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--batch-size", type=int, default=512)
    t.add_argument("--max-epochs", type=int, default=100)
    t.add_argument("--lr", type=float, default=1e-3)

    e = sub.add_parser("eval", help="run an evaluation suite")
    e.add_argument("--suite", required=True, choices=list(SUITES) + list(SUITE_ALIASES))
    e.add_argument("--models", default="", help="comma separated methods (LS/LMMSE/ALMMSE always included)")
    e.add_argument("--seeds", type=int, default=5)
    e.add_argument("--out", type=Path, default=None, help="report file (.json) or directory")
    e.add_argument("--dataset", type=Path, default=None, help="evaluate on a saved dataset instead of generating")
    e.add_argument("--num-samples", type=int, default=15000)
    e.add_argument("--master-seed", type=int, default=0)
    e.add_argument("--batch-size", type=int, default=512)
    e.add_argument("--max-epochs", type=int, default=100)
    e.add_argument("--almmse-rank", type=int, default=None)
    e.add_argument("--profiles", default=None, help="restrict to these profiles, comma separated")
    e.add_argument("--nr", type=_int_list, default=None, help="restrict to these antenna counts")
    e.add_argument("--jobs", type=int, default=1)

    r = sub.add_parser("report", help="render a saved report")
    r.add_argument("--in", dest="input", type=Path, required=True)
    r.add_argument("--format", choices=["csv", "json", "md"], default="md")
    r.add_argument("--out", type=Path, default=None, help="write here instead of stdout")
    r.add_argument("--snr", default="all", help="SNR rows for markdown ('all', a value, or '*')")
    return parser


def cmd_generate(args) -> int:
    family = ScenarioFamily(args.profile, args.nr, args.nfp, args.nsp, args.snr, args.speed)
    config = {
        "command": "generate",
        "family": family.to_dict(),
        "num_samples": args.num_samples,
        "seed": args.seed,
        "out": str(args.out),
    }
    ds = data.generate(family, args.num_samples, args.seed)
    data.split(ds, args.seed)
    data.save(ds, args.out)
    _write_config(args.out, config)
    print(f"wrote {len(ds)} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    name = canonical_name(args.model)
    ds = data.load(args.dataset)
    if np.all(ds.split < 0):
        data.split(ds, args.seed)
    train, val = ds.get_split("train"), ds.get_split("val")
    est = NeuralEstimator(model=name, batch_size=args.batch_size, max_epochs=args.max_epochs, initial_lr=args.lr, seed=args.seed)
    config = {
        "command": "train",
        "model": name,
        "dataset": str(args.dataset),
        "dataset_fingerprint": ds.fingerprint(),
        "seed": args.seed,
        "out": str(args.out),
        "estimator": est.get_params(),
    }
    est.fit(train.observations(), train.h_true, eval_set=(val.observations(), val.h_true))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "model.ckpt").write_bytes(est.checkpoint())
    (args.out / "history.csv").write_text(est.history_.to_csv(include_time=False))
    _write_config(args.out, config)
    best = est.history_.best_val_loss
    print(f"{name}: best validation MSE {best:.5g} at epoch {est.history_.best_epoch}")
    return 0


def cmd_eval(args) -> int:
    methods = [m.strip() for m in args.models.split(",") if m.strip()]
    config = BenchConfig(
        n_samples=args.num_samples,
        master_seed=args.master_seed,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        almmse_rank=args.almmse_rank,
        profiles=tuple(p.strip() for p in args.profiles.split(",")) if args.profiles else None,
        n_r=args.nr,
        jobs=args.jobs,
    )
    datasets = None
    if args.dataset is not None:
        ds = data.load(args.dataset)
        datasets = {ds.family.label(): ds}
    report = run_suite(args.suite, methods, args.seeds, config, datasets)
    if args.out is not None and args.out.suffix == ".json":
        out = args.out
    else:
        out = (args.out or _output_root()) / report_filename(report.suite, "json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    out.with_suffix(".csv").write_text(report.to_csv())
    run_config = {
        "command": "eval",
        "suite": report.suite,
        "methods": report.metadata["methods"],
        "seeds": args.seeds,
        "dataset": str(args.dataset) if args.dataset else None,
        "bench": config.to_dict(),
        "out": str(out),
    }
    out.with_name(out.stem + ".config.json").write_text(json.dumps(run_config, indent=1, sort_keys=True) + "\n")
    if report.failures:
        print(f"warning: {len(report.failures)} failed records, see {out}", file=sys.stderr)
    print(report.to_markdown())
    print(f"report written to {out}")
    return 0


def cmd_report(args) -> int:
    report = BenchReport.from_json(args.input.read_text())
    if args.format == "json":
        text = report.to_json()
    elif args.format == "csv":
        text = report.to_csv()
    else:
        text = report.to_markdown(args.snr)
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "report": cmd_report}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"cebed: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
