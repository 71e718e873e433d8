"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 runtime/numeric failure.
Data and summaries go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

from dtwsoh import __version__
from dtwsoh.dtw import FastDtwConfig, validate_path
from dtwsoh.errors import DtwSohError, NumericError, ValidationError
from dtwsoh.ingest import (
    CycleRecord,
    SynthConfig,
    b18_like_config,
    generate_synthetic,
    load_dataset,
    write_dataset,
)
from dtwsoh.nn import evaluate, init_model, load_checkpoint, save_checkpoint, train
from dtwsoh.pipeline import (
    ExperimentConfig,
    SplitSpec,
    split_train_test,
    synced_samples,
)
from dtwsoh.sync import (
    select_reference,
    synchronize_cycle,
    synchronize_dataset,
    write_path_csv,
    write_synced_csv,
)

log = logging.getLogger("dtwsoh")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "radius": 10,
    "min_size": 16,
    "reference": "first",
    "split": 0.7,
    "preset": "tiny",
    "truncate_len": None,
    "epochs": None,
    "lr": None,
    "batch_size": None,
    "emit_paths": False,
    "no_timestamp": False,
    "no_plots": False,
    "plots": False,
    "cycles": 132,
    "fade": None,
    "regen_prob": None,
    "base_length": None,
    "b18_like": False,
}


def _read_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".json":
        doc = json.loads(text)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        doc = tomllib.loads(text)
    if not isinstance(doc, dict):
        raise ValidationError(f"config file {path} must hold a key/value table")
    out = {str(k).replace("-", "_"): v for k, v in doc.items()}
    unknown = sorted(set(out) - set(DEFAULTS))
    if unknown:
        raise ValidationError(f"config file {path}: unknown key(s) {', '.join(unknown)}")
    return out


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Built-in defaults < config file < command-line flags."""
    settings = dict(DEFAULTS)
    settings.update(_read_config(getattr(args, "config", None)))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            settings[key] = value
    return settings


def _experiment_config(s: dict[str, Any]) -> ExperimentConfig:
    cfg = ExperimentConfig(split=float(s["split"]), seed=int(s["seed"]), preset=s["preset"],
                           radius=int(s["radius"]), min_size=int(s["min_size"]), reference=s["reference"],
                           truncate_len=s["truncate_len"], epochs=s["epochs"], lr=s["lr"],
                           batch_size=s["batch_size"])
    cfg.check()
    return cfg


def _out(line: str = "") -> None:
    sys.stdout.write(line + "\n")


# --------------------------------------------------------------------------
# subcommands

def cmd_validate(args, s) -> int:
    ds = load_dataset(args.path, min_cycles=1)
    lengths = ds.lengths
    caps = ds.capacities
    _out(f"battery {ds.battery_id}: {len(ds)} cycles, length min {min(lengths)} max {max(lengths)}, "
         f"capacity {caps.min():.4f}..{caps.max():.4f} Ah")
    _out("cycle_id,length,capacity_Ah,voltage_min_V,voltage_max_V")
    for c in ds.cycles:
        _out(f"{c.cycle_id},{len(c)},{c.capacity:.6f},{c.voltage.min():.6f},{c.voltage.max():.6f}")
    if len(ds) < 3:
        raise ValidationError(f"dataset has {len(ds)} cycles, experiments need at least 3")
    return EXIT_OK


def cmd_gen_synth(args, s) -> int:
    base = b18_like_config() if s["b18_like"] else SynthConfig()
    overrides = {"n_cycles": int(s["cycles"])}
    if s["fade"] is not None:
        overrides["fade_rate"] = float(s["fade"])
    if s["regen_prob"] is not None:
        overrides["regen_probability"] = float(s["regen_prob"])
    if s["base_length"] is not None:
        overrides["base_length"] = int(s["base_length"])
    cfg = SynthConfig(**{**asdict(base), **overrides})
    ds = generate_synthetic(cfg, int(s["seed"]))
    path = write_dataset(ds, args.out)
    _out(f"wrote {len(ds)} cycles (lengths {ds.lengths[0]}..{ds.lengths[-1]}) to {path}")
    return EXIT_OK


def cmd_sync(args, s) -> int:
    ds = load_dataset(args.input)
    ref = select_reference(ds, s["reference"])
    dtw_cfg = FastDtwConfig(int(s["radius"]), int(s["min_size"]))
    synced = synchronize_dataset(ds, ref, dtw_cfg)
    out = Path(args.out_dir)
    for sc in synced:
        write_synced_csv([sc], out / "synced" / f"cycle_{sc.cycle_id:04d}.csv")
        if s["emit_paths"]:
            for ch in sc.channels:
                problems = validate_path(ch.path, len(ds.cycle(ref)), len(ds.cycle(sc.cycle_id)))
                if problems:
                    raise NumericError(f"cycle {sc.cycle_id} {ch.channel_tag}: invalid path: {problems[0]}")
                write_path_csv(ch.path, out / "paths" / f"cycle_{sc.cycle_id:04d}_{ch.channel_tag}.csv")
    write_synced_csv(synced, out / "synced_all.csv")
    if s["plots"]:
        from dtwsoh.plotting import plot_synced
        plot_synced(ds, synced, out / "synced_channels.png")
    _out(f"synchronized {len(synced)} cycles against reference cycle {ref} "
         f"(M={synced[0].length}) into {out}")
    return EXIT_OK


def cmd_train(args, s) -> int:
    cfg = _experiment_config(s)
    ds = load_dataset(args.input)
    train_cycles, _ = split_train_test(ds, SplitSpec(cfg.split))
    ref = select_reference(type(ds)(ds.battery_id, train_cycles), cfg.reference)
    synced = synchronize_dataset(ds, ref, cfg.dtw_config(), cycles=train_cycles)
    samples = synced_samples(synced)
    result = train(init_model(cfg.architecture(), cfg.seed), samples, cfg.train_config(),
                   progress=lambda e, r: log.info("epoch %d train RMSE %.5f", e, r))
    ref_cycle = ds.cycle(ref)
    meta = {
        "battery_id": ds.battery_id,
        "reference_id": ref,
        "M": len(ref_cycle),
        "scaled": True,
        "radius": cfg.radius,
        "min_size": cfg.min_size,
        "reference_cycle": {"temperature": ref_cycle.temperature.tolist(),
                            "current": ref_cycle.current.tolist(),
                            "voltage": ref_cycle.voltage.tolist()},
        "train_cycle_ids": [c.cycle_id for c in train_cycles],
        "history": result.history,
        "best_epoch": result.best_epoch,
        "config": asdict(cfg),
        "timestamp": None if s["no_timestamp"] else time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = save_checkpoint(result.model, args.out, meta)
    _out(f"trained on {len(samples)} cycles, best epoch {result.best_epoch} "
         f"train RMSE {min(result.history):.5f} Ah; checkpoint {path}")
    return EXIT_OK


def cmd_predict(args, s) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    rc = meta["reference_cycle"]
    reference = CycleRecord(int(meta["reference_id"]), rc["temperature"], rc["current"], rc["voltage"], 1.0)
    ds = load_dataset(args.input, min_cycles=1)
    dtw_cfg = FastDtwConfig(int(meta.get("radius", s["radius"])), int(meta.get("min_size", s["min_size"])))
    synced = []
    for c in ds.cycles:
        c.validate()
        synced.append(synchronize_cycle(reference, c, dtw_cfg, scaled=bool(meta.get("scaled", True))))
    if synced and synced[0].length != int(meta["M"]):
        raise ValidationError(f"synchronized length {synced[0].length} != checkpoint M {meta['M']}")
    preds = evaluate(model, synced_samples(synced))
    lines = ["cycle_id,truth_Ah,pred_Ah"] + [f"{sc.cycle_id},{sc.capacity:.6f},{p:.6f}" for sc, p in zip(synced, preds)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        _out(f"wrote {len(synced)} predictions to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def format_table(report) -> str:
    pct = report.config.get("split", 0.0)
    return "\n".join([
        f"battery {report.battery_id}: {report.n_train} train / {report.n_test} test cycles "
        f"({pct:.0%} training), reference cycle {report.reference_id} (M={report.reference_length}), "
        f"truncation length {report.truncate_len}",
        f"{'method':<22}{'test RMSE (Ah)':>16}{'train RMSE (Ah)':>17}",
        f"{'DTW-LSTM':<22}{report.rmse_dtw:>16.4f}{report.rmse_dtw_train:>17.4f}",
        f"{'Manual truncation':<22}{report.rmse_manual:>16.4f}{report.rmse_manual_train:>17.4f}",
        f"{'Improvement C':<22}{report.improvement_pct:>15.1f}%",
    ])


def cmd_compare(args, s) -> int:
    from dtwsoh.pipeline import run_experiment

    cfg = _experiment_config(s)
    ds = load_dataset(args.input)
    report, _ = run_experiment(ds, cfg, timestamp=not s["no_timestamp"])
    out = Path(args.out_dir)
    json_path, csv_path = report.write(out)
    _out(format_table(report))
    _out(f"report: {json_path}")
    _out(f"predictions: {csv_path}")
    if not s["no_plots"]:
        from dtwsoh.plotting import render_report
        for p in render_report(report, ds, out / "figures"):
            _out(f"figure: {p}")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file whose keys mirror the flags")
    common.add_argument("--seed", type=int, help="seed for all randomness (default 42)")
    common.add_argument("--radius", type=int, help="FastDTW radius (default 10)")
    common.add_argument("--min-size", dest="min_size", type=int, help="FastDTW exact-solve floor (default 16)")
    common.add_argument("--reference", choices=["first", "longest"], help="reference cycle policy")
    common.add_argument("--no-timestamp", dest="no_timestamp", action="store_true",
                        help="omit timestamps so outputs are byte-identical across runs")
    common.add_argument("-v", "--verbose", action="count", default=0)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--preset", choices=["full", "tiny"], help="model size (default tiny)")
    model.add_argument("--split", type=float, help="chronological training fraction (default 0.7)")
    model.add_argument("--epochs", type=int)
    model.add_argument("--lr", type=float)
    model.add_argument("--batch-size", dest="batch_size", type=int)

    parser = argparse.ArgumentParser(prog="dtwsoh", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a dataset CSV and summarize its cycles")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-synth", parents=[common], help="write a seeded synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--cycles", type=int)
    p.add_argument("--fade", type=float, help="fractional capacity fade per cycle")
    p.add_argument("--regen-prob", dest="regen_prob", type=float)
    p.add_argument("--base-length", dest="base_length", type=int)
    p.add_argument("--b18-like", dest="b18_like", action="store_true",
                   help="132 cycles shrinking from 357 to 178 ticks")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("sync", parents=[common], help="synchronize every cycle onto the reference index axis")
    p.add_argument("input")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--emit-paths", dest="emit_paths", action="store_true", help="also dump per-channel warp paths")
    p.add_argument("--plots", action="store_true", help="render the raw vs synchronized channel figure")
    p.set_defaults(func=cmd_sync)

    p = sub.add_parser("train", parents=[common, model], help="train the DTW-LSTM estimator")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="checkpoint path (.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="estimate capacity for new cycles from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("--out", help="prediction CSV (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", parents=[common, model], help="DTW-LSTM vs truncation baseline experiment")
    p.add_argument("input")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--truncate-len", dest="truncate_len", type=int, help="baseline length (default: shortest cycle)")
    p.add_argument("--no-plots", dest="no_plots", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve(args)
        return args.func(args, settings)
    except (ValidationError, FileNotFoundError) as exc:
        kind = type(exc).__name__
        sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
        return EXIT_INVALID
    except (NumericError, DtwSohError, FloatingPointError, ArithmeticError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
