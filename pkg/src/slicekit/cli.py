"""Command-line front end.

Subcommands::

    gen-data   write a procedural dataset to disk
    train      train from an INI config, save checkpoint + history
    eval       score a checkpoint at one slice rate
    sweep      score a checkpoint across rates, with cost columns
    cost       parameter/FLOP report for a model at a rate
    simulate   run the latency-budget batching policy over a trace
    cascade    evaluate a prediction cascade from a checkpoint
    widen      incremental widening report from a checkpoint

Exit codes: 0 success; 2 bad configuration or usage; 3 unreadable or
malformed data; 4 numeric failure during training.  ``SLICEKIT_OUT_DIR``
supplies the default output directory when ``--out`` is not given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets as ds
from .cascade import cascade_evaluate, stages_from_model
from .checkpoint import load_checkpoint, restore_model, save_checkpoint
from .config import ExperimentConfig
from .costing import cost_report, count_flops, count_params
from .errors import (BudgetError, ConfigError, DataError, ShapeError,
                     TrainingError, UsageError)
from .layers import GroupSpec
from .models import MODEL_KINDS, build_model, char_lstm
from .schemas import validate
from .serving import LatencyPolicy, QueryStream, bundled_trace, simulate_workload
from .training import Trainer, evaluate
from .widening import run_base, widen_model

__all__ = ["main"]


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get("SLICEKIT_OUT_DIR") or ".")


def _parse_rates(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse rate list {text!r}") from None


def _write_json(path: Path, obj: dict, schema: str) -> None:
    validate(obj, schema)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


# ------------------------------------------------------------------ datasets

def _load_for_spec(spec: dict, data_path: str, seq_len: int = 32):
    """Load a data file appropriate for a model spec; returns (x, y)."""
    kind = spec["kind"]
    if kind == "spirals_mlp":
        return ds.load_spirals_csv(data_path)
    if kind == "tinyimages_cnn":
        return ds.load_tinyimages_csv(data_path)
    if kind == "char_lstm":
        text = _read_text(data_path)
        codes, vocab = ds.encode_text(text)
        if len(vocab) != spec["vocab"]:
            raise DataError(
                f"text has {len(vocab)} distinct characters, model expects {spec['vocab']}"
            )
        return ds.chunk_codes(codes, seq_len)
    raise ConfigError(f"no evaluation data loader for model kind {kind!r}")


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e


def _boundary_note(spec: dict, r: float) -> str | None:
    """Note when a requested rate lands between group boundaries."""
    width = spec.get("width") or spec.get("hidden")
    groups = spec.get("groups")
    if not width or not groups:
        return None
    g = GroupSpec(int(width), int(groups)).boundary(r)
    r_eff = g / width
    if abs(r_eff - r) <= 1e-12:
        return None
    return f"rate {r} is off-boundary; runs width {g} (rate {r_eff})"


# ---------------------------------------------------------------- subcommands

def cmd_gen_data(args) -> int:
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset == "spirals":
        x, y = ds.make_spirals(args.n_per_class, args.noise, seed=args.seed)
        path = out / "spirals.csv"
        ds.save_xy_csv(path, x, y, ds.spirals_feature_names())
    elif args.dataset == "tinyimages":
        x, y = ds.make_tinyimages(args.n_per_class, args.noise, seed=args.seed)
        path = out / "tinyimages.csv"
        ds.save_xy_csv(path, x, y, ds.tinyimages_feature_names())
    elif args.dataset == "chartext":
        text = ds.make_chartext(args.length, args.period, args.alphabet, seed=args.seed)
        path = out / "chartext.txt"
        path.write_text(text)
    else:  # pragma: no cover - argparse choices guard this
        raise ConfigError(f"unknown dataset {args.dataset!r}")
    print(path)
    return 0


def _build_from_config(cfg: ExperimentConfig, data_path: str):
    """Returns (model, x_train, y_train, x_test, y_test)."""
    if cfg.dataset == "spirals":
        x, y = ds.load_spirals_csv(data_path)
        model = build_model({"kind": "spirals_mlp", "width": cfg.width,
                             "groups": cfg.groups, "depth": cfg.depth,
                             "seed": cfg.seed})
    elif cfg.dataset == "tinyimages":
        x, y = ds.load_tinyimages_csv(data_path)
        model = build_model({"kind": "tinyimages_cnn", "width": cfg.width,
                             "groups": cfg.groups, "seed": cfg.seed})
    else:  # chartext
        text = _read_text(data_path)
        codes, vocab = ds.encode_text(text)
        x, y = ds.chunk_codes(codes, cfg.seq_len)
        model = char_lstm(vocab=len(vocab), hidden=cfg.width, groups=cfg.groups,
                          depth=cfg.depth, dropout=cfg.dropout, seed=cfg.seed)
    x_tr, y_tr, x_te, y_te = ds.train_test_split(x, y, cfg.test_fraction, cfg.seed)
    return model, x_tr, y_tr, x_te, y_te


def cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    model, x_tr, y_tr, x_te, y_te = _build_from_config(cfg, args.data)
    trainer = Trainer(model, x_tr, y_tr, cfg.train_config(), x_te, y_te)
    if args.resume:
        load_checkpoint(args.resume, model=model, trainer=trainer)
        print(f"resumed from {args.resume} at epoch {trainer.epoch}")
    trainer.run()
    out = _out_dir(args.out) / cfg.name
    save_checkpoint(out / "checkpoint", model, trainer,
                    extra={"config": cfg.to_ini(), "dataset": cfg.dataset})
    (out / "config.ini").write_text(cfg.to_ini())
    hist = ["epoch,rate,loss,metric,metric_name,wall_time_s"]
    hist += [
        f"{h['epoch']},{h['rate']},{h['loss']!r},{h['metric']!r},{h['metric_name']},{h['wall_time_s']!r}"
        for h in trainer.history
    ]
    (out / "history.csv").write_text("\n".join(hist) + "\n")
    for h in trainer.history[-len(cfg.rates):]:
        print(f"rate {h['rate']:.2f}: loss {h['loss']:.4f} {h['metric_name']} {h['metric']:.4f}")
    print(out / "checkpoint")
    return 0


def cmd_eval(args) -> int:
    model = restore_model(args.checkpoint)
    x, y = _load_for_spec(model.spec(), args.data, args.seq_len)
    note = _boundary_note(model.spec(), args.rate)
    m = evaluate(model, x, y, args.rate)
    line = f"rate {args.rate}: loss {m.loss:.6f} {m.metric_name} {m.metric:.6f}"
    if note:
        line += f"  ({note})"
    print(line)
    return 0


def cmd_sweep(args) -> int:
    model = restore_model(args.checkpoint)
    spec = model.spec()
    x, y = _load_for_spec(spec, args.data, args.seq_len)
    rates = _parse_rates(args.rates)
    seq_len = args.seq_len if spec["kind"] == "char_lstm" else None
    full_p = count_params(model, 1.0)
    full_f = count_flops(model, 1.0, seq_len)
    rows = []
    for r in rates:
        m = evaluate(model, x, y, r)
        p = count_params(model, r)
        f = count_flops(model, r, seq_len)
        rows.append({
            "rate": r, "params": p, "flops": f,
            "params_ratio": p / full_p, "flops_ratio": f / full_f,
            "loss": m.loss, "metric": m.metric, "metric_name": m.metric_name,
            "note": _boundary_note(spec, r),
        })
    report = {"dataset": spec["kind"], "checkpoint": str(args.checkpoint),
              "rates": list(rates), "rows": rows}
    out = _out_dir(args.out)
    _write_json(out / "sweep.json", report, "sweep")
    lines = ["rate,params,flops,params_ratio,flops_ratio,loss,metric,metric_name,note"]
    for row in rows:
        lines.append(
            f"{row['rate']},{row['params']},{row['flops']},{row['params_ratio']!r},"
            f"{row['flops_ratio']!r},{row['loss']!r},{row['metric']!r},"
            f"{row['metric_name']},{row['note'] or ''}"
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    for row in rows:
        print(f"rate {row['rate']:.2f}: {row['metric_name']} {row['metric']:.4f} "
              f"flops x{row['flops_ratio']:.4f}" + (f"  ({row['note']})" if row["note"] else ""))
    print(out / "sweep.json")
    return 0


_COST_DEFAULTS = {
    "spirals_mlp": {"width": 64, "groups": 4, "depth": 2},
    "tinyimages_cnn": {"width": 16, "groups": 4},
    "char_lstm": {"vocab": 10, "hidden": 64, "groups": 4, "depth": 2},
    "vgg13": {"groups": 16},
}


def cmd_cost(args) -> int:
    if args.model not in MODEL_KINDS:
        raise ConfigError(f"unknown model {args.model!r}; choices: {MODEL_KINDS}")
    spec = dict(_COST_DEFAULTS[args.model], kind=args.model)
    if args.width is not None:
        spec["hidden" if args.model == "char_lstm" else "width"] = args.width
    if args.groups is not None:
        spec["groups"] = args.groups
    if args.model == "vgg13":
        spec.pop("width", None)
        spec["init"] = "zeros"
    model = build_model(spec)
    seq_len = args.seq_len if args.model == "char_lstm" else None
    rep = cost_report(model, args.rate, seq_len)
    obj = rep.to_dict()
    print(rep.to_csv(), end="")
    print(f"full: {rep.full_params} params, {rep.full_flops} flops; "
          f"rate {args.rate}: ratio {rep.flops_ratio:.6f}")
    if args.json:
        _write_json(Path(args.json), obj, "cost_report")
        print(args.json)
    return 0


def cmd_simulate(args) -> int:
    policy = LatencyPolicy(args.budget, args.unit_time, _parse_rates(args.rates))
    stream = bundled_trace() if args.trace is None else QueryStream.from_trace(args.trace)
    sim = simulate_workload(stream, policy)
    out = _out_dir(args.out)
    _write_json(out / "simulate.json", sim.summary(), "simulate_summary")
    (out / "simulate_batches.csv").write_text(sim.to_csv())
    s = sim.summary()
    print(f"{s['total_queries']} queries in {s['batches']} batches; "
          f"max latency {s['max_latency']:.4f} (budget {s['latency_budget']}); "
          f"violations {s['violations']}; rates used {s['rates_used']}")
    print(out / "simulate.json")
    return 0


def cmd_cascade(args) -> int:
    model = restore_model(args.checkpoint)
    spec = model.spec()
    x, y = _load_for_spec(spec, args.data, args.seq_len)
    rates = _parse_rates(args.rates)
    stages = stages_from_model(model, rates)
    metrics = cascade_evaluate(stages, x, y)
    seq_len = args.seq_len if spec["kind"] == "char_lstm" else None
    stage_rows = []
    preds = {r: np.asarray(model.predict(x, r)).reshape(-1) for r in rates}
    for m in metrics:
        stage_rows.append({
            "stage": m.stage, "rate": m.rate, "survivors": m.survivors,
            "precision": m.precision, "aggregate_recall": m.aggregate_recall,
            "accuracy": m.accuracy,
            "params": count_params(model, m.rate),
            "flops": count_flops(model, m.rate, seq_len),
        })
    from .cascade import error_set, inclusion_coefficient
    inclusion = []
    for i, r_small in enumerate(rates):
        for r_large in rates[i + 1:]:
            inclusion.append({
                "small_rate": r_small, "large_rate": r_large,
                "coefficient": inclusion_coefficient(
                    error_set(preds[r_large], y), error_set(preds[r_small], y)),
            })
    report = {"rates": list(rates), "items": int(len(y)),
              "stages": stage_rows, "inclusion": inclusion}
    out = _out_dir(args.out)
    _write_json(out / "cascade.json", report, "cascade_report")
    for row in stage_rows:
        print(f"stage {row['stage']} (rate {row['rate']:.2f}): precision {row['precision']:.4f} "
              f"aggregate recall {row['aggregate_recall']:.4f} survivors {row['survivors']}")
    print(out / "cascade.json")
    return 0


def cmd_widen(args) -> int:
    model = restore_model(args.checkpoint)
    spec = model.spec()
    if spec["kind"] == "char_lstm":
        raise UsageError("incremental widening applies to feed-forward models")
    x, _ = _load_for_spec(spec, args.data, args.seq_len)
    x = x[: args.batch]
    _, cache = run_base(model, x, args.r_a)
    res = widen_model(model, cache, x, args.r_a, args.r_b, mode=args.mode)
    direct = model.forward(x, args.r_b).data
    dev = float(np.max(np.abs(res.output - direct)))
    agree = float((res.output.argmax(1) == direct.argmax(1)).mean())
    report = {
        "mode": res.mode, "r_a": res.r_a, "r_b": res.r_b,
        "flops_base": res.flops_base, "flops_update": res.flops_update,
        "flops_direct": res.flops_direct,
        "update_ratio": res.flops_update / res.flops_direct,
        "max_abs_dev": dev, "agreement": agree,
        "layers": res.layers,
    }
    out = _out_dir(args.out)
    _write_json(out / "widen.json", report, "widen_report")
    print(f"{res.mode} widening {res.r_a} -> {res.r_b}: update {res.flops_update} flops "
          f"vs direct {res.flops_direct} (x{report['update_ratio']:.4f}); "
          f"max dev {dev:.3e}; agreement {agree:.4f}")
    print(out / "widen.json")
    return 0


# -------------------------------------------------------------------- parser

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slicekit",
                                 description="width-sliceable networks toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a procedural dataset")
    g.add_argument("--dataset", required=True, choices=("spirals", "tinyimages", "chartext"))
    g.add_argument("--out", default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-per-class", type=int, default=256)
    g.add_argument("--noise", type=float, default=0.08)
    g.add_argument("--length", type=int, default=8192)
    g.add_argument("--period", type=int, default=8)
    g.add_argument("--alphabet", default="abcdefghij")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train from an INI config")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", default=None)
    t.add_argument("--resume", default=None, help="checkpoint directory to resume from")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint at one rate")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--rate", type=float, required=True)
    e.add_argument("--seq-len", type=int, default=32)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="score a checkpoint across rates")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--rates", default="0.25,0.5,0.75,1.0")
    s.add_argument("--seq-len", type=int, default=32)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("cost", help="parameter/FLOP report")
    c.add_argument("--model", required=True)
    c.add_argument("--rate", type=float, default=1.0)
    c.add_argument("--width", type=int, default=None)
    c.add_argument("--groups", type=int, default=None)
    c.add_argument("--seq-len", type=int, default=32)
    c.add_argument("--json", default=None)
    c.set_defaults(func=cmd_cost)

    m = sub.add_parser("simulate", help="latency-budget batching simulation")
    m.add_argument("--trace", default=None,
                   help="arrival trace file; defaults to the bundled 16x burst")
    m.add_argument("--budget", type=float, default=2.0)
    m.add_argument("--unit-time", type=float, default=0.01)
    m.add_argument("--rates", default="0.25,0.5,0.75,1.0")
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_simulate)

    k = sub.add_parser("cascade", help="prediction cascade over nested subnets")
    k.add_argument("--checkpoint", required=True)
    k.add_argument("--data", required=True)
    k.add_argument("--rates", default="0.25,0.5,0.75,1.0")
    k.add_argument("--seq-len", type=int, default=32)
    k.add_argument("--out", default=None)
    k.set_defaults(func=cmd_cascade)

    w = sub.add_parser("widen", help="incremental widening report")
    w.add_argument("--checkpoint", required=True)
    w.add_argument("--data", required=True)
    w.add_argument("--r-a", type=float, required=True)
    w.add_argument("--r-b", type=float, required=True)
    w.add_argument("--mode", choices=("exact", "approx"), default="exact")
    w.add_argument("--batch", type=int, default=8)
    w.add_argument("--seq-len", type=int, default=32)
    w.add_argument("--out", default=None)
    w.set_defaults(func=cmd_widen)

    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ShapeError, UsageError, BudgetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (TrainingError, FloatingPointError, OverflowError, ZeroDivisionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
