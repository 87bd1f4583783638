"""Command-line harness.

Subcommands: gen, train, grid, eval, render, gradcheck.  Exit codes:
0 success, 1 usage error, 2 numerical failure, 3 I/O error.  The output
directory defaults to ./runs and can be overridden by --out or the
SYMLAB_OUT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .engine import ConfigurationError
from .evaluation import EvalConfig, evaluate, rollout
from .io import (
    CheckpointError,
    MetricRow,
    RunManifest,
    load_checkpoint,
    load_corpus,
    output_dir,
    read_metrics,
    save_checkpoint,
    save_corpus,
    write_metrics,
)
from .oracle import target_image
from .render import metric_grid, render_montage, write_grid_csv, write_grid_heatmap
from .shapes import (
    ROTATION_TRAIN,
    TRANSLATION_TRAIN,
    GenerationError,
    make_iid_testset,
    make_ood_translation_testset,
    rasterize,
    sample_shape,
)
from .training import NumericalError, TrainConfig, train, train_grid

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the harness contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _dist_for(task: str):
    if task == "translate":
        return TRANSLATION_TRAIN
    if task == "rotate":
        return ROTATION_TRAIN
    raise UsageError(f"unknown task {task!r}")


def _parse_diversity(text: str):
    return "inf" if text == "inf" else int(text)


def _parse_int_list(text: str, what: str) -> list[int]:
    """Comma list and/or a..b ranges, e.g. '1..9' or '1,5,9'."""
    out: list[int] = []
    for part in text.split(","):
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty {what} list: {text!r}")
    return out


def _load_train_config(args) -> TrainConfig:
    doc = {}
    if args.config:
        with open(args.config) as f:
            doc = json.load(f)
    if args.task is not None:
        doc["task"] = args.task
    if "task" not in doc:
        raise UsageError("task must come from --config or --task")
    for flag, key in (
        ("diversity", "diversity"), ("max_iter", "max_iterations"),
        ("steps", "steps"), ("seed", "seed"),
        ("single_pass_steps", "single_pass_steps"), ("backend", "backend"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            doc[key] = val
    try:
        return TrainConfig.from_dict(doc)
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from e


def _save_run(params, cfg: TrainConfig, log, out: str, run_id: str) -> None:
    ckpt = os.path.join(out, "checkpoints", f"{run_id}.ckpt")
    metrics = os.path.join(out, "metrics", f"{run_id}.csv")
    manifest = RunManifest(
        run_id=run_id, config=cfg.to_dict(),
        created=time.strftime("%Y-%m-%dT%H:%M:%S"),
        checkpoint_path=ckpt, metrics_path=metrics,
    )
    save_checkpoint(params, manifest, ckpt)
    rows = [
        MetricRow(run_id, cfg.task, str(cfg.diversity), cfg.max_iterations,
                  cfg.single_pass_steps, cfg.seed, "train", s, "loss", l)
        for s, l in zip(log.steps, log.losses)
    ]
    write_metrics(rows, metrics)
    print(f"saved {ckpt}")


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    dist = _dist_for(args.task)
    specs = [sample_shape(rng, dist) for _ in range(args.count)]
    save_corpus(specs, dist, args.out)
    print(f"wrote {args.count} shapes to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_train_config(args)
    out = output_dir(args.out)
    run_id = args.run_id or (
        f"{cfg.task}_d{cfg.diversity}_m{cfg.max_iterations}_s{cfg.seed}"
    )

    def progress(step, loss):
        print(f"step {step} loss {loss:.6f}", flush=True)

    params, log = train(cfg, callback=progress if args.verbose else None)
    _save_run(params, cfg, log, out, run_id)
    return EXIT_OK


def cmd_grid(args) -> int:
    base = _load_train_config(args)
    divs = [_parse_diversity(d) for d in args.diversities.split(",") if d]
    iters = _parse_int_list(args.iters, "iterations")
    out = output_dir(args.out)
    runs = train_grid(base, divs, iters, seeds=args.seeds, jobs=args.jobs)
    failed = 0
    for run in runs:
        c = run.config
        run_id = f"{c.task}_d{c.diversity}_m{c.max_iterations}_s{c.seed}"
        if run.error is not None:
            failed += 1
            print(f"FAILED {run_id}: {run.error}", file=sys.stderr)
            continue
        _save_run(run.params, c, run.log, out, run_id)
    print(f"grid: {len(runs) - failed}/{len(runs)} runs succeeded")
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_eval(args) -> int:
    params_list, manifests = [], []
    for path in args.checkpoint:
        params, manifest, _ = load_checkpoint(path)
        params_list.append(params)
        manifests.append(manifest)
    cfg0 = manifests[0].config
    task = args.task or cfg0.get("task")
    ecfg = EvalConfig(
        task=task, horizon=args.horizon, height=args.height, width=args.width,
        continuous_errors=args.continuous_errors, backend=args.backend,
        step_multiplier=args.step_multiplier,
    )
    rng = np.random.default_rng(args.seed)
    if args.corpus:
        specs = load_corpus(args.corpus)
    elif args.testset == "ood-translation":
        specs = make_ood_translation_testset(rng, args.count)
    else:
        specs = make_iid_testset(rng, _dist_for(task), args.count)
    report = evaluate(params_list, specs, ecfg)
    rows = []
    run_id = f"{manifests[0].run_id}@{args.testset}"
    for metric in ecfg.metrics:
        means = report.seed_mean(metric)
        for t in range(1, ecfg.horizon + 1):
            rows.append(MetricRow(
                run_id, task, str(cfg0.get("diversity", "")),
                int(cfg0.get("max_iterations", 1)),
                int(cfg0.get("single_pass_steps", 1)),
                int(cfg0.get("seed", 0)), "eval", t, metric, float(means[t - 1]),
            ))
    write_metrics(rows, args.out_csv, no_clobber=args.no_clobber)
    acc = report.seed_mean("accuracy")
    print(f"{run_id}: accuracy t=1 {acc[0]:.4f}, t={ecfg.horizon} {acc[-1]:.4f}; "
          f"wrote {args.out_csv}")
    return EXIT_OK


def cmd_render(args) -> int:
    did_something = False
    if args.checkpoint:
        params_list, manifests = [], []
        for path in args.checkpoint:
            params, manifest, _ = load_checkpoint(path)
            params_list.append(params)
            manifests.append(manifest)
        task = args.task or manifests[0].config.get("task")
        rng = np.random.default_rng(args.seed)
        spec = sample_shape(rng, _dist_for(task))
        times = _parse_int_list(args.times, "times")
        ecfg = EvalConfig(task=task, horizon=max(times),
                          height=args.height, width=args.width)
        kind = ecfg.kind()
        gt = [rasterize(spec, args.height, args.width)]
        gt += [target_image(spec, kind, t, args.height, args.width)
               for t in times]
        sequences = [gt]
        for params in params_list:
            outs = rollout(params, gt[0], max(times), backend=args.backend)
            sequences.append([gt[0]] + [outs[t - 1] for t in times])
        render_montage(sequences, args.out)
        print(f"wrote montage {args.out} "
              f"({len(sequences)} rows x {len(times) + 1} columns)")
        did_something = True
    if args.metrics:
        rows = read_metrics(args.metrics)
        if not args.task:
            raise UsageError("--task is required with --metrics")
        divs, iters, mat = metric_grid(rows, args.task, args.time_step,
                                       args.metric)
        if args.out_csv:
            write_grid_csv(divs, iters, mat, args.out_csv)
            print(f"wrote grid table {args.out_csv}")
        if args.out_image:
            write_grid_heatmap(mat, args.out_image)
            print(f"wrote grid heatmap {args.out_image}")
        did_something = True
    if not did_something:
        raise UsageError("render needs --checkpoint (montage) and/or --metrics (grid)")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_all

    failed = False
    for name, ok, detail in run_all(quick=args.quick):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed |= not ok
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="symlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate and save a shape corpus")
    g.add_argument("--task", required=True, choices=["translate", "rotate"])
    g.add_argument("--count", type=int, default=500)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    def add_config_flags(sp):
        sp.add_argument("--config", help="TrainConfig JSON file")
        sp.add_argument("--task", choices=["translate", "rotate"])
        sp.add_argument("--diversity", type=_parse_diversity)
        sp.add_argument("--max-iter", dest="max_iter", type=int)
        sp.add_argument("--steps", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--single-pass-steps", dest="single_pass_steps", type=int)
        sp.add_argument("--backend", choices=["numpy", "torch"])
        sp.add_argument("--out", help="output directory (default $SYMLAB_OUT or ./runs)")

    t = sub.add_parser("train", help="run one training configuration")
    add_config_flags(t)
    t.add_argument("--run-id")
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(fn=cmd_train)

    gr = sub.add_parser("grid", help="run the diversity x iteration x seed grid")
    add_config_flags(gr)
    gr.add_argument("--diversities", default="100,500,1000,10000,inf")
    gr.add_argument("--iters", default="1..9")
    gr.add_argument("--seeds", type=int, default=3)
    gr.add_argument("--jobs", type=int, default=1)
    gr.set_defaults(fn=cmd_grid)

    e = sub.add_parser("eval", help="evaluate checkpoints by iterated rollout")
    e.add_argument("--checkpoint", action="append", required=True,
                   help="repeatable; several checkpoints aggregate as seeds")
    e.add_argument("--testset", choices=["iid", "ood-translation"], default="iid")
    e.add_argument("--corpus", help="evaluate on a saved corpus instead")
    e.add_argument("--task", choices=["translate", "rotate"])
    e.add_argument("--horizon", type=int, default=50)
    e.add_argument("--count", type=int, default=500)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--height", type=int, default=64)
    e.add_argument("--width", type=int, default=64)
    e.add_argument("--step-multiplier", dest="step_multiplier", type=int, default=1)
    e.add_argument("--continuous-errors", action="store_true")
    e.add_argument("--backend", choices=["numpy", "torch"], default="numpy")
    e.add_argument("--no-clobber", action="store_true")
    e.add_argument("--out-csv", required=True)
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("render", help="montage strips and metric grid tables")
    r.add_argument("--checkpoint", action="append", default=[],
                   help="montage rows below ground truth; repeatable")
    r.add_argument("--task", choices=["translate", "rotate"])
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--times", default="1,10,20,30,40,50",
                   help="rollout steps shown as montage columns")
    r.add_argument("--height", type=int, default=64)
    r.add_argument("--width", type=int, default=64)
    r.add_argument("--backend", choices=["numpy", "torch"], default="numpy")
    r.add_argument("--out", default="montage.pgm")
    r.add_argument("--metrics", help="metrics CSV to pivot into a grid table")
    r.add_argument("--time-step", dest="time_step", type=int, default=50)
    r.add_argument("--metric", default="accuracy")
    r.add_argument("--out-csv")
    r.add_argument("--out-image")
    r.set_defaults(fn=cmd_render)

    gc = sub.add_parser("gradcheck", help="finite-difference verification suite")
    gc.add_argument("--quick", action="store_true")
    gc.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, GenerationError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CheckpointError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, ValueError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
