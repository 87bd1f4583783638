#!/usr/bin/env python3
"""Run the desk-scale experiment set end to end.

Trains the six networks the acceptance experiments need (20,000 steps
each, batch 32, 64x64, torch-accelerated backend) and evaluates them,
writing aggregate per-timestep metrics to results/desk/summary.csv.

Restartable: finished checkpoints and eval blocks are skipped.  Expect
several hours of single-core CPU time in total.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

from symlab.evaluation import EvalConfig, evaluate
from symlab.io import (
    MetricRow,
    RunManifest,
    load_checkpoint,
    save_checkpoint,
    write_metrics,
)
from symlab.shapes import (
    ROTATION_TRAIN,
    TRANSLATION_TRAIN,
    make_iid_testset,
    make_ood_translation_testset,
)
from symlab.training import TrainConfig, train

RUNS = {
    "tr_inf_m1": TrainConfig(task="translate", diversity="inf", max_iterations=1, seed=101),
    "tr_100_m1": TrainConfig(task="translate", diversity=100, max_iterations=1, seed=102),
    "rot_inf_m1": TrainConfig(task="rotate", diversity="inf", max_iterations=1, seed=103),
    "rot_5mr_sp": TrainConfig(task="rotate", diversity="inf", max_iterations=1,
                              single_pass_steps=5, seed=104),
    "rot_inf_m5": TrainConfig(task="rotate", diversity="inf", max_iterations=5, seed=105),
    "rot_inf_m9": TrainConfig(task="rotate", diversity="inf", max_iterations=9, seed=106),
}

# (run, testset, eval kwargs); the translation IID grid is widened to 256
# columns so the target at t=50 (x shifted by 100 px) stays in frame
EVALS = [
    ("tr_inf_m1", "iid", dict(task="translate", height=64, width=256)),
    ("tr_inf_m1", "ood", dict(task="translate", height=512, width=512, batch=8)),
    ("tr_100_m1", "ood", dict(task="translate", height=512, width=512, batch=8)),
    ("rot_inf_m1", "iid", dict(task="rotate")),
    ("rot_inf_m9", "iid", dict(task="rotate")),
    ("rot_inf_m5", "iid", dict(task="rotate")),
    ("rot_5mr_sp", "iid", dict(task="rotate", horizon=10, step_multiplier=5)),
]

TESTSET_SEED = 2024
TESTSET_COUNT = 500


def log(msg):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def run_id_of(name, testset):
    return f"{name}@{testset}"


def train_one(name, cfg, out, steps):
    import dataclasses

    cfg = dataclasses.replace(cfg, steps=steps, backend="torch", log_every=100)
    ckpt = os.path.join(out, "checkpoints", f"{name}.ckpt")
    if os.path.exists(ckpt):
        log(f"{name}: checkpoint exists, skipping training")
        params, _, _ = load_checkpoint(ckpt)
        return params, cfg
    log(f"{name}: training {cfg.steps} steps (task={cfg.task}, D={cfg.diversity}, "
        f"M={cfg.max_iterations}, sps={cfg.single_pass_steps})")
    t0 = time.time()
    last = [t0]

    def progress(step, loss):
        if time.time() - last[0] > 300:
            last[0] = time.time()
            log(f"  {name}: step {step} loss {loss:.5f}")

    params, tlog = train(cfg, callback=progress)
    log(f"{name}: trained in {(time.time() - t0) / 60:.1f} min, "
        f"final loss {tlog.losses[-1]:.5f}")
    manifest = RunManifest(run_id=name, config=cfg.to_dict(),
                           created=time.strftime("%Y-%m-%dT%H:%M:%S"),
                           checkpoint_path=ckpt)
    save_checkpoint(params, manifest, ckpt)
    rows = [
        MetricRow(name, cfg.task, str(cfg.diversity), cfg.max_iterations,
                  cfg.single_pass_steps, cfg.seed, "train", s, "loss", l)
        for s, l in zip(tlog.steps, tlog.losses)
    ]
    write_metrics(rows, os.path.join(out, "metrics", f"{name}_train.csv"))
    return params, cfg


def testset_for(kind, task):
    rng = np.random.default_rng(TESTSET_SEED)
    if kind == "ood":
        return make_ood_translation_testset(rng, TESTSET_COUNT)
    dist = TRANSLATION_TRAIN if task == "translate" else ROTATION_TRAIN
    return make_iid_testset(rng, dist, TESTSET_COUNT)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(ROOT, "results", "desk"))
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--count", type=int, default=500)
    args = ap.parse_args()
    global TESTSET_COUNT
    TESTSET_COUNT = args.count
    out = args.out
    os.makedirs(os.path.join(out, "metrics"), exist_ok=True)

    summary_rows = []
    summary_path = os.path.join(out, "summary.csv")
    done_evals = set()
    # resume: keep already-written eval blocks
    if os.path.exists(summary_path):
        from symlab.io import read_metrics

        for r in read_metrics(summary_path):
            summary_rows.append(MetricRow(**r))
            done_evals.add(r["run_id"])

    order = ["tr_inf_m1", "tr_100_m1", "rot_inf_m1", "rot_5mr_sp",
             "rot_inf_m5", "rot_inf_m9"]
    trained = {}
    for name in order:
        trained[name], RUNS[name] = train_one(name, RUNS[name], out, args.steps)
        for run, tset, kw in EVALS:
            if run != name or run_id_of(run, tset) in done_evals:
                continue
            cfg = RUNS[run]
            ecfg = EvalConfig(backend="torch", **kw)
            specs = testset_for(tset, cfg.task)
            log(f"{run}: eval on {tset} ({len(specs)} shapes, "
                f"{ecfg.height}x{ecfg.width}, T={ecfg.horizon})")
            t0 = time.time()
            rep = evaluate([trained[run]], specs, ecfg)
            log(f"{run}@{tset}: eval done in {(time.time() - t0) / 60:.1f} min; "
                f"acc t1={rep.seed_mean('accuracy')[0]:.3f} "
                f"t{ecfg.horizon}={rep.seed_mean('accuracy')[-1]:.3f} "
                f"mse t{ecfg.horizon}={rep.seed_mean('mse')[-1]:.5f}")
            for metric in ecfg.metrics:
                means = rep.seed_mean(metric)
                for t in range(1, ecfg.horizon + 1):
                    summary_rows.append(MetricRow(
                        run_id_of(run, tset), cfg.task, str(cfg.diversity),
                        cfg.max_iterations, cfg.single_pass_steps, cfg.seed,
                        "eval", t, metric, float(means[t - 1])))
            write_metrics(summary_rows, summary_path)
            done_evals.add(run_id_of(run, tset))
    log("desk experiment set complete")


if __name__ == "__main__":
    sys.exit(main())
