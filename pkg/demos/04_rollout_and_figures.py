#!/usr/bin/env python3
"""Iterated rollout, metrics, and figure rendering.

Loads the checkpoint from demo 03 (run that first), feeds the network its
own output for 10 steps on fresh test shapes, scores accuracy and MSE
against the exact oracle targets at every step, and renders a montage
strip (ground truth row on top, network rollout below).

Run:  python3 demos/03_training_smoke.py && python3 demos/04_rollout_and_figures.py
Out:  demos/out/rollout.pgm, demos/out/eval.csv
"""

import os

import numpy as np

from symlab import (
    EvalConfig,
    MetricRow,
    TRANSLATION_TRAIN,
    TransformKind,
    evaluate,
    load_checkpoint,
    make_iid_testset,
    rasterize,
    render_montage,
    rollout,
    target_image,
    write_metrics,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
HORIZON = 10


def main():
    ckpt = os.path.join(OUT, "smoke.ckpt")
    if not os.path.exists(ckpt):
        raise SystemExit("run demos/03_training_smoke.py first to produce "
                         f"{ckpt}")
    params, manifest, _ = load_checkpoint(ckpt)
    task = manifest.config["task"]
    print(f"loaded {manifest.run_id!r}: task={task}, "
          f"trained {manifest.config['steps']} steps")

    # quantitative: 50 fresh shapes, every rollout step scored exactly
    rng = np.random.default_rng(7)
    testset = make_iid_testset(rng, TRANSLATION_TRAIN, 50)
    cfg = EvalConfig(task=task, horizon=HORIZON)
    report = evaluate([params], testset, cfg)
    acc = report.seed_mean("accuracy")
    mse = report.seed_mean("mse")
    print(f"\n{'t':>3} {'accuracy':>9} {'mse':>9}")
    for t in range(1, HORIZON + 1):
        print(f"{t:>3} {acc[t - 1]:>9.4f} {mse[t - 1]:>9.5f}")

    rows = [MetricRow("smoke@iid", task, "inf", 1, 1, 42, "eval", t, m, v)
            for m, series in (("accuracy", acc), ("mse", mse))
            for t, v in enumerate(series, start=1)]
    write_metrics(rows, os.path.join(OUT, "eval.csv"))

    # qualitative: ground truth on top, rollout below
    spec = testset[0]
    kind = TransformKind.translate()
    times = list(range(1, HORIZON + 1, 2))
    start = rasterize(spec, 64, 64)
    gt_row = [start] + [target_image(spec, kind, t, 64, 64) for t in times]
    outs = rollout(params, start, HORIZON)
    net_row = [start] + [outs[t - 1] for t in times]
    path = os.path.join(OUT, "rollout.pgm")
    render_montage([gt_row, net_row], path)
    print(f"\nwrote {path} (top: ground truth, bottom: network, "
          f"columns t=0,{times})")


if __name__ == "__main__":
    main()
