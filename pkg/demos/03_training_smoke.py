#!/usr/bin/env python3
"""A small end-to-end training run.

Trains the full autoencoder on the translation task for a few hundred
steps (far short of the 20,000 the experiments use) and shows the loss
falling, then saves a checkpoint the next demo can pick up.

Everything is driven by TrainConfig; `diversity` controls how many
distinct shapes the pool holds ('inf' = fresh shapes every batch) and
`max_iterations` is the iterated-training depth M (k ~ Uniform{1..M}
applications of the network per batch, loss on the final output only).

Run:  python3 demos/03_training_smoke.py          (~2 min on one CPU core)
Out:  demos/out/smoke.ckpt, demos/out/smoke_train.csv
"""

import dataclasses
import os
import time

from symlab import (
    MetricRow,
    RunManifest,
    TrainConfig,
    save_checkpoint,
    train,
    write_metrics,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
STEPS = 300


def main():
    cfg = TrainConfig(task="translate", diversity="inf", max_iterations=1,
                      steps=STEPS, seed=42, log_every=25)
    try:  # the torch backend is optional and ~8x faster; numpy works too
        import torch  # noqa: F401
        cfg = dataclasses.replace(cfg, backend="torch")
    except ImportError:
        pass
    print(f"training: task={cfg.task}, D={cfg.diversity}, M={cfg.max_iterations}, "
          f"{cfg.steps} steps, backend={cfg.backend}")

    t0 = time.time()
    params, log = train(cfg, callback=lambda s, l: print(f"  step {s:4d}  loss {l:.5f}"))
    print(f"done in {time.time() - t0:.0f}s; "
          f"loss {log.losses[0]:.5f} -> {log.losses[-1]:.5f}")

    ckpt = os.path.join(OUT, "smoke.ckpt")
    save_checkpoint(params, RunManifest("smoke", cfg.to_dict()), ckpt)
    rows = [MetricRow("smoke", cfg.task, str(cfg.diversity), cfg.max_iterations,
                      cfg.single_pass_steps, cfg.seed, "train", s, "loss", l)
            for s, l in zip(log.steps, log.losses)]
    write_metrics(rows, os.path.join(OUT, "smoke_train.csv"))
    print(f"saved {ckpt}")


if __name__ == "__main__":
    main()
