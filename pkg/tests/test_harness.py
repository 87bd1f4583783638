"""Persistence (checkpoints, CSV, corpora, PGM), rendering, and the CLI."""

import json
import os

import numpy as np
import pytest

from symlab.cli import main
from symlab.io import (
    CheckpointError,
    METRICS_COLUMNS,
    MetricRow,
    RunManifest,
    load_checkpoint,
    load_corpus,
    output_dir,
    read_metrics,
    read_pgm,
    save_checkpoint,
    save_corpus,
    write_metrics,
    write_pgm,
)
from symlab.model import init_params
from symlab.render import metric_grid, render_montage, write_grid_csv
from symlab.shapes import TRANSLATION_TRAIN, sample_shape
from symlab.training import AdamState, TrainConfig


def fresh_params(seed=0):
    return init_params(np.random.default_rng(seed))


def manifest_for(cfg):
    return RunManifest(run_id="r1", config=cfg.to_dict(), created="2020-01-01")


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path):
        params = fresh_params()
        cfg = TrainConfig(task="rotate", diversity=500, max_iterations=4)
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(params, manifest_for(cfg), path)
        loaded, manifest, extras = load_checkpoint(path)
        assert set(loaded.weights) == set(params.weights)
        for n in params.weights:
            np.testing.assert_array_equal(loaded.weights[n], params.weights[n])
            np.testing.assert_array_equal(loaded.biases[n], params.biases[n])
        assert TrainConfig.from_dict(manifest.config) == cfg
        assert extras == {}

    def test_adam_state_round_trip(self, tmp_path):
        params = fresh_params()
        state = AdamState.init_like(params)
        state.m["e1"][0][:] = 0.25
        state.t = 7
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(params, manifest_for(TrainConfig(task="rotate")), path,
                        adam_state=state)
        _, _, extras = load_checkpoint(path)
        np.testing.assert_array_equal(extras["adam_mw:e1"], state.m["e1"][0])
        assert len(extras) == 4 * len(params.weights)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(CheckpointError, match="bad magic"):
            load_checkpoint(str(path))

    def test_truncation_names_offset(self, tmp_path):
        params = fresh_params()
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(params, manifest_for(TrainConfig(task="rotate")), path)
        blob = open(path, "rb").read()
        for cut in (2, 11, 40, len(blob) // 2, len(blob) - 3):
            trunc = str(tmp_path / f"t{cut}.ckpt")
            with open(trunc, "wb") as f:
                f.write(blob[:cut])
            with pytest.raises(CheckpointError, match="offset"):
                load_checkpoint(trunc)

    def test_no_partial_file_on_save(self, tmp_path):
        # saves go through a temp file and an atomic rename
        path = str(tmp_path / "a.ckpt")
        save_checkpoint(fresh_params(), manifest_for(TrainConfig(task="rotate")), path)
        assert os.listdir(tmp_path) == ["a.ckpt"]


def sample_rows():
    return [
        MetricRow("r1", "rotate", "inf", 1, 1, 0, "eval", t, m, 0.5 + t)
        for t in (1, 2, 3) for m in ("accuracy", "mse") for _ in ("s1", "s2")
    ]


class TestMetricsCsv:
    def test_schema_golden(self, tmp_path):
        path = str(tmp_path / "m.csv")
        write_metrics([], path)
        blob = open(path, "rb").read()
        assert blob == (b"run_id,task,diversity,max_iter,single_pass_steps,"
                        b"seed,phase,step_or_time,metric,value\r\n")

    def test_eval_cardinality(self, tmp_path):
        # 2 shapes x 3 timesteps x 2 metrics -> 12 rows
        rows = sample_rows()
        assert len(rows) == 12
        path = str(tmp_path / "m.csv")
        write_metrics(rows, path)
        back = read_metrics(path)
        assert len(back) == 12
        assert back[0]["value"] == 1.5
        assert tuple(back[0]) == METRICS_COLUMNS

    def test_float_round_trip_exact(self, tmp_path):
        val = 0.1234567890123456789
        path = str(tmp_path / "m.csv")
        write_metrics([MetricRow("r", "rotate", "inf", 1, 1, 0, "train", 0,
                                 "loss", val)], path)
        assert read_metrics(path)[0]["value"] == val

    def test_no_clobber_keeps_existing(self, tmp_path):
        path = str(tmp_path / "m.csv")
        write_metrics(sample_rows(), path)
        write_metrics([], path, no_clobber=True)
        assert len(read_metrics(path)) == 12

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(IOError, match="columns"):
            read_metrics(str(path))


class TestCorpus:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        specs = [sample_shape(rng, TRANSLATION_TRAIN) for _ in range(6)]
        path = str(tmp_path / "c.json")
        save_corpus(specs, TRANSLATION_TRAIN, path)
        back = load_corpus(path)
        assert len(back) == 6
        for a, b in zip(specs, back):
            np.testing.assert_array_equal(a.angles, b.angles)
            np.testing.assert_array_equal(a.radii, b.radii)
            assert a.centroid == b.centroid
            assert a.scale == b.scale

    def test_unknown_schema_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"schema_version": 99, "shapes": []}))
        with pytest.raises(IOError, match="schema"):
            load_corpus(str(path))


class TestPgm:
    def test_round_trip(self, tmp_path):
        img = np.arange(256, dtype=np.float32).reshape(16, 16) / 255.0
        path = str(tmp_path / "i.pgm")
        write_pgm(img, path)
        np.testing.assert_allclose(read_pgm(path), img, atol=1e-7)
        header = open(path, "rb").read(15)
        assert header.startswith(b"P5\n16 16\n255\n")


class TestMontage:
    def test_layout_arithmetic(self):
        frames = [[np.zeros((64, 64))] * 3]
        out = render_montage(frames)
        assert out.shape == (64, 3 * 64 + 2)

    def test_separators_and_passthrough(self):
        a = np.full((4, 4), 0.25)
        b = np.full((4, 4), 0.75)
        out = render_montage([[a, b], [b, a]])
        assert out.shape == (9, 9)
        np.testing.assert_array_equal(out[:4, :4], a)
        np.testing.assert_array_equal(out[5:, 5:], a)
        np.testing.assert_array_equal(out[4, :], 0.5)   # row separator
        np.testing.assert_array_equal(out[:, 4], 0.5)   # column separator

    def test_all_zero_frames_render_black(self):
        out = render_montage([[np.zeros((4, 4))]], separator_value=0.0)
        np.testing.assert_array_equal(out, 0.0)

    def test_values_clamped(self):
        out = render_montage([[np.full((4, 4), 2.0)]])
        assert out.max() == 1.0

    def test_ragged_input_rejected(self):
        with pytest.raises(ValueError):
            render_montage([[np.zeros((4, 4))], [np.zeros((4, 4))] * 2])
        with pytest.raises(ValueError):
            render_montage([[np.zeros((4, 4)), np.zeros((4, 5))]])


class TestMetricGrid:
    def rows(self):
        mk = lambda d, m, v, s=0: dict(
            run_id="x", task="rotate", diversity=d, max_iter=m,
            single_pass_steps=1, seed=s, phase="eval", step_or_time=50,
            metric="accuracy", value=v)
        return [mk("100", 1, 0.2), mk("inf", 1, 0.6), mk("inf", 9, 0.8),
                mk("inf", 9, 0.9, s=1),
                dict(mk("inf", 1, 0.0), phase="train"),
                dict(mk("inf", 1, 0.0), step_or_time=1)]

    def test_pivot_sorting_and_seed_average(self):
        divs, iters, mat = metric_grid(self.rows(), "rotate", 50)
        assert divs == ["100", "inf"]        # inf sorts last
        assert iters == [1, 9]
        assert mat[0, 0] == pytest.approx(0.2)
        assert np.isnan(mat[0, 1])           # no data for (100, 9)
        assert mat[1, 1] == pytest.approx(0.85)  # two seeds averaged

    def test_no_rows_raises(self):
        with pytest.raises(ValueError, match="no eval rows"):
            metric_grid(self.rows(), "translate", 50)

    def test_grid_csv(self, tmp_path):
        divs, iters, mat = metric_grid(self.rows(), "rotate", 50)
        path = str(tmp_path / "g.csv")
        write_grid_csv(divs, iters, mat, path)
        lines = open(path).read().splitlines()
        assert lines[0] == "diversity,it_1,it_9"
        assert lines[1].startswith("100,0.2,")


class TestOutputDir:
    def test_precedence(self, monkeypatch):
        monkeypatch.delenv("SYMLAB_OUT", raising=False)
        assert output_dir() == "runs"
        monkeypatch.setenv("SYMLAB_OUT", "/tmp/env")
        assert output_dir() == "/tmp/env"
        assert output_dir("/tmp/explicit") == "/tmp/explicit"


class TestCli:
    def test_gen_creates_corpus(self, tmp_path):
        out = str(tmp_path / "c.json")
        assert main(["gen", "--task", "rotate", "--count", "4",
                     "--seed", "1", "--out", out]) == 0
        assert len(load_corpus(out)) == 4

    def test_train_eval_render_pipeline(self, tmp_path):
        cfg = str(tmp_path / "cfg.json")
        with open(cfg, "w") as f:
            json.dump({"task": "translate", "steps": 2, "height": 20,
                       "width": 20, "diversity": 2, "seed": 3}, f)
        out = str(tmp_path / "runs")
        assert main(["train", "--config", cfg, "--out", out,
                     "--run-id", "t1"]) == 0
        ckpt = os.path.join(out, "checkpoints", "t1.ckpt")
        assert os.path.exists(ckpt)
        train_csv = os.path.join(out, "metrics", "t1.csv")
        assert {r["metric"] for r in read_metrics(train_csv)} == {"loss"}

        # eval/render need the default 64x64 grid: the training shape
        # distribution places centroids outside a 20x20 frame
        csv_path = str(tmp_path / "eval.csv")
        assert main(["eval", "--checkpoint", ckpt, "--horizon", "2",
                     "--count", "2", "--out-csv", csv_path]) == 0
        rows = read_metrics(csv_path)
        assert len(rows) == 4                       # 2 metrics x horizon 2
        assert rows[0]["run_id"] == "t1@iid"

        montage = str(tmp_path / "m.pgm")
        assert main(["render", "--checkpoint", ckpt, "--times", "1,2",
                     "--out", montage]) == 0
        assert read_pgm(montage).shape == (2 * 64 + 1, 3 * 64 + 2)

        grid_csv = str(tmp_path / "g.csv")
        assert main(["render", "--metrics", csv_path, "--task", "translate",
                     "--time-step", "2", "--out-csv", grid_csv]) == 0
        assert os.path.exists(grid_csv)

    def test_symlab_out_env_used(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SYMLAB_OUT", str(tmp_path / "envout"))
        cfg = str(tmp_path / "cfg.json")
        with open(cfg, "w") as f:
            json.dump({"task": "translate", "steps": 1, "height": 20,
                       "width": 20, "diversity": 2}, f)
        assert main(["train", "--config", cfg, "--run-id", "e1"]) == 0
        assert os.path.exists(tmp_path / "envout" / "checkpoints" / "e1.ckpt")


class TestCliErrors:
    def test_usage_error_is_1(self):
        assert main(["train", "--steps", "2"]) == 1          # no task
        assert main(["bogus"]) == 1
        assert main(["eval", "--out-csv", "x.csv"]) == 1     # missing required

    def test_bad_config_key_is_1(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"task": "rotate", "nope": 1}))
        assert main(["train", "--config", str(cfg)]) == 1

    def test_io_error_is_3(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "missing.ckpt"),
                     "--out-csv", str(tmp_path / "x.csv")]) == 3

    def test_gradcheck_quick_passes(self):
        assert main(["gradcheck", "--quick"]) == 0

    def test_render_without_inputs_is_1(self):
        assert main(["render"]) == 1
