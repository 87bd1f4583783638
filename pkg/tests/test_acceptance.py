"""Acceptance gate.

Criteria 1-7 form the property-based suite and run on every build.
Criteria 8-11 check orderings in the desk-scale experimental results
(results/desk/summary.csv, regenerated by `python3 scripts/run_desk.py`,
several CPU-hours); they skip with instructions when the file is absent.
Criterion 12 (full-scale 100k-step grid) is documented as optional and
permanently non-blocking.
"""

import os

import numpy as np
import pytest

from oracles import (
    finite_diff_grad,
    naive_conv2d,
    naive_conv_transpose2d,
    point_in_convex_polygon,
    rel_err,
)
from symlab.engine import (
    ConvSpec,
    conv2d_backward,
    conv2d_forward,
    conv_transpose2d_backward,
    conv_transpose2d_forward,
    mse_loss,
    relu_backward,
    relu_forward,
)
from symlab.io import (
    METRICS_COLUMNS,
    MetricRow,
    RunManifest,
    load_checkpoint,
    read_metrics,
    save_checkpoint,
    write_metrics,
)
from symlab.model import (
    apply_iterated,
    backward_iterated,
    forward,
    init_params,
    reduced_architecture,
)
from symlab.oracle import TransformKind, shift_raster, transform_spec
from symlab.shapes import (
    OOD_TRANSLATION,
    ROTATION_TRAIN,
    TRANSLATION_TRAIN,
    ShapeDistribution,
    rasterize,
    sample_shape,
)
from symlab.training import TrainConfig

GRAD_TOL = 1e-4       # criterion 1
CONV_TOL = 1e-6       # criterion 2
ADJOINT_TOL = 1e-5    # criterion 3


# --------------------------------------------------------------------------
# Criterion 1: gradient checks against central finite differences
# --------------------------------------------------------------------------
class TestCriterion1Gradients:
    def test_conv2d_gradients(self):
        rng = np.random.default_rng(0)
        spec = ConvSpec(2, 3, (3, 3), stride=2, padding=1)
        x = rng.standard_normal((1, 2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        t = rng.standard_normal(conv2d_forward(x, w, b, spec).shape)

        def loss(xa=None, wa=None, ba=None):
            out = conv2d_forward(
                x if xa is None else xa, w if wa is None else wa,
                b if ba is None else ba, spec)
            return 0.5 * float(np.sum((out - t) ** 2))

        gx, gw, gb = conv2d_backward(conv2d_forward(x, w, b, spec) - t, x, w, spec)
        assert rel_err(gx, finite_diff_grad(lambda a: loss(xa=a), x)) < GRAD_TOL
        assert rel_err(gw, finite_diff_grad(lambda a: loss(wa=a), w)) < GRAD_TOL
        assert rel_err(gb, finite_diff_grad(lambda a: loss(ba=a), b)) < GRAD_TOL

    def test_conv_transpose2d_gradients(self):
        rng = np.random.default_rng(1)
        spec = ConvSpec(3, 2, (3, 3), stride=2, padding=1, output_padding=1)
        x = rng.standard_normal((1, 3, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(2)
        t = rng.standard_normal(conv_transpose2d_forward(x, w, b, spec).shape)

        def loss(xa=None, wa=None, ba=None):
            out = conv_transpose2d_forward(
                x if xa is None else xa, w if wa is None else wa,
                b if ba is None else ba, spec)
            return 0.5 * float(np.sum((out - t) ** 2))

        go = conv_transpose2d_forward(x, w, b, spec) - t
        gx, gw, gb = conv_transpose2d_backward(go, x, w, spec)
        assert rel_err(gx, finite_diff_grad(lambda a: loss(xa=a), x)) < GRAD_TOL
        assert rel_err(gw, finite_diff_grad(lambda a: loss(wa=a), w)) < GRAD_TOL
        assert rel_err(gb, finite_diff_grad(lambda a: loss(ba=a), b)) < GRAD_TOL

    def test_relu_gradient(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((1, 2, 4, 4))
        x[np.abs(x) < 1e-3] = 0.1   # keep pre-activations off the kink
        t = rng.standard_normal(x.shape)
        g = relu_backward(relu_forward(x) - t, x)
        fd = finite_diff_grad(
            lambda a: 0.5 * float(np.sum((relu_forward(a) - t) ** 2)), x)
        assert rel_err(g, fd) < GRAD_TOL

    def test_mse_gradient(self):
        rng = np.random.default_rng(3)
        p = rng.standard_normal((1, 1, 4, 4))
        t = rng.standard_normal(p.shape)
        _, g = mse_loss(p, t)
        fd = finite_diff_grad(lambda a: mse_loss(a, t)[0], p)
        assert rel_err(g, fd) < GRAD_TOL

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_unrolled_composition_gradients(self, k):
        rng = np.random.default_rng(1)
        params = init_params(rng, reduced_architecture(), dtype=np.float64)
        # zero biases would leave pre-activations exactly on the ReLU kink
        for name in params.biases:
            params.biases[name] = rng.uniform(0.05, 0.15, params.biases[name].shape)
        x = rng.random((1, 1, 20, 20))
        target = rng.random((1, 1, 20, 20))
        outs, traces = apply_iterated(params, x, k)
        margin = min(np.min(np.abs(p)) for t in traces for p in t.preacts)
        assert margin > 1e-4, "fixture landed on a ReLU kink; pick another seed"
        _, gf = mse_loss(outs[-1], target)
        grads = backward_iterated(params, traces, gf)

        def loss():
            o, _ = apply_iterated(params, x, k)
            return mse_loss(o[-1], target)[0]

        for name in ("e1", "e2", "e3", "d1", "d2", "d3"):
            # biases fully; weights on a 12-entry random subset per layer
            for arr, g, budget in (
                (params.weights[name], grads[name][0], 12),
                (params.biases[name], grads[name][1], None),
            ):
                flat = arr.reshape(-1)
                idx = (np.arange(flat.size) if budget is None or flat.size <= budget
                       else rng.choice(flat.size, size=budget, replace=False))
                for i in idx:
                    orig = flat[i]
                    flat[i] = orig + 1e-5
                    fp = loss()
                    flat[i] = orig - 1e-5
                    fm = loss()
                    flat[i] = orig
                    fd = (fp - fm) / 2e-5
                    assert rel_err(g.reshape(-1)[i], fd) < GRAD_TOL, (name, k, i)


# --------------------------------------------------------------------------
# Criterion 2: 200 random cases against the naive nested-loop reference
# --------------------------------------------------------------------------
class TestCriterion2ConvOracle:
    def test_200_random_cases(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            ic, oc = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            k = int(rng.choice([1, 3, 5, 7]))
            s = int(rng.integers(1, 3))
            p = int(rng.integers(0, 3))
            h = int(rng.integers(max(2, k - 2 * p), 9))
            wd = int(rng.integers(max(2, k - 2 * p), 9))
            x = rng.standard_normal((2, ic, h, wd))
            b = rng.standard_normal(oc)
            w = rng.standard_normal((oc, ic, k, k))
            spec = ConvSpec(ic, oc, (k, k), stride=s, padding=p)
            worst = max(worst, float(np.max(np.abs(
                conv2d_forward(x, w, b, spec) - naive_conv2d(x, w, b, s, p)))))
            op = int(rng.integers(0, s))
            if (min(h, wd) - 1) * s - 2 * p + k + op >= 1:
                wt = rng.standard_normal((ic, oc, k, k))
                tspec = ConvSpec(ic, oc, (k, k), stride=s, padding=p,
                                 output_padding=op)
                worst = max(worst, float(np.max(np.abs(
                    conv_transpose2d_forward(x, wt, b, tspec)
                    - naive_conv_transpose2d(x, wt, b, s, p, op)))))
        assert worst < CONV_TOL, worst


# --------------------------------------------------------------------------
# Criterion 3: adjointness for both kernel geometries of the architecture
# --------------------------------------------------------------------------
class TestCriterion3Adjointness:
    @pytest.mark.parametrize("k,s,p,op", [(3, 2, 1, 1), (7, 1, 1, 0)])
    def test_inner_product_identity(self, k, s, p, op):
        rng = np.random.default_rng(k)
        spec = ConvSpec(2, 3, (k, k), stride=s, padding=p)
        x = rng.standard_normal((2, 2, 12, 12))
        w = rng.standard_normal((3, 2, k, k))
        y = rng.standard_normal(conv2d_forward(x, w, np.zeros(3), spec).shape)
        lhs = float(np.sum(conv2d_forward(x, w, np.zeros(3), spec) * y))
        tspec = ConvSpec(3, 2, (k, k), stride=s, padding=p, output_padding=op)
        back = conv_transpose2d_forward(y, w, np.zeros(2), tspec)
        rhs = float(np.sum(x * back[:, :, :12, :12]))
        assert abs(lhs - rhs) / max(abs(lhs), abs(rhs)) < ADJOINT_TOL


# --------------------------------------------------------------------------
# Criterion 4: size contract at 64 and 512
# --------------------------------------------------------------------------
class TestCriterion4SizeContract:
    @pytest.mark.parametrize("side,expected", [
        (64, (32, 16, 12, 16, 32, 64)),
        (512, (256, 128, 124, 128, 256, 512)),
    ])
    def test_internal_size_sequence(self, side, expected):
        params = init_params(np.random.default_rng(0))
        x = np.zeros((1, 1, side, side), dtype=np.float32)
        out, trace = forward(params, x)
        sizes = tuple(a.shape[2] for a in trace.inputs[1:]) + (out.shape[2],)
        assert sizes == expected
        assert out.shape == x.shape


# --------------------------------------------------------------------------
# Criterion 5: oracle group laws
# --------------------------------------------------------------------------
class TestCriterion5GroupLaws:
    def spec(self, seed=0):
        return sample_shape(np.random.default_rng(seed), ROTATION_TRAIN)

    def test_rotation_period_50_raster_identical(self):
        kind = TransformKind.rotate()
        for seed in range(5):
            s = self.spec(seed)
            np.testing.assert_array_equal(
                rasterize(transform_spec(s, kind, 50), 64, 64),
                rasterize(s, 64, 64))

    def test_rotation_25_is_point_reflection(self):
        # 25 minimal rotations = pi about the center: vertex set maps to
        # the reflection of the original through (32, 32)
        kind = TransformKind.rotate()
        for seed in range(5):
            s = self.spec(seed)
            v = np.array(sorted(map(tuple, transform_spec(s, kind, 25).vertices())))
            refl = np.array(sorted(map(tuple, 2 * np.array([32.0, 32.0]) - s.vertices())))
            np.testing.assert_allclose(v, refl, atol=1e-9)

    def test_translation_composition_bit_exact_vs_raster_shift(self):
        kind = TransformKind.translate()
        rng = np.random.default_rng(7)
        for _ in range(5):
            s = sample_shape(rng, TRANSLATION_TRAIN)
            base = rasterize(s, 64, 64)
            for k in (1, 3, 7):
                np.testing.assert_array_equal(
                    rasterize(transform_spec(s, kind, k), 64, 64),
                    shift_raster(base, 2 * k))


# --------------------------------------------------------------------------
# Criterion 6: rasterizer vs brute-force point-in-hull; row convexity
# --------------------------------------------------------------------------
def independent_raster(spec, h, w):
    """Brute-force reference sharing no hull code with the library."""
    from scipy.spatial import ConvexHull

    pts = spec.vertices()
    hull = pts[ConvexHull(pts).vertices]          # counter-clockwise
    jj, ii = np.mgrid[0:h, 0:w].astype(np.float64)

    def inside(poly):
        ok = np.ones((h, w), dtype=bool)
        for a in range(len(poly)):
            x0, y0 = poly[a]
            x1, y1 = poly[(a + 1) % len(poly)]
            ex, ey = x1 - x0, y1 - y0
            norm = max(np.hypot(ex, ey), 1e-12)
            ok &= (ex * (jj - y0) - ey * (ii - x0)) / norm >= -1e-7
        return ok

    img = inside(hull).astype(np.float32)
    if spec.hollow_fraction > 0:
        c = np.asarray(spec.centroid)
        img[inside((hull - c) * spec.hollow_fraction + c)] = 0.0
    return img


class TestCriterion6Rasterizer:
    def distributions(self):
        return [
            TRANSLATION_TRAIN,
            ROTATION_TRAIN,
            ShapeDistribution(r_range=(8, 12), x_range=(14, 50),
                              y_range=(14, 50), hollow_fraction=0.5),
        ]

    def test_100_specs_match_brute_force(self):
        rng = np.random.default_rng(11)
        checked = 0
        for dist in self.distributions():
            for _ in range(34):
                s = sample_shape(rng, dist)
                np.testing.assert_array_equal(
                    rasterize(s, 64, 64), independent_raster(s, 64, 64),
                    err_msg=f"{dist}")
                checked += 1
        assert checked >= 100

    def test_row_convexity_of_solid_shapes(self):
        rng = np.random.default_rng(13)
        for dist in (TRANSLATION_TRAIN, ROTATION_TRAIN):
            for _ in range(25):
                img = rasterize(sample_shape(rng, dist), 64, 64)
                for row in img:
                    on = np.flatnonzero(row)
                    if on.size:
                        assert on[-1] - on[0] + 1 == on.size, "gap in a row"

    def test_scalar_oracle_agrees_on_sample_points(self):
        # cross-check the vectorized brute force against the scalar one
        from scipy.spatial import ConvexHull

        rng = np.random.default_rng(17)
        s = sample_shape(rng, ROTATION_TRAIN)
        pts = s.vertices()
        hull = pts[ConvexHull(pts).vertices]
        img = independent_raster(s, 64, 64)
        for j in range(20, 45):
            for i in range(20, 45):
                assert bool(img[j, i]) == point_in_convex_polygon(i, j, hull)


# --------------------------------------------------------------------------
# Criterion 7: checkpoint round trip; metrics CSV schema golden
# --------------------------------------------------------------------------
class TestCriterion7Persistence:
    def test_checkpoint_round_trip_bit_identical(self, tmp_path):
        params = init_params(np.random.default_rng(5))
        cfg = TrainConfig(task="rotate", diversity="inf", max_iterations=9)
        path = str(tmp_path / "c.ckpt")
        save_checkpoint(params, RunManifest("r", cfg.to_dict()), path)
        loaded, manifest, _ = load_checkpoint(path)
        assert set(loaded.weights) == set(params.weights)
        for n in params.weights:
            np.testing.assert_array_equal(loaded.weights[n], params.weights[n])
            np.testing.assert_array_equal(loaded.biases[n], params.biases[n])
        assert TrainConfig.from_dict(manifest.config) == cfg

    def test_metrics_schema_golden(self, tmp_path):
        path = str(tmp_path / "m.csv")
        write_metrics([MetricRow("r", "rotate", "inf", 9, 1, 3, "eval", 50,
                                 "accuracy", 0.125)], path)
        lines = open(path, "rb").read().split(b"\r\n")
        assert lines[0].decode() == ",".join(METRICS_COLUMNS)
        assert lines[1].decode() == "r,rotate,inf,9,1,3,eval,50,accuracy,0.125"
        assert read_metrics(path)[0]["value"] == 0.125


# --------------------------------------------------------------------------
# Criteria 8-11: desk-scale experimental orderings
# --------------------------------------------------------------------------
DESK_SUMMARY = os.environ.get(
    "SYMLAB_DESK_RESULTS",
    os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                 "results", "desk", "summary.csv"),
)
REGEN = ("desk-scale results missing or incomplete; regenerate with "
         "`python3 scripts/run_desk.py` (several CPU-hours, restartable) "
         "or point SYMLAB_DESK_RESULTS at an existing summary.csv")


def desk_value(rows, run_id, metric, t):
    for r in rows:
        if (r["run_id"] == run_id and r["metric"] == metric
                and r["step_or_time"] == t):
            return r["value"]
    pytest.skip(f"{REGEN} (no row {run_id}/{metric}/t={t})")


@pytest.fixture(scope="module")
def desk_rows():
    if not os.path.exists(DESK_SUMMARY):
        pytest.skip(REGEN)
    return read_metrics(DESK_SUMMARY)


@pytest.mark.desk
class TestCriteria8to11Desk:
    def test_criterion_8_translation_iid_accuracy(self, desk_rows):
        t1 = desk_value(desk_rows, "tr_inf_m1@iid", "accuracy", 1)
        t50 = desk_value(desk_rows, "tr_inf_m1@iid", "accuracy", 50)
        assert t1 >= 0.85, f"IID accuracy at t=1 was {t1:.3f}"
        assert t50 >= 0.70, f"IID accuracy at t=50 was {t50:.3f}"

    def test_criterion_9_ood_diversity_effect(self, desk_rows):
        inf50 = desk_value(desk_rows, "tr_inf_m1@ood", "accuracy", 50)
        d100 = desk_value(desk_rows, "tr_100_m1@ood", "accuracy", 50)
        assert inf50 - d100 >= 0.2, (
            f"OOD t=50 accuracy: inf={inf50:.3f}, D=100={d100:.3f}")

    def test_criterion_10_rotation_crossover(self, desk_rows):
        m1_t50 = desk_value(desk_rows, "rot_inf_m1@iid", "mse", 50)
        m9_t50 = desk_value(desk_rows, "rot_inf_m9@iid", "mse", 50)
        m1_t1 = desk_value(desk_rows, "rot_inf_m1@iid", "mse", 1)
        m9_t1 = desk_value(desk_rows, "rot_inf_m9@iid", "mse", 1)
        assert m9_t50 < m1_t50, f"t=50 MSE: M9={m9_t50:.5f}, M1={m1_t50:.5f}"
        assert m9_t1 > m1_t1, f"t=1 MSE: M9={m9_t1:.5f}, M1={m1_t1:.5f}"

    def test_criterion_11_iterative_beats_single_pass(self, desk_rows):
        # the single-pass network rotates 5 minimal rotations per forward
        # pass, so its rollout step t covers 5t minimal rotations; compare
        # at matched minimal-rotation counts >= 30
        mrs = [30, 35, 40, 45, 50]
        m5 = [desk_value(desk_rows, "rot_inf_m5@iid", "mse", mr) for mr in mrs]
        sp = [desk_value(desk_rows, "rot_5mr_sp@iid", "mse", mr // 5)
              for mr in mrs]
        assert float(np.mean(m5)) < float(np.mean(sp)), (
            f"late-time MSE means: iterative M5={np.mean(m5):.5f}, "
            f"single-pass 5MR={np.mean(sp):.5f}")


@pytest.mark.skip(reason=(
    "criterion 12 is optional and non-blocking: the full-scale grid "
    "(100k steps x 5 diversities x 9 iteration depths x 3 seeds) takes "
    "weeks of CPU; run it with `symlab grid --task translate --steps 100000 "
    "--seeds 3 --jobs N` and evaluate with `symlab eval --horizon 50`"))
def test_criterion_12_paper_scale_grid():
    pass
