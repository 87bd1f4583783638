"""Self-contained numerical verification suite.

Re-derives every gradient by central finite differences and every
convolution by a naive nested-loop reference, then compares against the
fast engine.  This is the dual route behind `symlab gradcheck`; the
references here are deliberately simple and share no code with the
engine implementations they check.
"""

from __future__ import annotations

import numpy as np

from .engine import (
    ConvSpec,
    conv2d_backward,
    conv2d_forward,
    conv_transpose2d_backward,
    conv_transpose2d_forward,
    mse_loss,
    relu_backward,
    relu_forward,
)
from .model import apply_iterated, backward_iterated, init_params, reduced_architecture

CONV_ORACLE_TOL = 1e-6
FD_TOL = 1e-4
ADJOINT_TOL = 1e-5
FD_EPS = 1e-5


def _loop_conv2d(x, w, b, stride, pad):
    n, ic, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.zeros((n, ic, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
    xp[:, :, pad : pad + h, pad : pad + wd] = x
    out = np.zeros((n, oc, oh, ow), dtype=x.dtype)
    for bi in range(n):
        for o in range(oc):
            for y in range(oh):
                for xx in range(ow):
                    s = 0.0
                    for c in range(ic):
                        for i in range(kh):
                            for j in range(kw):
                                s += xp[bi, c, y * stride + i, xx * stride + j] * w[o, c, i, j]
                    out[bi, o, y, xx] = s + b[o]
    return out


def _loop_conv_transpose2d(x, w, b, stride, pad, op):
    n, ic, h, wd = x.shape
    _, oc, kh, kw = w.shape
    oh = (h - 1) * stride - 2 * pad + kh + op
    ow = (wd - 1) * stride - 2 * pad + kw + op
    out = np.zeros((n, oc, oh, ow), dtype=x.dtype)
    for bi in range(n):
        for c in range(ic):
            for y in range(h):
                for xx in range(wd):
                    for o in range(oc):
                        for i in range(kh):
                            for j in range(kw):
                                oy, ox = y * stride - pad + i, xx * stride - pad + j
                                if 0 <= oy < oh and 0 <= ox < ow:
                                    out[bi, o, oy, ox] += x[bi, c, y, xx] * w[c, o, i, j]
    return out + b.reshape(1, -1, 1, 1)


def _sampled_fd(loss_fn, arr, rng, max_entries=24, eps=FD_EPS):
    """Central finite differences on a random subset of entries."""
    flat = arr.reshape(-1)
    idx = np.arange(flat.size)
    if flat.size > max_entries:
        idx = rng.choice(flat.size, size=max_entries, replace=False)
    fd = np.zeros(len(idx))
    for j, i in enumerate(idx):
        orig = flat[i]
        flat[i] = orig + eps
        fp = loss_fn()
        flat[i] = orig - eps
        fm = loss_fn()
        flat[i] = orig
        fd[j] = (fp - fm) / (2 * eps)
    return idx, fd


def _rel_err(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float(np.max(np.abs(a - b) / denom)) if len(np.atleast_1d(a)) else 0.0


def check_conv_oracle(cases=200, seed=0):
    """Both conv ops vs the naive loop reference on random small configs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        ic, oc = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        k = int(rng.choice([1, 3, 5, 7]))
        s = int(rng.integers(1, 3))
        p = int(rng.integers(0, 3))
        h = int(rng.integers(max(2, k - 2 * p), 9))
        wd = int(rng.integers(max(2, k - 2 * p), 9))
        x = rng.standard_normal((2, ic, h, wd))
        b = rng.standard_normal(oc)
        wc = rng.standard_normal((oc, ic, k, k))
        spec = ConvSpec(ic, oc, (k, k), stride=s, padding=p)
        worst = max(worst, float(np.max(np.abs(
            conv2d_forward(x, wc, b, spec) - _loop_conv2d(x, wc, b, s, p)))))
        op = int(rng.integers(0, s))
        if (min(h, wd) - 1) * s - 2 * p + k + op >= 1:  # output positive-sized
            wt = rng.standard_normal((ic, oc, k, k))
            tspec = ConvSpec(ic, oc, (k, k), stride=s, padding=p, output_padding=op)
            worst = max(worst, float(np.max(np.abs(
                conv_transpose2d_forward(x, wt, b, tspec)
                - _loop_conv_transpose2d(x, wt, b, s, p, op)))))
    return worst < CONV_ORACLE_TOL, f"max abs diff {worst:.2e} over {cases} cases"


def check_op_gradients(seed=1):
    """Finite-difference checks for conv, transposed conv, ReLU and MSE."""
    rng = np.random.default_rng(seed)
    worst = 0.0

    spec = ConvSpec(2, 3, (3, 3), stride=2, padding=1)
    x = rng.standard_normal((1, 2, 6, 6))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    t = rng.standard_normal(conv2d_forward(x, w, b, spec).shape)

    def loss():
        d = conv2d_forward(x, w, b, spec) - t
        return 0.5 * float(np.sum(d * d))

    gx, gw, gb = conv2d_backward(conv2d_forward(x, w, b, spec) - t, x, w, spec)
    for arr, g in ((x, gx), (w, gw), (b, gb)):
        idx, fd = _sampled_fd(loss, arr, rng)
        worst = max(worst, _rel_err(g.reshape(-1)[idx], fd))

    tspec = ConvSpec(3, 2, (3, 3), stride=2, padding=1, output_padding=1)
    xt = rng.standard_normal((1, 3, 6, 6))
    wt = rng.standard_normal((3, 2, 3, 3))
    bt = rng.standard_normal(2)
    tt = rng.standard_normal(conv_transpose2d_forward(xt, wt, bt, tspec).shape)

    def loss_t():
        d = conv_transpose2d_forward(xt, wt, bt, tspec) - tt
        return 0.5 * float(np.sum(d * d))

    go = conv_transpose2d_forward(xt, wt, bt, tspec) - tt
    gx, gw, gb = conv_transpose2d_backward(go, xt, wt, tspec)
    for arr, g in ((xt, gx), (wt, gw), (bt, gb)):
        idx, fd = _sampled_fd(loss_t, arr, rng)
        worst = max(worst, _rel_err(g.reshape(-1)[idx], fd))

    xr = rng.standard_normal((1, 2, 4, 4))
    xr[np.abs(xr) < 1e-3] = 0.1
    tr = rng.standard_normal(xr.shape)

    def loss_r():
        d = relu_forward(xr) - tr
        return 0.5 * float(np.sum(d * d))

    gr = relu_backward(relu_forward(xr) - tr, xr)
    idx, fd = _sampled_fd(loss_r, xr, rng)
    worst = max(worst, _rel_err(gr.reshape(-1)[idx], fd))

    pm = rng.standard_normal((1, 1, 4, 4))
    tm = rng.standard_normal(pm.shape)
    _, gm = mse_loss(pm, tm)
    idx, fd = _sampled_fd(lambda: mse_loss(pm, tm)[0], pm, rng)
    worst = max(worst, _rel_err(gm.reshape(-1)[idx], fd))

    return worst < FD_TOL, f"max rel err {worst:.2e}"


def check_unrolled_gradients(ks=(1, 2, 3), seed=1):
    """FD check of backprop through the unrolled chain, reduced network."""
    rng = np.random.default_rng(seed)
    params = init_params(rng, reduced_architecture(), dtype=np.float64)
    for name in params.biases:
        params.biases[name] = rng.uniform(0.05, 0.15, params.biases[name].shape)
    x = rng.random((1, 1, 20, 20))
    target = rng.random((1, 1, 20, 20))
    worst = 0.0
    for k in ks:
        outs, traces = apply_iterated(params, x, k)
        margin = min(float(np.min(np.abs(p))) for t in traces for p in t.preacts)
        if margin < 10 * FD_EPS:
            return False, f"ReLU kink margin {margin:.1e} too small for FD"
        _, gf = mse_loss(outs[-1], target)
        grads = backward_iterated(params, traces, gf)

        def loss(k=k):
            o, _ = apply_iterated(params, x, k)
            return mse_loss(o[-1], target)[0]

        for name in ("e1", "e3", "d1", "d3"):
            for arr, g in ((params.weights[name], grads[name][0]),
                           (params.biases[name], grads[name][1])):
                idx, fd = _sampled_fd(loss, arr, rng, max_entries=8)
                worst = max(worst, _rel_err(g.reshape(-1)[idx], fd))
    return worst < FD_TOL, f"max rel err {worst:.2e} over k={list(ks)}"


def check_adjointness(seed=2):
    """<conv(x), y> == <x, convT(y)> for the project's two kernel geometries."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k, s, p, op in [(3, 2, 1, 1), (7, 1, 1, 0)]:
        spec = ConvSpec(2, 3, (k, k), stride=s, padding=p)
        x = rng.standard_normal((2, 2, 12, 12))
        w = rng.standard_normal((3, 2, k, k))
        y = rng.standard_normal(conv2d_forward(x, w, np.zeros(3), spec).shape)
        lhs = float(np.sum(conv2d_forward(x, w, np.zeros(3), spec) * y))
        tspec = ConvSpec(3, 2, (k, k), stride=s, padding=p, output_padding=op)
        back = conv_transpose2d_forward(y, w, np.zeros(2), tspec)
        rhs = float(np.sum(x * back[:, :, :12, :12]))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    return worst < ADJOINT_TOL, f"max rel err {worst:.2e}"


def run_all(quick: bool = False):
    """Run every check; returns a list of (name, passed, detail)."""
    results = [
        ("conv_oracle", *check_conv_oracle(cases=40 if quick else 200)),
        ("op_gradients", *check_op_gradients()),
        ("unrolled_gradients", *check_unrolled_gradients(ks=(1, 2) if quick else (1, 2, 3))),
        ("adjointness", *check_adjointness()),
    ]
    return results
