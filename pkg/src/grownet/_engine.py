"""Compiled numerical core: batched DAG evaluation and reverse-mode gradients.

Everything here operates on a flattened array view of a network (see
``network.flatten``): per-neuron activation codes, concatenated source-id
lists, and one contiguous parameter vector laid out as

    [bias_0, w_0_0 .. w_0_{k0-1}, bias_1, w_1_0 .. ]

with neurons in topological order and incoming weights in stored order.

Accumulation orders are fixed in the code (edge loops are sequential,
reductions use a fixed 4-lane blocking), so results are bit-reproducible
across runs and independent of thread count. Activation bodies avoid data
branches where possible so the row loops vectorize.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Activation codes. Must stay in sync with activations.ActivationKind.
IDENTITY = 0
RELU = 1
SIGMOID = 2
SIGN = 3
ATAN = 4
SOFTSIGN = 5
SOFTSQUARE = 6
TANH = 7
HARDTANH = 8
RAMP = 9


@njit(cache=True, nogil=True, inline="always")
def _sigmoid(x):
    # split by sign so exp never overflows
    t = math.exp(-abs(x))
    inv = 1.0 / (1.0 + t)
    return inv if x >= 0.0 else 1.0 - inv


@njit(cache=True, nogil=True, inline="always")
def _softsquare(x):
    t = x * x
    t = min(t, 1e300)  # keep t/(1+t) finite for extreme inputs
    v = t / (1.0 + t)
    return math.copysign(v, x)


@njit(cache=True, nogil=True, inline="always")
def _softsquare_slope(x):
    t = 1.0 + x * x
    return 2.0 * abs(x) / (t * t)  # t*t -> inf gives 0, still finite


@njit(cache=True, nogil=True, inline="always")
def _ramp(x):
    a = abs(x)
    if a <= 1.0:
        v = a / 2.0
    elif a < 3.0:
        v = (a + 1.0) / 4.0
    else:
        v = 1.0
    return math.copysign(v, x)


@njit(cache=True, nogil=True, inline="always")
def _ramp_slope(x):
    # right derivative: 0.5 on [-1,1), 0.25 on [1,3) and [-3,-1), else 0
    if x >= 3.0:
        return 0.0
    if x >= 1.0:
        return 0.25
    if x >= -1.0:
        return 0.5
    if x >= -3.0:
        return 0.25
    return 0.0


@njit(cache=True, nogil=True, inline="always")
def act_value(kind, x):
    if kind == IDENTITY:
        return x
    if kind == RELU:
        return x if x >= 0.0 else 0.0
    if kind == SIGMOID:
        return _sigmoid(x)
    if kind == SIGN:
        return 1.0 if x >= 0.0 else -1.0
    if kind == ATAN:
        return 2.0 * math.atan(x) / math.pi
    if kind == SOFTSIGN:
        return x / (1.0 + abs(x))
    if kind == SOFTSQUARE:
        return _softsquare(x)
    if kind == TANH:
        return math.tanh(x)
    if kind == HARDTANH:
        return min(max(x, -1.0), 1.0)
    return _ramp(x)


@njit(cache=True, nogil=True, inline="always")
def act_slope(kind, x):
    # One-sided (right) derivative at the non-smooth points.
    if kind == IDENTITY:
        return 1.0
    if kind == RELU:
        return 1.0 if x >= 0.0 else 0.0
    if kind == SIGMOID:
        s = _sigmoid(x)
        return s * (1.0 - s)
    if kind == SIGN:
        return 0.0
    if kind == ATAN:
        return 2.0 / (math.pi * (1.0 + x * x))
    if kind == SOFTSIGN:
        d = 1.0 + abs(x)
        return 1.0 / (d * d)
    if kind == SOFTSQUARE:
        return _softsquare_slope(x)
    if kind == TANH:
        t = math.tanh(x)
        return 1.0 - t * t
    if kind == HARDTANH:
        return 1.0 if (x >= -1.0 and x < 1.0) else 0.0
    return _ramp_slope(x)


@njit(cache=True, nogil=True)
def act_value_array(kind, xs):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = act_value(kind, xs[i])
    return out


@njit(cache=True, nogil=True)
def act_slope_array(kind, xs):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = act_slope(kind, xs[i])
    return out


@njit(cache=True, nogil=True, inline="always")
def _act_row(kind, p, o, n):
    # dispatch once per row so the inner loops stay branch-light
    if kind == IDENTITY:
        for r in range(n):
            o[r] = p[r]
    elif kind == RELU:
        for r in range(n):
            o[r] = p[r] if p[r] >= 0.0 else 0.0
    elif kind == SIGMOID:
        for r in range(n):
            o[r] = _sigmoid(p[r])
    elif kind == SIGN:
        for r in range(n):
            o[r] = 1.0 if p[r] >= 0.0 else -1.0
    elif kind == ATAN:
        for r in range(n):
            o[r] = 2.0 * math.atan(p[r]) / math.pi
    elif kind == SOFTSIGN:
        for r in range(n):
            o[r] = p[r] / (1.0 + abs(p[r]))
    elif kind == SOFTSQUARE:
        for r in range(n):
            o[r] = _softsquare(p[r])
    elif kind == TANH:
        for r in range(n):
            o[r] = math.tanh(p[r])
    elif kind == HARDTANH:
        for r in range(n):
            o[r] = min(max(p[r], -1.0), 1.0)
    else:
        for r in range(n):
            o[r] = _ramp(p[r])


@njit(cache=True, nogil=True, inline="always")
def _slope_mul_row(kind, p, d, n):
    # d[r] *= slope(p[r]), dispatched once per row
    if kind == IDENTITY:
        pass
    elif kind == RELU:
        for r in range(n):
            d[r] = d[r] if p[r] >= 0.0 else 0.0
    elif kind == SIGMOID:
        for r in range(n):
            s = _sigmoid(p[r])
            d[r] *= s * (1.0 - s)
    elif kind == SIGN:
        for r in range(n):
            d[r] = 0.0
    elif kind == ATAN:
        for r in range(n):
            d[r] *= 2.0 / (math.pi * (1.0 + p[r] * p[r]))
    elif kind == SOFTSIGN:
        for r in range(n):
            t = 1.0 + abs(p[r])
            d[r] /= t * t
    elif kind == SOFTSQUARE:
        for r in range(n):
            d[r] *= _softsquare_slope(p[r])
    elif kind == TANH:
        for r in range(n):
            t = math.tanh(p[r])
            d[r] *= 1.0 - t * t
    elif kind == HARDTANH:
        for r in range(n):
            d[r] = d[r] if (p[r] >= -1.0 and p[r] < 1.0) else 0.0
    else:
        for r in range(n):
            d[r] *= _ramp_slope(p[r])


@njit(cache=True, nogil=True, inline="always")
def _sum_blocked(a, n):
    # fixed 4-lane blocking: deterministic and SIMD-friendly
    a0 = 0.0
    a1 = 0.0
    a2 = 0.0
    a3 = 0.0
    r = 0
    while r + 4 <= n:
        a0 += a[r]
        a1 += a[r + 1]
        a2 += a[r + 2]
        a3 += a[r + 3]
        r += 4
    acc = (a0 + a1) + (a2 + a3)
    while r < n:
        acc += a[r]
        r += 1
    return acc


@njit(cache=True, nogil=True, inline="always")
def _dot_blocked(a, b, n):
    a0 = 0.0
    a1 = 0.0
    a2 = 0.0
    a3 = 0.0
    r = 0
    while r + 4 <= n:
        a0 += a[r] * b[r]
        a1 += a[r + 1] * b[r + 1]
        a2 += a[r + 2] * b[r + 2]
        a3 += a[r + 3] * b[r + 3]
        r += 4
    acc = (a0 + a1) + (a2 + a3)
    while r < n:
        acc += a[r] * b[r]
        r += 1
    return acc


@njit(cache=True, nogil=True)
def forward_into(n_inputs, act, src, src_off, par_off, params, x, vals, pre):
    """Evaluate all neurons over a batch into preallocated buffers.

    vals gets one row per id (inputs first, then each neuron's output);
    pre gets each neuron's pre-activation sum.
    """
    rows = x.shape[0]
    n_neurons = act.shape[0]
    for i in range(n_inputs):
        v = vals[i]
        for r in range(rows):
            v[r] = x[r, i]
    for j in range(n_neurons):
        b = params[par_off[j]]
        p = pre[j]
        for r in range(rows):
            p[r] = b
        wbase = par_off[j] + 1
        e0 = src_off[j]
        for e in range(e0, src_off[j + 1]):
            w = params[wbase + (e - e0)]
            s = vals[src[e]]
            for r in range(rows):
                p[r] += w * s[r]
        _act_row(act[j], p, vals[n_inputs + j], rows)


@njit(cache=True, nogil=True)
def forward_batch(n_inputs, act, src, src_off, par_off, params, x):
    rows = x.shape[0]
    n_neurons = act.shape[0]
    vals = np.empty((n_inputs + n_neurons, rows))
    pre = np.empty((n_neurons, rows))
    forward_into(n_inputs, act, src, src_off, par_off, params, x, vals, pre)
    return vals, pre


@njit(cache=True, nogil=True)
def loss_ws(n_inputs, act, src, src_off, par_off, params, x, y, vals, pre):
    forward_into(n_inputs, act, src, src_off, par_off, params, x, vals, pre)
    rows = x.shape[0]
    out = vals[n_inputs + act.shape[0] - 1]
    a0 = 0.0
    a1 = 0.0
    a2 = 0.0
    a3 = 0.0
    r = 0
    while r + 4 <= rows:
        d0 = out[r] - y[r]
        d1 = out[r + 1] - y[r + 1]
        d2 = out[r + 2] - y[r + 2]
        d3 = out[r + 3] - y[r + 3]
        a0 += d0 * d0
        a1 += d1 * d1
        a2 += d2 * d2
        a3 += d3 * d3
        r += 4
    acc = (a0 + a1) + (a2 + a3)
    while r < rows:
        d = out[r] - y[r]
        acc += d * d
        r += 1
    return acc / rows


@njit(cache=True, nogil=True)
def mean_sq_loss(n_inputs, act, src, src_off, par_off, params, x, y):
    rows = x.shape[0]
    n_neurons = act.shape[0]
    vals = np.empty((n_inputs + n_neurons, rows))
    pre = np.empty((n_neurons, rows))
    return loss_ws(n_inputs, act, src, src_off, par_off, params, x, y, vals, pre)


@njit(cache=True, nogil=True)
def loss_grad_ws(
    n_inputs, act, src, src_off, par_off, params, x, y, vals, pre, delta, grad
):
    """Mean squared loss and its gradient, using preallocated buffers."""
    forward_into(n_inputs, act, src, src_off, par_off, params, x, vals, pre)
    rows = x.shape[0]
    n_neurons = act.shape[0]
    n_ids = n_inputs + n_neurons

    for j in range(n_inputs, n_ids):  # input rows are never read
        d = delta[j]
        for r in range(rows):
            d[r] = 0.0

    out = vals[n_ids - 1]
    dout = delta[n_ids - 1]
    a0 = 0.0
    a1 = 0.0
    a2 = 0.0
    a3 = 0.0
    scale = 2.0 / rows
    r = 0
    while r + 4 <= rows:
        d0 = out[r] - y[r]
        d1 = out[r + 1] - y[r + 1]
        d2 = out[r + 2] - y[r + 2]
        d3 = out[r + 3] - y[r + 3]
        a0 += d0 * d0
        a1 += d1 * d1
        a2 += d2 * d2
        a3 += d3 * d3
        dout[r] = scale * d0
        dout[r + 1] = scale * d1
        dout[r + 2] = scale * d2
        dout[r + 3] = scale * d3
        r += 4
    acc = (a0 + a1) + (a2 + a3)
    while r < rows:
        d = out[r] - y[r]
        acc += d * d
        dout[r] = scale * d
        r += 1
    loss = acc / rows

    for j in range(n_neurons - 1, -1, -1):
        drow = delta[n_inputs + j]
        _slope_mul_row(act[j], pre[j], drow, rows)
        grad[par_off[j]] = _sum_blocked(drow, rows)
        wbase = par_off[j] + 1
        e0 = src_off[j]
        for e in range(e0, src_off[j + 1]):
            s = src[e]
            srow = vals[s]
            grad[wbase + (e - e0)] = _dot_blocked(drow, srow, rows)
            if s >= n_inputs:  # inputs collect no downstream error
                w = params[wbase + (e - e0)]
                trow = delta[s]
                for r in range(rows):
                    trow[r] += w * drow[r]
    return loss


@njit(cache=True, nogil=True)
def loss_and_gradient(n_inputs, act, src, src_off, par_off, params, x, y):
    rows = x.shape[0]
    n_neurons = act.shape[0]
    n_ids = n_inputs + n_neurons
    vals = np.empty((n_ids, rows))
    pre = np.empty((n_neurons, rows))
    delta = np.empty((n_ids, rows))
    grad = np.empty(params.shape[0])
    loss = loss_grad_ws(
        n_inputs, act, src, src_off, par_off, params, x, y, vals, pre, delta, grad
    )
    return loss, grad
