"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the code paths it checks.
"""
import math

import numpy as np

LD = np.longdouble


def enumerate_windows(hours, values, missing, in_idx, out_idx, history, lead):
    """Brute force: try every anchor hour between the first and last row."""
    row_of = {int(h): r for r, h in enumerate(hours)}
    anchors, xs, ys = [], [], []
    if len(hours) == 0:
        return anchors, xs, ys
    for t in range(int(hours[0]), int(hours[-1]) + 1):
        ok = True
        x, y = [], []
        for s in range(t - history, t + 1):
            r = row_of.get(s)
            if r is None or any(missing[r][j] for j in in_idx):
                ok = False
                break
            x.append([values[r][j] for j in in_idx])
        if ok:
            for s in range(t + 1, t + lead + 1):
                r = row_of.get(s)
                if r is None or any(missing[r][j] for j in out_idx):
                    ok = False
                    break
                y.append([values[r][j] for j in out_idx])
        if ok:
            anchors.append(t)
            xs.append(x)
            ys.append(y)
    return anchors, xs, ys


def lstm_loss_ld(shapes, vector, x, y):
    """MSE of a stacked LSTM + linear head evaluated in extended precision.

    ``shapes`` is an ordered list of (name, shape) matching ``vector``; each
    step is written from the textbook cell equations, one sample at a time.
    """
    v = np.asarray(vector, dtype=LD)
    T, off = {}, 0
    for name, shape in shapes:
        n = int(np.prod(shape))
        T[name] = v[off:off + n].reshape(shape)
        off += n
    n_layers = sum(1 for name, _ in shapes if name.endswith(".W_x"))
    hidden = T["layers.0.W_h"].shape[1]

    def sig(z):
        return 1 / (1 + np.exp(-z))

    seq = [np.asarray(row, dtype=LD) for row in x]
    for layer in range(n_layers):
        Wx, Wh, b = T[f"layers.{layer}.W_x"], T[f"layers.{layer}.W_h"], T[f"layers.{layer}.b"]
        h = np.zeros(hidden, dtype=LD)
        c = np.zeros(hidden, dtype=LD)
        out = []
        for xt in seq:
            a = Wx @ xt + Wh @ h + b
            i = sig(a[:hidden])
            f = sig(a[hidden:2 * hidden])
            g = np.tanh(a[2 * hidden:3 * hidden])
            o = sig(a[3 * hidden:])
            c = f * c + i * g
            h = o * np.tanh(c)
            out.append(h)
        seq = out
    pred = T["head_W"] @ seq[-1] + T["head_b"]
    diff = pred - np.asarray(y, dtype=LD).ravel()
    return np.mean(diff * diff)


def adam_scalar(p, grad_fn, steps, lr, wd, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-float Adam with L2 decay folded into the gradient."""
    m = v = 0.0
    traj = []
    for t in range(1, steps + 1):
        g = grad_fn(p) + wd * p
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        p = p - lr * mh / (math.sqrt(vh) + eps)
        traj.append(p)
    return traj


def pearson_naive(a, b):
    n = len(a)
    ma = sum(a) / n
    mb = sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def r2_naive(pred, actual):
    n = len(actual)
    m = sum(actual) / n
    ss_res = sum((y - p) ** 2 for p, y in zip(pred, actual))
    ss_tot = sum((y - m) ** 2 for y in actual)
    return 1 - ss_res / ss_tot
