"""Stacked LSTM encoder with a linear head, forward pass and exact BPTT.

All trainable weights live in one contiguous float64 vector; the per-layer
matrices are reshaped views into it. Packed gate blocks follow the order
(input, forget, cell candidate, output).
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

GATE_ORDER = "ifgo"
FORMAT_VERSION = 1
_MAGIC = b"MAGLSTM\x00"
_HEADER = struct.Struct("<8sI4s5qq")


@dataclass(frozen=True)
class Dims:
    n_input: int
    hidden: int
    layers: int
    lead: int  # T_p
    n_target: int  # K

    def __post_init__(self):
        if self.hidden < 1 or self.layers < 1:
            raise ValueError(f"hidden and layers must be >= 1, got H={self.hidden}, L={self.layers}")
        if self.n_input < 1 or self.lead < 1 or self.n_target < 1:
            raise ValueError(f"invalid dims {self}")

    @property
    def n_out(self) -> int:
        return self.lead * self.n_target


def _layout(dims: Dims) -> list[tuple[str, tuple[int, ...]]]:
    h4 = 4 * dims.hidden
    out = []
    for layer in range(dims.layers):
        d = dims.n_input if layer == 0 else dims.hidden
        out += [
            (f"layers.{layer}.W_x", (h4, d)),
            (f"layers.{layer}.W_h", (h4, dims.hidden)),
            (f"layers.{layer}.b", (h4,)),
        ]
    out += [("head_W", (dims.n_out, dims.hidden)), ("head_b", (dims.n_out,))]
    return out


class LstmLayerParams(NamedTuple):
    W_x: np.ndarray  # (4H, D)
    W_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)


class LstmParams:
    """Weights for an L-layer LSTM plus linear head, backed by ``self.vector``."""

    def __init__(self, dims: Dims, vector: np.ndarray | None = None):
        layout = _layout(dims)
        size = sum(int(np.prod(s)) for _, s in layout)
        if vector is None:
            vector = np.zeros(size)
        vector = np.ascontiguousarray(vector, dtype=np.float64)
        if vector.shape != (size,):
            raise ValueError(f"expected {size} parameters for {dims}, got shape {vector.shape}")
        self.dims = dims
        self.vector = vector
        self.version = 0
        self.tensors: dict[str, np.ndarray] = {}
        off = 0
        for name, shape in layout:
            n = int(np.prod(shape))
            self.tensors[name] = vector[off:off + n].reshape(shape)
            off += n
        self.layers = [
            LstmLayerParams(*(self.tensors[f"layers.{i}.{k}"] for k in ("W_x", "W_h", "b")))
            for i in range(dims.layers)
        ]
        self.head_W = self.tensors["head_W"]
        self.head_b = self.tensors["head_b"]

    def __len__(self) -> int:
        return self.vector.size

    def copy(self) -> "LstmParams":
        return LstmParams(self.dims, self.vector.copy())

    def like(self, vector: np.ndarray) -> "LstmParams":
        return LstmParams(self.dims, vector)

    def touch(self) -> None:
        """Mark in-place edits so stale forward caches are rejected."""
        self.version += 1

    def slices(self) -> dict[str, slice]:
        out, off = {}, 0
        for name, t in self.tensors.items():
            out[name] = slice(off, off + t.size)
            off += t.size
        return out

    # -- serialization -------------------------------------------------
    def save(self, path: str | os.PathLike, seed: int | None = None, extra: dict | None = None) -> None:
        """Binary weights at ``path`` plus a JSON sidecar at ``path + '.json'``."""
        d = self.dims
        header = _HEADER.pack(_MAGIC, FORMAT_VERSION, GATE_ORDER.encode(), d.n_input, d.hidden, d.layers, d.lead, d.n_target, self.vector.size)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.vector.astype("<f8").tobytes())
        meta = {"dims": asdict(d), "seed": seed, "gate_order": GATE_ORDER, "version": FORMAT_VERSION}
        if extra:
            meta.update(extra)
        with open(f"{os.fspath(path)}.json", "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "LstmParams":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _HEADER.size:
            raise ValueError(f"{path}: truncated parameter file")
        magic, version, gates, *dims, count = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a parameter file")
        if version != FORMAT_VERSION or gates.decode() != GATE_ORDER:
            raise ValueError(f"{path}: unsupported version {version} / gate order {gates!r}")
        body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
        if body.size != count:
            raise ValueError(f"{path}: expected {count} weights, found {body.size}")
        return cls(Dims(*dims), body.astype(np.float64))


def init_params(dims: Dims, seed: int) -> LstmParams:
    """Every weight i.i.d. uniform on [-1/sqrt(H), 1/sqrt(H)]."""
    bound = 1.0 / np.sqrt(dims.hidden)
    n = LstmParams(dims).vector.size
    return LstmParams(dims, np.random.default_rng(seed).uniform(-bound, bound, n))


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _gate_affine(hidden: int) -> tuple[np.ndarray, np.ndarray]:
    """(scale, offset) so that gates = scale * tanh(scale * a) + offset.

    Sigmoid blocks use sigmoid(a) = 0.5 * tanh(0.5 * a) + 0.5; the cell
    candidate block is a plain tanh.
    """
    scale = np.full(4 * hidden, 0.5)
    scale[2 * hidden:3 * hidden] = 1.0
    offset = np.full(4 * hidden, 0.5)
    offset[2 * hidden:3 * hidden] = 0.0
    return scale, offset


def cell_forward(x, h, c, p: LstmLayerParams):
    """One LSTM step for a single (or batched) input; returns (h', c')."""
    x, h, c = np.asarray(x, float), np.asarray(h, float), np.asarray(c, float)
    hidden = p.W_h.shape[1]
    if x.shape[-1] != p.W_x.shape[1] or h.shape[-1] != hidden or c.shape != h.shape:
        raise ValueError(f"shape mismatch: x {x.shape}, h {h.shape}, c {c.shape} for W_x {p.W_x.shape}")
    a = x @ p.W_x.T + h @ p.W_h.T + p.b
    i = sigmoid(a[..., :hidden])
    f = sigmoid(a[..., hidden:2 * hidden])
    g = np.tanh(a[..., 2 * hidden:3 * hidden])
    o = sigmoid(a[..., 3 * hidden:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


@dataclass
class ForwardCache:
    """Activations kept for BPTT; arrays are time-major."""

    params_id: int
    params_version: int
    batched: bool
    xs: list  # per layer: (T, B, D_l) layer inputs
    gates: list  # per layer: (T, B, 4H) activated gates
    cells: list  # per layer: (T + 1, B, H), index 0 is the zero initial state
    hiddens: list  # per layer: (T + 1, B, H)
    tanh_c: list  # per layer: (T, B, H)


def forward(inputs: np.ndarray, p: LstmParams) -> tuple[np.ndarray, ForwardCache]:
    """Run the encoder over ``inputs`` of shape (T, D) or (B, T, D).

    Returns predictions of shape (T_p, K) or (B, T_p, K) from the last hidden
    state of the top layer.
    """
    x = np.asarray(inputs, dtype=np.float64)
    batched = x.ndim == 3
    if not batched:
        x = x[None]
    dims = p.dims
    if x.ndim != 3 or x.shape[2] != dims.n_input or x.shape[1] < 1:
        raise ValueError(f"expected input (T, {dims.n_input}) or (B, T, {dims.n_input}), got {np.shape(inputs)}")
    bsz, steps, _ = x.shape
    H = dims.hidden
    cache = ForwardCache(id(p), p.version, batched, [], [], [], [], [])
    scale, offset = _gate_affine(H)
    seq = np.ascontiguousarray(x.transpose(1, 0, 2))
    for lp in p.layers:
        pre = seq @ (lp.W_x.T * scale) + lp.b * scale  # (T, B, 4H), pre-scaled for tanh
        W_hT = lp.W_h.T * scale
        gates = np.empty((steps, bsz, 4 * H))
        cells = np.zeros((steps + 1, bsz, H))
        hs = np.zeros((steps + 1, bsz, H))
        tcs = np.empty((steps, bsz, H))
        for t in range(steps):
            gt = gates[t]
            np.matmul(hs[t], W_hT, out=gt)
            gt += pre[t]
            np.tanh(gt, out=gt)
            gt *= scale
            gt += offset
            c = cells[t + 1]
            np.multiply(gt[:, H:2 * H], cells[t], out=c)
            c += gt[:, :H] * gt[:, 2 * H:3 * H]
            np.tanh(c, out=tcs[t])
            np.multiply(gt[:, 3 * H:], tcs[t], out=hs[t + 1])
        cache.xs.append(seq)
        cache.gates.append(gates)
        cache.cells.append(cells)
        cache.hiddens.append(hs)
        cache.tanh_c.append(tcs)
        seq = hs[1:]
    pred = (seq[-1] @ p.head_W.T + p.head_b).reshape(bsz, dims.lead, dims.n_target)
    return (pred if batched else pred[0]), cache


def backward(cache: ForwardCache, grad_pred: np.ndarray, p: LstmParams) -> LstmParams:
    """Gradients of a scalar loss w.r.t. every parameter, given dloss/dpred.

    Per-window gradients are summed over the batch.
    """
    if cache.params_id != id(p) or cache.params_version != p.version:
        raise ValueError("forward cache does not belong to these parameters (stale or mismatched)")
    dims = p.dims
    H = dims.hidden
    g = np.asarray(grad_pred, dtype=np.float64)
    if not cache.batched:
        g = g[None]
    steps, bsz = cache.xs[0].shape[:2]
    if g.shape != (bsz, dims.lead, dims.n_target):
        raise ValueError(f"grad_pred shape {np.shape(grad_pred)} does not match predictions")
    grads = LstmParams(dims)
    g = g.reshape(bsz, dims.n_out)
    grads.head_W[:] = g.T @ cache.hiddens[-1][-1]
    grads.head_b[:] = g.sum(axis=0)

    d_out = np.zeros((steps, bsz, H))  # dloss/d(layer output h_t)
    d_out[-1] = g @ p.head_W
    for layer in reversed(range(dims.layers)):
        lp, gl = p.layers[layer], grads.layers[layer]
        gates = cache.gates[layer].reshape(steps, bsz, 4, H)
        cells, hs, tcs = cache.cells[layer], cache.hiddens[layer], cache.tanh_c[layer]
        i, f, gg, o = gates[:, :, 0], gates[:, :, 1], gates[:, :, 2], gates[:, :, 3]
        # local derivatives of each pre-activation w.r.t. dc (i, f, g) or dh (o)
        local = np.empty_like(gates)
        local[:, :, 0] = gg * i * (1.0 - i)
        local[:, :, 1] = cells[:-1] * f * (1.0 - f)
        local[:, :, 2] = i * (1.0 - gg * gg)
        local[:, :, 3] = tcs * o * (1.0 - o)
        dc_dh = o * (1.0 - tcs * tcs)
        dA = np.empty((steps, bsz, 4, H))
        dh_next = np.zeros((bsz, H))
        dc = np.zeros((bsz, H))
        for t in reversed(range(steps)):
            dh = d_out[t] + dh_next
            dc = dc * f[t + 1] if t + 1 < steps else dc
            dc += dh * dc_dh[t]
            np.multiply(dc[:, None, :], local[t, :, :3], out=dA[t, :, :3])
            np.multiply(dh, local[t, :, 3], out=dA[t, :, 3])
            dh_next = dA[t].reshape(bsz, 4 * H) @ lp.W_h
        flat = dA.reshape(steps * bsz, 4 * H)
        gl.W_x[:] = flat.T @ cache.xs[layer].reshape(steps * bsz, -1)
        gl.W_h[:] = flat.T @ hs[:-1].reshape(steps * bsz, H)
        gl.b[:] = flat.sum(axis=0)
        if layer:
            d_out = dA.reshape(steps, bsz, 4 * H) @ lp.W_x
    return grads
