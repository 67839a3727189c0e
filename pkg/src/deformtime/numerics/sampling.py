"""Interpolating samplers with per-corner zero fill outside the grid.

Both samplers are differentiable in the sampled values and in the fractional
positions. At exact lattice points the gradient uses the cell to the right
(``floor`` of the position), which keeps backward total.
"""
from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, _branch, _count, _make, as_tensor


def _scatter_sum(flat_size: int, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    # bincount returns int64 for empty input even when weights are given
    return np.bincount(idx.ravel(), weights=vals.ravel(), minlength=flat_size).astype(np.float64, copy=False)


def bilinear_sample(grid, row, col) -> Tensor:
    """Sample ``grid[..., h, w]`` at fractional ``(row, col)``.

    ``row`` and ``col`` share a shape whose leading axes equal the grid's
    batch axes (``grid.shape[:-2]``); the trailing axes index query points.
    """
    grid, row, col = as_tensor(grid), as_tensor(row), as_tensor(col)
    if row.shape != col.shape:
        raise ShapeError(f"row/col shapes differ: {row.shape} vs {col.shape}")
    batch = grid.shape[:-2]
    if row.shape[: len(batch)] != batch:
        raise ShapeError(f"positions {row.shape} do not start with grid batch axes {batch}")
    h, w = grid.shape[-2:]
    nb = int(np.prod(batch, dtype=np.int64))
    qshape = row.shape
    r = row.data.reshape(nb, -1)
    c = col.data.reshape(nb, -1)
    P = grid.data.reshape(nb, h * w)

    r0 = np.floor(r)
    c0 = np.floor(c)
    fr = r - r0
    fc = c - c0
    r0 = r0.astype(np.intp)
    c0 = c0.astype(np.intp)
    _branch(r0)
    _branch(c0)
    base = (np.arange(nb) * (h * w))[:, None]

    corners = []
    for dr in (0, 1):
        for dc in (0, 1):
            ri = r0 + dr
            ci = c0 + dc
            ok = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
            flat = np.where(ok, ri * w + ci, 0)
            vals = np.where(ok, np.take_along_axis(P, flat, axis=1), 0.0)
            corners.append((ok, base + flat, vals))
    (_, i00, v00), (_, i01, v01), (_, i10, v10), (_, i11, v11) = corners
    w00 = (1 - fr) * (1 - fc)
    w01 = (1 - fr) * fc
    w10 = fr * (1 - fc)
    w11 = fr * fc
    out = w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11
    _count(8 * out.size)

    def bw(g):
        g2 = g.reshape(nb, -1)
        ggrid = grow = gcol = None
        if grid.requires_grad:
            acc = np.zeros(nb * h * w)
            for (ok, idx, _), wt in zip(corners, (w00, w01, w10, w11)):
                acc += _scatter_sum(nb * h * w, idx[ok], (g2 * wt)[ok])
            ggrid = acc.reshape(grid.shape)
        if row.requires_grad:
            d_r = (1 - fc) * (v10 - v00) + fc * (v11 - v01)
            grow = (g2 * d_r).reshape(qshape)
        if col.requires_grad:
            d_c = (1 - fr) * (v01 - v00) + fr * (v11 - v10)
            gcol = (g2 * d_c).reshape(qshape)
        return ggrid, grow, gcol

    return _make(out.reshape(qshape), (grid, row, col), bw, "bilinear_sample")


def linear_sample(seq, pos) -> Tensor:
    """Sample ``seq[..., K]`` along its last axis at fractional ``pos[..., Q]``.

    Leading axes of ``pos`` must equal those of ``seq``. Neighbours outside
    ``[0, K-1]`` contribute zero.
    """
    seq, pos = as_tensor(seq), as_tensor(pos)
    batch = seq.shape[:-1]
    if pos.shape[: len(batch)] != batch or pos.ndim != seq.ndim:
        raise ShapeError(f"positions {pos.shape} incompatible with sequence {seq.shape}")
    K = seq.shape[-1]
    nb = int(np.prod(batch, dtype=np.int64))
    qshape = pos.shape
    p = pos.data.reshape(nb, -1)
    S = seq.data.reshape(nb, K)
    p0 = np.floor(p)
    f = p - p0
    p0 = p0.astype(np.intp)
    _branch(p0)
    base = (np.arange(nb) * K)[:, None]
    ends = []
    for dp in (0, 1):
        pi = p0 + dp
        ok = (pi >= 0) & (pi < K)
        flat = np.where(ok, pi, 0)
        vals = np.where(ok, np.take_along_axis(S, flat, axis=1), 0.0)
        ends.append((ok, base + flat, vals))
    (ok0, i0, v0), (ok1, i1, v1) = ends
    out = (1 - f) * v0 + f * v1
    _count(2 * out.size)

    def bw(g):
        g2 = g.reshape(nb, -1)
        gseq = gpos = None
        if seq.requires_grad:
            acc = _scatter_sum(nb * K, i0[ok0], (g2 * (1 - f))[ok0])
            acc += _scatter_sum(nb * K, i1[ok1], (g2 * f)[ok1])
            gseq = acc.reshape(seq.shape)
        if pos.requires_grad:
            gpos = (g2 * (v1 - v0)).reshape(qshape)
        return gseq, gpos

    return _make(out.reshape(qshape), (seq, pos), bw, "linear_sample")
