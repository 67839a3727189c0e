"""Fused kernels with hand-written backward rules: depthwise convolution and GRU."""
from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, _count, _make, as_tensor


def _same_pad(k: int) -> tuple[int, int]:
    return (k - 1) // 2, k // 2


def depthwise_conv2d(x, weight, bias) -> Tensor:
    """Per-channel 2-D convolution with 'same' zero padding.

    x: ``[..., H, W, C]``; weight: ``[kh, kw, C]``; bias: ``[C]``.
    A ``k x 1`` kernel gives a 1-D convolution along H.
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim < 3:
        raise ShapeError(f"depthwise_conv2d expects [..., H, W, C], got {x.shape}")
    kh, kw, C = weight.shape
    if x.shape[-1] != C or bias.shape != (C,):
        raise ShapeError(f"channel mismatch: x {x.shape}, weight {weight.shape}, bias {bias.shape}")
    H, W = x.shape[-3], x.shape[-2]
    lead = [(0, 0)] * (x.ndim - 3)
    ph, pw = _same_pad(kh), _same_pad(kw)
    xp = np.pad(x.data, lead + [ph, pw, (0, 0)])
    out = np.broadcast_to(bias.data, x.shape).copy()
    for a in range(kh):
        for b in range(kw):
            out += xp[..., a : a + H, b : b + W, :] * weight.data[a, b]
    _count(kh * kw * x.size)

    def bw(g):
        gx = gw = gb = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for a in range(kh):
                for b in range(kw):
                    gxp[..., a : a + H, b : b + W, :] += g * weight.data[a, b]
            gx = gxp[..., ph[0] : ph[0] + H, pw[0] : pw[0] + W, :]
        if weight.requires_grad:
            gw = np.empty_like(weight.data)
            red = tuple(range(g.ndim - 1))
            for a in range(kh):
                for b in range(kw):
                    gw[a, b] = (xp[..., a : a + H, b : b + W, :] * g).sum(axis=red)
        if bias.requires_grad:
            gb = g.reshape(-1, C).sum(axis=0)
        return gx, gw, gb

    return _make(out, (x, weight, bias), bw, "depthwise_conv2d")


def _sig(v):
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def gru_layer(x, w_ih, w_hh, b_ih, b_hh) -> Tensor:
    """One GRU layer over the time axis of ``x[B, T, I]`` from a zero state.

    Gates are packed (reset, update, candidate) along the last axis of the
    ``[I, 3H]`` and ``[H, 3H]`` weights. Returns every hidden state ``[B, T, H]``.
    """
    x, w_ih, w_hh, b_ih, b_hh = map(as_tensor, (x, w_ih, w_hh, b_ih, b_hh))
    if x.ndim != 3:
        raise ShapeError(f"gru_layer expects [B, T, I], got {x.shape}")
    B, T, I = x.shape
    H = w_hh.shape[0]
    if w_ih.shape != (I, 3 * H) or w_hh.shape != (H, 3 * H):
        raise ShapeError(f"GRU weight shapes {w_ih.shape}, {w_hh.shape} do not fit input {x.shape}")
    gi_all = x.data @ w_ih.data + b_ih.data
    hs = np.empty((B, T, H))
    cache = []
    h = np.zeros((B, H))
    for t in range(T):
        gi = gi_all[:, t]
        gh = h @ w_hh.data + b_hh.data
        r = _sig(gi[:, :H] + gh[:, :H])
        z = _sig(gi[:, H : 2 * H] + gh[:, H : 2 * H])
        ghn = gh[:, 2 * H :]
        n = np.tanh(gi[:, 2 * H :] + r * ghn)
        h_new = (1.0 - z) * n + z * h
        cache.append((h, r, z, n, ghn))
        hs[:, t] = h_new
        h = h_new
    _count(B * T * I * 3 * H + T * (B * H * 3 * H + 3 * B * H))

    def bw(g):
        d_gi = np.empty((B, T, 3 * H))
        gw_hh = np.zeros_like(w_hh.data)
        gb_hh = np.zeros(3 * H)
        dh = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            h_prev, r, z, n, ghn = cache[t]
            dh = dh + g[:, t]
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dan = dn * (1.0 - n * n)
            dar = dan * ghn * r * (1.0 - r)
            daz = dz * z * (1.0 - z)
            dgh = np.concatenate([dar, daz, dan * r], axis=1)
            d_gi[:, t] = np.concatenate([dar, daz, dan], axis=1)
            gw_hh += h_prev.T @ dgh
            gb_hh += dgh.sum(axis=0)
            dh = dh * z + dgh @ w_hh.data.T
        gx = d_gi @ w_ih.data.T if x.requires_grad else None
        gw_ih = np.einsum("bti,btj->ij", x.data, d_gi) if w_ih.requires_grad else None
        gb_ih = d_gi.sum(axis=(0, 1))
        return gx, gw_ih, gw_hh, gb_ih, gb_hh

    return _make(hs, (x, w_ih, w_hh, b_ih, b_hh), bw, "gru_layer")
