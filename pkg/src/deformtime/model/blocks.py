"""Embedding, deformable attention blocks and the two-branch encoder layer.

Tensors are batched: ``[B, L, d]`` unless stated otherwise.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from .config import ConfigError, ModelConfig


def sinusoidal_pe(L: int, d: int) -> np.ndarray:
    if d % 2:
        raise ConfigError("sinusoidal position embedding needs an even width")
    pos = np.arange(L)[:, None]
    freq = 10000.0 ** (np.arange(0, d, 2) / d)
    pe = np.empty((L, d))
    pe[:, 0::2] = np.sin(pos / freq)
    pe[:, 1::2] = np.cos(pos / freq)
    return pe


def _mul_alpha(alpha, x: Tensor) -> Tensor:
    return x * alpha if isinstance(alpha, Tensor) else nx.scale(x, float(alpha))


def nae_embed(Z, cfg: ModelConfig, params) -> Tensor:
    """Group-wise embedding of correlation-ordered variables plus position code, then LN.

    ``Z`` is ``[B, L, C+1]``; columns are zero-padded to a multiple of G and
    each contiguous group gets its own affine map to ``d/G`` features.
    """
    Z = nx.as_tensor(Z)
    B, L, V = Z.shape
    if V != cfg.n_vars:
        raise ConfigError(f"input has {V} variables, config expects {cfg.n_vars}")
    if cfg.use_nae:
        G, m = cfg.G, cfg.padded_vars // cfg.G
        if cfg.padded_vars != V:
            Z = nx.pad(Z, [(0, 0), (0, 0), (0, cfg.padded_vars - V)])
        Zg = nx.transpose(nx.reshape(Z, (B, L, G, m)), (0, 2, 1, 3))      # B,G,L,m
        Eg = nx.matmul(Zg, params["nae.W"]) + params["nae.b"]               # B,G,L,d/G
        E = nx.reshape(nx.transpose(Eg, (0, 2, 1, 3)), (B, L, cfg.d))
    else:
        E = nx.matmul(Z, params["embed.W"]) + params["embed.b"]
    if cfg.use_pn:
        E = E + Tensor._wrap(sinusoidal_pe(L, cfg.d))
    return nx.layer_norm(E, params["embed.ln.gamma"], params["embed.ln.beta"], cfg.ln_eps)


# ------------------------------------------------------------------- V-DAB

@lru_cache(maxsize=64)
def _patch_index(L_padded: int, ell: int, stride: int) -> np.ndarray:
    n = (L_padded - ell) // stride + 1
    return np.arange(n)[:, None] * stride + np.arange(ell)[None, :]


@lru_cache(maxsize=64)
def _grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    return np.broadcast_to(np.arange(h, dtype=float)[:, None], (h, w)), np.broadcast_to(
        np.arange(w, dtype=float)[None, :], (h, w))


def _attend(q: Tensor, k: Tensor, v: Tensor, scale: float) -> Tensor:
    s = nx.scale(nx.matmul(q, nx.swapaxes(k, -1, -2)), 1.0 / scale)
    return nx.matmul(nx.softmax(s, axis=-1), v)


def vdab_forward(Ze, params, cfg: ModelConfig, trace: dict | None = None) -> Tensor:
    """Patched single-head attention whose keys/values come from a deformed patch.

    ``params`` holds this layer's V-DAB entries without prefix (``W_Q``,
    ``off.conv.w``, ...) plus ``alpha`` when it is learned.
    """
    Ze = nx.as_tensor(Ze)
    B, L, d = Ze.shape
    ell, n = cfg.ell, cfg.n_patches
    if ell > L:
        raise ConfigError(f"patch length {ell} exceeds look-back {L}")
    x = Ze
    if cfg.L_padded > L:
        x = nx.pad(x, [(0, 0), (0, cfg.L_padded - L), (0, 0)])
    if cfg.stride == ell:
        Zp = nx.reshape(x, (B, n, ell, d))
    else:
        Zp = nx.take(x, _patch_index(cfg.L_padded, ell, cfg.stride), axis=1)
    Qp = nx.matmul(Zp, params["W_Q"])

    # offset field: single-channel k x k conv over the l x d grid, then 1x1 to (drow, dcol)
    h = nx.depthwise_conv2d(nx.reshape(Qp, (B, n, ell, d, 1)), params["off.conv.w"], params["off.conv.b"])
    off = nx.matmul(h, params["off.proj.w"]) + params["off.proj.b"]          # B,n,l,d,2
    dp = _mul_alpha(params.get("alpha", cfg.alpha), nx.tanh(off))
    gr, gc = _grid(ell, d)
    d_rows = nx.reshape(nx.take(dp, [0], axis=-1), (B, n, ell, d))
    d_cols = nx.reshape(nx.take(dp, [1], axis=-1), (B, n, ell, d))
    Zd = nx.bilinear_sample(Zp, d_rows + Tensor._wrap(gr), d_cols + Tensor._wrap(gc))

    Kd = nx.matmul(Zd, params["W_K"])
    Vd = nx.matmul(Zd, params["W_V"])
    if cfg.use_pvt:
        Vd = Vd + params["P_v"]
    A = nx.matmul(_attend(Qp, Kd, Vd, math.sqrt(d)), params["W_i"])        # B,n,l,d
    A = nx.reshape(A, (B, n * ell, d))
    Zv = nx.swapaxes(nx.matmul(nx.swapaxes(A, 1, 2), params["W_v"]), 1, 2)  # B,L,d
    if trace is not None:
        trace.setdefault("vdab_offsets", []).append(dp.data.copy())
        trace.setdefault("Z_v", []).append(Zv.data.copy())
    return Zv


# ------------------------------------------------------------------- T-DAB

@lru_cache(maxsize=64)
def tdab_index(L: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Gather indices for the ``r x kappa`` interleaved layout and its inverse.

    Row j holds steps ``j, j+r, j+2r, ...``; short rows repeat their last
    available step. The inverse maps each step back from the flattened layout.
    """
    kappa = math.ceil(L / r)
    j = np.arange(r)[:, None]
    idx = j + r * np.arange(kappa)[None, :]
    last = j + r * ((L - 1 - j) // r)
    idx = np.minimum(idx, last)
    t = np.arange(L)
    inv = (t % r) * kappa + t // r
    return idx, inv


def tdab_reshape(z, r: int) -> np.ndarray:
    """Interleave a length-L sequence into an ``r x ceil(L/r)`` matrix."""
    z = np.asarray(z)
    idx, _ = tdab_index(len(z), r)
    return z[idx]


def tdab_unreshape(M, L: int) -> np.ndarray:
    M = np.asarray(M)
    r = M.shape[0]
    _, inv = tdab_index(L, r)
    return M.reshape(-1)[inv]


def tdab_forward(Ze, params, cfg: ModelConfig, r: int, trace: dict | None = None) -> Tensor:
    """G-head attention inside each interleaved patch with per-group temporal offsets."""
    Ze = nx.as_tensor(Ze)
    B, L, d = Ze.shape
    G = cfg.G
    if d % G:
        raise ConfigError(f"d={d} is not divisible by G={G}")
    w = d // G
    idx, inv = tdab_index(L, r)
    kappa = idx.shape[1]
    Zr = nx.take(Ze, idx, axis=1)                                          # B,r,kappa,d
    Qr = nx.matmul(Zr, params["U_Q"])

    # one scalar offset per (group, row position) from a depthwise k x 1 conv and a 1x1 conv
    h = nx.depthwise_conv2d(nx.reshape(Qr, (B, r, kappa, 1, d)), params["off.conv.w"], params["off.conv.b"])
    hg = nx.transpose(nx.reshape(h, (B, r, kappa, G, w)), (0, 1, 3, 2, 4))  # B,r,G,kappa,w
    off = nx.matmul(hg, params["off.proj.w"]) + params["off.proj.b"]        # B,r,G,kappa,1
    dp = _mul_alpha(params.get("alpha", cfg.alpha), nx.tanh(off))
    pos = nx.broadcast_to(nx.swapaxes(dp, -1, -2), (B, r, G, w, kappa))
    pos = pos + Tensor._wrap(np.arange(kappa, dtype=float))
    seq = nx.transpose(nx.reshape(Zr, (B, r, kappa, G, w)), (0, 1, 3, 4, 2))  # B,r,G,w,kappa
    Zs = nx.linear_sample(seq, pos)
    Zs = nx.reshape(nx.transpose(Zs, (0, 1, 4, 2, 3)), (B, r, kappa, d))

    Ks = nx.matmul(Zs, params["U_K"])
    Vs = nx.matmul(Zs, params["U_V"])
    if cfg.use_pvt:
        Vs = Vs + params["P_t"]

    def heads(x):
        return nx.transpose(nx.reshape(x, (B, r, kappa, G, w)), (0, 1, 3, 2, 4))

    Ah = _attend(heads(Qr), heads(Ks), heads(Vs), math.sqrt(w))              # B,r,G,kappa,w
    A = nx.reshape(nx.transpose(Ah, (0, 1, 3, 2, 4)), (B, r, kappa, d))
    A = nx.matmul(A, params["W_i"])
    Zt = nx.take(nx.reshape(A, (B, r * kappa, d)), inv, axis=1)
    if trace is not None:
        trace.setdefault("tdab_offsets", []).append(dp.data[..., 0].copy())
        trace.setdefault("tdab_positions", []).append(pos.data.copy())
        trace.setdefault("Z_t", []).append(Zt.data.copy())
    return Zt


# ------------------------------------------------------------------- encoder

def _mlp(x, p):
    hdn = nx.relu(nx.matmul(x, p["mlp.W1"]) + p["mlp.b1"])
    return nx.matmul(hdn, p["mlp.W2"]) + p["mlp.b2"]


def _keep(cfg: ModelConfig, train: bool, rng) -> bool:
    if not train or cfg.drop_rate == 0:
        return True
    return bool(rng.random() >= cfg.drop_rate)


def _branch(Zin, dab, p, cfg, train, rng):
    Zi = Zin + dab(Zin) if _keep(cfg, train, rng) else Zin
    if not _keep(cfg, train, rng):
        return Zin
    return Zin + _mlp(nx.layer_norm(Zi, p["ln.gamma"], p["ln.beta"], cfg.ln_eps), p)


def _strip(params, prefix):
    out = {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}
    if "alpha" in params:
        out["alpha"] = params["alpha"]
    return out


def encoder_layer(Zin, params, cfg: ModelConfig, j: int, train: bool = False,
                  rng: np.random.Generator | None = None, trace: dict | None = None) -> Tensor:
    """Two residual DAB branches (V-DAB left, T-DAB right) merged by an affine map.

    Each branch computes ``Zi = Drop(DAB(Zin)) + Zin`` and
    ``Zc = Drop(MLP(LN(Zi))) + Zin``. A dropped site contributes nothing.
    """
    Zin = nx.as_tensor(Zin)
    r = cfg.r_per_layer[j]
    pre = f"enc{j}."
    outs = []
    if cfg.use_vdab:
        vp = _strip(params, pre + "vdab.")
        outs.append(_branch(Zin, lambda z: vdab_forward(z, vp, cfg, trace),
                            _strip(params, pre + "vbranch."), cfg, train, rng))
    if cfg.use_tdab:
        tp = _strip(params, pre + "tdab.")
        outs.append(_branch(Zin, lambda z: tdab_forward(z, tp, cfg, r, trace),
                            _strip(params, pre + "tbranch."), cfg, train, rng))
    if len(outs) == 1:
        Zj = outs[0]
    else:
        Zj = nx.matmul(nx.concat(outs, axis=-1), params[pre + "merge.W"]) + params[pre + "merge.b"]
    if trace is not None:
        trace.setdefault("Z_j", []).append(Zj.data.copy())
    return Zj
