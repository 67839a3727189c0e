"""Named parameter tensors and their initialisation."""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..numerics import Tensor
from .config import ModelConfig


class ParameterStore(OrderedDict):
    """Ordered ``name -> Tensor`` map; every entry requires grad."""

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.items()}

    def zero_grad(self) -> None:
        for p in self.values():
            p.grad = None

    def n_values(self) -> int:
        return sum(p.size for p in self.values())

    def copy(self) -> "ParameterStore":
        return ParameterStore((k, Tensor(v.data, requires_grad=True, name=k)) for k, v in self.items())

    def with_prefix(self, prefix: str) -> dict[str, Tensor]:
        n = len(prefix)
        return {k[n:]: v for k, v in self.items() if k.startswith(prefix)}


def param_shapes(cfg: ModelConfig) -> "OrderedDict[str, tuple[tuple[int, ...], str, int]]":
    """``name -> (shape, init kind, fan_in)`` for ``cfg``; init kind is one of
    ``uniform``, ``zeros``, ``ones``, ``offset`` (zeroed final offset layer)."""
    d, G, k = cfg.d, cfg.G, cfg.k
    spec: "OrderedDict[str, tuple]" = OrderedDict()

    def add(name, shape, kind="uniform", fan_in=None):
        spec[name] = (tuple(shape), kind, fan_in or 1)

    if cfg.use_nae:
        m = cfg.padded_vars // G
        add("nae.W", (G, m, d // G), fan_in=m)
        add("nae.b", (G, 1, d // G), "zeros")
    else:
        add("embed.W", (cfg.n_vars, d), fan_in=cfg.n_vars)
        add("embed.b", (d,), "zeros")
    add("embed.ln.gamma", (d,), "ones")
    add("embed.ln.beta", (d,), "zeros")
    if cfg.learn_alpha:
        add("alpha", (), "alpha")

    for j, r in enumerate(cfg.r_per_layer):
        p = f"enc{j}."
        if cfg.use_vdab:
            v = p + "vdab."
            for nm in ("W_Q", "W_K", "W_V", "W_i"):
                add(v + nm, (d, d), fan_in=d)
            add(v + "W_v", (cfg.n_patches * cfg.ell, cfg.L), fan_in=cfg.n_patches * cfg.ell)
            if cfg.use_pvt:
                add(v + "P_v", (cfg.ell, d), "zeros")
            add(v + "off.conv.w", (k, k, 1), fan_in=k * k)
            add(v + "off.conv.b", (1,), "zeros")
            add(v + "off.proj.w", (1, 2), "offset", fan_in=1)
            add(v + "off.proj.b", (2,), "offset")
        if cfg.use_tdab:
            t = p + "tdab."
            for nm in ("U_Q", "U_K", "U_V", "W_i"):
                add(t + nm, (d, d), fan_in=d)
            if cfg.use_pvt:
                add(t + "P_t", (cfg.kappa(r), d), "zeros")
            add(t + "off.conv.w", (k, 1, d), fan_in=k)
            add(t + "off.conv.b", (d,), "zeros")
            add(t + "off.proj.w", (G, d // G, 1), "offset", fan_in=d // G)
            add(t + "off.proj.b", (G, 1, 1), "offset")
        for br, used in (("vbranch.", cfg.use_vdab), ("tbranch.", cfg.use_tdab)):
            if not used:
                continue
            add(p + br + "ln.gamma", (d,), "ones")
            add(p + br + "ln.beta", (d,), "zeros")
            add(p + br + "mlp.W1", (d, d), fan_in=d)
            add(p + br + "mlp.b1", (d,), "zeros")
            add(p + br + "mlp.W2", (d, d), fan_in=d)
            add(p + br + "mlp.b2", (d,), "zeros")
        if cfg.use_vdab and cfg.use_tdab:
            add(p + "merge.W", (2 * d, d), fan_in=2 * d)
            add(p + "merge.b", (d,), "zeros")

    for g in range(2):
        add(f"gru{g}.w_ih", (d, 3 * d), fan_in=d)
        add(f"gru{g}.w_hh", (d, 3 * d), fan_in=d)
        add(f"gru{g}.b_ih", (3 * d,), "zeros")
        add(f"gru{g}.b_hh", (3 * d,), "zeros")
    add("head.W1", (cfg.L, d), fan_in=cfg.L)
    add("head.b1", (d,), "zeros")
    add("head.W2", (d, cfg.H), fan_in=d)
    add("head.b2", (cfg.H,), "zeros")
    add("out.W", (d, 1), fan_in=d)
    add("out.b", (1,), "zeros")
    return spec


def init_params(cfg: ModelConfig, rng: np.random.Generator, zero_offset_heads: bool = True) -> ParameterStore:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, unit LN gains.

    The final offset layers start at zero so every deformation begins at the
    undeformed grid; pass ``zero_offset_heads=False`` to draw them like any
    other weight.
    """
    store = ParameterStore()
    for name, (shape, kind, fan_in) in param_shapes(cfg).items():
        bound = 1.0 / np.sqrt(fan_in)
        if kind == "uniform" or (kind == "offset" and not zero_offset_heads):
            val = rng.uniform(-bound, bound, size=shape)
        elif kind == "ones":
            val = np.ones(shape)
        elif kind == "alpha":
            val = np.array(float(cfg.alpha))
        else:
            val = np.zeros(shape)
        store[name] = Tensor(val, requires_grad=True, name=name)
    return store
