"""Closed-form multiply count for one forward pass of a single window."""
from __future__ import annotations

from .. import numerics as nx
from .config import ModelConfig


def vdab_ops(cfg: ModelConfig) -> int:
    n, l, d, k, L = cfg.n_patches, cfg.ell, cfg.d, cfg.k, cfg.L
    return n * ((k * k + 1) * l * d + 3 * l * d * d + 3 * l * l * d + n * l * d * L)


def tdab_ops(cfg: ModelConfig, r: int) -> int:
    kap, d, k = cfg.kappa(r), cfg.d, cfg.k
    return r * ((k + 1) * kap * d + 3 * kap * d * d + 3 * kap * kap * d)


def predicted_op_count(cfg: ModelConfig) -> int:
    """NAE + decoder + one encoder term per layer.

    Each encoder layer contributes ``V + T_r + 2d + 6 d^2 L`` with that
    layer's ``r``; for two layers sharing ``r`` this is ``2 (V + T + 2d + 6 d^2 L)``.
    """
    d, L = cfg.d, cfg.L
    total = (cfg.C + 1) * d * L + d
    total += 2 * d * d * L
    for r in cfg.r_per_layer:
        total += vdab_ops(cfg) + tdab_ops(cfg, r) + 2 * d + 6 * d * d * L
    return total


def measured_op_count(model, Z=None) -> int:
    """Multiplies recorded by the kernels during one single-window forward pass."""
    import numpy as np

    cfg = model.cfg
    if Z is None:
        Z = np.random.default_rng(0).normal(size=(cfg.L, cfg.n_vars))
    with nx.no_grad(), nx.count_ops() as counter:
        model(Z)
    return counter.multiply_count
