"""Full forward pass: embedding, hierarchical encoder, GRU decoder, temporal head."""
from __future__ import annotations

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from .blocks import encoder_layer, nae_embed
from .config import ConfigError, ModelConfig
from .params import ParameterStore, init_params


def model_forward(Z, params, cfg: ModelConfig, mode: str = "eval",
                  rng: np.random.Generator | None = None, trace: dict | None = None) -> Tensor:
    """Map windows ``[B, L, C+1]`` (or a single ``[L, C+1]``) to forecasts ``[B, H]`` (or ``[H]``).

    ``mode='train'`` enables stochastic depth and needs ``rng`` when
    ``cfg.drop_rate > 0``.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    Z = nx.as_tensor(Z)
    single = Z.ndim == 2
    if single:
        Z = nx.reshape(Z, (1, *Z.shape))
    if Z.ndim != 3 or Z.shape[1] != cfg.L or Z.shape[2] != cfg.n_vars:
        raise ConfigError(f"input shape {Z.shape} does not match L={cfg.L}, C+1={cfg.n_vars}")
    train = mode == "train"
    if train and cfg.drop_rate > 0 and rng is None:
        raise ValueError("stochastic depth in train mode needs an rng")
    B = Z.shape[0]

    x = nae_embed(Z, cfg, params)
    if trace is not None:
        trace["Z_e"] = x.data.copy()
    for j in range(cfg.n_layers):
        x = encoder_layer(x, params, cfg, j, train=train, rng=rng, trace=trace)
    for g in range(2):
        x = nx.gru_layer(x, params[f"gru{g}.w_ih"], params[f"gru{g}.w_hh"],
                         params[f"gru{g}.b_ih"], params[f"gru{g}.b_hh"])
    # project along time: [B, d, L] -> [B, d, H]
    h = nx.swapaxes(x, 1, 2)
    h = nx.leaky_relu(nx.matmul(h, params["head.W1"]) + params["head.b1"], cfg.leaky_slope)
    h = nx.matmul(h, params["head.W2"]) + params["head.b2"]
    y = nx.matmul(nx.swapaxes(h, 1, 2), params["out.W"]) + params["out.b"]   # B,H,1
    y = nx.reshape(y, (cfg.H,) if single else (B, cfg.H))
    return y


class DeformTime:
    """A configuration bound to its parameter store."""

    def __init__(self, cfg: ModelConfig, params: ParameterStore | None = None, seed: int = 0,
                 zero_offset_heads: bool = True):
        self.cfg = cfg
        if params is None:
            params = init_params(cfg, np.random.default_rng(seed), zero_offset_heads=zero_offset_heads)
        self.params = params

    def __call__(self, Z, mode: str = "eval", rng=None, trace=None) -> Tensor:
        return model_forward(Z, self.params, self.cfg, mode=mode, rng=rng, trace=trace)

    def predict(self, Z, batch_size: int = 256) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        out = []
        with nx.no_grad():
            for i in range(0, len(Z), batch_size):
                out.append(self(Z[i : i + batch_size]).data)
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.cfg.H))

    def parameters(self):
        return list(self.params.values())
