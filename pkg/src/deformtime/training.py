"""Adam, learning-rate schedules, early stopping, grid search and ablation factories."""
from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import numerics as nx
from .model import DeformTime, ModelConfig
from .model.checkpoint import dumps, save_checkpoint
from .model.config import ConfigError

log = logging.getLogger(__name__)

SCHEDULES = ("linear_to_zero", "halve_each_epoch")
LOSSES = ("MSE", "MAE")
DEFAULT_LR_GRID = (2e-3, 1e-3, 5e-4, 2e-4, 1e-4, 5e-5)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr0: float = 1e-3
    schedule: str = "linear_to_zero"
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 5
    loss: str = "MSE"
    seed: int = 0
    drop_rate: float | None = None     # None keeps the model's own setting
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        problems = []
        if self.lr0 <= 0:
            problems.append("lr0 must be positive")
        if self.patience < 1:
            problems.append("patience must be at least 1")
        if self.schedule not in SCHEDULES:
            problems.append(f"schedule must be one of {SCHEDULES}")
        if self.loss not in LOSSES:
            problems.append(f"loss must be one of {LOSSES}")
        if self.batch_size < 1 or self.max_epochs < 1:
            problems.append("batch_size and max_epochs must be positive")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainReport:
    train_losses: list[float]
    val_losses: list[float]
    lrs: list[float]
    best_epoch: int                 # 1-based
    best_val_loss: float
    stop_reason: str                # "patience" or "max_epochs"
    checkpoint_id: str              # sha256 of the best checkpoint bytes
    model_config: dict
    train_config: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------- optimiser

@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """Bias-corrected Adam update applied in place to ``params[name].data``.

    A missing gradient is treated as zero.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif np.shape(g) != p.data.shape:
            raise nx.ShapeError(f"gradient for {name} has shape {np.shape(g)}, expected {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate for 0-based ``epoch``."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    if cfg.schedule == "linear_to_zero":
        return cfg.lr0 * max(0.0, 1.0 - epoch / cfg.max_epochs)
    return cfg.lr0 * 0.5 ** epoch


# ---------------------------------------------------------------- training loop

def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Permutation of ``range(n)`` from a counter-based generator keyed on (seed, epoch)."""
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) | ((int(epoch) & 0xFFFFFFFFFFFFFFFF) << 64)
    return np.random.Generator(np.random.Philox(key=key)).permutation(n)


def _loss(pred, y, kind: str):
    diff = pred - y
    return nx.mean(diff * diff) if kind == "MSE" else nx.mean(nx.relu(diff) + nx.relu(-diff))


def _loss_np(pred: np.ndarray, y: np.ndarray, kind: str) -> float:
    d = pred - y
    return float(np.mean(d * d) if kind == "MSE" else np.mean(np.abs(d)))


def train(model: DeformTime, train_data, val_data, cfg: TrainConfig,
          log_path=None, trial_id: str = "0", checkpoint_path=None,
          callback: Callable[[int, float, float], None] | None = None) -> TrainReport:
    """Fit ``model`` in place and leave it holding the best-validation parameters.

    ``train_data`` and ``val_data`` are ``(Z, Y)`` pairs of stacked windows in
    normalised units. Validation loss covers every one of the H outputs.
    """
    Z, Y = (np.asarray(a, dtype=np.float64) for a in train_data[:2])
    Zv, Yv = (np.asarray(a, dtype=np.float64) for a in val_data[:2])
    if len(Z) == 0 or len(Zv) == 0:
        raise TrainingError("train and validation splits must be non-empty")
    if cfg.drop_rate is not None and cfg.drop_rate != model.cfg.drop_rate:
        model.cfg = dataclasses.replace(model.cfg, drop_rate=cfg.drop_rate)

    params = model.params
    state = AdamState()
    best = params.copy()
    best_val, best_epoch, stale = np.inf, 0, 0
    train_losses, val_losses, lrs = [], [], []
    stop_reason = "max_epochs"
    log_file = open(log_path, "a") if log_path else None
    try:
        for epoch in range(cfg.max_epochs):
            lr = lr_at(epoch, cfg)
            order = epoch_order(len(Z), cfg.seed, epoch)
            drop_rng = np.random.default_rng([cfg.seed, epoch, 1])
            total = 0.0
            for b0 in range(0, len(Z), cfg.batch_size):
                idx = order[b0 : b0 + cfg.batch_size]
                params.zero_grad()
                try:
                    loss = _loss(model(Z[idx], mode="train", rng=drop_rng), Y[idx], cfg.loss)
                    nx.backward(loss)
                except nx.NonFiniteError as exc:
                    raise TrainingError(f"non-finite values at epoch {epoch + 1}, batch {b0 // cfg.batch_size}, "
                                        f"lr={lr:g}: {exc}") from exc
                lv = loss.item()
                if not np.isfinite(lv):
                    raise TrainingError(f"loss became {lv} at epoch {epoch + 1}, batch {b0 // cfg.batch_size}, lr={lr:g}")
                total += lv * len(idx)
                adam_step(params, {k: p.grad for k, p in params.items()}, state, lr)
            tr = total / len(Z)
            va = _loss_np(model.predict(Zv), Yv, cfg.loss)
            if not np.isfinite(va):
                raise TrainingError(f"validation loss became {va} at epoch {epoch + 1}")
            train_losses.append(tr)
            val_losses.append(va)
            lrs.append(lr)
            if log_file:
                log_file.write(json.dumps({"trial_id": trial_id, "epoch": epoch + 1, "lr": lr,
                                           "train_loss": tr, "val_loss": va}) + "\n")
            log.info("trial %s epoch %d lr %.3g train %.5f val %.5f", trial_id, epoch + 1, lr, tr, va)
            if callback:
                callback(epoch + 1, tr, va)
            if va < best_val:
                best_val, best_epoch, stale = va, epoch + 1, 0
                best = params.copy()
            else:
                stale += 1
                if stale >= cfg.patience:
                    stop_reason = "patience"
                    break
    finally:
        if log_file:
            log_file.close()

    for k, p in best.items():
        params[k].data[...] = p.data
    params.zero_grad()
    meta = {"best_epoch": best_epoch, "best_val_loss": best_val, "train_config": cfg.to_dict()}
    blob = dumps(model.cfg, params, meta)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, model.cfg, params, meta)
    return TrainReport(train_losses, val_losses, lrs, best_epoch, float(best_val), stop_reason,
                       hashlib.sha256(blob).hexdigest(), model.cfg.to_dict(), cfg.to_dict())


def early_stop_epoch(val_losses, patience: int) -> tuple[int, int]:
    """Replay the stopping rule on a loss sequence: (stop epoch, best epoch), both 1-based."""
    best, best_epoch, stale = np.inf, 0, 0
    for e, v in enumerate(val_losses, start=1):
        if v < best:
            best, best_epoch, stale = v, e, 0
        else:
            stale += 1
            if stale >= patience:
                return e, best_epoch
    return len(val_losses), best_epoch


# ---------------------------------------------------------------- grid search

@dataclass
class GridResult:
    best_point: dict
    best_index: int
    trials: list        # (point, TrainReport) in grid order


def grid_points(grid: dict, budget: int | None = None) -> list[dict]:
    keys = list(grid)
    pts = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    return pts if budget is None else pts[:budget]


def split_overrides(point: dict) -> tuple[dict, dict]:
    mfields = {f.name for f in dataclasses.fields(ModelConfig)}
    tfields = {f.name for f in dataclasses.fields(TrainConfig)} - {"grid"}
    m, t = {}, {}
    for k, v in point.items():
        if k in tfields:
            t[k] = v
        elif k in mfields:
            m[k] = v
        else:
            raise ConfigError(f"grid key {k!r} is neither a model nor a training setting")
    return m, t


def grid_search(grid: dict, train_data, val_data, model_cfg: ModelConfig, train_cfg: TrainConfig,
                budget: int | None = None, model_seed: int = 0, log_path=None) -> GridResult:
    """Exhaustive (or budget-capped) search in declaration order; ties keep the earlier point."""
    pts = grid_points(grid, budget)
    if not pts:
        raise ConfigError("grid is empty")
    trials = []
    best_i, best_v = 0, np.inf
    for i, pt in enumerate(pts):
        mo, to = split_overrides(pt)
        if "alpha" in mo and "k" not in mo:
            mo["k"] = None      # let the kernel size follow the new amplitude
        mcfg = ModelConfig.from_dict({**model_cfg.to_dict(), **mo})
        tcfg = dataclasses.replace(train_cfg, **to)
        rep = train(DeformTime(mcfg, seed=model_seed), train_data, val_data, tcfg,
                    log_path=log_path, trial_id=str(i))
        trials.append((pt, rep))
        if rep.best_val_loss < best_v:
            best_i, best_v = i, rep.best_val_loss
    return GridResult(pts[best_i], best_i, trials)


# ---------------------------------------------------------------- ablation

ABLATIONS = {
    "no_vdab": {"use_vdab": False},
    "no_tdab": {"use_tdab": False},
    "no_pvt": {"use_pvt": False},
    "no_nae": {"use_nae": False},
    "no_pn": {"use_pn": False},
}


def ablate(variant: str, cfg: ModelConfig) -> Callable[..., DeformTime]:
    """Factory building models that differ from ``cfg`` by exactly one component."""
    if variant not in ABLATIONS:
        raise ConfigError(f"unknown ablation variant {variant!r}; choose from {sorted(ABLATIONS)}")
    vcfg = dataclasses.replace(cfg, **ABLATIONS[variant])

    def factory(seed: int = 0, **kw) -> DeformTime:
        return DeformTime(vcfg, seed=seed, **kw)

    factory.config = vcfg
    return factory
