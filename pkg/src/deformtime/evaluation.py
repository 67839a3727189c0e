"""Forecast metrics, the persistence baseline and report assembly."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataprep import TimeSeriesDataset, WindowSample, stack_windows

MODES = ("at_horizon", "over_sequence")


def _pair(y_hat, y):
    a = np.asarray(y_hat, dtype=np.float64).ravel()
    b = np.asarray(y, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("metrics need at least one value")
    return a, b


def mae(y_hat, y) -> float:
    a, b = _pair(y_hat, y)
    return float(np.mean(np.abs(a - b)))


def smape(y_hat, y) -> float:
    """Symmetric MAPE in percent; a term whose forecast and truth are both 0 counts as 0."""
    a, b = _pair(y_hat, y)
    den = 0.5 * (np.abs(a) + np.abs(b))
    num = np.abs(a - b)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    return float(100.0 * terms.mean())


def pearson(y_hat, y, with_flag: bool = False):
    """Pearson correlation; constant input yields 0 (and ``flag=True`` when requested)."""
    a, b = _pair(y_hat, y)
    if a.size < 2:
        raise ValueError("pearson needs at least two values")
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        return (0.0, True) if with_flag else 0.0
    # separate roots: saa * sbb underflows for tiny-scale inputs
    rho = float(np.clip((da @ db) / (np.sqrt(saa) * np.sqrt(sbb)), -1.0, 1.0))
    return (rho, False) if with_flag else rho


def persistence_forecast(window: WindowSample, H: int | None = None) -> np.ndarray:
    """Repeat the last value of the delayed target column (position t - delta)."""
    H = len(window.targets) if H is None else H
    return np.full(H, float(window.Z[-1, -1]))


@dataclass
class ForecastReport:
    anchors: np.ndarray
    predictions: np.ndarray       # [N, H], original scale
    truths: np.ndarray            # [N, H], original scale
    horizon: int
    split: str = "test"
    metrics_at_horizon: dict = field(default_factory=dict)
    metrics_over_sequence: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def metrics(self, mode: str) -> dict:
        return self.metrics_at_horizon if mode == "at_horizon" else self.metrics_over_sequence

    def to_json_dict(self, config: dict | None = None) -> dict:
        out = {"split": self.split, "horizon": self.horizon, "n_anchors": int(len(self.anchors)),
               "metrics_at_horizon": self.metrics_at_horizon,
               "metrics_over_sequence": self.metrics_over_sequence, "flags": self.flags}
        if config is not None:
            out["config"] = config
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["anchor_t", "step", "y_true", "y_pred"])
            for t, yt, yp in zip(self.anchors, self.truths, self.predictions):
                for s in range(self.horizon):
                    w.writerow([int(t), s + 1, repr(float(yt[s])), repr(float(yp[s]))])


def score(predictions, truths) -> tuple[dict, dict, list[str]]:
    """Metrics for both conventions from aligned ``[N, H]`` arrays."""
    P = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(truths, dtype=np.float64))
    flags = []
    last_p, last_y = P[:, -1], Y[:, -1]
    if len(last_p) >= 2:
        rho, bad = pearson(last_p, last_y, with_flag=True)
    else:
        rho, bad = 0.0, True
    if bad:
        flags.append("pearson_undefined")
    at_h = {"mae": mae(last_p, last_y), "smape": smape(last_p, last_y), "pearson": rho}
    over = {"mae": mae(P, Y), "smape": smape(P, Y)}
    return at_h, over, flags


def evaluate(forecaster, samples: Sequence[WindowSample], ds: TimeSeriesDataset | None = None,
             mode: str = "at_horizon", split: str = "test") -> ForecastReport:
    """Score a model (anything with ``predict(Z)``), a per-window callable, or ``"persistence"``.

    Predictions and truths are de-normalised with ``ds.norm_stats`` before
    scoring. Both metric blocks are always filled; ``mode`` only validates
    the caller's choice and is recorded by :meth:`ForecastReport.metrics`.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not samples:
        raise ValueError("no samples to evaluate")
    Z, Y, anchors = stack_windows(samples)
    if isinstance(forecaster, str):
        if forecaster != "persistence":
            raise ValueError(f"unknown baseline {forecaster!r}")
        P = np.stack([persistence_forecast(s) for s in samples])
    elif hasattr(forecaster, "predict"):
        P = np.asarray(forecaster.predict(Z))
    else:
        P = np.stack([np.asarray(forecaster(s), dtype=np.float64) for s in samples])
    if P.shape != Y.shape:
        raise ValueError(f"forecast shape {P.shape} does not match targets {Y.shape}")
    if ds is not None:
        P, Y = ds.denormalize_target(P), ds.denormalize_target(Y)
    at_h, over, flags = score(P, Y)
    return ForecastReport(anchors, P, Y, Y.shape[1], split, at_h, over, flags)


def relative_reduction(model_mae: float, baseline_mae: float) -> float:
    """Fractional MAE reduction of the model against the baseline (0.3 means 30% lower)."""
    if baseline_mae == 0:
        return 0.0
    return 1.0 - model_mae / baseline_mae


def write_metrics(path, report: ForecastReport, config: dict | None = None, extra: dict | None = None) -> dict:
    out = report.to_json_dict(config)
    if extra:
        out.update(extra)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
    return out
