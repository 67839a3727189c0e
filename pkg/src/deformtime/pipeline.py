"""Glue from a raw dataset to normalised, correlation-ordered window arrays."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import dataprep as dp
from .dataprep import DataError, SplitPlan, TimeSeriesDataset, WindowSample
from .model.config import ConfigError


@dataclass
class DataConfig:
    csv: str | None = None
    target_column: str = "y"
    synthetic: dict | None = None          # SyntheticSpec fields, used when csv is None
    val_frac: float = 0.15
    test_frac: float = 0.15
    season_boundaries: list[int] | None = None
    onset_threshold: float = 0.0
    tau: float | None = None                # feature selection threshold; None keeps all
    rank_absolute: bool = False

    def __post_init__(self):
        if self.csv is None and self.synthetic is None:
            self.synthetic = {}
        if not (0 < self.val_frac < 1 and 0 < self.test_frac < 1 and self.val_frac + self.test_frac < 1):
            raise ConfigError("val_frac and test_frac must be in (0, 1) and sum below 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Prepared:
    ds: TimeSeriesDataset          # normalised and reordered
    plan: SplitPlan
    train: list[WindowSample]
    val: list[WindowSample]
    test: list[WindowSample]
    order: list[str] = field(default_factory=list)

    def arrays(self, split: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return dp.stack_windows(getattr(self, split))


def load_dataset(cfg: DataConfig) -> TimeSeriesDataset:
    if cfg.csv is not None:
        return dp.load_csv(cfg.csv, cfg.target_column)
    try:
        spec = dp.SyntheticSpec(**cfg.synthetic)
    except TypeError as exc:
        raise ConfigError(f"bad synthetic spec: {exc}") from exc
    return dp.generate_synthetic(spec)


def plan_splits(ds: TimeSeriesDataset, cfg: DataConfig) -> SplitPlan:
    if cfg.season_boundaries:
        return dp.validation_split(ds, cfg.season_boundaries, cfg.onset_threshold)
    return dp.chronological_split(ds.T, cfg.val_frac, cfg.test_frac)


def _windows(ds, spans, L, H, delta):
    out = []
    for lo, hi in spans:
        if hi - lo >= L + delta + H:
            out.extend(dp.build_windows(ds, L, H, delta, span=(lo, hi)))
    return out


def prepare(ds: TimeSeriesDataset, cfg: DataConfig, L: int, H: int, delta: int) -> Prepared:
    """Split, rank exogenous columns on training rows, z-score on training rows, window.

    Ranking and normalisation statistics come from the training spans only,
    so the validation and test periods never leak into preprocessing.
    """
    plan = plan_splits(ds, cfg)
    train_spans = [s for s in plan.train if s[1] > s[0]]
    if not train_spans:
        raise DataError("the split plan leaves no training rows")
    longest = max(train_spans, key=lambda s: s[1] - s[0])
    if cfg.tau is not None:
        ds = dp.select_features(ds, cfg.tau, longest, cfg.rank_absolute)
    else:
        ds = ds.reorder(dp.rank_by_correlation(ds, longest, cfg.rank_absolute))
    ds = dp.standardize(ds, train_spans)
    out = Prepared(ds, plan, _windows(ds, train_spans, L, H, delta), _windows(ds, plan.validation, L, H, delta),
                   _windows(ds, [plan.test], L, H, delta), order=ds.exog_names)
    for name in ("train", "val", "test"):
        if not getattr(out, name):
            raise DataError(f"{name} split has no complete windows for L={L}, H={H}, delta={delta}")
    return out
