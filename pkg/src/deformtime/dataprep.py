"""Series ingestion, normalisation, correlation ranking and rolling windows."""
from __future__ import annotations

import csv
import dataclasses
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEGENERATE_STD = 1e-12


class DataError(ValueError):
    """Raised for malformed input data or infeasible data requests."""


@dataclass
class TimeSeriesDataset:
    timestamps: np.ndarray
    exog: np.ndarray
    target: np.ndarray
    column_names: list[str]
    norm_stats: dict[str, tuple[float, float]] | None = None

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.exog = np.asarray(self.exog, dtype=np.float64).reshape(len(self.timestamps), -1)
        self.target = np.asarray(self.target, dtype=np.float64)
        if not (len(self.timestamps) == len(self.exog) == len(self.target)):
            raise DataError("timestamps, exog and target lengths differ")
        if len(self.column_names) != self.exog.shape[1] + 1:
            raise DataError("column_names must list every exogenous column plus the target")

    @property
    def T(self) -> int:
        return len(self.target)

    @property
    def C(self) -> int:
        return self.exog.shape[1]

    @property
    def exog_names(self) -> list[str]:
        return list(self.column_names[:-1])

    @property
    def target_name(self) -> str:
        return self.column_names[-1]

    def matrix(self) -> np.ndarray:
        """``[exog | target]`` as a ``T x (C+1)`` array."""
        return np.column_stack([self.exog, self.target])

    def reorder(self, perm: Sequence[int]) -> "TimeSeriesDataset":
        perm = list(perm)
        names = [self.column_names[i] for i in perm] + [self.target_name]
        return dataclasses.replace(self, exog=self.exog[:, perm], column_names=names)

    def denormalize_target(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.norm_stats is None:
            return values
        mu, sd = self.norm_stats[self.target_name]
        return values * sd + mu if sd >= DEGENERATE_STD else np.full_like(values, mu)


@dataclass(frozen=True)
class WindowSample:
    Z: np.ndarray
    targets: np.ndarray
    anchor_t: int


@dataclass
class SplitPlan:
    train: list[tuple[int, int]]
    validation: list[tuple[int, int]]
    test: tuple[int, int]
    flags: list[str] = field(default_factory=list)


# ---------------------------------------------------------------- ingestion

def _parse_stamp(raw: str) -> int:
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        day = dt.date.fromisoformat(raw[:10])
    except ValueError as exc:
        raise DataError(f"unparseable timestamp {raw!r}") from exc
    return day.toordinal()


def load_csv(path, target_column: str) -> TimeSeriesDataset:
    """Read a header-first CSV whose first column holds the timestamps.

    Lines starting with ``#`` are skipped. Timestamps must advance by exactly
    one step (one day for ISO dates).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if target_column not in header[1:]:
        raise DataError(f"{path}: target column {target_column!r} not in header {header}")
    stamps = np.array([_parse_stamp(r[0]) for r in body], dtype=np.int64)
    steps = np.diff(stamps)
    if (steps <= 0).any():
        raise DataError(f"{path}: timestamps must be strictly increasing")
    if (steps != 1).any():
        raise DataError(f"{path}: gap in timestamps after row {int(np.argmax(steps != 1)) + 1}")
    try:
        values = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell ({exc})") from exc
    if values.shape[1] != len(header) - 1 or not np.isfinite(values).all():
        raise DataError(f"{path}: ragged rows or missing values")
    cols = header[1:]
    ti = cols.index(target_column)
    exo_idx = [i for i in range(len(cols)) if i != ti]
    return TimeSeriesDataset(
        timestamps=stamps,
        exog=values[:, exo_idx],
        target=values[:, ti],
        column_names=[cols[i] for i in exo_idx] + [target_column],
    )


def save_csv(ds: TimeSeriesDataset, path, comment: str | None = None) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *ds.column_names])
        for t, row in zip(ds.timestamps, ds.matrix()):
            w.writerow([int(t), *(repr(float(v)) for v in row)])


def weekly_to_daily(weekly, anchor_offset: int = 3) -> np.ndarray:
    """Linearly interpolate weekly values onto days.

    Week ``i`` is placed on day ``7*i + anchor_offset``; days outside the
    anchors repeat the nearest anchor value. Returns ``7*len(weekly)`` days.
    """
    weekly = np.asarray(weekly, dtype=np.float64)
    if weekly.size < 2:
        raise DataError("weekly_to_daily needs at least two weekly points")
    if not 0 <= anchor_offset <= 6:
        raise DataError("anchor_offset must lie in [0, 6]")
    anchors = 7 * np.arange(weekly.size) + anchor_offset
    return np.interp(np.arange(7 * weekly.size), anchors, weekly)


# ---------------------------------------------------------------- normalisation

def _col_stats(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return block.mean(axis=0), block.std(axis=0)


def _apply(block, mu, sd):
    safe = np.where(sd < DEGENERATE_STD, 1.0, sd)
    return np.where(sd < DEGENERATE_STD, 0.0, (block - mu) / safe)


def standardize(ds: TimeSeriesDataset, fit_range) -> TimeSeriesDataset:
    """Z-score every column with statistics from ``fit_range`` only.

    ``fit_range`` is one ``(lo, hi)`` pair or a list of them (rows pooled).
    """
    ranges = [fit_range] if np.ndim(fit_range) == 1 else list(fit_range)
    if not ranges or any(hi <= lo for lo, hi in ranges):
        raise DataError("fit_range is empty")
    M = ds.matrix()
    mu, sd = _col_stats(np.concatenate([M[lo:hi] for lo, hi in ranges]))
    Mz = _apply(M, mu, sd)
    stats = {name: (float(m), float(s)) for name, m, s in zip(ds.column_names, mu, sd)}
    return dataclasses.replace(ds, exog=Mz[:, :-1], target=Mz[:, -1], norm_stats=stats)


def destandardize(ds: TimeSeriesDataset) -> TimeSeriesDataset:
    if ds.norm_stats is None:
        return ds
    mu = np.array([ds.norm_stats[n][0] for n in ds.column_names])
    sd = np.array([ds.norm_stats[n][1] for n in ds.column_names])
    M = ds.matrix() * np.where(sd < DEGENERATE_STD, 0.0, sd) + mu
    return dataclasses.replace(ds, exog=M[:, :-1], target=M[:, -1], norm_stats=None)


def standardize_window(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[0] < 2:
        raise DataError("window standardisation needs at least two rows")
    mu, sd = _col_stats(Z)
    return _apply(Z, mu, sd)


# ---------------------------------------------------------------- correlation

def column_correlations(ds: TimeSeriesDataset, alignment_range: tuple[int, int]) -> np.ndarray:
    """Zero-lag Pearson r of each exogenous column with the target (0 for constants)."""
    lo, hi = alignment_range
    if hi - lo < 3:
        raise DataError("alignment_range must cover at least 3 steps")
    X = ds.exog[lo:hi] - ds.exog[lo:hi].mean(axis=0)
    y = ds.target[lo:hi] - ds.target[lo:hi].mean()
    sx = np.sqrt((X * X).sum(axis=0))
    sy = np.sqrt((y * y).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (X * y[:, None]).sum(axis=0) / (sx * sy)
    r[(sx < DEGENERATE_STD) | (sy < DEGENERATE_STD)] = 0.0
    return np.clip(r, -1.0, 1.0)


def rank_by_correlation(ds: TimeSeriesDataset, alignment_range, absolute: bool = False) -> list[int]:
    """Exogenous column order by descending correlation; ties keep index order."""
    r = column_correlations(ds, alignment_range)
    key = np.abs(r) if absolute else r
    return sorted(range(ds.C), key=lambda i: (-key[i], i))


def select_features(ds: TimeSeriesDataset, tau: float, alignment_range,
                    absolute: bool = False) -> TimeSeriesDataset:
    """Keep exogenous columns with r > tau, in ranked order (target always kept)."""
    if not 0 <= tau < 1:
        raise DataError("tau must lie in [0, 1)")
    r = column_correlations(ds, alignment_range)
    keep = [i for i in rank_by_correlation(ds, alignment_range, absolute) if r[i] > tau]
    if not keep:
        raise DataError(f"no exogenous column has correlation above tau={tau}; lower tau")
    return ds.reorder(keep)


# ---------------------------------------------------------------- windows

def window_anchors(T: int, L: int, H: int, delta: int, lo: int = 0, hi: int | None = None) -> np.ndarray:
    hi = T if hi is None else hi
    first = lo + L + delta - 1
    last = hi - H - 1
    return np.arange(first, last + 1) if last >= first else np.arange(0)


def build_windows(ds: TimeSeriesDataset, L: int, H: int, delta: int,
                  span: tuple[int, int] | None = None) -> list[WindowSample]:
    """Every rolling window whose referenced indices lie inside ``span``.

    Anchor ``t`` uses exogenous rows ``t-L+1..t``, the target delayed by
    ``delta`` over ``t-delta-L+1..t-delta`` as the last column, and targets
    ``t+1..t+H``.
    """
    lo, hi = span if span is not None else (0, ds.T)
    if hi - lo < L + delta + H:
        raise DataError(f"span of {hi - lo} steps is too short for L={L}, delta={delta}, H={H}")
    out = []
    for t in window_anchors(ds.T, L, H, delta, lo, hi):
        exo = ds.exog[t - L + 1 : t + 1]
        endo = ds.target[t - delta - L + 1 : t - delta + 1]
        out.append(WindowSample(Z=np.column_stack([exo, endo]),
                                targets=ds.target[t + 1 : t + H + 1].copy(),
                                anchor_t=int(t)))
    return out


def stack_windows(samples: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Z = np.stack([s.Z for s in samples])
    Y = np.stack([s.targets for s in samples])
    anchors = np.array([s.anchor_t for s in samples], dtype=np.int64)
    return Z, Y, anchors


# ---------------------------------------------------------------- splits

def _runs_above(x: np.ndarray, thr: float, run: int) -> np.ndarray:
    """ok[i] is True when x[i:i+run] all exceed thr."""
    above = (x > thr).astype(np.int64)
    if len(x) < run:
        return np.zeros(0, dtype=bool)
    c = np.concatenate([[0], np.cumsum(above)])
    return (c[run:] - c[:-run]) == run


def find_onset(x: np.ndarray, thr: float, run: int = 14) -> int | None:
    """First index whose next ``run`` values all exceed ``thr``."""
    ok = _runs_above(x, thr, run)
    # ok[j] covers x[j:j+run]; the onset is the point just before that run
    hits = np.flatnonzero(ok[1:])
    return int(hits[0]) if hits.size else None


def find_outset(x: np.ndarray, thr: float, run: int = 14) -> int | None:
    """Last index whose preceding ``run`` values all exceed ``thr``."""
    ok = _runs_above(x, thr, run)
    hits = np.flatnonzero(ok[: len(x) - run])
    return int(hits[-1]) + run if hits.size else None


def _segment(center: int, lo: int, hi: int, length: int = 60, position: int = 30) -> tuple[int, int]:
    start = center - (position - 1)
    return max(start, lo), min(start + length, hi)


def _carve(span: tuple[int, int], holes: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    out, cur = [], span[0]
    for a, b in sorted(holes):
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if cur < span[1]:
        out.append((cur, span[1]))
    return out


def validation_split(ds: TimeSeriesDataset, season_boundaries: Sequence[int],
                     onset_threshold: float, run: int = 14) -> SplitPlan:
    """Onset / peak / outset validation segments drawn from the last three training seasons.

    ``season_boundaries`` lists season start indices plus the end of the data;
    the final season is the test period. The third-from-last training season
    supplies the outset segment, the penultimate the peak, the last the onset.
    Each event point becomes the 30th element of a 60-step segment.
    """
    b = list(season_boundaries)
    if len(b) < 5:
        raise DataError("need at least three training seasons plus a test season")
    train_span = (b[0], b[-2])
    test = (b[-2], b[-1])
    seasons = list(zip(b[:-2], b[1:-1]))
    flags: list[str] = []
    y = ds.target

    def event(kind, lo, hi):
        seg = y[lo:hi]
        if kind == "peak":
            return lo + int(np.argmax(seg))
        finder = find_onset if kind == "onset" else find_outset
        idx = finder(seg, onset_threshold, run)
        if idx is None:
            flags.append(f"{kind}_not_found_season_{lo}_{hi}")
            return (lo + hi) // 2
        return lo + idx

    segs = []
    for kind, (lo, hi) in zip(("outset", "peak", "onset"), seasons[-3:]):
        segs.append(_segment(event(kind, lo, hi), *train_span))
    return SplitPlan(train=_carve(train_span, segs), validation=segs, test=test, flags=flags)


def chronological_split(T: int, val_frac: float = 0.15, test_frac: float = 0.15) -> SplitPlan:
    n_test = int(round(T * test_frac))
    n_val = int(round(T * val_frac))
    a, b = T - n_test - n_val, T - n_test
    return SplitPlan(train=[(0, a)], validation=[(a, b)], test=(b, T))


# ---------------------------------------------------------------- synthetic data

@dataclass
class SyntheticSpec:
    T: int = 2000
    C: int = 8
    lags: list[int] | None = None
    weights: list[float] | None = None
    period: float = 0.0
    seasonal_amp: float = 0.0
    noise: float = 0.0
    seed: int = 0
    exog_period: float = 0.0
    ar_coef: float = 0.9

    def resolved_lags(self) -> list[int]:
        if self.lags is not None:
            if len(self.lags) != self.C:
                raise DataError("lags must list one lag per exogenous variable")
            return list(self.lags)
        return [int(v) for v in np.round(np.linspace(3, 14, self.C))]

    def resolved_weights(self) -> list[float]:
        if self.weights is not None:
            return list(self.weights)
        return [1.0 / self.C] * self.C


def generate_synthetic(spec: SyntheticSpec) -> TimeSeriesDataset:
    """Leading-indicator series: ``y_t = sum_i w_i x_i[t - lag_i] + s(t) + noise``.

    Each exogenous series is a unit-variance AR(1) process, optionally with a
    sinusoid of period ``exog_period`` at a random phase.
    """
    lags, wts = spec.resolved_lags(), spec.resolved_weights()
    rng = np.random.default_rng(spec.seed)
    pad_len = max(lags) if lags else 0
    n = spec.T + pad_len
    phi = spec.ar_coef
    eps = rng.normal(size=(n, spec.C)) * np.sqrt(1 - phi**2)
    X = np.empty((n, spec.C))
    X[0] = rng.normal(size=spec.C)
    for t in range(1, n):
        X[t] = phi * X[t - 1] + eps[t]
    if spec.exog_period > 0:
        phases = rng.uniform(0, 2 * np.pi, size=spec.C)
        tt = np.arange(n)[:, None] - pad_len
        X += np.sqrt(2) * np.sin(2 * np.pi * tt / spec.exog_period + phases)
    t_idx = np.arange(spec.T)
    y = np.zeros(spec.T)
    for i, (lag, w) in enumerate(zip(lags, wts)):
        y += w * X[pad_len + t_idx - lag, i]
    if spec.period > 0 and spec.seasonal_amp:
        y += spec.seasonal_amp * np.sin(2 * np.pi * t_idx / spec.period)
    if spec.noise:
        y += spec.noise * rng.normal(size=spec.T)
    names = [f"x{i}" for i in range(spec.C)] + ["y"]
    return TimeSeriesDataset(timestamps=t_idx, exog=X[pad_len:], target=y, column_names=names)
