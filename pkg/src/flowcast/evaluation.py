"""Error metrics, aggregation views, baselines, and robustness sweeps.

Scoring is mask-aware throughout: a target cell participates only where its
mask is set, so injected or natively missing readings are never treated as
ground truth. Buckets that end up with zero scored cells report NaN and are
flagged as undefined rather than silently contributing zeros.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import imputation
from .dataset import (
    POINTS_PER_DAY,
    WEEK_DAYS,
    FlowDataset,
    WindowConfig,
    clean,
    day_batches,
    slice_days,
    stack_batch,
)
from .errors import DataError
from .hybrid import Model, forward_batch

VIEWS = ("overall", "horizon", "timestamp", "weekday", "station")
WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")

# Ratio grid for robustness curves; 0.21 anchors the degradation readout.
DEFAULT_RATIOS = tuple(round(0.03 * i, 2) for i in range(11))
DEFAULT_INJECTION_SEEDS = (0, 1, 2, 3, 4)


def _paired(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(pred, dtype=float)
    b = np.asarray(actual, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"series shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise DataError("cannot score an empty series")
    return a, b


def mae(pred, actual) -> float:
    """Mean absolute difference over all entries."""
    a, b = _paired(pred, actual)
    return float(np.mean(np.abs(a - b)))


def rmse(pred, actual) -> float:
    """Root mean squared difference over all entries."""
    a, b = _paired(pred, actual)
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True)
class ViewMetrics:
    """Per-bucket MAE/RMSE for one aggregation view."""

    view: str
    labels: tuple
    mae: np.ndarray
    rmse: np.ndarray
    counts: np.ndarray

    @property
    def undefined(self) -> np.ndarray:
        """Buckets with no scored cells; their metrics are NaN, not zero."""
        return self.counts == 0


@dataclass(frozen=True)
class EvalReport:
    """Metrics for every requested view plus run metadata."""

    views: dict[str, ViewMetrics]
    metadata: dict = field(default_factory=dict)

    @property
    def mae(self) -> float:
        return float(self.views["overall"].mae[0])

    @property
    def rmse(self) -> float:
        return float(self.views["overall"].rmse[0])

    @property
    def cells(self) -> int:
        return int(self.views["overall"].counts[0])

    def to_json(self) -> str:
        def scrub(values: np.ndarray) -> list:
            return [None if math.isnan(v) else float(v) for v in values]

        payload = {
            "metadata": self.metadata,
            "views": {
                name: {
                    "labels": [str(label) for label in vm.labels],
                    "count": [int(c) for c in vm.counts],
                    "mae": scrub(vm.mae),
                    "rmse": scrub(vm.rmse),
                }
                for name, vm in self.views.items()
            },
        }
        return json.dumps(payload, indent=2, allow_nan=False)

    def csv_rows(self) -> list[tuple]:
        """One (view, bucket, count, mae, rmse) row per bucket; None when undefined."""
        rows = []
        for name, vm in self.views.items():
            for j, label in enumerate(vm.labels):
                count = int(vm.counts[j])
                rows.append(
                    (
                        name,
                        str(label),
                        count,
                        float(vm.mae[j]) if count else None,
                        float(vm.rmse[j]) if count else None,
                    )
                )
        return rows


def as_predictor(subject) -> Callable:
    """Adapt a model, trained bundle, or callable to the predictor protocol.

    A predictor maps batched blocks (s, s_d, s_w, ts) to a [p, h, batch]
    prediction array.
    """
    if isinstance(subject, Model):
        return lambda s, s_d, s_w, ts: forward_batch(subject, s, s_d, s_w).data
    inner = getattr(subject, "model", None)
    if isinstance(inner, Model):
        return as_predictor(inner)
    if callable(subject):
        return subject
    raise DataError(f"cannot use a {type(subject).__name__} as a predictor")


def _view_sizes(p: int, h: int, points_per_day: int) -> dict[str, int]:
    return {
        "overall": 1,
        "horizon": h,
        "timestamp": points_per_day,
        "weekday": WEEK_DAYS,
        "station": p,
    }


def _labels(view: str, p: int, h: int, points_per_day: int, station_ids) -> tuple:
    if view == "overall":
        return ("all",)
    if view == "horizon":
        return tuple(range(1, h + 1))
    if view == "timestamp":
        return tuple(range(points_per_day))
    if view == "weekday":
        return WEEKDAY_NAMES
    if station_ids is not None:
        return tuple(station_ids)
    return tuple(range(p))


def evaluate(
    subject,
    samples: Sequence,
    views: Sequence[str] = ("overall",),
    points_per_day: int = POINTS_PER_DAY,
    start_date=None,
    station_ids: Sequence[str] | None = None,
    metadata: dict | None = None,
) -> EvalReport:
    """Score a predictor over window samples, bucketed into the given views.

    The overall view is always included. Residuals enter a bucket only where
    the target mask is set; the weekday view needs the dataset start date to
    anchor day-of-week (reported Monday-first).
    """
    requested = tuple(dict.fromkeys(("overall",) + tuple(views)))
    for name in requested:
        if name not in VIEWS:
            raise DataError(f"unknown view {name!r}, expected one of {VIEWS}")
    if not samples:
        raise DataError("no samples to evaluate")
    if "weekday" in requested and start_date is None:
        raise DataError("the weekday view needs the dataset start date")
    p, h = samples[0].target.shape
    sizes = _view_sizes(p, h, points_per_day)
    abs_sums = {name: np.zeros(sizes[name]) for name in requested}
    sq_sums = {name: np.zeros(sizes[name]) for name in requested}
    counts = {name: np.zeros(sizes[name], dtype=int) for name in requested}
    predict = as_predictor(subject)

    for batch in day_batches(samples, points_per_day):
        s, s_d, s_w, target, target_mask, ts = stack_batch(batch)
        pred = np.asarray(predict(s, s_d, s_w, ts), dtype=float)
        if pred.shape != target.shape:
            raise DataError(
                f"predictor returned shape {pred.shape}, expected {target.shape}"
            )
        if not target_mask.any():
            continue
        diff = (pred - target)[target_mask]
        abs_err = np.abs(diff)
        sq_err = diff * diff
        st_idx, hz_idx, _ = np.indices(target.shape)
        times = ts[None, None, :] + hz_idx
        for name in requested:
            if name == "overall":
                idx = np.zeros(diff.size, dtype=int)
            elif name == "horizon":
                idx = hz_idx[target_mask]
            elif name == "timestamp":
                idx = (times % points_per_day)[target_mask]
            elif name == "weekday":
                days = times // points_per_day
                idx = ((days + start_date.weekday()) % WEEK_DAYS)[target_mask]
            else:
                idx = st_idx[target_mask]
            abs_sums[name] += np.bincount(idx, weights=abs_err, minlength=sizes[name])
            sq_sums[name] += np.bincount(idx, weights=sq_err, minlength=sizes[name])
            counts[name] += np.bincount(idx, minlength=sizes[name])

    out = {}
    for name in requested:
        c = counts[name]
        safe = np.maximum(c, 1)
        out[name] = ViewMetrics(
            view=name,
            labels=_labels(name, p, h, points_per_day, station_ids),
            mae=np.where(c > 0, abs_sums[name] / safe, np.nan),
            rmse=np.where(c > 0, np.sqrt(sq_sums[name] / safe), np.nan),
            counts=c,
        )
    return EvalReport(views=out, metadata=dict(metadata or {}))


def persistence_predictor(h: int) -> Callable:
    """Baseline that repeats the latest near-term reading across the horizon."""

    def predict(s, s_d, s_w, ts):
        last = s[:, -1, :]
        return np.repeat(last[:, None, :], h, axis=1)

    return predict


def historical_mean_predictor(
    ds: FlowDataset, train_range: tuple[int, int], h: int
) -> Callable:
    """Baseline that predicts the per-(station, timestamp-of-day) training mean."""
    table = imputation.fit(imputation.MEAN, slice_days(ds, train_range)).table
    ppd = ds.points_per_day

    def predict(s, s_d, s_w, ts):
        taus = (ts[None, :] + np.arange(h)[:, None]) % ppd
        return table[:, taus]

    return predict


@dataclass(frozen=True)
class SweepPoint:
    """Aggregated metrics at one injected-missing ratio."""

    ratio: float
    mae_mean: float
    mae_sd: float
    rmse_mean: float
    rmse_sd: float
    seed_mae: tuple[float, ...]
    seed_rmse: tuple[float, ...]
    seed_cells: tuple[int, ...]


@dataclass(frozen=True)
class SweepResult:
    """Robustness curve: metrics per ratio plus the 21% degradation readout."""

    method: str
    scope: str
    points: tuple[SweepPoint, ...]
    metadata: dict = field(default_factory=dict)

    def point(self, ratio: float) -> SweepPoint:
        for pt in self.points:
            if math.isclose(pt.ratio, ratio, abs_tol=1e-9):
                return pt
        raise DataError(f"ratio {ratio} not in sweep grid {self.ratios}")

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(pt.ratio for pt in self.points)

    def degradation(self, at: float = 0.21) -> float:
        """MAE at the given ratio relative to the clean-data MAE."""
        return self.point(at).mae_mean / self.point(0.0).mae_mean


def _aggregate(
    ratio: float,
    maes: Sequence[float],
    rmses: Sequence[float],
    cells: Sequence[int],
) -> SweepPoint:
    mae_arr = np.asarray(maes, dtype=float)
    rmse_arr = np.asarray(rmses, dtype=float)
    return SweepPoint(
        ratio=ratio,
        mae_mean=float(mae_arr.mean()),
        mae_sd=float(mae_arr.std(ddof=0)),
        rmse_mean=float(rmse_arr.mean()),
        rmse_sd=float(rmse_arr.std(ddof=0)),
        seed_mae=tuple(float(v) for v in mae_arr),
        seed_rmse=tuple(float(v) for v in rmse_arr),
        seed_cells=tuple(int(c) for c in cells),
    )


def _check_ratios(ratios: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(r) for r in ratios)
    if not grid or grid[0] != 0.0:
        raise DataError(f"ratio grid must start at 0, got {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DataError(f"ratio grid must be strictly ascending, got {grid}")
    return grid


def robustness_sweep(
    subject,
    dataset: FlowDataset,
    method: str,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    scope: str = "test",
    injection_seeds: Sequence[int] = DEFAULT_INJECTION_SEEDS,
    cfg=None,
    window_cfg: WindowConfig | None = None,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> SweepResult:
    """Prediction error as a function of the injected missing ratio.

    scope="test" corrupts only the test days and reuses one already-trained
    model (``subject`` must be a TrainedModel); scope="all" corrupts the whole
    table and retrains from scratch per ratio and seed, pairing each injection
    seed with the same build seed. Metrics are aggregated over the injection
    seeds; targets are scored at cells still observed after injection.
    """
    from . import training

    grid = _check_ratios(ratios)
    seeds = tuple(injection_seeds)
    if not seeds:
        raise DataError("need at least one injection seed")
    if scope not in ("test", "all"):
        raise DataError(f"unknown sweep scope {scope!r}")
    if method not in imputation.METHODS:
        raise DataError(
            f"unknown imputation method {method!r}, expected {imputation.METHODS}"
        )
    cleaned = clean(dataset)
    points = []

    if scope == "test":
        if not isinstance(subject, training.TrainedModel):
            raise DataError("scope 'test' reuses a trained model; pass a TrainedModel")
        trained = subject
        _, _, test_range = trained.ranges

        def score(injected: FlowDataset) -> tuple[float, float, int]:
            # Test-scope injection never touches the training days, so the
            # fill rules refitted inside evaluate_on match the clean ones.
            report = training.evaluate_on(trained, injected, method=method)
            return report.mae, report.rmse, report.cells

        for ratio in grid:
            if ratio == 0.0:
                one_mae, one_rmse, one_cells = score(cleaned)
                maes = [one_mae] * len(seeds)
                rmses = [one_rmse] * len(seeds)
                cell_counts = [one_cells] * len(seeds)
            else:
                maes, rmses, cell_counts = [], [], []
                for seed in seeds:
                    injected, _ = imputation.inject_missing(
                        cleaned, ratio, seed, scope="test", day_range=test_range
                    )
                    m, r, c = score(injected)
                    maes.append(m)
                    rmses.append(r)
                    cell_counts.append(c)
            points.append(_aggregate(ratio, maes, rmses, cell_counts))
        arch = trained.arch
    else:
        arch = subject.arch if isinstance(subject, training.TrainedModel) else subject
        if not isinstance(arch, str):
            raise DataError("scope 'all' needs an architecture name or TrainedModel")
        if cfg is None:
            raise DataError("scope 'all' retrains models and needs a TrainConfig")
        wcfg = window_cfg or WindowConfig()
        for ratio in grid:
            maes, rmses, cell_counts = [], [], []
            for seed in seeds:
                injected, _ = imputation.inject_missing(cleaned, ratio, seed)
                trained_r, _, prepared = training.train_once(
                    arch, injected, method, cfg, wcfg, seed=seed, fractions=fractions
                )
                report = evaluate(
                    trained_r.model,
                    prepared.test_samples,
                    ("overall",),
                    dataset.points_per_day,
                )
                maes.append(report.mae)
                rmses.append(report.rmse)
                cell_counts.append(report.cells)
            points.append(_aggregate(ratio, maes, rmses, cell_counts))

    return SweepResult(
        method=method,
        scope=scope,
        points=tuple(points),
        metadata={"arch": arch, "seeds": list(seeds)},
    )
