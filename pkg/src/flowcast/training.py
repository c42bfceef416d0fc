"""Adam optimization over day-sized batches with multi-seed experiments.

One optimizer step per day of training samples, epochs in chronological
order, validation scored every epoch, and the parameters from the best
validation epoch restored at the end. Experiments repeat the whole loop
across seeds and report mean and standard deviation per metric.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Tensor, backward, mul, sub, tensor_mean, zero_grads
from .dataset import (
    POINTS_PER_DAY,
    FlowDataset,
    StandardStats,
    WindowConfig,
    WindowSample,
    apply_standardization,
    clean,
    day_batches,
    extract_windows,
    slice_days,
    split,
    stack_batch,
    standardize,
)
from .errors import DataError, NumericError
from .evaluation import evaluate
from .hybrid import (
    ARCHITECTURES,
    Model,
    ModelSpec,
    build,
    forward_batch,
    named_parameters,
    parameters,
)
from .imputation import ImputationModel
from . import imputation


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and experiment settings."""

    lr: float = 1e-3
    l2: float = 1e-4
    max_epochs: int = 30
    runs: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.lr < 0:
            raise ValueError(f"learning rate must be nonnegative, got {self.lr}")
        if self.l2 < 0:
            raise ValueError(f"l2 factor must be nonnegative, got {self.l2}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {value}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be at least 1, got {self.max_epochs}")
        if self.runs < 1:
            raise ValueError(f"runs must be at least 1, got {self.runs}")
        if len(self.seeds) < self.runs:
            raise ValueError(
                f"need at least {self.runs} seeds for {self.runs} runs, "
                f"got {len(self.seeds)}"
            )


@dataclass(frozen=True)
class EpochEntry:
    epoch: int
    train_loss: float
    val_mae: float
    val_rmse: float


@dataclass
class TrainLog:
    """Per-epoch history plus wall time and the final parameter digest."""

    entries: list[EpochEntry] = field(default_factory=list)
    wall_time: float = 0.0
    checkpoint_id: str = ""

    @property
    def best_epoch(self) -> int:
        if not self.entries:
            raise DataError("empty training log")
        return min(self.entries, key=lambda e: e.val_mae).epoch

    def to_json_lines(self) -> str:
        lines = [
            json.dumps(
                {
                    "epoch": e.epoch,
                    "train_loss": e.train_loss,
                    "val_mae": e.val_mae,
                    "val_rmse": e.val_rmse,
                }
            )
            for e in self.entries
        ]
        lines.append(
            json.dumps(
                {"wall_time": self.wall_time, "checkpoint_id": self.checkpoint_id}
            )
        )
        return "\n".join(lines) + "\n"


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean squared error over every entry of the prediction block."""
    data = target.data if isinstance(target, Tensor) else np.asarray(target, float)
    if pred.data.shape != data.shape:
        raise ValueError(
            f"prediction shape {pred.data.shape} does not match target {data.shape}"
        )
    diff = sub(pred, Tensor(data))
    return tensor_mean(mul(diff, diff))


@dataclass
class AdamState:
    """First and second moment estimates plus the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0


def adam_init(params: Sequence[Tensor]) -> AdamState:
    return AdamState(
        m=[np.zeros_like(t.data) for t in params],
        v=[np.zeros_like(t.data) for t in params],
    )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> None:
    """One in-place Adam update; L2 regularization folds into the gradient."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ValueError("parameter, gradient, and moment counts differ")
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for i, (param, grad) in enumerate(zip(params, grads)):
        g = np.asarray(grad, dtype=float)
        if g.shape != param.data.shape:
            raise ValueError(
                f"gradient {i} has shape {g.shape}, parameter {param.data.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {i} at step {t}")
        g = g + cfg.l2 * param.data
        m, v = state.m[i], state.v[i]
        m[...] = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v[...] = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        param.data -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


def parameter_digest(model: Model) -> str:
    """Stable content hash over parameter names, shapes, and values."""
    digest = hashlib.sha256()
    for name, tensor in named_parameters(model):
        digest.update(name.encode())
        digest.update(str(tensor.data.shape).encode())
        digest.update(np.ascontiguousarray(tensor.data).tobytes())
    return digest.hexdigest()


def model_spec_for(arch: str, p: int, wcfg: WindowConfig) -> ModelSpec:
    """Resolve an architecture name into a model spec for p stations."""
    if arch not in ARCHITECTURES:
        raise DataError(
            f"unknown architecture {arch!r}; choose from "
            f"{', '.join(sorted(ARCHITECTURES))}"
        )
    if not (wcfg.n == wcfg.daily_width == wcfg.weekly_width):
        raise DataError(
            f"stream widths differ (recent {wcfg.n}, daily {wcfg.daily_width}, "
            f"weekly {wcfg.weekly_width}); the model needs equal-width streams"
        )
    return ModelSpec(topology=ARCHITECTURES[arch], p=p, n=wcfg.n, h=wcfg.h)


@dataclass(frozen=True)
class PreparedData:
    """Windowed, imputed, standardized splits of one dataset."""

    dataset: FlowDataset
    truth: FlowDataset
    stats: StandardStats
    imputer: ImputationModel
    window_cfg: WindowConfig
    ranges: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]
    train_samples: list[WindowSample]
    val_samples: list[WindowSample]
    test_samples: list[WindowSample]


def prepare_data(
    ds: FlowDataset,
    method: str = imputation.MEAN,
    wcfg: WindowConfig = WindowConfig(),
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    stats: StandardStats | None = None,
) -> PreparedData:
    """Run the full preprocessing pipeline on a raw dataset.

    Cleans, splits chronologically, fits imputation on the training days,
    fills the whole table, standardizes with training statistics (or applies
    given ones), and extracts window samples. Training targets come from the
    filled table; validation and test targets keep the original values and
    masks so scoring never trusts an imputed reading.
    """
    cleaned = clean(ds)
    ranges = split(cleaned, fractions)
    train_range, val_range, test_range = ranges
    imputer = imputation.fit(method, slice_days(cleaned, train_range))
    filled = imputation.impute(imputer, cleaned)
    if stats is None:
        filled_std, stats = standardize(filled, train_range)
    else:
        filled_std = apply_standardization(filled, stats)
    truth_std = apply_standardization(cleaned, stats)
    return PreparedData(
        dataset=filled_std,
        truth=truth_std,
        stats=stats,
        imputer=imputer,
        window_cfg=wcfg,
        ranges=ranges,
        train_samples=extract_windows(filled_std, wcfg, train_range),
        val_samples=extract_windows(filled_std, wcfg, val_range, target_from=truth_std),
        test_samples=extract_windows(
            filled_std, wcfg, test_range, target_from=truth_std
        ),
    )


def train(
    model: Model,
    train_samples: Sequence[WindowSample],
    val_samples: Sequence[WindowSample],
    cfg: TrainConfig,
    points_per_day: int = POINTS_PER_DAY,
) -> tuple[Model, TrainLog]:
    """Optimize the model in place; returns it with best-validation weights.

    Day batches run in chronological order, one Adam step each. Validation
    MAE/RMSE are logged per epoch and the parameters of the epoch with the
    lowest validation MAE are restored before returning.
    """
    if not train_samples:
        raise DataError("no training samples")
    if not val_samples:
        raise DataError("no validation samples")
    started = time.perf_counter()
    params = parameters(model)
    state = adam_init(params)
    batches = [stack_batch(b) for b in day_batches(train_samples, points_per_day)]
    log = TrainLog()
    best_mae = math.inf
    best_snapshot = None
    for epoch in range(1, cfg.max_epochs + 1):
        total = 0.0
        count = 0
        for s, s_d, s_w, target, _mask, _ts in batches:
            zero_grads(params)
            loss = mse_loss(forward_batch(model, s, s_d, s_w), target)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f"training diverged: loss {value} at epoch {epoch}")
            backward(loss)
            adam_step(params, [t.grad for t in params], state, cfg)
            size = target.shape[-1]
            total += value * size
            count += size
        report = evaluate(model, val_samples, ("overall",), points_per_day)
        entry = EpochEntry(
            epoch=epoch,
            train_loss=total / count,
            val_mae=report.mae,
            val_rmse=report.rmse,
        )
        log.entries.append(entry)
        if entry.val_mae < best_mae:
            best_mae = entry.val_mae
            best_snapshot = [t.data.copy() for t in params]
    if best_snapshot is not None:
        for tensor, saved in zip(params, best_snapshot):
            tensor.data = saved
    log.wall_time = time.perf_counter() - started
    log.checkpoint_id = parameter_digest(model)
    return model, log


@dataclass
class TrainedModel:
    """A trained model plus everything needed to reuse it on aligned data."""

    model: Model
    arch: str
    impute_method: str
    stats: StandardStats
    window_cfg: WindowConfig
    ranges: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]
    start_date: dt.date
    points_per_day: int = POINTS_PER_DAY


def evaluate_on(
    trained: TrainedModel,
    ds: FlowDataset,
    views: Sequence[str] = ("overall",),
    method: str | None = None,
    day_range: tuple[int, int] | None = None,
):
    """Score a trained model on a raw dataset, test days by default.

    Rebuilds the inference pipeline around the stored statistics: fill rules
    are fitted on the dataset's training days, inputs imputed, everything
    standardized with the checkpointed stats, and targets scored only where
    the raw dataset has observations.
    """
    fill_method = method or trained.impute_method
    cleaned = clean(ds)
    train_range, _, test_range = trained.ranges
    scored = day_range or test_range
    imputer = imputation.fit(fill_method, slice_days(cleaned, train_range))
    filled = imputation.impute(imputer, cleaned)
    filled_std = apply_standardization(filled, trained.stats)
    truth_std = apply_standardization(cleaned, trained.stats)
    samples = extract_windows(
        filled_std, trained.window_cfg, scored, target_from=truth_std
    )
    return evaluate(
        trained.model,
        samples,
        views,
        ds.points_per_day,
        start_date=ds.start_date,
        station_ids=ds.station_ids,
        metadata={"arch": trained.arch, "impute": fill_method},
    )


def train_once(
    arch: str,
    ds: FlowDataset,
    method: str,
    cfg: TrainConfig,
    wcfg: WindowConfig = WindowConfig(),
    seed: int = 0,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> tuple[TrainedModel, TrainLog, PreparedData]:
    """Prepare the dataset and train a single model from one seed."""
    prepared = prepare_data(ds, method, wcfg, fractions)
    spec = model_spec_for(arch, ds.num_stations, wcfg)
    model = build(spec, seed)
    model, log = train(
        model, prepared.train_samples, prepared.val_samples, cfg, ds.points_per_day
    )
    trained = TrainedModel(
        model=model,
        arch=arch,
        impute_method=method,
        stats=prepared.stats,
        window_cfg=wcfg,
        ranges=prepared.ranges,
        start_date=ds.start_date,
        points_per_day=ds.points_per_day,
    )
    return trained, log, prepared


@dataclass(frozen=True)
class RunResult:
    """Metrics and artifacts from one seeded training run."""

    seed: int
    val_mae: float
    val_rmse: float
    test_mae: float
    test_rmse: float
    log: TrainLog
    trained: TrainedModel


METRIC_NAMES = ("val_mae", "val_rmse", "test_mae", "test_rmse")


@dataclass(frozen=True)
class ExperimentResult:
    """Aggregated multi-seed outcome for one architecture and fill method."""

    arch: str
    impute_method: str
    runs: tuple[RunResult, ...]

    def summary(self) -> dict[str, float]:
        """Mean and population SD of each metric over the runs."""
        out = {}
        for name in METRIC_NAMES:
            values = np.array([getattr(run, name) for run in self.runs])
            out[f"{name}_mean"] = float(values.mean())
            out[f"{name}_sd"] = float(values.std(ddof=0))
        return out


def run_experiment(
    arch: str,
    ds: FlowDataset,
    method: str,
    cfg: TrainConfig = TrainConfig(),
    wcfg: WindowConfig = WindowConfig(),
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
) -> ExperimentResult:
    """Train cfg.runs independent models and aggregate their metrics."""
    prepared = prepare_data(ds, method, wcfg, fractions)
    spec = model_spec_for(arch, ds.num_stations, wcfg)
    runs = []
    for seed in cfg.seeds[: cfg.runs]:
        model = build(spec, seed)
        model, log = train(
            model, prepared.train_samples, prepared.val_samples, cfg, ds.points_per_day
        )
        val = evaluate(model, prepared.val_samples, ("overall",), ds.points_per_day)
        test = evaluate(model, prepared.test_samples, ("overall",), ds.points_per_day)
        trained = TrainedModel(
            model=model,
            arch=arch,
            impute_method=method,
            stats=prepared.stats,
            window_cfg=wcfg,
            ranges=prepared.ranges,
            start_date=ds.start_date,
            points_per_day=ds.points_per_day,
        )
        runs.append(
            RunResult(
                seed=seed,
                val_mae=val.mae,
                val_rmse=val.rmse,
                test_mae=test.mae,
                test_rmse=test.rmse,
                log=log,
                trained=trained,
            )
        )
    return ExperimentResult(arch=arch, impute_method=method, runs=tuple(runs))
