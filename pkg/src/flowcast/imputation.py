"""Missing-value imputation and controlled missing-value injection.

All three techniques work per station and per timestamp-of-day: statistics
are gathered across training dates at a fixed position inside the day, so a
filled 8:15 cell reflects other 8:15 readings rather than adjacent minutes.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace

import numpy as np

from .dataset import FlowDataset
from .errors import DataError

MEAN = "mean"
MEDIAN = "median"
INTERP = "interp"
METHODS = (MEAN, MEDIAN, INTERP)


@dataclass(frozen=True)
class ImputationModel:
    """Fitted per-(station, timestamp-of-day) fill rules.

    ``table`` holds the fill statistic for the mean and median methods. For
    interpolation it holds the per-station fallback used when a cell has no
    training observations; the dated series live in ``obs_dates``/``obs_values``
    indexed [station][timestamp-of-day], with dates counted from ``origin``.
    """

    method: str
    table: np.ndarray
    station_ids: tuple[str, ...]
    points_per_day: int
    origin: dt.date
    obs_dates: list | None = None
    obs_values: list | None = None


@dataclass(frozen=True)
class MissingPattern:
    """Record of one injection: which cells were forced missing and why."""

    ratio: float
    seed: int
    scope: str
    cells: np.ndarray
    day_range: tuple[int, int] | None = None

    def to_json(self) -> dict:
        payload = {
            "ratio": self.ratio,
            "seed": self.seed,
            "scope": self.scope,
            "cell_count": int(self.cells.shape[0]),
        }
        if self.day_range is not None:
            payload["day_range"] = list(self.day_range)
        return payload


def _station_statistics(train: FlowDataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-station mean and median over all observed training entries."""
    means = np.empty(train.num_stations)
    medians = np.empty(train.num_stations)
    for s in range(train.num_stations):
        values = train.flows[s][train.mask[s]]
        if values.size == 0:
            raise DataError(
                f"station {train.station_ids[s]} has no observed training values"
            )
        means[s] = values.mean()
        medians[s] = np.median(values)
    return means, medians


def fit(method: str, train: FlowDataset) -> ImputationModel:
    """Fit fill rules on the training dataset.

    Statistics gather the observed values per (station, timestamp-of-day)
    and reduce that 1-D collection directly, so they agree bit-for-bit with
    a naive per-cell reference.
    """
    if method not in METHODS:
        raise DataError(f"unknown imputation method {method!r}, expected {METHODS}")
    p = train.num_stations
    ppd = train.points_per_day
    days = train.num_days
    cube = train.flows.reshape(p, days, ppd)
    observed = train.mask.reshape(p, days, ppd)
    station_mean, station_median = _station_statistics(train)
    fallback = station_mean if method in (MEAN, INTERP) else station_median

    table = np.empty((p, ppd))
    obs_dates: list | None = [] if method == INTERP else None
    obs_values: list | None = [] if method == INTERP else None
    for s in range(p):
        if method == INTERP:
            dates_row = []
            values_row = []
        for tau in range(ppd):
            present = np.nonzero(observed[s, :, tau])[0]
            values = cube[s, present, tau]
            if method == INTERP:
                dates_row.append(present.astype(float))
                values_row.append(values.copy())
                table[s, tau] = fallback[s]
            elif values.size == 0:
                table[s, tau] = fallback[s]
            elif method == MEAN:
                table[s, tau] = np.mean(values)
            else:
                table[s, tau] = np.median(values)
        if method == INTERP:
            obs_dates.append(dates_row)
            obs_values.append(values_row)
    return ImputationModel(
        method=method,
        table=table,
        station_ids=train.station_ids,
        points_per_day=ppd,
        origin=train.start_date,
        obs_dates=obs_dates,
        obs_values=obs_values,
    )


def impute(model: ImputationModel, ds: FlowDataset) -> FlowDataset:
    """Fill every masked cell; observed cells pass through untouched."""
    if ds.station_ids != model.station_ids:
        raise DataError(
            f"dataset stations {ds.station_ids} do not match model "
            f"{model.station_ids}"
        )
    if ds.points_per_day != model.points_per_day:
        raise DataError("points-per-day mismatch between dataset and model")
    if ds.mask.all():
        return ds
    ppd = ds.points_per_day
    if model.method in (MEAN, MEDIAN):
        fill = np.tile(model.table, (1, ds.num_days))
        filled = np.where(ds.mask, ds.flows, fill)
    else:
        filled = ds.flows.copy()
        offset = (ds.start_date - model.origin).days
        for s in range(ds.num_stations):
            columns = np.nonzero(~ds.mask[s])[0]
            if columns.size == 0:
                continue
            taus = columns % ppd
            for tau in np.unique(taus):
                hit = columns[taus == tau]
                dates = model.obs_dates[s][tau]
                if dates.size == 0:
                    filled[s, hit] = model.table[s, tau]
                else:
                    filled[s, hit] = np.interp(
                        hit // ppd + offset, dates, model.obs_values[s][tau]
                    )
    return replace(ds, flows=filled, mask=np.ones_like(ds.mask))


def inject_missing(
    ds: FlowDataset,
    ratio: float,
    seed: int,
    scope: str = "all",
    day_range: tuple[int, int] | None = None,
) -> tuple[FlowDataset, MissingPattern]:
    """Force a random fraction of currently observed cells to missing.

    The count is round(ratio * cells-in-scope); sampling is uniform without
    replacement among observed cells. Scope is the whole table or, with a day
    range, a contiguous block of days (for test-set-only corruption).
    """
    if not (0.0 <= ratio <= 0.5):
        raise DataError(f"injection ratio {ratio} outside [0, 0.5]")
    if scope not in ("all", "test"):
        raise DataError(f"unknown injection scope {scope!r}")
    ppd = ds.points_per_day
    if scope == "test":
        if day_range is None:
            raise DataError("scope 'test' needs a day range")
        start, stop = day_range
        if not (0 <= start < stop <= ds.num_days):
            raise DataError(f"day range {day_range} outside 0..{ds.num_days}")
        lo, hi = start * ppd, stop * ppd
    else:
        lo, hi = 0, ds.num_timestamps

    scoped_total = ds.num_stations * (hi - lo)
    count = round(ratio * scoped_total)
    observed_flat = np.nonzero(ds.mask[:, lo:hi].reshape(-1))[0]
    if count > observed_flat.size:
        raise DataError(
            f"cannot remove {count} cells: only {observed_flat.size} observed in scope"
        )
    if count == 0:
        cells = np.empty((0, 2), dtype=int)
        return ds, MissingPattern(ratio, seed, scope, cells, day_range)

    rng = np.random.default_rng(seed)
    # Prefix of a full shuffle: the same seed at a higher ratio removes a
    # superset of cells, so evaluation-cell counts shrink monotonically.
    chosen = rng.permutation(observed_flat)[:count]
    width = hi - lo
    stations = chosen // width
    timestamps = chosen % width + lo
    flows = ds.flows.copy()
    mask = ds.mask.copy()
    flows[stations, timestamps] = np.nan
    mask[stations, timestamps] = False
    cells = np.column_stack([stations, timestamps])
    return (
        replace(ds, flows=flows, mask=mask),
        MissingPattern(ratio, seed, scope, cells, day_range),
    )
