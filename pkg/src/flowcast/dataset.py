"""Flow tables and window extraction.

A dataset is a stations-by-timestamps matrix at a fixed points-per-day
cadence, with a boolean observation mask. Window extraction produces the
three aligned input blocks (near-term, one day back, one week back) plus the
forecast target for every admissible in-day position.

CSV layout: first column an ISO-8601 timestamp, one column per station,
missing cells empty. A sidecar named ``<file>.meta.json`` carries the ordered
station list and the lane label.
"""

from __future__ import annotations

import csv
import datetime as dt
import itertools
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

POINTS_PER_DAY = 288


@dataclass(frozen=True)
class FlowDataset:
    """Immutable flow table: [p stations x T timestamps], NaN where unobserved."""

    flows: np.ndarray
    mask: np.ndarray
    station_ids: tuple[str, ...]
    start_date: dt.date
    points_per_day: int = POINTS_PER_DAY
    lane: str = "ML"

    def __post_init__(self) -> None:
        flows = np.ascontiguousarray(np.asarray(self.flows, dtype=float))
        mask = np.ascontiguousarray(np.asarray(self.mask, dtype=bool))
        if flows.ndim != 2 or mask.shape != flows.shape:
            raise DataError(
                f"flows {flows.shape} and mask {mask.shape} must be equal 2-D shapes"
            )
        if flows.shape[0] != len(self.station_ids):
            raise DataError(
                f"{flows.shape[0]} rows for {len(self.station_ids)} station ids"
            )
        if flows.shape[1] % self.points_per_day != 0:
            raise DataError(
                f"{flows.shape[1]} timestamps is not a whole number of "
                f"{self.points_per_day}-point days"
            )
        flows.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "flows", flows)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "station_ids", tuple(self.station_ids))

    @property
    def num_stations(self) -> int:
        return self.flows.shape[0]

    @property
    def num_timestamps(self) -> int:
        return self.flows.shape[1]

    @property
    def num_days(self) -> int:
        return self.flows.shape[1] // self.points_per_day

    def timestamp(self, index: int) -> dt.datetime:
        step = dt.timedelta(minutes=1440 // self.points_per_day)
        return dt.datetime.combine(self.start_date, dt.time()) + index * step


@dataclass(frozen=True)
class WindowConfig:
    """Near-term length n, horizon h, daily and weekly half-widths.

    The daily and weekly blocks have widths 2*n_d + h and 2*n_w + h; with the
    defaults all three input blocks share the near-term width n.
    """

    n: int = 21
    h: int = 9
    n_d: int = 6
    n_w: int = 6

    def __post_init__(self) -> None:
        if self.n < 1 or self.h < 1 or self.n_d < 0 or self.n_w < 0:
            raise DataError(f"invalid window config {self}")

    @property
    def daily_width(self) -> int:
        return 2 * self.n_d + self.h

    @property
    def weekly_width(self) -> int:
        return 2 * self.n_w + self.h


@dataclass(frozen=True)
class WindowSample:
    """One forecasting instance anchored at absolute timestamp t."""

    s: np.ndarray
    s_d: np.ndarray
    s_w: np.ndarray
    target: np.ndarray
    s_mask: np.ndarray
    s_d_mask: np.ndarray
    s_w_mask: np.ndarray
    target_mask: np.ndarray
    t: int


@dataclass(frozen=True)
class StandardStats:
    """Per-station standardization parameters fitted on the training days."""

    mean: np.ndarray
    std: np.ndarray
    train_days: tuple[int, int]

    def to_json(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "train_days": list(self.train_days),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "StandardStats":
        return cls(
            mean=np.asarray(payload["mean"], dtype=float),
            std=np.asarray(payload["std"], dtype=float),
            train_days=tuple(payload["train_days"]),
        )


def _sidecar_path(path: Path) -> Path:
    return Path(str(path) + ".meta.json")


def save_csv(ds: FlowDataset, path) -> None:
    """Write the table plus its sidecar; floats use shortest round-trip form."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", *ds.station_ids])
        for index in range(ds.num_timestamps):
            cells = [
                repr(float(ds.flows[s, index])) if ds.mask[s, index] else ""
                for s in range(ds.num_stations)
            ]
            writer.writerow([ds.timestamp(index).isoformat(), *cells])
    sidecar = {
        "stations": list(ds.station_ids),
        "lane": ds.lane,
        "points_per_day": ds.points_per_day,
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2))


def load_csv(path) -> FlowDataset:
    """Read a flow table; empty or NaN cells become masked-out entries."""
    path = Path(path)
    try:
        with path.open(newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path} is empty")
    header = rows[0]
    if not header or header[0] != "timestamp":
        raise DataError(f"{path} must start with a 'timestamp' column")
    station_ids = tuple(header[1:])
    if not station_ids:
        raise DataError(f"{path} has no station columns")

    points_per_day = POINTS_PER_DAY
    lane = "ML"
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"sidecar {sidecar} is not valid JSON: {exc}") from None
        lane = meta.get("lane", lane)
        points_per_day = int(meta.get("points_per_day", points_per_day))
        stations = tuple(meta.get("stations", station_ids))
        if stations != station_ids:
            raise DataError(
                f"station columns {station_ids} do not match sidecar {stations}"
            )

    body = rows[1:]
    if not body:
        raise DataError(f"{path} has no data rows")
    p = len(station_ids)
    T = len(body)
    flows = np.full((p, T), np.nan)
    mask = np.zeros((p, T), dtype=bool)
    first_stamp = None
    step = dt.timedelta(minutes=1440 // points_per_day)
    for index, row in enumerate(body):
        if len(row) != p + 1:
            raise DataError(
                f"{path} row {index + 2}: {len(row)} fields, expected {p + 1}"
            )
        try:
            stamp = dt.datetime.fromisoformat(row[0])
        except ValueError:
            raise DataError(f"{path} row {index + 2}: bad timestamp {row[0]!r}") from None
        if first_stamp is None:
            if stamp.time() != dt.time():
                raise DataError(f"{path} must start at midnight, got {stamp}")
            first_stamp = stamp
        elif stamp != first_stamp + index * step:
            raise DataError(f"{path} row {index + 2}: timestamp {stamp} out of cadence")
        for s, cell in enumerate(row[1:]):
            text = cell.strip()
            if text == "" or text.lower() == "nan":
                continue
            try:
                flows[s, index] = float(text)
            except ValueError:
                raise DataError(
                    f"{path} row {index + 2}: bad flow value {cell!r}"
                ) from None
            mask[s, index] = True
    if T % points_per_day != 0:
        raise DataError(
            f"{path}: {T} rows is not a whole number of {points_per_day}-point days"
        )
    return FlowDataset(
        flows=flows,
        mask=mask,
        station_ids=station_ids,
        start_date=first_stamp.date(),
        points_per_day=points_per_day,
        lane=lane,
    )


def clean(ds: FlowDataset) -> FlowDataset:
    """Mark observed negative readings as missing; everything else unchanged."""
    bad = ds.mask & (ds.flows < 0)
    if not bad.any():
        return ds
    return replace(ds, mask=ds.mask & ~bad)


def standardize(
    ds: FlowDataset, train_days: tuple[int, int]
) -> tuple[FlowDataset, StandardStats]:
    """Shift and scale each station using statistics from the training days.

    Uses the sample standard deviation (N-1 denominator) over observed
    training entries; the whole dataset is transformed with those statistics.
    """
    start, stop = train_days
    if not (0 <= start < stop <= ds.num_days):
        raise DataError(f"train day range {train_days} outside 0..{ds.num_days}")
    lo = start * ds.points_per_day
    hi = stop * ds.points_per_day
    mean = np.empty(ds.num_stations)
    std = np.empty(ds.num_stations)
    for s in range(ds.num_stations):
        values = ds.flows[s, lo:hi][ds.mask[s, lo:hi]]
        if values.size < 2:
            raise DataError(
                f"station {ds.station_ids[s]}: {values.size} observed training "
                "values, need at least 2 to standardize"
            )
        mean[s] = values.mean()
        std[s] = values.std(ddof=1)
        if std[s] == 0.0:
            raise DataError(f"station {ds.station_ids[s]} has zero training variance")
    stats = StandardStats(mean=mean, std=std, train_days=(start, stop))
    return apply_standardization(ds, stats), stats


def apply_standardization(ds: FlowDataset, stats: StandardStats) -> FlowDataset:
    scaled = (ds.flows - stats.mean[:, None]) / stats.std[:, None]
    return replace(ds, flows=scaled)


def destandardize(values: np.ndarray, stats: StandardStats) -> np.ndarray:
    """Map standardized station-major values back to vehicle counts."""
    shape = (stats.mean.size,) + (1,) * (values.ndim - 1)
    return values * stats.std.reshape(shape) + stats.mean.reshape(shape)


def slice_days(ds: FlowDataset, day_range: tuple[int, int]) -> FlowDataset:
    """A standalone dataset covering the given day range."""
    start, stop = day_range
    if not (0 <= start < stop <= ds.num_days):
        raise DataError(f"day range {day_range} outside 0..{ds.num_days}")
    lo = start * ds.points_per_day
    hi = stop * ds.points_per_day
    return replace(
        ds,
        flows=ds.flows[:, lo:hi].copy(),
        mask=ds.mask[:, lo:hi].copy(),
        start_date=ds.start_date + dt.timedelta(days=start),
    )


def split(
    ds: FlowDataset, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
    """Chronological day ranges (train, val, test); leftover days go to train."""
    days = ds.num_days
    if days < 10:
        raise DataError(f"need at least 10 days to split, have {days}")
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must be three numbers summing to 1: {fractions}")
    n_val = int(fractions[1] * days)
    n_test = int(fractions[2] * days)
    n_train = days - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise DataError(f"split {fractions} of {days} days leaves an empty part")
    return (0, n_train), (n_train, n_train + n_val), (n_train + n_val, days)


def window_positions(cfg: WindowConfig, points_per_day: int = POINTS_PER_DAY) -> range:
    """Admissible in-day anchor positions; every block stays inside its day."""
    lo = max(cfg.n, cfg.n_d, cfg.n_w)
    hi = points_per_day - cfg.h - max(cfg.n_d, cfg.n_w)
    return range(lo, hi + 1)


WEEK_DAYS = 7


def extract_windows(
    ds: FlowDataset,
    cfg: WindowConfig,
    day_range: tuple[int, int],
    target_from: FlowDataset | None = None,
) -> list[WindowSample]:
    """All window samples whose targets fall inside the given day range.

    Input blocks may reach back into earlier days; days lacking a full week
    of history are skipped. When ``target_from`` is given, target values and
    masks come from that aligned dataset while inputs come from ``ds``.
    """
    start, stop = day_range
    if not (0 <= start < stop <= ds.num_days):
        raise DataError(f"day range {day_range} outside 0..{ds.num_days}")
    truth = ds if target_from is None else target_from
    if truth.flows.shape != ds.flows.shape:
        raise DataError(
            f"target_from shape {truth.flows.shape} does not match {ds.flows.shape}"
        )
    ppd = ds.points_per_day
    positions = window_positions(cfg, ppd)
    if len(positions) == 0:
        raise DataError(f"no admissible positions for {cfg} at {ppd} points/day")
    day_back = ppd
    week_back = WEEK_DAYS * ppd
    samples = []
    for day in range(max(start, WEEK_DAYS), stop):
        base = day * ppd
        for pos in positions:
            t = base + pos
            t_d = t - day_back
            t_w = t - week_back
            samples.append(
                WindowSample(
                    s=ds.flows[:, t - cfg.n : t].copy(),
                    s_d=ds.flows[:, t_d - cfg.n_d : t_d + cfg.n_d + cfg.h].copy(),
                    s_w=ds.flows[:, t_w - cfg.n_w : t_w + cfg.n_w + cfg.h].copy(),
                    target=truth.flows[:, t : t + cfg.h].copy(),
                    s_mask=ds.mask[:, t - cfg.n : t].copy(),
                    s_d_mask=ds.mask[:, t_d - cfg.n_d : t_d + cfg.n_d + cfg.h].copy(),
                    s_w_mask=ds.mask[:, t_w - cfg.n_w : t_w + cfg.n_w + cfg.h].copy(),
                    target_mask=truth.mask[:, t : t + cfg.h].copy(),
                    t=t,
                )
            )
    if not samples:
        raise DataError(
            f"day range {day_range} has no day with a full week of history"
        )
    return samples


def day_batches(
    samples: Sequence[WindowSample], points_per_day: int = POINTS_PER_DAY
) -> list[list[WindowSample]]:
    """Group chronologically ordered samples into one batch per target day."""
    grouped = itertools.groupby(samples, key=lambda smp: smp.t // points_per_day)
    return [list(group) for _, group in grouped]


def stack_batch(
    batch: Sequence[WindowSample],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack a batch on a trailing axis.

    Returns (s, s_d, s_w, target, target_mask, ts) where the blocks gain a
    final batch dimension and ts lists each sample's anchor timestamp.
    """
    s = np.stack([smp.s for smp in batch], axis=-1)
    s_d = np.stack([smp.s_d for smp in batch], axis=-1)
    s_w = np.stack([smp.s_w for smp in batch], axis=-1)
    target = np.stack([smp.target for smp in batch], axis=-1)
    target_mask = np.stack([smp.target_mask for smp in batch], axis=-1)
    ts = np.array([smp.t for smp in batch], dtype=int)
    return s, s_d, s_w, target, target_mask, ts
