"""Trip-record ingestion: parsing, time binning, duration statistics and
sinusoidal demand fitting."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from typing import Optional
from zoneinfo import ZoneInfo

import numpy as np

from .errors import IngestError
from .model import Sinusoidal

DEFAULT_TZ = "America/New_York"

_FORMATS = (
    ("%m/%d/%Y %H:%M:%S", True),
    ("%m/%d/%Y %H:%M", False),
    ("%Y-%m-%d %H:%M:%S.%f", True),
    ("%Y-%m-%d %H:%M:%S", True),
    ("%Y-%m-%d %H:%M", False),
)


@dataclass(frozen=True)
class ColumnMap:
    start_time: str
    end_time: str
    start_station: str
    end_station: str
    duration: Optional[str] = None

    def required(self):
        return [self.start_time, self.end_time, self.start_station, self.end_station]


# public Citi Bike schema (2013-2016 exports)
CITIBIKE = ColumnMap(
    start_time="starttime",
    end_time="stoptime",
    start_station="start station id",
    end_station="end station id",
    duration="tripduration",
)


@dataclass(frozen=True)
class TripRecord:
    start_time: datetime
    end_time: datetime
    duration: float
    start_station_id: str
    end_station_id: str


@dataclass
class ParseResult:
    records: list
    skipped: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def parse_timestamp(text: str, tz: ZoneInfo):
    """Parse a timestamp; returns ``(aware datetime, has_seconds)``.  Naive input is read in ``tz``."""
    text = text.strip()
    try:
        dt = datetime.fromisoformat(text)
        has_seconds = len(text) > 16
    except ValueError:
        for fmt, has_seconds in _FORMATS:
            try:
                dt = datetime.strptime(text, fmt)
                break
            except ValueError:
                continue
        else:
            raise ValueError(f"unrecognized timestamp {text!r}")
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=tz)
    else:
        dt = dt.astimezone(tz)
    return dt, has_seconds


def parse_trips(
    path,
    columns: ColumnMap = CITIBIKE,
    tz: str = DEFAULT_TZ,
    delimiter: str = ",",
    duration_tolerance: float = 1.0,
) -> ParseResult:
    """Read trip records, skipping (and counting) malformed rows.

    A row is malformed if a timestamp or duration does not parse, the trip
    ends before it starts, or the duration column disagrees with the
    timestamps by more than ``duration_tolerance`` seconds (60 s when the
    timestamps carry only minutes).
    """
    zone = ZoneInfo(tz)
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    records = []
    skipped = 0
    with fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        missing = [c for c in columns.required() if c not in header]
        if missing:
            raise IngestError(f"{path}: missing required columns {missing}")
        use_duration = columns.duration is not None and columns.duration in header
        for row in reader:
            try:
                start, s_sec = parse_timestamp(row[columns.start_time], zone)
                end, e_sec = parse_timestamp(row[columns.end_time], zone)
                # physical seconds; same-zone subtraction would give wall-clock time across DST
                elapsed = end.timestamp() - start.timestamp()
                if elapsed < 0:
                    raise ValueError("trip ends before it starts")
                if use_duration and row[columns.duration].strip():
                    duration = float(row[columns.duration])
                    tol = duration_tolerance if (s_sec and e_sec) else max(duration_tolerance, 60.0)
                    if not math.isfinite(duration) or abs(duration - elapsed) > tol:
                        raise ValueError("duration disagrees with timestamps")
                else:
                    duration = elapsed
                s_id = row[columns.start_station].strip()
                e_id = row[columns.end_station].strip()
                if not s_id or not e_id:
                    raise ValueError("missing station id")
            except (ValueError, TypeError, AttributeError, KeyError):
                skipped += 1
                continue
            records.append(TripRecord(start, end, duration, s_id, e_id))
    return ParseResult(records, skipped)


def write_trips(path, trips, columns: ColumnMap = CITIBIKE, delimiter: str = ","):
    """Write records with ISO-8601 timestamps (offset included) so they re-parse exactly."""
    names = columns.required() + ([columns.duration] if columns.duration else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(names)
        for t in trips:
            row = [t.start_time.isoformat(sep=" "), t.end_time.isoformat(sep=" "),
                   t.start_station_id, t.end_station_id]
            if columns.duration:
                row.append(repr(float(t.duration)))
            w.writerow(row)


@dataclass
class BinnedProfile:
    bin_start_seconds: np.ndarray
    starts: np.ndarray
    ends: np.ndarray
    bin_seconds: int
    fold: Optional[str] = None
    periods: int = 1

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_start_seconds", "starts_per_bin", "ends_per_bin"])
            for b, s, e in zip(self.bin_start_seconds, self.starts, self.ends):
                w.writerow([int(b), repr(float(s)), repr(float(e))])


_FOLD_SECONDS = {"day": 86400, "week": 7 * 86400}


def _wall_seconds(dt: datetime) -> int:
    return dt.hour * 3600 + dt.minute * 60 + dt.second


def binned_rates(trips, bin_seconds: int = 300, fold: Optional[str] = None) -> BinnedProfile:
    """Count trip starts and ends per time bin.

    Without folding, bins run from local midnight of the first trip day to the
    last event.  ``fold="week"`` (or ``"day"``) maps every event onto local
    wall-clock time within the week (day) and divides by the number of
    calendar weeks (days) the data spans, all weighted equally.
    """
    trips = list(trips)
    if not trips:
        raise IngestError("no trips to bin")
    starts = [t.start_time for t in trips]
    ends = [t.end_time for t in trips]
    if fold is None:
        first = min(starts)
        origin = first.replace(hour=0, minute=0, second=0, microsecond=0)
        offs_s = np.array([(s - origin).total_seconds() for s in starts])
        offs_e = np.array([(e - origin).total_seconds() for e in ends])
        n_bins = int(max(offs_s.max(), offs_e.max()) // bin_seconds) + 1
        periods = 1
    elif fold in _FOLD_SECONDS:
        span = _FOLD_SECONDS[fold]
        if span % bin_seconds:
            raise IngestError(f"bin width must divide the {fold} length")
        if fold == "week":
            key = lambda d: d.weekday() * 86400 + _wall_seconds(d)
            anchor = lambda d: d.date() - timedelta(days=d.weekday())
            periods = (max(anchor(d) for d in starts + ends) - min(anchor(d) for d in starts + ends)).days // 7 + 1
        else:
            key = _wall_seconds
            periods = (max(d.date() for d in starts + ends) - min(d.date() for d in starts + ends)).days + 1
        offs_s = np.array([key(s) for s in starts], dtype=float)
        offs_e = np.array([key(e) for e in ends], dtype=float)
        n_bins = span // bin_seconds
    else:
        raise IngestError(f"unknown fold {fold!r}")
    cs = np.bincount((offs_s // bin_seconds).astype(int), minlength=n_bins)[:n_bins]
    ce = np.bincount((offs_e // bin_seconds).astype(int), minlength=n_bins)[:n_bins]
    return BinnedProfile(
        bin_start_seconds=bin_seconds * np.arange(n_bins),
        starts=cs / periods,
        ends=ce / periods,
        bin_seconds=bin_seconds,
        fold=fold,
        periods=periods,
    )


@dataclass
class DurationStats:
    count: int
    mean: float
    median: float
    std: float
    mu_estimate: float
    histogram_edges: list = field(repr=False, default_factory=list)
    histogram_counts: list = field(repr=False, default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def duration_stats(trips, bin_width: float = 60.0) -> DurationStats:
    """Sample mean, median, standard deviation (n - 1) and histogram of trip durations.

    ``mu_estimate`` is the reciprocal mean, the travel rate under the
    exponential-duration model.
    """
    d = np.sort(np.array([t.duration for t in trips], dtype=float))
    if d.size == 0:
        raise IngestError("no trips")
    top = bin_width * (math.floor(d[-1] / bin_width) + 1)
    edges = np.arange(0.0, top + bin_width / 2, bin_width)
    counts, _ = np.histogram(d, bins=edges)
    mean = float(math.fsum(d) / d.size)
    return DurationStats(
        count=int(d.size),
        mean=mean,
        median=float(np.median(d)),
        std=float(np.std(d, ddof=1)) if d.size > 1 else 0.0,
        mu_estimate=1.0 / mean if mean > 0 else math.inf,
        histogram_edges=edges.tolist(),
        histogram_counts=counts.tolist(),
    )


@dataclass
class SinusoidFit:
    demand: Sinusoidal
    residual_norm: float
    clamped: bool = False


def fit_sinusoid(times, values, angular_frequency: float, fit_phase: bool = True,
                 max_amplitude: float = 0.99) -> SinusoidFit:
    """Least-squares ``base * (1 + amplitude * sin(omega t + phase))`` at fixed ``omega``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    cols = [np.ones_like(t), np.sin(angular_frequency * t)]
    if fit_phase:
        cols.append(np.cos(angular_frequency * t))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    resid = float(np.linalg.norm(X @ coef - v))
    base = float(coef[0])
    if not base > 0:
        raise IngestError(f"fitted base rate {base} is not positive")
    b = float(coef[1])
    c = float(coef[2]) if fit_phase else 0.0
    amp = math.hypot(b, c) / base
    phase = math.atan2(c, b) if amp > 0 else 0.0
    if amp < 1e-12:
        amp, phase = 0.0, 0.0
    clamped = amp > max_amplitude
    if clamped:
        warnings.warn(f"fitted amplitude {amp:.3f} clamped to {max_amplitude}", stacklevel=2)
        amp = max_amplitude
    return SinusoidFit(Sinusoidal(base, amp, angular_frequency, phase), resid, clamped)


def fit_profile(profile: BinnedProfile, period_seconds: float = 86400.0,
                time_unit: float = 3600.0, which: str = "starts") -> SinusoidFit:
    """Fit a binned profile: rates per ``time_unit`` against bin-centre times in ``time_unit``."""
    centres = (profile.bin_start_seconds + profile.bin_seconds / 2) / time_unit
    counts = getattr(profile, which)
    rates = counts * (time_unit / profile.bin_seconds)
    omega = 2 * math.pi * time_unit / period_seconds
    return fit_sinusoid(centres, rates, omega)
