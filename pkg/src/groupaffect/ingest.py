"""Loading, validation, and indexing of raw behavioral streams.

All channels arrive as UTF-8 CSV files with a header row. Streams are stored
column-wise as numpy arrays grouped per participant, sorted by time, with
exact duplicate rows dropped (phone logs duplicate on upload retry).
Timestamps are integer UTC seconds; local-clock rules elsewhere in the
pipeline use the cohort-wide UTC offset carried on the cohort.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from groupaffect.errors import ValidationError


class MalformedRow(ValidationError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.line = line


class SchemaMismatch(ValidationError):
    def __init__(self, path: str, missing: list[str]):
        super().__init__(f"{path}: missing column(s) {missing}")
        self.missing = missing


class RangeViolation(ValidationError):
    def __init__(self, path: str, line: int, fieldname: str, value):
        super().__init__(f"{path}:{line}: {fieldname}={value!r} out of range")
        self.fieldname = fieldname
        self.line = line


class OrphanEma(ValidationError):
    def __init__(self, participant_id: str):
        super().__init__(
            f"EMA references participant {participant_id!r} absent from every other channel"
        )
        self.participant_id = participant_id


class EmptyCohort(ValidationError):
    def __init__(self):
        super().__init__("cohort has no participant with at least one EMA response")


SMS_DIRECTIONS = ("sent", "received")
CALL_DIRECTIONS = ("in", "out")

# channel name -> (filename, header columns)
CHANNEL_SCHEMAS = {
    "gps": ("gps.csv", ["participant_id", "timestamp", "lat", "lon"]),
    "accel": ("accel.csv", ["participant_id", "timestamp", "x", "y", "z"]),
    "sms": ("sms.csv", ["participant_id", "timestamp", "direction"]),
    "calls": ("calls.csv", ["participant_id", "start", "duration", "direction"]),
    "ema": ("ema.csv", ["participant_id", "prompt_time", "negative", "positive"]),
    "sias": ("sias.csv", ["participant_id", "score"]),
    "poi": ("poi.csv", ["place_id", "lat", "lon", "radius_m", "osm_tag"]),
}


@dataclass
class GpsTrack:
    t: np.ndarray  # int64 UTC seconds, non-decreasing
    lat: np.ndarray
    lon: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class AccelTrack:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class SmsLog:
    t: np.ndarray
    direction: np.ndarray  # 0 = sent, 1 = received

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class CallLog:
    start: np.ndarray
    duration: np.ndarray  # seconds, >= 0
    direction: np.ndarray  # 0 = in, 1 = out

    def __len__(self) -> int:
        return len(self.start)


@dataclass
class EmaSeries:
    t: np.ndarray  # prompt times
    negative: np.ndarray  # 1..100
    positive: np.ndarray  # 1..100, stored but unused downstream

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class PoiRecord:
    place_id: str
    lat: float
    lon: float
    radius_m: float
    osm_tag: str


@dataclass
class PoiSnapshot:
    """Offline point-of-interest geodatabase: circular places with OSM tags."""

    records: list[PoiRecord]

    def __post_init__(self):
        self.place_ids = [r.place_id for r in self.records]
        self.lat = np.array([r.lat for r in self.records], dtype=float)
        self.lon = np.array([r.lon for r in self.records], dtype=float)
        self.radius_m = np.array([r.radius_m for r in self.records], dtype=float)
        self.tags = [r.osm_tag for r in self.records]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class LoadReport:
    duplicates: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


@dataclass
class RawCohort:
    """Validated, indexed, immutable-by-convention view of one study's data."""

    participants: tuple[str, ...]
    gps: dict[str, GpsTrack]
    accel: dict[str, AccelTrack]
    sms: dict[str, SmsLog]
    calls: dict[str, CallLog]
    ema: dict[str, EmaSeries]
    sias: dict[str, int]
    poi: PoiSnapshot
    utc_offset_hours: float = 0.0
    load_report: LoadReport = field(default_factory=LoadReport)

    def n_ema(self) -> int:
        return sum(len(s) for s in self.ema.values())

    def span(self, participant_id: str) -> tuple[int, int]:
        """(first, last) record timestamp over every channel of one participant."""
        lo, hi = [], []
        for arr in (
            self.gps[participant_id].t,
            self.accel[participant_id].t,
            self.sms[participant_id].t,
            self.calls[participant_id].start,
            self.ema[participant_id].t,
        ):
            if len(arr):
                lo.append(int(arr[0]))
                hi.append(int(arr[-1]))
        if not lo:
            raise ValidationError(f"participant {participant_id!r} has no records")
        return min(lo), max(hi)


def _parse_int(raw: str, path: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise MalformedRow(path, line, f"expected integer, got {raw!r}") from None


def _parse_float(raw: str, path: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise MalformedRow(path, line, f"expected number, got {raw!r}") from None


def _read_rows(path: Path, channel: str) -> tuple[list[tuple], int]:
    """Parse and validate one channel file into deduplicated row tuples.

    Returns (rows sorted by full tuple, number of duplicate rows dropped).
    """
    _, columns = CHANNEL_SCHEMAS[channel]
    spath = str(path)
    rows: list[tuple] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(spath, columns) from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaMismatch(spath, missing)
        picks = [header.index(c) for c in columns]
        width = len(header)
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != width:
                raise MalformedRow(spath, line, f"expected {width} fields, got {len(rec)}")
            vals = [rec[i] for i in picks]
            rows.append(_convert_row(channel, vals, spath, line))
    n = len(rows)
    rows = sorted(set(rows))
    return rows, n - len(rows)


def _convert_row(channel: str, vals: list[str], path: str, line: int) -> tuple:
    if channel == "gps":
        pid, t = vals[0], _parse_int(vals[1], path, line)
        lat = _parse_float(vals[2], path, line)
        lon = _parse_float(vals[3], path, line)
        if not -90.0 <= lat <= 90.0:
            raise RangeViolation(path, line, "lat", lat)
        if not -180.0 <= lon <= 180.0:
            raise RangeViolation(path, line, "lon", lon)
        return (pid, t, lat, lon)
    if channel == "accel":
        pid, t = vals[0], _parse_int(vals[1], path, line)
        xyz = tuple(_parse_float(v, path, line) for v in vals[2:5])
        for name, v in zip("xyz", xyz):
            if not np.isfinite(v):
                raise RangeViolation(path, line, name, v)
        return (pid, t, *xyz)
    if channel == "sms":
        pid, t, direction = vals[0], _parse_int(vals[1], path, line), vals[2]
        if direction not in SMS_DIRECTIONS:
            raise RangeViolation(path, line, "direction", direction)
        return (pid, t, SMS_DIRECTIONS.index(direction))
    if channel == "calls":
        pid, start = vals[0], _parse_int(vals[1], path, line)
        duration = _parse_float(vals[2], path, line)
        if not (np.isfinite(duration) and duration >= 0):
            raise RangeViolation(path, line, "duration", duration)
        if vals[3] not in CALL_DIRECTIONS:
            raise RangeViolation(path, line, "direction", vals[3])
        return (pid, start, duration, CALL_DIRECTIONS.index(vals[3]))
    if channel == "ema":
        pid, t = vals[0], _parse_int(vals[1], path, line)
        neg = _parse_int(vals[2], path, line)
        pos = _parse_int(vals[3], path, line)
        if not 1 <= neg <= 100:
            raise RangeViolation(path, line, "negative", neg)
        if not 1 <= pos <= 100:
            raise RangeViolation(path, line, "positive", pos)
        return (pid, t, neg, pos)
    if channel == "sias":
        pid, score = vals[0], _parse_int(vals[1], path, line)
        if score < 0:
            raise RangeViolation(path, line, "score", score)
        return (pid, score)
    if channel == "poi":
        place_id = vals[0]
        lat = _parse_float(vals[1], path, line)
        lon = _parse_float(vals[2], path, line)
        radius = _parse_float(vals[3], path, line)
        tag = vals[4]
        if not (np.isfinite(radius) and radius > 0):
            raise RangeViolation(path, line, "radius_m", radius)
        if not tag:
            raise RangeViolation(path, line, "osm_tag", tag)
        return (place_id, lat, lon, radius, tag)
    raise ValueError(f"unknown channel {channel!r}")


def load_channel(path: Path | str, channel: str) -> tuple[list[tuple], int]:
    """Load one channel file into validated row tuples sorted by (id, time).

    Returns (rows, duplicates_dropped). Row layout per channel matches
    CHANNEL_SCHEMAS with directions encoded to small ints.
    """
    if channel not in CHANNEL_SCHEMAS:
        raise ValueError(f"unknown channel {channel!r}")
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"missing file: {path}")
    return _read_rows(path, channel)


def _group_by_participant(rows: list[tuple]) -> dict[str, list[tuple]]:
    out: dict[str, list[tuple]] = {}
    for row in rows:
        out.setdefault(row[0], []).append(row[1:])
    return out


def _columns(per_pid: list[tuple], dtypes: list) -> list[np.ndarray]:
    cols = list(zip(*per_pid)) if per_pid else [[] for _ in dtypes]
    return [np.asarray(col, dtype=dt) for col, dt in zip(cols, dtypes)]


def build_cohort(
    channels: dict[str, list[tuple]],
    sias_rows: list[tuple],
    poi_rows: list[tuple],
    utc_offset_hours: float = 0.0,
    report: LoadReport | None = None,
) -> RawCohort:
    """Assemble per-participant indexed streams and verify referential integrity.

    The participant roster is everyone seen in a passive channel or the SIAS
    table; an EMA for an id outside the roster is an orphan.
    """
    sias: dict[str, int] = {}
    for pid, score in sias_rows:
        if pid in sias and sias[pid] != score:
            raise ValidationError(f"conflicting SIAS scores for participant {pid!r}")
        sias[pid] = score

    by_channel = {name: _group_by_participant(channels.get(name, [])) for name in
                  ("gps", "accel", "sms", "calls", "ema")}
    roster: set[str] = set(sias)
    for name in ("gps", "accel", "sms", "calls"):
        roster.update(by_channel[name])
    for pid in sorted(by_channel["ema"]):
        if pid not in roster:
            raise OrphanEma(pid)
    if not any(len(v) for v in by_channel["ema"].values()):
        raise EmptyCohort()

    participants = tuple(sorted(roster))
    i64, f8, i8 = np.int64, np.float64, np.int8
    gps, accel, sms, calls, ema = {}, {}, {}, {}, {}
    for pid in participants:
        t, lat, lon = _columns(by_channel["gps"].get(pid, []), [i64, f8, f8])
        gps[pid] = GpsTrack(t, lat, lon)
        t, x, y, z = _columns(by_channel["accel"].get(pid, []), [i64, f8, f8, f8])
        accel[pid] = AccelTrack(t, x, y, z)
        t, d = _columns(by_channel["sms"].get(pid, []), [i64, i8])
        sms[pid] = SmsLog(t, d)
        s, dur, d = _columns(by_channel["calls"].get(pid, []), [i64, f8, i8])
        calls[pid] = CallLog(s, dur, d)
        t, neg, pos = _columns(by_channel["ema"].get(pid, []), [i64, i64, i64])
        ema[pid] = EmaSeries(t, neg, pos)

    poi = PoiSnapshot([PoiRecord(*row) for row in poi_rows])
    return RawCohort(
        participants=participants,
        gps=gps, accel=accel, sms=sms, calls=calls, ema=ema,
        sias=sias, poi=poi,
        utc_offset_hours=utc_offset_hours,
        load_report=report or LoadReport(),
    )


def load_cohort(data_dir: Path | str, utc_offset_hours: float = 0.0) -> RawCohort:
    """Load every channel file found in data_dir and build the cohort.

    ema.csv is required; any other missing channel file is treated as an
    empty stream.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise ValidationError(f"data directory not found: {data_dir}")
    report = LoadReport()
    channels: dict[str, list[tuple]] = {}
    sias_rows: list[tuple] = []
    poi_rows: list[tuple] = []
    for channel, (filename, _) in CHANNEL_SCHEMAS.items():
        path = data_dir / filename
        if not path.exists():
            if channel == "ema":
                raise EmptyCohort()
            continue
        rows, dropped = load_channel(path, channel)
        report.duplicates[channel] = dropped
        if channel == "sias":
            sias_rows = rows
        elif channel == "poi":
            poi_rows = rows
        else:
            channels[channel] = rows
    return build_cohort(channels, sias_rows, poi_rows, utc_offset_hours, report)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_cohort(cohort: RawCohort, data_dir: Path | str) -> None:
    """Write the cohort back out as the canonical channel CSV files."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    def dump(filename: str, header: list[str], rows):
        with open(data_dir / filename, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    dump("gps.csv", CHANNEL_SCHEMAS["gps"][1],
         ((pid, t, lat, lon)
          for pid in cohort.participants
          for t, lat, lon in zip(cohort.gps[pid].t, cohort.gps[pid].lat, cohort.gps[pid].lon)))
    dump("accel.csv", CHANNEL_SCHEMAS["accel"][1],
         ((pid, t, x, y, z)
          for pid in cohort.participants
          for t, x, y, z in zip(cohort.accel[pid].t, cohort.accel[pid].x,
                                cohort.accel[pid].y, cohort.accel[pid].z)))
    dump("sms.csv", CHANNEL_SCHEMAS["sms"][1],
         ((pid, t, SMS_DIRECTIONS[d])
          for pid in cohort.participants
          for t, d in zip(cohort.sms[pid].t, cohort.sms[pid].direction)))
    dump("calls.csv", CHANNEL_SCHEMAS["calls"][1],
         ((pid, s, dur, CALL_DIRECTIONS[d])
          for pid in cohort.participants
          for s, dur, d in zip(cohort.calls[pid].start, cohort.calls[pid].duration,
                               cohort.calls[pid].direction)))
    dump("ema.csv", CHANNEL_SCHEMAS["ema"][1],
         ((pid, t, neg, pos)
          for pid in cohort.participants
          for t, neg, pos in zip(cohort.ema[pid].t, cohort.ema[pid].negative,
                                 cohort.ema[pid].positive)))
    dump("sias.csv", CHANNEL_SCHEMAS["sias"][1],
         ((pid, score) for pid, score in sorted(cohort.sias.items())))
    dump("poi.csv", CHANNEL_SCHEMAS["poi"][1],
         ((r.place_id, r.lat, r.lon, r.radius_m, r.osm_tag) for r in cohort.poi.records))
