"""Stay-point detection, semantic labeling, home inference, and timelines.

GPS fixes collapse into stay points by a greedy run scan: a run of
consecutive fixes grows while the next fix sits within `d_max_m` meters of
the running centroid, and becomes a StayPoint when it lasts at least
`t_min_s` seconds. Stays acquire semantic labels from an offline POI
snapshot plus a tag-map config; everything between stays is InTransition.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from groupaffect.errors import ValidationError
from groupaffect.ingest import GpsTrack, PoiSnapshot, RawCohort

EARTH_RADIUS_M = 6371.0088e3

LABELS = ("Home", "Education", "Leisure", "OutOfTown", "OtherHouse", "InTransition")
TAG_CATEGORIES = ("house", "education", "leisure")

# tag-map category -> label of a non-home stay at such a place
CATEGORY_LABELS = {"house": "OtherHouse", "education": "Education", "leisure": "Leisure"}

# builtin OSM-style tag map used when no tag-map file is supplied
DEFAULT_TAG_MAP = {
    "building=house": "house",
    "building=residential": "house",
    "building=apartments": "house",
    "amenity=university": "education",
    "amenity=college": "education",
    "amenity=school": "education",
    "amenity=cafe": "leisure",
    "amenity=restaurant": "leisure",
    "amenity=bar": "leisure",
    "amenity=cinema": "leisure",
    "leisure=park": "leisure",
}

NIGHT_START_S = 22 * 3600  # 22:00 local
NIGHT_END_S = 9 * 3600     # 09:00 local, next day
DAY_S = 86400


class NoHomeFound(ValidationError):
    def __init__(self, participant_id: str):
        super().__init__(f"no house-tagged night stay for participant {participant_id!r}")
        self.participant_id = participant_id


class OutOfCoverage(ValidationError):
    def __init__(self, t: float):
        super().__init__(f"t={t} outside timeline coverage")
        self.t = t


@dataclass(frozen=True)
class StayPoint:
    participant_id: str
    centroid_lat: float
    centroid_lon: float
    start: int
    end: int
    fix_count: int


@dataclass(frozen=True)
class Visit:
    label: str
    start: int
    end: int


@dataclass
class SemanticTimeline:
    participant_id: str
    visits: list[Visit]

    def coverage(self) -> tuple[int, int]:
        if not self.visits:
            raise ValidationError("empty timeline has no coverage")
        return self.visits[0].start, self.visits[-1].end


@dataclass
class MobilityResult:
    participant_id: str
    stays: list[StayPoint]
    labels: list[str]
    timeline: SemanticTimeline
    home_place: str | None
    home_coord: tuple[float, float] | None
    flags: list[str] = field(default_factory=list)


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters; accepts scalars or numpy arrays."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=float))
                              for v in (lat1, lon1, lat2, lon2))
    a = (np.sin((lat2 - lat1) / 2.0) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2)
    return EARTH_RADIUS_M * 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _haversine_scalar(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    rlat1, rlon1, rlat2, rlon2 = map(math.radians, (lat1, lon1, lat2, lon2))
    a = (math.sin((rlat2 - rlat1) / 2.0) ** 2
         + math.cos(rlat1) * math.cos(rlat2) * math.sin((rlon2 - rlon1) / 2.0) ** 2)
    return EARTH_RADIUS_M * 2.0 * math.asin(math.sqrt(min(a, 1.0)))


def detect_stay_points(
    participant_id: str,
    track: GpsTrack,
    d_max_m: float = 200.0,
    t_min_s: float = 600.0,
) -> list[StayPoint]:
    """Greedy run scan over a time-sorted track.

    From anchor i the run [i..j] grows while fix j+1 lies within d_max_m of
    the centroid of the fixes accumulated so far. A finished run becomes a
    StayPoint when it spans >= t_min_s (and so holds >= 2 fixes); otherwise
    the anchor advances by one fix and the scan restarts.
    """
    if d_max_m <= 0 or t_min_s <= 0:
        raise ValidationError("d_max_m and t_min_s must be positive")
    t, lat, lon = track.t, track.lat, track.lon
    n = len(t)
    stays: list[StayPoint] = []
    i = 0
    while i < n - 1:
        sum_lat = float(lat[i])
        sum_lon = float(lon[i])
        j = i
        while j + 1 < n:
            k = j - i + 1
            if _haversine_scalar(sum_lat / k, sum_lon / k,
                                 float(lat[j + 1]), float(lon[j + 1])) > d_max_m:
                break
            j += 1
            sum_lat += float(lat[j])
            sum_lon += float(lon[j])
        if j > i and t[j] - t[i] >= t_min_s:
            k = j - i + 1
            stays.append(StayPoint(participant_id, sum_lat / k, sum_lon / k,
                                   int(t[i]), int(t[j]), k))
            i = j + 1
        else:
            i += 1
    return stays


def parse_tag_map(path: Path | str) -> tuple[dict[str, str], list[str]]:
    """Read `osm_tag = category` lines; category must be house/education/leisure.

    Lines with unknown categories are skipped with a warning; blank lines and
    `#` comments are ignored.
    """
    tag_map: dict[str, str] = {}
    warnings: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected `osm_tag = category`")
            # the tag itself may contain '=' (e.g. building=house), so split
            # on the last one
            tag, category = (part.strip() for part in line.rsplit("=", 1))
            if category not in TAG_CATEGORIES:
                warnings.append(f"{path}:{lineno}: unknown category {category!r} ignored")
                continue
            tag_map[tag] = category
    return tag_map, warnings


def _containing_pois(poi: PoiSnapshot, lat: float, lon: float) -> tuple[np.ndarray, np.ndarray]:
    """(indices, distances) of POIs whose circle contains the point, by distance."""
    if len(poi) == 0:
        return np.empty(0, dtype=int), np.empty(0)
    d = haversine_m(lat, lon, poi.lat, poi.lon)
    inside = np.flatnonzero(d <= poi.radius_m)
    # stable tie-break: distance, then place_id
    order = sorted(inside, key=lambda i: (d[i], poi.place_ids[i]))
    idx = np.asarray(order, dtype=int)
    return idx, d[idx]


def label_stay(
    stay: StayPoint,
    poi: PoiSnapshot,
    tag_map: dict[str, str],
    home_place: str | None,
    home_coord: tuple[float, float] | None,
    out_of_town_km: float = 25.0,
    unmatched_label: str = "Leisure",
) -> str:
    """Label one stay. Precedence: Home, then OutOfTown, then nearest
    containing tag-mapped POI, then the configured catch-all."""
    if unmatched_label not in LABELS:
        raise ValidationError(f"unmatched_label {unmatched_label!r} not a semantic label")
    if home_place is not None and home_coord is not None:
        try:
            hi = poi.place_ids.index(home_place)
        except ValueError:
            raise ValidationError(f"home place {home_place!r} not in POI snapshot") from None
        if _haversine_scalar(stay.centroid_lat, stay.centroid_lon,
                             poi.lat[hi], poi.lon[hi]) <= poi.radius_m[hi]:
            return "Home"
        if _haversine_scalar(stay.centroid_lat, stay.centroid_lon,
                             home_coord[0], home_coord[1]) > out_of_town_km * 1000.0:
            return "OutOfTown"
    idx, _ = _containing_pois(poi, stay.centroid_lat, stay.centroid_lon)
    for i in idx:
        category = tag_map.get(poi.tags[i])
        if category is not None:
            return CATEGORY_LABELS[category]
    return unmatched_label


def night_overlap_s(start: float, end: float, utc_offset_hours: float = 0.0) -> float:
    """Seconds of [start, end) falling inside any nightly 22:00-09:00 local window."""

    def nightly_measure(t: float) -> float:
        # measure of the night set intersected with local [0, t)
        days, r = divmod(t, DAY_S)
        per_day = NIGHT_END_S + (DAY_S - NIGHT_START_S)
        return days * per_day + min(r, NIGHT_END_S) + max(0.0, r - NIGHT_START_S)

    s = start + utc_offset_hours * 3600.0
    e = end + utc_offset_hours * 3600.0
    if e <= s:
        return 0.0
    return nightly_measure(e) - nightly_measure(s)


def detect_home(
    participant_id: str,
    stays: list[StayPoint],
    poi: PoiSnapshot,
    tag_map: dict[str, str],
    utc_offset_hours: float = 0.0,
) -> str:
    """The house-tagged place with the most total night dwell across the study.

    Each stay contributes its 22:00-09:00 local overlap to the nearest
    house-tagged POI containing its centroid. Ties break on place_id.
    """
    totals: dict[str, float] = {}
    for stay in stays:
        idx, _ = _containing_pois(poi, stay.centroid_lat, stay.centroid_lon)
        house = next((i for i in idx if tag_map.get(poi.tags[i]) == "house"), None)
        if house is None:
            continue
        overlap = night_overlap_s(stay.start, stay.end, utc_offset_hours)
        if overlap > 0:
            pid = poi.place_ids[house]
            totals[pid] = totals.get(pid, 0.0) + overlap
    if not totals:
        raise NoHomeFound(participant_id)
    return min(totals, key=lambda p: (-totals[p], p))


def build_timeline(
    participant_id: str,
    stays: list[StayPoint],
    labels: list[str],
    t_first: int,
    t_last: int,
) -> SemanticTimeline:
    """Interleave labeled stays with InTransition visits over [t_first, t_last]."""
    if len(stays) != len(labels):
        raise ValidationError("stays and labels length mismatch")
    visits: list[Visit] = []
    cursor = int(t_first)
    for stay, label in zip(stays, labels):
        if stay.start > cursor:
            visits.append(Visit("InTransition", cursor, stay.start))
        visits.append(Visit(label, stay.start, stay.end))
        cursor = stay.end
    if t_last > cursor:
        visits.append(Visit("InTransition", cursor, int(t_last)))
    return SemanticTimeline(participant_id, visits)


def label_at(timeline: SemanticTimeline, t: float) -> str:
    """Label of the visit containing t; visits are [start, end), except that
    the final coverage instant maps to the last visit."""
    if not timeline.visits:
        raise OutOfCoverage(t)
    lo, hi = timeline.coverage()
    if t < lo or t > hi:
        raise OutOfCoverage(t)
    if t == hi:
        return timeline.visits[-1].label
    starts = [v.start for v in timeline.visits]
    return timeline.visits[bisect.bisect_right(starts, t) - 1].label


def compute_mobility(
    cohort: RawCohort,
    tag_map: dict[str, str],
    d_max_m: float = 200.0,
    t_min_s: float = 600.0,
    out_of_town_km: float = 25.0,
    unmatched_label: str = "Leisure",
) -> dict[str, MobilityResult]:
    """Run the full mobility stage for every participant.

    Participants without a detectable home are flagged and labeled without
    the Home/OutOfTown precedence rules.
    """
    results: dict[str, MobilityResult] = {}
    for pid in cohort.participants:
        track = cohort.gps[pid]
        flags: list[str] = []
        stays = detect_stay_points(pid, track, d_max_m, t_min_s)
        home_place: str | None = None
        home_coord: tuple[float, float] | None = None
        try:
            home_place = detect_home(pid, stays, cohort.poi, tag_map,
                                     cohort.utc_offset_hours)
            hi = cohort.poi.place_ids.index(home_place)
            home_coord = (float(cohort.poi.lat[hi]), float(cohort.poi.lon[hi]))
        except NoHomeFound:
            flags.append("no_home")
        labels = [label_stay(s, cohort.poi, tag_map, home_place, home_coord,
                             out_of_town_km, unmatched_label) for s in stays]
        if len(track):
            timeline = build_timeline(pid, stays, labels,
                                      int(track.t[0]), int(track.t[-1]))
        else:
            timeline = SemanticTimeline(pid, [])
            flags.append("no_gps")
        results[pid] = MobilityResult(pid, stays, labels, timeline,
                                      home_place, home_coord, flags)
    return results


def write_timelines(results: dict[str, MobilityResult], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["participant_id", "label", "start", "end"])
        for pid in sorted(results):
            for v in results[pid].timeline.visits:
                w.writerow([pid, v.label, v.start, v.end])
