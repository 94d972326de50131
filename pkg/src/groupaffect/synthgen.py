"""Seeded synthetic-cohort generator with known ground truth.

Each participant follows an archetype: a daily place schedule, an hourly
activity-intensity law, per-bin SMS/call level distributions, a SIAS
score law, and a linear negative-affect function of the true per-prompt
features.  The generator therefore knows, exactly, the grouping a
perfect pipeline should recover and the function a perfect regressor
should fit, which makes it the oracle for end-to-end tests.

Design notes:
 - Activity samples are planted directly in the normalized Low/Medium/
   High bands (with two anchor minutes pinning the per-participant
   min/max), so the computed activity profile equals the planted band
   proportions.
 - SMS/call events are planted per clock-aligned bin at a drawn level,
   so computed communication profiles equal the planted level
   proportions exactly.
 - Location profiles follow from the dwell schedule; stay-point edge
   trimming moves them by well under the 0.05 verification tolerance.
 - Accelerometer output is restricted to the pre-prompt epochs (plus
   anchors); a full 1 Hz stream would dominate runtime and disk while
   adding nothing the feature stage ever reads.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .config import substream
from .errors import ValidationError
from .features import LOCATION_CLASSES, comm_counts
from .ingest import (
    AccelTrack,
    CallLog,
    EmaSeries,
    GpsTrack,
    LoadReport,
    PoiRecord,
    PoiSnapshot,
    RawCohort,
    SmsLog,
    write_cohort,
)
from .mobility import LABELS

DAY_S = 86400
GPS_STEP_S = 150
ACCEL_HZ = 1
EMA_BLOCKS = tuple((9 * 3600 + 2 * 3600 * b, 9 * 3600 + 2 * 3600 * (b + 1))
                   for b in range(6))
EPOCH_S = 3600

M_PER_DEG_LAT = 111194.92664455873  # 2 pi R / 360 on the mean-radius sphere

# normalized magnitude bands; margins keep samples clear of the 0.2/0.3
# cutoffs after min-max normalization against the planted anchors
BAND_RANGES = ((0.01, 0.18), (0.21, 0.29), (0.32, 0.99))
BAND_MEANS = tuple((lo + hi) / 2 for lo, hi in BAND_RANGES)
MAG_BASE = 0.9
MAG_SPAN = 2.0

SMS_LEVEL_COUNTS = ((0, 0), (1, 9), (10, 19), (20, 29), (30, 40))
CALL_LEVEL_COUNTS = ((0, 0), (1, 2), (3, 5), (6, 8))

PLACE_LABEL = {"home": "Home", "campus": "Education", "cafe": "Leisure",
               "friend": "OtherHouse", "far": "OutOfTown"}

TRUTH_COLUMNS = ("act_mean", "sms_count_1h", "call_count_1h",
                 *(f"loc_{name}" for name in LABELS))


class InvalidSpec(ValidationError):
    pass


@dataclass(frozen=True)
class Archetype:
    name: str
    weight: float
    # (start_s, end_s, place) rows over one day; gaps are transit
    day_plan: tuple[tuple[int, int, str], ...]
    act_range: tuple[float, float] = (0.2, 0.55)
    # band mix for the early-morning filler stream; it shapes the activity
    # profile without touching any pre-prompt feature window
    background_bands: tuple[float, float, float] = (0.35, 0.30, 0.35)
    sms_level_probs: tuple[float, ...] = (0.3, 0.4, 0.3, 0.0, 0.0)
    call_level_probs: tuple[float, ...] = (0.4, 0.4, 0.2, 0.0)
    sias_mean: float = 30.0
    sias_std: float = 4.0
    affect_intercept: float = 50.0
    w_act: float = 0.0
    w_sms: float = 0.0
    w_call: float = 0.0
    w_loc: tuple[float, ...] = (0.0,) * len(LABELS)
    noise_std: float = 5.0


@dataclass(frozen=True)
class CohortSpec:
    n_participants: int
    archetypes: tuple[Archetype, ...]
    days: int = 14
    seed: int = 0
    drop_rate: float = 0.0
    utc_offset_hours: float = 0.0
    jitter_s: int = 300


@dataclass
class EmaTruth:
    """Per-prompt true features and noise-free affect for one participant."""

    prompts: np.ndarray
    features: np.ndarray  # columns TRUTH_COLUMNS
    clean: np.ndarray


@dataclass
class GroundTruth:
    archetype_of: dict[str, int]
    archetypes: tuple[Archetype, ...]
    truth: dict[str, EmaTruth]
    intended_location: dict[str, np.ndarray]
    intended_activity: dict[str, np.ndarray]
    intended_sms: dict[str, np.ndarray]
    intended_calls: dict[str, np.ndarray]
    feature_names: tuple[str, ...] = TRUTH_COLUMNS


def _check_probs(name: str, probs, width: int) -> None:
    p = np.asarray(probs, dtype=float)
    if p.shape != (width,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidSpec(f"{name} must be {width} nonnegative "
                          f"probabilities summing to 1, got {probs}")


def _check_plan(arch: Archetype, jitter_s: int) -> None:
    plan = arch.day_plan
    if not plan:
        raise InvalidSpec(f"{arch.name}: empty day plan")
    if plan[0][0] != 0 or plan[-1][1] != DAY_S:
        raise InvalidSpec(f"{arch.name}: day plan must span 00:00 to 24:00")
    if plan[0][2] != "home" or plan[-1][2] != "home":
        raise InvalidSpec(f"{arch.name}: days must start and end at home")
    prev_end = None
    for start, end, place in plan:
        if place not in PLACE_LABEL:
            raise InvalidSpec(f"{arch.name}: unknown place {place!r}")
        if not 0 <= start < end <= DAY_S:
            raise InvalidSpec(f"{arch.name}: bad segment ({start}, {end})")
        if end - start < 2 * jitter_s + 900:
            raise InvalidSpec(f"{arch.name}: segment ({start}, {end}) too "
                              f"short for jitter {jitter_s}")
        if prev_end is not None and start - prev_end < GPS_STEP_S:
            raise InvalidSpec(f"{arch.name}: transit gap before {start} "
                              f"shorter than the GPS period")
        prev_end = end


def validate_spec(spec: CohortSpec) -> None:
    if spec.n_participants < 1:
        raise InvalidSpec(f"n_participants must be >= 1, got {spec.n_participants}")
    if spec.days < 1:
        raise InvalidSpec(f"days must be >= 1, got {spec.days}")
    if not spec.archetypes:
        raise InvalidSpec("at least one archetype is required")
    if not 0.0 <= spec.drop_rate < 1.0:
        raise InvalidSpec(f"drop_rate must be in [0, 1), got {spec.drop_rate}")
    if not 0 <= spec.jitter_s <= 600:
        raise InvalidSpec(f"jitter_s must be in [0, 600], got {spec.jitter_s}")
    weights = [a.weight for a in spec.archetypes]
    if any(w <= 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise InvalidSpec(f"archetype weights must be positive and sum to 1, "
                          f"got {weights}")
    for arch in spec.archetypes:
        _check_plan(arch, spec.jitter_s)
        _check_probs(f"{arch.name}.sms_level_probs", arch.sms_level_probs, 5)
        _check_probs(f"{arch.name}.call_level_probs", arch.call_level_probs, 4)
        _check_probs(f"{arch.name}.background_bands", arch.background_bands, 3)
        lo, hi = arch.act_range
        if not 0.15 <= lo <= hi <= 0.6:
            raise InvalidSpec(f"{arch.name}: act_range must lie in "
                              f"[0.15, 0.6], got {arch.act_range}")
        if len(arch.w_loc) != len(LABELS):
            raise InvalidSpec(f"{arch.name}: w_loc needs {len(LABELS)} entries")
        if arch.noise_std < 0:
            raise InvalidSpec(f"{arch.name}: noise_std must be >= 0")
    if _allocate(weights, spec.n_participants).min() < 1:
        raise InvalidSpec("every archetype needs at least one participant; "
                          "raise n_participants or drop the archetype")


def _allocate(weights, n: int) -> np.ndarray:
    """Largest-remainder allocation of n participants to archetypes."""
    exact = np.asarray(weights, dtype=float) * n
    base = np.floor(exact).astype(np.int64)
    order = np.argsort(-(exact - base), kind="stable")
    for i in order[: n - int(base.sum())]:
        base[i] += 1
    return base


def _poi_layout(n: int, n_arch: int) -> tuple[list[PoiRecord], dict]:
    """Participant homes on a compact grid plus shared archetype places.

    Everything except the getaway sits well inside 25 km of every home so
    only the planted far trips read as out of town.
    """
    records: list[PoiRecord] = []
    coords: dict = {}
    for i in range(n):
        lat = 47.0 + (i // 6) * 0.008
        lon = 8.0 + (i % 6) * 0.012
        pid = f"p{i:03d}"
        records.append(PoiRecord(f"home_{pid}", lat, lon, 150.0, "building=house"))
        coords[("home", pid)] = (lat, lon)
    records.append(PoiRecord("campus", 46.975, 8.030, 300.0, "amenity=university"))
    coords["campus"] = (46.975, 8.030)
    for ai in range(n_arch):
        cafe = (46.985 - 0.003 * ai, 8.010 + 0.012 * ai)
        friend = (46.962 - 0.003 * ai, 7.975 + 0.012 * ai)
        records.append(PoiRecord(f"cafe_a{ai}", *cafe, 100.0, "amenity=cafe"))
        records.append(PoiRecord(f"friend_a{ai}", *friend, 120.0, "building=house"))
        coords[("cafe", ai)] = cafe
        coords[("friend", ai)] = friend
    records.append(PoiRecord("getaway", 47.45, 8.0, 200.0, "leisure=park"))
    coords["far"] = (47.45, 8.0)
    return records, coords


def _place_coord(coords: dict, place: str, pid: str, ai: int) -> tuple[float, float]:
    if place == "home":
        return coords[("home", pid)]
    if place in ("cafe", "friend"):
        return coords[(place, ai)]
    return coords[place]


def _realize_schedule(plan, days: int, jitter_s: int, rng) -> list[tuple[int, int, str]]:
    """Stack the day template over the study, jittering interior boundaries."""
    dwells: list[tuple[int, int, str]] = []
    for d in range(days):
        base = d * DAY_S
        rows = [[base + s, base + e, place] for s, e, place in plan]
        for b in range(len(rows) - 1):
            delta = int(rng.integers(-jitter_s, jitter_s + 1)) if jitter_s else 0
            rows[b][1] += delta
            rows[b + 1][0] += delta
        dwells.extend((int(s), int(e), place) for s, e, place in rows)
    return dwells


def _gps_track(dwells, coords, pid: str, ai: int, total_s: int, rng) -> GpsTrack:
    starts = np.array([s for s, _, _ in dwells], dtype=np.int64)
    ends = np.array([e for _, e, _ in dwells], dtype=np.int64)
    lat_d = np.array([_place_coord(coords, p, pid, ai)[0] for _, _, p in dwells])
    lon_d = np.array([_place_coord(coords, p, pid, ai)[1] for _, _, p in dwells])

    t = np.arange(0, total_s + 1, GPS_STEP_S, dtype=np.int64)
    idx = np.searchsorted(starts, t, side="right") - 1
    inside = (t < ends[idx]) | (idx == len(dwells) - 1)
    nxt = np.minimum(idx + 1, len(dwells) - 1)
    with np.errstate(invalid="ignore"):
        frac = (t - ends[idx]) / np.maximum(starts[nxt] - ends[idx], 1)
    frac = np.clip(frac, 0.0, 1.0)

    lat = lat_d[idx] + frac * (lat_d[nxt] - lat_d[idx])
    lon = lon_d[idx] + frac * (lon_d[nxt] - lon_d[idx])
    noise = rng.normal(0.0, 10.0, size=(len(t), 2))
    lat_n = lat + noise[:, 0] / M_PER_DEG_LAT
    lon_n = lon + noise[:, 1] / (M_PER_DEG_LAT * np.cos(np.radians(lat)))
    lat = np.where(inside, lat_n, lat)
    lon = np.where(inside, lon_n, lon)
    return GpsTrack(t, lat, lon)


def _label_at(dwells, starts: np.ndarray, ends: np.ndarray, t: int) -> str:
    i = int(np.searchsorted(starts, t, side="right")) - 1
    if t < ends[i] or i == len(dwells) - 1:
        return PLACE_LABEL[dwells[i][2]]
    return "InTransition"


def _ema_schedule(days: int, drop_rate: float, rng) -> np.ndarray:
    prompts = []
    for d in range(days):
        for b0, b1 in EMA_BLOCKS:
            t = d * DAY_S + b0 + int(rng.integers(0, b1 - b0))
            keep = rng.random() >= drop_rate
            if keep:
                prompts.append(t)
    return np.array(prompts, dtype=np.int64)


def _plant_accel(prompts: np.ndarray, act_range, background_bands, days, rng):
    """Per-minute activity bands in the pre-prompt epochs plus anchors.

    A fixed 04:00-07:00 filler block each day carries the archetype's
    background band mix; it ends before the day-0 anchors and starts long
    before the earliest epoch, so it never reaches a feature window.
    Returns (track, u_values sorted by time, band_counts) where u is the
    planted normalized magnitude of each sample.
    """
    lo_mean, hi_mean = BAND_MEANS[0], BAND_MEANS[2]
    minute_band: dict[int, int] = {}
    for p in prompts:
        target = rng.uniform(*act_range)
        p_high = float(np.clip((target - lo_mean * 0.8 - BAND_MEANS[1] * 0.2)
                               / (hi_mean - lo_mean), 0.0, 0.8))
        first = (int(p) - EPOCH_S) // 60
        last = int(p) // 60
        draws = rng.random(last - first + 1)
        for m, r in zip(range(first, last + 1), draws):
            if m in minute_band:
                continue
            minute_band[m] = 2 if r < p_high else (1 if r < p_high + 0.2 else 0)

    bg_minutes = (np.arange(days, dtype=np.int64)[:, None] * (DAY_S // 60)
                  + np.arange(240, 420, dtype=np.int64)[None, :]).ravel()
    bg_bands = rng.choice(3, size=bg_minutes.size,
                          p=np.asarray(background_bands, dtype=float))

    minutes = np.concatenate([np.array(sorted(minute_band), dtype=np.int64),
                              bg_minutes])
    bands = np.concatenate([
        np.array([minute_band[m] for m in sorted(minute_band)], dtype=np.int64),
        bg_bands.astype(np.int64)])
    per_sample = np.repeat(bands, 60)
    lo = np.array([BAND_RANGES[b][0] for b in per_sample])
    hi = np.array([BAND_RANGES[b][1] for b in per_sample])
    u = rng.uniform(lo, hi)
    t = (minutes[:, None] * 60 + np.arange(60)[None, :]).ravel()

    # anchor minutes pin the participant min/max so normalization is the
    # identity on the planted bands; placed at 07:00 day 0, before any epoch
    anchor_t = (np.array([420, 421])[:, None] * 60 + np.arange(60)[None, :]).ravel()
    anchor_u = np.concatenate([np.zeros(60), np.ones(60)])
    t = np.concatenate([anchor_t, t])
    u = np.concatenate([anchor_u, u])
    order = np.argsort(t, kind="stable")
    t, u = t[order], u[order]

    mag = MAG_BASE + MAG_SPAN * u
    g = rng.normal(size=(len(t), 3))
    g *= (mag * np.sqrt(3.0) / np.linalg.norm(g, axis=1))[:, None]
    track = AccelTrack(t, g[:, 0], g[:, 1], g[:, 2])

    band_counts = np.bincount(per_sample, minlength=3)
    band_counts[0] += 60  # u = 0 anchor samples classify Low
    band_counts[2] += 60  # u = 1 anchor samples classify High
    return track, t, u, band_counts / band_counts.sum()


def _plant_events(n_bins: int, bin_s: int, level_probs, level_counts, rng):
    """Per-bin event counts at drawn levels; returns (times, levels)."""
    levels = rng.choice(len(level_probs), size=n_bins, p=np.asarray(level_probs))
    times: list[np.ndarray] = []
    for b, lev in enumerate(levels):
        lo, hi = level_counts[lev]
        count = int(rng.integers(lo, hi + 1)) if hi > 0 else 0
        if count:
            offs = np.sort(rng.choice(bin_s, size=count, replace=False))
            times.append(b * bin_s + offs)
    t = (np.concatenate(times) if times else np.empty(0)).astype(np.int64)
    return t, levels


def generate(spec: CohortSpec) -> tuple[RawCohort, GroundTruth]:
    """Produce the raw cohort and its ground truth, fully in memory."""
    validate_spec(spec)
    n = spec.n_participants
    counts = _allocate([a.weight for a in spec.archetypes], n)
    arch_index = np.repeat(np.arange(len(spec.archetypes)), counts)
    pids = [f"p{i:03d}" for i in range(n)]
    poi_records, coords = _poi_layout(n, len(spec.archetypes))
    total_s = spec.days * DAY_S

    gps, accel, sms, calls, ema = {}, {}, {}, {}, {}
    sias: dict[str, int] = {}
    archetype_of: dict[str, int] = {}
    truth: dict[str, EmaTruth] = {}
    int_loc, int_act, int_sms, int_calls = {}, {}, {}, {}

    for i, pid in enumerate(pids):
        ai = int(arch_index[i])
        arch = spec.archetypes[ai]
        rng = substream(spec.seed, "participant", pid)
        archetype_of[pid] = ai

        dwells = _realize_schedule(arch.day_plan, spec.days, spec.jitter_s, rng)
        starts = np.array([s for s, _, _ in dwells], dtype=np.int64)
        ends = np.array([e for _, e, _ in dwells], dtype=np.int64)
        gps[pid] = _gps_track(dwells, coords, pid, ai, total_s, rng)

        prompts = _ema_schedule(spec.days, spec.drop_rate, rng)
        track, acc_t, acc_u, act_props = _plant_accel(
            prompts, arch.act_range, arch.background_bands, spec.days, rng)
        accel[pid] = track

        sms_t, sms_levels = _plant_events(
            spec.days * 24, 3600, arch.sms_level_probs, SMS_LEVEL_COUNTS, rng)
        sms[pid] = SmsLog(sms_t, rng.integers(0, 2, size=len(sms_t)).astype(np.int8))
        call_t, call_levels = _plant_events(
            spec.days * 12, 7200, arch.call_level_probs, CALL_LEVEL_COUNTS, rng)
        call_dur = rng.integers(20, 281, size=len(call_t)).astype(np.float64)
        calls[pid] = CallLog(call_t, call_dur,
                             rng.integers(0, 2, size=len(call_t)).astype(np.int8))

        sias[pid] = int(np.clip(round(rng.normal(arch.sias_mean, arch.sias_std)),
                                0, 80))

        feats = np.zeros((len(prompts), len(TRUTH_COLUMNS)))
        for j, p in enumerate(prompts):
            w0 = np.searchsorted(acc_t, p - EPOCH_S, side="left")
            w1 = np.searchsorted(acc_t, p, side="right")
            feats[j, 0] = float(np.mean(acc_u[w0:w1]))
            n_sms, n_call = comm_counts(sms_t, call_t, call_dur, int(p))
            feats[j, 1] = n_sms
            feats[j, 2] = n_call
            feats[j, 3 + LABELS.index(_label_at(dwells, starts, ends, int(p)))] = 1.0
        clean = (arch.affect_intercept + arch.w_act * feats[:, 0]
                 + arch.w_sms * feats[:, 1] + arch.w_call * feats[:, 2]
                 + feats[:, 3:] @ np.asarray(arch.w_loc, dtype=float))
        noisy = clean + rng.normal(0.0, arch.noise_std, size=len(prompts))
        negative = np.clip(np.rint(noisy), 1, 100).astype(np.int64)
        positive = np.clip(np.rint(100.0 - clean + rng.normal(0.0, 8.0, len(prompts))),
                           1, 100).astype(np.int64)
        ema[pid] = EmaSeries(prompts, negative, positive)
        truth[pid] = EmaTruth(prompts, feats, clean)

        label_time = {name: 0.0 for name in LOCATION_CLASSES}
        for (s, e, place) in dwells:
            label_time[PLACE_LABEL[place]] += e - s
        total_dwell = sum(label_time.values())
        int_loc[pid] = np.array([label_time[c] / total_dwell
                                 for c in LOCATION_CLASSES])
        int_act[pid] = act_props
        int_sms[pid] = np.bincount(sms_levels, minlength=5) / len(sms_levels)
        int_calls[pid] = np.bincount(call_levels, minlength=4) / len(call_levels)

    cohort = RawCohort(
        participants=tuple(pids),
        gps=gps, accel=accel, sms=sms, calls=calls, ema=ema,
        sias=sias, poi=PoiSnapshot(poi_records),
        utc_offset_hours=spec.utc_offset_hours,
        load_report=LoadReport(),
    )
    ground = GroundTruth(archetype_of, spec.archetypes, truth,
                         int_loc, int_act, int_sms, int_calls)
    return cohort, ground


HOMEBODY_PLAN = ((0, 34200, "home"), (34500, 41700, "friend"),
                 (42000, 59400, "home"), (59700, 65100, "cafe"),
                 (65400, 86400, "home"))
STUDENT_PLAN = ((0, 30600, "home"), (31200, 45600, "campus"),
                (45900, 49500, "cafe"), (49800, 64200, "campus"),
                (64800, 86400, "home"))
SOCIAL_PLAN = ((0, 36000, "home"), (36300, 47100, "cafe"),
               (47400, 58200, "friend"), (58500, 69300, "cafe"),
               (69600, 86400, "home"))


def _benchmark_archetypes() -> tuple[Archetype, Archetype, Archetype]:
    """Three behavioral archetypes with opposite-sign affect laws.

    Activity intensity is drawn from the same range everywhere, so the
    hourly activity feature carries no archetype information: only a
    grouped model can attach the right sign to it.  The background band
    mixes differ instead; they shape the long-run activity profile used
    for grouping while staying outside every feature window.
    """
    homebody = Archetype(
        name="homebody", weight=1 / 3, day_plan=HOMEBODY_PLAN,
        background_bands=(0.70, 0.05, 0.25),
        sms_level_probs=(0.35, 0.50, 0.15, 0.0, 0.0),
        call_level_probs=(0.50, 0.40, 0.10, 0.0),
        sias_mean=50.0, sias_std=4.0,
        affect_intercept=40.0, w_act=25.0, w_sms=0.8, w_call=-2.0,
        w_loc=(0.0, 0.0, -3.0, 0.0, 4.0, 0.0))
    student = Archetype(
        name="student", weight=1 / 3, day_plan=STUDENT_PLAN,
        background_bands=(0.25, 0.40, 0.35),
        sms_level_probs=(0.10, 0.30, 0.40, 0.20, 0.0),
        call_level_probs=(0.10, 0.30, 0.40, 0.20),
        sias_mean=38.0, sias_std=2.0,
        affect_intercept=60.0, w_act=-25.0, w_sms=-0.8, w_call=2.0,
        w_loc=(2.0, -4.0, 2.0, 0.0, 0.0, 0.0))
    social = Archetype(
        name="social", weight=1 / 3, day_plan=SOCIAL_PLAN,
        background_bands=(0.25, 0.40, 0.35),
        sms_level_probs=(0.05, 0.15, 0.30, 0.30, 0.20),
        call_level_probs=(0.10, 0.30, 0.40, 0.20),
        sias_mean=22.0, sias_std=5.0,
        affect_intercept=50.0, w_act=25.0, w_sms=-0.8, w_call=2.0,
        w_loc=(0.0, 0.0, 4.0, 0.0, -3.0, 0.0))
    return homebody, student, social


def benchmark_spec(seed: int = 0, n_participants: int = 30,
                   days: int = 14) -> CohortSpec:
    """Three-archetype benchmark spec at a configurable size."""
    return CohortSpec(n_participants=n_participants,
                      archetypes=_benchmark_archetypes(), days=days, seed=seed)


def planted_benchmark(seed: int = 0) -> tuple[CohortSpec, RawCohort, GroundTruth]:
    """Canonical 30-participant, 14-day, 3-archetype acceptance fixture."""
    spec = benchmark_spec(seed)
    cohort, truth = generate(spec)
    return spec, cohort, truth


def homogeneous_spec(seed: int, n_participants: int = 18,
                     days: int = 14) -> CohortSpec:
    """Single-archetype control: grouping can offer no real advantage."""
    arch = replace(_benchmark_archetypes()[2], weight=1.0)
    return CohortSpec(n_participants=n_participants, archetypes=(arch,),
                      days=days, seed=seed)


def imbalanced_spec(seed: int, days: int = 14) -> CohortSpec:
    """Nine archetypes at sizes 12/8/6/4/2/1/1/1/1 for size-effect runs."""
    sizes = (12, 8, 6, 4, 2, 1, 1, 1, 1)
    n = sum(sizes)
    base = _benchmark_archetypes()
    archetypes = []
    for i, size in enumerate(sizes):
        sign = 1.0 if i % 2 == 0 else -1.0
        archetypes.append(replace(
            base[i % 3],
            name=f"{base[i % 3].name}_{i}", weight=size / n,
            affect_intercept=34.0 + 4.0 * i, w_act=sign * 25.0,
            w_sms=-sign * 0.8, w_call=sign * 2.0,
            sias_mean=float(18 + 4 * i), sias_std=3.0))
    return CohortSpec(n_participants=n, archetypes=tuple(archetypes),
                      days=days, seed=seed)


def write_bundle(spec: CohortSpec, cohort: RawCohort, truth: GroundTruth,
                 out_dir: Path | str) -> None:
    """Write channel CSVs, ground_truth.csv, and a spec.json echo."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cohort(cohort, out)
    lines = ["participant_id,archetype"]
    lines += [f"{pid},{truth.archetype_of[pid]}"
              for pid in sorted(truth.archetype_of)]
    (out / "ground_truth.csv").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    payload = json.dumps(asdict(spec), indent=2, sort_keys=True)
    (out / "spec.json").write_text(payload + "\n", encoding="utf-8")
