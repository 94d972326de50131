"""Per-EMA predictor vectors and per-participant behavior profiles.

Predictors for one EMA response come from the hour before its prompt:
summary statistics of 1-minute accelerometer window means, SMS and call
counts, the semantic location at the prompt, and the local hour of day.
Profiles summarize a participant's whole study as proportion blocks per
modality (location 5, activity 3, SMS 5, calls 4), later concatenated
into the grouping design matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from groupaffect.errors import ValidationError
from groupaffect.ingest import RawCohort
from groupaffect.mobility import LABELS, MobilityResult, OutOfCoverage, label_at

# profile block layouts; order is part of the contract
LOCATION_CLASSES = ("OutOfTown", "Education", "OtherHouse", "Home", "Leisure")
ACTIVITY_LEVELS = ("Low", "Medium", "High")
SMS_LEVELS = ("VeryLow", "Low", "Medium", "High", "VeryHigh")
CALL_LEVELS = ("Low", "Medium", "High", "VeryHigh")
SMS_CUTOFFS = (1, 10, 20, 30)  # messages per 1-hour bin, left-closed
CALL_CUTOFFS = (1, 3, 6)       # calls per 2-hour bin, left-closed
ACTIVITY_CUTOFFS = (0.2, 0.3)  # normalized magnitude, left-closed

MODALITY_WIDTHS = {"location": 5, "activity": 3, "sms": 5, "calls": 4, "sias": 3}


class DegenerateRange(ValidationError):
    def __init__(self, participant_id: str):
        super().__init__(f"activity range degenerate (max=min) for {participant_id!r}")
        self.participant_id = participant_id


class MissingProfile(ValidationError):
    def __init__(self, participant_id: str, modality: str):
        super().__init__(f"no {modality} profile for participant {participant_id!r}")
        self.participant_id = participant_id
        self.modality = modality


@dataclass
class BehaviorProfile:
    participant_id: str
    location_props: np.ndarray  # 5: OutOfTown, Education, OtherHouse, Home, Leisure
    activity_props: np.ndarray  # 3: Low, Medium, High
    sms_props: np.ndarray       # 5: VeryLow..VeryHigh
    call_props: np.ndarray      # 4: Low..VeryHigh
    flags: list[str] = field(default_factory=list)

    def block(self, modality: str) -> np.ndarray:
        return {"location": self.location_props, "activity": self.activity_props,
                "sms": self.sms_props, "calls": self.call_props}[modality]


@dataclass
class FeatureTable:
    """One row per EMA response, cohort-wide, time-ordered within participant."""

    participant_ids: list[str]
    prompt_times: np.ndarray
    X: np.ndarray
    y: np.ndarray
    columns: list[str]

    def __len__(self) -> int:
        return len(self.y)


@dataclass
class DesignMatrix:
    X: np.ndarray
    row_ids: list[str]
    block_spec: list[tuple[str, int]]

    def block(self, modality: str) -> np.ndarray:
        start = 0
        for name, width in self.block_spec:
            if name == modality:
                return self.X[:, start:start + width]
            start += width
        raise KeyError(modality)


def accel_magnitude(x, y, z):
    """Orientation-free magnitude sqrt((x^2 + y^2 + z^2) / 3)."""
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    return np.sqrt((x * x + y * y + z * z) / 3.0)


def epoch_accel_stats(t: np.ndarray, mags: np.ndarray, prompt: float,
                      epoch_s: float = 3600.0) -> tuple[np.ndarray, bool]:
    """Six statistics of 1-minute window means over [prompt - epoch_s, prompt].

    Windows with no samples are skipped. Returns (stats, missing) where
    stats = (mean, min, max, std, median, variance) and missing marks an
    epoch without any sample (stats all zero).
    """
    start = prompt - epoch_s
    sel = (t >= start) & (t <= prompt)
    if not np.any(sel):
        return np.zeros(6), True
    tt = np.asarray(t[sel], dtype=float)
    mm = np.asarray(mags[sel], dtype=float)
    n_windows = int(np.ceil(epoch_s / 60.0))
    win = np.minimum((tt - start) // 60.0, n_windows - 1).astype(int)
    sums = np.bincount(win, weights=mm, minlength=n_windows)
    counts = np.bincount(win, minlength=n_windows)
    means = sums[counts > 0] / counts[counts > 0]
    std = float(np.std(means))
    return np.array([float(np.mean(means)), float(np.min(means)),
                     float(np.max(means)), std, float(np.median(means)),
                     std * std]), False


def comm_counts(sms_t: np.ndarray, call_start: np.ndarray, call_dur: np.ndarray,
                prompt: float, window_s: float = 3600.0) -> tuple[int, int]:
    """SMS and call counts touching the hour before the prompt.

    SMS count over (prompt - window_s, prompt]; calls count when
    [start, start + duration] overlaps that interval.
    """
    lo = prompt - window_s
    n_sms = int(np.count_nonzero((sms_t > lo) & (sms_t <= prompt)))
    n_call = int(np.count_nonzero((call_start <= prompt)
                                  & (call_start + call_dur > lo)))
    return n_sms, n_call


def build_feature_table(cohort: RawCohort, mobility: dict[str, MobilityResult],
                        epoch_minutes: int = 60,
                        hour_of_day: bool = True) -> FeatureTable:
    """Assemble the per-EMA predictor matrix for the whole cohort."""
    columns = ["accel_mean", "accel_min", "accel_max", "accel_std",
               "accel_median", "accel_var", "accel_missing",
               "sms_count_1h", "call_count_1h"]
    columns += [f"loc_{name}" for name in LABELS]
    if hour_of_day:
        columns.append("hour_of_day")
    epoch_s = epoch_minutes * 60.0

    pids: list[str] = []
    prompts: list[int] = []
    rows: list[np.ndarray] = []
    targets: list[float] = []
    for pid in cohort.participants:
        ema = cohort.ema[pid]
        if not len(ema):
            continue
        acc = cohort.accel[pid]
        mags = accel_magnitude(acc.x, acc.y, acc.z)
        timeline = mobility[pid].timeline
        for prompt, neg in zip(ema.t, ema.negative):
            prompt = int(prompt)
            stats, missing = epoch_accel_stats(acc.t, mags, prompt, epoch_s)
            n_sms, n_call = comm_counts(cohort.sms[pid].t,
                                        cohort.calls[pid].start,
                                        cohort.calls[pid].duration, prompt)
            onehot = np.zeros(len(LABELS))
            try:
                onehot[LABELS.index(label_at(timeline, prompt))] = 1.0
            except OutOfCoverage:
                pass
            row = [*stats, float(missing), float(n_sms), float(n_call), *onehot]
            if hour_of_day:
                local = (prompt + cohort.utc_offset_hours * 3600.0) % 86400.0
                row.append(local / 3600.0)
            pids.append(pid)
            prompts.append(prompt)
            rows.append(np.array(row))
            targets.append(float(neg))
    if not rows:
        raise ValidationError("no EMA rows to featurize")
    return FeatureTable(pids, np.array(prompts, dtype=np.int64),
                        np.vstack(rows), np.array(targets), columns)


def profile_location(timeline) -> tuple[np.ndarray, bool]:
    """Dwell proportions over the five location classes, transitions excluded.

    Returns (props, empty); empty marks a timeline with no labeled dwell.
    """
    dwell = {name: 0.0 for name in LOCATION_CLASSES}
    for v in timeline.visits:
        if v.label in dwell:
            dwell[v.label] += v.end - v.start
    total = sum(dwell.values())
    if total <= 0:
        return np.zeros(len(LOCATION_CLASSES)), True
    return np.array([dwell[name] / total for name in LOCATION_CLASSES]), False


def profile_activity(participant_id: str, mags: np.ndarray) -> np.ndarray:
    """Proportions of samples at Low/Medium/High normalized activity."""
    if len(mags) == 0:
        raise ValidationError(f"no accel samples for {participant_id!r}")
    lo, hi = float(np.min(mags)), float(np.max(mags))
    if hi == lo:
        raise DegenerateRange(participant_id)
    m_hat = (np.asarray(mags, dtype=float) - lo) / (hi - lo)
    low, medium = ACTIVITY_CUTOFFS
    n = len(m_hat)
    n_low = int(np.count_nonzero(m_hat < low))
    n_med = int(np.count_nonzero((m_hat >= low) & (m_hat < medium)))
    return np.array([n_low / n, n_med / n, (n - n_low - n_med) / n])


def _bin_proportions(event_t: np.ndarray, t0: int, t1: int, bin_s: int,
                     cutoffs: tuple[int, ...]) -> np.ndarray | None:
    """Per-bin event counts classified into len(cutoffs)+1 left-closed levels.

    Bins tile [t0, t1) anchored at t0; the trailing partial bin is dropped.
    Returns None when the span holds no complete bin.
    """
    n_bins = (t1 - t0) // bin_s
    if n_bins <= 0:
        return None
    idx = (np.asarray(event_t, dtype=np.int64) - t0) // bin_s
    idx = idx[(idx >= 0) & (idx < n_bins)]
    counts = np.bincount(idx, minlength=n_bins)
    levels = np.digitize(counts, cutoffs)  # left-closed: count >= cutoff moves up
    return np.bincount(levels, minlength=len(cutoffs) + 1) / n_bins


def profile_sms(sms_t: np.ndarray, t0: int, t1: int) -> tuple[np.ndarray, bool]:
    props = _bin_proportions(sms_t, t0, t1, 3600, SMS_CUTOFFS)
    if props is None:
        return np.zeros(len(SMS_LEVELS)), True
    return props, False


def profile_calls(call_start: np.ndarray, t0: int, t1: int) -> tuple[np.ndarray, bool]:
    props = _bin_proportions(call_start, t0, t1, 7200, CALL_CUTOFFS)
    if props is None:
        return np.zeros(len(CALL_LEVELS)), True
    return props, False


def build_profiles(cohort: RawCohort,
                   mobility: dict[str, MobilityResult]) -> dict[str, BehaviorProfile]:
    """Per-participant modality profiles over the whole study span."""
    profiles: dict[str, BehaviorProfile] = {}
    for pid in cohort.participants:
        flags: list[str] = []
        loc, empty = profile_location(mobility[pid].timeline)
        if empty:
            flags.append("location_empty")
        acc = cohort.accel[pid]
        if len(acc) == 0:
            act = np.zeros(len(ACTIVITY_LEVELS))
            flags.append("activity_empty")
        else:
            try:
                act = profile_activity(pid, accel_magnitude(acc.x, acc.y, acc.z))
            except DegenerateRange:
                act = np.array([1.0, 0.0, 0.0])
                flags.append("activity_degenerate")
        t0, t1 = cohort.span(pid)
        sms, empty = profile_sms(cohort.sms[pid].t, t0, t1)
        if empty:
            flags.append("sms_empty")
        calls, empty = profile_calls(cohort.calls[pid].start, t0, t1)
        if empty:
            flags.append("calls_empty")
        profiles[pid] = BehaviorProfile(pid, loc, act, sms, calls, flags)
    return profiles


def sias_onehot(score: int) -> np.ndarray:
    """Low (<34), medium ([34, 43)), high (>=43) social anxiety indicator."""
    if score >= 43:
        return np.array([0.0, 0.0, 1.0])
    if score >= 34:
        return np.array([0.0, 1.0, 0.0])
    return np.array([1.0, 0.0, 0.0])


def build_design_matrix(profiles: dict[str, BehaviorProfile],
                        modalities: list[str],
                        sias: dict[str, int] | None = None) -> DesignMatrix:
    """Concatenate the requested modality blocks, one row per participant."""
    if not modalities:
        raise ValidationError("empty modality list")
    for m in modalities:
        if m not in MODALITY_WIDTHS:
            raise ValidationError(f"unknown modality {m!r}")
    row_ids = sorted(profiles)
    rows = []
    for pid in row_ids:
        blocks = []
        for m in modalities:
            if m == "sias":
                if sias is None or pid not in sias:
                    raise MissingProfile(pid, "sias")
                blocks.append(sias_onehot(sias[pid]))
            else:
                blocks.append(profiles[pid].block(m))
        rows.append(np.concatenate(blocks))
    block_spec = [(m, MODALITY_WIDTHS[m]) for m in modalities]
    return DesignMatrix(np.vstack(rows), row_ids, block_spec)


def write_features_csv(table: FeatureTable, path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["participant_id", "prompt_time", *table.columns, "target"])
        for i in range(len(table)):
            w.writerow([table.participant_ids[i], int(table.prompt_times[i]),
                        *[repr(float(v)) for v in table.X[i]],
                        repr(float(table.y[i]))])


def write_profiles_csv(profiles: dict[str, BehaviorProfile],
                       sias: dict[str, int], path: Path | str) -> None:
    header = (["participant_id"]
              + [f"loc_{c}" for c in LOCATION_CLASSES]
              + [f"act_{c}" for c in ACTIVITY_LEVELS]
              + [f"sms_{c}" for c in SMS_LEVELS]
              + [f"call_{c}" for c in CALL_LEVELS]
              + ["sias", "flags"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for pid in sorted(profiles):
            p = profiles[pid]
            vals = np.concatenate([p.location_props, p.activity_props,
                                   p.sms_props, p.call_props])
            w.writerow([pid, *[repr(float(v)) for v in vals],
                        sias.get(pid, ""), ";".join(p.flags)])
