import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupaffect.errors import ValidationError
from groupaffect.features import (
    DegenerateRange,
    MissingProfile,
    accel_magnitude,
    build_design_matrix,
    build_feature_table,
    build_profiles,
    comm_counts,
    epoch_accel_stats,
    profile_activity,
    profile_calls,
    profile_location,
    profile_sms,
    sias_onehot,
    write_features_csv,
)
from groupaffect.ingest import (
    AccelTrack,
    CallLog,
    EmaSeries,
    GpsTrack,
    PoiRecord,
    PoiSnapshot,
    RawCohort,
    SmsLog,
)
from groupaffect.mobility import SemanticTimeline, Visit, compute_mobility


def test_accel_magnitude_examples():
    assert float(accel_magnitude(1, 1, 1)) == pytest.approx(1.0, abs=1e-12)
    assert float(accel_magnitude(0, 0, 0)) == 0.0
    assert float(accel_magnitude(3, 4, 12)) == pytest.approx(np.sqrt(169 / 3), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_accel_magnitude_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=3)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]  # proper rotation
    rv = q @ v
    assert abs(float(accel_magnitude(*rv)) - float(accel_magnitude(*v))) <= 1e-9


def test_epoch_stats_constant_stream():
    t = np.arange(0, 3600, 5, dtype=np.int64)
    stats, missing = epoch_accel_stats(t, np.full(len(t), 0.25), prompt=3600)
    assert not missing
    np.testing.assert_allclose(stats, [0.25, 0.25, 0.25, 0.0, 0.25, 0.0], atol=1e-12)


def test_epoch_stats_empty():
    stats, missing = epoch_accel_stats(np.array([10_000]), np.array([0.5]), prompt=3600)
    assert missing
    assert np.all(stats == 0.0)


def test_epoch_stats_two_level_oracle():
    prompt = 10_000
    start = prompt - 3600
    t = np.arange(start, prompt, 2, dtype=np.int64)
    mags = np.where(t < start + 1800, 0.1, 0.3)
    stats, missing = epoch_accel_stats(t, mags, prompt)
    assert not missing
    # independent recomputation: explicit per-window means
    means = []
    for k in range(60):
        sel = (t >= start + 60 * k) & (t < start + 60 * (k + 1))
        if np.any(sel):
            means.append(np.mean(mags[sel]))
    means = np.array(means)
    want = [means.mean(), means.min(), means.max(), means.std(),
            np.median(means), means.std() ** 2]
    np.testing.assert_allclose(stats, want, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_epoch_stats_std_var_consistency(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 400))
    t = np.sort(rng.integers(0, 3700, size=n)).astype(np.int64)
    stats, missing = epoch_accel_stats(t, rng.uniform(0, 2, size=n), prompt=3600)
    if not missing:
        assert abs(stats[3] ** 2 - stats[5]) <= 1e-9 * max(stats[5], 1e-30)


def test_comm_counts_boundaries():
    prompt = 10_000
    sms = np.array([prompt - 3601, prompt - 3600, prompt - 3599, prompt, prompt + 1])
    n_sms, _ = comm_counts(sms, np.array([]), np.array([]), prompt)
    assert n_sms == 2  # window is (prompt-3600, prompt]

    starts = np.array([prompt - 4000, prompt - 4000, prompt, prompt + 1])
    durs = np.array([600.0, 399.0, 50.0, 10.0])
    _, n_call = comm_counts(np.array([]), starts, durs, prompt)
    # 600 s call reaches into the window; 399 s one ends exactly at the edge
    assert n_call == 2


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_comm_counts_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    prompt = 50_000
    sms = rng.integers(prompt - 8000, prompt + 2000, size=rng.integers(0, 40))
    starts = rng.integers(prompt - 8000, prompt + 2000, size=rng.integers(0, 40))
    durs = rng.integers(0, 3000, size=len(starts)).astype(float)
    got = comm_counts(np.sort(sms), starts, durs, prompt)
    want_sms = sum(1 for t in sms if prompt - 3600 < t <= prompt)
    want_call = sum(1 for s, d in zip(starts, durs)
                    if s <= prompt and s + d > prompt - 3600)
    assert got == (want_sms, want_call)


def timeline_of(*visits) -> SemanticTimeline:
    return SemanticTimeline("p", [Visit(*v) for v in visits])


def test_profile_location_all_home():
    tl = timeline_of(("InTransition", 0, 100), ("Home", 100, 1100),
                     ("InTransition", 1100, 1200))
    props, empty = profile_location(tl)
    assert not empty
    np.testing.assert_allclose(props, [0, 0, 0, 1, 0], atol=1e-12)


def test_profile_location_ratio_oracle():
    tl = timeline_of(("Education", 0, 492), ("InTransition", 492, 600),
                     ("Home", 600, 987), ("Leisure", 987, 1108))
    props, _ = profile_location(tl)
    total = 492 + 387 + 121
    np.testing.assert_allclose(
        props, [0, 492 / total, 0, 387 / total, 121 / total], atol=1e-12)
    assert props.sum() == pytest.approx(1.0, abs=1e-9)


def test_profile_location_all_transition():
    props, empty = profile_location(timeline_of(("InTransition", 0, 500)))
    assert empty and np.all(props == 0)


def test_profile_activity_endpoints():
    props = profile_activity("p", np.array([0.0, 1.0]))
    np.testing.assert_allclose(props, [0.5, 0, 0.5], atol=1e-12)


def test_profile_activity_grid():
    mags = np.arange(10) / 10.0  # normalizes to k/9
    props = profile_activity("p", mags)
    np.testing.assert_allclose(props, [0.2, 0.1, 0.7], atol=1e-12)


def test_profile_activity_degenerate():
    with pytest.raises(DegenerateRange):
        profile_activity("p", np.full(50, 0.3))


def test_profile_sms_levels():
    assert profile_sms(np.array([]), 0, 36_000)[0] @ np.arange(5) == 0
    np.testing.assert_allclose(profile_sms(np.array([]), 0, 36_000)[0],
                               [1, 0, 0, 0, 0], atol=1e-12)
    sms = np.full(15, 3 * 3600 + 100)  # 15 messages inside bin 3 of 10
    props, empty = profile_sms(sms, 0, 36_000)
    assert not empty
    np.testing.assert_allclose(props, [0.9, 0, 0.1, 0, 0], atol=1e-12)


def test_profile_sms_boundary_left_closed():
    props, _ = profile_sms(np.full(10, 100), 0, 3600)  # exactly 10 -> Medium
    np.testing.assert_allclose(props, [0, 0, 1, 0, 0], atol=1e-12)
    props, _ = profile_sms(np.full(1, 100), 0, 3600)
    np.testing.assert_allclose(props, [0, 1, 0, 0, 0], atol=1e-12)


def test_profile_sms_partial_bin_dropped():
    # 90-minute span: one full bin; events in the trailing half hour ignored
    props, _ = profile_sms(np.array([4000, 4500]), 0, 5400)
    np.testing.assert_allclose(props, [1, 0, 0, 0, 0], atol=1e-12)


def test_profile_sms_short_span_flagged():
    props, empty = profile_sms(np.array([100]), 0, 1800)
    assert empty and np.all(props == 0)


def test_profile_calls_levels():
    np.testing.assert_allclose(profile_calls(np.array([]), 0, 36_000)[0],
                               [1, 0, 0, 0], atol=1e-12)
    calls = np.array([7200 * 2 + 10, 7200 * 2 + 20])  # 2 calls in bin 2 of 5
    props, _ = profile_calls(calls, 0, 36_000)
    np.testing.assert_allclose(props, [0.8, 0.2, 0, 0], atol=1e-12)


def test_profile_calls_boundary():
    props, _ = profile_calls(np.full(6, 100), 0, 7200)  # exactly 6 -> VeryHigh
    np.testing.assert_allclose(props, [0, 0, 0, 1], atol=1e-12)


def test_sias_onehot_cutoffs():
    np.testing.assert_array_equal(sias_onehot(33), [1, 0, 0])
    np.testing.assert_array_equal(sias_onehot(34), [0, 1, 0])
    np.testing.assert_array_equal(sias_onehot(42), [0, 1, 0])
    np.testing.assert_array_equal(sias_onehot(43), [0, 0, 1])


def empty_arrays(n=0):
    return np.zeros(n, dtype=np.int64)


def make_cohort() -> RawCohort:
    """One participant with a single 2-h home stay and two EMAs."""
    pid = "p1"
    t_gps = np.arange(0, 7201, 60, dtype=np.int64)
    gps = GpsTrack(t_gps, np.full(len(t_gps), 47.0), np.full(len(t_gps), 8.0))
    t_acc = np.arange(0, 3601, 1, dtype=np.int64)
    rng = np.random.default_rng(7)
    acc = AccelTrack(t_acc, rng.normal(0, 0.05, len(t_acc)),
                     rng.normal(0, 0.05, len(t_acc)),
                     rng.normal(1, 0.05, len(t_acc)))
    sms = SmsLog(np.array([3590, 3600 - 3601 + 3600], dtype=np.int64),
                 np.array([0, 1], dtype=np.int8))
    calls = CallLog(np.array([0], dtype=np.int64), np.array([100.0]),
                    np.array([0], dtype=np.int8))
    ema = EmaSeries(np.array([3600, 999_999], dtype=np.int64),
                    np.array([40, 60], dtype=np.int64),
                    np.array([60, 40], dtype=np.int64))
    poi = PoiSnapshot([PoiRecord("home1", 47.0, 8.0, 80.0, "building=house")])
    return RawCohort(participants=(pid,), gps={pid: gps}, accel={pid: acc},
                     sms={pid: sms}, calls={pid: calls}, ema={pid: ema},
                     sias={pid: 40}, poi=poi)


TAG_MAP = {"building=house": "house"}


def test_build_feature_table():
    cohort = make_cohort()
    mobility = compute_mobility(cohort, TAG_MAP)
    table = build_feature_table(cohort, mobility)
    assert len(table) == 2
    assert table.columns[-1] == "hour_of_day"
    cols = {name: i for i, name in enumerate(table.columns)}
    row0 = table.X[0]
    assert row0[cols["loc_Home"]] == 1.0
    onehot0 = [row0[cols[f"loc_{n}"]] for n in
               ("Home", "Education", "Leisure", "OutOfTown", "OtherHouse",
                "InTransition")]
    assert sum(onehot0) == 1.0
    # second EMA is outside GPS coverage: all location flags zero
    row1 = table.X[1]
    assert sum(row1[cols[f"loc_{n}"]] for n in
               ("Home", "Education", "Leisure", "OutOfTown", "OtherHouse",
                "InTransition")) == 0.0
    assert row1[cols["accel_missing"]] == 1.0
    assert row0[cols["sms_count_1h"]] == 2.0
    assert row0[cols["call_count_1h"]] == 1.0
    assert 0.0 <= row0[cols["hour_of_day"]] < 24.0
    assert table.y.tolist() == [40.0, 60.0]

    no_hour = build_feature_table(cohort, mobility, hour_of_day=False)
    assert "hour_of_day" not in no_hour.columns
    assert no_hour.X.shape[1] == table.X.shape[1] - 1


def test_feature_csv_roundtrip(tmp_path):
    cohort = make_cohort()
    table = build_feature_table(cohort, compute_mobility(cohort, TAG_MAP))
    path = tmp_path / "features.csv"
    write_features_csv(table, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1 + len(table)
    assert lines[0].startswith("participant_id,prompt_time,accel_mean")


def test_build_profiles_and_design_matrix():
    cohort = make_cohort()
    mobility = compute_mobility(cohort, TAG_MAP)
    profiles = build_profiles(cohort, mobility)
    p = profiles["p1"]
    for block in (p.location_props, p.activity_props, p.sms_props, p.call_props):
        assert np.all(block >= 0) and np.all(block <= 1)
        assert block.sum() == pytest.approx(1.0, abs=1e-9) or np.all(block == 0)
    np.testing.assert_allclose(p.location_props, [0, 0, 0, 1, 0], atol=1e-12)

    dm = build_design_matrix(profiles, ["location"])
    assert dm.X.shape == (1, 5)
    dm = build_design_matrix(profiles, ["location", "activity", "sms", "calls"])
    assert dm.X.shape == (1, 17)
    assert dm.block_spec == [("location", 5), ("activity", 3),
                             ("sms", 5), ("calls", 4)]
    # block slices reproduce the profile blocks bit for bit
    np.testing.assert_array_equal(dm.block("sms")[0], p.sms_props)
    np.testing.assert_array_equal(dm.block("activity")[0], p.activity_props)

    dm = build_design_matrix(profiles, ["location", "sias"], sias=cohort.sias)
    np.testing.assert_array_equal(dm.block("sias")[0], [0, 1, 0])

    with pytest.raises(ValidationError):
        build_design_matrix(profiles, [])
    with pytest.raises(MissingProfile):
        build_design_matrix(profiles, ["sias"], sias={})
