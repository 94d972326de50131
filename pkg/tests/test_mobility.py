import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupaffect.errors import ValidationError
from groupaffect.ingest import GpsTrack, PoiRecord, PoiSnapshot
from groupaffect.mobility import (
    NoHomeFound,
    OutOfCoverage,
    StayPoint,
    build_timeline,
    detect_home,
    detect_stay_points,
    haversine_m,
    label_at,
    label_stay,
    night_overlap_s,
    parse_tag_map,
)
from oracles import assert_same_segmentation, stay_points_oracle, synthetic_trace

M_PER_DEG = np.pi / 180.0 * 6371.0088e3


def track_from(rows) -> GpsTrack:
    t, lat, lon = zip(*rows)
    return GpsTrack(np.array(t, dtype=np.int64), np.array(lat), np.array(lon))


def test_haversine_known_distance():
    # one degree of latitude on the reference sphere
    assert float(haversine_m(47.0, 8.0, 48.0, 8.0)) == pytest.approx(M_PER_DEG, rel=1e-9)
    assert float(haversine_m(47.0, 8.0, 47.0, 8.0)) == 0.0


def test_single_cluster_trivial():
    rows = [(i * 95, 47.0, 8.0) for i in range(20)]  # ~30 min at one spot
    stays = detect_stay_points("p", track_from(rows), 200.0, 600.0)
    assert len(stays) == 1
    assert stays[0].fix_count == 20
    assert stays[0].start == 0 and stays[0].end == 19 * 95
    assert stays[0].centroid_lat == pytest.approx(47.0)


def test_alternating_far_points_no_stay():
    lat_b = 47.0 + 5000.0 / M_PER_DEG
    rows = [(i * 60, 47.0 if i % 2 == 0 else lat_b, 8.0) for i in range(40)]
    track = track_from(rows)
    assert detect_stay_points("p", track, 200.0, 600.0) == []
    assert_same_segmentation(detect_stay_points("p", track, 200.0, 600.0),
                             stay_points_oracle("p", track, 200.0, 600.0))


def test_home_commute_campus_segmentation():
    campus_lat = 47.0 + 6000.0 / M_PER_DEG
    rows = [(i * 60, 47.0, 8.0) for i in range(480)]  # 8 h at home
    commute_t0 = 480 * 60
    for k in range(20):  # 20 min commute north, 300 m steps ending short of campus
        rows.append((commute_t0 + k * 60, 47.0 + ((k + 0.5) * 300.0) / M_PER_DEG, 8.0))
    campus_t0 = commute_t0 + 20 * 60
    rows += [(campus_t0 + i * 60, campus_lat, 8.0) for i in range(360)]  # 6 h
    stays = detect_stay_points("p", track_from(rows), 200.0, 600.0)
    assert len(stays) == 2
    assert stays[0].start == 0
    assert abs(stays[0].end - (commute_t0 - 60)) <= 60
    assert abs(stays[1].start - campus_t0) <= 60
    assert stays[1].end == campus_t0 + 359 * 60


def test_empty_and_tiny_input():
    empty = GpsTrack(np.array([], dtype=np.int64), np.array([]), np.array([]))
    assert detect_stay_points("p", empty) == []
    one = track_from([(0, 47.0, 8.0)])
    assert detect_stay_points("p", one) == []


def test_bad_parameters_rejected():
    with pytest.raises(ValidationError):
        detect_stay_points("p", track_from([(0, 47.0, 8.0)]), d_max_m=0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_stay_points_match_oracle(seed):
    track = synthetic_trace(seed, n_max=400)
    got = detect_stay_points("p", track, 200.0, 600.0)
    want = stay_points_oracle("p", track, 200.0, 600.0)
    assert_same_segmentation(got, want)


POI = PoiSnapshot([
    PoiRecord("home1", 47.0, 8.0, 60.0, "building=house"),
    PoiRecord("friend1", 47.01, 8.0, 60.0, "building=house"),
    PoiRecord("lib1", 47.02, 8.0, 80.0, "amenity=library"),
    PoiRecord("cafe1", 47.03, 8.0, 40.0, "amenity=cafe"),
    PoiRecord("untagged1", 47.04, 8.0, 40.0, "amenity=bench"),
])
TAG_MAP = {"building=house": "house", "amenity=library": "education",
           "amenity=cafe": "leisure"}
HOME = ("home1", (47.0, 8.0))


def stay_at(lat, lon, start=0, end=3600) -> StayPoint:
    return StayPoint("p", lat, lon, start, end, 10)


def test_label_precedence_home():
    assert label_stay(stay_at(47.0, 8.0), POI, TAG_MAP, *HOME) == "Home"


def test_label_precedence_out_of_town():
    far = 47.0 + 40_000.0 / M_PER_DEG
    assert label_stay(stay_at(far, 8.0), POI, TAG_MAP, *HOME,
                      out_of_town_km=25.0) == "OutOfTown"


def test_label_poi_categories():
    assert label_stay(stay_at(47.01, 8.0), POI, TAG_MAP, *HOME) == "OtherHouse"
    assert label_stay(stay_at(47.02, 8.0), POI, TAG_MAP, *HOME) == "Education"
    assert label_stay(stay_at(47.03, 8.0), POI, TAG_MAP, *HOME) == "Leisure"


def test_label_catch_all():
    # near the untagged bench: no mapped POI contains the centroid
    assert label_stay(stay_at(47.04, 8.0), POI, TAG_MAP, *HOME) == "Leisure"
    assert label_stay(stay_at(47.04, 8.0), POI, TAG_MAP, *HOME,
                      unmatched_label="InTransition") == "InTransition"


def test_label_without_home_skips_home_rules():
    assert label_stay(stay_at(47.0, 8.0), POI, TAG_MAP, None, None) == "OtherHouse"


def test_label_nearest_containing_poi_wins():
    # point inside both lib1 and an overlapping bigger cafe circle
    poi = PoiSnapshot([
        PoiRecord("lib1", 47.02, 8.0, 80.0, "amenity=library"),
        PoiRecord("cafe_big", 47.0201, 8.0, 300.0, "amenity=cafe"),
    ])
    got = label_stay(stay_at(47.02, 8.0), poi, TAG_MAP, None, None)
    assert got == "Education"


@settings(max_examples=20, deadline=None)
@given(st.randoms(use_true_random=False))
def test_labeling_invariant_under_poi_order(rnd):
    records = list(POI.records)
    rnd.shuffle(records)
    shuffled = PoiSnapshot(records)
    for lat in (47.0, 47.01, 47.02, 47.03, 47.04):
        assert (label_stay(stay_at(lat, 8.0), shuffled, TAG_MAP, *HOME)
                == label_stay(stay_at(lat, 8.0), POI, TAG_MAP, *HOME))


def test_night_overlap_windows():
    assert night_overlap_s(21 * 3600, 23 * 3600) == 3600.0
    assert night_overlap_s(10 * 3600, 12 * 3600) == 0.0
    assert night_overlap_s(22 * 3600, 86400 + 9 * 3600) == 11 * 3600.0
    # utc offset shifts the local window
    assert night_overlap_s(21 * 3600, 23 * 3600, utc_offset_hours=1.0) == 7200.0
    assert night_overlap_s(0, 7 * 86400) == 7 * 11 * 3600.0


def test_detect_home_unique_candidate():
    stays = [stay_at(47.0, 8.0, d * 86400 + 22 * 3600, (d + 1) * 86400 + 7 * 3600)
             for d in range(0, 20, 2)]
    assert detect_home("p", stays, POI, TAG_MAP) == "home1"


def test_detect_home_max_dwell_and_order_invariance():
    # house A: 40 night-hours, house B (friend1): 12 night-hours
    stays_a = [stay_at(47.0, 8.0, d * 86400 + 23 * 3600, d * 86400 + 31 * 3600)
               for d in range(5)]
    stays_b = [stay_at(47.01, 8.0, d * 86400 + 23 * 3600, d * 86400 + 27 * 3600)
               for d in range(5, 8)]
    daytime = [stay_at(47.02, 8.0, d * 86400 + 12 * 3600, d * 86400 + 15 * 3600)
               for d in range(8)]
    stays = stays_a + stays_b + daytime
    assert detect_home("p", stays, POI, TAG_MAP) == "home1"
    assert detect_home("p", stays[::-1], POI, TAG_MAP) == "home1"


def test_detect_home_no_night_stays():
    daytime = [stay_at(47.0, 8.0, d * 86400 + 12 * 3600, d * 86400 + 15 * 3600)
               for d in range(8)]
    with pytest.raises(NoHomeFound):
        detect_home("p", daytime, POI, TAG_MAP)


def test_timeline_gap_filling():
    stays = [stay_at(47.0, 8.0, 100, 700), stay_at(47.02, 8.0, 1900, 2500)]
    tl = build_timeline("p", stays, ["Home", "Education"], 0, 3000)
    kinds = [(v.label, v.start, v.end) for v in tl.visits]
    assert kinds == [("InTransition", 0, 100), ("Home", 100, 700),
                     ("InTransition", 700, 1900), ("Education", 1900, 2500),
                     ("InTransition", 2500, 3000)]
    assert sum(v.end - v.start for v in tl.visits) == 3000


def test_timeline_no_stays():
    tl = build_timeline("p", [], [], 50, 500)
    assert [(v.label, v.start, v.end) for v in tl.visits] == [("InTransition", 50, 500)]


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=5000))
def test_timeline_coverage_sum(seed):
    track = synthetic_trace(seed, n_max=300)
    stays = detect_stay_points("p", track, 200.0, 600.0)
    tl = build_timeline("p", stays, ["Leisure"] * len(stays),
                        int(track.t[0]), int(track.t[-1]))
    assert sum(v.end - v.start for v in tl.visits) == int(track.t[-1] - track.t[0])
    assert all(a.end == b.start for a, b in zip(tl.visits, tl.visits[1:]))


def test_label_at_conventions():
    stays = [stay_at(47.0, 8.0, 100, 700)]
    tl = build_timeline("p", stays, ["Home"], 0, 1000)
    assert label_at(tl, 50) == "InTransition"
    assert label_at(tl, 100) == "Home"  # boundary belongs to the later visit
    assert label_at(tl, 400) == "Home"
    assert label_at(tl, 700) == "InTransition"
    assert label_at(tl, 1000) == "InTransition"  # final instant
    with pytest.raises(OutOfCoverage):
        label_at(tl, -1)
    with pytest.raises(OutOfCoverage):
        label_at(tl, 1001)


def test_parse_tag_map(tmp_path):
    path = tmp_path / "tags.conf"
    path.write_text(
        "# campus places\n"
        "amenity=library = education\n"
        "building=house = house\n"
        "amenity=cafe = leisure\n"
        "amenity=fountain = decoration\n",
        encoding="utf-8")
    tag_map, warnings = parse_tag_map(path)
    assert tag_map == {"amenity=library": "education", "building=house": "house",
                       "amenity=cafe": "leisure"}
    assert len(warnings) == 1 and "decoration" in warnings[0]


def test_parse_tag_map_malformed(tmp_path):
    path = tmp_path / "tags.conf"
    path.write_text("just a tag\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        parse_tag_map(path)
