import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from s2pnilm.data import (BUILTIN_PROFILES, ApplianceProfile, FormatDescriptor, TimeSeries, align_resample,
                          destandardize, load_channel, load_profiles, mains_stats, save_channel,
                          save_profiles, standardize)
from s2pnilm.errors import AlignmentError, ConfigurationError, IngestionError


def _write(tmp_path, text, name="ch.dat"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_row_file(tmp_path):
    s = load_channel(_write(tmp_path, "0 100\n6 120\n"), FormatDescriptor(interval=6))
    np.testing.assert_array_equal(s.values, [100.0, 120.0])
    assert s.start == 0 and s.interval == 6 and not s.has_gaps


def test_empty_file(tmp_path):
    with pytest.raises(IngestionError):
        load_channel(_write(tmp_path, ""))


def test_sixty_second_gap_gets_nine_markers(tmp_path):
    s = load_channel(_write(tmp_path, "0,5\n60,7\n66,8\n"), FormatDescriptor(interval=6))
    assert len(s) == 12
    # slots 1..9 lie strictly inside the 60 s gap
    assert int(s.missing.sum()) == 9
    assert s.missing[1:10].all()
    assert s.values[10] == 7.0


def test_unparseable_row_reports_line(tmp_path):
    with pytest.raises(IngestionError, match=":3:"):
        load_channel(_write(tmp_path, "0 1\n6 2\n12 watt\n"))


def test_non_monotone_timestamps(tmp_path):
    with pytest.raises(IngestionError, match=":2:"):
        load_channel(_write(tmp_path, "6 1\n0 2\n"))


def test_negative_policy(tmp_path):
    path = _write(tmp_path, "0 -3\n6 2\n")
    with pytest.raises(IngestionError):
        load_channel(path)
    s = load_channel(path, FormatDescriptor(negative="clamp"))
    np.testing.assert_array_equal(s.values, [0.0, 2.0])


def test_missing_file_names_path(tmp_path):
    with pytest.raises(IngestionError, match="nowhere"):
        load_channel(tmp_path / "nowhere.dat")


def test_save_load_round_trip(tmp_path):
    s = TimeSeries(1356998400.0, 6.0, [0.1, 2500.25, 3.0, 0.0], [False, False, True, False])
    save_channel(s, tmp_path / "c.csv")
    back = load_channel(tmp_path / "c.csv", FormatDescriptor(interval=6))
    np.testing.assert_array_equal(back.values, s.values)
    np.testing.assert_array_equal(back.missing, s.missing)
    assert back.start == s.start


def test_timeseries_is_read_only():
    s = TimeSeries(0, 1, [1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0
    with pytest.raises(ConfigurationError):
        TimeSeries(0, 1, [np.nan])


def test_identity_alignment():
    m = TimeSeries(0, 6, [1.0, 2.0, 3.0])
    a = TimeSeries(0, 6, [0.0, 1.0, 0.0])
    pair = align_resample(m, a)
    np.testing.assert_array_equal(pair.mains.values, m.values)
    np.testing.assert_array_equal(pair.appliance.values, a.values)


def test_one_second_mains_down_to_six_seconds():
    # mains at 1 s over t = 0..11, appliance at 6 s over t = 0, 6, 12
    mains = TimeSeries(0, 1, 10.0 * np.arange(12))
    appliance = TimeSeries(0, 6, [1.0, 2.0, 3.0])
    pair = align_resample(mains, appliance, interval=6)
    # overlap is [0, 11]; grid points 0 and 6 take the readings found there
    np.testing.assert_array_equal(pair.mains.timestamps(), [0.0, 6.0])
    np.testing.assert_array_equal(pair.mains.values, [0.0, 60.0])
    np.testing.assert_array_equal(pair.appliance.values, [1.0, 2.0])


def test_disjoint_ranges():
    with pytest.raises(AlignmentError):
        align_resample(TimeSeries(0, 6, [1.0, 2.0]), TimeSeries(100, 6, [1.0]))


def test_gap_fill_policy():
    missing = np.zeros(20, dtype=bool)
    missing[3:6] = True  # 18 s: forward filled
    missing[10:17] = True  # 42 s: beyond the 30 s limit
    vals = np.arange(20, dtype=float)
    vals[missing] = 0
    m = TimeSeries(0, 6, vals + 100, missing)
    a = TimeSeries(0, 6, vals, missing)
    pair = align_resample(m, a)
    np.testing.assert_array_equal(pair.appliance.values[3:6], [2.0, 2.0, 2.0])
    np.testing.assert_array_equal(pair.appliance.values[10:17], 0.0)
    assert pair.mains.missing[10:17].all() and not pair.mains.missing[3:6].any()


def test_kettle_standardisation():
    k = BUILTIN_PROFILES["kettle"]
    assert standardize(np.array([2700.0]), k.mean, k.std)[0] == 2.0
    np.testing.assert_array_equal(standardize(np.full(5, 700.0), 700, 1000), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 5000), min_size=1, max_size=50), st.floats(-1000, 1000), st.floats(1e-2, 1e4))
def test_standardize_round_trip(values, mean, std):
    x = np.array(values)
    back = destandardize(standardize(x, mean, std), mean, std)
    assert np.max(np.abs(back - x)) <= 1e-12 * max(1.0, np.max(np.abs(x)), abs(mean))


def test_standardize_rejects_zero_std():
    with pytest.raises(ConfigurationError):
        standardize([1.0], 0.0, 0.0)


def test_mains_stats_skip_missing():
    s = TimeSeries(0, 6, [2.0, 0.0, 4.0], [False, True, False])
    assert mains_stats(s) == (3.0, 1.0)
    assert mains_stats(np.full(4, 7.0)) == (7.0, 1.0)


def test_table1_rows():
    assert {k: (p.window_length, p.max_power, p.on_threshold, p.mean, p.std) for k, p in BUILTIN_PROFILES.items()} == {
        "kettle": (599, 3948, 2000, 700, 1000),
        "microwave": (599, 3138, 200, 500, 800),
        "fridge": (599, 2572, 50, 200, 400),
        "dishwasher": (599, 3230, 10, 700, 1000),
        "washingmachine": (599, 3962, 20, 400, 700),
    }


def test_profiles_round_trip(tmp_path):
    save_profiles(BUILTIN_PROFILES, tmp_path / "p.json")
    assert load_profiles(tmp_path / "p.json") == BUILTIN_PROFILES
    assert load_profiles() == BUILTIN_PROFILES


def test_profile_validation(tmp_path):
    with pytest.raises(ConfigurationError):
        ApplianceProfile("x", 98, 100, 10, 0, 1)
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_profiles(tmp_path / "bad.json")
