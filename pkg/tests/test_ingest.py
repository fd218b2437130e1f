import io
import math
import warnings
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magcast.ingest import ColumnMap, ColumnSpec, ParseError, align, parse_columnar, parse_superdarn, resample_hourly
from magcast.timetable import TimeTable, Timestamp, calendar_to_epoch_hour, epoch_hour_to_calendar, read_csv, to_csv_string

COLMAP = ColumnMap((ColumnSpec(3, "V", (9999.9,)), ColumnSpec(4, "Bz", (9999.9, 999.9))))


def epoch_hour_oracle(year, doy, hour):
    dt = datetime(year, 1, 1, tzinfo=timezone.utc)
    return int(dt.timestamp()) // 3600 + (doy - 1) * 24 + hour


class TestTimestamp:
    @pytest.mark.parametrize("ymdh", [(1970, 1, 0), (2000, 60, 13), (2014, 1, 0), (2016, 366, 23), (2019, 365, 23)])
    def test_calendar_matches_datetime(self, ymdh):
        assert calendar_to_epoch_hour(*ymdh) == epoch_hour_oracle(*ymdh)

    @given(st.integers(0, 24 * 366 * 100))
    def test_round_trip(self, h):
        ts = Timestamp(h)
        assert Timestamp.from_calendar(*ts.calendar()) == ts

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Timestamp(-1)


class TestParseColumnar:
    def test_sentinel_marks_missing(self):
        t = parse_columnar("2014 1 0 420.0 9999.9\n", COLMAP)
        assert len(t) == 1
        assert t.hours[0] == epoch_hour_oracle(2014, 1, 0)
        assert t.column("V")[0] == 420.0
        assert t.missing[0].tolist() == [False, True]

    def test_empty_input(self):
        t = parse_columnar("", COLMAP)
        assert len(t) == 0 and t.columns == ("V", "Bz")

    def test_consecutive_hours_differ_by_one(self):
        t = parse_columnar("2014 1 0 1 2\n2014 1 1 3 4\n", COLMAP)
        assert np.diff(t.hours).tolist() == [1]
        assert t.hours[0] == epoch_hour_oracle(2014, 1, 0)

    def test_malformed_field_reports_line(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_columnar("2014 1 0 1 2\n2014 1 1 x 4\n", COLMAP)

    def test_unsorted_input_sorted(self):
        t = parse_columnar("2014 1 5 1 1\n2014 1 2 2 2\n", COLMAP)
        assert t.column("V").tolist() == [2.0, 1.0]

    def test_duplicate_conflict_warns_last_wins(self):
        with pytest.warns(UserWarning, match="duplicate"):
            t = parse_columnar("2014 1 0 1 1\n2014 1 0 5 5\n", COLMAP)
        assert len(t) == 1 and t.column("V")[0] == 5.0

    def test_identical_duplicate_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            t = parse_columnar("2014 1 0 1 1\n2014 1 0 1 1\n", COLMAP)
        assert len(t) == 1

    def test_comments_and_blanks_skipped(self):
        t = parse_columnar("# header\n\n2014 1 0 1 2\n", COLMAP)
        assert len(t) == 1

    def test_colmap_json(self, tmp_path):
        p = tmp_path / "map.json"
        p.write_text('[{"position": 3, "name": "V", "sentinels": [9999.9]}]')
        cm = ColumnMap.from_json(p)
        assert cm.columns[0] == ColumnSpec(3, "V", (9999.9,))

    def test_colmap_rejects_duplicates(self):
        with pytest.raises(ValueError):
            ColumnMap((ColumnSpec(3, "V"), ColumnSpec(4, "V")))


class TestSuperdarn:
    def hour_text(self, cpp=None):
        cpp = cpp or [float(i) for i in range(1, 13)]
        return "".join(f"2014-01-01T00:{5 * i:02d} {c} 72.0\n" for i, c in enumerate(cpp))

    def test_twelve_rows_five_minutes_apart(self):
        t = parse_superdarn(self.hour_text())
        assert len(t) == 12 and t.columns == ("cpp", "pcr")
        assert set(np.diff(t.times)) == {5}

    def test_sentinel(self):
        t = parse_superdarn("2014-01-01T00:00 9999.9 72.0\n2014-01-01 00:05 NA 71.0\n")
        assert t.missing[:, 0].tolist() == [True, True]
        assert not t.missing[:, 1].any()

    def test_unsorted(self):
        t = parse_superdarn("2014-01-01T00:10 1 1\n2014-01-01T00:00 2 2\n")
        assert np.all(np.diff(t.times) > 0)
        assert t.column("cpp").tolist() == [2.0, 1.0]

    def test_resample_mean(self):
        h = resample_hourly(parse_superdarn(self.hour_text()))
        assert len(h) == 1 and h.column("cpp")[0] == 6.5 and h.column("pcr")[0] == 72.0
        assert h.hours[0] == epoch_hour_oracle(2014, 1, 0)

    def test_resample_constant(self):
        assert resample_hourly(parse_superdarn(self.hour_text([40.0] * 12))).column("cpp")[0] == 40.0

    def test_resample_less_than_half_missing(self):
        cpp = [1.0] * 5 + ["NA"] * 7
        h = resample_hourly(parse_superdarn(self.hour_text(cpp)), cadence_minutes=5)
        assert h.missing[0, 0] and not h.missing[0, 1]

    def test_resample_exactly_half_present(self):
        cpp = [2.0] * 6 + ["NA"] * 6
        h = resample_hourly(parse_superdarn(self.hour_text(cpp)), cadence_minutes=5)
        assert h.column("cpp")[0] == 2.0

    def test_resample_rejects_bad_cadence(self):
        with pytest.raises(ValueError):
            resample_hourly(parse_superdarn(self.hour_text()), cadence_minutes=7)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 36), st.floats(-1e3, 1e3), st.booleans()), min_size=1, max_size=40, unique_by=lambda r: r[0]))
    def test_resample_properties(self, rows):
        times = np.array(sorted(r[0] for r in rows)) * 5
        by_t = {r[0] * 5: r for r in rows}
        vals = np.array([[by_t[t][1]] for t in times])
        miss = np.array([[by_t[t][2]] for t in times])
        table = TimeTable(times, ("cpp",), vals, miss)
        out = resample_hourly(table, cadence_minutes=5)
        span = times[-1] - times[0] + 1
        assert len(out) <= math.ceil(span / 60) + 1
        for h, v, m in zip(out.times // 60, out.values[:, 0], out.missing[:, 0]):
            sel = (times // 60 == h) & ~miss[:, 0]
            if m:
                assert 2 * sel.sum() < 12
            else:
                assert vals[sel, 0].min() - 1e-9 <= v <= vals[sel, 0].max() + 1e-9
                # never invent data: a present hour needs present inputs
                assert sel.any()


def table(hours, name, missing=None):
    hours = np.asarray(hours)
    return TimeTable.from_hours(hours, (name,), hours.astype(float)[:, None], missing)


class TestAlign:
    def test_intersection(self):
        out = align([table([1, 2, 3], "a"), table([2, 3, 4], "b")])
        assert out.hours.tolist() == [2, 3] and out.columns == ("a", "b")
        assert out.values.tolist() == [[2, 2], [3, 3]]

    def test_identical_sets(self):
        out = align([table([1, 2], "a"), table([1, 2], "b")])
        assert len(out) == 2 and out.columns == ("a", "b")

    def test_empty(self):
        assert len(align([table([1, 2], "a"), TimeTable.empty(("b",))])) == 0

    def test_duplicate_column(self):
        with pytest.raises(ValueError, match="duplicate"):
            align([table([1], "a"), table([1], "a")])

    @given(st.sets(st.integers(0, 50)), st.sets(st.integers(0, 50)))
    def test_commutative_and_idempotent(self, s1, s2):
        a, b = table(sorted(s1), "a"), table(sorted(s2), "b")
        ab, ba = align([a, b]), align([b, a])
        assert ab.hours.tolist() == ba.hours.tolist() == sorted(s1 & s2)
        restricted = a.restrict(ab.times).select(["a"])
        renamed = TimeTable(restricted.times, ("a2",), restricted.values, restricted.missing)
        assert align([a, renamed]).hours.tolist() == sorted(s1 & s2)

    def test_missing_stays_missing(self):
        a = table([1, 2], "a", missing=np.array([[True], [False]]))
        out = align([a, table([1, 2], "b")])
        assert out.missing[:, 0].tolist() == [True, False]


omni_line = st.tuples(
    st.integers(1995, 2020), st.integers(1, 365), st.integers(0, 23),
    st.one_of(st.just(9999.9), st.floats(-1e4, 1e4, allow_nan=False).map(lambda x: round(x, 3))),
    st.one_of(st.just(999.9), st.floats(-1e4, 1e4, allow_nan=False)),
)


class TestCanonicalCsv:
    @settings(max_examples=60)
    @given(st.lists(omni_line, max_size=30))
    def test_round_trip(self, lines):
        text = "\n".join(" ".join(repr(f) if isinstance(f, float) else str(f) for f in ln) for ln in lines)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            parsed = parse_columnar(text, COLMAP)
        again = read_csv(io.StringIO(to_csv_string(parsed)))
        assert again.equals(parsed)
        assert to_csv_string(again) == to_csv_string(parsed)

    def test_header_and_na(self):
        t = parse_columnar("2014 1 0 420.0 9999.9\n", COLMAP)
        lines = to_csv_string(t).splitlines()
        assert lines[0] == "epoch_hour,V,Bz"
        assert lines[1].endswith(",420.0,NA")

    def test_subhourly_uses_minutes(self):
        t = parse_superdarn("2014-01-01T00:05 1 2\n")
        again = read_csv(io.StringIO(to_csv_string(t)))
        assert to_csv_string(t).startswith("epoch_minute,cpp,pcr")
        assert again.equals(t)

    def test_table_rejects_unsorted(self):
        with pytest.raises(ValueError):
            TimeTable.from_hours([2, 1], ("a",), [[1.0], [2.0]])

    def test_epoch_calendar_vectorised(self):
        h = calendar_to_epoch_hour([2000, 2016], [1, 366], [0, 23])
        y, d, hr = epoch_hour_to_calendar(h)
        assert y.tolist() == [2000, 2016] and d.tolist() == [1, 366] and hr.tolist() == [0, 23]
