import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prcorr import ingest
from prcorr.geo import GeodeticPoint
from prcorr.ingest import MeasurementSet, SatObservation

HEAD = "time_ms,svid,pr_m,cn0_dbhz,sat_x_m,sat_y_m,sat_z_m,pr_sigma_m\n"
ROW = "{t},{s},2.1e7,40,1.5e7,1e7,2e7,3\n"


def epochs_text(*rows):
    return (HEAD + "".join(ROW.format(t=t, s=s) for t, s in rows)).encode()


def test_group_by_time_in_file_order():
    eps = ingest.parse_epochs_csv(epochs_text((1000, 5), (1000, 3), (0, 9)))
    assert [e.time_ms for e in eps] == [0, 1000]
    assert eps[1].svids == [5, 3]
    assert len(eps[1].obs) == 2


def test_header_only_is_empty():
    assert ingest.parse_epochs_csv(HEAD.encode()) == []


def test_accepts_streams():
    data = epochs_text((0, 1))
    assert len(ingest.parse_epochs_csv(io.BytesIO(data))) == 1
    assert len(ingest.parse_epochs_csv(io.StringIO(data.decode()))) == 1


@pytest.mark.parametrize("text,err,where", [
    ("", ingest.FormatError, "line 1"),
    (HEAD.replace("svid,pr_m", "pr_m,svid"), ingest.FormatError, "line 1"),
    (HEAD + "0,1,2.1e7,40,1,2\n", ingest.FormatError, "line 2"),
    (HEAD + "0,1,abc,40,1,2,3,3\n", ingest.FieldParseError, "line 2, column 3"),
    (HEAD + "0,1,nan,40,1,2,3,3\n", ingest.FieldParseError, "line 2"),
    (HEAD + ROW.format(t=0, s=1) + ROW.format(t=0, s=33), ingest.RangeError, "line 3"),
    (HEAD + "0,1,2.1e7,40,1,2,3,0\n", ingest.RangeError, "line 2"),
    (HEAD + "0,1,200,40,1,2,3,1\n", ingest.RangeError, "line 2"),
    (HEAD + ROW.format(t=0, s=4) + ROW.format(t=0, s=4), ingest.DuplicateObservationError, "line 3"),
])
def test_epoch_errors(text, err, where):
    with pytest.raises(err, match=where):
        ingest.parse_epochs_csv(text.encode())


TRUTH = "time_ms,lat_deg,lon_deg,alt_m\n"


def test_truth_parse_and_errors():
    tr = ingest.parse_ground_truth_csv((TRUTH + "0,37,-122,5\n1000,37.1,-122,5\n2000,37.2,-122,6\n").encode())
    assert len(tr) == 3
    assert tr.point(2) == GeodeticPoint(37.2, -122, 6)
    with pytest.raises(ingest.RangeError, match="line 2"):
        ingest.parse_ground_truth_csv((TRUTH + "0,91,0,0\n").encode())
    with pytest.raises(ingest.RangeError):
        ingest.parse_ground_truth_csv((TRUTH + "0,0,-180,0\n").encode())
    with pytest.raises(ingest.OrderError, match="line 3"):
        ingest.parse_ground_truth_csv((TRUTH + "1000,0,0,0\n500,0,0,0\n").encode())


def _track(times, lats, lons=None):
    lons = lons if lons is not None else [0.0] * len(times)
    return ingest.GroundTruthTrack(np.array(times, dtype=np.int64), np.array(lats, float),
                                   np.array(lons, float), np.zeros(len(times)))


def _stubs(times):
    return [MeasurementSet(t, ()) for t in times]


def test_align_identity_and_midpoint():
    tr = _track([1000, 2000, 3000], [10.0, 20.0, 30.0])
    pairs, dropped = ingest.align_truth(_stubs([1000, 2000, 3000]), tr)
    assert dropped == 0
    assert [p.latitude for _, p in pairs] == [10.0, 20.0, 30.0]
    pairs, _ = ingest.align_truth(_stubs([1500]), tr)
    assert pairs[0][1].latitude == pytest.approx(15.0)


def test_align_drops_and_fails():
    tr = _track([1000, 2000], [10.0, 20.0])
    pairs, dropped = ingest.align_truth(_stubs([1000, 12000]), tr, tolerance_ms=500)
    assert dropped == 1 and len(pairs) == 1
    with pytest.raises(ingest.AlignmentError):
        ingest.align_truth(_stubs([12000]), tr)
    with pytest.raises(ingest.AlignmentError):
        ingest.align_truth([], tr)


def test_align_across_antimeridian():
    tr = _track([0, 1000], [0.0, 0.0], [179.9, -179.9])
    pairs, _ = ingest.align_truth(_stubs([500]), tr)
    assert pairs[0][1].longitude == pytest.approx(180.0)


finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e9, max_value=1e9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(1e6 * 1.001, 4e7), st.floats(0, 60), finite, finite, finite,
                          st.floats(1e-3, 100)), min_size=1, max_size=32))
def test_write_parse_bit_exact(rows):
    obs = tuple(SatObservation(i + 1, *r[:2], tuple(r[2:5]), r[5]) for i, r in enumerate(rows))
    ep = [MeasurementSet(123, obs)]
    buf = io.StringIO()
    ingest.write_epochs_csv(buf, ep)
    back = ingest.parse_epochs_csv(buf.getvalue().encode())
    assert back == ep


def test_truth_and_track_round_trip(rng):
    times = np.arange(5, dtype=np.int64) * 1000
    pts = [GeodeticPoint(*v) for v in zip(rng.uniform(-90, 90, 5), rng.uniform(-179, 180, 5),
                                          rng.uniform(-10, 100, 5))]
    buf = io.StringIO()
    ingest.write_ground_truth_csv(buf, times, pts)
    tr = ingest.parse_ground_truth_csv(buf.getvalue())
    assert [tr.point(i) for i in range(5)] == pts
    llh = np.array([[p.latitude, p.longitude, p.altitude] for p in pts])
    clk = rng.normal(size=5)
    buf = io.StringIO()
    ingest.write_track_csv(buf, times, llh, clk)
    t2, llh2, clk2 = ingest.parse_track_csv(buf.getvalue())
    assert np.array_equal(t2, times) and np.array_equal(llh2, llh) and np.array_equal(clk2, clk)


def test_with_pseudoranges_keeps_other_fields():
    ep = ingest.parse_epochs_csv(epochs_text((0, 1), (0, 2)))[0]
    new = ep.with_pseudoranges([2.2e7, 2.3e7])
    assert list(new.pseudoranges) == [2.2e7, 2.3e7]
    assert new.svids == ep.svids and np.array_equal(new.sat_positions, ep.sat_positions)
    assert np.array_equal(new.cn0, ep.cn0) and np.array_equal(new.sigmas, ep.sigmas)
