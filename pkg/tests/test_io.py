"""File format contracts: match CSV, landmark CSV, DVF1 binary, PNG, JSON reports."""

import json
import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from historeg import (
    MatchSet,
    read_dvf,
    read_image,
    read_landmarks_csv,
    read_match_csv,
    write_dvf,
    write_image,
    write_landmarks_csv,
    write_match_csv,
)
from historeg.errors import (
    BadMagicError,
    CorruptPayloadError,
    DecodeFailureError,
    MalformedRowError,
    NonContiguousIndexError,
    TruncatedPayloadError,
    UnsupportedFormatError,
)
from historeg.io import dumps_report, write_report

finite_floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


# ---------------------------------------------------------------- match CSV


def test_match_csv_roundtrip_preserves_rows_and_order(tmp_path):
    src = np.array([[1.5, 2.25], [100.0, -3.0], [0.0, 0.0]])
    dst = np.array([[9.0, 8.0], [7.125, 6.5], [5.0, 4.0]])
    matches = MatchSet(src, dst, provenance=["alpha", "beta", "alpha"])
    path = tmp_path / "m.csv"
    write_match_csv(matches, path)
    back = read_match_csv(path)
    assert np.array_equal(back.src, src)
    assert np.array_equal(back.dst, dst)
    assert list(back.provenance) == ["alpha", "beta", "alpha"]


def test_match_csv_written_header_includes_provenance(tmp_path):
    path = tmp_path / "m.csv"
    write_match_csv(MatchSet.empty(), path)
    text = path.read_text()
    assert text == "x_src,y_src,x_dst,y_dst,provenance\n"


def test_match_csv_reader_accepts_header_without_provenance(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("x_src,y_src,x_dst,y_dst\n1.0,2.0,3.0,4.0\n")
    back = read_match_csv(path)
    assert len(back) == 1
    assert list(back.provenance) == ["unknown"]


def test_match_csv_bad_header_is_line_one(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("a,b,c,d\n1,2,3,4\n")
    with pytest.raises(MalformedRowError) as err:
        read_match_csv(path)
    assert err.value.line == 1


def test_match_csv_bad_row_reports_one_based_line(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("x_src,y_src,x_dst,y_dst\n1,2,3,4\n1,2,three,4\n")
    with pytest.raises(MalformedRowError) as err:
        read_match_csv(path)
    assert err.value.line == 3
    assert "line 3" in str(err.value)


def test_match_csv_wrong_field_count_is_malformed(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("x_src,y_src,x_dst,y_dst\n1,2,3\n")
    with pytest.raises(MalformedRowError):
        read_match_csv(path)


def test_match_csv_nonfinite_value_is_malformed(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("x_src,y_src,x_dst,y_dst\nnan,2,3,4\n")
    with pytest.raises(MalformedRowError):
        read_match_csv(path)


# The tmp_path reuse across hypothesis examples is intentional: each example
# rewrites the file from scratch before reading it back.
@settings(
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
@given(
    st.lists(
        st.tuples(finite_floats, finite_floats, finite_floats, finite_floats),
        min_size=0,
        max_size=20,
    )
)
def test_match_csv_roundtrip_is_exact_for_any_finite_floats(tmp_path, rows):
    arr = np.array(rows, dtype=float).reshape(len(rows), 4)
    matches = MatchSet(arr[:, :2], arr[:, 2:])
    path = tmp_path / "m.csv"
    write_match_csv(matches, path)
    back = read_match_csv(path)
    assert np.array_equal(back.src, matches.src)
    assert np.array_equal(back.dst, matches.dst)


# ------------------------------------------------------------ landmark CSV


def test_landmarks_csv_two_rows(tmp_path):
    path = tmp_path / "l.csv"
    path.write_text(",X,Y\n0,5.5,7.25\n1,9,9\n")
    pts = read_landmarks_csv(path)
    assert np.array_equal(pts, np.array([[5.5, 7.25], [9.0, 9.0]]))


def test_landmarks_csv_index_gap_rejected(tmp_path):
    path = tmp_path / "l.csv"
    path.write_text(",X,Y\n0,1,1\n2,3,3\n")
    with pytest.raises(NonContiguousIndexError):
        read_landmarks_csv(path)


def test_landmarks_csv_empty_data_section(tmp_path):
    path = tmp_path / "l.csv"
    path.write_text(",X,Y\n")
    pts = read_landmarks_csv(path)
    assert pts.shape == (0, 2)


def test_landmarks_csv_roundtrip(tmp_path):
    pts = np.array([[0.5, 1.5], [200.0, 300.25], [-4.0, 7.0]])
    path = tmp_path / "l.csv"
    write_landmarks_csv(pts, path)
    assert path.read_text().splitlines()[0] == ",X,Y"
    assert np.array_equal(read_landmarks_csv(path), pts)


def test_landmarks_csv_bad_header_rejected(tmp_path):
    path = tmp_path / "l.csv"
    path.write_text("idx,X,Y\n0,1,1\n")
    with pytest.raises(MalformedRowError):
        read_landmarks_csv(path)


# ------------------------------------------------------------- DVF1 binary


def test_dvf_byte_layout_matches_reference_encoding(tmp_path):
    field = np.array(
        [[[1.0, -2.0], [3.5, 4.0]], [[0.0, 0.25], [-1.5, 9.0]]], dtype=np.float32
    )
    path = tmp_path / "f.dvf"
    write_dvf(field, path)
    blob = path.read_bytes()
    # Reference encoding built independently: magic, u32le dims, row-major f32le.
    expect = b"DVF1" + struct.pack("<II", 2, 2)
    for y in range(2):
        for x in range(2):
            expect += struct.pack("<ff", field[y, x, 0], field[y, x, 1])
    assert blob == expect


def test_dvf_roundtrip(tmp_path):
    gen = np.random.default_rng(7)
    field = gen.normal(size=(5, 9, 2)).astype(np.float32)
    path = tmp_path / "f.dvf"
    write_dvf(field, path)
    back = read_dvf(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, field)


def test_dvf_bad_magic(tmp_path):
    path = tmp_path / "f.dvf"
    path.write_bytes(b"DVF2" + struct.pack("<II", 1, 1) + struct.pack("<ff", 0, 0))
    with pytest.raises(BadMagicError):
        read_dvf(path)


def test_dvf_truncated_payload(tmp_path):
    path = tmp_path / "f.dvf"
    path.write_bytes(b"DVF1" + struct.pack("<II", 2, 2) + struct.pack("<ff", 0, 0))
    with pytest.raises(TruncatedPayloadError):
        read_dvf(path)


def test_dvf_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "f.dvf"
    body = b"DVF1" + struct.pack("<II", 1, 1) + struct.pack("<ff", 0, 0)
    path.write_bytes(body + b"x")
    with pytest.raises(TruncatedPayloadError):
        read_dvf(path)


def test_dvf_nonfinite_payload_rejected(tmp_path):
    path = tmp_path / "f.dvf"
    path.write_bytes(
        b"DVF1" + struct.pack("<II", 1, 1) + struct.pack("<ff", float("nan"), 0.0)
    )
    with pytest.raises(CorruptPayloadError):
        read_dvf(path)


def test_dvf_zero_dims_rejected(tmp_path):
    path = tmp_path / "f.dvf"
    path.write_bytes(b"DVF1" + struct.pack("<II", 0, 3))
    with pytest.raises(CorruptPayloadError):
        read_dvf(path)


@settings(
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_dvf_roundtrip_random_fields(tmp_path, w, h, seed):
    gen = np.random.default_rng(seed)
    field = gen.uniform(-100, 100, size=(h, w, 2)).astype(np.float32)
    path = tmp_path / "f.dvf"
    write_dvf(field, path)
    assert np.array_equal(read_dvf(path), field)


# -------------------------------------------------------------------- PNG


def test_png_rgb_roundtrip_exact_bytes(tmp_path):
    img = np.array(
        [[[255, 0, 0], [0, 255, 0]], [[0, 0, 255], [10, 20, 30]]], dtype=np.uint8
    )
    path = tmp_path / "i.png"
    write_image(img, path)
    back = read_image(path)
    assert back.shape == (2, 2, 3)
    assert np.array_equal(back, img)


def test_png_gray_roundtrip(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    path = tmp_path / "i.png"
    write_image(img, path)
    back = read_image(path)
    assert back.shape == (3, 4)
    assert np.array_equal(back, img)


def test_png_16bit_rejected(tmp_path):
    from PIL import Image

    path = tmp_path / "deep.png"
    Image.fromarray(np.zeros((2, 2), dtype=np.uint16)).save(path)
    with pytest.raises(UnsupportedFormatError):
        read_image(path)


def test_png_garbage_is_decode_failure(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"this is not an image")
    with pytest.raises(DecodeFailureError):
        read_image(path)


# ------------------------------------------------------------ JSON reports


def test_report_preserves_key_order_and_is_valid_json():
    text = dumps_report({"zeta": 1, "alpha": {"b": 2.5, "a": [1, 2]}})
    assert text.index("zeta") < text.index("alpha")
    assert json.loads(text) == {"zeta": 1, "alpha": {"b": 2.5, "a": [1, 2]}}


def test_report_floats_use_nine_significant_digits():
    text = dumps_report({"v": 0.123456789123456789})
    assert "0.123456789" in text
    assert "1234567891" not in text


def test_write_report_returns_text_without_path():
    assert write_report({"x": 1}) == dumps_report({"x": 1})


def test_write_report_to_file(tmp_path):
    path = tmp_path / "r.json"
    write_report({"x": [1.5, 2]}, path)
    assert json.loads(path.read_text()) == {"x": [1.5, 2]}
