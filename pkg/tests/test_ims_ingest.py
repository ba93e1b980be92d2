import json
from datetime import datetime

import numpy as np
import pytest

from conftest import ims_name, make_files, record_text
from exceptions import CatalogError, RecordParseError, ScalingError
from ims_ingest import (bearing_channel, build_catalog, decimate_catalog, inverse_scale, load_catalog,
                        load_dataset_dir, parse_record_file, parse_timestamp, save_catalog, scale_catalog,
                        serialize_record, write_catalog_index)
from models import RawRecord, ScalingMode


# ---------------------------------------------------------------------------
# parse_record_file
# ---------------------------------------------------------------------------

def test_parse_three_rows_four_channels() -> None:
    text = "-0.022\t-0.039\t-0.183\t-0.054\n-0.105\t-0.017\t-0.164\t-0.183\n-0.183\t-0.098\t-0.195\t-0.125\n"
    record = parse_record_file(text, expected_rows=3)
    assert record.values.shape == (3, 4)
    assert record.values[1, 3] == -0.183


def test_parse_accepts_mixed_whitespace() -> None:
    record = parse_record_file("1.0   2.0\n3.0\t4.0\n", expected_rows=2)
    np.testing.assert_array_equal(record.values, [[1.0, 2.0], [3.0, 4.0]])


def test_parse_row_count_mismatch() -> None:
    text = "0.1\t0.2\t0.3\t0.4\n" * 20479
    with pytest.raises(RecordParseError, match="row count 20479 != expected 20480"):
        parse_record_file(text, expected_rows=20480)


def test_parse_empty_file() -> None:
    with pytest.raises(RecordParseError, match="row count 0"):
        parse_record_file("", expected_rows=3)


def test_parse_reports_line_of_non_numeric_token() -> None:
    with pytest.raises(RecordParseError) as info:
        parse_record_file("0.1 0.2\n0.3 abc\n0.5 0.6\n", expected_rows=3, source="bad.txt")
    assert info.value.line == 2
    assert "abc" in str(info.value)
    assert str(info.value).startswith("bad.txt: line 2")


def test_parse_reports_line_of_column_mismatch() -> None:
    with pytest.raises(RecordParseError) as info:
        parse_record_file("0.1 0.2\n0.3 0.4\n0.5 0.6 0.7\n", expected_rows=3)
    assert info.value.line == 3


def test_parse_rejects_non_finite_values() -> None:
    with pytest.raises(RecordParseError) as info:
        parse_record_file("0.1 0.2\nnan 0.4\n", expected_rows=2)
    assert info.value.line == 2


def test_serialize_then_parse_is_exact(rng) -> None:
    record = RawRecord(values=rng.normal(size=(50, 4)))
    parsed = parse_record_file(serialize_record(record), expected_rows=50)
    np.testing.assert_array_equal(parsed.values, record.values)


def test_parse_reads_shortest_repr_values_exactly() -> None:
    values = np.array([[0.1 + 0.2, 1 / 3], [-2 / 7, 1e-300], [123456.789e-10, np.nextafter(1.0, 2.0)]])
    parsed = parse_record_file(record_text(values), expected_rows=3)
    np.testing.assert_array_equal(parsed.values, values)

    for seed in range(5):
        record = RawRecord(values=np.random.default_rng(seed).standard_t(3, size=(200, 4)))
        np.testing.assert_array_equal(parse_record_file(serialize_record(record), 200).values, record.values)


def test_load_dataset_dir_skips_hidden_files_and_sorts(tmp_path) -> None:
    for index in (2, 0, 1):
        (tmp_path / ims_name(index)).write_text(record_text(np.full((3, 2), float(index))))
    (tmp_path / ".DS_Store").write_text("junk")

    files = load_dataset_dir(tmp_path, expected_rows=3, workers=2)
    assert [name for name, _ in files] == [ims_name(0), ims_name(1), ims_name(2)]
    assert files[2][1].values[0, 0] == 2.0


def test_load_dataset_dir_missing_directory(tmp_path) -> None:
    with pytest.raises(CatalogError):
        load_dataset_dir(tmp_path / "nope", expected_rows=3)


# ---------------------------------------------------------------------------
# Catalogs
# ---------------------------------------------------------------------------

def test_parse_timestamp() -> None:
    assert parse_timestamp("2004.02.12.10.32.39") == datetime(2004, 2, 12, 10, 32, 39)
    with pytest.raises(CatalogError):
        parse_timestamp("readme.txt")


@pytest.mark.parametrize("bearing, channels, sensor, expected", [
    ("S1B3", 8, 1, 4),
    ("S1B3", 8, 2, 5),
    ("S1B4", 8, 1, 6),
    ("S1B4", 8, 2, 7),
    ("S2B1", 4, 1, 0),
    ("S3B3", 4, 1, 2),
    ("B2", 4, 1, 1),
    ("3", 4, 1, 2),
])
def test_bearing_channel(bearing, channels, sensor, expected) -> None:
    assert bearing_channel(bearing, channels, sensor) == expected


def test_bearing_channel_rejects_unknown_layouts() -> None:
    with pytest.raises(CatalogError):
        bearing_channel("S2B5", 4)
    with pytest.raises(CatalogError):
        bearing_channel("S2B1", 4, sensor=2)
    with pytest.raises(CatalogError):
        bearing_channel("S2B1", 6)


def test_build_catalog_orders_by_timestamp() -> None:
    files = make_files(5)
    shuffled = [files[i] for i in (3, 0, 4, 1, 2)]
    catalog = build_catalog(shuffled, "S2B1", channel=1)

    assert catalog.n_samples == 5
    assert [meta.ordinal for meta in catalog.metas] == list(range(5))
    assert catalog.source_names == [name for name, _ in files]
    np.testing.assert_array_equal(catalog.data[3], files[3][1].values[:, 1])


def test_build_catalog_rejects_channel_out_of_range() -> None:
    with pytest.raises(CatalogError, match="channel 4 out of range"):
        build_catalog(make_files(3, channels=4), "S2B1", channel=4)


def test_build_catalog_rejects_duplicate_timestamps() -> None:
    files = make_files(3)
    with pytest.raises(CatalogError, match="duplicate timestamp"):
        build_catalog(files + [files[1]], "S2B1", channel=0)


def test_build_catalog_rejects_differing_lengths() -> None:
    files = make_files(2, rows=6) + [(ims_name(7), RawRecord(values=np.ones((5, 4))))]
    with pytest.raises(CatalogError, match="differing lengths"):
        build_catalog(files, "S2B1", channel=0)


def test_build_catalog_rejects_bad_file_name() -> None:
    with pytest.raises(CatalogError):
        build_catalog([("notes.txt", RawRecord(values=np.ones((3, 1))))], "S2B1", channel=0)


def test_decimate_keeps_catalog_length() -> None:
    catalog = build_catalog(make_files(4, rows=12), "S2B1", channel=0)
    decimated = decimate_catalog(catalog, 4)
    assert decimated.n_samples == 4
    assert decimated.sample_len == 3
    np.testing.assert_array_equal(decimated.data, catalog.data[:, ::4])
    with pytest.raises(CatalogError):
        decimate_catalog(catalog, 0)


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

def test_global_scaling_maps_to_unit_range() -> None:
    catalog = build_catalog(make_files(6), "S2B1", channel=0)
    scaled = scale_catalog(catalog, ScalingMode.GLOBAL_MINMAX)
    assert scaled.data.min() == 0.0
    assert scaled.data.max() == pytest.approx(1.0, abs=1e-15)
    assert scaled.scaling.min == catalog.data.min()
    assert scaled.scaling.max == catalog.data.max()
    np.testing.assert_allclose(inverse_scale(scaled), catalog.data, rtol=0, atol=1e-12)


def test_global_scaling_hand_computed() -> None:
    files = [(ims_name(0), RawRecord(values=np.array([[-5.0], [0.0], [5.0]])))]
    scaled = scale_catalog(build_catalog(files, "S2B1", channel=0), ScalingMode.GLOBAL_MINMAX)
    np.testing.assert_allclose(scaled.data, [[0.0, 0.5, 1.0]], rtol=0, atol=1e-15)

    rows = [[0.0, 1.0], [1.0, 2.0]]
    files = [(ims_name(i), RawRecord(values=np.array(row).reshape(-1, 1))) for i, row in enumerate(rows)]
    scaled = scale_catalog(build_catalog(files, "S2B1", channel=0), ScalingMode.GLOBAL_MINMAX)
    np.testing.assert_allclose(scaled.data, [[0.0, 0.5], [0.5, 1.0]], rtol=0, atol=1e-15)


def test_global_scaling_fit_count_clips_later_samples() -> None:
    catalog = build_catalog(make_files(6), "S2B1", channel=0)
    boosted = catalog.replace(data=np.vstack([catalog.data[:4], 10 * catalog.data[4:]]))
    scaled = scale_catalog(boosted, ScalingMode.GLOBAL_MINMAX, fit_count=4)

    assert scaled.scaling.fit_count == 4
    assert scaled.data.min() >= 0.0 and scaled.data.max() <= 1.0
    assert scaled.data[:4].min() == 0.0
    assert scaled.data[:4].max() == pytest.approx(1.0, abs=1e-15)
    assert np.any(scaled.data[4:] == 1.0)


def test_per_sample_scaling() -> None:
    catalog = build_catalog(make_files(4), "S2B1", channel=2)
    scaled = scale_catalog(catalog, ScalingMode.PER_SAMPLE_MINMAX)
    np.testing.assert_allclose(scaled.data.min(axis=1), 0.0, atol=1e-15)
    np.testing.assert_allclose(scaled.data.max(axis=1), 1.0, atol=1e-15)
    with pytest.raises(ScalingError):
        inverse_scale(scaled)


def test_scaling_rejects_constant_data() -> None:
    files = [(ims_name(i), RawRecord(values=np.full((4, 1), 0.5))) for i in range(3)]
    catalog = build_catalog(files, "S2B1", channel=0)
    with pytest.raises(ScalingError):
        scale_catalog(catalog, ScalingMode.GLOBAL_MINMAX)
    with pytest.raises(ScalingError):
        scale_catalog(catalog, ScalingMode.PER_SAMPLE_MINMAX)


def test_scaling_none_leaves_data() -> None:
    catalog = build_catalog(make_files(3), "S2B1", channel=0)
    scaled = scale_catalog(catalog, ScalingMode.NONE)
    np.testing.assert_array_equal(scaled.data, catalog.data)
    assert scaled.scaling.mode == ScalingMode.NONE


def test_catalog_data_is_read_only() -> None:
    catalog = build_catalog(make_files(3), "S2B1", channel=0)
    with pytest.raises(ValueError):
        catalog.data[0, 0] = 1.0


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def test_save_and_load_catalog(tmp_path) -> None:
    catalog = scale_catalog(build_catalog(make_files(5), "S1B3", channel=0), ScalingMode.GLOBAL_MINMAX, fit_count=3)
    loaded = load_catalog(save_catalog(catalog, tmp_path / "catalog.npz"))

    np.testing.assert_array_equal(loaded.data, catalog.data)
    assert loaded.metas == catalog.metas
    assert loaded.scaling == catalog.scaling
    assert loaded.bearing_id == "S1B3"


def test_catalog_index(tmp_path) -> None:
    catalog = build_catalog(make_files(3), "S2B1", channel=0)
    index = json.loads(write_catalog_index(catalog, tmp_path / "index.json").read_text())
    assert index["N"] == 3
    assert index["channel"] == 0
    assert index["source_names"] == catalog.source_names


def test_load_catalog_missing_file(tmp_path) -> None:
    with pytest.raises(CatalogError):
        load_catalog(tmp_path / "missing.npz")
