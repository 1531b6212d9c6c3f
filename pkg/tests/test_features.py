import numpy as np
import pytest

from cbclpr.features import (
    DatasetFormatError,
    FeatureDataset,
    FeatureRecord,
    read_dataset,
    split_by_class,
    write_dataset,
)


def _dataset(labels, vectors):
    return FeatureDataset(np.array(labels), np.array(vectors, dtype=np.float32))


class TestConstruction:
    def test_basic_fields(self):
        ds = _dataset([0, 1], [[1.0, 2.0], [3.0, 4.0]])
        assert ds.dim == 2
        assert len(ds) == 2
        assert ds.class_ids == [0, 1]
        rec = ds.record(1)
        assert rec.label == 1
        np.testing.assert_array_equal(rec.vector, [3.0, 4.0])

    def test_empty_rejected(self):
        with pytest.raises(DatasetFormatError, match="at least one record"):
            FeatureDataset(np.empty(0, dtype=np.int64), np.empty((0, 3), np.float32))

    def test_negative_label_rejected(self):
        with pytest.raises(DatasetFormatError, match="record 1"):
            _dataset([0, -2], [[1.0], [2.0]])

    def test_non_finite_rejected(self):
        with pytest.raises(DatasetFormatError, match="record 0"):
            _dataset([0], [[np.nan, 1.0]])

    def test_from_records_mixed_dims(self):
        recs = [
            FeatureRecord(0, np.zeros(2, np.float32)),
            FeatureRecord(1, np.zeros(3, np.float32)),
        ]
        with pytest.raises(DatasetFormatError, match="mixed"):
            FeatureDataset.from_records(recs)


class TestBinaryFormat:
    def test_single_record_round_trip(self, tmp_path):
        ds = _dataset([0], [[1.0, 2.0]])
        path = tmp_path / "one.cbfv"
        write_dataset(ds, path)
        back = read_dataset(path)
        assert back.dim == 2
        assert len(back) == 1
        assert back.labels[0] == 0
        np.testing.assert_array_equal(back.vectors, ds.vectors)

    def test_file_size_formula(self, tmp_path):
        # header is 20 bytes; each record is 4 (label) + dim*4 bytes
        rng = np.random.default_rng(0)
        ds = _dataset(rng.integers(0, 5, 100), rng.normal(size=(100, 512)))
        path = tmp_path / "big.cbfv"
        write_dataset(ds, path)
        assert path.stat().st_size == 20 + 100 * (4 + 512 * 4)

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        for trial in range(20):
            n = int(rng.integers(1, 40))
            dim = int(rng.integers(1, 9))
            ds = _dataset(
                rng.integers(0, 6, n), rng.normal(scale=100.0, size=(n, dim))
            )
            path = tmp_path / f"t{trial}.cbfv"
            write_dataset(ds, path)
            back = read_dataset(path)
            np.testing.assert_array_equal(back.labels, ds.labels)
            assert back.vectors.tobytes() == ds.vectors.tobytes()
            # re-writing is byte-identical
            path2 = tmp_path / f"t{trial}b.cbfv"
            write_dataset(back, path2)
            assert path.read_bytes() == path2.read_bytes()

    def test_truncated_file_names_record(self, tmp_path):
        ds = _dataset([0, 1, 2], [[1.0, 2.0]] * 3)
        path = tmp_path / "trunc.cbfv"
        write_dataset(ds, path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(DatasetFormatError, match="truncated at record 2"):
            read_dataset(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.cbfv"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(DatasetFormatError, match="magic"):
            read_dataset(path)

    def test_non_finite_named(self, tmp_path):
        ds = _dataset([0, 1], [[1.0], [2.0]])
        path = tmp_path / "inf.cbfv"
        write_dataset(ds, path)
        raw = bytearray(path.read_bytes())
        raw[-4:] = np.array([np.inf], dtype="<f4").tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(DatasetFormatError, match="record 1"):
            read_dataset(path)


class TestCsvFormat:
    def test_parse(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("0,1.0,2.0\n1,3.0,4.0\n")
        ds = read_dataset(path, "csv")
        assert len(ds) == 2
        assert ds.dim == 2
        assert ds.class_ids == [0, 1]

    def test_dimension_mismatch_names_record(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1.0,2.0\n1,3.0,4.0,5.0\n")
        with pytest.raises(DatasetFormatError, match="record 1"):
            read_dataset(path, "csv")

    def test_round_trip_32bit_precision(self, tmp_path):
        rng = np.random.default_rng(2)
        ds = _dataset(rng.integers(0, 4, 25), rng.normal(scale=1e-3, size=(25, 5)))
        path = tmp_path / "rt.csv"
        write_dataset(ds, path, "csv")
        back = read_dataset(path, "csv")
        assert back.vectors.tobytes() == ds.vectors.tobytes()

    def test_non_finite_named(self, tmp_path):
        path = tmp_path / "inf.csv"
        path.write_text("0,1.0\n1,inf\n")
        with pytest.raises(DatasetFormatError, match="record 1"):
            read_dataset(path, "csv")


class TestSplitByClass:
    def test_per_class_order(self):
        ds = _dataset([0, 1, 0], [[1.0], [2.0], [3.0]])
        parts = split_by_class(ds)
        np.testing.assert_array_equal(parts[0].ravel(), [1.0, 3.0])
        np.testing.assert_array_equal(parts[1].ravel(), [2.0])

    def test_single_class(self):
        parts = split_by_class(_dataset([4, 4], [[1.0], [2.0]]))
        assert list(parts) == [4]

    def test_partition_property(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(1, 60))
            ds = _dataset(rng.integers(0, 5, n), rng.normal(size=(n, 3)))
            parts = split_by_class(ds)
            assert sum(len(v) for v in parts.values()) == len(ds)
            # reassembling by original index reproduces the input
            rebuilt = np.empty_like(ds.vectors)
            for c, vecs in parts.items():
                rebuilt[ds.labels == c] = vecs
            np.testing.assert_array_equal(rebuilt, ds.vectors)
