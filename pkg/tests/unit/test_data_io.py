"""
Tests for Data File I/O

Unit tests for CSV loaders and JSON documents.
"""

import numpy as np
import pytest

from src.exceptions import DataFileError
from src.utils.data_io import (
    load_dataset,
    load_labelled_file,
    load_quadratic,
    read_csv_rows,
    read_json,
    write_csv_table,
    write_group_files,
    write_json,
)


def write_text(path, text):
    path.write_text(text)
    return path


class TestReadCsvRows:
    """Tests for the numeric CSV reader."""

    def test_reads_rows(self, tmp_path):
        """Test numbers parse and blank lines are skipped."""
        path = write_text(tmp_path / "a.csv", "1,2\n\n3.5,-4e-1\n")
        assert read_csv_rows(path) == [[1.0, 2.0], [3.5, -0.4]]

    def test_ragged(self, tmp_path):
        """Test rows of different widths name the line."""
        path = write_text(tmp_path / "a.csv", "1,2\n3\n")
        with pytest.raises(DataFileError) as excinfo:
            read_csv_rows(path)
        assert "line 2" in excinfo.value.reason
        assert excinfo.value.path == str(path)

    def test_non_numeric(self, tmp_path):
        """Test text fields are rejected."""
        path = write_text(tmp_path / "a.csv", "x,y\n1,2\n")
        with pytest.raises(DataFileError):
            read_csv_rows(path)

    def test_missing(self, tmp_path):
        """Test a missing file is reported."""
        with pytest.raises(DataFileError):
            read_csv_rows(tmp_path / "absent.csv")

    def test_empty(self, tmp_path):
        """Test a file without rows is rejected."""
        with pytest.raises(DataFileError):
            read_csv_rows(write_text(tmp_path / "a.csv", "\n"))


class TestLoadDataset:
    """Tests for grouped-sample loading."""

    def test_group_files_roundtrip(self, group_files, three_gaussians):
        """Test files written per group load back unchanged."""
        loaded = load_dataset(group_files)
        assert loaded.k == 3
        for a, b in zip(loaded.groups, three_gaussians.groups):
            np.testing.assert_array_equal(a, b)

    def test_pivot(self, group_files, three_gaussians):
        """Test --pivot moves the chosen group last."""
        loaded = load_dataset(group_files, pivot=1)
        np.testing.assert_array_equal(loaded.pivot, three_gaussians.groups[0])
        np.testing.assert_array_equal(loaded.groups[0], three_gaussians.groups[1])

    def test_labelled_file(self, tmp_path):
        """Test the first column selects the group."""
        path = write_text(tmp_path / "l.csv", "1,0.5\n2,1.5\n1,0.7\n2,-1\n")
        data = load_labelled_file(path)
        assert data.sizes == [2, 2]
        np.testing.assert_array_equal(data.groups[0][:, 0], [0.5, 0.7])

    def test_labelled_empty_group(self, tmp_path):
        """Test a label with no rows is rejected."""
        path = write_text(tmp_path / "l.csv", "1,0.5\n3,1.5\n")
        with pytest.raises(DataFileError):
            load_labelled_file(path)

    def test_labelled_bad_labels(self, tmp_path):
        """Test fractional labels are rejected."""
        path = write_text(tmp_path / "l.csv", "1.5,0.5\n2,1.5\n")
        with pytest.raises(DataFileError):
            load_labelled_file(path)

    def test_dimension_mismatch(self, tmp_path):
        """Test group files of different widths are rejected."""
        a = write_text(tmp_path / "a.csv", "1,2\n")
        b = write_text(tmp_path / "b.csv", "1\n")
        with pytest.raises(DataFileError):
            load_dataset([a, b])

    def test_no_files(self):
        """Test an empty file list is rejected."""
        with pytest.raises(DataFileError):
            load_dataset([])


class TestQuadraticFiles:
    """Tests for the Quadratic H and q loaders."""

    def test_reads_both(self, tmp_path):
        """Test H as a matrix and q as a flat vector."""
        h = write_text(tmp_path / "h.csv", "1,0\n0,2\n")
        q = write_text(tmp_path / "q.csv", "0.5\n-1\n")
        H, qv = load_quadratic(h, q)
        np.testing.assert_array_equal(H, [[1.0, 0.0], [0.0, 2.0]])
        np.testing.assert_array_equal(qv, [0.5, -1.0])

    def test_optional(self):
        """Test missing paths give None."""
        assert load_quadratic(None, None) == (None, None)


class TestJson:
    """Tests for JSON documents."""

    def test_numpy_values(self, tmp_path):
        """Test numpy arrays serialise as lists."""
        path = write_json(tmp_path / "out" / "doc.json", {"b": np.array([1.0, 2.0]), "a": 1})
        assert read_json(path) == {"a": 1, "b": [1.0, 2.0]}

    def test_invalid(self, tmp_path):
        """Test malformed JSON is reported."""
        with pytest.raises(DataFileError):
            read_json(write_text(tmp_path / "bad.json", "{not json"))

    def test_csv_table(self, tmp_path):
        """Test the header row comes first."""
        path = write_csv_table(tmp_path / "t.csv", ["method", "d=2"], [["oracle", "0.0"]])
        assert path.read_text().splitlines() == ["method,d=2", "oracle,0.0"]
