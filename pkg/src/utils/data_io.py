"""
Data File I/O

CSV loaders for grouped samples, Quadratic objective matrices and JSON
documents. Every read failure is raised as DataFileError naming the path.
"""

import csv
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson

from src.exceptions import DataFileError, InvalidDatasetError
from src.schemas.core import GroupedDataset

PathLike = Union[str, Path]

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def read_csv_rows(path: PathLike) -> List[List[float]]:
    """
    Read a header-less numeric CSV file.

    Raises:
        DataFileError: missing file, non-numeric field or ragged rows
    """
    path = Path(path)
    if not path.is_file():
        raise DataFileError(path, "file not found")
    rows: List[List[float]] = []
    width: Optional[int] = None
    try:
        with path.open(newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or all(not field.strip() for field in row):
                    continue
                try:
                    values = [float(field) for field in row]
                except ValueError:
                    raise DataFileError(path, f"line {lineno}: non-numeric field")
                if width is None:
                    width = len(values)
                elif len(values) != width:
                    raise DataFileError(
                        path, f"line {lineno}: ragged row with {len(values)} fields, expected {width}"
                    )
                rows.append(values)
    except OSError as e:
        raise DataFileError(path, str(e))
    if not rows:
        raise DataFileError(path, "no samples")
    return rows


def load_group_files(paths: Sequence[PathLike]) -> GroupedDataset:
    """One CSV file per group, in group order; the last file is the pivot."""
    groups = []
    for path in paths:
        arr = np.asarray(read_csv_rows(path), dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DataFileError(path, "non-finite value")
        groups.append(arr)
    try:
        return GroupedDataset.from_arrays(groups)
    except InvalidDatasetError as e:
        raise DataFileError(", ".join(str(p) for p in paths), str(e))


def load_labelled_file(path: PathLike, k: Optional[int] = None) -> GroupedDataset:
    """
    Single CSV whose first column is the 1-based group index.

    Args:
        path: CSV file
        k: Number of groups; the largest label when omitted
    """
    arr = np.asarray(read_csv_rows(path), dtype=float)
    if arr.shape[1] < 2:
        raise DataFileError(path, "need a label column and at least one coordinate")
    labels = arr[:, 0]
    if np.any(labels != np.round(labels)) or np.any(labels < 1):
        raise DataFileError(path, "group labels must be positive integers")
    labels = labels.astype(int)
    k = int(labels.max()) if k is None else int(k)
    groups = []
    for i in range(1, k + 1):
        rows = arr[labels == i, 1:]
        if rows.shape[0] == 0:
            raise DataFileError(path, f"group {i} has no samples")
        groups.append(rows)
    return GroupedDataset.from_arrays(groups)


def load_dataset(paths: Sequence[PathLike], pivot: Optional[int] = None) -> GroupedDataset:
    """
    Load grouped samples from one labelled file or one file per group.

    Args:
        paths: Data files
        pivot: 1-based group moved to the last (pivot) position
    """
    paths = list(paths)
    if not paths:
        raise DataFileError("<none>", "no data files given")
    dataset = load_labelled_file(paths[0]) if len(paths) == 1 else load_group_files(paths)
    if pivot is not None:
        dataset = dataset.with_pivot(pivot)
    return dataset


def write_group_files(dataset: GroupedDataset, directory: PathLike, prefix: str = "group") -> List[Path]:
    """Write each group as its own CSV; returns the paths in group order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, group in enumerate(dataset.groups, start=1):
        path = directory / f"{prefix}{i}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            for row in group:
                writer.writerow([repr(float(v)) for v in row])
        paths.append(path)
    return paths


def load_quadratic(h_path: Optional[PathLike], q_path: Optional[PathLike]) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    """Read the Quadratic objective's H matrix and q vector files."""
    H = np.asarray(read_csv_rows(h_path), dtype=float) if h_path else None
    q = np.asarray(read_csv_rows(q_path), dtype=float).ravel() if q_path else None
    return H, q


def dumps(doc: Any) -> bytes:
    """Serialise to indented, key-sorted JSON bytes."""
    return orjson.dumps(doc, option=JSON_OPTIONS)


def write_json(path: PathLike, doc: Any) -> Path:
    """Write a JSON document, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(doc) + b"\n")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    """Read a JSON document written by write_json."""
    path = Path(path)
    if not path.is_file():
        raise DataFileError(path, "file not found")
    try:
        return orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise DataFileError(path, f"invalid JSON: {e}")


def write_csv_table(path: PathLike, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    """Write a CSV table with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        writer.writerows(rows)
    return path
