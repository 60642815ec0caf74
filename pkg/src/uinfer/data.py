"""Datasets, index splits and CSV round-tripping.

A dataset is a plain ``(N, d)`` float array. Helpers here validate that
shape and provide the ``DataSplit`` used by every split-based procedure.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


def as_dataset(values) -> np.ndarray:
    """Coerce ``values`` to a validated ``(N, d)`` float array.

    One-dimensional input is read as N scalar observations.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise InvalidInputError(f"dataset must be 1-d or 2-d, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidInputError("dataset must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("dataset contains non-finite values")
    return arr


def as_index(idx, n: int) -> np.ndarray:
    """Validate an index set against a dataset of ``n`` rows."""
    arr = np.asarray(idx, dtype=np.intp).ravel()
    if arr.size == 0:
        raise InvalidInputError("index set is empty")
    if arr.min() < 0 or arr.max() >= n:
        raise InvalidInputError(f"index out of range for dataset of size {n}")
    return arr


@dataclass(frozen=True, eq=False)
class DataSplit:
    """Two disjoint, nonempty index sets: ``d0`` evaluates, ``d1`` fits."""

    d0: np.ndarray
    d1: np.ndarray

    def __post_init__(self):
        d0 = np.asarray(self.d0, dtype=np.intp).ravel()
        d1 = np.asarray(self.d1, dtype=np.intp).ravel()
        if d0.size == 0 or d1.size == 0:
            raise InvalidInputError("both halves of a split must be nonempty")
        if np.intersect1d(d0, d1).size:
            raise InvalidInputError("split halves overlap")
        if min(d0.min(), d1.min()) < 0:
            raise InvalidInputError("negative index in split")
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "d1", d1)

    def swapped(self) -> "DataSplit":
        return DataSplit(self.d1, self.d0)

    def check(self, n: int) -> None:
        if max(self.d0.max(), self.d1.max()) >= n:
            raise InvalidInputError(f"split refers to rows beyond dataset size {n}")

    @classmethod
    def first_half(cls, n: int) -> "DataSplit":
        """Deterministic split: the first ``n // 2`` rows form ``d0``."""
        if n < 2:
            raise InvalidInputError("need at least two observations to split")
        m = n // 2
        return cls(np.arange(m), np.arange(m, n))

    @classmethod
    def random_halves(cls, n: int, rng) -> "DataSplit":
        """Uniformly random partition with ``|d0| = n // 2``."""
        if n < 2:
            raise InvalidInputError("need at least two observations to split")
        rng = np.random.default_rng(rng)
        perm = rng.permutation(n)
        m = n // 2
        return cls(np.sort(perm[:m]), np.sort(perm[m:]))


def read_dataset(source) -> np.ndarray:
    """Read a headered CSV (``y1,...,yd``) from a path or text stream.

    Malformed rows raise ``InvalidInputError`` naming the 1-based line.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return _parse_csv(fh)
    return _parse_csv(source)


def _parse_csv(fh) -> np.ndarray:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise InvalidInputError("line 1: empty CSV, expected header y1,...,yd") from None
    header = [h.strip() for h in header]
    expected = [f"y{j + 1}" for j in range(len(header))]
    if header != expected:
        raise InvalidInputError(f"line 1: header must be {','.join(expected)}, got {','.join(header)}")
    rows = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InvalidInputError(f"line {line}: expected {len(header)} columns, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise InvalidInputError(f"line {line}: non-numeric value") from None
        if not all(np.isfinite(vals)):
            raise InvalidInputError(f"line {line}: non-finite value")
        rows.append(vals)
    if not rows:
        raise InvalidInputError("CSV has a header but no observations")
    return np.array(rows, dtype=float)


def write_dataset(data, dest=None) -> str | None:
    """Write ``data`` as headered CSV; returns the text when ``dest`` is None."""
    data = as_dataset(data)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"y{j + 1}" for j in range(data.shape[1])])
    for row in data:
        writer.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if dest is None:
        return text
    Path(dest).write_text(text)
    return None
