"""Long-format longitudinal data.

One row per observed ``(subject, response type, visit)``; absent visits are
simply missing rows. Rows are kept sorted by subject so per-subject sums can
use contiguous segments.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DataError, SchemaError


@dataclass(frozen=True, eq=False)
class LongDataset:
    subject_ids: tuple[str, ...]
    subject: np.ndarray
    response: np.ndarray
    visit: np.ndarray
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        subject = np.asarray(self.subject, dtype=np.int64).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        N = y.shape[0]
        X = _as_rows(self.X, N)
        Z = _as_rows(self.Z, N)
        response = np.asarray(self.response, dtype=np.int64).reshape(-1)
        visit = np.asarray(self.visit, dtype=np.int64).reshape(-1)
        if not (subject.shape[0] == response.shape[0] == visit.shape[0] == N):
            raise DataError("subject, response, visit and y must have equal length")
        if N and (subject.min() < 0 or subject.max() >= len(self.subject_ids)):
            raise DataError("subject codes out of range")
        if not np.all(np.isfinite(y)):
            raise DataError("y contains non-finite values")
        keys = np.stack([subject, response, visit], axis=1)
        if N and np.unique(keys, axis=0).shape[0] != N:
            raise SchemaError("duplicate (subject, response, visit) key")
        order = np.argsort(subject, kind="stable")
        for name, arr in [("subject", subject), ("response", response), ("visit", visit),
                          ("y", y), ("X", X), ("Z", Z)]:
            arr = arr[order]
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))

    @property
    def N(self) -> int:
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return len(self.subject_ids)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Z.shape[1]

    @property
    def H(self) -> int:
        return int(np.unique(self.response).shape[0]) if self.N else 0

    @cached_property
    def XtX(self) -> np.ndarray:
        return self.X.T @ self.X

    @cached_property
    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """``(subjects with rows, start offset of each)`` for ``np.add.reduceat``."""
        if self.N == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        starts = np.flatnonzero(np.r_[True, self.subject[1:] != self.subject[:-1]])
        return self.subject[starts], starts

    def with_subjects(self, extra_ids) -> "LongDataset":
        """Same rows, with additional subjects that have no observations."""
        return LongDataset(tuple(self.subject_ids) + tuple(extra_ids), self.subject,
                           self.response, self.visit, self.y, self.X, self.Z)


def _as_rows(a, N: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2 and a.shape[0] == N:
        return a
    return a.reshape(N, -1)


def indicator_design(response, visit, n_responses: int, n_visits: int) -> np.ndarray:
    """Visit-indicator random design: a single 1 at ``(h - 1) * n_visits + (j - 1)``."""
    response = np.asarray(response)
    visit = np.asarray(visit)
    Z = np.zeros((response.shape[0], n_responses * n_visits))
    Z[np.arange(response.shape[0]), (response - 1) * n_visits + (visit - 1)] = 1.0
    return Z


def standardize_columns(X: np.ndarray) -> np.ndarray:
    """Centre and scale each column to unit (population) sd; constant columns are left alone."""
    X = np.array(X, dtype=float, copy=True)
    if X.shape[0] == 0:
        return X
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    varying = sd > 0
    X[:, varying] = (X[:, varying] - mean[varying]) / sd[varying]
    return X


def _numbered(names, prefix):
    cols = sorted((c for c in names if c.startswith(prefix) and c[len(prefix):].isdigit()),
                  key=lambda c: int(c[len(prefix):]))
    expect = [f"{prefix}{i}" for i in range(1, len(cols) + 1)]
    if cols != expect:
        raise SchemaError(f"{prefix} columns must be numbered 1..k without gaps, got {cols}")
    return cols


def load_csv(path, log_transform: bool = False, standardize: bool = False) -> LongDataset:
    """Read ``subject,response,visit,y,x1..xp[,z1..zq]``.

    Without ``z`` columns the indicator design over (response, visit) is
    built, giving ``q = H * max_visit``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for col in ("subject", "response", "visit", "y"):
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        xcols = _numbered(header, "x")
        zcols = _numbered(header, "z")
        pos = {c: i for i, c in enumerate(header)}
        ids: dict[str, int] = {}
        seen: dict[tuple, int] = {}
        subj, resp, vis, ys, xs, zs = [], [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}, row {lineno}: expected {len(header)} fields, got {len(row)}")
            sid = row[pos["subject"]].strip()
            try:
                h = int(row[pos["response"]])
                j = int(row[pos["visit"]])
            except ValueError:
                raise DataError(f"{path}, row {lineno}: response and visit must be integers") from None
            if h < 1 or j < 1:
                raise DataError(f"{path}, row {lineno}: response and visit must be >= 1")
            try:
                yv = float(row[pos["y"]])
                xv = [float(row[pos[c]]) for c in xcols]
                zv = [float(row[pos[c]]) for c in zcols]
            except ValueError:
                raise DataError(f"{path}, row {lineno}: non-numeric value") from None
            if not math.isfinite(yv):
                raise DataError(f"{path}, row {lineno}: y is not finite")
            key = (sid, h, j)
            if key in seen:
                raise SchemaError(
                    f"{path}, row {lineno}: duplicate key {key} (first seen at row {seen[key]})"
                )
            seen[key] = lineno
            subj.append(ids.setdefault(sid, len(ids)))
            resp.append(h)
            vis.append(j)
            ys.append(yv)
            xs.append(xv)
            zs.append(zv)
    N = len(ys)
    if N == 0:
        raise DataError(f"{path}: no data rows")
    y = np.array(ys)
    if log_transform:
        if np.any(y <= 0):
            raise DataError(f"{path}: log transform needs y > 0")
        y = np.log(y)
    X = np.array(xs, dtype=float).reshape(N, len(xcols))
    if standardize:
        X = standardize_columns(X)
    if zcols:
        Z = np.array(zs, dtype=float).reshape(N, len(zcols))
    else:
        Z = indicator_design(resp, vis, max(resp), max(vis))
    return LongDataset(tuple(ids), np.array(subj), np.array(resp), np.array(vis), y, X, Z)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(data: LongDataset, path) -> None:
    """Write the dataset with explicit ``z`` columns; ``load_csv`` reads it back exactly."""
    header = ["subject", "response", "visit", "y"]
    header += [f"x{i + 1}" for i in range(data.p)] + [f"z{i + 1}" for i in range(data.q)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in range(data.N):
            w.writerow(
                [data.subject_ids[data.subject[r]], int(data.response[r]), int(data.visit[r]),
                 _fmt(data.y[r])]
                + [_fmt(v) for v in data.X[r]]
                + [_fmt(v) for v in data.Z[r]]
            )
