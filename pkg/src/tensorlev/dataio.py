"""CSV and LibSVM ingestion. Data points become columns."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError


def _read_lines(path) -> list[str]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{path}: no such file")
    lines = p.read_text().splitlines()
    if not any(line.strip() for line in lines):
        raise DataError(f"{path}: empty file")
    return lines


def read_csv(path, label_col: int | None = 0):
    rows, labels = [], []
    width = None
    for lineno, rec in enumerate(csv.reader(_read_lines(path)), start=1):
        if not rec or all(not f.strip() for f in rec):
            continue
        try:
            vals = [float(f) for f in rec]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(vals)}")
        if label_col is not None:
            labels.append(vals.pop(label_col))
        rows.append(vals)
    X = np.asarray(rows, dtype=float).T
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite feature values")
    return X, (np.asarray(labels) if label_col is not None else None)


def read_libsvm(path, n_features: int | None = None):
    cols, idx, vals, labels = [], [], [], []
    for lineno, line in enumerate(_read_lines(path), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
            last = 0
            for tok in parts[1:]:
                k, v = tok.split(":", 1)
                k = int(k)
                if k < 1 or k <= last:
                    raise ValueError(f"bad feature index {k}")
                last = k
                cols.append(len(labels) - 1)
                idx.append(k - 1)
                vals.append(float(v))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    d = max(idx, default=-1) + 1
    if n_features is not None:
        if n_features < d:
            raise DataError(f"{path}: feature index {d} exceeds declared dimension {n_features}")
        d = n_features
    X = sp.csc_matrix((vals, (idx, cols)), shape=(d, len(labels)))
    X.eliminate_zeros()
    return X, np.asarray(labels)


def ingest(path, fmt: str = "csv", label_col: int | None = 0, n_features: int | None = None):
    if fmt == "csv":
        return read_csv(path, label_col)
    if fmt == "libsvm":
        return read_libsvm(path, n_features)
    raise DataError(f"unknown format {fmt!r}")


def write_csv(path, X, y=None) -> None:
    X = np.asarray(X.toarray() if sp.issparse(X) else X)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for j in range(X.shape[1]):
            row = [repr(float(x)) for x in X[:, j]]
            w.writerow(([repr(float(y[j]))] if y is not None else []) + row)


def write_libsvm(path, X, y=None) -> None:
    X = sp.csc_matrix(X)
    with open(path, "w") as fh:
        for j in range(X.shape[1]):
            lo, hi = X.indptr[j], X.indptr[j + 1]
            order = np.argsort(X.indices[lo:hi])
            feats = " ".join(f"{X.indices[lo + k] + 1}:{float(X.data[lo + k])!r}" for k in order)
            label = repr(float(y[j])) if y is not None else "0"
            fh.write(f"{label} {feats}".rstrip() + "\n")
