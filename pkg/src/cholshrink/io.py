"""File formats: matrices, posterior summaries, chain draws and diagnostic tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .cholesky import gamma_index
from .errors import DataError, NoSamplesError, SchemaError


def _fmt(x) -> str:
    return "%.17g" % x


def write_matrix_csv(path, mat) -> None:
    """Plain ``q x q`` CSV, 17 significant digits, no header."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with open(path, "w", newline="") as fh:
        for row in mat:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}: row {k} is not numeric") from None
    if not rows:
        raise DataError(f"{path}: empty matrix file")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: ragged matrix rows")
    return np.array(rows)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_summary_json(path, summary, extra: dict | None = None) -> None:
    d = summary.to_dict()
    if extra:
        d.update(extra)
    write_json(path, d)


def chain_labels(chain) -> list[tuple[str, str, int | None]]:
    """``(column label, draws key, column index)`` for every traced quantity."""
    out = []
    for key in ("g", "p0", "sigma2", "delta2", "d0"):
        if key in chain.draws:
            out.append((key, key, None))
    for key, name in (("beta", "beta"), ("J", "J"), ("lam", "lambda"), ("phi2", "phi2")):
        arr = chain.draws.get(key)
        if arr is not None:
            out += [(f"{name}_{l + 1}", key, l) for l in range(arr.shape[1])]
    rows, cols = gamma_index(chain.q)
    for key in ("gamma", "psi"):
        if key in chain.draws:
            out += [(f"{key}_{m + 1}_{l + 1}", key, k)
                    for k, (m, l) in enumerate(zip(rows, cols))]
    return out


def write_chain_csv(path, chains) -> int:
    """Long table, one row per kept draw and chain; returns the row count.

    Columns are ``chain, iteration, loglik``, the sampled parameters, then
    the lower triangle of ``Omega`` as ``omega_m_l``.
    """
    if not chains:
        raise NoSamplesError("no chains to write")
    labels = chain_labels(chains[0])
    q = chains[0].q
    tri = np.tril_indices(q)
    header = ["chain", "iteration", "loglik"] + [lab for lab, _, _ in labels]
    header += [f"omega_{m + 1}_{l + 1}" for m, l in zip(*tri)]
    n = 0
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for ch in chains:
            om = ch.omega()[:, tri[0], tri[1]]
            ll = ch.loglik[ch.kept_iterations - 1]
            for k in range(len(ch)):
                vals = [str(ch.chain_id), str(int(ch.kept_iterations[k])), _fmt(ll[k])]
                for _, key, col in labels:
                    v = ch.draws[key][k] if col is None else ch.draws[key][k, col]
                    vals.append(str(int(v)) if key == "J" else _fmt(v))
                vals += [_fmt(v) for v in om[k]]
                fh.write(",".join(vals) + "\n")
                n += 1
    return n


def read_chain_csv(path) -> dict[int, dict[str, np.ndarray]]:
    """Per chain id, a mapping ``label -> trace`` (excluding ``chain``/``iteration``)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise NoSamplesError(f"{path}: empty chain file")
        if header[:2] != ["chain", "iteration"]:
            raise SchemaError(f"{path}: chain file must start with columns chain,iteration")
        body = []
        for k, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: row {k} has {len(row)} fields, expected {len(header)}")
            try:
                body.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}: row {k} is not numeric") from None
    if not body:
        raise NoSamplesError(f"{path}: chain file has no draws")
    arr = np.array(body)
    out = {}
    for c in np.unique(arr[:, 0]).astype(int):
        sub = arr[arr[:, 0] == c]
        out[int(c)] = {lab: sub[:, j] for j, lab in enumerate(header) if j >= 2}
    return out


DIAG_COLUMNS = ("parameter", "chain", "n", "ess", "geweke_z", "zero_variance", "flag")


def write_diagnostics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(DIAG_COLUMNS) + "\n")
        for r in rows:
            vals = []
            for c in DIAG_COLUMNS:
                v = r[c]
                if isinstance(v, bool):
                    vals.append(str(int(v)))
                elif isinstance(v, float):
                    vals.append(_fmt(v))
                else:
                    vals.append(str(v))
            fh.write(",".join(vals) + "\n")


def read_diagnostics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
