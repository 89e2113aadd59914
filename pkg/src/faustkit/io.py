"""File formats: MatrixMarket, plain text, FAuST JSON, PGM images, CSV.

All writers go through :func:`atomic_write` (temp file + rename).
"""

from __future__ import annotations

import contextlib
import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .sparse import FaustOperator, SparseMatrix


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _is_mtx(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(14).lower() == b"%%matrixmarket"


def read_matrix(path) -> np.ndarray:
    """Dense array from a MatrixMarket file or whitespace-separated text."""
    if _is_mtx(path):
        m = scipy.io.mmread(path)
        m = m.toarray() if scipy.sparse.issparse(m) else np.asarray(m)
        if np.iscomplexobj(m):
            raise ValueError("complex matrices are not supported")
        return m.astype(np.float64)
    a = np.loadtxt(path, dtype=np.float64, ndmin=2)
    return a


def write_matrix(path, a, sparse: bool = False) -> None:
    """Write a MatrixMarket file (``coordinate`` if ``sparse`` else ``array``)."""
    a = np.asarray(a, dtype=np.float64)
    target = scipy.sparse.coo_matrix(a) if sparse else a
    buf = _io.BytesIO()
    scipy.io.mmwrite(buf, target)
    with atomic_write(path, "wb") as fh:
        fh.write(buf.getvalue())


def read_sparse(path) -> SparseMatrix:
    m = scipy.io.mmread(path)
    if scipy.sparse.issparse(m):
        m = m.tocoo()
        return SparseMatrix(m.shape, m.row, m.col, m.data)
    return SparseMatrix.from_dense(m)


def write_sparse(path, S: SparseMatrix) -> None:
    coo = scipy.sparse.coo_matrix((S.val, (S.row, S.col)), shape=S.shape)
    buf = _io.BytesIO()
    scipy.io.mmwrite(buf, coo)
    with atomic_write(path, "wb") as fh:
        fh.write(buf.getvalue())


def read_vector(path) -> np.ndarray:
    if _is_mtx(path):
        return read_matrix(path).ravel()
    return np.loadtxt(path, dtype=np.float64, ndmin=1).ravel()


def write_vector(path, v) -> None:
    with atomic_write(path) as fh:
        np.savetxt(fh, np.asarray(v, dtype=np.float64), fmt="%.17g")


def faust_to_dict(F: FaustOperator) -> dict:
    return {
        "scale": F.scale,
        "dims": F.dims,
        "factors": [{"rows": f.rows, "cols": f.cols, "triplets": f.triplets()}
                    for f in F.factors],
    }


def faust_from_dict(doc: dict) -> FaustOperator:
    factors = []
    for f in doc["factors"]:
        trip = np.asarray(f["triplets"], dtype=np.float64).reshape(-1, 3)
        factors.append(SparseMatrix((f["rows"], f["cols"]), trip[:, 0].astype(np.int64),
                                    trip[:, 1].astype(np.int64), trip[:, 2]))
    F = FaustOperator(factors, doc["scale"])
    if "dims" in doc and list(doc["dims"]) != F.dims:
        raise ValueError(f"dims {doc['dims']} disagree with factor shapes {F.dims}")
    return F


def write_faust(path, F: FaustOperator) -> None:
    with atomic_write(path) as fh:
        json.dump(faust_to_dict(F), fh)


def read_faust(path) -> FaustOperator:
    with open(path) as fh:
        return faust_from_dict(json.load(fh))


def read_groups(path):
    """Groups file: one group per line as ``row,col`` pairs (0-based)."""
    groups = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            pairs = [tuple(int(x) for x in tok.split(",")) for tok in line.split()]
            r, c = zip(*pairs)
            groups.append((np.array(r), np.array(c)))
    return tuple(groups)


def write_csv(path, header, rows) -> None:
    with atomic_write(path, "w") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _pgm_tokens(data: bytes, count: int):
    # header tokens, skipping comments; returns tokens and offset of the body
    tokens, pos = [], 0
    while len(tokens) < count:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Grayscale image (P2 or P5) as a float array in ``[0, maxval]``."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), body = _pgm_tokens(data, 4)
    w, h, maxval = int(w), int(h), int(maxval)
    if magic == b"P5":
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        img = np.frombuffer(data, dtype=dtype, count=w * h, offset=body)
    elif magic == b"P2":
        img = np.array(data[body - 1:].split()[: w * h], dtype=np.int64)
    else:
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    if img.size != w * h:
        raise ValueError(f"{path}: truncated image data")
    return img.reshape(h, w).astype(np.float64)


def write_pgm(path, img, binary: bool = True) -> None:
    """Write an 8-bit PGM; values are rounded and clipped to ``[0, 255]``."""
    px = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)
    h, w = px.shape
    with atomic_write(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(px.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode())
            for row in px:
                fh.write((" ".join(str(v) for v in row) + "\n").encode())
