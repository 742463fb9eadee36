"""File formats: matrix CSV, KFMX1 binary, graph edge lists, discrete CSV."""

from __future__ import annotations

import struct

import numpy as np

from .discrete import DiscreteMatrix
from .errors import InvalidInputError
from .graphs import UndirectedGraph

MAGIC = b"KFMX1"


def write_matrix_csv(path, X: np.ndarray, header: bool = False):
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(f"x{j+1}" for j in range(X.shape[1])) + "\n")
        for row in X:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix_csv(path, header: bool = False) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if header:
        lines = lines[1:]
    try:
        rows = [[float(tok) for tok in ln.split(",")] for ln in lines]
    except ValueError as exc:
        raise InvalidInputError(f"bad numeric value in {path}: {exc}") from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise InvalidInputError(f"{path} is empty or ragged")
    return np.asarray(rows, dtype=np.float64)


def write_matrix_binary(path, X: np.ndarray):
    X = np.ascontiguousarray(X, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", X.shape[0], X.shape[1]))
        fh.write(X.astype("<f8").tobytes(order="C"))


def read_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise InvalidInputError(f"{path} lacks the {MAGIC!r} magic")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    if data.size != rows * cols:
        raise InvalidInputError(f"{path} is truncated")
    return data.reshape(rows, cols).copy()


def write_graph(path, G: UndirectedGraph):
    with open(path, "w") as fh:
        fh.write(f"p {G.p}\n")
        for a, b in sorted(G.edges):
            fh.write(f"{a + 1} {b + 1}\n")


def read_graph(path) -> UndirectedGraph:
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2 or tokens[0] != "p":
        raise InvalidInputError(f"{path} must start with a 'p <count>' header")
    p = int(tokens[1])
    rest = tokens[2:]
    if len(rest) % 2:
        raise InvalidInputError(f"{path} has an odd number of edge endpoints")
    edges = [
        (int(rest[i]) - 1, int(rest[i + 1]) - 1) for i in range(0, len(rest), 2)
    ]
    return UndirectedGraph(p, edges)


def write_discrete_csv(path, X: DiscreteMatrix, header: bool = True):
    with open(path, "w") as fh:
        if header:
            fh.write("K: " + " ".join(str(k) for k in X.cardinalities) + "\n")
        for row in X.values:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def read_discrete_csv(path, infer_cardinalities: bool = False) -> DiscreteMatrix:
    """Reads integer labels; cardinalities come from a 'K: ...' header line
    unless infer_cardinalities asks for column maxima."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    cards = None
    if lines and lines[0].startswith("K:"):
        cards = tuple(int(tok) for tok in lines[0][2:].split())
        lines = lines[1:]
    rows = [[int(tok) for tok in ln.split(",")] for ln in lines]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise InvalidInputError(f"{path} is empty or ragged")
    vals = np.asarray(rows, dtype=np.int64)
    if cards is None:
        if not infer_cardinalities:
            raise InvalidInputError(
                f"{path} has no 'K:' header; pass infer_cardinalities=True to use column maxima"
            )
        cards = tuple(int(v) for v in vals.max(axis=0))
    return DiscreteMatrix(vals, cards)
