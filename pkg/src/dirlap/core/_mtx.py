import io
import logging

from pathlib import Path
from typing import IO, Iterable

import numpy as np
import scipy.io

from numpy.typing import ArrayLike, NDArray

from dirlap.exceptions import NonFiniteError, ValidationError

from .graph import GraphKind, SparseGraph

logger = logging.getLogger(__name__)

MTX_HEADER = "%%MatrixMarket matrix coordinate real general"
VECTOR_HEADER = "% dirlap vector"


def _format_value(value: float) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(value))


def serialize_graph(graph: SparseGraph) -> bytes:
    """
    Serialize a graph to Matrix Market coordinate format.

    Lines are "i j w" with 1-based indices, meaning the directed edge i -> j,
    in canonical row-major order, so equal graphs give identical bytes.

    Parameters
    ----------
    graph : SparseGraph
        Graph to serialize.

    Returns
    -------
    bytes
        File content.

    """
    lines = [MTX_HEADER, f"{graph.n} {graph.n} {graph.nnz}"]
    lines.extend(
        f"{row + 1} {col + 1} {_format_value(weight)}"
        for row, col, weight in zip(
            graph.rows.tolist(), graph.cols.tolist(), graph.weights.tolist()
        )
    )
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_graph(data: bytes, kind: GraphKind = "adjacency") -> SparseGraph:
    """
    Parse Matrix Market coordinate data into a canonical graph.

    Raises
    ------
    ValidationError
        If the data is not a square real coordinate matrix.

    """
    try:
        matrix = scipy.io.mmread(io.BytesIO(data))
    except (ValueError, IndexError, TypeError) as exc:
        raise ValidationError(f"Invalid Matrix Market data: {exc}") from exc
    if not hasattr(matrix, "tocoo"):
        raise ValidationError("Matrix Market data must be in coordinate format")
    if matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"Matrix must be square, got shape {matrix.shape}")
    return SparseGraph.from_scipy(matrix, kind=kind)


def read_graph(path: str | Path, kind: GraphKind = "adjacency") -> SparseGraph:
    """Read a graph from a Matrix Market file."""
    logger.debug("Reading graph from %s", path)
    return deserialize_graph(Path(path).read_bytes(), kind=kind)


def write_graph(path: str | Path, graph: SparseGraph) -> None:
    """Write a graph to a Matrix Market file."""
    logger.debug("Writing %r to %s", graph, path)
    Path(path).write_bytes(serialize_graph(graph))


def serialize_vector(values: ArrayLike, comments: Iterable[str] = ()) -> bytes:
    """One value per line after a `%` comment header."""
    vector = np.asarray(values, dtype=np.float64).ravel()
    lines = [f"{VECTOR_HEADER} n={len(vector)}"]
    lines.extend(f"% {comment}" for comment in comments)
    lines.extend(_format_value(value) for value in vector.tolist())
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_vector(data: bytes) -> NDArray[np.float64]:
    """
    Parse a vector file; lines starting with `%` and blank lines are ignored.

    Raises
    ------
    ValidationError
        If a line is not a number.
    NonFiniteError
        If a value is NaN or infinite.

    """
    values = []
    for number, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        try:
            values.append(float(stripped))
        except ValueError as exc:
            raise ValidationError(
                f"Line {number}: expected a number, got '{stripped}'"
            ) from exc
    vector = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(vector)):
        raise NonFiniteError("Vector entries must be finite")
    return vector


def read_vector(path: str | Path) -> NDArray[np.float64]:
    return deserialize_vector(Path(path).read_bytes())


def write_vector(
    target: str | Path | IO[str], values: ArrayLike, comments: Iterable[str] = ()
) -> None:
    """Write a vector to a path or an open text stream."""
    content = serialize_vector(values, comments)
    if isinstance(target, (str, Path)):
        Path(target).write_bytes(content)
    else:
        target.write(content.decode("utf-8"))
