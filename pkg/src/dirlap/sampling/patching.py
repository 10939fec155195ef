import logging

from dataclasses import dataclass

import numpy as np

from numpy.typing import ArrayLike, NDArray

from dirlap.core import SparseGraph
from dirlap.exceptions import DeficitMismatchError

logger = logging.getLogger(__name__)

# Relative tolerance for negative deficits and unbalanced totals
DEFICIT_RTOL = 1e-10


@dataclass(frozen=True)
class PatchMatrix:
    """Nonnegative correction E added to a sample to restore its degrees."""

    n: int
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    masses: NDArray[np.float64]

    @property
    def nnz(self) -> int:
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def to_graph(self) -> SparseGraph:
        return SparseGraph(self.n, self.rows, self.cols, self.masses)


def _deficits(
    current: NDArray[np.float64],
    target: NDArray[np.float64],
    tolerance: float,
    side: str,
) -> NDArray[np.float64]:
    deficit = target - current
    if np.any(deficit < -tolerance):
        vertex = int(np.argmin(deficit))
        raise DeficitMismatchError(
            f"{side.capitalize()} {vertex} exceeds its target "
            f"by {-deficit[vertex]:.3e}",
            side=side,
            vertex=vertex,
            excess=float(-deficit[vertex]),
        )
    return np.maximum(deficit, 0.0)


def _move_off_diagonal(
    entries: list[list[float]], vertex: int, mass: float
) -> float:
    """
    Route diagonal mass at `vertex` through existing patch entries.

    Entry (a, b) with a, b != vertex is replaced by (a, vertex) and (vertex, b),
    which keeps every row and column sum except those of `vertex`, where it
    adds the moved amount. Returns the mass that could not be moved.
    """
    for index in range(len(entries)):
        if mass <= 0:
            break
        row, col, weight = entries[index]
        if row == vertex or col == vertex or weight <= 0:
            continue
        moved = min(weight, mass)
        entries[index][2] = weight - moved
        entries.append([row, vertex, moved])
        entries.append([vertex, col, moved])
        mass -= moved
    return mass


def patch_to_degrees(
    sample: SparseGraph,
    target_row: ArrayLike,
    target_col: ArrayLike,
    forbid_diagonal: bool = False,
) -> PatchMatrix:
    """
    Greedy patch raising the row and column sums of a sample to their targets.

    Rows and columns with a deficit are swept in ascending order with two
    pointers; each emitted entry (i, j) gets min(row deficit, column deficit).
    With `forbid_diagonal`, (i, i) is never emitted: the column pointer skips
    ahead, and a deficit left only on the diagonal is routed through
    previously emitted entries.

    Parameters
    ----------
    sample : SparseGraph
        Nonnegative matrix whose sums do not exceed the targets.
    target_row : ArrayLike
        Required row sums.
    target_col : ArrayLike
        Required column sums.
    forbid_diagonal : bool, default False
        Never emit diagonal entries.

    Returns
    -------
    PatchMatrix

    Raises
    ------
    DeficitMismatchError
        If a sum already exceeds its target, the total row and column deficits
        differ by more than 1e-10 relative, or a diagonal deficit has nowhere
        to go.

    """
    rows_target = np.asarray(target_row, dtype=np.float64)
    cols_target = np.asarray(target_col, dtype=np.float64)
    scale = max(float(rows_target.sum()), float(cols_target.sum()), 1e-300)
    tolerance = DEFICIT_RTOL * scale
    row_deficit = _deficits(sample.row_sums(), rows_target, tolerance, "row")
    col_deficit = _deficits(sample.col_sums(), cols_target, tolerance, "column")
    mismatch = abs(float(row_deficit.sum()) - float(col_deficit.sum()))
    if mismatch > tolerance:
        raise DeficitMismatchError(
            f"Row and column deficits differ by {mismatch:.3e}",
            row_total=float(row_deficit.sum()),
            col_total=float(col_deficit.sum()),
        )

    pending_rows = [int(v) for v in np.flatnonzero(row_deficit > tolerance * 1e-6)]
    pending_cols = [int(v) for v in np.flatnonzero(col_deficit > tolerance * 1e-6)]
    entries: list[list[float]] = []
    i = j = 0
    while i < len(pending_rows) and j < len(pending_cols):
        row, col = pending_rows[i], pending_cols[j]
        if forbid_diagonal and row == col:
            if j + 1 < len(pending_cols):
                pending_cols[j], pending_cols[j + 1] = pending_cols[j + 1], col
                continue
            if i + 1 < len(pending_rows):
                pending_rows[i], pending_rows[i + 1] = pending_rows[i + 1], row
                continue
            break
        mass = min(row_deficit[row], col_deficit[col])
        entries.append([row, col, mass])
        if row_deficit[row] <= col_deficit[col]:
            col_deficit[col] -= mass
            row_deficit[row] = 0.0
            i += 1
        else:
            row_deficit[row] -= mass
            col_deficit[col] = 0.0
            j += 1

    if forbid_diagonal and i < len(pending_rows) and j < len(pending_cols):
        vertex = pending_rows[i]
        remaining = _move_off_diagonal(
            entries, vertex, min(row_deficit[vertex], col_deficit[vertex])
        )
        if remaining > tolerance:
            raise DeficitMismatchError(
                f"Diagonal deficit {remaining:.3e} at vertex {vertex} cannot be "
                "patched without a self-loop",
                vertex=vertex,
            )
        logger.debug("Routed diagonal deficit of vertex %d off the diagonal", vertex)

    if entries:
        rows, cols, masses = (np.array(column) for column in zip(*entries, strict=True))
        keep = masses > 0
        return PatchMatrix(
            sample.n,
            rows[keep].astype(np.int64),
            cols[keep].astype(np.int64),
            masses[keep].astype(np.float64),
        )
    return PatchMatrix(
        sample.n,
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.int64),
        np.zeros(0, dtype=np.float64),
    )


def rebalance(
    sample: SparseGraph,
    target_row: ArrayLike,
    target_col: ArrayLike,
    eps: float,
    forbid_diagonal: bool = True,
) -> SparseGraph:
    """
    Scale a sample by (1 + eps/4)^-1 and patch it to the target degrees.

    When a row or column sum of the scaled sample still exceeds its target,
    the scale shrinks further to the smallest target-to-sum ratio, so the
    patch never sees a negative deficit.

    Returns
    -------
    SparseGraph
        Nonnegative matrix with exactly the target row and column sums.

    """
    targets = np.concatenate(
        [
            np.asarray(target_row, dtype=np.float64),
            np.asarray(target_col, dtype=np.float64),
        ]
    )
    sums = np.concatenate([sample.row_sums(), sample.col_sums()])
    factor = 1 / (1 + eps / 4)
    loaded = sums > 0
    if np.any(loaded):
        ratio = float(np.min(targets[loaded] / sums[loaded]))
        if ratio < factor:
            logger.debug("Sample overshoots its degrees, scaling by %.4f", ratio)
            factor = ratio
    scaled = sample.scale(factor)
    patch = patch_to_degrees(scaled, target_row, target_col, forbid_diagonal)
    logger.debug(
        "Patched sample with %d entries of total mass %.3e", patch.nnz, patch.total_mass
    )
    return scaled + patch.to_graph()
