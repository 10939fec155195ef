"""
Dense reference computations.

Everything here forms dense matrices and is only meant for verification at
small sizes: tests, the hidden `oracle` command and debugging sessions.
Production code paths never call into this module.
"""

import math

from typing import TypeAlias

import numpy as np
import scipy.linalg

from numpy.typing import ArrayLike, NDArray
from scipy.sparse.linalg import LinearOperator

from dirlap.core import (
    DirectedLaplacian,
    SparseGraph,
    require_strongly_connected,
)
from dirlap.exceptions import (
    DimensionCapError,
    KernelMismatchError,
    NotPSDSymmetrizationError,
)

DIMENSION_CAP = 600
PSD_TOLERANCE = 1e-8
PINV_RTOL = 1e-12

Matrix: TypeAlias = DirectedLaplacian | SparseGraph | LinearOperator | ArrayLike


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise DimensionCapError(
            f"Dense computation on {n} x {n} exceeds the cap of {cap}", n=n, cap=cap
        )


def materialize(
    operator: LinearOperator, n: int | None = None
) -> NDArray[np.float64]:
    """Dense matrix of an implicit operator, one column per basis vector."""
    size = operator.shape[1] if n is None else n
    _check_cap(size, DIMENSION_CAP)
    identity = np.eye(size)
    return np.column_stack([operator.matvec(identity[:, i]) for i in range(size)])


def dense(matrix: Matrix, cap: int = DIMENSION_CAP) -> NDArray[np.float64]:
    """
    Dense form of a Laplacian, graph, implicit operator or array.

    A DirectedLaplacian becomes D - A^T, a SparseGraph its stored matrix.
    """
    match matrix:
        case DirectedLaplacian():
            _check_cap(matrix.n, cap)
            return matrix.matrix.toarray()
        case SparseGraph():
            _check_cap(matrix.n, cap)
            return matrix.csr.toarray()
        case LinearOperator():
            return materialize(matrix)
        case _:
            array = np.asarray(matrix, dtype=np.float64)
            _check_cap(array.shape[0], cap)
            return array


def symmetrized(matrix: NDArray[np.float64]) -> NDArray[np.float64]:
    return (matrix + matrix.T) / 2


def dense_pinv(matrix: Matrix, cap: int = DIMENSION_CAP) -> NDArray[np.float64]:
    """
    Moore-Penrose pseudoinverse with relative cutoff 1e-12 * sigma_max.

    Raises
    ------
    DimensionCapError
        If the dimension exceeds `cap`.

    """
    return scipy.linalg.pinv(dense(matrix, cap), atol=0.0, rtol=PINV_RTOL)


def _psd_basis(
    matrix: NDArray[np.float64], tolerance: float = PINV_RTOL
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Image eigenvalues, image eigenvectors and kernel basis of a PSD matrix."""
    values, vectors = scipy.linalg.eigh(symmetrized(matrix))
    scale = max(float(np.abs(values).max(initial=0.0)), 1e-300)
    image = values > tolerance * scale
    return values[image], vectors[:, image], vectors[:, ~image]


def _inverse_sqrt(matrix: NDArray[np.float64]) -> NDArray[np.float64]:
    values, vectors, _ = _psd_basis(matrix)
    return (vectors / np.sqrt(values)) @ vectors.T


def _sqrt(matrix: NDArray[np.float64]) -> NDArray[np.float64]:
    values, vectors, _ = _psd_basis(matrix)
    return (vectors * np.sqrt(values)) @ vectors.T


def _scale(*matrices: NDArray[np.float64]) -> float:
    return max(max(float(np.linalg.norm(m, 2)) for m in matrices), 1e-300)


def min_eigenvalue(matrix: NDArray[np.float64]) -> float:
    return float(scipy.linalg.eigvalsh(symmetrized(matrix))[0])


def is_psd(matrix: Matrix, tolerance: float = PSD_TOLERANCE) -> bool:
    array = dense(matrix)
    return min_eigenvalue(array) >= -tolerance * _scale(array)


def psd_leq(
    lower: Matrix, upper: Matrix, tolerance: float = PSD_TOLERANCE
) -> bool:
    """lower <= upper in the Loewner order, up to tolerance * max norm."""
    a, b = dense(lower), dense(upper)
    return min_eigenvalue(b - a) >= -tolerance * _scale(a, b)


def approx_norm(
    reference: Matrix, approximation: Matrix, check: bool = True
) -> float:
    """
    Asymmetric approximation norm ||U^{+/2} (A~ - A) U^{+/2}||_2.

    U = (A + A^T) / 2 is the symmetrization of the reference.

    Returns +inf when A~ - A does not vanish on the kernel of U from either
    side. With `check`, the value is recomputed through the Rayleigh form
    sup |x^T (A~ - A) y| / sqrt(x^T U x * y^T U y) and both must agree.

    Raises
    ------
    NotPSDSymmetrizationError
        If U is not positive semidefinite.

    """
    a, b = dense(reference), dense(approximation)
    u = symmetrized(a)
    if not is_psd(u):
        raise NotPSDSymmetrizationError(
            "Symmetrization of the reference is not PSD",
            min_eigenvalue=min_eigenvalue(u),
        )
    difference = b - a
    values, vectors, kernel = _psd_basis(u)
    scale = _scale(a, b)
    if kernel.shape[1] and (
        np.linalg.norm(difference @ kernel, 2) > 1e-9 * scale
        or np.linalg.norm(kernel.T @ difference, 2) > 1e-9 * scale
    ):
        return math.inf
    inverse_sqrt = (vectors / np.sqrt(values)) @ vectors.T
    value = float(np.linalg.norm(inverse_sqrt @ difference @ inverse_sqrt, 2))
    if check:
        rayleigh = rayleigh_norm(reference, approximation)
        if not math.isclose(value, rayleigh, rel_tol=1e-9, abs_tol=1e-9):
            raise AssertionError(
                f"Approximation norm {value!r} disagrees with "
                f"Rayleigh form {rayleigh!r}"
            )
    return value


def rayleigh_norm(reference: Matrix, approximation: Matrix) -> float:
    """sup over x, y of |x^T (A~ - A) y| / sqrt(x^T U x * y^T U y), 0/0 read as 0."""
    a, b = dense(reference), dense(approximation)
    values, vectors, _ = _psd_basis(symmetrized(a))
    basis = vectors / np.sqrt(values)
    return float(np.linalg.norm(basis.T @ (b - a) @ basis, 2))


def generalized_eigs(
    a: Matrix, b: Matrix, tolerance: float = 1e-9
) -> tuple[float, float]:
    """
    Extreme eigenvalues of B^{+/2} A B^{+/2} on the image of B.

    Raises
    ------
    KernelMismatchError
        If A and B do not share their kernel.

    """
    a_, b_ = symmetrized(dense(a)), symmetrized(dense(b))
    values, vectors, kernel_b = _psd_basis(b_)
    _, _, kernel_a = _psd_basis(a_)
    scale = _scale(a_, b_)
    leak = (
        float(np.linalg.norm(a_ @ kernel_b, 2)) if kernel_b.shape[1] else 0.0
    )
    if kernel_a.shape[1] != kernel_b.shape[1] or leak > tolerance * scale:
        raise KernelMismatchError(
            "Matrices do not share a kernel",
            kernel_a=int(kernel_a.shape[1]),
            kernel_b=int(kernel_b.shape[1]),
        )
    basis = vectors / np.sqrt(values)
    eigenvalues = scipy.linalg.eigvalsh(symmetrized(basis.T @ a_ @ basis))
    return float(eigenvalues[0]), float(eigenvalues[-1])


def lambda_star(matrix: Matrix) -> float:
    """Smallest nonzero eigenvalue of a symmetric PSD matrix."""
    values, _, _ = _psd_basis(dense(matrix), tolerance=1e-10)
    return float(values.min())


def spectral_gap(undirected: Matrix) -> float:
    """
    Second smallest eigenvalue of D^{-1/2} U D^{-1/2} on the vertices with edges.

    For a disconnected graph this is 0.
    """
    u = symmetrized(dense(undirected))
    degrees = np.diag(u)
    support = degrees > 0
    if np.count_nonzero(support) < 2:
        return math.inf
    u = u[np.ix_(support, support)]
    inverse_sqrt = 1 / np.sqrt(degrees[support])
    normalized = u * inverse_sqrt[:, None] * inverse_sqrt[None, :]
    return float(scipy.linalg.eigvalsh(normalized)[1])


def harmonic_symmetrization(laplacian: Matrix) -> NDArray[np.float64]:
    """L^T U_L^+ L."""
    matrix = dense(laplacian)
    return matrix.T @ dense_pinv(symmetrized(matrix)) @ matrix


def u_norm(x: ArrayLike, u: Matrix) -> float:
    """sqrt(x^T U x)."""
    vector = np.asarray(x, dtype=np.float64)
    return math.sqrt(max(float(vector @ dense(u) @ vector), 0.0))


def pseudoinverse_error(z: Matrix, m: Matrix, u: Matrix) -> float:
    """||I_im(M) - Z M||_{U -> U} = ||U^{1/2} (I_im(M) - Z M) U^{+/2}||_2."""
    z_, m_, u_ = dense(z), dense(m), dense(u)
    image = m_ @ dense_pinv(m_)
    error = image - z_ @ m_
    return float(np.linalg.norm(_sqrt(u_) @ error @ _inverse_sqrt(u_), 2))


def exact_stationary(
    laplacian: DirectedLaplacian, cap: int = DIMENSION_CAP
) -> NDArray[np.float64]:
    """
    Stationary distribution from the kernel of L.

    Raises
    ------
    DimensionCapError
    NotStronglyConnectedError

    """
    require_strongly_connected(laplacian)
    kernel = scipy.linalg.null_space(dense(laplacian, cap), rcond=1e-10)
    vector = kernel[:, 0]
    vector = vector * np.sign(vector[np.argmax(np.abs(vector))])
    distribution = np.maximum(laplacian.out_degrees * vector, 0.0)
    return distribution / float(distribution.sum())


def dense_eulerian_solver(
    laplacian: DirectedLaplacian, b: NDArray[np.float64], eps: float
) -> NDArray[np.float64]:
    """Inner solver handle returning L^+ b exactly; `eps` is ignored."""
    return dense_pinv(laplacian) @ np.asarray(b, dtype=np.float64)


def power_iteration_pagerank(
    laplacian: DirectedLaplacian,
    beta: float,
    personalization: ArrayLike,
    iterations: int = 10_000,
    tolerance: float = 1e-15,
) -> NDArray[np.float64]:
    """PageRank by power iteration; dangling vertices jump by the personalization."""
    restart = np.asarray(personalization, dtype=np.float64)
    adjacency = laplacian.adjacency.offdiagonal().csr.toarray()
    degrees = adjacency.sum(axis=1)
    dangling = degrees == 0
    transition = np.divide(
        adjacency,
        degrees[:, None],
        out=np.zeros_like(adjacency),
        where=~dangling[:, None],
    )
    ranks = restart.copy()
    for _ in range(iterations):
        updated = (1 - beta) * (ranks @ transition) + (
            beta + (1 - beta) * float(ranks[dangling].sum())
        ) * restart
        if np.abs(updated - ranks).sum() <= tolerance:
            ranks = updated
            break
        ranks = updated
    return ranks / float(ranks.sum())
