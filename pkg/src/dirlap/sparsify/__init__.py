__all__ = [
    "ApproximationCheck",
    "ProductEntries",
    "approximation_error",
    "sparsify_eulerian",
    "sparsify_product",
    "sparsify_square",
]

from .eulerian import sparsify_eulerian
from .square import ProductEntries, sparsify_product, sparsify_square
from .verify import ApproximationCheck, approximation_error
