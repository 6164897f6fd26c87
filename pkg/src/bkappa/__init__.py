"""B-kappa embeddings: smooth deformations joining parts to their sum.

Modules:

- ``core``: the B-function, its kappa deformation and digit functions
- ``embedding``: embeddings over labelled families of parts
- ``partitions``: partition counts and entropy changes
- ``fractal``: p-lambda-n fractal decompositions
- ``rootfinder``: global polynomial root finding by following the zero set
  of an embedded polynomial
"""

from bkappa._backend import NAME as BACKEND
from bkappa.core import b_function, b_kappa, db_kappa_dkappa, digit, complex_digit
from bkappa.embedding import IndexedParts, evaluate
from bkappa.rootfinder import FlowConfig, Polynomial, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FlowConfig",
    "IndexedParts",
    "Polynomial",
    "b_function",
    "b_kappa",
    "complex_digit",
    "db_kappa_dkappa",
    "digit",
    "evaluate",
    "solve",
]
