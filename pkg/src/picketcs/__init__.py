"""Picket-fence compressed sensing: coherent matrices, sublinear recovery and design search."""

from .matrix import CoherentMatrix, ModulusSet, build_matrix
from .numth import PrimeTable, pairwise_coprime, primes_up_to

__version__ = "0.1.0"

__all__ = [
    "CoherentMatrix",
    "ModulusSet",
    "PrimeTable",
    "build_matrix",
    "pairwise_coprime",
    "primes_up_to",
]
