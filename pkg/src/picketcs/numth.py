"""Exact integer number theory shared by matrix construction and design search.

Primes are indexed with ``p_0 = 1``, ``p_1 = 2``, ``p_2 = 3``, ... so that
``table[l]`` is the l-th prime for ``l >= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

__all__ = [
    "PrimeTable",
    "PrimorialInfo",
    "DegenerateDesignError",
    "primes_up_to",
    "pairwise_coprime",
    "primorial_info",
    "prime_bound_t",
    "root_down",
    "iroot_ceil_strict",
    "primorial_extra_term",
    "factor_primes",
]


class DegenerateDesignError(ValueError):
    """K <= alpha + 1 leaves no tail for the prime-gap argument."""


def _sieve(limit: int) -> np.ndarray:
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return np.flatnonzero(is_prime)


class PrimeTable:
    """Growable table of primes with the ``p_0 = 1`` convention.

    Growth happens in place; grow before sharing a table between workers.
    """

    def __init__(self, limit: int = 1000):
        if limit < 2:
            raise ValueError(f"prime table limit must be >= 2, got {limit}")
        self.limit = 0
        self.values: list[int] = [1]
        self.extend_to(limit)

    def extend_to(self, limit: int) -> None:
        if limit <= self.limit:
            return
        self.values = [1] + [int(p) for p in _sieve(limit)]
        self.limit = limit

    def ensure_index(self, index: int) -> None:
        """Grow until ``values[index]`` exists."""
        while len(self.values) <= index:
            self.extend_to(max(2 * self.limit, 16))

    def __getitem__(self, index: int) -> int:
        if index < 0:
            raise IndexError("negative prime index")
        self.ensure_index(index)
        return self.values[index]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def primes_below(self, bound: int) -> list[int]:
        """All primes p < bound (index 0 excluded)."""
        self.extend_to(bound)
        hi = int(np.searchsorted(self.values, bound, side="left"))
        return self.values[1:hi]

    def index_of(self, p: int) -> int:
        self.extend_to(p)
        i = int(np.searchsorted(self.values, p))
        if i >= len(self.values) or self.values[i] != p:
            raise ValueError(f"{p} is not prime")
        return i

    def product(self, start: int, count: int) -> int:
        """Exact product p_start * ... * p_{start+count-1}."""
        self.ensure_index(start + count - 1)
        return math.prod(self.values[start : start + count])


def primes_up_to(limit: int) -> PrimeTable:
    if limit < 2:
        raise ValueError(f"limit must be >= 2, got {limit}")
    return PrimeTable(limit)


def pairwise_coprime(values: Iterable[int]) -> bool:
    values = list(values)
    for v in values:
        if v < 2:
            raise ValueError(f"entries must be >= 2, got {v}")
    # gcd of a running product is enough: x is coprime to all earlier entries
    # iff it is coprime to their product.
    acc = 1
    for v in values:
        if math.gcd(acc, v) != 1:
            return False
        acc *= v
    return True


@dataclass(frozen=True)
class PrimorialInfo:
    v: int
    L: int
    phiL: int


def primorial_info(v: int, table: PrimeTable | None = None) -> PrimorialInfo:
    if v < 1:
        raise ValueError(f"v must be >= 1, got {v}")
    table = table or PrimeTable()
    table.ensure_index(v)
    ps = table.values[1 : v + 1]
    return PrimorialInfo(v=v, L=math.prod(ps), phiL=math.prod(p - 1 for p in ps))


def root_down(n: int, a: int) -> float:
    """n ** (1/a) rounded downward by a few ulps so bounds built on it stay conservative."""
    r = float(n) ** (1.0 / a)
    return r - 8 * math.ulp(r)


def iroot_ceil_strict(n: int, a: int) -> int:
    """Smallest integer x with x**a > n."""
    x = int(round(float(n) ** (1.0 / a)))
    while x > 0 and x**a > n:
        x -= 1
    while x**a <= n:
        x += 1
    return x


def primorial_extra_term(K: int, alpha: int, info: PrimorialInfo) -> int:
    """Closed form of (L - 2 phi(L) - 2v) * sum_{j=0}^{K-alpha-2} floor(j / (phi(L)+v)).

    Returned as printed; the coefficient is negative for v <= 2.
    """
    n = K - alpha - 2
    if n < 0:
        return 0
    coef = info.L - 2 * info.phiL - 2 * info.v
    q = info.phiL + info.v
    Q = n // q
    return coef * q * Q * (Q - 1) // 2 + coef * Q * (K - alpha - 1 - q * Q)


Refinement = Union[str, Tuple[str, int], None]


def _parse_refinement(refinement: Refinement) -> int | None:
    if refinement is None or refinement == "basic":
        return None
    if isinstance(refinement, tuple) and refinement[0] == "primorial":
        v = int(refinement[1])
        if v < 1:
            raise ValueError("primorial refinement needs v >= 1")
        return v
    if isinstance(refinement, str) and refinement.startswith("primorial"):
        return int(refinement[len("primorial") :].strip("()"))
    raise ValueError(f"unknown refinement {refinement!r}")


def prime_bound_t(
    N: int,
    K: int,
    alpha: int,
    m_tilde: int,
    refinement: Refinement = "basic",
    table: PrimeTable | None = None,
) -> tuple[int, int]:
    """Prime-factor ceiling for optimal designs.

    Returns ``(t, B)`` where ``p_t`` is the smallest prime > 2 with
    ``p_t (K-a-1) + (K-a-1)(K-a-2) [+ extra] + (a+1) N^(1/(a+1)) > m_tilde``
    and ``B = p_{t+K-a-1}``.  The primorial refinement adds the extra
    term only when it is nonnegative, so it never loosens the basic bound.
    """
    if K <= alpha + 1:
        raise DegenerateDesignError(
            f"K={K} <= alpha+1={alpha + 1}: no tail moduli, prime bound undefined"
        )
    table = table or PrimeTable()
    T = K - alpha - 1
    const = T * (T - 1) + (alpha + 1) * root_down(N, alpha + 1)
    v = _parse_refinement(refinement)
    if v is not None:
        const += max(0, primorial_extra_term(K, alpha, primorial_info(v, table)))
    # p_t * T + const > m_tilde, with p_t > 2
    t = 2
    while table[t] * T + const <= m_tilde:
        t += 1
    return t, table[t + T]


def factor_primes(n: int, primes: Sequence[int]) -> list[int]:
    """Distinct prime factors of n by trial division over ``primes``."""
    out = []
    for p in primes:
        if p * p > n:
            break
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
    if n > 1:
        out.append(n)
    return out

