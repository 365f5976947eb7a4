"""Picket-fence (K, alpha)-coherent measurement matrices and their verifiers.

Row ``(j, h)`` (``j`` in ``1..K``, ``h`` in ``0..s_j-1``) has a one in column
``n`` iff ``n % s_j == h``.  Rows are stacked modulus by modulus, so row
``(j, h)`` sits at flat index ``offsets[j-1] + h``.  The matrix is never
stored densely; every query works on residues.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence, Union

import numpy as np

from .numth import pairwise_coprime

__all__ = [
    "ConstructionError",
    "FeasibilityError",
    "BoundVacuousError",
    "ModulusSet",
    "CoherentMatrix",
    "BoundsReport",
    "build_matrix",
    "alpha_bound",
    "binary_coherence",
    "crt_coherence",
    "mu_coherence",
    "disjunct_check",
    "expander_check",
    "gershgorin_rip_verify",
    "fourier_column_sparsity",
    "uncertainty_products",
    "bounds_report",
    "write_dense_csv",
    "SUBSET_GUARD_N",
    "RIP_GUARD_N",
    "TRANSFORM_GUARD",
]

SUBSET_GUARD_N = 30
SUBSET_GUARD_D = 4
RIP_GUARD_N = 20
TRANSFORM_GUARD = 2**16
ZERO_THRESHOLD = 1e-8
SCAN_CHUNK = 1 << 20
SCAN_LIMIT = 1 << 26


class ConstructionError(ValueError):
    """A modulus set violates one of the design constraints."""


class FeasibilityError(RuntimeError):
    """An exhaustive verifier was asked to enumerate too much."""


class BoundVacuousError(ValueError):
    """The Gershgorin interval (k-1) alpha / K reaches 1, so nothing is certified."""


@dataclass(frozen=True)
class ModulusSet:
    """Increasing pairwise-coprime moduli with bandwidth ``N``.

    ``alpha`` is derived from the product window
    ``prod(s[:alpha]) < N <= prod(s[:alpha+1])`` when not given.
    """

    s: tuple
    N: int
    alpha: Optional[int] = None
    N_tilde: int = field(init=False)

    def __post_init__(self):
        s = tuple(int(v) for v in self.s)
        object.__setattr__(self, "s", s)
        N = int(self.N)
        if not s:
            raise ConstructionError("need at least one modulus")
        if N < 2:
            raise ConstructionError(f"N must be >= 2, got {N}")
        if any(v < 2 for v in s):
            raise ConstructionError(f"moduli must be >= 2, got {s}")
        if any(a >= b for a, b in zip(s, s[1:])):
            raise ConstructionError(f"Constraint I violated: moduli not strictly increasing {s}")
        if not pairwise_coprime(s):
            raise ConstructionError(f"Constraint III violated: moduli not pairwise coprime {s}")
        N_tilde = math.prod(s)
        if N_tilde <= N:
            raise ConstructionError(f"product of moduli {N_tilde} must exceed N={N}")
        object.__setattr__(self, "N_tilde", N_tilde)

        derived = 0
        prod = 1
        while derived < len(s) and prod * s[derived] < N:
            prod *= s[derived]
            derived += 1
        if self.alpha is None:
            object.__setattr__(self, "alpha", derived)
        elif int(self.alpha) != derived:
            raise ConstructionError(
                f"Constraint II violated: prod(s[:{self.alpha}]) < {N} <= "
                f"prod(s[:{int(self.alpha) + 1}]) fails for s={s}"
            )

    @property
    def K(self) -> int:
        return len(self.s)

    @property
    def m(self) -> int:
        return sum(self.s)


class CoherentMatrix:
    """Implicit m x N_tilde picket-fence matrix."""

    def __init__(self, moduli: ModulusSet):
        self.moduli = moduli
        self.s = np.asarray(moduli.s, dtype=np.int64)
        self.K = moduli.K
        self.m = moduli.m
        self.N = moduli.N
        self.N_tilde = moduli.N_tilde
        self.offsets = np.concatenate(([0], np.cumsum(self.s)[:-1])).astype(np.int64)
        # modulus index (0-based) of every flat row
        self.row_modulus = np.repeat(np.arange(self.K), self.s)

    def __repr__(self):
        return f"CoherentMatrix(s={self.moduli.s}, N={self.N}, m={self.m})"

    @property
    def shape(self):
        return (self.m, self.N_tilde)

    def row_index(self, j: int, h: int) -> int:
        """Flat row of (j, h) with 1-based modulus index j."""
        if not 1 <= j <= self.K or not 0 <= h < self.moduli.s[j - 1]:
            raise IndexError(f"no row ({j}, {h})")
        return int(self.offsets[j - 1]) + h

    def row_label(self, r: int) -> tuple[int, int]:
        j = int(self.row_modulus[r])
        return j + 1, int(r - self.offsets[j])

    def entry(self, r: int, n: int) -> int:
        j = int(self.row_modulus[r])
        return int(n % self.moduli.s[j] == r - self.offsets[j])

    def support(self, n):
        """Flat rows holding the K ones of column(s) ``n``; shape ``(..., K)``."""
        n = np.asarray(n, dtype=np.int64)
        return self.offsets + n[..., None] % self.s

    def column_values(self, n):
        """Entries on the support rows (all ones for the binary matrix)."""
        return np.ones(np.shape(n) + (self.K,))

    def row(self, r: int, length: Optional[int] = None) -> np.ndarray:
        length = self.N_tilde if length is None else length
        j = int(self.row_modulus[r])
        out = np.zeros(length, dtype=np.uint8)
        out[int(r - self.offsets[j]) :: self.moduli.s[j]] = 1
        return out

    def dense(self, columns: Optional[int] = None) -> np.ndarray:
        columns = self.N_tilde if columns is None else columns
        if columns > 10**7:
            raise FeasibilityError(f"refusing to materialize {columns} columns")
        out = np.zeros((self.m, columns), dtype=np.uint8)
        n = np.arange(columns)
        rows = self.support(n)
        out[rows, n[:, None]] = 1
        return out


def build_matrix(moduli: ModulusSet) -> CoherentMatrix:
    return CoherentMatrix(moduli)


def alpha_bound(s1: int, N: int) -> int:
    """floor(log_{s1} N) in exact integer arithmetic."""
    a, p = 0, s1
    while p <= N:
        a += 1
        p *= s1
    return a


def crt_coherence(moduli: Sequence[int], N: int) -> int:
    """Largest number of (coprime) moduli whose product is below N."""
    count, prod = 0, 1
    for s in sorted(moduli):
        if prod * s > N - 1:
            break
        prod *= s
        count += 1
    return count


def binary_coherence(matrix: CoherentMatrix, over_columns: Optional[int] = None) -> int:
    """Max inner product of two distinct columns among the first ``over_columns``.

    Columns ``n`` and ``l`` share row ``(j, .)`` iff ``s_j | n - l``, so the
    value is ``max_d #{j : s_j | d}`` over differences ``1 <= d < N``.  Very
    large ``N`` falls back to the CRT closed form, which is exact for
    pairwise-coprime moduli.
    """
    N = matrix.N if over_columns is None else over_columns
    if N > matrix.N_tilde:
        raise ValueError(f"over_columns={N} exceeds N_tilde={matrix.N_tilde}")
    if N > SCAN_LIMIT:
        return crt_coherence(matrix.moduli.s, N)
    best = 0
    for start in range(1, N, SCAN_CHUNK):
        d = np.arange(start, min(start + SCAN_CHUNK, N), dtype=np.int64)
        counts = np.zeros(d.shape, dtype=np.int64)
        for s in matrix.moduli.s:
            counts += d % s == 0
        best = max(best, int(counts.max()))
    return best


def mu_coherence(columns) -> float:
    A = np.asarray(columns)
    if A.ndim != 2:
        raise ValueError("columns must be a 2-D array (rows x columns)")
    norms = np.linalg.norm(A, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError("every column must have unit 2-norm")
    if A.shape[1] < 2:
        return 0.0
    G = np.abs(A.conj().T @ A)
    np.fill_diagonal(G, 0.0)
    return float(G.max())


def _binary_columns(matrix, N: Optional[int]) -> np.ndarray:
    if isinstance(matrix, CoherentMatrix):
        N = matrix.N if N is None else N
        return matrix.dense(N).astype(bool)
    D = np.asarray(matrix).astype(bool)
    return D if N is None else D[:, :N]


def _column_masks(D: np.ndarray) -> list[int]:
    masks = []
    for col in D.T:
        masks.append(int.from_bytes(np.packbits(col[::-1]).tobytes(), "big"))
    return masks


def disjunct_check(matrix, d: int, over_columns: Optional[int] = None) -> bool:
    """Exhaustive d-disjunct test in identity-submatrix form.

    True iff every (d+1)-column subset contains, for each of its columns, a
    row with a one there and zeros in the rest of the subset.
    """
    D = _binary_columns(matrix, over_columns)
    N = D.shape[1]
    if N > SUBSET_GUARD_N or d > SUBSET_GUARD_D:
        raise FeasibilityError(
            f"exhaustive disjunct check limited to N<={SUBSET_GUARD_N}, d<={SUBSET_GUARD_D} "
            f"(got N={N}, d={d}); use a sampling check instead"
        )
    if d < 0:
        raise ValueError("d must be >= 0")
    masks = _column_masks(D)
    for subset in combinations(range(N), d + 1):
        for c in subset:
            others = 0
            for o in subset:
                if o != c:
                    others |= masks[o]
            if masks[c] & ~others == 0:
                return False
    return True


def expander_check(
    matrix, k: int, over_columns: Optional[int] = None, alpha: Optional[int] = None, K: Optional[int] = None
) -> Optional[bool]:
    """Neighbourhood-growth check for every column set X with |X| <= k.

    Requires |N(X)| >= sum_{j<|X|} max(K - j*alpha, 0).  Returns False on any
    violation, None (indeterminate) when the expander form
    |X| K (1 - alpha(|X|-1)/(2K)) is nonpositive for some size in range,
    and True otherwise.
    """
    D = _binary_columns(matrix, over_columns)
    N = D.shape[1]
    if isinstance(matrix, CoherentMatrix):
        K = matrix.K if K is None else K
        alpha = binary_coherence(matrix, N) if alpha is None else alpha
    elif K is None or alpha is None:
        K = int(D.sum(axis=0).min()) if K is None else K
        if alpha is None:
            G = D.T.astype(np.int64) @ D.astype(np.int64)
            np.fill_diagonal(G, 0)
            alpha = int(G.max()) if N > 1 else 0
    k = min(k, N)
    n_subsets = sum(math.comb(N, i) for i in range(1, k + 1))
    if N > SUBSET_GUARD_N or n_subsets > 2_000_000:
        raise FeasibilityError(f"{n_subsets} subsets over N={N} columns exceeds the enumeration guard")
    masks = _column_masks(D)
    vacuous = False
    for size in range(1, k + 1):
        need = sum(max(K - j * alpha, 0) for j in range(size))
        if size * K - alpha * size * (size - 1) / 2 <= 0:
            vacuous = True
        for X in combinations(range(N), size):
            union = 0
            for c in X:
                union |= masks[c]
            if bin(union).count("1") < need:
                return False
    return None if vacuous else True


def gershgorin_rip_verify(matrix: CoherentMatrix, k: int, over_columns: Optional[int] = None) -> bool:
    """Check every k-column submatrix of the column-normalized matrix.

    Singular values must lie in [sqrt(1 - eps), sqrt(1 + eps)] with
    eps = (k-1) alpha / K.
    """
    N = matrix.N if over_columns is None else over_columns
    if N > RIP_GUARD_N:
        raise FeasibilityError(f"exhaustive RIP check limited to N<={RIP_GUARD_N}, got {N}")
    alpha = binary_coherence(matrix, N)
    eps = (k - 1) * alpha / matrix.K
    if eps >= 1:
        raise BoundVacuousError(f"(k-1)*alpha/K = {eps:g} >= 1")
    W = matrix.dense(N).astype(float) / np.sqrt(matrix.K)
    subsets = np.array(list(combinations(range(N), k)), dtype=np.int64)
    if len(subsets) == 0:
        return True
    blocks = np.transpose(W[:, subsets], (1, 0, 2))  # (n_subsets, m, k)
    sv = np.linalg.svd(blocks, compute_uv=False)
    lo, hi = math.sqrt(1 - eps), math.sqrt(1 + eps)
    tol = 1e-12
    return bool(np.all(sv >= lo - tol) and np.all(sv <= hi + tol))


def _row_transforms(matrix: CoherentMatrix) -> np.ndarray:
    n = matrix.N_tilde
    # (r^T F)_c = sum_n r_n e^{-2 pi i n c / n} / sqrt(n)
    return np.fft.fft(matrix.dense().astype(float), axis=1) / np.sqrt(n)


def fourier_column_sparsity(matrix: CoherentMatrix) -> tuple[int, Optional[int]]:
    """(predicted, verified) count of nonzero columns of M F.

    ``verified`` is None when N_tilde exceeds the dense-transform guard.
    """
    predicted = matrix.m - matrix.K + 1
    if matrix.N_tilde > TRANSFORM_GUARD:
        return predicted, None
    MF = _row_transforms(matrix)
    threshold = ZERO_THRESHOLD * math.sqrt(matrix.N_tilde)
    verified = int(np.count_nonzero(np.abs(MF).max(axis=0) > threshold))
    return predicted, verified


def uncertainty_products(matrix: CoherentMatrix) -> Optional[list[tuple[int, int]]]:
    """Per-row (time support, frequency support) sizes, or None above the guard."""
    if matrix.N_tilde > TRANSFORM_GUARD:
        return None
    MF = _row_transforms(matrix)
    threshold = ZERO_THRESHOLD * math.sqrt(matrix.N_tilde)
    out = []
    for r in range(matrix.m):
        n_t = int(matrix.row(r).sum())
        n_w = int(np.count_nonzero(np.abs(MF[r]) > threshold))
        out.append((n_t, n_w))
    return out


@dataclass
class BoundsReport:
    k: int
    alpha_bound: int
    alpha_actual: Optional[int]
    disjunct_d: Optional[int]
    rip_epsilon: float
    welch_m_min: Optional[float]
    row_lower_bound: Optional[float]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def bounds_report(matrix: CoherentMatrix, k: int, mu: Optional[float] = None) -> BoundsReport:
    if k < 1:
        raise ValueError("k must be >= 1")
    N, K = matrix.N, matrix.K
    a_bound = alpha_bound(matrix.moduli.s[0], N)
    a_actual = binary_coherence(matrix, N)
    a = a_actual if a_actual is not None else a_bound
    welch = None
    if mu is not None:
        welch = N / ((N - 1) * mu * mu + 1)
    if a > 0 and K > a:
        ratio = K / a
        row_lb = min(ratio**2 * math.log(N) / math.log(ratio), float(N))
    else:
        row_lb = None
    return BoundsReport(
        k=k,
        alpha_bound=a_bound,
        alpha_actual=a_actual,
        disjunct_d=(K - 1) // a if a > 0 else None,
        rip_epsilon=(k - 1) * a / K,
        welch_m_min=welch,
        row_lower_bound=row_lb,
    )


def write_dense_csv(matrix: CoherentMatrix, target: Union[str, os.PathLike, io.TextIOBase], transform: bool = False) -> None:
    """Row-major CSV of M (0/1) or of M F (each entry as two columns re,im)."""
    if matrix.N_tilde > TRANSFORM_GUARD:
        raise FeasibilityError(f"dense export limited to N_tilde <= {TRANSFORM_GUARD}")
    close = False
    if isinstance(target, (str, os.PathLike)):
        target = open(target, "w", newline="")
        close = True
    try:
        w = csv.writer(target)
        if transform:
            for row in _row_transforms(matrix):
                cells: list = []
                for z in row:
                    cells.extend((repr(float(z.real)), repr(float(z.imag))))
                w.writerow(cells)
        else:
            for row in matrix.dense():
                w.writerow(row.tolist())
    finally:
        if close:
            target.close()
