"""Sublinear-time sparse recovery from bit-tested coherent measurements.

Measurements are the rows of ``(M (*) B_N) x``: the base channel ``M x`` plus
one channel per bit of the column index, where bit channel ``i`` only sees
columns whose ``i``-th bit is set.  Recovery decodes one candidate index per
row by comparing each bit channel against its complement, keeps candidates
seen more than ``K/2`` times, median-estimates them and returns the ``2k``
largest.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .matrix import CoherentMatrix, crt_coherence

__all__ = [
    "BitTestMatrix",
    "GeneralizedCoherent",
    "MeasurementVector",
    "SparseApproximation",
    "RowSample",
    "SubsampledMatrix",
    "PreconditionWarning",
    "bit_test",
    "n_bits",
    "measure",
    "median_estimate",
    "approximate",
    "subsample_size",
    "retained_threshold",
    "subsample_rows",
    "best_k_term_error",
    "instance_bound",
    "error_norm",
    "make_rng",
]


class PreconditionWarning(UserWarning):
    """k is too large for the accuracy guarantee; the output is still computed."""


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def n_bits(N: int) -> int:
    return max(1, (int(N) - 1).bit_length())


class BitTestMatrix:
    """Row 0 is all ones; row i >= 1 holds bit i-1 of the column index."""

    def __init__(self, N: int):
        if N < 2:
            raise ValueError(f"bit test matrix needs N >= 2, got {N}")
        self.N = int(N)
        self.bits = n_bits(N)
        self.rows = 1 + self.bits

    def entry(self, i: int, j: int) -> int:
        return 1 if i == 0 else (j >> (i - 1)) & 1

    def column(self, j: int) -> np.ndarray:
        return np.array([self.entry(i, j) for i in range(self.rows)], dtype=np.uint8)

    def dense(self) -> np.ndarray:
        j = np.arange(self.N)
        out = np.ones((self.rows, self.N), dtype=np.uint8)
        for i in range(1, self.rows):
            out[i] = (j >> (i - 1)) & 1
        return out


def bit_test(N: int) -> BitTestMatrix:
    return BitTestMatrix(N)


class GeneralizedCoherent:
    """Nonnegative real matrix with >= K nonzeros per column, each >= c_min.

    ``support(n)`` returns the K rows holding the largest entries of column n
    (ties by row index), which is the submatrix the estimator uses.
    """

    def __init__(self, values, K: Optional[int] = None):
        A = np.asarray(values, dtype=float)
        if A.ndim != 2 or (A < 0).any():
            raise ValueError("expected a 2-D nonnegative matrix")
        self.values = A
        self.m, self.N = A.shape
        self.N_tilde = self.N
        nnz = (A > 0).sum(axis=0)
        if nnz.min() == 0:
            raise ValueError("every column needs at least one nonzero")
        self.K = int(nnz.min()) if K is None else int(K)
        if nnz.min() < self.K:
            raise ValueError(f"some column has fewer than K={self.K} nonzeros")
        self.c_min = float(A[A > 0].min())
        G = A.T @ A
        np.fill_diagonal(G, 0.0)
        self.alpha = float(G.max()) if self.N > 1 else 0.0
        # stable sort on -value keeps ties in row order
        order = np.argsort(-A, axis=0, kind="stable")[: self.K]
        self._support = order.T.copy()

    def support(self, n):
        return self._support[np.asarray(n, dtype=np.int64)]

    def column_values(self, n):
        n = np.asarray(n, dtype=np.int64)
        return self.values[self.support(n), n[..., None]]

    def dense(self, columns: Optional[int] = None) -> np.ndarray:
        return self.values if columns is None else self.values[:, :columns]


@dataclass
class MeasurementVector:
    """Base channel ``M x`` and one channel per index bit, each of length m."""

    N: int
    K: int
    base: np.ndarray
    bit_channels: np.ndarray

    @property
    def m(self) -> int:
        return self.base.shape[0]

    @property
    def n_channels(self) -> int:
        return 1 + self.bit_channels.shape[0]

    @property
    def size(self) -> int:
        return self.base.size + self.bit_channels.size

    def channels(self) -> np.ndarray:
        return np.vstack([self.base[None, :], self.bit_channels])

    def to_bytes(self) -> bytes:
        header = struct.pack("<4q", self.N, self.m, self.K, self.n_channels)
        body = np.ascontiguousarray(self.channels(), dtype="<c16").tobytes()
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "MeasurementVector":
        if len(data) < 32:
            raise ValueError("truncated measurement header")
        N, m, K, nch = struct.unpack("<4q", data[:32])
        body = np.frombuffer(data[32:], dtype="<c16")
        if body.size != m * nch:
            raise ValueError(f"expected {m * nch} complex values, found {body.size}")
        ch = body.reshape(nch, m).astype(np.complex128)
        return cls(N=N, K=K, base=ch[0].copy(), bit_channels=ch[1:].copy())

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "MeasurementVector":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass
class SparseApproximation:
    """At most 2k (index, value) pairs sorted by descending magnitude."""

    indices: np.ndarray
    values: np.ndarray
    N: int
    status: str = "ok"
    candidates: int = 0

    @property
    def entries(self) -> list:
        return [(int(i), complex(v)) for i, v in zip(self.indices, self.values)]

    @property
    def flagged(self) -> list:
        """Indices at or beyond the signal bandwidth N (zero-padding region)."""
        return [int(i) for i in self.indices if i >= self.N]

    def __len__(self):
        return len(self.indices)

    def to_dense(self, length: Optional[int] = None) -> np.ndarray:
        length = self.N if length is None else length
        if len(self.indices) and self.indices.max() >= length:
            length = int(self.indices.max()) + 1
        z = np.zeros(length, dtype=complex)
        z[self.indices] = self.values
        return z

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "status": self.status,
            "entries": [{"index": i, "re": v.real, "im": v.imag} for i, v in self.entries],
            "flagged": self.flagged,
        }


def _coherence_params(matrix):
    """(K, alpha, c_min) used by the accuracy precondition, or None if unknown."""
    if isinstance(matrix, CoherentMatrix):
        return matrix.K, crt_coherence(matrix.moduli.s, matrix.N), 1.0
    if isinstance(matrix, GeneralizedCoherent):
        return matrix.K, matrix.alpha, matrix.c_min
    return None


def measure(matrix, x) -> MeasurementVector:
    """Scatter each nonzero x_n into its K supporting rows, per channel."""
    x = np.asarray(x, dtype=complex)
    N = matrix.N
    if x.ndim != 1 or x.shape[0] != N:
        raise ValueError(f"signal length {x.shape} does not match N={N}")
    b = n_bits(N)
    idx = np.flatnonzero(x)
    rows = matrix.support(idx)  # (nnz, K)
    vals = matrix.column_values(idx) * x[idx, None]
    flat_rows = rows.ravel()
    m = matrix.m

    def scatter(weights):
        w = weights.ravel()
        return np.bincount(flat_rows, w.real, minlength=m) + 1j * np.bincount(flat_rows, w.imag, minlength=m)

    base = scatter(vals)
    chans = np.empty((b, m), dtype=complex)
    for i in range(b):
        bit = ((idx >> i) & 1).astype(float)
        chans[i] = scatter(vals * bit[:, None])
    return MeasurementVector(N=N, K=matrix.K, base=base, bit_channels=chans)


def _median_estimates(matrix, base: np.ndarray, ns: np.ndarray) -> np.ndarray:
    rows = matrix.support(ns)
    ratios = base[rows] / matrix.column_values(ns)
    return np.median(ratios.real, axis=-1) + 1j * np.median(ratios.imag, axis=-1)


def median_estimate(matrix, base_channel, n: int) -> complex:
    """Coordinate-wise median of the K ratios (M x)_h / M_{h,n} over column n's rows."""
    rows = np.asarray(matrix.support(n))
    if rows.shape[-1] < matrix.K:
        raise ValueError(f"column {n} has fewer than K={matrix.K} nonzeros")
    return complex(_median_estimates(matrix, np.asarray(base_channel), np.asarray(n)))


def decode_rows(measurements: MeasurementVector) -> np.ndarray:
    """One candidate index per row; a bit is 1 only on a strict win."""
    base = measurements.base
    ch = measurements.bit_channels
    bits = np.abs(ch) > np.abs(base[None, :] - ch)
    weights = np.left_shift(np.int64(1), np.arange(ch.shape[0], dtype=np.int64))
    return weights @ bits.astype(np.int64)


def approximate(matrix, measurements: MeasurementVector, k: int, epsilon: float = 1.0) -> SparseApproximation:
    if k < 1:
        raise ValueError("k must be >= 1")
    if measurements.m != matrix.m or measurements.N != matrix.N:
        raise ValueError(
            f"measurements (m={measurements.m}, N={measurements.N}) do not match "
            f"matrix (m={matrix.m}, N={matrix.N})"
        )
    status = "ok"
    params = _coherence_params(matrix)
    if params is not None:
        K, alpha, c_min = params
        if alpha > 0 and not K > 4 * k * alpha / (epsilon * c_min**2):
            status = "precondition_unmet"
            warnings.warn(
                f"K={K} <= 4 k alpha / (eps c_min^2) = {4 * k * alpha / (epsilon * c_min**2):g}; "
                "accuracy guarantee does not apply",
                PreconditionWarning,
                stacklevel=2,
            )

    decoded = decode_rows(measurements)
    values, counts = np.unique(decoded, return_counts=True)
    cand = values[(counts > matrix.K / 2) & (values < matrix.N_tilde)]
    if cand.size == 0:
        return SparseApproximation(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=complex), matrix.N, status, 0)
    est = _median_estimates(matrix, measurements.base, cand)
    mag = np.abs(est)
    keep = mag > 0
    cand, est, mag = cand[keep], est[keep], mag[keep]
    order = np.lexsort((cand, -mag))[: 2 * k]
    return SparseApproximation(cand[order], est[order], matrix.N, status, int(keep.sum()))


def best_k_term_error(x, k, p: float = 2) -> float:
    """p-norm of x minus its k largest-magnitude entries (ties by ascending index)."""
    x = np.asarray(x)
    k = int(k)
    if k <= 0:
        return float(np.linalg.norm(x, p))
    order = np.lexsort((np.arange(x.size), -np.abs(x)))
    return float(np.linalg.norm(x[order[k:]], p))


def instance_bound(x, k: int, epsilon: float) -> float:
    """||x - x_k||_2 + 22 eps ||x - x_{k/eps}||_1 / sqrt(k), with k/eps rounded up."""
    k_eps = math.ceil(k / epsilon - 1e-9)
    return best_k_term_error(x, k, 2) + 22 * epsilon * best_k_term_error(x, k_eps, 1) / math.sqrt(k)


def error_norm(x, approx: SparseApproximation, p: float = 2) -> float:
    x = np.asarray(x, dtype=complex)
    z = approx.to_dense(x.size)
    xx = np.zeros(z.size, dtype=complex)
    xx[: x.size] = x
    return float(np.linalg.norm(xx - z, p))


def subsample_size(m: int, K: int, N: int, sigma: float) -> int:
    return math.ceil(28.56 * (m / K) * math.log(2 * N / (1 - sigma)))


def retained_threshold(N: int, sigma: float) -> float:
    return 21 * math.log(2 * N / (1 - sigma))


@dataclass
class RowSample:
    rows: np.ndarray  # flat row indices in draw order, duplicates kept
    beta: int
    l_tilde: float
    sigma: float
    seed: object = None


def subsample_rows(matrix, sigma: float, rng_seed) -> RowSample:
    """Draw beta rows uniformly with replacement."""
    if not 2 / 3 <= sigma < 1:
        raise ValueError(f"sigma must lie in [2/3, 1), got {sigma}")
    beta = subsample_size(matrix.m, matrix.K, matrix.N, sigma)
    rows = make_rng(rng_seed).integers(0, matrix.m, size=beta)
    return RowSample(rows=rows, beta=beta, l_tilde=retained_threshold(matrix.N, sigma), sigma=sigma, seed=rng_seed)


class SubsampledMatrix:
    """Rows of a base matrix selected by a RowSample, with multiplicity.

    Column n keeps its first ceil(l_tilde) selected nonzero rows in draw
    order.  Only columns in [0, N) are represented.
    """

    def __init__(self, matrix, sample: RowSample):
        self.base = matrix
        self.sample = sample
        self.m = sample.beta
        self.N = matrix.N
        self.N_tilde = matrix.N
        self.K = math.ceil(sample.l_tilde - 1e-12)
        n = np.arange(self.N)
        # nonzero pattern of the selected rows restricted to [0, N)
        sup = matrix.support(n)  # (N, K0)
        hit = (sample.rows[None, None, :] == sup[:, :, None]).any(axis=1)  # (N, beta)
        self.retained = hit.sum(axis=1)
        self._support = np.full((self.N, self.K), -1, dtype=np.int64)
        for c in range(self.N):
            pos = np.flatnonzero(hit[c])[: self.K]
            self._support[c, : pos.size] = pos

    def support(self, n):
        out = self._support[np.asarray(n, dtype=np.int64)]
        if (out < 0).any():
            raise ValueError("a column retains fewer than ceil(l_tilde) selected rows")
        return out

    def column_values(self, n):
        n = np.asarray(n, dtype=np.int64)
        orig_rows = self.sample.rows[self.support(n)]
        base_rows = self.base.support(n)
        base_vals = self.base.column_values(n)
        # look up each selected row's entry in column n
        match = orig_rows[..., :, None] == base_rows[..., None, :]
        return (match * base_vals[..., None, :]).sum(axis=-1)

    def restrict(self, measurements: MeasurementVector) -> MeasurementVector:
        r = self.sample.rows
        return MeasurementVector(
            N=measurements.N, K=self.K, base=measurements.base[r], bit_channels=measurements.bit_channels[:, r]
        )

    def columns_retained(self) -> bool:
        return bool((self.retained >= self.sample.l_tilde).all())

    def majority_accurate(self, x, k: int, epsilon: float) -> bool:
        """Every column has > l_tilde/2 retained rows estimating x_n within eps*tail/k."""
        x = np.asarray(x, dtype=complex)
        if not self.columns_retained():
            return False
        tol = epsilon * best_k_term_error(x, math.ceil(k / epsilon - 1e-9), 1) / k
        base = np.asarray(self.base.dense(self.N), dtype=float) @ x  # M x over the original rows
        n = np.arange(self.N)
        rows = self.sample.rows[self.support(n)]
        ratios = base[rows] / self.column_values(n)
        good = np.abs(ratios - x[:, None]) <= tol * (1 + 1e-12) + 1e-15
        return bool((good.sum(axis=1) > self.K / 2).all())
