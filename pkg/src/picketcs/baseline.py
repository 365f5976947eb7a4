"""Random inverse-DFT row selection certified by coherence.

Rows of the N x N inverse DFT are added in a random order without
replacement.  With unit-normalized columns, the inner product of columns
``a`` and ``b`` over the chosen rows depends only on ``d = a - b``:
``|sum_{r in rows} exp(2 pi i r d / N)| / m``, so one length-N FFT of the
row-indicator vector gives every difference at once.  A trial stops as soon
as ``(k - 1) mu <= epsilon``.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field

import numpy as np

from .recovery import make_rng

__all__ = [
    "BaselineTrial",
    "BaselineResult",
    "trial_seed",
    "coherence_of_rows",
    "direct_coherence",
    "welch_floor",
    "run_trial",
    "run_baseline",
]


@dataclass
class BaselineTrial:
    N: int
    k: int
    epsilon: float
    seed: str
    rows_selected: list
    m_stop: int
    mu: float


@dataclass
class BaselineResult:
    N: int
    k: int
    epsilon: float
    base_seed: int
    trials: list = field(default_factory=list)

    @property
    def m_stops(self) -> list:
        return [t.m_stop for t in self.trials]

    @property
    def min_m_stop(self) -> int:
        return min(self.m_stops)

    def summary(self) -> dict:
        return {
            "N": self.N,
            "k": self.k,
            "epsilon": self.epsilon,
            "base_seed": self.base_seed,
            "trials": len(self.trials),
            "min": self.min_m_stop,
            "median": statistics.median(self.m_stops),
        }

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["N", "k", "epsilon", "trial_seed", "m_stop"])
        for t in self.trials:
            w.writerow([self.N, self.k, repr(self.epsilon), t.seed, t.m_stop])
        return buf.getvalue()


def trial_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Child ``index`` of ``SeedSequence(base_seed).spawn``; shared across k."""
    return np.random.SeedSequence(base_seed, spawn_key=(index,))


def coherence_of_rows(N: int, rows) -> float:
    u = np.zeros(N)
    u[np.asarray(rows, dtype=np.int64)] = 1
    m = u.sum()
    return float(np.abs(np.fft.fft(u)[1:]).max() / m) if N > 1 else 0.0


def direct_coherence(N: int, rows) -> float:
    """Pairwise inner products of the normalized submatrix, for cross-checks."""
    rows = np.asarray(rows, dtype=np.int64)
    A = np.exp(2j * np.pi * np.outer(rows, np.arange(N)) / N) / np.sqrt(len(rows))
    G = np.abs(A.conj().T @ A)
    np.fill_diagonal(G, 0)
    return float(G.max())


def welch_floor(N: int, k: int, epsilon: float) -> float:
    mu = epsilon / (k - 1)
    return N / ((N - 1) * mu * mu + 1)


def run_trial(N: int, k: int, epsilon: float, seed) -> BaselineTrial:
    if N < 2 or N & (N - 1):
        raise ValueError(f"N must be a power of two, got {N}")
    if k < 2:
        raise ValueError("k must be >= 2")
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
        label = f"{ss.entropy}:{'/'.join(map(str, ss.spawn_key))}"
    else:
        ss = np.random.SeedSequence(seed)
        label = str(seed)
    order = make_rng(ss).permutation(N)
    u = np.zeros(N)
    mu = 1.0
    for m in range(1, N + 1):
        u[order[m - 1]] = 1
        mu = float(np.abs(np.fft.fft(u)[1:]).max() / m)
        if (k - 1) * mu <= epsilon:
            return BaselineTrial(N, k, epsilon, label, order[:m].tolist(), m, mu)
    return BaselineTrial(N, k, epsilon, label, order.tolist(), N, mu)


def run_baseline(N: int, k: int, epsilon: float, trials: int, base_seed: int = 0) -> BaselineResult:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    out = BaselineResult(N, k, epsilon, base_seed)
    for i in range(trials):
        out.trials.append(run_trial(N, k, epsilon, trial_seed(base_seed, i)))
    return out
