"""Minimal-sampling design search.

For bandwidth ``N``, ratio ``D`` and coherence ``alpha`` pick ``K = ceil(D alpha)``
increasing, pairwise-coprime moduli minimizing ``m = sum(s)`` subject to
``prod(s[:alpha]) < N <= prod(s[:alpha+1])``.  The solver is a depth-first
branch-and-bound over candidate values in increasing order, warm-started
from the consecutive-prime solution.
"""

from __future__ import annotations

import bisect
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .numth import (
    DegenerateDesignError,
    PrimeTable,
    iroot_ceil_strict,
    pairwise_coprime,
    prime_bound_t,
    primorial_extra_term,
    primorial_info,
    root_down,
)

__all__ = [
    "VARIANTS",
    "DEFAULT_EPSILON",
    "DesignProblem",
    "DesignSolution",
    "BudgetExhausted",
    "feasible_alphas",
    "warm_start",
    "lower_bound_m",
    "valid_lower_bound",
    "tail_floor",
    "candidate_values",
    "solve_alpha",
    "optimize",
    "asymptotic_scale",
    "check_constraints",
]

VARIANTS = ("relprime", "prime_powers", "primes")
DEFAULT_EPSILON = 4 / (6 + math.sqrt(7))
DEFAULT_BUDGET = 10**8


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class DesignProblem:
    N: int
    D: float
    variant: str = "relprime"
    alpha: Optional[int] = None
    k: Optional[int] = None
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.N < 4:
            raise ValueError(f"N must be >= 4, got {self.N}")
        if not self.D > 1:
            raise ValueError(f"D must exceed 1, got {self.D}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")

    @classmethod
    def from_k_eps(cls, N: int, k: int, epsilon: float = DEFAULT_EPSILON, variant: str = "relprime", alpha=None):
        if k < 2:
            raise ValueError("k must be >= 2 so that D = (k-1)/epsilon > 1 is possible")
        return cls(N=N, D=(k - 1) / epsilon, variant=variant, alpha=alpha, k=k, epsilon=epsilon)

    def K(self, alpha: int) -> int:
        return math.ceil(self.D * alpha - 1e-9)


@dataclass
class DesignSolution:
    N: int
    D: float
    variant: str
    alpha: Optional[int]
    K: Optional[int]
    s: list
    m: Optional[int]
    fourier_samples: Optional[int]
    status: str
    nodes_explored: int = 0
    bounds: dict = field(default_factory=dict)
    warm_start: Optional[list] = None
    per_alpha: list = field(default_factory=list)
    wall_ms: float = 0.0

    def as_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_ms")
            for row in d["per_alpha"]:
                row.pop("wall_ms", None)
        return d


# ---------------------------------------------------------------- bounds


def feasible_alphas(N: int, table: Optional[PrimeTable] = None) -> list:
    """alpha in [1, floor(log2 N)] whose first-alpha primorial is below N."""
    table = table if table is not None else PrimeTable()
    out = []
    for a in range(1, N.bit_length()):
        if 2**a > N:
            break
        if table.product(1, a) < N:
            out.append(a)
    return out


def warm_start(N: int, K: int, alpha: int, table: Optional[PrimeTable] = None) -> Optional[list]:
    """Consecutive primes p_{r+1..r+K} for the least r meeting the product window."""
    table = table if table is not None else PrimeTable()
    if table.product(1, alpha) >= N:
        return None
    r = 0
    while table.product(r + 1, alpha + 1) < N:
        r += 1
    table.ensure_index(r + K)
    return table.values[r + 1 : r + K + 1]


def lower_bound_m(N: int, K: int, alpha: int, refinement="basic", table: Optional[PrimeTable] = None) -> float:
    """K N^(1/(alpha+1)) + (K-alpha)(K-alpha-1), optionally plus the primorial term.

    The primorial term is added only when positive, so the refined value is
    never below the basic one.
    """
    if K <= alpha:
        raise DegenerateDesignError(f"K={K} <= alpha={alpha}")
    basic = K * N ** (1.0 / (alpha + 1)) + (K - alpha) * (K - alpha - 1)
    if refinement in (None, "basic"):
        return basic
    if isinstance(refinement, tuple):
        v = int(refinement[1])
    else:
        v = int(str(refinement)[len("primorial") :].strip("()"))
    extra = primorial_extra_term(K, alpha, primorial_info(v, table))
    return basic + max(0, extra)


def tail_floor(x: int, T: int) -> int:
    """Least sum of T distinct integers > x with at most one even member."""
    if T <= 0:
        return 0
    even = x + 1 if (x + 1) % 2 == 0 else x + 2
    odd = x + 1 if (x + 1) % 2 else x + 2
    vals = sorted([even] + [odd + 2 * i for i in range(T)])[:T]
    return sum(vals)


def valid_lower_bound(N: int, K: int, alpha: int) -> float:
    """Head AM-GM bound plus a parity-aware tail floor; holds for every variant."""
    head = (alpha + 1) * root_down(N, alpha + 1)
    return head + tail_floor(iroot_ceil_strict(N, alpha + 1), K - alpha - 1)


def asymptotic_scale(N: float, D: float) -> float:
    L = D * math.log(N)
    if L <= 1:
        raise ValueError(f"D*ln(N) = {L:g} must exceed 1")
    return D * D * math.log(N) ** 2 / math.log(L)


def check_constraints(s, N: int, alpha: int) -> dict:
    s = [int(v) for v in s]
    increasing = all(a < b for a, b in zip(s, s[1:]))
    coprime = pairwise_coprime(s) if s and min(s) >= 2 else False
    window = math.prod(s[:alpha]) < N <= math.prod(s[: alpha + 1])
    return {"I": increasing, "II": window, "III": coprime}


# ---------------------------------------------------------------- candidates


def _spf(limit: int) -> np.ndarray:
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in range(2, limit + 1):
        if spf[p] == 0:
            spf[p :: p][spf[p :: p] == 0] = p
    return spf


def candidate_values(limit: int, variant: str):
    """Admissible values in [2, limit] and their prime-factor bitmasks."""
    if limit < 2:
        return [], []
    spf = _spf(limit)
    prime_bit = {}
    vals, masks = [], []
    for v in range(2, limit + 1):
        n, mask, nfac = v, 0, 0
        while n > 1:
            p = int(spf[n])
            if p not in prime_bit:
                prime_bit[p] = 1 << len(prime_bit)
            mask |= prime_bit[p]
            nfac += 1
            while n % p == 0:
                n //= p
        if variant == "primes" and spf[v] != v:
            continue
        if variant == "prime_powers" and nfac != 1:
            continue
        vals.append(v)
        masks.append(mask)
    return vals, masks


# ---------------------------------------------------------------- search


def _search(N, K, alpha, vals, masks, minima, bound, budget):
    """DFS for the lexicographically first s with sum(s) < bound.

    ``minima[j]`` is a per-position floor (the j-th prime).  Returns
    (best_sum, best_s, nodes); best_s is None when nothing beats ``bound``.
    """
    nvals = len(vals)
    C = vals[-1] if vals else 1
    best = [bound, None]
    nodes = 0
    chosen = [0] * K
    pos_start = [bisect.bisect_left(vals, minima[j]) for j in range(K)]

    def completion(ci, used, r):
        """Sum of the r smallest admissible values after index ci, coprime to used."""
        total, got = 0, 0
        for cj in range(ci + 1, nvals):
            if masks[cj] & used == 0:
                total += vals[cj]
                got += 1
                if got == r:
                    return total
        return None

    def dfs(pos, start, S, P, used):
        nonlocal nodes
        r = K - pos - 1
        tri = r * (r + 1) // 2
        lo = max(start, pos_start[pos])
        if pos == alpha:
            lo = max(lo, bisect.bisect_left(vals, -(-N // P)))
        for ci in range(lo, nvals):
            v = vals[ci]
            # every later value exceeds v, so the cheap floor grows with v
            if S + v * (r + 1) + tri >= best[0]:
                return
            if pos < alpha:
                h = alpha - pos - 1
                head = P * v
                for i in range(1, h + 1):
                    head *= v + i
                if head >= N:
                    return
                if P * v * C ** (h + 1) < N:
                    continue
            mv = masks[ci]
            if mv & used:
                continue
            nodes += 1
            if nodes > budget:
                raise BudgetExhausted
            nused = used | mv
            if r == 0:
                best[0] = S + v
                chosen[pos] = v
                best[1] = list(chosen)
                return
            comp = completion(ci, nused, r)
            if comp is None:
                continue
            if pos < alpha:
                hrem = alpha - pos
                g = root_down(max(N / (P * v), 1.0), hrem) if hrem else 0.0
                comp = max(comp, r * g + (r - hrem) * (r - hrem + 1) / 2)
            if S + v + comp >= best[0]:
                continue
            chosen[pos] = v
            dfs(pos + 1, ci + 1, S + v, P * v if pos <= alpha else P, nused)

    try:
        dfs(0, 0, 0, 1, 0)
    except BudgetExhausted:
        return best[0], best[1], nodes, False
    return best[0], best[1], nodes, True


def _reported_bounds(N, K, alpha, m_tilde, table) -> dict:
    out = {
        "sum_bound": lower_bound_m(N, K, alpha),
        "primorial_bound": {v: lower_bound_m(N, K, alpha, ("primorial", v), table) for v in (1, 2, 3, 4)},
        "valid_lower_bound": valid_lower_bound(N, K, alpha),
        "warm_start_m": m_tilde,
    }
    try:
        t, B = prime_bound_t(N, K, alpha, m_tilde, table=table)
        out["t"], out["B"] = t, B
    except DegenerateDesignError:
        out["t"], out["B"] = None, None
    return out


def solve_alpha(
    problem: DesignProblem,
    alpha: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    cutoff: Optional[int] = None,
    table: Optional[PrimeTable] = None,
) -> DesignSolution:
    """Exact minimum of sum(s) for one alpha.

    ``cutoff`` (exclusive) restricts the search to m < cutoff; if nothing
    qualifies the status is ``dominated``.
    """
    t0 = time.perf_counter()
    alpha = problem.alpha if alpha is None else alpha
    if alpha is None:
        raise ValueError("alpha must be given")
    table = table if table is not None else PrimeTable()
    N = problem.N
    K = problem.K(alpha)

    def result(status, s=None, nodes=0, bounds=None, warm=None):
        m = sum(s) if s else None
        return DesignSolution(
            N=N, D=problem.D, variant=problem.variant, alpha=alpha, K=K, s=list(s) if s else [],
            m=m, fourier_samples=(m - K + 1) if m is not None else None, status=status,
            nodes_explored=nodes, bounds=bounds or {}, warm_start=warm,
            wall_ms=1000 * (time.perf_counter() - t0),
        )

    if not 1 <= alpha <= math.floor(math.log2(N)):
        return result("infeasible")
    warm = warm_start(N, K, alpha, table)
    if warm is None:
        return result("infeasible")
    m_tilde = sum(warm)
    bounds = _reported_bounds(N, K, alpha, m_tilde, table)
    # searching for m <= m_tilde finds the lexicographically first optimum
    bound = m_tilde + 1
    if cutoff is not None:
        bound = min(bound, cutoff)
    table.ensure_index(K)
    minima = table.values[1 : K + 1]
    ceiling = bound - 1 - sum(minima[:-1])
    bounds["search_ceiling"] = ceiling
    vals, masks = candidate_values(ceiling, problem.variant)
    best_m, best_s, nodes, complete = _search(N, K, alpha, vals, masks, minima, bound, budget)
    if not complete:
        if best_s is None and (cutoff is None or m_tilde < cutoff):
            best_s = warm
        return result("budget_exhausted", best_s, nodes, bounds, warm)
    if best_s is None:
        if cutoff is not None and m_tilde >= cutoff:
            return result("dominated", None, nodes, bounds, warm)
        best_s = warm
    return result("optimal", best_s, nodes, bounds, warm)


def optimize(problem: DesignProblem, budget: int = DEFAULT_BUDGET, table: Optional[PrimeTable] = None) -> DesignSolution:
    """Best fourier_samples = m - K + 1 over alpha; ties go to the smaller alpha."""
    t0 = time.perf_counter()
    table = table if table is not None else PrimeTable()
    if problem.alpha is not None:
        return solve_alpha(problem, problem.alpha, budget, table=table)
    best: Optional[DesignSolution] = None
    log = []
    nodes = 0
    incomplete = False
    for a in feasible_alphas(problem.N, table):
        K = problem.K(a)
        lb_fs = math.ceil(valid_lower_bound(problem.N, K, a) - 1e-9) - K + 1
        if best is not None and lb_fs >= best.fourier_samples:
            log.append({"alpha": a, "K": K, "status": "skipped", "lower_bound_fourier": lb_fs})
            continue
        cutoff = None if best is None else best.fourier_samples + K - 1
        sol = solve_alpha(problem, a, budget - nodes, cutoff=cutoff, table=table)
        nodes += sol.nodes_explored
        log.append({
            "alpha": a, "K": K, "status": sol.status, "m": sol.m,
            "fourier_samples": sol.fourier_samples, "nodes": sol.nodes_explored,
            "lower_bound_fourier": lb_fs, "wall_ms": sol.wall_ms,
        })
        if sol.status == "budget_exhausted":
            incomplete = True
        if sol.s and (best is None or sol.fourier_samples < best.fourier_samples):
            best = sol
        if incomplete:
            break
    if best is None:
        status = "budget_exhausted" if incomplete else "infeasible"
        return DesignSolution(
            N=problem.N, D=problem.D, variant=problem.variant, alpha=None, K=None, s=[], m=None,
            fourier_samples=None, status=status, nodes_explored=nodes, per_alpha=log,
            wall_ms=1000 * (time.perf_counter() - t0),
        )
    best.status = "budget_exhausted" if incomplete else "optimal"
    best.nodes_explored = nodes
    best.per_alpha = log
    best.wall_ms = 1000 * (time.perf_counter() - t0)
    return best
