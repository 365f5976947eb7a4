"""Binary integer program for one alpha, written in CPLEX LP text format.

Variable ``s_j_i`` is 1 iff modulus ``j`` takes value ``i`` (``i`` in 1..B).
Row families:

* ``one_j``      each modulus takes exactly one value
* ``order_j``    s_{j+1} - s_j >= 1
* ``winlo/winhi`` the product window in log form
* ``min_j``      values below the j-th prime are excluded
* ``cop_p``      at most one chosen value is divisible by the prime p
* ``var_j``      values outside the variant's candidate set are excluded

Strict ``prod < N`` is written as ``sum ln i <= ln(N - 1/2)``, which for
integer products is the same as ``prod <= N - 1`` and leaves a half-unit
margin against rounding; ``N <= prod`` likewise becomes ``>= ln(N - 1/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .design import DesignProblem, warm_start
from .numth import DegenerateDesignError, PrimeTable, prime_bound_t

__all__ = ["LPExport", "export_ilp", "lp_bound_B", "delta"]

MAX_VARIABLES = 10**7
LINE_TERMS = 8


@dataclass
class LPExport:
    text: str
    manifest: dict = field(default_factory=dict)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.text)


def delta(k: int, i: int, table: Optional[PrimeTable] = None) -> int:
    """1 iff the k-th prime divides i."""
    table = table if table is not None else PrimeTable()
    return int(i % table[k] == 0)


def lp_bound_B(N: int, K: int, alpha: int, table: Optional[PrimeTable] = None) -> tuple[int, str]:
    """Value range bound B and where it came from.

    Uses the prime-gap bound when K > alpha + 1; otherwise one past the
    largest value any solution no worse than the warm start can use.
    """
    table = table if table is not None else PrimeTable()
    warm = warm_start(N, K, alpha, table)
    if warm is None:
        raise ValueError(f"alpha={alpha} is infeasible for N={N}")
    m_tilde = sum(warm)
    try:
        _, B = prime_bound_t(N, K, alpha, m_tilde, table=table)
        return B, "prime_gap"
    except DegenerateDesignError:
        table.ensure_index(K)
        return m_tilde - sum(table.values[1:K]) + 1, "incumbent"


def _terms(pairs) -> list:
    """Render (coef, var) pairs as LP expression chunks."""
    out = []
    for coef, var in pairs:
        if isinstance(coef, float):
            c = repr(coef)
        else:
            c = str(coef)
        if c.startswith("-"):
            out.append(f"- {c[1:]} {var}")
        else:
            out.append(f"+ {c} {var}")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(label: str, chunks: list, tail: str) -> list:
    lines = []
    head = f" {label}: "
    for start in range(0, len(chunks), LINE_TERMS):
        piece = " ".join(chunks[start : start + LINE_TERMS])
        lines.append((head if start == 0 else "   ") + piece)
    if not lines:
        lines.append(head + "0 s_1_1")
    lines[-1] += f" {tail}"
    return lines


def _admissible(i: int, variant: str) -> bool:
    if i < 2:
        return False
    if variant == "relprime":
        return True
    p = next(q for q in range(2, i + 1) if i % q == 0)
    if variant == "primes":
        return p == i
    while i % p == 0:
        i //= p
    return i == 1


def export_ilp(
    problem: DesignProblem,
    alpha: Optional[int] = None,
    B: Optional[int] = None,
    max_variables: int = MAX_VARIABLES,
    table: Optional[PrimeTable] = None,
) -> LPExport:
    alpha = problem.alpha if alpha is None else alpha
    if alpha is None:
        raise ValueError("alpha must be fixed for export")
    table = table if table is not None else PrimeTable()
    N = problem.N
    K = problem.K(alpha)
    source = "given"
    if B is None:
        B, source = lp_bound_B(N, K, alpha, table)
    n_vars = K * B
    if n_vars > max_variables:
        raise OverflowError(f"{n_vars} binaries exceed the export limit {max_variables}")

    def var(j, i):
        return f"s_{j}_{i}"

    counts = {}
    lines = [
        f"\\ minimal-sampling design: N={N} D={problem.D!r} variant={problem.variant} alpha={alpha} K={K} B={B}",
        "Minimize",
    ]
    lines += _wrap("obj", _terms((i, var(j, i)) for j in range(1, K + 1) for i in range(1, B + 1)), "")
    lines.append("Subject To")

    for j in range(1, K + 1):
        lines += _wrap(f"one_{j}", _terms((1, var(j, i)) for i in range(1, B + 1)), "= 1")
    counts["one"] = K

    for j in range(1, K):
        pairs = [(i, var(j + 1, i)) for i in range(1, B + 1)] + [(-i, var(j, i)) for i in range(1, B + 1)]
        lines += _wrap(f"order_{j}", _terms(pairs), ">= 1")
    counts["order"] = K - 1

    rhs = repr(math.log(N - 0.5))
    lo = [(math.log(i), var(j, i)) for j in range(1, alpha + 1) for i in range(2, B + 1)]
    hi = [(math.log(i), var(j, i)) for j in range(1, alpha + 2) for i in range(2, B + 1)]
    lines += _wrap("winlo", _terms(lo), f"<= {rhs}")
    lines += _wrap("winhi", _terms(hi), f">= {rhs}")
    counts["window"] = 2

    table.ensure_index(K)
    n_min = 0
    for j in range(1, K + 1):
        pj = table[j]
        pairs = [(1, var(j, i)) for i in range(1, min(pj, B + 1))]
        if pairs:
            lines += _wrap(f"min_{j}", _terms(pairs), "= 0")
            n_min += 1
    counts["min_value"] = n_min

    primes = table.primes_below(B + 1)
    for k, p in enumerate(primes, start=1):
        pairs = [(1, var(j, i)) for j in range(1, K + 1) for i in range(p, B + 1, p)]
        lines += _wrap(f"cop_{p}", _terms(pairs), "<= 1")
    counts["coprime"] = len(primes)

    n_var_rows = 0
    if problem.variant != "relprime":
        bad = [i for i in range(1, B + 1) if not _admissible(i, problem.variant)]
        if bad:
            for j in range(1, K + 1):
                lines += _wrap(f"var_{j}", _terms((1, var(j, i)) for i in bad), "= 0")
                n_var_rows += 1
    counts["variant"] = n_var_rows

    lines.append("Binary")
    names = [var(j, i) for j in range(1, K + 1) for i in range(1, B + 1)]
    for start in range(0, len(names), LINE_TERMS):
        lines.append(" " + " ".join(names[start : start + LINE_TERMS]))
    lines.append("End")

    manifest = {
        "N": N,
        "D": problem.D,
        "variant": problem.variant,
        "alpha": alpha,
        "K": K,
        "B": B,
        "B_source": source,
        "binaries": n_vars,
        "constraints": sum(counts.values()),
        "constraint_families": counts,
    }
    return LPExport(text="\n".join(lines) + "\n", manifest=manifest)
