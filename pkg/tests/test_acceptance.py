"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import itertools
import math
import time
import warnings

import numpy as np
import pytest

from picketcs.baseline import run_baseline, welch_floor
from picketcs.design import (
    DEFAULT_EPSILON,
    VARIANTS,
    DesignProblem,
    check_constraints,
    feasible_alphas,
    lower_bound_m,
    optimize,
    solve_alpha,
    warm_start,
)
from picketcs.ilp import export_ilp
from picketcs.matrix import (
    ModulusSet,
    alpha_bound,
    binary_coherence,
    build_matrix,
    crt_coherence,
    disjunct_check,
    fourier_column_sparsity,
)
from picketcs.numth import PrimeTable, primes_up_to
from picketcs.recovery import (
    PreconditionWarning,
    SubsampledMatrix,
    approximate,
    error_norm,
    make_rng,
    measure,
    subsample_rows,
    instance_bound,
)

from .oracles import enumerate_designs, parse_lp, solve_lp_with_milp


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def dft_matrix(L):
    w = np.arange(L)
    return np.exp(-2j * np.pi * np.outer(w, w) / L) / math.sqrt(L)


# recovery instance with K = 9 > 4 k alpha for k <= 2, alpha = 1
RECOVERY_SET = ModulusSet((11, 13, 17, 19, 23, 29, 31, 37, 41), 140)


def test_c01_transform_column_count(report):
    t0 = time.perf_counter()
    results = []
    for s, N, expected in (((2, 3, 5), 6, 8), ((3, 4, 5, 7), 12, 16)):
        M = build_matrix(ModulusSet(s, N))
        prod = M.dense().astype(float) @ dft_matrix(M.N_tilde)
        dense_count = int((np.abs(prod).max(axis=0) > 1e-8 * math.sqrt(M.N_tilde)).sum())
        predicted, verified = fourier_column_sparsity(M)
        results.append((s, expected, dense_count, predicted, verified))
    elapsed = time.perf_counter() - t0
    ok = all(e == d == p == v for _, e, d, p, v in results) and elapsed < 1
    detail = "; ".join(f"s={s} expected {e}, dense {d}, verifier {v}" for s, e, d, _, v in results)
    assert report(1, ok, f"{detail}; {elapsed:.3f}s")


def random_modulus_set(rng, max_N=2**14, max_modulus=80):
    while True:
        K = int(rng.integers(2, 7))
        s = []
        for v in rng.permutation(np.arange(2, max_modulus + 1)):
            v = int(v)
            if all(math.gcd(v, u) == 1 for u in s):
                s.append(v)
                if len(s) == K:
                    break
        s.sort()
        hi = min(math.prod(s) - 1, max_N)
        if hi <= s[0] + 1:
            continue
        # log-uniform N so small instances are well represented
        N = int(round(math.exp(rng.uniform(math.log(s[0] + 1), math.log(hi)))))
        N = min(max(N, s[0] + 1), hi)
        return ModulusSet(tuple(s), N)


def brute_alpha(M):
    D = M.dense(M.N).astype(np.int64)
    G = D.T @ D
    np.fill_diagonal(G, 0)
    return int(G.max())


def test_c02_coherence_bound(report):
    rng = make_rng(2)
    bad, brute_checked = [], 0
    for _ in range(50):
        ms = random_modulus_set(rng)
        M = build_matrix(ms)
        a = binary_coherence(M, ms.N)
        if a > alpha_bound(ms.s[0], ms.N):
            bad.append((ms.s, ms.N, "bound"))
        if a != crt_coherence(ms.s, ms.N):
            bad.append((ms.s, ms.N, "crt"))
        if ms.N <= 512:
            brute_checked += 1
            if a != brute_alpha(M):
                bad.append((ms.s, ms.N, "brute"))
    ok = not bad and brute_checked > 0
    assert report(2, ok, f"50 random sets, {brute_checked} brute-forced, violations {bad}")


def small_designs(max_N=20, max_modulus=12, max_K=4):
    vals = range(2, max_modulus + 1)
    for K in range(2, max_K + 1):
        for s in itertools.combinations(vals, K):
            if any(math.gcd(a, b) != 1 for a, b in itertools.combinations(s, 2)):
                continue
            for N in range(s[0] + 1, min(max_N, math.prod(s) - 1) + 1):
                yield ModulusSet(s, N)


def test_c03_disjunct(report):
    failures, checked = [], 0
    for ms in small_designs():
        M = build_matrix(ms)
        a = binary_coherence(M, ms.N)
        d = (ms.K - 1) // a
        checked += 1
        if not disjunct_check(M, d, ms.N):
            failures.append((ms.s, ms.N, d))
    assert report(3, not failures, f"{checked} matrices with N <= 20, failures {failures[:5]}")


def test_c04_pair_singular_values(report):
    t0 = time.perf_counter()
    M = build_matrix(ModulusSet((3, 4, 5, 7), 12))
    a = binary_coherence(M, 12)
    A = M.dense(12).astype(float) / math.sqrt(M.K)
    lo, hi = math.sqrt(1 - a / M.K), math.sqrt(1 + a / M.K)
    pairs = list(itertools.combinations(range(12), 2))
    worst = [np.inf, -np.inf]
    for p in pairs:
        sv = np.linalg.svd(A[:, p], compute_uv=False)
        worst = [min(worst[0], sv.min()), max(worst[1], sv.max())]
    elapsed = time.perf_counter() - t0
    tol = 1e-12
    ok = len(pairs) == 66 and worst[0] >= lo - tol and worst[1] <= hi + tol and elapsed < 1
    assert report(4, ok, f"{len(pairs)} pairs, sv in [{worst[0]:.6f}, {worst[1]:.6f}] "
                         f"vs [{lo:.6f}, {hi:.6f}], {elapsed:.3f}s")


def test_c05_exact_recovery(report):
    M = build_matrix(RECOVERY_SET)
    alpha = crt_coherence(RECOVERY_SET.s, RECOVERY_SET.N)
    failures = []
    for t in range(100):
        rng = make_rng(500 + t)
        k = 1 + t % 2
        assert M.K > 4 * k * alpha
        support = np.sort(rng.choice(M.N, size=k, replace=False))
        x = np.zeros(M.N, dtype=complex)
        x[support] = rng.uniform(0.5, 2, k) * np.exp(2j * np.pi * rng.random(k))
        out = approximate(M, measure(M, x), k, 1.0)
        same = np.array_equal(np.sort(out.indices), support)
        if not same or not np.all(np.abs(out.to_dense(M.N)[support] - x[support]) <= 1e-10 * np.abs(x[support])):
            failures.append(t)
    assert report(5, not failures, f"100 signals, k in {{1, 2}}, failures {failures}")


def power_law_signal(rng, N):
    p = rng.uniform(0.6, 2.0)
    mags = (1.0 + np.arange(N)) ** -p * rng.uniform(0.5, 3)
    x = np.zeros(N, dtype=complex)
    x[rng.permutation(N)] = mags * np.exp(2j * np.pi * rng.random(N))
    return x


def test_c06_instance_bound(report):
    M = build_matrix(RECOVERY_SET)
    k, eps = 2, 1.0
    checked, failures, worst = 0, [], 0.0
    for t in range(100):
        x = power_law_signal(make_rng(600 + t), M.N)
        with warnings.catch_warnings():
            warnings.simplefilter("error", PreconditionWarning)
            out = approximate(M, measure(M, x), k, eps)
        checked += 1
        err, bound = error_norm(x, out, 2), instance_bound(x, k, eps)
        worst = max(worst, err / bound)
        if err > bound * (1 + 1e-12):
            failures.append(t)
    assert report(6, checked == 100 and not failures,
                  f"{checked} trials meet the precondition, failures {failures}, max error/bound {worst:.4f}")


def test_c07_oracle_equivalence(report):
    table = PrimeTable()
    mismatches, cells = [], 0
    for N in range(4, 201):
        fa = feasible_alphas(N, table)
        for D in (1.5, 2.0, 3.0):
            for a in (1, 2):
                if a not in fa:
                    continue
                K = math.ceil(D * a - 1e-9)
                for v in VARIANTS:
                    sol = solve_alpha(DesignProblem(N, D, v), a, table=table)
                    m, _ = enumerate_designs(N, K, a, v)
                    cells += 1
                    if sol.status != "optimal" or sol.m != m:
                        mismatches.append((N, D, a, v, sol.m, m))
    pinned = {v: solve_alpha(DesignProblem(30, 2.0, v), 1) for v in ("relprime", "primes")}
    pinned_ok = (pinned["relprime"].m, pinned["relprime"].s) == (11, [5, 6]) and (
        pinned["primes"].m, pinned["primes"].s) == (12, [5, 7])
    ok = not mismatches and pinned_ok
    assert report(7, ok, f"{cells} cells, mismatches {mismatches[:5]}, "
                         f"pinned N=30: relprime {pinned['relprime'].s}, primes {pinned['primes'].s}")


@pytest.mark.parametrize("N", [2**10, 2**14])
def test_c08_variant_ordering(report, N):
    rows, ok = [], True
    for k in (2, 3, 4):
        sols = [optimize(DesignProblem.from_k_eps(N, k, DEFAULT_EPSILON, v)) for v in VARIANTS]
        ms = [s.m for s in sols]
        fs = [s.fourier_samples for s in sols]
        secs = [s.wall_ms / 1000 for s in sols]
        cell_ok = (all(s.status == "optimal" for s in sols) and ms[0] <= ms[1] <= ms[2]
                   and fs[0] <= fs[1] <= fs[2] and max(secs) < 600)
        ok &= cell_ok
        rows.append(f"k={k} m={ms} samples={fs}")
    assert report(8, ok, f"N={N}: " + "; ".join(rows))


def criterion9_instances():
    for N in range(4, 201):
        for D in (1.5, 2.0, 3.0):
            for v in VARIANTS:
                yield N, D, v


def test_c09_bounds_consistency(report):
    table = PrimeTable()
    counts = {"sum_bound": 0, "primorial_bound": 0, "position_bounds": 0, "prime_gap_B": 0, "warm_start": 0}
    examples = {}
    solutions = 0
    for N, D, v in criterion9_instances():
        for a in feasible_alphas(N, table):
            if a > 2:
                continue
            sol = solve_alpha(DesignProblem(N, D, v), a, table=table)
            if sol.status != "optimal":
                continue
            solutions += 1
            K, s, m = sol.K, sol.s, sol.m
            checks = {
                "sum_bound": m >= lower_bound_m(N, K, a) - 1e-9,
                "primorial_bound": all(m >= lower_bound_m(N, K, a, ("primorial", q), table) - 1e-9 for q in (1, 2, 3, 4)),
                "position_bounds": s[0] ** a < N and s[a] ** (a + 1) > N,
                "prime_gap_B": sol.bounds.get("B") is None or s[-1] < sol.bounds["B"],
                "warm_start": all(check_constraints(warm_start(N, K, a, table), N, a).values()),
            }
            for name, good in checks.items():
                if not good:
                    counts[name] += 1
                    examples.setdefault(name, (N, D, a, v, s, m))
    ok = not any(counts.values())
    assert report(9, ok, f"{solutions} solutions, violations {counts}, first examples {examples}")


def test_c10_ilp_export(report):
    problem = DesignProblem(30, 2.0, "relprime")
    exp = export_ilp(problem, 1)
    K, B = exp.manifest["K"], exp.manifest["B"]
    objective, rows, binaries = parse_lp(exp.text)
    res, names = solve_lp_with_milp(exp.text)
    milp_obj = round(res.fun) if res.success else None
    try:
        import highspy

        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        import tempfile, os

        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "p.lp")
            exp.write(path)
            h.readModel(path)
            h.run()
            highs_obj = round(h.getInfo().objective_function_value)
    except ImportError:
        highs_obj = "not installed"
    target = solve_alpha(problem, 1).m
    ok = (len(binaries) == K * B == exp.manifest["binaries"] and milp_obj == target == 11
          and highs_obj in (11, "not installed"))
    assert report(10, ok, f"{len(binaries)} binaries = K*B = {K}*{B}, {len(rows)} rows, "
                          f"milp objective {milp_obj}, highs objective {highs_obj}, solve_alpha {target}")


def test_c11_baseline_welch(report):
    N, eps = 2**10, DEFAULT_EPSILON
    mins = {}
    below = []
    for k in range(2, 7):
        res = run_baseline(N, k, eps, 100, base_seed=11)
        mins[k] = res.min_m_stop
        if k == 4:
            floor = welch_floor(N, 4, eps)
            below = [m for m in res.m_stops if m < floor]
    monotone = all(mins[k] <= mins[k + 1] for k in range(2, 6))
    ok = not below and monotone
    assert report(11, ok, f"Welch floor k=4 {welch_floor(N, 4, eps):.2f}, below {below}, min m_stop {mins}")


def test_c12_subsampling(report):
    primes = [p for p in primes_up_to(67).values if p >= 11]
    M = build_matrix(ModulusSet(tuple(primes), 64))
    sigma, k, eps = 2 / 3, 1, 1.0
    good = 0
    for t in range(200):
        sub = SubsampledMatrix(M, subsample_rows(M, sigma, 1200 + t))
        x = power_law_signal(make_rng(1400 + t), M.N)
        if sub.columns_retained() and sub.majority_accurate(x, k, eps):
            good += 1
    frac = good / 200
    assert report(12, frac >= sigma, f"{good}/200 trials satisfy both properties ({frac:.3f} vs sigma {sigma:.3f})")


def ladder_set(N, m_target):
    """alpha = 1 design of consecutive primes above sqrt(N) with sum near m_target."""
    r = math.isqrt(N)
    s = []
    for p in primes_up_to(4 * m_target + 4 * r).values:
        if p <= r:
            continue
        if s and sum(s) >= m_target:
            break
        s.append(int(p))
    return ModulusSet(tuple(s), N)


def test_c13_runtime_shape(report):
    ladder = [(2**10, 100), (2**11, 316), (2**12, 1000), (2**13, 3162), (2**14, 10000)]
    times, work = [], []
    for N, m in ladder:
        ms = ladder_set(N, m)
        M = build_matrix(ms)
        x = np.zeros(N, dtype=complex)
        x[N // 3] = 1 + 1j
        y = measure(M, x)
        best = np.inf
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PreconditionWarning)
            for _ in range(40):
                t0 = time.perf_counter()
                approximate(M, y, 1)
                best = min(best, time.perf_counter() - t0)
        times.append(best)
        work.append(ms.m * math.log2(N))
    t_ratio = [t / times[0] for t in times]
    w_ratio = [w / work[0] for w in work]
    step_t = [b / a for a, b in zip(times, times[1:])]
    step_w = [b / a for a, b in zip(work, work[1:])]
    # growth no faster than 2x proportional, from the base and per step
    ok = all(tr <= 2 * wr for tr, wr in zip(t_ratio, w_ratio)) and all(
        st <= 2 * sw for st, sw in zip(step_t, step_w))
    detail = ", ".join(f"(m={int(w / math.log2(N))}, N={N}): {t * 1e6:.0f}us x{tr:.1f} vs x{wr:.1f}"
                       for (N, _), t, w, tr, wr in zip(ladder, times, work, t_ratio, w_ratio))
    assert report(13, ok, detail)
