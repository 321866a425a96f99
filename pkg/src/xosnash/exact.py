"""Brute-force ground truth and diagnostics.

All routines here are deliberately independent of the solver-side
implementations they certify: the demand oracle is re-derived by exhaustive
subset enumeration, the optimal Nash welfare by complete-assignment search,
and the halving-concentration bound by Monte Carlo. Budgets are explicit and
exceeding one raises EnumerationBudgetError instead of silently blowing up.

Two exact regimes back ``brute_force_nsw``:

* base-n enumeration over complete assignments (good 0 is the most
  significant digit), when n^m fits the budget;
* an over-subsets dynamic program f_i[S] = max_{T <= S} f_{i-1}[S\\T]*v_i(T)
  (n*3^m work, numba-compiled) for larger n^m as long as m <= 17, with a
  good-by-good forcing pass that reconstructs the lexicographically smallest
  optimal assignment under the same float product association.

Both regimes evaluate bundle values through identical precomputed subset
tables whenever m <= 17, so their results coincide bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .numerics import EPS_NUM, ge_thresh, le_thresh, new_rng
from .valuations import (
    Allocation,
    Bundle,
    Instance,
    XOSValuation,
    as_price_array,
    value,
)


class EnumerationBudgetError(ValueError):
    """Raised when an exact computation would exceed its configured budget."""


DEFAULT_ASSIGNMENT_BUDGET = 10_000_000
_DP_MAX_GOODS = 17
_CHUNK = 1 << 16


# ---------------------------------------------------------------------------
# subset value tables
# ---------------------------------------------------------------------------

def subset_value_table(v: XOSValuation) -> np.ndarray:
    """values of all 2^m bundles, indexed by bitmask (bit g <-> good g)."""
    m = v.arity
    tables = []
    for row in v.weight_matrix:
        t = np.zeros(1)
        for g in range(m):
            t = np.concatenate([t, t + row[g]])
        tables.append(t)
    return np.max(tables, axis=0)


def _geometric_mean(values: Sequence[float]) -> float:
    vals = list(values)
    n = len(vals)
    prod = 1.0
    for x in vals:
        if x == 0.0:
            return 0.0
        prod *= x
    if math.isfinite(prod):
        return prod ** (1.0 / n)
    return math.exp(sum(math.log(x) for x in vals) / n)


# ---------------------------------------------------------------------------
# demand oracle, the exhaustive way
# ---------------------------------------------------------------------------

def brute_force_demand(v: XOSValuation, p) -> Bundle:
    """Exhaustive 2^m surplus maximization with demand_query's tie-break.

    Among all maximum-surplus subsets the winner minimizes, in order: the
    index of the inducing family member (first argmax over the family), the
    cardinality, and finally the subset bitmask. This reproduces the
    per-family greedy rule of the fast oracle while deriving the optimum by
    enumeration alone.
    """
    prices = as_price_array(p)
    m = v.arity
    if prices.shape[0] != m:
        raise ValueError(f"price vector length {prices.shape[0]} != arity {m}")
    if m > 20:
        raise EnumerationBudgetError(f"m={m} too large for exhaustive demand (max 20)")

    finite = np.isfinite(prices)
    W = v.weight_matrix
    best = None  # (surplus, inducing index, cardinality, mask)
    bits = np.arange(m)
    for start in range(0, 1 << m, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, 1 << m), dtype=np.int64)
        ind = ((masks[:, None] >> bits) & 1).astype(np.float64)
        per_f = ind @ W.T  # (chunk, family)
        vals = per_f.max(axis=1)
        inducing = per_f.argmax(axis=1)
        cost = ind[:, finite] @ prices[finite]
        surplus = vals - cost
        if not finite.all():
            surplus[ind[:, ~finite].any(axis=1)] = -np.inf
        card = ind.sum(axis=1)
        order = np.lexsort((masks, card, inducing, -surplus))
        top = order[0]
        cand = (surplus[top], int(inducing[top]), int(card[top]), int(masks[top]))
        if best is None or (-cand[0], cand[1], cand[2], cand[3]) < (
            -best[0],
            best[1],
            best[2],
            best[3],
        ):
            best = cand
    mask = best[3]
    return frozenset(g for g in range(m) if mask >> g & 1)


# ---------------------------------------------------------------------------
# optimal Nash social welfare
# ---------------------------------------------------------------------------

def _assignment_to_allocation(digits: Sequence[int], n: int) -> Allocation:
    bundles = [set() for _ in range(n)]
    for g, a in enumerate(digits):
        bundles[int(a)].add(g)
    return Allocation(tuple(frozenset(b) for b in bundles))


def _enumerate_products(inst: Instance, tables: Optional[list]) -> tuple:
    """Scan all n^m complete assignments; return (best digits, best product)."""
    n, m = inst.n, inst.m
    total = n**m
    pows_n = np.array([n ** (m - 1 - g) for g in range(m)], dtype=np.int64)
    pows_2 = np.array([1 << g for g in range(m)], dtype=np.int64)
    best_prod = -1.0
    best_idx = 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = (idx[:, None] // pows_n) % n
        prod = None
        for i in range(n):
            sel = digits == i
            if tables is not None:
                bmask = (sel * pows_2).sum(axis=1)
                vals = tables[i][bmask]
            else:
                per_f = sel.astype(np.float64) @ inst.valuations[i].weight_matrix.T
                vals = per_f.max(axis=1)
            prod = vals if prod is None else prod * vals
        local = int(np.argmax(prod))
        if prod[local] > best_prod:
            best_prod = float(prod[local])
            best_idx = int(idx[local])
    digits = [(best_idx // int(pows_n[g])) % n for g in range(m)]
    return digits, best_prod


_dp_chain = None


def _get_dp_chain():
    """Compile (once) the constrained partition-DP kernel."""
    global _dp_chain
    if _dp_chain is not None:
        return _dp_chain
    from numba import njit

    @njit(cache=True)
    def dp_chain(tables, forced, free):
        # tables: (n, 2^m); forced[i]: bitmask pre-assigned to agent i;
        # free: bitmask of goods still to distribute. Returns the best
        # product over ordered partitions of `free`, multiplied left to
        # right in agent order (association is part of the contract: the
        # reconstruction pass compares results for exact equality).
        n = tables.shape[0]
        size = tables.shape[1]
        f = np.empty(size)
        g = np.empty(size)
        S = free
        while True:
            f[S] = tables[0, S | forced[0]]
            if S == 0:
                break
            S = (S - 1) & free
        for i in range(1, n):
            S = free
            while True:
                best = -1.0
                T = S
                while True:
                    cand = f[S ^ T] * tables[i, T | forced[i]]
                    if cand > best:
                        best = cand
                    if T == 0:
                        break
                    T = (T - 1) & S
                g[S] = best
                if S == 0:
                    break
                S = (S - 1) & free
            f, g = g, f
        return f[free]

    _dp_chain = dp_chain
    return dp_chain


def _dp_optimum(inst: Instance, tables: list) -> tuple:
    """Exact optimum + lex-smallest assignment via the subset DP."""
    n, m = inst.n, inst.m
    dp = _get_dp_chain()
    tab = np.vstack(tables)
    forced = np.zeros(n, dtype=np.int64)
    full = np.int64((1 << m) - 1)
    opt = dp(tab, forced, full)
    digits = []
    free = full
    for g in range(m):
        bit = np.int64(1 << g)
        placed = False
        for a in range(n):
            forced[a] |= bit
            if dp(tab, forced, free & ~bit) == opt:
                digits.append(a)
                free &= ~bit
                placed = True
                break
            forced[a] &= ~bit
        if not placed:  # cannot happen: the optimum is achievable
            raise AssertionError("DP reconstruction lost the optimum")
    return digits, float(opt)


def brute_force_nsw(
    inst: Instance, budget: int = DEFAULT_ASSIGNMENT_BUDGET
) -> tuple[Allocation, float]:
    """Exact NSW optimum over all n^m complete assignments.

    Returns the lexicographically smallest optimal allocation (assignment
    vector compared good by good) and the optimal NSW value.
    """
    n, m = inst.n, inst.m
    tables = [subset_value_table(v) for v in inst.valuations] if m <= _DP_MAX_GOODS else None
    if n**m <= budget:
        digits, prod = _enumerate_products(inst, tables)
    elif tables is not None:
        digits, prod = _dp_optimum(inst, tables)
    else:
        raise EnumerationBudgetError(
            f"n^m = {n}^{m} exceeds budget {budget} and m > {_DP_MAX_GOODS}"
        )
    alloc = _assignment_to_allocation(digits, n)
    return alloc, _geometric_mean(alloc.values(inst))


def brute_force_capped_sw(
    inst: Instance, betas: Sequence[float], budget: int = DEFAULT_ASSIGNMENT_BUDGET
) -> tuple[Allocation, float]:
    """Exact max of sum_j min(1/sqrt(n), beta_j * v_j(A_j)), goods may idle.

    Enumerates (n+1)^m assignments where bin n means "unassigned";
    lexicographically smallest maximizer.
    """
    n, m = inst.n, inst.m
    betas = [float(b) for b in betas]
    if len(betas) != n:
        raise ValueError("betas length mismatch")
    if any(b <= 0 for b in betas):
        raise ValueError("betas must be positive")
    if (n + 1) ** m > budget:
        raise EnumerationBudgetError(f"(n+1)^m = {n+1}^{m} exceeds budget {budget}")
    cap = 1.0 / math.sqrt(n)
    pows = np.array([(n + 1) ** (m - 1 - g) for g in range(m)], dtype=np.int64)
    best_w = -1.0
    best_idx = 0
    for start in range(0, (n + 1) ** m, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, (n + 1) ** m), dtype=np.int64)
        digits = (idx[:, None] // pows) % (n + 1)
        welfare = np.zeros(len(idx))
        for i in range(n):
            sel = (digits == i).astype(np.float64)
            per_f = sel @ inst.valuations[i].weight_matrix.T
            welfare += np.minimum(cap, betas[i] * per_f.max(axis=1))
        local = int(np.argmax(welfare))
        if welfare[local] > best_w:
            best_w = float(welfare[local])
            best_idx = int(idx[local])
    digits = [(best_idx // int(pows[g])) % (n + 1) for g in range(m)]
    bundles = [set() for _ in range(n)]
    for g, a in enumerate(digits):
        if a < n:
            bundles[a].add(g)
    return Allocation(tuple(frozenset(b) for b in bundles)), best_w


# ---------------------------------------------------------------------------
# agent classification diagnostics
# ---------------------------------------------------------------------------

#: Constant in the B-set threshold.
B_CONSTANT = 1.0 / 2.2e4


@dataclass(frozen=True)
class AgentClassification:
    """Diagnostic labels over agents, relative to an optimal allocation N.

    tiers[i] is "T1", "T2" or "T3"; P refines T2; U refines Pbar|T3 and B
    refines Ubar. gstar[i] is agent i's most valuable good inside N_i
    (None when N_i is empty).
    """

    gstar: tuple
    tiers: tuple
    T1: frozenset
    T2: frozenset
    T3: frozenset
    P: frozenset
    Pbar: frozenset
    U: frozenset
    Ubar: frozenset
    B: frozenset
    warnings: tuple


def gstar_from_allocation(inst: Instance, N: Allocation) -> tuple:
    """Per agent: the max-value good of N_i, lowest index on ties (None if empty)."""
    out = []
    for i in range(inst.n):
        goods = sorted(N[i])
        if not goods:
            out.append(None)
            continue
        vals = [value(inst.valuations[i], {g}) for g in goods]
        out.append(goods[int(np.argmax(vals))])
    return tuple(out)


def classify_agents(inst: Instance, N: Allocation, trace) -> AgentClassification:
    """Label agents by how their optimal bundle interacts with a solve trace.

    Thresholds (sqrt-n and log-n scale) follow the solver's analysis; the
    log in the T2/T3 boundary is natural log clamped below by 1. Purely
    diagnostic; a warning is attached for n < 16 where the thresholds are
    not meaningful.
    """
    n = inst.n
    if len(N) != n:
        raise ValueError("allocation/instance agent count mismatch")
    warnings = []
    if n < 16:
        warnings.append(f"n={n} < 16: classification thresholds are asymptotic")
    sqrt_n = math.sqrt(n)
    log_n = max(math.log(n), 1.0)
    gstar = gstar_from_allocation(inst, N)
    pi: dict = dict(trace.pi)
    matched_pool = frozenset(trace.M) | frozenset(pi.values())

    tiers = []
    P, U, B = set(), set(), set()
    for i in range(n):
        v_i = inst.valuations[i]
        vN = value(v_i, N[i])
        vg = value(v_i, {gstar[i]}) if gstar[i] is not None else 0.0
        if ge_thresh(vg, vN / (256.0 * sqrt_n)):
            tiers.append("T1")
        elif ge_thresh(vg, vN / (16.0 * n * log_n)):
            tiers.append("T2")
        else:
            tiers.append("T3")
        if tiers[i] == "T2" and ge_thresh(value(v_i, N[i] & matched_pool), vN / 16.0):
            P.add(i)
    for i in range(n):
        if tiers[i] == "T1" or i in P:
            continue
        v_i = inst.valuations[i]
        vN = value(v_i, N[i])
        own = set(trace.X[i])
        if i in pi:
            own.add(pi[i])
        if ge_thresh(value(v_i, own), vN / (4.0 * sqrt_n)):
            U.add(i)
        elif ge_thresh(value(v_i, trace.Y[i]), B_CONSTANT * vN / sqrt_n):
            B.add(i)

    T1 = frozenset(i for i in range(n) if tiers[i] == "T1")
    T2 = frozenset(i for i in range(n) if tiers[i] == "T2")
    T3 = frozenset(i for i in range(n) if tiers[i] == "T3")
    Pbar = T2 - P
    candidates = Pbar | T3
    Ubar = candidates - U
    return AgentClassification(
        gstar=gstar,
        tiers=tuple(tiers),
        T1=T1,
        T2=T2,
        T3=T3,
        P=frozenset(P),
        Pbar=Pbar,
        U=frozenset(U),
        Ubar=Ubar,
        B=frozenset(B),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# concentration Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcentrationResult:
    frequency: float
    trials: int
    failures: int
    degenerate: bool


def concentration_experiment(
    v: XOSValuation, Nbar: Iterable[int], n: int, trials: int, seed: int
) -> ConcentrationResult:
    """Monte Carlo estimate of Pr[v(Nbar & R) <= v(Nbar)/3] under fair coin R.

    Requires the hypothesis max_{g in Nbar} v({g}) <= v(Nbar)/sqrt(n); the
    empty bundle is allowed but flagged degenerate (0 <= 0 in every trial).
    """
    goods = sorted(set(Nbar))
    if n < 1:
        raise ValueError("n must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not goods:
        return ConcentrationResult(1.0, trials, trials, True)
    total = value(v, goods)
    worst = max(value(v, {g}) for g in goods)
    if not le_thresh(worst, total / math.sqrt(n)):
        raise ValueError(
            f"hypothesis violated: max single value {worst} > v(Nbar)/sqrt(n) = "
            f"{total / math.sqrt(n)}"
        )
    rng = new_rng(seed)
    W = v.weight_matrix[:, goods]
    threshold = total / 3.0
    failures = 0
    batch = max(1, min(trials, (1 << 24) // max(1, len(goods))))
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        bits = rng.integers(0, 2, size=(len(goods), b)).astype(np.float64)
        vals = (W @ bits).max(axis=0)
        failures += int((vals <= threshold).sum())
        done += b
    return ConcentrationResult(failures / trials, trials, failures, False)
