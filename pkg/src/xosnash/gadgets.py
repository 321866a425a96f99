"""Equicovering gadgets: construction, verification, and the reduction.

An (n, r, eps)-equicovering of [m] is a family of r ordered n-equipartitions
such that picking one part per position, all from distinct partitions, never
covers more than m*(1 - (1-1/n)^n + eps) goods. Random equipartitions give
one with high probability; here existence is replaced by construct-and-
verify (with seed retries), since the object itself is what downstream code
consumes.

The reduction turns a multi-disjointness input (n players holding subsets
B_i of [t], promised either a common element or pairwise disjointness) plus
an equicovering with r = t into a goods instance: player i's valuation is
the best coverage of their bundle by one of the parts {P^s_i : s in B_i},
i.e. an XOS family of 0/1 indicator functions. A common element s lets the
partition s itself give everyone m/n; pairwise disjoint bundles force every
supporting tuple to have distinct indices, capping welfare at the
equicovering bound and the optimal NSW at (m/n)*(1 - (1-1/n)^n + eps).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exact import EnumerationBudgetError, brute_force_nsw
from .numerics import le_thresh, new_rng
from .valuations import Instance

Equipartition = Tuple[frozenset, ...]


def coverage_bound(m: int, n: int, eps: float) -> float:
    """m * (1 - (1-1/n)^n + eps), the distinct-index union ceiling."""
    return m * (1.0 - (1.0 - 1.0 / n) ** n + eps)


@dataclass(frozen=True)
class Equicovering:
    """r ordered n-equipartitions of [m] (claimed; verify separately)."""

    m: int
    n: int
    partitions: Tuple[Equipartition, ...]

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if self.m % self.n:
            raise ValueError(f"n={self.n} must divide m={self.m}")
        size = self.m // self.n
        universe = frozenset(range(self.m))
        for s, part in enumerate(self.partitions):
            if len(part) != self.n:
                raise ValueError(f"partition {s} has {len(part)} parts")
            if any(len(p) != size for p in part):
                raise ValueError(f"partition {s} has unequal parts")
            if frozenset().union(*part) != universe:
                raise ValueError(f"partition {s} does not cover [m]")

    @property
    def r(self) -> int:
        return len(self.partitions)


@dataclass(frozen=True)
class MultiDisjointnessInstance:
    """n players, each holding a subset of [t]."""

    t: int
    subsets: Tuple[frozenset, ...]

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError("t must be >= 0")
        for i, B in enumerate(self.subsets):
            if any(not 0 <= s < self.t for s in B):
                raise ValueError(f"subset {i} not contained in [t]")

    @property
    def n(self) -> int:
        return len(self.subsets)

    def totally_intersecting(self) -> bool:
        if not self.subsets:
            return False
        common = self.subsets[0]
        for B in self.subsets[1:]:
            common = common & B
        return bool(common)

    def totally_disjoint(self) -> bool:
        seen: set = set()
        for B in self.subsets:
            if B & seen:
                return False
            seen |= B
        return True


def random_equipartition(m: int, n: int, seed: int) -> Equipartition:
    """Uniformly random ordered partition of [m] into n parts of size m/n."""
    return _equipartition_from(new_rng(seed), m, n)


def _equipartition_from(rng, m: int, n: int) -> Equipartition:
    if n < 1:
        raise ValueError("n must be >= 1")
    if m % n:
        raise ValueError(f"n={n} must divide m={m}")
    perm = rng.permutation(m)
    size = m // n
    return tuple(
        frozenset(int(g) for g in perm[i * size : (i + 1) * size])
        for i in range(n)
    )


def build_equicovering(m: int, n: int, r: int, seed: int) -> Equicovering:
    """r independent uniformly random equipartitions from one seeded stream."""
    if r < 0:
        raise ValueError("r must be >= 0")
    rng = new_rng(seed)
    return Equicovering(
        m=m, n=n, partitions=tuple(_equipartition_from(rng, m, n) for _ in range(r))
    )


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of an equicovering check, with the worst tuple seen."""

    ok: bool
    bound: float
    checked: int
    witness_indices: Optional[Tuple[int, ...]]
    witness_union_size: int

    def __bool__(self) -> bool:
        return self.ok


def verify_equicovering(
    E: Equicovering,
    eps: float,
    mode: str = "exhaustive",
    k: int = 100_000,
    seed: int = 0,
    budget: int = 1_000_000,
) -> VerificationResult:
    """Check the distinct-index union bound over tuples of partitions.

    mode="exhaustive" checks every ordered tuple of n distinct partition
    indices (requires r!/(r-n)! <= budget); mode="sampled" checks k random
    such tuples. Returns the result together with the largest union found.
    """
    n, r = E.n, E.r
    bound = coverage_bound(E.m, n, eps)
    if mode == "exhaustive":
        count = math.perm(r, n)
        if count > budget:
            raise EnumerationBudgetError(
                f"{count} tuples exceed exhaustive budget {budget}"
            )
        tuples: Iterable[Tuple[int, ...]] = itertools.permutations(range(r), n)
    elif mode == "sampled":
        if r < n:
            tuples = iter(())
        else:
            rng = new_rng(seed)
            tuples = (
                tuple(int(s) for s in rng.permutation(r)[:n]) for _ in range(k)
            )
    else:
        raise ValueError(f"unknown mode {mode!r}")

    ok = True
    checked = 0
    worst: Optional[Tuple[int, ...]] = None
    worst_size = -1
    for tup in tuples:
        union: set = set()
        for i, s in enumerate(tup):
            union |= E.partitions[s][i]
        checked += 1
        if len(union) > worst_size:
            worst_size = len(union)
            worst = tup
        if not le_thresh(len(union), bound):
            ok = False
    return VerificationResult(
        ok=ok,
        bound=bound,
        checked=checked,
        witness_indices=worst,
        witness_union_size=max(worst_size, 0),
    )


def build_verified_equicovering(
    m: int,
    n: int,
    r: int,
    eps: float,
    seed: int,
    attempts: int = 50,
    mode: str = "exhaustive",
    k: int = 100_000,
) -> Tuple[Equicovering, int, VerificationResult]:
    """Construct-and-verify with retries: new derived seed on each failure.

    Returns (equicovering, seed that worked, verification result); raises
    RuntimeError when no attempt verifies.
    """
    last: Optional[VerificationResult] = None
    for attempt in range(attempts):
        s = seed + attempt
        E = build_equicovering(m, n, r, s)
        res = verify_equicovering(E, eps, mode=mode, k=k, seed=s)
        if res.ok:
            return E, s, res
        last = res
    raise RuntimeError(
        f"no verified equicovering in {attempts} attempts "
        f"(last worst union {last.witness_union_size} > bound {last.bound})"
    )


def reduce_multidisjointness(
    md: MultiDisjointnessInstance, E: Equicovering
) -> Instance:
    """Indicator-family goods instance realizing the reduction.

    Agent i's XOS family is {indicator of P^s_i : s in B_i} (an all-zero
    function when B_i is empty), so v_i(S) is the best overlap of S with one
    of i's eligible parts.
    """
    if md.t != E.r:
        raise ValueError(f"md.t={md.t} must equal E.r={E.r}")
    if md.n != E.n:
        raise ValueError(f"md has {md.n} players, E has {E.n} parts")
    matrices = []
    for i, B in enumerate(md.subsets):
        rows = []
        for s in sorted(B):
            row = np.zeros(E.m)
            row[sorted(E.partitions[s][i])] = 1.0
            rows.append(row)
        if not rows:
            rows.append(np.zeros(E.m))
        matrices.append(np.vstack(rows))
    return Instance.from_weight_matrices(matrices)


@dataclass(frozen=True)
class GapRow:
    n: int
    m: int
    r: int
    eps: float
    case: str  # "intersecting" | "disjoint"
    nsw: float
    gap: float  # nsw / (m/n)


@dataclass(frozen=True)
class GapReport:
    rows: Tuple[GapRow, ...]
    bound_ratio: float  # 1 - (1-1/n)^n + eps

    @property
    def case1_nsw(self) -> float:
        vals = [row.nsw for row in self.rows if row.case == "intersecting"]
        return max(vals) if vals else float("nan")

    @property
    def worst_case2_nsw(self) -> float:
        vals = [row.nsw for row in self.rows if row.case == "disjoint"]
        return max(vals) if vals else float("nan")


def _sample_intersecting(rng, r: int, n: int) -> MultiDisjointnessInstance:
    common = int(rng.integers(r))
    subsets = []
    for _ in range(n):
        extra = {int(s) for s in range(r) if rng.integers(0, 2) == 1}
        subsets.append(frozenset({common} | extra))
    return MultiDisjointnessInstance(t=r, subsets=tuple(subsets))


def _sample_disjoint(rng, r: int, n: int) -> MultiDisjointnessInstance:
    if r < n:
        raise ValueError(f"need r >= n for nonempty disjoint subsets ({r} < {n})")
    perm = [int(s) for s in rng.permutation(r)]
    # one element each, then deal the rest to random players or nobody
    subsets: List[set] = [{perm[i]} for i in range(n)]
    for s in perm[n:]:
        owner = int(rng.integers(n + 1))
        if owner < n:
            subsets[owner].add(s)
    return MultiDisjointnessInstance(
        t=r, subsets=tuple(frozenset(B) for B in subsets)
    )


def gap_report(
    E: Equicovering, eps: float, trials: int, seed: int
) -> GapReport:
    """Empirical Case-1 / Case-2 gap table over sampled promise inputs.

    For each trial, one totally-intersecting and one totally-disjoint
    multi-disjointness input are sampled, reduced, and solved exactly; rows
    carry the optimal NSW and its ratio to the intersecting ideal m/n.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = new_rng(seed)
    ideal = E.m / E.n
    rows: List[GapRow] = []
    for _ in range(trials):
        for case, sampler in (
            ("intersecting", _sample_intersecting),
            ("disjoint", _sample_disjoint),
        ):
            md = sampler(rng, E.r, E.n)
            inst = reduce_multidisjointness(md, E)
            _, opt = brute_force_nsw(inst)
            rows.append(
                GapRow(
                    n=E.n,
                    m=E.m,
                    r=E.r,
                    eps=eps,
                    case=case,
                    nsw=opt,
                    gap=opt / ideal if ideal > 0 else float("nan"),
                )
            )
    bound_ratio = 1.0 - (1.0 - 1.0 / E.n) ** E.n + eps
    return GapReport(rows=tuple(rows), bound_ratio=bound_ratio)
