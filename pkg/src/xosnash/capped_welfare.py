"""Price-guided local search maximizing capped welfare on a good pool.

State is a partial allocation Y_1..Y_n inside the pool (Y_0 = unallocated).
Each turn prices every held good at twice its capped marginal weight
(p_g = 2 * beta_j * f(g) for the family member f supporting Y_j; unallocated
goods are free, goods outside the pool are infinitely expensive). Every
agent then gets a candidate bundle: their demand set under those prices with
individually-large goods filtered out, trimmed to the shortest index-prefix
whose capped value reaches (92/225)/sqrt(n). If handing some agent their
candidate — and removing those goods from everyone else — raises total
capped welfare by at least 1/(225 sqrt(n)), the lowest-index such agent is
served and the loop repeats; otherwise it stops. Progress is bounded: each
turn adds a fixed welfare increment, so at most 225n turns occur (a hard cap
of 225n + n guards against float drift).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .numerics import ge_thresh, le_thresh
from .valuations import (
    Allocation,
    Bundle,
    CappedView,
    Instance,
    PriceVector,
    demand_query,
    value,
    xos_query,
)

#: Per-sqrt(n) capped-value target for candidate prefixes.
PREFIX_TARGET = 92.0 / 225.0
#: Per-sqrt(n) minimum welfare gain demanded of a reassignment.
IMPROVE_SLACK = 1.0 / 225.0
#: Per-sqrt(n) cap on the single-good capped value admitted into candidates.
SINGLE_FILTER = 0.5


@dataclass
class WelfareState:
    """Disjoint bundles inside a pool, plus the unallocated remainder."""

    pool: frozenset
    bundles: List[frozenset]
    iteration: int = 0

    @property
    def unallocated(self) -> frozenset:
        out = self.pool
        for b in self.bundles:
            out = out - b
        return out

    def check(self) -> None:
        taken: set = set()
        for b in self.bundles:
            if b & taken:
                raise ValueError("bundles overlap")
            if not b <= self.pool:
                raise ValueError("bundle outside pool")
            taken |= b


@dataclass(frozen=True)
class CandidateSet:
    """An agent's demand set (ascending index) and its qualifying prefix."""

    demand: Tuple[int, ...]
    prefix: Tuple[int, ...]


@dataclass(frozen=True)
class WelfareWitness:
    """A reference allocation O plus an agent subset Abar, for guarantees.

    The local search's lower bound is stated against witnesses satisfying
    P1 (the capped value of O across Abar is large: >= (26/27) sqrt(n)) and
    P2 (no single good of O_i is individually large for i: capped value
    <= (1/2)/sqrt(n)). Validation here; used by tests and generators only.
    """

    O: Tuple[Bundle, ...]
    Abar: frozenset

    def abar_value(self, views: Sequence[CappedView]) -> float:
        return sum(views[i](self.O[i]) for i in sorted(self.Abar))

    def p1_holds(self, views: Sequence[CappedView]) -> bool:
        n = views[0].n if views else 1
        return ge_thresh(self.abar_value(views), (26.0 / 27.0) * math.sqrt(n))

    def p2_holds(self, views: Sequence[CappedView]) -> bool:
        n = views[0].n if views else 1
        return all(
            le_thresh(views[i]({g}), SINGLE_FILTER / math.sqrt(n))
            for i in sorted(self.Abar)
            for g in sorted(self.O[i])
        )

    def guarantee(self, views: Sequence[CappedView]) -> float:
        """The welfare floor (2/25) * sum over Abar of capped O-values."""
        return (2.0 / 25.0) * self.abar_value(views)


@dataclass(frozen=True)
class IterationRecord:
    """One loop turn: welfare after the turn, who was served, |prefix|."""

    welfare: float
    agent: Optional[int]
    prefix_size: int


def compute_prices(state: WelfareState, views: Sequence[CappedView]) -> PriceVector:
    """Held goods cost twice their supporting additive weight (scaled by beta).

    Unallocated pool goods are free; goods outside the pool are infinitely
    expensive so they can never be demanded.
    """
    m = views[0].base.arity if views else 0
    prices = np.full(m, np.inf)
    prices[sorted(state.unallocated)] = 0.0
    for j, bundle in enumerate(state.bundles):
        if not bundle:
            continue
        f = xos_query(views[j].base, bundle)
        for g in bundle:
            prices[g] = 2.0 * views[j].beta * f.weights[g]
    return PriceVector(prices)


def candidate_set(j: int, p: PriceVector, view: CappedView) -> CandidateSet:
    """Agent j's filtered demand set and its shortest qualifying prefix.

    Goods whose single capped value exceeds (1/2)/sqrt(n) are priced out of
    reach before the demand query; the query itself runs on the underlying
    valuation with prices divided by beta. The prefix is the shortest
    ascending-index prefix of the demand set whose capped value reaches
    (92/225)/sqrt(n); if none does, the whole demand set is the candidate.
    """
    base = view.base
    rootn = math.sqrt(view.n)
    q = p.prices.copy()
    for g in range(base.arity):
        if not le_thresh(view({g}), SINGLE_FILTER / rootn):
            q[g] = np.inf
    D = sorted(demand_query(base, q / view.beta))
    target = PREFIX_TARGET / rootn
    prefix: Tuple[int, ...] = tuple(D)
    for k in range(1, len(D) + 1):
        if ge_thresh(view(D[:k]), target):
            prefix = tuple(D[:k])
            break
    return CandidateSet(demand=tuple(D), prefix=prefix)


def capped_social_welfare(
    inst: Instance,
    betas: Sequence[float],
    pool: Optional[Iterable[int]] = None,
    trace: Optional[List[IterationRecord]] = None,
    observer: Optional[Callable[[WelfareState, PriceVector], None]] = None,
) -> Allocation:
    """Local search for bundles maximizing total capped welfare on the pool.

    Starts from everything unallocated. Each turn serves the lowest-index
    agent whose candidate improves total capped welfare by at least
    1/(225 sqrt(n)) after clawing the candidate's goods back from everyone
    else; stops when no agent qualifies. ``pool`` defaults to all goods.
    ``trace`` (if given) receives one IterationRecord per turn; ``observer``
    (if given) is called with the live state and prices at the start of each
    turn — read-only access for invariant checks.
    """
    n, m = inst.n, inst.m
    if len(betas) != n:
        raise ValueError(f"{len(betas)} betas for {n} agents")
    bvals = [float(b) for b in betas]
    if any(not math.isfinite(b) or b <= 0.0 for b in bvals):
        raise ValueError("betas must be positive and finite")
    pool_set = frozenset(range(m)) if pool is None else frozenset(pool)
    for g in pool_set:
        if not 0 <= g < m:
            raise IndexError(f"good {g} out of range")

    views = [CappedView(v, bvals[j], n) for j, v in enumerate(inst.valuations)]
    state = WelfareState(pool=pool_set, bundles=[frozenset()] * n)
    rootn = math.sqrt(n)
    max_turns = 225 * n + n

    while True:
        if state.iteration > max_turns:
            raise RuntimeError(
                f"no convergence after {max_turns} turns (float drift?)"
            )
        prices = compute_prices(state, views)
        if observer is not None:
            observer(state, prices)
        welfare = [views[j](state.bundles[j]) for j in range(n)]
        total = sum(welfare)
        required = total + IMPROVE_SLACK / rootn

        served: Optional[int] = None
        served_prefix: Tuple[int, ...] = ()
        for a in range(n):
            cand = candidate_set(a, prices, views[a])
            taken = frozenset(cand.prefix)
            gain = views[a](taken) + sum(
                views[j](state.bundles[j] - taken) for j in range(n) if j != a
            )
            if ge_thresh(gain, required):
                served = a
                served_prefix = cand.prefix
                break
        if served is None:
            if trace is not None:
                trace.append(IterationRecord(total, None, 0))
            break
        taken = frozenset(served_prefix)
        state.bundles = [
            taken if j == served else state.bundles[j] - taken for j in range(n)
        ]
        state.iteration += 1
        if trace is not None:
            new_total = sum(views[j](state.bundles[j]) for j in range(n))
            trace.append(
                IterationRecord(new_total, served, len(served_prefix))
            )
    return Allocation(tuple(state.bundles))
