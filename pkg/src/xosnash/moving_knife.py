"""Discrete moving-knife allocation over a random half of the goods.

Two stages. Pruning first: each agent drops, lowest index first, any good
worth at least a 1/(16n) fraction of their current support value, until every
remaining good is individually small; the restricted valuation v'_j(S) =
v_j(S & G_j) then needs a single value query per evaluation. Sweep second:
goods enter a working bundle in ascending index order and the bundle is
handed to the lowest-index still-waiting agent for whom it reaches a 1/(16n)
fraction of their restricted pool value; leftovers join the last agent's
bundle so the output exactly partitions the input pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List

from .numerics import ge_thresh
from .valuations import Allocation, Bundle, Instance, XOSValuation, value


@dataclass(frozen=True)
class PrunedSupport:
    """An agent's pruned good set G and the restricted valuation v'."""

    valuation: XOSValuation
    goods: frozenset

    def restricted_value(self, S: Iterable[int]) -> float:
        """v'(S) = v(S & G), one underlying value query."""
        return value(self.valuation, frozenset(S) & self.goods)


def prune_small(v: XOSValuation, R: Iterable[int], n: int) -> frozenset:
    """Iteratively remove big goods until all of G is individually small.

    Starting from G = R, repeatedly removes the lowest-index good g with
    v({g}) >= (1/16n) * v(G); recomputes v(G) after every removal. The
    result may be empty.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    G: List[int] = sorted(set(R))
    singles = v.weight_matrix.max(axis=0)
    while G:
        threshold = value(v, G) / (16.0 * n)
        for idx, g in enumerate(G):
            if ge_thresh(float(singles[g]), threshold):
                del G[idx]
                break
        else:
            break
    return frozenset(G)


def pruned_supports(inst: Instance, R: Iterable[int]) -> List[PrunedSupport]:
    """Per-agent pruned supports over the pool R."""
    pool = frozenset(R)
    return [
        PrunedSupport(v, prune_small(v, pool, inst.n)) for v in inst.valuations
    ]


def discrete_moving_knife(inst: Instance, R: Iterable[int]) -> Allocation:
    """Sweep the pool into threshold bundles; partition covers R exactly.

    Goods of R are added in ascending index to a working bundle P. As soon
    as some unassigned agent a (lowest index first) has v'_a(P) at least
    (1/16n) * v'_a(R), they take P. Agents with v'_a(R) = 0 qualify at the
    first check. Once every agent holds a bundle, or goods run out, all
    remaining goods join the last agent's bundle.
    """
    n = inst.n
    pool = sorted(set(R))
    for g in pool:
        if not 0 <= g < inst.m:
            raise IndexError(f"good {g} out of range")
    supports = pruned_supports(inst, pool)
    targets = [s.restricted_value(pool) / (16.0 * n) for s in supports]

    bundles: List[frozenset] = [frozenset()] * n
    waiting = list(range(n))
    P: List[int] = []
    swept = 0
    for swept, g in enumerate(pool, start=1):
        if not waiting:
            swept -= 1
            break
        P.append(g)
        for a in waiting:
            if ge_thresh(supports[a].restricted_value(P), targets[a]):
                bundles[a] = frozenset(P)
                waiting.remove(a)
                P = []
                break
    leftovers = frozenset(P) | frozenset(pool[swept:])
    if leftovers:
        bundles[n - 1] = bundles[n - 1] | leftovers
    return Allocation(tuple(bundles))
