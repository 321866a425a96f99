"""Two-level bipartite matchings: cardinality first, then product.

The core routine matches agents to goods so that, first, the number of
positively valued matched pairs is maximum and, second, the product of the
matched values is maximum among such matchings. It is realized as a single
assignment problem in log-value space: every positive-value edge gets weight
C + log(value) where the additive offset C = 2L + 1 (L bounding the total
absolute log mass) makes one extra matched pair outweigh any possible swing
in the product term. Zero-value edges never enter the graph; shared
zero-weight dummy columns let any agent stay unmatched.

Determinism: among optimal matchings, the lexicographically smallest is
returned (agents in index order; for each agent, lower good index first,
"unmatched" last), pinned down by per-agent forcing re-solves. Two product
logs within EPS_NUM relative tolerance are treated as tied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .numerics import EPS_NUM, ge_thresh
from .valuations import Bundle, Instance, value

_FORBID = -1e18


@dataclass(frozen=True)
class MatchingResult:
    """A partial injective matching of agents to goods.

    ``assignment`` maps agent -> good for matched agents only; every matched
    pair has strictly positive value. ``product_log`` is the sum of
    log-values over matched pairs (0.0 when nothing is matched) and
    ``positive_count`` the number of matched pairs.
    """

    assignment: Dict[int, int]
    product_log: float
    positive_count: int

    def matched_goods(self) -> frozenset:
        return frozenset(self.assignment.values())

    def get(self, agent: int) -> Optional[int]:
        return self.assignment.get(agent)


def _solve_and_score(
    weights: np.ndarray, values: np.ndarray
) -> Tuple[int, float, np.ndarray]:
    """Run the assignment solver; score = (positive count, product log).

    Pairs on forbidden edges (present only when a row has been restricted
    and no feasible column is left) do not count: scoring reflects what the
    restricted problem can really achieve.
    """
    n, k = values.shape
    row, col = linear_sum_assignment(weights, maximize=True)
    chosen = np.full(n, -1, dtype=np.int64)
    chosen[row] = col
    count = 0
    plog = 0.0
    for i in range(n):
        c = int(chosen[i])
        if 0 <= c < k and values[i, c] > 0.0 and weights[i, c] > _FORBID / 2.0:
            count += 1
            plog += math.log(values[i, c])
    return count, plog, chosen


def max_product_matching(values) -> MatchingResult:
    """Cardinality-first, product-second optimal matching of agents to goods.

    ``values`` is an n x k nonnegative finite matrix; row i gives agent i's
    value for each good. Agents may stay unmatched; only positive-value
    pairs are ever matched. Returns the lexicographically smallest optimum.
    """
    V = np.asarray(values, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("values must be a 2-D matrix")
    if V.size and (not np.isfinite(V).all() or (V < 0).any()):
        raise ValueError("values must be finite and nonnegative")
    n, k = V.shape
    if n == 0 or k == 0:
        return MatchingResult({}, 0.0, 0)

    pos = V > 0.0
    logs = np.zeros_like(V)
    logs[pos] = np.log(V[pos])
    L = float(np.abs(logs).sum()) + 1.0
    C = 2.0 * L + 1.0
    W = np.full((n, k + n), _FORBID)
    W[:, k:] = 0.0  # dummy columns: stay unmatched at zero weight
    W[:, :k][pos] = C + logs[pos]

    best_count, best_plog, _ = _solve_and_score(W, V)
    tol = EPS_NUM * max(1.0, abs(best_plog))

    locks: List[Optional[int]] = []
    for i in range(n):
        candidates: List[Optional[int]] = [g for g in range(k) if pos[i, g]]
        candidates.append(None)
        for g in candidates:
            W[i, :] = _FORBID
            if g is None:
                W[i, k:] = 0.0
            else:
                W[i, g] = C + logs[i, g]
            count, plog, chosen = _solve_and_score(W, V)
            # Locks must be realized, not merely matched in score: when all
            # locks are jointly feasible the solver honors them (violating
            # one forfeits a huge offset), so a misplaced lock here means
            # this candidate is incompatible with the choices made so far.
            realized = all(
                (want is None and chosen[j] >= k)
                or (want is not None and chosen[j] == want)
                for j, want in enumerate(locks + [g])
            )
            if realized and count == best_count and plog >= best_plog - tol:
                locks.append(g)
                break
        else:  # unreachable: "unmatched" always restores feasibility
            raise AssertionError("lexicographic fixing lost the optimum")

    assignment: Dict[int, int] = {
        i: g for i, g in enumerate(locks) if g is not None
    }
    if len(set(assignment.values())) != len(assignment):
        raise AssertionError("matching is not injective")
    plog = sum(math.log(V[i, g]) for i, g in assignment.items())
    return MatchingResult(assignment, plog, len(assignment))


def repeated_matchings(
    inst: Instance, goods: Iterable[int], rounds: int
) -> Tuple[frozenset, List[MatchingResult]]:
    """Run `rounds` successive matchings over singleton values, pooling winners.

    Each round matches agents to the remaining goods by v_i({g}) and moves
    the matched goods into M; a round is skipped only once the pool is
    empty. Returns (M, per-round results with goods in instance indexing).
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    pool = sorted(set(goods))
    for g in pool:
        if not 0 <= g < inst.m:
            raise IndexError(f"good {g} out of range")
    singles = np.vstack([v.weight_matrix.max(axis=0) for v in inst.valuations])
    M: set = set()
    results: List[MatchingResult] = []
    for _ in range(rounds):
        if not pool:
            break
        res = max_product_matching(singles[:, pool])
        translated = {i: pool[c] for i, c in res.assignment.items()}
        results.append(
            MatchingResult(translated, res.product_log, res.positive_count)
        )
        M.update(translated.values())
        pool = [g for g in pool if g not in M]
    return frozenset(M), results


def reserve_rounds(n: int) -> int:
    """Rounds of reserve matchings that cover every agent's favorite good.

    Each round at least halves the number of agents whose favorite is not
    yet matchable inside the reserve, leaving floor(n / 2^t) holdouts after
    t rounds; ceil(log2 n) rounds can therefore still leave one agent
    uncovered when n is a power of two (at n=2 a single round can bank two
    goods that only one of the agents can use), so one extra round clears
    the last holdout. A single agent needs no reserve at all.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0
    return (n - 1).bit_length() + 1


def verify_matchhigh(
    inst: Instance, M: Iterable[int], gstar: Sequence[Optional[int]]
) -> Optional[Dict[int, int]]:
    """Find an injective h: agents -> M with v_i(h(i)) >= v_i({gstar[i]}).

    gstar[i] = None means no requirement for agent i (threshold 0). Built as
    a maximum bipartite matching on the eligibility graph; returns the
    matching as a dict, or None when no complete one exists.
    """
    if len(gstar) != inst.n:
        raise ValueError(f"gstar has {len(gstar)} entries for {inst.n} agents")
    Ms = sorted(set(M))
    if len(Ms) < inst.n:
        return None
    eligible = np.zeros((inst.n, len(Ms)), dtype=bool)
    for i, v in enumerate(inst.valuations):
        singles = v.weight_matrix.max(axis=0)
        req = float(singles[gstar[i]]) if gstar[i] is not None else 0.0
        eligible[i] = [ge_thresh(float(singles[g]), req) for g in Ms]
    match = maximum_bipartite_matching(csr_matrix(eligible), perm_type="column")
    if (match < 0).any():
        return None
    return {i: Ms[int(match[i])] for i in range(inst.n)}
