"""End-to-end Nash-welfare solver: matchings, random split, knife, prices.

The pipeline, given an instance and a seed:

I.   ceil(log2 n)+1 rounds of singleton matchings (none for a lone agent)
     bank a reserve M of individually strong goods; one more matching pi
     hands each agent a personal good from the rest. Agents that pi cannot serve with positive
     value sit out the middle phases ("excluded") and re-enter at the end.
II.  Every remaining good flips a fair coin (counter-based generator,
     Philox) and lands in R (0) or R' (1).
III. R is divided among the participating agents by the discrete moving
     knife, giving X_i.
IV.  Scaling factors beta_i = 1/(n' * v_i(X_i + pi(i))) (n' = number of
     participants) feed the capped-welfare local search on R', giving Y_i.
Last, a product-optimal rematch mu pulls one reserve good per agent from M,
compared against each agent's standing bundle via per-agent fallback
columns. Q_i = {mu(i)} | {pi(i)} | X_i | Y_i.

Everything after the coin flips is deterministic, so (instance, seed)
reproduces the trace bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .capped_welfare import capped_social_welfare
from .matching import (
    MatchingResult,
    max_product_matching,
    repeated_matchings,
    reserve_rounds,
)
from .moving_knife import discrete_moving_knife
from .numerics import new_rng
from .valuations import Allocation, Bundle, CappedView, Instance, value


@dataclass(frozen=True)
class SolveTrace:
    """Everything solve() decided, sufficient to replay and audit a run."""

    M: frozenset
    tau: Tuple[MatchingResult, ...]
    pi: Dict[int, int]
    R: frozenset
    R_prime: frozenset
    X: Allocation
    betas: Tuple[Optional[float], ...]
    Y: Allocation
    mu: Dict[int, Optional[int]]
    Q: Allocation
    excluded: frozenset
    seed: int


def nsw(inst: Instance, alloc: Allocation) -> float:
    """Geometric mean of the agents' bundle values, in log space."""
    vals = alloc.values(inst)
    if any(x == 0.0 for x in vals):
        return 0.0
    return math.exp(sum(math.log(x) for x in vals) / inst.n)


def _geomean(vals: Sequence[float]) -> float:
    if any(x == 0.0 for x in vals):
        return 0.0
    return math.exp(sum(math.log(x) for x in vals) / len(vals))


def _rematch(
    inst: Instance, M: frozenset, offsets: Sequence[Bundle]
) -> Dict[int, Optional[int]]:
    """Product-optimal injective pull of reserve goods on top of offsets.

    Maximizes prod_i v_i({mu(i)} | offsets[i]) over partial injective maps
    mu into M; "no reserve good" is encoded as a per-agent fallback column
    worth v_i(offsets[i]). Returns agent -> good or None.
    """
    n = inst.n
    Ms = sorted(M)
    k = len(Ms)
    V = np.zeros((n, k + n))
    for i in range(n):
        v = inst.valuations[i]
        base = frozenset(offsets[i])
        for c, g in enumerate(Ms):
            V[i, c] = value(v, base | {g})
        V[i, k + i] = value(v, base)
    res = max_product_matching(V)
    mu: Dict[int, Optional[int]] = {}
    for i in range(n):
        c = res.assignment.get(i)
        mu[i] = Ms[c] if c is not None and c < k else None
    return mu


def _scatter(
    bundles: Allocation, agents: Sequence[int], n: int
) -> Allocation:
    """Lift an allocation over a sub-list of agents back to n agents."""
    out = [frozenset()] * n
    for sub_idx, agent in enumerate(agents):
        out[agent] = bundles[sub_idx]
    return Allocation(tuple(out))


def solve(
    inst: Instance,
    seed: int,
    top_up: bool = False,
    iteration_sink: Optional[list] = None,
) -> Tuple[Allocation, SolveTrace]:
    """Run the full pipeline; deterministic given (instance, seed).

    With ``top_up`` the goods left unallocated at the end (unmatched reserve
    goods and the capped-welfare remainder) are handed out greedily, each to
    the agent gaining most (capped gain for participants, raw gain for
    excluded agents; lowest index on ties). Off by default: the guarantees
    are stated for the bare pipeline, which may leave goods unallocated.
    ``iteration_sink``, if a list, receives the capped-welfare loop records.
    """
    n, m = inst.n, inst.m

    # Phase I: reserve M, then one personal good each.
    M, tau = repeated_matchings(inst, range(m), reserve_rounds(n))
    rest = sorted(set(range(m)) - M)
    singles = np.vstack([v.weight_matrix.max(axis=0) for v in inst.valuations])
    pi_res = max_product_matching(singles[:, rest]) if rest else MatchingResult({}, 0.0, 0)
    pi = {i: rest[c] for i, c in pi_res.assignment.items()}
    excluded = frozenset(i for i in range(n) if i not in pi)
    participants = [i for i in range(n) if i not in excluded]

    # Phase II: fair-coin split of what is left.
    remaining = sorted(set(range(m)) - M - set(pi.values()))
    rng = new_rng(seed)
    flips = rng.integers(0, 2, size=len(remaining))
    R = frozenset(g for g, b in zip(remaining, flips) if b == 0)
    R_prime = frozenset(g for g, b in zip(remaining, flips) if b == 1)

    if participants:
        sub = inst.restrict_agents(participants)
        n_sub = sub.n

        # Phase III: moving knife on R.
        X_sub = discrete_moving_knife(sub, R)
        X = _scatter(X_sub, participants, n)

        # Phase IV: capped welfare on R' with beta from X and pi.
        betas_sub = []
        for sub_idx, agent in enumerate(participants):
            base = X_sub[sub_idx] | {pi[agent]}
            betas_sub.append(1.0 / (n_sub * value(inst.valuations[agent], base)))
        Y_sub = capped_social_welfare(
            sub, betas_sub, pool=R_prime, trace=iteration_sink
        )
        Y = _scatter(Y_sub, participants, n)
        beta_by_agent = dict(zip(participants, betas_sub))
    else:
        X = Allocation((frozenset(),) * n)
        Y = Allocation((frozenset(),) * n)
        beta_by_agent = {}
    betas = tuple(beta_by_agent.get(i) for i in range(n))

    # Final rematch out of the reserve.
    offsets = [
        (frozenset({pi[i]}) if i in pi else frozenset()) | X[i] | Y[i]
        for i in range(n)
    ]
    mu = _rematch(inst, M, offsets)

    Q_bundles = [
        offsets[i] | ({mu[i]} if mu[i] is not None else frozenset())
        for i in range(n)
    ]
    if top_up:
        Q_bundles = _greedy_top_up(inst, Q_bundles, beta_by_agent)
    Q = Allocation(tuple(Q_bundles))
    trace = SolveTrace(
        M=M,
        tau=tuple(tau),
        pi=pi,
        R=R,
        R_prime=R_prime,
        X=X,
        betas=betas,
        Y=Y,
        mu=mu,
        Q=Q,
        excluded=excluded,
        seed=seed,
    )
    return Q, trace


def _greedy_top_up(
    inst: Instance, bundles: List[Bundle], beta_by_agent: Dict[int, float]
) -> List[Bundle]:
    """Hand each unallocated good to the agent who gains most from it."""
    n = inst.n
    taken = frozenset().union(*bundles) if bundles else frozenset()
    leftovers = sorted(set(range(inst.m)) - taken)
    out = [set(b) for b in bundles]
    views = {
        i: CappedView(inst.valuations[i], b, n) for i, b in beta_by_agent.items()
    }
    for g in leftovers:
        gains = []
        for i in range(n):
            if i in views:
                gains.append(views[i](out[i] | {g}) - views[i](out[i]))
            else:
                v = inst.valuations[i]
                gains.append(value(v, out[i] | {g}) - value(v, out[i]))
        best = int(np.argmax(gains))
        out[best].add(g)
    return [frozenset(b) for b in out]


def rematch_bound_check(
    inst: Instance, trace: SolveTrace, gstar: Sequence[Optional[int]]
) -> Tuple[float, float]:
    """NSW of the solved Q versus the reference rematch Q*.

    Q*_i = {gstar[i]} | {pi(i)} | X_i | Y_i (absent parts omitted). Q* need
    not be an allocation — reference goods may collide with other agents'
    bundles — so its value is computed bundle by bundle.
    """
    n = inst.n
    if len(gstar) != n:
        raise ValueError(f"gstar has {len(gstar)} entries for {n} agents")
    vals_q = []
    vals_qstar = []
    for i in range(n):
        core = (
            (frozenset({trace.pi[i]}) if i in trace.pi else frozenset())
            | trace.X[i]
            | trace.Y[i]
        )
        star = core | ({gstar[i]} if gstar[i] is not None else frozenset())
        vals_q.append(value(inst.valuations[i], trace.Q[i]))
        vals_qstar.append(value(inst.valuations[i], star))
    return _geomean(vals_q), _geomean(vals_qstar)
