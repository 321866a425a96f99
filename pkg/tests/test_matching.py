"""Matching layer: two-level optimality, determinism, reserve certificates."""

from __future__ import annotations

import itertools
import math
from typing import Optional, Tuple

import numpy as np
import pytest

from xosnash import (
    Allocation,
    Instance,
    MatchingResult,
    brute_force_nsw,
    gstar_from_allocation,
    max_product_matching,
    new_rng,
    repeated_matchings,
    reserve_rounds,
    verify_matchhigh,
)


# ---------------------------------------------------------------------------
# exhaustive reference optimum
# ---------------------------------------------------------------------------

def _exhaustive_optimum(V: np.ndarray) -> Tuple[dict, int, float]:
    """Scan every injective partial assignment of agents to positive goods.

    Maximizes (positive pair count, product of matched values), breaking
    product ties (1e-12 relative) toward the lexicographically smallest
    assignment vector — per agent, lower good index first, unmatched last.
    """
    n, k = V.shape
    options: list = list(range(k)) + [None]
    best: Optional[tuple] = None
    for combo in itertools.product(options, repeat=n):
        goods = [g for g in combo if g is not None]
        if len(set(goods)) != len(goods):
            continue
        if any(V[i, g] <= 0.0 for i, g in enumerate(combo) if g is not None):
            continue
        count = len(goods)
        prod = 1.0
        for i, g in enumerate(combo):
            if g is not None:
                prod *= V[i, g]
        lexkey = tuple(k if g is None else g for g in combo)
        cand = (count, prod, lexkey)
        if best is None:
            best = cand
            continue
        if count != best[0]:
            if count > best[0]:
                best = cand
            continue
        if not math.isclose(prod, best[1], rel_tol=1e-12):
            if prod > best[1]:
                best = cand
            continue
        if lexkey < best[2]:
            best = cand
    assert best is not None  # the all-unmatched assignment always qualifies
    assignment = {
        i: g for i, g in enumerate(best[2]) if g < k
    }
    return assignment, best[0], best[1]


def _random_matrix(rng, kind: str, n: int, k: int) -> np.ndarray:
    if kind == "uniform":
        return rng.uniform(0.0, 1.0, size=(n, k))
    if kind == "integer":
        return rng.integers(0, 4, size=(n, k)).astype(np.float64)
    if kind == "ones":
        return np.ones((n, k))
    # sparse: roughly half the entries vanish
    V = rng.uniform(0.0, 1.0, size=(n, k))
    V[rng.uniform(size=(n, k)) < 0.5] = 0.0
    return V


def test_matches_exhaustive_optimum_on_small_matrices():
    rng = new_rng(5)
    cases = 0
    for kind in ("uniform", "integer", "ones", "sparse"):
        for _ in range(100):
            n = int(rng.integers(1, 5))
            k = int(rng.integers(1, 5))
            V = _random_matrix(rng, kind, n, k)
            want_assign, want_count, want_prod = _exhaustive_optimum(V)
            res = max_product_matching(V)
            assert res.assignment == want_assign, (kind, V)
            assert res.positive_count == want_count
            assert math.isclose(math.exp(res.product_log), want_prod, rel_tol=1e-9)
            cases += 1
    assert cases == 400


# ---------------------------------------------------------------------------
# pinned small cases
# ---------------------------------------------------------------------------

def test_two_by_two_prefers_product_four():
    res = max_product_matching([[2, 1], [1, 2]])
    assert res.assignment == {0: 0, 1: 1}
    assert math.isclose(math.exp(res.product_log), 4.0, rel_tol=1e-12)
    assert res.positive_count == 2


def test_zero_rows_stay_unmatched():
    res = max_product_matching([[1, 0], [0, 0]])
    assert res.assignment == {0: 0}
    assert res.positive_count == 1
    assert res.get(1) is None
    assert res.matched_goods() == {0}


def test_single_agent_single_good():
    assert max_product_matching([[7]]).assignment == {0: 0}


def test_cardinality_beats_product():
    # count 2 forces the (4, 5) pairing even though 5 alone is a bigger factor
    res = max_product_matching([[5, 4], [5, 0]])
    assert res.assignment == {0: 1, 1: 0}
    assert res.positive_count == 2


def test_all_ties_resolve_lexicographically():
    res = max_product_matching([[1, 1], [1, 1]])
    assert res.assignment == {0: 0, 1: 1}
    res = max_product_matching([[0, 5], [0, 5]])
    assert res.assignment == {0: 1}


def test_empty_dimensions():
    assert max_product_matching(np.zeros((0, 3))).assignment == {}
    assert max_product_matching(np.zeros((2, 0))).assignment == {}


def test_rejects_bad_values():
    with pytest.raises(ValueError):
        max_product_matching([[1.0, -1.0]])
    with pytest.raises(ValueError):
        max_product_matching([[math.inf, 1.0]])
    with pytest.raises(ValueError):
        max_product_matching(np.ones(3))


def test_row_rescaling_keeps_the_assignment():
    # positive entries with n <= k: every optimum matches all agents, so
    # scaling one row scales every candidate product by the same factor
    rng = new_rng(17)
    for _ in range(40):
        n = int(rng.integers(1, 5))
        k = int(rng.integers(n, 6))
        V = rng.uniform(0.1, 1.0, size=(n, k))
        base = max_product_matching(V).assignment
        W = V.copy()
        row = int(rng.integers(n))
        W[row] *= float(rng.uniform(0.25, 4.0))
        assert max_product_matching(W).assignment == base


# ---------------------------------------------------------------------------
# repeated matchings
# ---------------------------------------------------------------------------

def test_repeated_matchings_banks_the_top_pair():
    inst = Instance.from_weight_matrices([[[5, 4, 1, 1]], [[4, 5, 1, 1]]])
    M, taus = repeated_matchings(inst, range(4), rounds=1)
    assert M == {0, 1}
    assert len(taus) == 1
    assert taus[0].assignment == {0: 0, 1: 1}


def test_zero_rounds_bank_nothing():
    inst = Instance.from_weight_matrices([[[5, 4]], [[4, 5]]])
    M, taus = repeated_matchings(inst, range(2), rounds=0)
    assert M == frozenset() and taus == []


def test_all_zero_values_bank_nothing():
    inst = Instance.from_weight_matrices([[[0, 0]], [[0, 0]]])
    M, taus = repeated_matchings(inst, range(2), rounds=1)
    assert M == frozenset()
    assert taus[0].positive_count == 0


def test_rounds_disjoint_and_pool_shrinks():
    rng = new_rng(29)
    for _ in range(20):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(n, 4 * n + 1))
        inst = Instance.from_weight_matrices(
            [rng.uniform(0.0, 1.0, size=(2, m)) for _ in range(n)], m=m
        )
        rounds = (n - 1).bit_length() + 1
        M, taus = repeated_matchings(inst, range(m), rounds)
        seen: set = set()
        for tau in taus:
            goods = tau.matched_goods()
            assert not (goods & seen)
            seen |= goods
        assert M == frozenset(seen)
        assert len(M) <= rounds * n


def test_repeated_matchings_validates_inputs():
    inst = Instance.from_weight_matrices([[[1, 1]]])
    with pytest.raises(ValueError):
        repeated_matchings(inst, range(2), rounds=-1)
    with pytest.raises(IndexError):
        repeated_matchings(inst, [5], rounds=1)


# ---------------------------------------------------------------------------
# reserve certificate
# ---------------------------------------------------------------------------

def test_matchhigh_single_agent_gets_the_best_good():
    inst = Instance.from_weight_matrices([[[1, 9, 3]]])
    h = verify_matchhigh(inst, {1}, gstar=[1])
    assert h == {0: 1}


def test_matchhigh_empty_reserve_fails_positive_requirement():
    inst = Instance.from_weight_matrices([[[1, 9, 3]]])
    assert verify_matchhigh(inst, frozenset(), gstar=[1]) is None


def test_matchhigh_requires_value_at_least_gstar():
    # reserve holds only the weakest good; agent 0 demands the strongest
    inst = Instance.from_weight_matrices([[[1, 9, 3]], [[1, 1, 1]]])
    assert verify_matchhigh(inst, {0, 2}, gstar=[1, 0]) is None
    h = verify_matchhigh(inst, {0, 2}, gstar=[2, 0])
    assert h is not None and inst.value(0, {h[0]}) >= 3.0


def test_matchhigh_none_requirement_matches_anything():
    inst = Instance.from_weight_matrices([[[0, 0]], [[1, 0]]])
    h = verify_matchhigh(inst, {0, 1}, gstar=[None, None])
    assert h is not None and set(h) == {0, 1}


def test_matchhigh_rejects_gstar_length():
    inst = Instance.from_weight_matrices([[[1, 1]]])
    with pytest.raises(ValueError):
        verify_matchhigh(inst, {0}, gstar=[0, 1])


def test_reserve_covers_any_disjoint_reference_at_n16():
    # reserve_rounds-many rounds bank enough goods that some injective
    # reserve pick beats every agent's favorite good of an arbitrary
    # disjoint reference
    rng = new_rng(99)
    n = 16
    rounds = reserve_rounds(n)
    m = n * rounds
    for _ in range(10):
        inst = Instance.from_weight_matrices(
            [rng.uniform(0.0, 1.0, size=(2, m)) for _ in range(n)], m=m
        )
        perm = [int(g) for g in rng.permutation(m)]
        ref = Allocation(tuple(frozenset(perm[5 * i : 5 * i + 5]) for i in range(n)))
        gstar = gstar_from_allocation(inst, ref)
        M, _ = repeated_matchings(inst, range(m), rounds)
        h = verify_matchhigh(inst, M, gstar)
        assert h is not None
        assert len(set(h.values())) == n and set(h.values()) <= M
        for i in range(n):
            assert inst.value(i, {h[i]}) >= inst.value(i, {gstar[i]}) * (1 - 1e-9)


def test_reserve_rounds_counts():
    assert reserve_rounds(1) == 0
    assert reserve_rounds(2) == 2
    assert reserve_rounds(3) == 3
    assert reserve_rounds(4) == 3
    assert reserve_rounds(5) == 4
    assert reserve_rounds(16) == 5
    with pytest.raises(ValueError):
        reserve_rounds(0)


def test_single_round_holdout_cleared_by_extra_round():
    # With one round both banked goods can be usable only against one
    # agent's favorite; the extra round banks the other favorite itself.
    inst = Instance.from_weight_matrices(
        [[[0.9, 0.7, 0.0, 0.65]], [[0.95, 0.0, 0.75, 0.0]]]
    )
    ref, _ = brute_force_nsw(inst)
    assert ref == Allocation((frozenset({1, 3}), frozenset({0, 2})))
    gstar = gstar_from_allocation(inst, ref)
    assert gstar == (1, 0)

    M1, _ = repeated_matchings(inst, range(4), rounds=1)
    assert M1 == frozenset({0, 2})
    assert verify_matchhigh(inst, M1, gstar) is None

    M2, _ = repeated_matchings(inst, range(4), reserve_rounds(2))
    assert M2 == frozenset({0, 1, 2})
    h = verify_matchhigh(inst, M2, gstar)
    assert h == {0: 1, 1: 0}
