"""Explicit XOS valuations and the three exact oracles (value, XOS, demand).

An XOS (fractionally subadditive) valuation is represented explicitly as a
nonempty ordered family of additive functions over m goods:

    v(S) = max_f sum_{g in S} f(g)

which makes all three oracle types exactly computable. The capped valuation
``min(1/sqrt(n), beta * v(S))`` used by the welfare phase lives here too, as
a lightweight view over a base valuation.

Bundles are frozensets of good indices. All weights are finite nonnegative
float64; prices are nonnegative float64 or +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

Bundle = frozenset  # frozenset[int]; alias for readability in signatures

EMPTY_BUNDLE: Bundle = frozenset()


def as_bundle(goods: Iterable[int]) -> Bundle:
    return goods if isinstance(goods, frozenset) else frozenset(goods)


def _check_weights(w: np.ndarray) -> None:
    if w.ndim != 1:
        raise ValueError(f"weights must be one-dimensional, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")


@dataclass(frozen=True)
class AdditiveFunction:
    """An additive set function: value of a bundle = sum of its goods' weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        _check_weights(w)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def arity(self) -> int:
        return self.weights.shape[0]

    def __call__(self, S: Iterable[int]) -> float:
        idx = list(S)
        if not idx:
            return 0.0
        return float(self.weights[idx].sum())


@dataclass(frozen=True)
class XOSValuation:
    """Pointwise maximum of a nonempty ordered family of additive functions.

    Stored as a (family_size x m) weight matrix; ``family`` exposes the
    ordered AdditiveFunction view used by the XOS oracle's tie-break rule
    (lowest family index wins).
    """

    weight_matrix: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.weight_matrix, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] == 0:
            raise ValueError("family must be a nonempty 2-D weight matrix")
        if not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite")
        if np.any(W < 0):
            raise ValueError("weights must be nonnegative")
        W.setflags(write=False)
        object.__setattr__(self, "weight_matrix", W)

    @classmethod
    def from_functions(cls, functions: Sequence) -> "XOSValuation":
        rows = [
            f.weights if isinstance(f, AdditiveFunction) else np.asarray(f, dtype=np.float64)
            for f in functions
        ]
        return cls(np.vstack(rows))

    @property
    def family_size(self) -> int:
        return self.weight_matrix.shape[0]

    @property
    def arity(self) -> int:
        return self.weight_matrix.shape[1]

    @property
    def family(self) -> tuple[AdditiveFunction, ...]:
        return tuple(AdditiveFunction(row) for row in self.weight_matrix)

    def _bundle_index(self, S: Iterable[int]) -> list:
        idx = sorted(set(S))
        if idx and (idx[0] < 0 or idx[-1] >= self.arity):
            raise IndexError(f"good index out of range [0, {self.arity})")
        return idx


def value(v: XOSValuation, S: Iterable[int]) -> float:
    """Value oracle: max over the family of the additive value of S."""
    idx = v._bundle_index(S)
    if not idx:
        return 0.0
    return float(v.weight_matrix[:, idx].sum(axis=1).max())


def xos_query(v: XOSValuation, S: Iterable[int]) -> AdditiveFunction:
    """XOS oracle: a family member maximizing f(S); lowest family index on ties."""
    idx = v._bundle_index(S)
    if not idx:
        best = 0  # every member attains v(empty) = 0; tie-break to index 0
    else:
        sums = v.weight_matrix[:, idx].sum(axis=1)
        best = int(np.argmax(sums))  # argmax returns the first (lowest) index
    return AdditiveFunction(v.weight_matrix[best])


@dataclass(frozen=True)
class PriceVector:
    """Per-good prices: nonnegative reals or +inf (an unavailable good)."""

    prices: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=np.float64)
        if p.ndim != 1:
            raise ValueError("prices must be one-dimensional")
        if np.any(np.isnan(p)) or np.any(p < 0):
            raise ValueError("prices must be nonnegative and not NaN")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)

    def __len__(self) -> int:
        return self.prices.shape[0]


def as_price_array(p) -> np.ndarray:
    """Validate and return prices as a float64 array (accepts PriceVector)."""
    if isinstance(p, PriceVector):
        return p.prices
    return PriceVector(np.asarray(p, dtype=np.float64)).prices


def demand_query(v: XOSValuation, p) -> Bundle:
    """Demand oracle: a bundle maximizing v(S) - sum of prices over S.

    Exact per-family computation: for each additive f the optimum is
    {g : f(g) > p_g} — goods with zero surplus are excluded (smaller-set
    tie-break), and infinitely priced goods can never qualify. The set
    returned belongs to the family member with the highest surplus, lowest
    family index on ties.
    """
    prices = as_price_array(p)
    if prices.shape[0] != v.arity:
        raise ValueError(f"price vector length {prices.shape[0]} != arity {v.arity}")
    W = v.weight_matrix
    take = W > prices  # strict: zero-surplus goods excluded; inf prices never taken
    surplus = np.where(take, W - prices, 0.0).sum(axis=1)
    best = int(np.argmax(surplus))
    return frozenset(np.flatnonzero(take[best]).tolist())


@dataclass(frozen=True)
class CappedView:
    """The capped valuation v_hat(S) = min(1/sqrt(n), beta * v(S))."""

    base: XOSValuation
    beta: float
    n: int

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def cap(self) -> float:
        return 1.0 / math.sqrt(self.n)

    def __call__(self, S: Iterable[int]) -> float:
        return capped_value(self, S)


def capped_value(cv: CappedView, S: Iterable[int]) -> float:
    return min(cv.cap, cv.beta * value(cv.base, S))


@dataclass(frozen=True)
class Instance:
    """A fair-division instance: n agents, m goods, one XOS valuation each."""

    n: int
    m: int
    valuations: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        vals = tuple(self.valuations)
        if len(vals) != self.n:
            raise ValueError(f"expected {self.n} valuations, got {len(vals)}")
        for i, v in enumerate(vals):
            if v.arity != self.m:
                raise ValueError(f"valuation {i} has arity {v.arity}, expected {self.m}")
        object.__setattr__(self, "valuations", vals)

    @classmethod
    def from_weight_matrices(cls, matrices: Sequence, m: Optional[int] = None) -> "Instance":
        vals = tuple(XOSValuation(np.asarray(M, dtype=np.float64)) for M in matrices)
        if not vals:
            raise ValueError("need at least one agent")
        return cls(n=len(vals), m=vals[0].arity if m is None else m, valuations=vals)

    def value(self, agent: int, S: Iterable[int]) -> float:
        return value(self.valuations[agent], S)

    def restrict_agents(self, agents: Sequence[int]) -> "Instance":
        """Sub-instance over the given agents (same goods)."""
        return Instance(
            n=len(agents), m=self.m, valuations=tuple(self.valuations[i] for i in agents)
        )


@dataclass(frozen=True)
class Allocation:
    """Pairwise-disjoint bundles, one per agent (goods may stay unallocated)."""

    bundles: tuple = field(default=())

    def __post_init__(self):
        bs = tuple(as_bundle(b) for b in self.bundles)
        seen: set = set()
        for i, b in enumerate(bs):
            if seen & b:
                raise ValueError(f"bundle {i} overlaps an earlier bundle")
            seen |= b
        object.__setattr__(self, "bundles", bs)

    def __getitem__(self, agent: int) -> Bundle:
        return self.bundles[agent]

    def __len__(self) -> int:
        return len(self.bundles)

    def __iter__(self):
        return iter(self.bundles)

    @property
    def allocated(self) -> Bundle:
        out: set = set()
        for b in self.bundles:
            out |= b
        return frozenset(out)

    def values(self, inst: Instance) -> list:
        return [value(inst.valuations[i], b) for i, b in enumerate(self.bundles)]
