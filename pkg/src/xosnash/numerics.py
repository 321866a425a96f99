"""Shared numeric conventions: the module-wide tolerance and the seeded RNG.

All values in this package are finite nonnegative float64. Threshold
comparisons of the form ``x >= threshold`` are evaluated with a single
relative tolerance EPS_NUM, applied as ``x >= threshold * (1 - EPS_NUM)``
(symmetrically ``x <= threshold * (1 + EPS_NUM)`` for upper bounds), so
behaviour is deterministic and documented in exactly one place.

Randomness comes from numpy's Philox bit generator: a named, documented
counter-based 64-bit generator, so traces are bit-reproducible given the
seed.
"""

from __future__ import annotations

import numpy as np

#: Single module-wide relative tolerance for threshold comparisons.
EPS_NUM = 1e-9


def ge_thresh(x: float, threshold: float) -> bool:
    """x >= threshold, with EPS_NUM relative slack on the threshold."""
    return x >= threshold * (1.0 - EPS_NUM)


def le_thresh(x: float, threshold: float) -> bool:
    """x <= threshold, with EPS_NUM relative slack on the threshold."""
    return x <= threshold * (1.0 + EPS_NUM)


def new_rng(seed: int) -> np.random.Generator:
    """Seeded Philox generator (counter-based, 64-bit, cross-run stable)."""
    return np.random.Generator(np.random.Philox(seed))
