"""Canonical instance/report files and seeded instance generators.

Files are JSON with sorted keys, compact separators, and every real number
rendered as a decimal string with 17 significant digits — enough to
round-trip IEEE doubles exactly, so emitting, parsing, and emitting again
is byte-stable and files can be content-addressed. The instance digest is
the SHA-256 of the canonical core emission (metadata excluded).

Generators (all seeded, all deterministic):

* ``uniform-additive``: one uniform [0,1) additive function per agent.
* ``k-xos-random``: k uniform additive functions per agent.
* ``p1p2-witness``: each agent owns 4 dedicated goods worth 1/(4 sqrt(n))
  each; with beta_i = 1 the capped value of the dedicated block is exactly
  the cap 1/sqrt(n) while each single good stays at a quarter of it — the
  canonical witness for the capped-welfare guarantee (see
  ``p1p2_witness_bundle``).
* ``equicover-gadget``: reduction instance from a verified equicovering and
  a sampled promise input (params: m, n, r, eps, case).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .capped_welfare import IterationRecord, WelfareWitness
from .gadgets import (
    _sample_disjoint,
    _sample_intersecting,
    build_verified_equicovering,
    reduce_multidisjointness,
)
from .numerics import new_rng
from .solver import SolveTrace
from .valuations import Allocation, Instance

FORMAT_INSTANCE = "xosnash-instance"
FORMAT_REPORT = "xosnash-report"
VERSION = 1

GENERATOR_KINDS = (
    "uniform-additive",
    "k-xos-random",
    "p1p2-witness",
    "equicover-gadget",
)


def fmt17(x: float) -> str:
    """Decimal string with 17 significant digits (exact double round-trip)."""
    return format(float(x), ".17g")


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


class ParseError(ValueError):
    """Schema violation; the message carries the offending location."""


def _parse_weight(s, where: str) -> float:
    if not isinstance(s, str):
        raise ParseError(f"{where}: weight must be a decimal string, got {type(s).__name__}")
    try:
        x = float(s)
    except ValueError:
        raise ParseError(f"{where}: not a number: {s!r}") from None
    if math.isnan(x) or math.isinf(x):
        raise ParseError(f"{where}: weight must be finite, got {s}")
    if x < 0:
        raise ParseError(f"{where}: negative weight {s}")
    return x


def _instance_payload(inst: Instance) -> Dict:
    return {
        "format": FORMAT_INSTANCE,
        "version": VERSION,
        "n": inst.n,
        "m": inst.m,
        "valuations": [
            [[fmt17(w) for w in row] for row in v.weight_matrix]
            for v in inst.valuations
        ],
    }


def emit_instance(inst: Instance, metadata: Optional[Dict] = None) -> str:
    """Canonical text form; optional metadata travels along but is not hashed."""
    payload = _instance_payload(inst)
    if metadata:
        payload["metadata"] = metadata
    return _canonical(payload)


def instance_digest(inst: Instance) -> str:
    """SHA-256 hex digest of the canonical core emission."""
    core = _canonical(_instance_payload(inst))
    return hashlib.sha256(core.encode()).hexdigest()


def parse_instance(text: str) -> Instance:
    inst, _ = parse_instance_file(text)
    return inst


def parse_instance_file(text: str) -> Tuple[Instance, Dict]:
    """Strict parse; returns (instance, metadata dict, possibly empty)."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from None
    if not isinstance(payload, dict):
        raise ParseError("top level: expected an object")
    if payload.get("format") != FORMAT_INSTANCE:
        raise ParseError(f"format: expected {FORMAT_INSTANCE!r}, got {payload.get('format')!r}")
    if payload.get("version") != VERSION:
        raise ParseError(f"version: unsupported {payload.get('version')!r}")
    n, m = payload.get("n"), payload.get("m")
    if not isinstance(n, int) or n < 1:
        raise ParseError(f"n: expected a positive integer, got {n!r}")
    if not isinstance(m, int) or m < 0:
        raise ParseError(f"m: expected a nonnegative integer, got {m!r}")
    vals = payload.get("valuations")
    if not isinstance(vals, list) or len(vals) != n:
        raise ParseError(f"valuations: expected a list of {n} agents")
    matrices = []
    for i, family in enumerate(vals):
        if not isinstance(family, list) or not family:
            raise ParseError(f"valuations[{i}]: expected a nonempty list of additive rows")
        rows = []
        for f, row in enumerate(family):
            if not isinstance(row, list) or len(row) != m:
                raise ParseError(
                    f"valuations[{i}][{f}]: expected {m} weights, got "
                    f"{len(row) if isinstance(row, list) else type(row).__name__}"
                )
            rows.append(
                [_parse_weight(w, f"valuations[{i}][{f}][{g}]") for g, w in enumerate(row)]
            )
        matrices.append(np.array(rows, dtype=np.float64).reshape(len(rows), m))
    metadata = payload.get("metadata", {})
    if metadata and not isinstance(metadata, dict):
        raise ParseError("metadata: expected an object")
    return Instance.from_weight_matrices(matrices, m=m), dict(metadata)


# ---------------------------------------------------------------------------
# solve reports
# ---------------------------------------------------------------------------

def _bundle_list(b) -> List[int]:
    return sorted(int(g) for g in b)


def _matching_payload(res) -> Dict:
    return {
        "assignment": {str(i): int(g) for i, g in sorted(res.assignment.items())},
        "product_log": fmt17(res.product_log),
        "positive_count": res.positive_count,
    }


def emit_report(
    inst: Instance,
    trace: SolveTrace,
    iteration_trace: Sequence[IterationRecord] = (),
    metadata: Optional[Dict] = None,
) -> str:
    """Canonical report text: digest, seed, Q, values, NSW, full trace."""
    from .solver import nsw  # local import: avoid cycle at module load

    values = trace.Q.values(inst)
    payload = {
        "format": FORMAT_REPORT,
        "version": VERSION,
        "instance_digest": instance_digest(inst),
        "seed": trace.seed,
        "allocation": [_bundle_list(b) for b in trace.Q],
        "values": [fmt17(x) for x in values],
        "nsw": fmt17(nsw(inst, trace.Q)),
        "trace": {
            "M": _bundle_list(trace.M),
            "tau": [_matching_payload(t) for t in trace.tau],
            "pi": {str(i): int(g) for i, g in sorted(trace.pi.items())},
            "R": _bundle_list(trace.R),
            "R_prime": _bundle_list(trace.R_prime),
            "X": [_bundle_list(b) for b in trace.X],
            "betas": [None if b is None else fmt17(b) for b in trace.betas],
            "Y": [_bundle_list(b) for b in trace.Y],
            "mu": {str(i): (None if g is None else int(g)) for i, g in sorted(trace.mu.items())},
            "excluded": sorted(int(i) for i in trace.excluded),
        },
        "iterations": [
            {
                "welfare": fmt17(rec.welfare),
                "agent": rec.agent,
                "prefix_size": rec.prefix_size,
            }
            for rec in iteration_trace
        ],
    }
    if metadata:
        payload["metadata"] = metadata
    return _canonical(payload)


def parse_report(text: str) -> Dict:
    """Parse a report back to a plain dict (numbers as floats)."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from None
    if payload.get("format") != FORMAT_REPORT:
        raise ParseError(f"format: expected {FORMAT_REPORT!r}")
    payload["values"] = [float(x) for x in payload["values"]]
    payload["nsw"] = float(payload["nsw"])
    return payload


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def p1p2_witness_bundle(n: int) -> WelfareWitness:
    """The reference allocation packaged with the p1p2-witness instance."""
    O = tuple(frozenset(range(4 * i, 4 * i + 4)) for i in range(n))
    return WelfareWitness(O=O, Abar=frozenset(range(n)))


def generate(kind: str, params: Dict, seed: int) -> Instance:
    """Seeded instance generator; see module docstring for kinds."""
    if kind == "uniform-additive":
        n, m = _int_param(params, "n", 1), _int_param(params, "m", 0)
        rng = new_rng(seed)
        return Instance.from_weight_matrices(
            [rng.uniform(0.0, 1.0, size=(1, m)) for _ in range(n)], m=m
        )
    if kind == "k-xos-random":
        n, m = _int_param(params, "n", 1), _int_param(params, "m", 0)
        k = _int_param(params, "k", 1)
        rng = new_rng(seed)
        return Instance.from_weight_matrices(
            [rng.uniform(0.0, 1.0, size=(k, m)) for _ in range(n)], m=m
        )
    if kind == "p1p2-witness":
        n = _int_param(params, "n", 1)
        m = 4 * n
        w = 1.0 / (4.0 * math.sqrt(n))
        matrices = []
        for i in range(n):
            row = np.zeros(m)
            row[4 * i : 4 * i + 4] = w
            matrices.append(row.reshape(1, m))
        return Instance.from_weight_matrices(matrices, m=m)
    if kind == "equicover-gadget":
        n = _int_param(params, "n", 1)
        m = _int_param(params, "m", 0)
        r = _int_param(params, "r", 1)
        eps = float(params.get("eps", 0.0))
        case = params.get("case", "intersecting")
        if case not in ("intersecting", "disjoint"):
            raise ValueError(f"case must be intersecting|disjoint, got {case!r}")
        E, used_seed, _ = build_verified_equicovering(m, n, r, eps, seed)
        rng = new_rng(used_seed + 1)
        md = (
            _sample_intersecting(rng, r, n)
            if case == "intersecting"
            else _sample_disjoint(rng, r, n)
        )
        return reduce_multidisjointness(md, E)
    raise ValueError(f"unknown generator kind {kind!r} (know {', '.join(GENERATOR_KINDS)})")


def _int_param(params: Dict, key: str, minimum: int) -> int:
    if key not in params:
        raise ValueError(f"missing generator parameter {key!r}")
    val = params[key]
    if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
        raise ValueError(f"parameter {key!r} must be an integer >= {minimum}, got {val!r}")
    return val
