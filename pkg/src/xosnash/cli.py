"""Command-line surface: solve, exact, verify, gadget, bench.

Exit codes: 0 success, 1 a verification failed, 2 usage or input error.
Report-producing paths write canonical JSON/CSV plus a rendered figure next
to the output file. ``bench`` parallelizes solves across (instance, seed)
pairs; XOSNASH_THREADS overrides the default worker count.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from .capped_welfare import (
    IterationRecord,
    WelfareState,
    capped_social_welfare,
)
from .exact import (
    EnumerationBudgetError,
    brute_force_capped_sw,
    brute_force_nsw,
    concentration_experiment,
)
from .gadgets import build_equicovering, gap_report, verify_equicovering
from .instances import (
    ParseError,
    emit_report,
    fmt17,
    generate,
    instance_digest,
    p1p2_witness_bundle,
    parse_instance_file,
)
from .matching import repeated_matchings, reserve_rounds, verify_matchhigh
from .moving_knife import discrete_moving_knife, pruned_supports
from .numerics import EPS_NUM, ge_thresh, new_rng
from .solver import nsw, rematch_bound_check, solve
from .valuations import CappedView, Instance, value


def _threads() -> int:
    env = os.environ.get("XOSNASH_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _load_instance(path: str) -> Instance:
    text = Path(path).read_text()
    inst, _ = parse_instance_file(text)
    return inst


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    sink: List[IterationRecord] = []
    Q, trace = solve(inst, args.seed, top_up=args.topup, iteration_sink=sink)
    report = emit_report(inst, trace, iteration_trace=sink)
    if args.out:
        Path(args.out).write_text(report)
        fig_path = str(Path(args.out).with_suffix(".png"))
        from .plots import plot_welfare_trajectory

        plot_welfare_trajectory(sink, fig_path, n=inst.n - len(trace.excluded))
        print(f"report: {args.out}")
        print(f"figure: {fig_path}")
    else:
        sys.stdout.write(report)
    print(f"digest: {instance_digest(inst)}")
    print(f"nsw: {fmt17(nsw(inst, Q))}")
    return 0


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------

def cmd_exact(args) -> int:
    inst = _load_instance(args.instance)
    if args.capped:
        if not args.betas:
            raise ValueError("--capped requires --betas b1,b2,...")
        betas = [float(b) for b in args.betas.split(",")]
        alloc, welfare = brute_force_capped_sw(inst, betas)
        print(f"capped welfare: {fmt17(welfare)}")
    else:
        alloc, opt = brute_force_nsw(inst)
        print(f"optimal nsw: {fmt17(opt)}")
    for i, bundle in enumerate(alloc):
        print(f"agent {i}: {sorted(bundle)}")
    return 0


# ---------------------------------------------------------------------------
# verify suites
# ---------------------------------------------------------------------------

def _random_instance(rng, n: int, m: int, k: int = 3) -> Instance:
    return Instance.from_weight_matrices(
        [rng.uniform(0.0, 1.0, size=(k, m)) for _ in range(n)], m=m
    )


def _suite_matchhigh(n: int, trials: int, seed: int) -> List[str]:
    failures = []
    rng = new_rng(seed)
    rounds = reserve_rounds(n)
    m = n * rounds + n
    for t in range(trials):
        inst = _random_instance(rng, n, m)
        from .exact import gstar_from_allocation

        N, _ = brute_force_nsw(inst)
        gstar = gstar_from_allocation(inst, N)
        M, _ = repeated_matchings(inst, range(m), rounds)
        if verify_matchhigh(inst, M, gstar) is None:
            failures.append(f"trial {t}: no qualifying matching into the reserve")
    return failures


def _suite_movingknife(n: int, trials: int, seed: int) -> List[str]:
    failures = []
    rng = new_rng(seed)
    for t in range(trials):
        m = int(rng.integers(2 * n, 6 * n + 1))
        inst = _random_instance(rng, n, m)
        R = frozenset(int(g) for g in range(m) if rng.integers(0, 2) == 1)
        X = discrete_moving_knife(inst, R)
        if X.allocated != R:
            failures.append(f"trial {t}: output does not partition the pool")
            continue
        supports = pruned_supports(inst, R)
        for a in range(n - 1):  # the last agent may hold only leftovers
            if not X[a]:
                continue
            got = supports[a].restricted_value(X[a])
            target = supports[a].restricted_value(R) / (16.0 * n)
            if not ge_thresh(got, target):
                failures.append(f"trial {t}: agent {a} below threshold")
    return failures


def _suite_cappedwelfare(n: int, trials: int, seed: int) -> List[str]:
    failures = []
    inst = generate("p1p2-witness", {"n": n}, seed)
    witness = p1p2_witness_bundle(n)
    views = [CappedView(v, 1.0, n) for v in inst.valuations]
    if not witness.p1_holds(views):
        failures.append("witness does not satisfy P1")
    if not witness.p2_holds(views):
        failures.append("witness does not satisfy P2")
    records: List[IterationRecord] = []
    cap = 1.0 / math.sqrt(n)

    def observer(state: WelfareState, prices) -> None:
        for j in range(n):
            if not views[j](state.bundles[j]) < cap:
                failures.append(f"turn {state.iteration}: bundle {j} reached the cap")

    Y = capped_social_welfare(inst, [1.0] * n, trace=records, observer=observer)
    total = sum(views[j](Y[j]) for j in range(n))
    floor = witness.guarantee(views)
    if not ge_thresh(total, floor):
        failures.append(f"final welfare {total} below the (2/25) floor {floor}")
    improving = [r for r in records if r.agent is not None]
    if len(improving) > 225 * n:
        failures.append(f"{len(improving)} improving turns exceed 225n")
    prev = 0.0
    for r in improving:
        if r.welfare - prev < 1.0 / (225.0 * math.sqrt(n)) - EPS_NUM:
            failures.append("a turn gained less than 1/(225 sqrt(n))")
        prev = r.welfare
    return failures


def _suite_rematch(n: int, trials: int, seed: int) -> List[str]:
    failures = []
    rng = new_rng(seed)
    from .exact import gstar_from_allocation

    checked = 0
    for t in range(trials):
        m = int(rng.integers(4, 9))
        inst = _random_instance(rng, n, m, k=2)
        N, _ = brute_force_nsw(inst)
        gstar = gstar_from_allocation(inst, N)
        Q, trace = solve(inst, seed=int(rng.integers(1 << 31)))
        if verify_matchhigh(inst, trace.M, gstar) is None:
            continue
        checked += 1
        nsw_q, nsw_qstar = rematch_bound_check(inst, trace, gstar)
        if not ge_thresh(nsw_q, nsw_qstar / 2.0):
            failures.append(f"trial {t}: NSW(Q) {nsw_q} < half of NSW(Q*) {nsw_qstar}")
    if checked == 0:
        failures.append("no trial had a verifiable reserve matching")
    return failures


def _suite_concentration(n: int, trials: int, seed: int) -> List[str]:
    from .valuations import XOSValuation

    size = max(n, 64)
    v = XOSValuation(np.ones((1, size)))
    res = concentration_experiment(v, range(size), n, trials, seed)
    bound = math.exp(-math.sqrt(n) / 18.0)
    slack = 3.0 * math.sqrt(max(res.frequency * (1 - res.frequency), 0.0) / trials)
    if res.frequency <= bound + slack:
        return []
    return [f"frequency {res.frequency} above bound {bound} + slack {slack}"]


_SUITES = {
    "matchhigh": (_suite_matchhigh, dict(n=3, trials=50)),
    "movingknife": (_suite_movingknife, dict(n=4, trials=100)),
    "cappedwelfare": (_suite_cappedwelfare, dict(n=4, trials=1)),
    "rematch": (_suite_rematch, dict(n=3, trials=30)),
    "concentration": (_suite_concentration, dict(n=256, trials=10_000)),
}


def cmd_verify(args) -> int:
    fn, defaults = _SUITES[args.suite]
    n = args.n if args.n is not None else defaults["n"]
    trials = args.trials if args.trials is not None else defaults["trials"]
    failures = fn(n, trials, args.seed)
    if failures:
        for line in failures:
            print(f"FAIL {args.suite}: {line}")
        return 1
    print(f"PASS {args.suite} (n={n}, trials={trials}, seed={args.seed})")
    return 0


# ---------------------------------------------------------------------------
# gadget
# ---------------------------------------------------------------------------

def cmd_gadget(args) -> int:
    E = build_equicovering(args.m, args.n, args.r, args.seed)
    if args.verify.startswith("sampled"):
        k = 100_000
        if "=" in args.verify:
            k = int(args.verify.split("=", 1)[1])
        res = verify_equicovering(E, args.eps, mode="sampled", k=k, seed=args.seed)
    elif args.verify == "exhaustive":
        res = verify_equicovering(E, args.eps, mode="exhaustive")
    else:
        raise ValueError(f"--verify must be exhaustive or sampled[=K], got {args.verify!r}")
    print(
        f"equicovering n={args.n} m={args.m} r={args.r}: "
        f"{'verified' if res.ok else 'REJECTED'} "
        f"(worst union {res.witness_union_size} vs bound {res.bound:g}, "
        f"{res.checked} tuples)"
    )
    if not res.ok:
        return 1
    if args.gap:
        report = gap_report(E, args.eps, trials=args.trials, seed=args.seed)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["n", "m", "r", "eps", "case", "nsw", "gap"])
        for row in report.rows:
            writer.writerow(
                [row.n, row.m, row.r, fmt17(row.eps), row.case, fmt17(row.nsw), fmt17(row.gap)]
            )
        text = buf.getvalue()
        if args.out:
            Path(args.out).write_text(text)
            from .plots import plot_gap

            fig_path = str(Path(args.out).with_suffix(".png"))
            plot_gap(report, fig_path)
            print(f"table: {args.out}")
            print(f"figure: {fig_path}")
        else:
            sys.stdout.write(text)
        print(f"gap {report.bound_ratio:g}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_one(name: str, inst: Instance, seed: int) -> dict:
    Q, _ = solve(inst, seed)
    row = {"instance": name, "seed": seed, "nsw": nsw(inst, Q), "opt": None, "ratio": None}
    try:
        _, opt = brute_force_nsw(inst)
    except EnumerationBudgetError:
        return row
    row["opt"] = opt
    row["ratio"] = row["nsw"] / opt if opt > 0 else math.inf
    return row


def cmd_bench(args) -> int:
    paths = sorted(Path(args.dir).glob("*.json"))
    if not paths:
        raise ValueError(f"no .json instances under {args.dir}")
    jobs = []
    for path in paths:
        try:
            inst, _ = parse_instance_file(path.read_text())
        except ParseError as e:
            print(f"skipping {path.name}: {e}", file=sys.stderr)
            continue
        for seed in range(args.seeds):
            jobs.append((path.stem, inst, seed))
    if not jobs:
        raise ValueError(f"no parsable instances under {args.dir}")
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda j: _bench_one(*j), jobs))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["instance", "seed", "nsw", "opt", "ratio"])
    for row in rows:
        writer.writerow(
            [
                row["instance"],
                row["seed"],
                fmt17(row["nsw"]),
                "" if row["opt"] is None else fmt17(row["opt"]),
                "" if row["ratio"] is None else fmt17(row["ratio"]),
            ]
        )
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
        from .plots import plot_bench

        fig_path = str(Path(args.out).with_suffix(".png"))
        plot_bench(rows, fig_path)
        print(f"table: {args.out}")
        print(f"figure: {fig_path}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xosnash",
        description="Nash-social-welfare solver toolkit for XOS valuations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the randomized pipeline on an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--topup", action="store_true", help="greedily hand out leftovers")
    p.add_argument("--out", help="write the canonical report (plus figure) here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="brute-force optimum of an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--capped", action="store_true", help="maximize capped welfare instead")
    p.add_argument("--betas", help="comma-separated per-agent scaling (with --capped)")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("verify", help="run a randomized verification suite")
    p.add_argument("--suite", required=True, choices=sorted(_SUITES))
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gadget", help="build/verify an equicovering; optional gap table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verify", default="exhaustive", help="exhaustive | sampled[=K]")
    p.add_argument("--gap", action="store_true", help="tabulate promise-case gaps")
    p.add_argument("--trials", type=int, default=5, help="gap samples per case")
    p.add_argument("--out", help="write the gap CSV (plus figure) here")
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("bench", help="solve every instance in a directory over many seeds")
    p.add_argument("--dir", required=True)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--out", help="write the CSV (plus figure) here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, EnumerationBudgetError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
