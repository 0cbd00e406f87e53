"""Command-line front end.

Subcommands: describe, procedure, frontier, check, auction, oracle. All
numeric output in exact modes is printed as reduced fractions. Exit codes:
0 success or checks passed, 1 a requested check failed, 2 usage or parse
error, 3 an enumeration cap was exceeded.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

from .auction import (
    allocate,
    allocate_with_threshold,
    expected_revenue_exact,
    expected_virtual_surplus,
    simulate,
)
from .exact import EnumerationCapError, format_value, parse_rational
from .frontier import (
    check_implementability,
    check_insurmountability,
    efficiency_sequence,
    revenue_frontier,
)
from .instances import (
    InstanceFormatError,
    LoadedInstance,
    load_instance,
    load_mechanism,
    save_mechanism,
)
from .oracle import optimal_mechanism, verify_mechanism


class UsageError(Exception):
    pass


def _pick_buyer(loaded: LoadedInstance, index: int):
    if index < 0 or index >= loaded.auction.m:
        raise UsageError(f"buyer index {index} outside 0..{loaded.auction.m - 1}")
    return loaded.auction.buyers[index]


def _buyer_distribution(loaded, index):
    buyer = _pick_buyer(loaded, index)
    if buyer.distribution is None:
        raise EnumerationCapError(
            f"buyer {index} has no enumerable support at the current cap"
        )
    return buyer.distribution


def cmd_describe(args) -> int:
    loaded = load_instance(args.instance)
    auction = loaded.auction
    catalog = auction.catalog
    print(f"products: {catalog.n}")
    for j in catalog.products:
        print(f"  {loaded.label_of(j)} (id {j}): price {format_value(catalog.price(j))}")
    family = auction.family
    if family.kind == "cardinality":
        print(f"family: at most {family.limit} winners")
    elif family.kind == "explicit":
        sets = sorted(sorted(i + 1 for i in s) for s in family.sets)
        print(f"family: explicit winner sets {sets} (1-based)")
    else:
        print("family: single winner")
    print(f"buyers: {auction.m}")
    for i, (buyer, kind) in enumerate(zip(auction.buyers, loaded.buyer_kinds)):
        size = len(buyer.distribution.support) if buyer.distribution else "?"
        scored = "yes" if buyer.valuation is not None else "no"
        print(f"  buyer {i}: {kind}, support size {size}, scored: {scored}")
    return 0


def cmd_procedure(args) -> int:
    loaded = load_instance(args.instance)
    buyer = _pick_buyer(loaded, args.buyer)
    if buyer.chain is None:
        raise UsageError(f"buyer {args.buyer} is not chain-backed; trace needs a chain")
    seq = efficiency_sequence(buyer.chain, loaded.catalog)
    fmt = loaded.format_assortment
    print(f"buyer {args.buyer}: greedy efficiency trace over {loaded.catalog.n} products")
    for step in seq.steps:
        before = step.assortment - {step.chosen}
        print(f"k={step.index}  assortment so far: {fmt(before)}")
        print("  product  adj_price  escape_prob  efficiency")
        for cand in step.candidates:
            print(
                f"  {loaded.label_of(cand.product):<8} "
                f"{format_value(cand.adjusted_price):<10} "
                f"{format_value(cand.escape_probability):<12} "
                f"{format_value(cand.efficiency)}"
            )
        print(f"  -> select {loaded.label_of(step.chosen)}  (value {format_value(step.value)})")
        if step.adjusted_prices:
            updates = "  ".join(
                f"{loaded.label_of(j)}={format_value(p)}"
                for j, p in sorted(step.adjusted_prices.items())
            )
            print(f"  updated prices: {updates}")
    print(
        "sequence: "
        + ", ".join(loaded.label_of(j) for j in seq.products)
        + "   values: "
        + ", ".join(format_value(v) for v in seq.values)
    )
    for dead in seq.dead:
        print(
            f"dead: {loaded.label_of(dead.product)} "
            f"(final price {format_value(dead.final_price)}, died at k={dead.died_at})"
        )
    if args.json:
        payload = {
            "steps": [
                {
                    "k": step.index,
                    "chosen": step.chosen,
                    "value": format_value(step.value),
                    "assortment": sorted(step.assortment),
                    "candidates": [
                        {
                            "product": c.product,
                            "adjusted_price": format_value(c.adjusted_price),
                            "escape_probability": format_value(c.escape_probability),
                            "efficiency": format_value(c.efficiency),
                        }
                        for c in step.candidates
                    ],
                    "updated_prices": {
                        str(j): format_value(p) for j, p in sorted(step.adjusted_prices.items())
                    },
                }
                for step in seq.steps
            ],
            "dead": [
                {
                    "product": d.product,
                    "final_price": format_value(d.final_price),
                    "died_at": d.died_at,
                }
                for d in seq.dead
            ],
        }
        with open(args.json, "w") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
        print(f"wrote trace to {args.json}")
    return 0


FRONTIER_HEADER = "Q,R,assortment,left_slope"


def frontier_csv_rows(loaded: LoadedInstance, index: int) -> list[str]:
    dist = _buyer_distribution(loaded, index)
    front = revenue_frontier(dist, loaded.catalog)
    rows = [FRONTIER_HEADER]
    for point in front.points:
        assortment = loaded.format_assortment(point.assortments[0])
        slope = "-" if point.left_slope is None else format_value(point.left_slope)
        rows.append(
            f"{format_value(point.sale_probability)},{format_value(point.revenue)},"
            f"{assortment},{slope}"
        )
    return rows


def cmd_frontier(args) -> int:
    loaded = load_instance(args.instance)
    rows = frontier_csv_rows(loaded, args.buyer)
    if args.csv:
        with open(args.csv, "w") as handle:
            handle.write("\n".join(rows) + "\n")
        print(f"wrote {len(rows) - 1} frontier vertices to {args.csv}")
    else:
        print("\n".join(rows))
    return 0


def cmd_check(args) -> int:
    loaded = load_instance(args.instance)
    buyer = _pick_buyer(loaded, args.buyer)
    if buyer.valuation is None:
        raise UsageError(
            f"buyer {args.buyer} has no score mapping; supply a vvm block for explicit buyers"
        )
    dist = _buyer_distribution(loaded, args.buyer)
    failed = False
    if args.what in ("impl", "both"):
        report = check_implementability(buyer.valuation, dist, loaded.catalog)
        status = "PASS" if report.implementable else "FAIL"
        print(f"implementability: {status} ({len(report.checks)} thresholds)")
        for check in report.checks:
            if check.satisfied:
                print(
                    f"  w={format_value(check.threshold)}: witness "
                    f"{loaded.format_assortment(check.witness)} "
                    f"(covered {format_value(check.covered)}, revenue "
                    f"{format_value(check.witness_revenue)})"
                )
            else:
                print(f"  w={format_value(check.threshold)}: FAIL, {check.reason}")
        failed = failed or not report.implementable
    if args.what in ("insurm", "both"):
        report = check_insurmountability(buyer.valuation, dist, loaded.catalog)
        status = "PASS" if report.insurmountable else "FAIL"
        print(f"insurmountability: {status}")
        for violation in report.violations:
            print(
                f"  violated at {loaded.format_assortment(violation.assortment)}: "
                f"covered {format_value(violation.covered)} < revenue "
                f"{format_value(violation.revenue)}"
            )
        failed = failed or not report.insurmountable
    return 1 if failed else 0


_PROFILE_GROUP = re.compile(r"\(([^()]*)\)")


def parse_profile(text: str, loaded: LoadedInstance) -> tuple[tuple[int, ...], ...]:
    groups = _PROFILE_GROUP.findall(text)
    if not groups or len(groups) != loaded.auction.m:
        raise UsageError(
            f"profile must give {loaded.auction.m} parenthesized lists, got {text!r}"
        )
    profile = []
    for group in groups:
        tokens = [tok for tok in (t.strip() for t in group.split(",")) if tok]
        profile.append(tuple(loaded.resolve(tok) for tok in tokens))
    return tuple(profile)


def cmd_auction(args) -> int:
    loaded = load_instance(args.instance)
    auction = loaded.auction
    mechanism = "myersonian"
    if args.tables:
        mechanism = load_mechanism(args.tables, loaded)
    if args.profile is not None:
        profile = parse_profile(args.profile, loaded)
        if args.threshold is not None:
            if auction.m != 1:
                raise UsageError("--threshold stubs a competitor for single-buyer instances only")
            outcome = allocate_with_threshold(auction, profile, parse_rational(args.threshold))
        elif isinstance(mechanism, str):
            outcome = allocate(auction, profile)
        else:
            raise UsageError("--profile with --tables is not supported; use exact mode")
        for i, (buyer_outcome, lst) in enumerate(zip(outcome.buyers, profile)):
            t = buyer_outcome.threshold
            bound = format_value(t.boundary)
            tie = "ties win" if t.inclusive else "ties lose"
            print(
                f"buyer {i}: list {loaded.format_list(lst)}  score {format_value(buyer_outcome.value)}  "
                f"threshold {bound} ({tie})  offered {loaded.format_assortment(buyer_outcome.assortment)}  "
                f"gets {loaded.label_of(buyer_outcome.product) if buyer_outcome.product else 'nothing'}  "
                f"pays {format_value(buyer_outcome.payment)}"
            )
        for note in outcome.diagnostics:
            print(f"diagnostic: {note}")
        return 0
    if args.mode == "exact":
        try:
            revenue = expected_revenue_exact(auction, mechanism)
        except EnumerationCapError as exc:
            raise EnumerationCapError(f"{exc}; rerun with --mode simulate") from exc
        print(f"expected revenue: {format_value(revenue)}")
        if isinstance(mechanism, str):
            surplus = expected_virtual_surplus(auction)
            print(f"expected virtual surplus: {format_value(surplus)}")
        return 0
    result = simulate(auction, mechanism, samples=args.samples, seed=args.seed)
    print(
        f"simulated revenue: {result.mean:.6f} "
        f"(std error {result.std_error:.6f}, {result.samples} samples, seed {args.seed})"
    )
    return 0


def cmd_oracle(args) -> int:
    loaded = load_instance(args.instance)
    auction = loaded.auction
    result = optimal_mechanism(auction)
    scored = expected_revenue_exact(auction)
    print(f"optimal revenue: {format_value(result.revenue)}")
    print(f"scored-auction revenue: {format_value(scored)}")
    print(f"gap: {format_value(result.revenue - scored)}")
    print(f"optimal tables found: {result.optimum_count}")
    if args.export:
        save_mechanism(result.mechanism, args.export)
        print(f"exported taxation tables to {args.export}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assortment-auction",
        description="Exact assortment auctions: traces, frontiers, checks, and oracles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="summarize an instance file")
    p.add_argument("instance")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("procedure", help="greedy efficiency trace for a chain buyer")
    p.add_argument("instance")
    p.add_argument("--buyer", type=int, default=0)
    p.add_argument("--json", help="also write the trace as JSON")
    p.set_defaults(func=cmd_procedure)

    p = sub.add_parser("frontier", help="revenue frontier CSV for one buyer")
    p.add_argument("instance")
    p.add_argument("--buyer", type=int, default=0)
    p.add_argument("--csv", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("check", help="implementability / insurmountability checks")
    p.add_argument("instance")
    p.add_argument("--buyer", type=int, default=0)
    p.add_argument("--what", choices=["impl", "insurm", "both"], default="both")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("auction", help="run the scored auction or an explicit mechanism")
    p.add_argument("instance")
    p.add_argument("--mode", choices=["exact", "simulate"], default="exact")
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", help='single profile like "(C,B,A) (B)"')
    p.add_argument("--threshold", help="phantom competitor score for single-buyer what-ifs")
    p.add_argument("--tables", help="evaluate explicit taxation tables from this file")
    p.set_defaults(func=cmd_auction)

    p = sub.add_parser("oracle", help="exhaustive optimum on a tiny instance")
    p.add_argument("instance")
    p.add_argument("--export", help="write the optimal taxation tables here")
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (UsageError, InstanceFormatError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())
