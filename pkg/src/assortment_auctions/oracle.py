"""Brute-force ground truth for tiny instances.

Enumerates every deterministic truthful feasible mechanism in taxation form
(per buyer, a map from the others' reports to an offered assortment) to find
the exact revenue optimum. The key reduction is per-buyer assortment
equivalence: two assortments are interchangeable when they induce the same
choice on every support list, which collapses the 2^n raw tables to a
handful of classes. Also computes classical ironed virtual valuations for
price-sorted-prefix (buy-down) buyers, for cross-checking against the chain
procedure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .auction import (
    AuctionInstance,
    FeasibleFamily,
    TaxationMechanism,
    WinThreshold,
    profile_space,
    select_winners,
    win_threshold,
)
from .choice import ProductCatalog, Ranking, choose
from .exact import ONE, ZERO, EnumerationCapError, Value, parse_rational, upper_concave_envelope
from .frontier import all_assortments

CAP_BUYERS = 3
CAP_SUPPORT = 6
CAP_PRODUCTS = 6


@dataclass(frozen=True)
class AssortmentClass:
    """Equivalence class of assortments inducing one choice vector."""

    assortment: frozenset[int]
    choices: tuple[int, ...]
    buys: tuple[bool, ...]
    expected_revenue: Fraction


def assortment_classes(
    support: Sequence[Ranking],
    probs: Sequence[Fraction],
    catalog: ProductCatalog,
) -> list[AssortmentClass]:
    """Distinct choice behaviours over the support, canonical assortment each."""
    classes: dict[tuple[int, ...], AssortmentClass] = {}
    for assortment in all_assortments(catalog.n):
        choices = tuple(choose(lst, assortment) for lst in support)
        if choices in classes:
            continue
        revenue = sum(
            (p * catalog.price(j) for p, j in zip(probs, choices)), ZERO
        )
        classes[choices] = AssortmentClass(
            assortment, choices, tuple(j != 0 for j in choices), revenue
        )
    return list(classes.values())


@dataclass(frozen=True)
class OracleResult:
    mechanism: TaxationMechanism
    revenue: Fraction
    optimum_count: int


def _check_caps(instance: AuctionInstance) -> list[tuple[tuple[Ranking, ...], tuple[Fraction, ...]]]:
    if instance.m > CAP_BUYERS:
        raise EnumerationCapError(f"oracle handles at most {CAP_BUYERS} buyers")
    if instance.catalog.n > CAP_PRODUCTS:
        raise EnumerationCapError(f"oracle handles at most {CAP_PRODUCTS} products")
    supports = []
    for i, buyer in enumerate(instance.buyers):
        if buyer.distribution is None:
            raise EnumerationCapError(f"buyer {i} has no enumerable support")
        lists = buyer.distribution.support
        if len(lists) > CAP_SUPPORT:
            raise EnumerationCapError(
                f"buyer {i} support of {len(lists)} exceeds the cap {CAP_SUPPORT}"
            )
        probs = tuple(buyer.distribution.probability(lst) for lst in lists)
        supports.append((lists, probs))
    return supports


def optimal_mechanism(instance: AuctionInstance) -> OracleResult:
    """Exact revenue optimum over all feasible truthful mechanisms.

    One buyer reduces to picking the best single assortment class. With two
    buyers, buyer 0's table is enumerated over class signatures and buyer 1's
    table is then optimized context by context, which is exact because
    feasibility couples the buyers only within a profile. Three buyers run a
    depth-first search over table cells with upper-bound pruning. Reported
    alongside the optimum: the number of optimal class-level tables.
    """
    supports = _check_caps(instance)
    if instance.m == 0:
        return OracleResult(TaxationMechanism(()), ZERO, 1)
    if instance.m == 1:
        return _optimal_single(instance, supports)
    if instance.m == 2:
        return _optimal_pair(instance, supports)
    return _optimal_search(instance, supports)


def _optimal_single(instance, supports) -> OracleResult:
    lists, probs = supports[0]
    feasible_alone = instance.family.is_member(frozenset({0}))
    best = None
    count = 0
    for rep in assortment_classes(lists, probs, instance.catalog):
        if not feasible_alone and any(rep.buys):
            continue
        if best is None or rep.expected_revenue > best.expected_revenue:
            best, count = rep, 1
        elif rep.expected_revenue == best.expected_revenue:
            count += 1
    mech = TaxationMechanism(({(): best.assortment},))
    return OracleResult(mech, best.expected_revenue, count)


def _optimal_pair(instance, supports) -> OracleResult:
    (lists_a, probs_a), (lists_b, probs_b) = supports
    catalog = instance.catalog
    reps_a = assortment_classes(lists_a, probs_a, catalog)
    reps_b = assortment_classes(lists_b, probs_b, catalog)
    family = instance.family
    pair_ok = family.is_member(frozenset({0, 1}))
    a_ok = family.is_member(frozenset({0}))
    b_ok = family.is_member(frozenset({1}))
    nb = len(lists_b)
    full_b = (1 << nb) - 1

    # buyer 0's cell only matters through its buys vector and expected revenue
    signatures: dict[tuple[bool, ...], list[int]] = {}
    for idx, rep in enumerate(reps_a):
        signatures.setdefault(rep.buys, []).append(idx)
    sig_list = []
    for buys, indices in signatures.items():
        best_value = max(reps_a[i].expected_revenue for i in indices)
        achieving = [i for i in indices if reps_a[i].expected_revenue == best_value]
        sig_list.append((buys, best_value, len(achieving), min(achieving)))
    sig_list.sort(key=lambda item: item[3])
    max_cell_a = max(item[1] for item in sig_list)

    def feasible_b(rep_mask: int, mask: int) -> bool:
        if not pair_ok and (mask & rep_mask):
            return False
        if not a_ok and (mask & ~rep_mask & full_b):
            return False
        if not b_ok and (rep_mask & ~mask & full_b):
            return False
        return True

    rep_b_masks = [
        sum(1 << t for t, buys in enumerate(rep.buys) if buys) for rep in reps_b
    ]
    best_b: list[tuple[Fraction, int, int] | None] = []
    for mask in range(1 << nb):
        best_val = None
        best_idx = None
        ties = 0
        for idx, rep in enumerate(reps_b):
            if not feasible_b(rep_b_masks[idx], mask):
                continue
            if best_val is None or rep.expected_revenue > best_val:
                best_val, best_idx, ties = rep.expected_revenue, idx, 1
            elif rep.expected_revenue == best_val:
                ties += 1
        best_b.append(None if best_val is None else (best_val, best_idx, ties))
    max_best_b = max((entry[0] for entry in best_b if entry), default=ZERO)
    monotone_b = b_ok  # masks only grow; with {1} feasible, best_b never improves

    na = len(lists_a)
    state = {"best": None, "count": 0, "tables": None}
    cells = [None] * nb
    masks = [0] * na

    def bound(t: int, rev_a: Fraction) -> Fraction:
        remaining = sum((probs_b[s] for s in range(t, nb)), ZERO) * max_cell_a
        if monotone_b:
            side = ZERO
            for u in range(na):
                entry = best_b[masks[u]]
                if entry is None:
                    return None
                side += probs_a[u] * entry[0]
        else:
            side = sum(probs_a, ZERO) * max_best_b
        return rev_a + remaining + side

    def dfs(t: int, rev_a: Fraction):
        if t == nb:
            total = rev_a
            choices_b = []
            for u in range(na):
                entry = best_b[masks[u]]
                if entry is None:
                    return
                total += probs_a[u] * entry[0]
                choices_b.append(entry)
            if state["best"] is not None and total < state["best"]:
                return
            leaf_count = 1
            for sig in cells:
                leaf_count *= sig[2]
            for entry in choices_b:
                leaf_count *= entry[2]
            if state["best"] is None or total > state["best"]:
                state["best"] = total
                state["count"] = leaf_count
                state["tables"] = (
                    [reps_a[sig[3]].assortment for sig in cells],
                    [reps_b[entry[1]].assortment for entry in choices_b],
                )
            else:
                state["count"] += leaf_count
            return
        if state["best"] is not None:
            b = bound(t, rev_a)
            if b is None or b < state["best"]:
                return
        for sig in sig_list:
            buys, value, _, _ = sig
            cells[t] = sig
            bit = 1 << t
            for u in range(na):
                if buys[u]:
                    masks[u] |= bit
            dfs(t + 1, rev_a + probs_b[t] * value)
            for u in range(na):
                if buys[u]:
                    masks[u] &= ~bit
        cells[t] = None

    dfs(0, ZERO)
    if state["tables"] is None:
        raise ArithmeticError("no feasible mechanism found, which cannot happen")
    table_a = {(lists_b[t],): state["tables"][0][t] for t in range(nb)}
    table_b = {(lists_a[u],): state["tables"][1][u] for u in range(na)}
    return OracleResult(
        TaxationMechanism((table_a, table_b)), state["best"], state["count"]
    )


def _optimal_search(instance, supports) -> OracleResult:
    """Depth-first search over all table cells for three buyers."""
    catalog = instance.catalog
    family = instance.family
    m = instance.m
    reps = [
        assortment_classes(lists, probs, catalog) for lists, probs in supports
    ]
    contexts = []
    for i in range(m):
        other_sizes = [len(supports[k][0]) for k in range(m) if k != i]
        contexts.append(list(itertools.product(*[range(s) for s in other_sizes])))
    cells = [(i, ctx) for i in range(m) for ctx in contexts[i]]

    def context_prob(i: int, ctx) -> Fraction:
        prob = ONE
        others = [k for k in range(m) if k != i]
        for slot, k in enumerate(others):
            prob *= supports[k][1][ctx[slot]]
        return prob

    cell_probs = [context_prob(i, ctx) for i, ctx in cells]
    cell_max = [
        max(rep.expected_revenue for rep in reps[i]) * cell_probs[idx]
        for idx, (i, ctx) in enumerate(cells)
    ]
    suffix_max = [ZERO] * (len(cells) + 1)
    for idx in range(len(cells) - 1, -1, -1):
        suffix_max[idx] = suffix_max[idx + 1] + cell_max[idx]

    profiles = list(itertools.product(*[range(len(s[0])) for s in supports]))
    profile_index = {p: idx for idx, p in enumerate(profiles)}

    def cell_profiles(i: int, ctx) -> list[tuple[int, int]]:
        """Profiles touching the cell, with the buyer's own list index."""
        others = [k for k in range(m) if k != i]
        out = []
        for own in range(len(supports[i][0])):
            profile = [0] * m
            profile[i] = own
            for slot, k in enumerate(others):
                profile[k] = ctx[slot]
            out.append((profile_index[tuple(profile)], own))
        return out

    touching = [cell_profiles(i, ctx) for i, ctx in cells]
    winners = [frozenset() for _ in profiles]
    state = {"best": None, "count": 0, "assignment": None}
    assignment = [None] * len(cells)

    def dfs(idx: int, revenue: Fraction):
        if idx == len(cells):
            if state["best"] is None or revenue > state["best"]:
                state["best"] = revenue
                state["count"] = 1
                state["assignment"] = list(assignment)
            elif revenue == state["best"]:
                state["count"] += 1
            return
        if state["best"] is not None and revenue + suffix_max[idx] < state["best"]:
            return
        i, _ = cells[idx]
        for rep_idx, rep in enumerate(reps[i]):
            changed = []
            feasible = True
            for p_idx, own in touching[idx]:
                if rep.buys[own]:
                    updated = winners[p_idx] | {i}
                    if not family.is_member(updated):
                        feasible = False
                        break
                    changed.append((p_idx, winners[p_idx]))
                    winners[p_idx] = updated
            if feasible:
                assignment[idx] = rep_idx
                dfs(idx + 1, revenue + cell_probs[idx] * rep.expected_revenue)
                assignment[idx] = None
            for p_idx, previous in changed:
                winners[p_idx] = previous

    dfs(0, ZERO)
    if state["assignment"] is None:
        raise ArithmeticError("no feasible mechanism found, which cannot happen")
    tables = []
    for i in range(m):
        table = {}
        for idx, (owner, ctx) in enumerate(cells):
            if owner != i:
                continue
            others = [k for k in range(m) if k != i]
            key = tuple(supports[k][0][ctx[slot]] for slot, k in enumerate(others))
            table[key] = reps[i][state["assignment"][idx]].assortment
        tables.append(table)
    return OracleResult(TaxationMechanism(tuple(tables)), state["best"], state["count"])


@dataclass(frozen=True)
class MechanismReport:
    feasible: bool
    revenue: Fraction
    infeasible_profiles: tuple[tuple[Ranking, ...], ...]
    profile_winners: tuple[tuple[tuple[Ranking, ...], frozenset[int]], ...]


def verify_mechanism(
    instance: AuctionInstance,
    mechanism: TaxationMechanism,
) -> MechanismReport:
    """Evaluate an explicit mechanism profile by profile.

    Truthfulness is structural (taxation form); what remains to check is that
    every realizable profile yields a feasible winner set. Returns the exact
    expected revenue either way.
    """
    revenue = ZERO
    infeasible = []
    winners_log = []
    for profile, prob in profile_space(instance):
        products = mechanism.allocation(profile)
        winners = frozenset(i for i, j in enumerate(products) if j != 0)
        winners_log.append((profile, winners))
        if not instance.family.is_member(winners):
            infeasible.append(profile)
        revenue += prob * sum((instance.catalog.price(j) for j in products), ZERO)
    return MechanismReport(
        not infeasible, revenue, tuple(infeasible), tuple(winners_log)
    )


@dataclass(frozen=True)
class IronedValuation:
    """Ironed virtual value per valuation level, with the envelope behind it.

    ``values[j]`` is the left slope of the sale-probability/revenue envelope
    at the quantile of price j; level 0 (no purchase) is pinned to 0. Levels
    that can never be reached (zero tail mass) carry no entry.
    """

    values: Mapping[int, Fraction]
    envelope: tuple[tuple[Fraction, Fraction], ...]

    def value_of(self, level: int) -> Fraction:
        return self.values[level]


def ironed_values(pmf: Mapping[int, object], catalog: ProductCatalog) -> IronedValuation:
    """Ironed virtual valuations of a discrete valuation distribution.

    Plots (tail probability at price j, price times tail) per level, takes
    the upper concave envelope, and reads each level's value off the left
    slope at its tail quantile.
    """
    n = catalog.n
    mass = [ZERO] * (n + 1)
    for key, raw in pmf.items():
        j = int(key)
        if j < 0 or j > n:
            raise ValueError(f"valuation level {j} outside 0..{n}")
        mass[j] = parse_rational(raw)
    if any(p < 0 for p in mass):
        raise ValueError("negative valuation probability")
    if sum(mass, ZERO) != 1:
        raise ValueError("valuation pmf must sum to exactly 1")
    tails = [ZERO] * (n + 2)
    for j in range(n, 0, -1):
        tails[j] = tails[j + 1] + mass[j]
    points = [(ZERO, ZERO)]
    for j in range(1, n + 1):
        if tails[j] > 0:
            points.append((tails[j], catalog.price(j) * tails[j]))
    envelope = tuple(upper_concave_envelope(points))
    values: dict[int, Fraction] = {0: ZERO}
    for j in range(1, n + 1):
        q = tails[j]
        if q == 0:
            continue
        for (x0, y0), (x1, y1) in zip(envelope, envelope[1:]):
            if x0 < q <= x1:
                values[j] = (y1 - y0) / (x1 - x0)
                break
    return IronedValuation(values, envelope)


def classical_buydown_auction(
    ironed: Sequence[IronedValuation],
    valuations: Sequence[int],
    catalog: ProductCatalog,
    family: FeasibleFamily,
) -> tuple[tuple[int, Fraction], ...]:
    """Classical virtual-value auction on reported valuation levels.

    Each buyer scores the ironed value of her level; the winning scorer set
    is served, and a winner pays the smallest price whose ironed value would
    still have won. Shares the tie-break machinery of the assortment
    executor so the two sides are comparable profile by profile.
    """
    values: list[Value] = [
        ironed[i].values[level] for i, level in enumerate(valuations)
    ]
    winners, _ = select_winners(values, family)
    outcome = []
    for i, level in enumerate(valuations):
        if i not in winners:
            outcome.append((0, ZERO))
            continue
        threshold = win_threshold(values, i, family)
        product = 0
        for j in range(1, catalog.n + 1):
            phi = ironed[i].values.get(j)
            if phi is not None and threshold.met_by(phi):
                product = j
                break
        if product == 0:
            raise ArithmeticError("winner has no price clearing her own threshold")
        outcome.append((product, catalog.price(product)))
    return tuple(outcome)
