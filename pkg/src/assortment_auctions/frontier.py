"""Revenue frontiers and virtual valuation mappings.

Two routes lead to a buyer's scores. For a Markov chain ranking model, a
greedy pass adds at each round the product with the highest ratio of
externality-adjusted price to the probability of escaping to no-purchase,
producing a nested sequence of assortments whose incremental efficiencies
are the scores. For an arbitrary explicit distribution, the revenue frontier
is computed by brute force over all assortments as the upper concave
envelope of (sale probability, revenue) points. Implementability and
insurmountability are the exact per-threshold and per-assortment conditions
linking a score mapping to achievable revenue.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .choice import (
    ExplicitListDistribution,
    MarkovChainModel,
    ProductCatalog,
    Ranking,
    choice_stats,
    choose,
    hit_probability,
)
from .exact import (
    NEG_INF,
    ZERO,
    EnumerationCapError,
    Value,
    is_finite,
    upper_concave_envelope,
)

DEFAULT_ASSORTMENT_CAP = 16


@dataclass(frozen=True)
class CandidateEvaluation:
    """One product considered during a greedy round."""

    product: int
    adjusted_price: Fraction
    escape_probability: Fraction
    efficiency: Fraction


@dataclass(frozen=True)
class ProcedureStep:
    """Outcome of one greedy round: chosen product, value, updated prices."""

    index: int
    chosen: int
    value: Fraction
    assortment: frozenset[int]
    candidates: tuple[CandidateEvaluation, ...]
    adjusted_prices: Mapping[int, Fraction]


@dataclass(frozen=True)
class DeadProduct:
    """Product whose escape probability hit zero before it was selected."""

    product: int
    final_price: Fraction
    died_at: int


@dataclass(frozen=True)
class EfficiencySequence:
    """Nested assortments with weakly decreasing incremental efficiencies."""

    initial_prices: Mapping[int, Fraction]
    steps: tuple[ProcedureStep, ...]
    dead: tuple[DeadProduct, ...]

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def products(self) -> tuple[int, ...]:
        return tuple(step.chosen for step in self.steps)

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(step.value for step in self.steps)

    def assortments(self) -> tuple[frozenset[int], ...]:
        """S(0) = empty through S(K), one per completed round."""
        return (frozenset(),) + tuple(step.assortment for step in self.steps)

    def adjusted_price(self, k: int, j: int) -> Fraction:
        """Externality-adjusted price of j after round k (k=0: original)."""
        if k == 0:
            return self.initial_prices[j]
        return self.steps[k - 1].adjusted_prices[j]


def efficiency_sequence(
    model: MarkovChainModel,
    catalog: ProductCatalog,
) -> EfficiencySequence:
    """Run the greedy selection until no product can still reach no-purchase.

    Each round ranks the remaining products by adjusted price divided by the
    probability of reaching node 0 ahead of the current assortment, selects
    the best (smallest id on ties), then discounts every remaining price by
    the cannibalization the new product inflicts on it.
    """
    prices: dict[int, Fraction] = {j: catalog.price(j) for j in catalog.products}
    initial = dict(prices)
    selected: frozenset[int] = frozenset()
    steps: list[ProcedureStep] = []
    died_at: dict[int, int] = {}
    k = 0
    while True:
        candidates = []
        for j in sorted(set(catalog.products) - selected):
            if j in died_at:
                continue
            escape = hit_probability(model, 0, selected, start=j)
            if escape == 0:
                died_at[j] = k
                continue
            candidates.append(
                CandidateEvaluation(j, prices[j], escape, prices[j] / escape)
            )
        if not candidates:
            break
        best = max(candidates, key=lambda c: (c.efficiency, -c.product))
        k += 1
        chosen = best.product
        chosen_price = prices[chosen]
        updated: dict[int, Fraction] = {}
        for j in sorted(prices):
            if j == chosen or j in selected:
                continue
            pull = hit_probability(model, chosen, selected | {0}, start=j)
            updated[j] = prices[j] - chosen_price * pull
        selected = selected | {chosen}
        steps.append(
            ProcedureStep(k, chosen, best.efficiency, selected, tuple(candidates), updated)
        )
        prices = updated
    dead = tuple(
        DeadProduct(j, prices[j], died_at[j]) for j in sorted(died_at)
    )
    return EfficiencySequence(initial, tuple(steps), dead)


@dataclass(frozen=True)
class VirtualValuationMapping:
    """Score per ranked list; unlisted non-empty lists and the empty list score -inf.

    Either an explicit table of list scores, or the rule attached to a greedy
    sequence: a list scores the value of the first sequence product it
    contains.
    """

    table: Mapping[Ranking, Value] | None = None
    sequence: tuple[tuple[int, Fraction], ...] | None = None

    def value_of(self, lst: Sequence[int]) -> Value:
        key = tuple(lst)
        if self.table is not None and key in self.table:
            return self.table[key]
        if self.sequence is not None:
            members = set(key)
            for product, value in self.sequence:
                if product in members:
                    return value
        return NEG_INF


def valuation_from_sequence(seq: EfficiencySequence) -> VirtualValuationMapping:
    return VirtualValuationMapping(
        sequence=tuple(zip(seq.products, seq.values))
    )


def assortment_ladder(seq: EfficiencySequence) -> tuple[tuple[frozenset[int], Fraction], ...]:
    """The nested assortments paired with their incremental efficiencies."""
    return tuple((step.assortment, step.value) for step in seq.steps)


@dataclass(frozen=True)
class FrontierPoint:
    sale_probability: Fraction
    revenue: Fraction
    assortments: tuple[frozenset[int], ...]
    left_slope: Fraction | None


@dataclass(frozen=True)
class RevenueFrontier:
    """Upper concave envelope of (sale probability, revenue) over assortments."""

    points: tuple[FrontierPoint, ...]

    @property
    def slopes(self) -> tuple[Fraction, ...]:
        return tuple(p.left_slope for p in self.points if p.left_slope is not None)

    def vertex_assortments(self) -> tuple[tuple[frozenset[int], ...], ...]:
        return tuple(p.assortments for p in self.points)


def all_assortments(n: int, cap: int = DEFAULT_ASSORTMENT_CAP) -> list[frozenset[int]]:
    """Every subset of products 1..n, smallest first, then lexicographic."""
    if n > cap:
        raise EnumerationCapError(
            f"assortment enumeration capped at {cap} products, asked for {n}"
        )
    subsets = []
    for mask in range(1 << n):
        subsets.append(frozenset(j + 1 for j in range(n) if mask >> j & 1))
    subsets.sort(key=lambda s: (len(s), sorted(s)))
    return subsets


def revenue_frontier(
    dist: ExplicitListDistribution,
    catalog: ProductCatalog,
    cap: int = DEFAULT_ASSORTMENT_CAP,
) -> RevenueFrontier:
    """Brute-force frontier: evaluate all assortments, keep envelope vertices.

    Each vertex records every assortment attaining it; slopes between
    consecutive vertices strictly decrease and the first vertex is (0, 0).
    """
    attaining: dict[tuple[Fraction, Fraction], list[frozenset[int]]] = {}
    for assortment in all_assortments(catalog.n, cap):
        stats = choice_stats(dist, catalog, assortment)
        attaining.setdefault((stats.sale_probability, stats.revenue), []).append(assortment)
    hull = upper_concave_envelope(attaining.keys())
    points = []
    previous: tuple[Fraction, Fraction] | None = None
    for q, r in hull:
        slope = None
        if previous is not None:
            slope = (r - previous[1]) / (q - previous[0])
        points.append(FrontierPoint(q, r, tuple(attaining[(q, r)]), slope))
        previous = (q, r)
    return RevenueFrontier(tuple(points))


def covered_value(
    vvm: VirtualValuationMapping,
    dist: ExplicitListDistribution,
    assortment: frozenset[int],
) -> Value:
    """Probability-weighted score mass of the lists that buy from the assortment."""
    total: Value = ZERO
    for lst, prob in dist.items():
        if choose(lst, assortment) == 0:
            continue
        value = vvm.value_of(lst)
        if not is_finite(value):
            return NEG_INF
        total += value * prob
    return total


@dataclass(frozen=True)
class ThresholdCheck:
    """Search result for one score threshold."""

    threshold: Fraction
    target: tuple[Ranking, ...]
    matching: tuple[frozenset[int], ...]
    witness: frozenset[int] | None
    covered: Value
    witness_revenue: Fraction | None
    reason: str | None

    @property
    def satisfied(self) -> bool:
        return self.witness is not None


@dataclass(frozen=True)
class ImplementabilityReport:
    implementable: bool
    checks: tuple[ThresholdCheck, ...]


def check_implementability(
    vvm: VirtualValuationMapping,
    dist: ExplicitListDistribution,
    catalog: ProductCatalog,
    cap: int = DEFAULT_ASSORTMENT_CAP,
) -> ImplementabilityReport:
    """For each threshold, search for an assortment selling to exactly the
    lists at or above it, with weighted score mass at most the revenue.

    Thresholds are the distinct finite scores on the support plus a sentinel
    above the maximum (whose target is empty and is witnessed by the empty
    assortment). Set equality is taken over the support.
    """
    assortments = all_assortments(catalog.n, cap)
    buyers_of: dict[frozenset[int], frozenset[Ranking]] = {}
    revenue_of: dict[frozenset[int], Fraction] = {}
    for assortment in assortments:
        stats = choice_stats(dist, catalog, assortment)
        buyers_of[assortment] = frozenset(
            lst for lst, _ in dist.items() if choose(lst, assortment) != 0
        )
        revenue_of[assortment] = stats.revenue
    by_target: dict[frozenset[Ranking], list[frozenset[int]]] = {}
    for assortment in assortments:
        by_target.setdefault(buyers_of[assortment], []).append(assortment)

    finite_scores = sorted(
        {vvm.value_of(lst) for lst in dist.support if is_finite(vvm.value_of(lst))},
        reverse=True,
    )
    thresholds: list[Fraction] = list(finite_scores)
    sentinel = (finite_scores[0] if finite_scores else ZERO) + 1
    thresholds.insert(0, sentinel)

    checks = []
    ok = True
    for w in thresholds:
        target = frozenset(
            lst
            for lst in dist.support
            if is_finite(vvm.value_of(lst)) and vvm.value_of(lst) >= w
        )
        matching = tuple(by_target.get(target, []))
        covered = sum(
            (vvm.value_of(lst) * dist.probability(lst) for lst in target), ZERO
        )
        witness = None
        reason = None
        for assortment in matching:
            if covered <= revenue_of[assortment]:
                witness = assortment
                break
        if witness is None:
            ok = False
            reason = "no assortment sells to exactly these lists" if not matching else (
                "every matching assortment earns less than the covered score mass"
            )
        checks.append(
            ThresholdCheck(
                w,
                tuple(sorted(target, key=lambda l: (len(l), l))),
                matching,
                witness,
                covered,
                revenue_of[witness] if witness is not None else None,
                reason,
            )
        )
    return ImplementabilityReport(ok, tuple(checks))


@dataclass(frozen=True)
class InsurmountabilityViolation:
    assortment: frozenset[int]
    covered: Value
    revenue: Fraction


@dataclass(frozen=True)
class InsurmountabilityReport:
    insurmountable: bool
    violations: tuple[InsurmountabilityViolation, ...]


def check_insurmountability(
    vvm: VirtualValuationMapping,
    dist: ExplicitListDistribution,
    catalog: ProductCatalog,
    cap: int = DEFAULT_ASSORTMENT_CAP,
) -> InsurmountabilityReport:
    """Check that no assortment's revenue exceeds its covered score mass.

    Scans all assortments; returns every violator with both side values.
    """
    violations = []
    for assortment in all_assortments(catalog.n, cap):
        revenue = choice_stats(dist, catalog, assortment).revenue
        covered = covered_value(vvm, dist, assortment)
        if not is_finite(covered) or covered < revenue:
            violations.append(InsurmountabilityViolation(assortment, covered, revenue))
    return InsurmountabilityReport(not violations, tuple(violations))


def derive_assortment_ladder(
    vvm: VirtualValuationMapping,
    dist: ExplicitListDistribution,
    catalog: ProductCatalog,
    cap: int = DEFAULT_ASSORTMENT_CAP,
) -> tuple[tuple[frozenset[int], Value], ...]:
    """Threshold assortments for an explicit buyer, from best score downward.

    For each finite score on the support, picks the implementability witness
    when one exists, otherwise any assortment selling to exactly the target
    lists; thresholds with no matching assortment are skipped.
    """
    report = check_implementability(vvm, dist, catalog, cap)
    ladder = []
    for check in report.checks[1:]:  # drop the empty-target sentinel
        assortment = check.witness
        if assortment is None and check.matching:
            assortment = check.matching[0]
        if assortment is None:
            continue
        ladder.append((assortment, check.threshold))
    return tuple(ladder)
