"""Multi-buyer auction execution over winner-set feasibility constraints.

A buyer's report is scored by her virtual valuation mapping; the feasible
winner set with the largest score sum is served, with the lexicographically
smallest set breaking ties deterministically. Each buyer is then offered the
assortment attached to the smallest score that would still have won against
the others, so the allocation depends on her own report only through her
choice from that assortment, which makes the mechanism truthful by
construction.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .choice import (
    DEFAULT_SUPPORT_CAP,
    ExplicitListDistribution,
    MarkovChainModel,
    ProductCatalog,
    Ranking,
    choose,
    enumerate_support,
    sample_from_distribution,
    sample_list,
)
from .exact import NEG_INF, ONE, POS_INF, ZERO, EnumerationCapError, Value, is_finite
from .frontier import (
    VirtualValuationMapping,
    assortment_ladder,
    derive_assortment_ladder,
    efficiency_sequence,
    valuation_from_sequence,
)

DEFAULT_PROFILE_CAP = 10**7


@dataclass(frozen=True)
class FeasibleFamily:
    """Downward-closed family of permissible winner sets over buyers 0..m-1."""

    kind: str
    size: int
    limit: int | None = None
    sets: frozenset[frozenset[int]] | None = None

    @classmethod
    def single_winner(cls, size: int) -> "FeasibleFamily":
        return cls("single_winner", size)

    @classmethod
    def cardinality(cls, size: int, limit: int) -> "FeasibleFamily":
        if limit < 1:
            raise ValueError("cardinality bound must be positive")
        return cls("cardinality", size, limit=limit)

    @classmethod
    def explicit(cls, size: int, sets: Iterable[Iterable[int]]) -> "FeasibleFamily":
        members = {frozenset(int(i) for i in s) for s in sets}
        members.add(frozenset())
        for s in members:
            for i in s:
                if i < 0 or i >= size:
                    raise ValueError(f"buyer {i} outside 0..{size - 1}")
        for s in members:
            for i in s:
                if s - {i} not in members:
                    raise ValueError(
                        f"family is not downward-closed: {sorted(s - {i})} missing"
                    )
        return cls("explicit", size, sets=frozenset(members))

    def is_member(self, winners: frozenset[int]) -> bool:
        if any(i < 0 or i >= self.size for i in winners):
            return False
        if self.kind == "single_winner":
            return len(winners) <= 1
        if self.kind == "cardinality":
            return len(winners) <= self.limit
        return winners in self.sets

    def candidate_sets(self, allowed: Sequence[int]) -> Iterator[frozenset[int]]:
        """All feasible winner sets drawn from the allowed buyers."""
        allowed = sorted(allowed)
        if self.kind == "single_winner":
            yield frozenset()
            for i in allowed:
                yield frozenset({i})
        elif self.kind == "cardinality":
            for size in range(min(self.limit, len(allowed)) + 1):
                for combo in itertools.combinations(allowed, size):
                    yield frozenset(combo)
        else:
            pool = frozenset(allowed)
            for members in self.sets:
                if members <= pool:
                    yield members


def select_winners(
    values: Sequence[Value],
    family: FeasibleFamily,
) -> tuple[frozenset[int], Fraction]:
    """Feasible winner set maximizing the score sum, and that sum floored at 0.

    Buyers with non-positive or -inf scores never win: dropping them keeps
    feasibility (downward closure) without lowering the sum. Ties go to the
    lexicographically smallest sorted winner set.
    """
    if len(values) != family.size:
        raise ValueError("one score per buyer is required")
    positive = [i for i, v in enumerate(values) if is_finite(v) and v > 0]
    best_set = frozenset()
    best_sum: Fraction = ZERO
    for candidate in family.candidate_sets(positive):
        total = sum((values[i] for i in candidate), ZERO)
        if total > best_sum or (
            total == best_sum and sorted(candidate) < sorted(best_set)
        ):
            best_set, best_sum = candidate, total
    return best_set, best_sum


@dataclass(frozen=True)
class WinThreshold:
    """Smallest score with which a buyer joins the winner set.

    ``boundary`` 0 with ``inclusive`` False means any positive score wins
    (no effective competition); an infinite boundary means no score wins.
    """

    boundary: Value
    inclusive: bool

    def met_by(self, value: Value) -> bool:
        if not is_finite(value):
            return False
        if value > self.boundary:
            return True
        return self.inclusive and value == self.boundary


def win_threshold(
    values: Sequence[Value],
    buyer: int,
    family: FeasibleFamily,
) -> WinThreshold:
    """Threshold for one buyer given the other buyers' scores.

    Membership in the selected winner set is monotone in the buyer's own
    score, so the threshold is the exact boundary plus a flag saying whether
    a tie at the boundary still wins under the lexicographic tie-break.
    """
    others_positive = [
        i
        for i, v in enumerate(values)
        if i != buyer and is_finite(v) and v > 0
    ]
    best_without: Fraction = ZERO
    for candidate in family.candidate_sets(others_positive):
        total = sum((values[i] for i in candidate), ZERO)
        if total > best_without:
            best_without = total
    companion: Fraction | None = None
    for candidate in family.candidate_sets(others_positive + [buyer]):
        if buyer not in candidate:
            continue
        total = sum((values[i] for i in candidate if i != buyer), ZERO)
        if companion is None or total > companion:
            companion = total
    if companion is None:  # no feasible winner set ever contains this buyer
        return WinThreshold(POS_INF, False)
    boundary = best_without - companion
    if boundary <= 0:
        return WinThreshold(ZERO, False)
    probe = list(values)
    probe[buyer] = boundary
    winners, _ = select_winners(probe, family)
    return WinThreshold(boundary, buyer in winners)


@dataclass(frozen=True)
class Buyer:
    """One buyer: her list distribution, score mapping, and threshold assortments.

    ``ladder`` pairs assortments with weakly decreasing score levels; a buyer
    facing threshold t is offered the last rung whose level still meets t.
    Chain-backed buyers keep the chain for walk-based sampling.
    """

    distribution: ExplicitListDistribution | None
    valuation: VirtualValuationMapping | None
    ladder: tuple[tuple[frozenset[int], Value], ...] | None
    chain: MarkovChainModel | None = None

    def __post_init__(self):
        if self.ladder:
            levels = [level for _, level in self.ladder]
            for a, b in zip(levels, levels[1:]):
                if b > a:
                    raise ValueError("ladder levels must be weakly decreasing")

    @classmethod
    def from_chain(
        cls,
        model: MarkovChainModel,
        catalog: ProductCatalog,
        support_cap: int = DEFAULT_SUPPORT_CAP,
    ) -> "Buyer":
        seq = efficiency_sequence(model, catalog)
        dist = None
        if model.n <= support_cap:
            dist = enumerate_support(model, support_cap)
        return cls(dist, valuation_from_sequence(seq), assortment_ladder(seq), model)

    @classmethod
    def from_explicit(
        cls,
        dist: ExplicitListDistribution,
        valuation: VirtualValuationMapping | None = None,
        ladder: tuple[tuple[frozenset[int], Value], ...] | None = None,
        catalog: ProductCatalog | None = None,
    ) -> "Buyer":
        if valuation is not None and ladder is None:
            if catalog is None:
                raise ValueError("deriving a ladder needs the catalog")
            ladder = derive_assortment_ladder(valuation, dist, catalog)
        return cls(dist, valuation, ladder)

    def sample(self, rng) -> Ranking:
        if self.chain is not None:
            return sample_list(self.chain, rng)
        if self.distribution is None:
            raise ValueError("buyer has neither a chain nor an explicit distribution")
        return sample_from_distribution(self.distribution, rng)


@dataclass(frozen=True)
class AuctionInstance:
    catalog: ProductCatalog
    buyers: tuple[Buyer, ...]
    family: FeasibleFamily

    def __post_init__(self):
        if self.family.size != len(self.buyers):
            raise ValueError("feasible family sized for a different buyer count")

    @property
    def m(self) -> int:
        return len(self.buyers)


def offered_assortment(
    ladder: Sequence[tuple[frozenset[int], Value]],
    threshold: WinThreshold,
) -> frozenset[int]:
    """Last ladder rung whose level meets the threshold; empty if none."""
    offered: frozenset[int] = frozenset()
    for assortment, level in ladder:
        if threshold.met_by(level):
            offered = assortment
    return offered


@dataclass(frozen=True)
class BuyerOutcome:
    value: Value
    threshold: WinThreshold
    assortment: frozenset[int]
    product: int
    payment: Fraction


@dataclass(frozen=True)
class AllocationOutcome:
    buyers: tuple[BuyerOutcome, ...]
    winners: frozenset[int]
    purchasers: frozenset[int]
    surplus: Fraction
    diagnostics: tuple[str, ...]

    @property
    def revenue(self) -> Fraction:
        return sum((b.payment for b in self.buyers), ZERO)


def allocate(instance: AuctionInstance, profile: Sequence[Ranking]) -> AllocationOutcome:
    """Run the scored auction on one profile of reported lists.

    Winners are the score-sum maximizer; every buyer (winner or not) is
    offered the rung of her ladder matching the threshold induced by the
    others, and takes her most-preferred product from it. A winner who walks
    away empty-handed reveals a score mapping that is not implementable and
    is reported in the diagnostics rather than raising.
    """
    if len(profile) != instance.m:
        raise ValueError("profile length differs from buyer count")
    for buyer in instance.buyers:
        if buyer.valuation is None or buyer.ladder is None:
            raise ValueError("every buyer needs a score mapping and ladder")
    profile = tuple(tuple(lst) for lst in profile)
    values = [
        buyer.valuation.value_of(lst)
        for buyer, lst in zip(instance.buyers, profile)
    ]
    winners, surplus = select_winners(values, instance.family)
    outcomes = []
    diagnostics = []
    for i, (buyer, lst) in enumerate(zip(instance.buyers, profile)):
        threshold = win_threshold(values, i, instance.family)
        assortment = offered_assortment(buyer.ladder, threshold)
        product = choose(lst, assortment)
        outcomes.append(
            BuyerOutcome(values[i], threshold, assortment, product, instance.catalog.price(product))
        )
    purchasers = frozenset(i for i, out in enumerate(outcomes) if out.product != 0)
    for i in sorted(winners - purchasers):
        diagnostics.append(
            f"buyer {i} won with score {values[i]} but found nothing to buy"
            " (score mapping not implementable at this threshold)"
        )
    for i in sorted(purchasers - winners):
        diagnostics.append(f"buyer {i} purchased without being a selected winner")
    if not instance.family.is_member(purchasers):
        diagnostics.append(f"purchaser set {sorted(purchasers)} is not feasible")
    return AllocationOutcome(
        tuple(outcomes), winners, purchasers, surplus, tuple(diagnostics)
    )


def allocate_with_threshold(
    instance: AuctionInstance,
    profile: Sequence[Ranking],
    stub: Fraction,
) -> AllocationOutcome:
    """What-if allocation against a fixed phantom competitor score.

    Every buyer faces the same threshold (ties favour the buyer); used to
    script single-buyer scenarios without materializing a second buyer.
    """
    profile = tuple(tuple(lst) for lst in profile)
    threshold = WinThreshold(stub, True) if stub > 0 else WinThreshold(ZERO, False)
    outcomes = []
    for buyer, lst in zip(instance.buyers, profile):
        if buyer.valuation is None or buyer.ladder is None:
            raise ValueError("every buyer needs a score mapping and ladder")
        value = buyer.valuation.value_of(lst)
        assortment = offered_assortment(buyer.ladder, threshold)
        product = choose(lst, assortment)
        outcomes.append(
            BuyerOutcome(value, threshold, assortment, product, instance.catalog.price(product))
        )
    purchasers = frozenset(i for i, out in enumerate(outcomes) if out.product != 0)
    winners = frozenset(
        i for i, out in enumerate(outcomes) if threshold.met_by(out.value)
    )
    surplus = sum((out.value for i, out in enumerate(outcomes) if i in winners), ZERO)
    return AllocationOutcome(tuple(outcomes), winners, purchasers, surplus, ())


def profile_space(
    instance: AuctionInstance,
    cap: int = DEFAULT_PROFILE_CAP,
) -> Iterator[tuple[tuple[Ranking, ...], Fraction]]:
    """All list profiles with their exact probabilities."""
    supports = []
    total = 1
    for i, buyer in enumerate(instance.buyers):
        if buyer.distribution is None:
            raise EnumerationCapError(
                f"buyer {i} has no enumerable support; use simulation instead"
            )
        entries = tuple(buyer.distribution.items())
        supports.append(entries)
        total *= len(entries)
    if total > cap:
        raise EnumerationCapError(
            f"profile space of size {total} exceeds the cap {cap}; use simulation"
        )
    for combo in itertools.product(*supports):
        prob = ONE
        for _, p in combo:
            prob *= p
        yield tuple(lst for lst, _ in combo), prob


def expected_virtual_surplus(
    instance: AuctionInstance,
    cap: int = DEFAULT_PROFILE_CAP,
) -> Fraction:
    """Exact expectation of the best feasible winner-set score sum."""
    for buyer in instance.buyers:
        if buyer.valuation is None:
            raise ValueError("every buyer needs a score mapping")
    total = ZERO
    for profile, prob in profile_space(instance, cap):
        values = [
            buyer.valuation.value_of(lst)
            for buyer, lst in zip(instance.buyers, profile)
        ]
        _, surplus = select_winners(values, instance.family)
        total += prob * surplus
    return total


@dataclass(frozen=True)
class TaxationMechanism:
    """Explicit truthful mechanism: per buyer, context -> offered assortment.

    A context is the tuple of the other buyers' lists in buyer order. The
    induced allocation gives each buyer her most-preferred product from the
    assortment her context maps to.
    """

    tables: tuple[Mapping[tuple[Ranking, ...], frozenset[int]], ...]

    def context_of(self, buyer: int, profile: Sequence[Ranking]) -> tuple[Ranking, ...]:
        return tuple(profile[:buyer]) + tuple(profile[buyer + 1:])

    def assortment_for(self, buyer: int, profile: Sequence[Ranking]) -> frozenset[int]:
        context = self.context_of(buyer, profile)
        table = self.tables[buyer]
        if context not in table:
            raise KeyError(f"no assortment for buyer {buyer} in context {context}")
        return table[context]

    def allocation(self, profile: Sequence[Ranking]) -> tuple[int, ...]:
        return tuple(
            choose(lst, self.assortment_for(i, profile))
            for i, lst in enumerate(profile)
        )


def expected_revenue_exact(
    instance: AuctionInstance,
    mechanism: TaxationMechanism | str = "myersonian",
    cap: int = DEFAULT_PROFILE_CAP,
) -> Fraction:
    """Exact expected revenue of the scored auction or an explicit mechanism."""
    total = ZERO
    if isinstance(mechanism, TaxationMechanism):
        for profile, prob in profile_space(instance, cap):
            products = mechanism.allocation(profile)
            total += prob * sum((instance.catalog.price(j) for j in products), ZERO)
        return total
    if mechanism != "myersonian":
        raise ValueError(f"unknown mechanism {mechanism!r}")
    for profile, prob in profile_space(instance, cap):
        total += prob * allocate(instance, profile).revenue
    return total


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    std_error: float
    samples: int


def simulate(
    instance: AuctionInstance,
    mechanism: TaxationMechanism | str = "myersonian",
    samples: int = 10**5,
    seed: int = 0,
) -> SimulationResult:
    """Monte-Carlo expected revenue with IID profile draws.

    Chain-backed buyers are sampled by walking their chains; the draw stream
    is fully determined by the seed. Per-profile revenue is cached since the
    allocation is a pure function of the profile.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = random.Random(seed)
    cache: dict[tuple[Ranking, ...], float] = {}
    total = 0.0
    total_sq = 0.0
    for _ in range(samples):
        profile = tuple(buyer.sample(rng) for buyer in instance.buyers)
        revenue = cache.get(profile)
        if revenue is None:
            if isinstance(mechanism, TaxationMechanism):
                products = mechanism.allocation(profile)
                revenue = float(sum((instance.catalog.price(j) for j in products), ZERO))
            else:
                revenue = float(allocate(instance, profile).revenue)
            if len(cache) < 10**5:
                cache[profile] = revenue
        total += revenue
        total_sq += revenue * revenue
    mean = total / samples
    if samples == 1:
        return SimulationResult(mean, 0.0, samples)
    variance = max((total_sq - samples * mean * mean) / (samples - 1), 0.0)
    std_error = math.sqrt(variance / samples)
    return SimulationResult(mean, std_error, samples)
