"""Products, ranked lists, and the distributions that generate them.

A buyer's type is a ranked list of distinct products she would accept, most
preferred first; product 0 is the always-available no-purchase option and
never appears on a list. Distributions over lists come in two forms: an
explicit finite support, or a Markov chain over the product nodes whose walk
records first visits until it dies at node 0. All probabilities are exact
rationals; hitting probabilities are computed by solving the absorbing-chain
linear system over Fractions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .exact import (
    ONE,
    ZERO,
    EnumerationCapError,
    parse_rational,
    solve_linear_system,
)

#: A ranked list: distinct product ids from 1..n, most preferred first.
Ranking = tuple[int, ...]

DEFAULT_SUPPORT_CAP = 10


@dataclass(frozen=True)
class ProductCatalog:
    """Fixed prices for products 1..n; product 0 implicitly costs 0."""

    prices: tuple[Fraction, ...]

    def __post_init__(self):
        for j, price in enumerate(self.prices, start=1):
            if price < 0:
                raise ValueError(f"price of product {j} is negative: {price}")

    @classmethod
    def of(cls, *prices) -> "ProductCatalog":
        return cls(tuple(parse_rational(p) for p in prices))

    @property
    def n(self) -> int:
        return len(self.prices)

    @property
    def products(self) -> range:
        return range(1, self.n + 1)

    def price(self, j: int) -> Fraction:
        if j == 0:
            return ZERO
        return self.prices[j - 1]


def validate_ranking(lst: Sequence[int], n: int | None = None) -> Ranking:
    """Check a ranked list: distinct product ids, no 0, optionally within 1..n."""
    ranking = tuple(int(j) for j in lst)
    if len(set(ranking)) != len(ranking):
        raise ValueError(f"ranked list has duplicates: {ranking}")
    for j in ranking:
        if j < 1 or (n is not None and j > n):
            raise ValueError(f"invalid product id {j} in ranked list {ranking}")
    return ranking


def rank(lst: Ranking, j: int) -> float:
    """1-based position of j in the list; len+1 for j=0; +inf if absent."""
    if j == 0:
        return len(lst) + 1
    try:
        return lst.index(j) + 1
    except ValueError:
        return float("inf")


def choose(lst: Ranking, assortment: Iterable[int]) -> int:
    """Most-preferred product of ``lst`` inside the assortment, else 0."""
    members = assortment if isinstance(assortment, (set, frozenset)) else set(assortment)
    for j in lst:
        if j in members:
            return j
    return 0


@dataclass(frozen=True)
class ExplicitListDistribution:
    """Finite-support distribution over ranked lists, probabilities summing to 1."""

    entries: tuple[tuple[Ranking, Fraction], ...]

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[tuple[Sequence[int], Fraction]],
        n: int | None = None,
    ) -> "ExplicitListDistribution":
        """Build from (list, probability) pairs, merging duplicate lists."""
        merged: dict[Ranking, Fraction] = {}
        for raw_list, raw_prob in pairs:
            lst = validate_ranking(raw_list, n)
            prob = parse_rational(raw_prob)
            merged[lst] = merged.get(lst, ZERO) + prob
        total = ZERO
        for lst, prob in merged.items():
            if prob <= 0:
                raise ValueError(f"non-positive probability {prob} for list {lst}")
            total += prob
        if total != 1:
            raise ValueError(f"list probabilities sum to {total}, expected 1")
        entries = tuple(sorted(merged.items(), key=lambda kv: (len(kv[0]), kv[0])))
        return cls(entries)

    @property
    def support(self) -> tuple[Ranking, ...]:
        return tuple(lst for lst, _ in self.entries)

    def probability(self, lst: Sequence[int]) -> Fraction:
        key = tuple(lst)
        for entry, prob in self.entries:
            if entry == key:
                return prob
        return ZERO

    def items(self) -> Iterator[tuple[Ranking, Fraction]]:
        return iter(self.entries)

    def max_product(self) -> int:
        return max((max(lst) for lst, _ in self.entries if lst), default=0)


@dataclass(frozen=True)
class ChoiceStats:
    """Per-product choice probabilities and revenue for one assortment."""

    chosen: dict[int, Fraction]
    sale_probability: Fraction
    revenue: Fraction
    no_purchase: Fraction


def choice_stats(
    dist: ExplicitListDistribution,
    catalog: ProductCatalog,
    assortment: Iterable[int],
) -> ChoiceStats:
    members = frozenset(assortment)
    chosen = {j: ZERO for j in sorted(members)}
    no_purchase = ZERO
    for lst, prob in dist.items():
        j = choose(lst, members)
        if j == 0:
            no_purchase += prob
        else:
            chosen[j] += prob
    sale = sum(chosen.values(), ZERO)
    revenue = sum((catalog.price(j) * q for j, q in chosen.items()), ZERO)
    return ChoiceStats(chosen, sale, revenue, no_purchase)


@dataclass(frozen=True)
class MarkovChainModel:
    """Ranking distribution generated by a terminating random walk.

    ``arrival[j]`` is the probability the walk starts at node j (0..n);
    ``rows[j-1][k]`` is the transition probability from node j to node k.
    Node 0 is terminal. The walk must reach node 0 with probability 1, which
    holds exactly when every node has a positive-probability path to 0.
    """

    arrival: tuple[Fraction, ...]
    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        n = len(self.rows)
        if len(self.arrival) != n + 1:
            raise ValueError("arrival vector must cover nodes 0..n")
        if any(p < 0 for p in self.arrival):
            raise ValueError("negative arrival probability")
        if sum(self.arrival, ZERO) != 1:
            raise ValueError("arrival probabilities must sum to exactly 1")
        for j, row in enumerate(self.rows, start=1):
            if len(row) != n + 1:
                raise ValueError(f"transition row of node {j} must cover nodes 0..n")
            if any(p < 0 for p in row):
                raise ValueError(f"negative transition probability out of node {j}")
            if sum(row, ZERO) != 1:
                raise ValueError(f"transitions out of node {j} must sum to exactly 1")
        # every node must reach 0, otherwise the walk can live forever
        reaching = {0}
        grew = True
        while grew:
            grew = False
            for j in range(1, n + 1):
                if j in reaching:
                    continue
                if any(self.rows[j - 1][k] > 0 for k in reaching):
                    reaching.add(j)
                    grew = True
        missing = [j for j in range(1, n + 1) if j not in reaching]
        if missing:
            raise ValueError(f"nodes {missing} cannot reach the terminal node 0")

    @property
    def n(self) -> int:
        return len(self.rows)

    def transition(self, j: int, k: int) -> Fraction:
        return self.rows[j - 1][k]

    @classmethod
    def create(
        cls,
        n: int,
        arrival: Mapping[int, object],
        transitions: Mapping[int, Mapping[int, object]],
    ) -> "MarkovChainModel":
        """Build from sparse maps; omitted entries are zero."""
        lam = [ZERO] * (n + 1)
        for node, prob in arrival.items():
            lam[int(node)] = parse_rational(prob)
        rows = []
        for j in range(1, n + 1):
            row = [ZERO] * (n + 1)
            for node, prob in transitions.get(j, {}).items():
                row[int(node)] = parse_rational(prob)
            rows.append(tuple(row))
        return cls(tuple(lam), tuple(rows))


def first_hit_probabilities(
    model: MarkovChainModel,
    absorbing: Iterable[int],
    start: int | None = None,
) -> dict[int, Fraction]:
    """Probability of first reaching each absorbing node before the others.

    Node 0 always absorbs (the walk dies there). ``start`` is a node id, or
    None to start from the arrival distribution. Nodes outside the absorbing
    set may be walked through freely. The returned probabilities sum to 1.
    """
    n = model.n
    targets = {int(a) for a in absorbing} | {0}
    for t in targets:
        if t < 0 or t > n:
            raise ValueError(f"node {t} outside 0..{n}")
    free = [j for j in range(1, n + 1) if j not in targets]
    ordered_targets = sorted(targets)
    hit: dict[int, dict[int, Fraction]] = {}
    if free:
        index = {j: i for i, j in enumerate(free)}
        matrix = []
        rhs = []
        for j in free:
            row = [-model.transition(j, k) for k in free]
            row[index[j]] += ONE
            matrix.append(row)
            rhs.append([model.transition(j, c) for c in ordered_targets])
        try:
            solution = solve_linear_system(matrix, rhs)
        except ValueError as exc:  # impossible for a valid terminating chain
            raise ArithmeticError("absorbing-chain system is singular") from exc
        hit = {j: dict(zip(ordered_targets, solution[index[j]])) for j in free}
    if start is not None:
        if start < 0 or start > n:
            raise ValueError(f"start node {start} outside 0..{n}")
        if start in targets:
            return {c: (ONE if c == start else ZERO) for c in ordered_targets}
        return dict(hit[start])
    result = {}
    for c in ordered_targets:
        total = model.arrival[c]
        for j in free:
            if model.arrival[j] != 0:
                total += model.arrival[j] * hit[j][c]
        result[c] = total
    return result


def hit_probability(
    model: MarkovChainModel,
    target: int,
    avoid: Iterable[int],
    start: int | None = None,
) -> Fraction:
    """Probability that ``target`` is visited before any node in ``avoid``.

    When ``start`` is None the walk begins from the arrival distribution,
    otherwise from the given node, which must lie outside avoid + target.
    If the walk dies at node 0 first (and 0 is not the target), the event
    fails.
    """
    avoid_set = {int(a) for a in avoid}
    if target in avoid_set:
        raise ValueError(f"target {target} is also an avoided node")
    if start is not None and (start in avoid_set or start == target):
        raise ValueError(f"start node {start} must avoid targets and avoided nodes")
    return first_hit_probabilities(model, avoid_set | {target}, start)[target]


def ordered_hit_probability(
    model: MarkovChainModel,
    first: int,
    then: int,
    avoid: Iterable[int],
    start: int | None = None,
) -> Fraction:
    """Probability that ``first`` is visited, then ``then``, before ``avoid``.

    Decomposes by memorylessness into reaching ``first`` ahead of everything
    else, times reaching ``then`` from ``first``.
    """
    avoid_set = {int(a) for a in avoid}
    if first == 0:
        raise ValueError("the first node must be a product node, not 0")
    if first == then or first in avoid_set or then in avoid_set:
        raise ValueError("first, then, and avoid must be pairwise disjoint")
    reach_first = hit_probability(model, first, avoid_set | {then}, start)
    if reach_first == 0:
        return ZERO
    return reach_first * hit_probability(model, then, avoid_set, start=first)


def list_probability(model: MarkovChainModel, lst: Sequence[int]) -> Fraction:
    """Exact probability that the walk generates exactly this ranked list.

    The walk must enter the list's nodes in order as its successive first
    visits among unvisited nodes, then reach 0 before any remaining product.
    """
    ranking = validate_ranking(lst, model.n)
    prob = ONE
    visited: set[int] = set()
    position: int | None = None
    for nxt in (*ranking, 0):
        unvisited = set(range(model.n + 1)) - visited
        step = first_hit_probabilities(model, unvisited, position)[nxt]
        if step == 0:
            return ZERO
        prob *= step
        visited.add(nxt)
        position = nxt
    return prob


def enumerate_support(
    model: MarkovChainModel,
    max_products: int = DEFAULT_SUPPORT_CAP,
) -> ExplicitListDistribution:
    """All positive-probability lists of the chain, with exact probabilities.

    Depth-first over prefixes; each prefix's continuation probabilities come
    from one absorbing-chain solve, so the result sums to exactly 1.
    """
    if model.n > max_products:
        raise EnumerationCapError(
            f"support enumeration capped at {max_products} products, chain has {model.n}"
        )
    entries: list[tuple[Ranking, Fraction]] = []

    def extend(prefix: tuple[int, ...], prob: Fraction, visited: frozenset[int]):
        unvisited = set(range(model.n + 1)) - visited
        continuation = first_hit_probabilities(model, unvisited, prefix[-1])
        for node in sorted(continuation):
            step = continuation[node]
            if step == 0:
                continue
            if node == 0:
                entries.append((prefix, prob * step))
            else:
                extend(prefix + (node,), prob * step, visited | {node})

    for j in range(model.n + 1):
        lam = model.arrival[j]
        if lam == 0:
            continue
        if j == 0:
            entries.append(((), lam))
        else:
            extend((j,), lam, frozenset({j}))
    return ExplicitListDistribution.from_pairs(entries, model.n)


def from_mnl(weights: Sequence[object]) -> MarkovChainModel:
    """Chain whose choice behaviour matches the multinomial-logit model.

    ``weights[0]`` is the no-purchase weight, ``weights[j]`` the weight of
    product j; all must be positive. Arrivals are proportional to weights and
    each node redistributes the remaining weight mass over the other nodes,
    which reproduces w_j / (w_0 + sum of offered weights) choice odds.
    """
    parsed = [parse_rational(w) for w in weights]
    if any(w <= 0 for w in parsed):
        raise ValueError("all MNL weights must be positive")
    total = sum(parsed, ZERO)
    n = len(parsed) - 1
    arrival = tuple(w / total for w in parsed)
    rows = []
    for j in range(1, n + 1):
        rest = total - parsed[j]
        rows.append(
            tuple(
                ZERO if k == j else parsed[k] / rest
                for k in range(n + 1)
            )
        )
    return MarkovChainModel(arrival, tuple(rows))


def from_buydown(
    pmf: Mapping[int, object],
    catalog: ProductCatalog,
) -> MarkovChainModel:
    """Chain generating price-sorted prefix lists (1,..,j) from a valuation pmf.

    ``pmf[j]`` is the probability that the buyer's valuation equals the price
    of product j (j=0 means she buys nothing); the catalog prices must be
    strictly increasing so the prefixes are well defined. Transition hazards
    are tail ratios; once the tail mass runs out the chain exits straight
    to 0 from every later node.
    """
    n = catalog.n
    for j in range(1, n):
        if catalog.price(j) >= catalog.price(j + 1):
            raise ValueError("buy-down lists need strictly increasing prices")
    mass = [ZERO] * (n + 1)
    for key, raw in pmf.items():
        j = int(key)
        if j < 0 or j > n:
            raise ValueError(f"valuation pmf key {j} outside 0..{n}")
        mass[j] = parse_rational(raw)
    if any(p < 0 for p in mass):
        raise ValueError("negative valuation probability")
    if sum(mass, ZERO) != 1:
        raise ValueError("valuation pmf must sum to exactly 1")
    tails = [ZERO] * (n + 2)
    for j in range(n, 0, -1):
        tails[j] = tails[j + 1] + mass[j]
    arrival = [ZERO] * (n + 1)
    arrival[0] = mass[0]
    if n >= 1:
        arrival[1] = tails[1]
    rows = []
    for j in range(1, n + 1):
        row = [ZERO] * (n + 1)
        if tails[j] == 0:  # unreachable node, exit immediately
            row[0] = ONE
        else:
            onward = tails[j + 1] / tails[j] if j < n else ZERO
            row[0] = ONE - onward
            if j < n:
                row[j + 1] = onward
        rows.append(tuple(row))
    return MarkovChainModel(tuple(arrival), tuple(rows))


def sample_categorical(rng, pairs: Sequence[tuple[object, Fraction]]):
    """Draw from a rational categorical distribution without float rounding."""
    denom = 1
    for _, prob in pairs:
        denom = denom * prob.denominator // _gcd(denom, prob.denominator)
    draw = rng.randrange(denom)
    acc = 0
    for item, prob in pairs:
        acc += prob.numerator * (denom // prob.denominator)
        if draw < acc:
            return item
    raise AssertionError("probabilities summed below 1")


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def sample_list(model: MarkovChainModel, rng) -> Ranking:
    """Walk the chain once and return the generated ranked list."""
    node = sample_categorical(rng, [(j, p) for j, p in enumerate(model.arrival)])
    lst: list[int] = []
    seen: set[int] = set()
    while node != 0:
        if node not in seen:
            seen.add(node)
            lst.append(node)
        row = model.rows[node - 1]
        node = sample_categorical(rng, [(k, p) for k, p in enumerate(row) if p > 0])
    return tuple(lst)


def sample_from_distribution(dist: ExplicitListDistribution, rng) -> Ranking:
    return sample_categorical(rng, list(dist.items()))


def all_ranked_lists(n: int, max_products: int = 7) -> Iterator[Ranking]:
    """Every ranked list over products 1..n, shortest first."""
    if n > max_products:
        raise EnumerationCapError(
            f"full list universe capped at {max_products} products, asked for {n}"
        )
    for size in range(n + 1):
        for combo in itertools.permutations(range(1, n + 1), size):
            yield combo
