"""Reading and writing instance files and taxation-table files.

Instances are JSON with every number given exactly: integers, fraction
strings like "7/2", or decimal strings like "7.5" (scaled in base 10).
Bare JSON decimals are also read exactly because the parser converts the
original decimal text, never a binary float. Products may be referred to by
id or by their optional display label anywhere a product appears.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .auction import AuctionInstance, Buyer, FeasibleFamily, TaxationMechanism
from .choice import (
    ExplicitListDistribution,
    MarkovChainModel,
    ProductCatalog,
    Ranking,
    from_buydown,
    from_mnl,
)
from .exact import NEG_INF, Value, parse_rational
from .frontier import VirtualValuationMapping


class InstanceFormatError(ValueError):
    """The instance or table file is malformed."""


@dataclass(frozen=True)
class LoadedInstance:
    """An auction instance plus its display metadata."""

    auction: AuctionInstance
    labels: tuple[str, ...]
    buyer_kinds: tuple[str, ...]

    @property
    def catalog(self) -> ProductCatalog:
        return self.auction.catalog

    def label_of(self, j: int) -> str:
        if j == 0:
            return "0"
        return self.labels[j - 1]

    def resolve(self, token) -> int:
        """Product id from an id, numeric string, or display label."""
        if isinstance(token, int):
            j = token
        else:
            text = str(token).strip()
            if text in self.labels:
                return self.labels.index(text) + 1
            try:
                j = int(text)
            except ValueError as exc:
                raise InstanceFormatError(f"unknown product {token!r}") from exc
        if j < 0 or j > self.catalog.n:
            raise InstanceFormatError(f"product id {j} outside 0..{self.catalog.n}")
        return j

    def format_assortment(self, assortment) -> str:
        members = sorted(assortment)
        if not members:
            return "-"
        return "+".join(self.label_of(j) for j in members)

    def format_list(self, lst: Sequence[int]) -> str:
        if not lst:
            return "()"
        return "(" + ",".join(self.label_of(j) for j in lst) + ")"


def _require(mapping, key, where):
    if key not in mapping:
        raise InstanceFormatError(f"missing {key!r} in {where}")
    return mapping[key]


def _parse_catalog(block) -> tuple[ProductCatalog, tuple[str, ...]]:
    prices_raw = _require(block, "prices", "catalog")
    by_id = {}
    for key, value in prices_raw.items():
        try:
            j = int(key)
        except ValueError as exc:
            raise InstanceFormatError(f"catalog price key {key!r} is not an id") from exc
        by_id[j] = parse_rational(value)
    n = len(by_id)
    if sorted(by_id) != list(range(1, n + 1)):
        raise InstanceFormatError("catalog must price products 1..n without gaps")
    catalog = ProductCatalog(tuple(by_id[j] for j in range(1, n + 1)))
    labels = [str(j) for j in range(1, n + 1)]
    for key, label in block.get("labels", {}).items():
        j = int(key)
        if j < 1 or j > n:
            raise InstanceFormatError(f"label for unknown product id {j}")
        labels[j - 1] = str(label)
    if len(set(labels)) != n:
        raise InstanceFormatError("product labels must be distinct")
    return catalog, tuple(labels)


def _parse_family(block, m: int) -> FeasibleFamily:
    kind = _require(block, "kind", "family")
    if kind == "single_winner":
        return FeasibleFamily.single_winner(m)
    if kind == "cardinality":
        return FeasibleFamily.cardinality(m, int(_require(block, "limit", "family")))
    if kind == "explicit":
        sets = _require(block, "sets", "family")
        # buyer ids are 1-based in files
        return FeasibleFamily.explicit(m, [[int(i) - 1 for i in s] for s in sets])
    raise InstanceFormatError(f"unknown family kind {kind!r}")


def _resolve_list(raw, resolve) -> Ranking:
    return tuple(resolve(token) for token in raw)


def _parse_vvm_block(block, resolve) -> tuple[VirtualValuationMapping, tuple | None]:
    table: dict[Ranking, Value] = {}
    for entry in _require(block, "values", "vvm"):
        lst = _resolve_list(_require(entry, "list", "vvm value"), resolve)
        raw = _require(entry, "value", "vvm value")
        value = NEG_INF if raw == "-inf" else parse_rational(raw)
        table[lst] = value
    ladder = None
    if "ladder" in block:
        rungs = []
        for entry in block["ladder"]:
            assortment = frozenset(
                resolve(token) for token in _require(entry, "assortment", "ladder rung")
            )
            rungs.append((assortment, parse_rational(_require(entry, "value", "ladder rung"))))
        ladder = tuple(rungs)
    return VirtualValuationMapping(table=table), ladder


def _parse_buyer(block, catalog, resolve, support_cap: int) -> tuple[Buyer, str]:
    kind = _require(block, "type", "buyer")
    if kind == "markov":
        n = catalog.n
        arrival = {resolve(k): v for k, v in _require(block, "arrival", "buyer").items()}
        transitions = {
            resolve(k): {resolve(k2): v2 for k2, v2 in row.items()}
            for k, row in _require(block, "transitions", "buyer").items()
        }
        model = MarkovChainModel.create(n, arrival, transitions)
        return Buyer.from_chain(model, catalog, support_cap), kind
    if kind == "mnl":
        model = from_mnl(_require(block, "weights", "buyer"))
        if model.n != catalog.n:
            raise InstanceFormatError("mnl weights must cover 0..n")
        return Buyer.from_chain(model, catalog, support_cap), kind
    if kind == "buydown":
        pmf = {resolve(k): v for k, v in _require(block, "pmf", "buyer").items()}
        model = from_buydown(pmf, catalog)
        return Buyer.from_chain(model, catalog, support_cap), kind
    if kind == "explicit":
        pairs = []
        for entry in _require(block, "lists", "buyer"):
            lst = _resolve_list(_require(entry, "list", "buyer list"), resolve)
            pairs.append((lst, parse_rational(_require(entry, "prob", "buyer list"))))
        dist = ExplicitListDistribution.from_pairs(pairs, catalog.n)
        valuation = None
        ladder = None
        if "vvm" in block:
            valuation, ladder = _parse_vvm_block(block["vvm"], resolve)
        return (
            Buyer.from_explicit(dist, valuation, ladder, catalog),
            kind,
        )
    raise InstanceFormatError(f"unknown buyer type {kind!r}")


def parse_instance(data: Mapping, support_cap: int = 10) -> LoadedInstance:
    catalog, labels = _parse_catalog(_require(data, "catalog", "instance"))

    def resolve(token) -> int:
        if isinstance(token, int):
            j = token
        else:
            text = str(token).strip()
            if text in labels:
                return labels.index(text) + 1
            try:
                j = int(text)
            except ValueError as exc:
                raise InstanceFormatError(f"unknown product {token!r}") from exc
        if j < 0 or j > catalog.n:
            raise InstanceFormatError(f"product id {j} outside 0..{catalog.n}")
        return j

    buyer_blocks = _require(data, "buyers", "instance")
    buyers = []
    kinds = []
    for block in buyer_blocks:
        buyer, kind = _parse_buyer(block, catalog, resolve, support_cap)
        buyers.append(buyer)
        kinds.append(kind)
    family = _parse_family(_require(data, "family", "instance"), len(buyers))
    auction = AuctionInstance(catalog, tuple(buyers), family)
    return LoadedInstance(auction, labels, tuple(kinds))


def load_instance(path, support_cap: int = 10) -> LoadedInstance:
    with open(path) as handle:
        try:
            data = json.load(handle, parse_float=Fraction)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"{path}: {exc}") from exc
    return parse_instance(data, support_cap)


def mechanism_to_json(mechanism: TaxationMechanism) -> dict:
    tables = []
    for table in mechanism.tables:
        entries = []
        for context in sorted(table):
            entries.append(
                {
                    "context": [list(lst) for lst in context],
                    "assortment": sorted(table[context]),
                }
            )
        tables.append({"entries": entries})
    return {"tables": tables}


def save_mechanism(mechanism: TaxationMechanism, path) -> None:
    with open(path, "w") as handle:
        json.dump(mechanism_to_json(mechanism), handle, indent=2)
        handle.write("\n")


def parse_mechanism(data: Mapping, loaded: LoadedInstance) -> TaxationMechanism:
    blocks = _require(data, "tables", "mechanism file")
    if len(blocks) != loaded.auction.m:
        raise InstanceFormatError("one table per buyer is required")
    tables = []
    for block in blocks:
        table = {}
        for entry in _require(block, "entries", "mechanism table"):
            context = tuple(
                tuple(loaded.resolve(token) for token in lst)
                for lst in _require(entry, "context", "mechanism entry")
            )
            assortment = frozenset(
                loaded.resolve(token)
                for token in _require(entry, "assortment", "mechanism entry")
            )
            table[context] = assortment
        tables.append(table)
    return TaxationMechanism(tuple(tables))


def load_mechanism(path, loaded: LoadedInstance) -> TaxationMechanism:
    with open(path) as handle:
        try:
            data = json.load(handle, parse_float=Fraction)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(f"{path}: {exc}") from exc
    return parse_mechanism(data, loaded)
