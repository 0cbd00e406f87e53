"""Exact-arithmetic assortment auctions.

Unit-demand buyers rank fixed-price products; distributions over rankings
come as explicit supports or Markov chain walk models. The package computes
choice probabilities and revenue frontiers, builds virtual valuation
mappings (greedily for chains, by brute force otherwise), runs the scored
truthful auction, and certifies optimality against an exhaustive oracle on
small instances. Everything is exact rational arithmetic end to end.
"""

from .auction import (
    AllocationOutcome,
    AuctionInstance,
    Buyer,
    FeasibleFamily,
    SimulationResult,
    TaxationMechanism,
    WinThreshold,
    allocate,
    allocate_with_threshold,
    expected_revenue_exact,
    expected_virtual_surplus,
    profile_space,
    select_winners,
    simulate,
    win_threshold,
)
from .choice import (
    ChoiceStats,
    ExplicitListDistribution,
    MarkovChainModel,
    ProductCatalog,
    Ranking,
    all_ranked_lists,
    choice_stats,
    choose,
    enumerate_support,
    first_hit_probabilities,
    from_buydown,
    from_mnl,
    hit_probability,
    list_probability,
    ordered_hit_probability,
    rank,
    sample_list,
)
from .exact import (
    NEG_INF,
    POS_INF,
    EnumerationCapError,
    Value,
    format_value,
    parse_rational,
    upper_concave_envelope,
)
from .frontier import (
    EfficiencySequence,
    ImplementabilityReport,
    InsurmountabilityReport,
    RevenueFrontier,
    VirtualValuationMapping,
    assortment_ladder,
    check_implementability,
    check_insurmountability,
    derive_assortment_ladder,
    efficiency_sequence,
    revenue_frontier,
    valuation_from_sequence,
)
from .instances import LoadedInstance, load_instance, load_mechanism, save_mechanism
from .oracle import (
    IronedValuation,
    MechanismReport,
    OracleResult,
    classical_buydown_auction,
    ironed_values,
    optimal_mechanism,
    verify_mechanism,
)

__version__ = "0.1.0"
