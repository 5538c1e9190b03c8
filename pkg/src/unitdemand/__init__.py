"""Pricing toolkit for a unit-demand buyer with independent item values.

The pipeline: anchor the revenue scale (beta for mhr-tagged instances,
alpha for regular ones), truncate values into a bounded window, snap
values and candidate prices onto geometric grids, round the winning
distribution onto an integer lattice, run the layered dynamic program,
then lift the grid prices back to the original value space.  Oracles in
`oracle` verify any price vector exactly (discrete instances) or by
seeded Monte Carlo.
"""

from .anchoring import (
    MhrAnchor,
    RegularAnchor,
    alpha_regular,
    beta_from_constant_approx,
    beta_mhr,
    verify_mhr_anchor,
    verify_regular_anchor,
)
from .discretization import (
    HorizontalResult,
    RestrictedInstance,
    back_map_prices,
    eps_bound,
    full_discretize,
    horizontal_discretize,
    horizontal_grid_count,
    price_grid,
    snap_prices,
    value_grid_bound,
    vertical_round,
)
from .distributions import (
    CdfOracle,
    DiscreteDistribution,
    Instance,
    TieBreak,
    check_shape,
    instance_to_json,
    load_instance,
    parse_instance,
    quantile,
    revenue_curve,
    tail_contribution,
)
from .dp import (
    TransitionTables,
    WinningDistribution,
    base_distribution,
    canonical_round,
    compiled_kernel_available,
    revenue_of,
    run_dp,
    transition,
)
from .iid import fast_path_threshold, quantile_point, single_price_mhr
from .oracle import (
    brute_force_optimum,
    exact_revenue,
    exact_revenue_enumerated,
    monte_carlo_revenue,
)
from .reductions import (
    CapHigh,
    ClampRange,
    PriceVector,
    RaiseLow,
    ReplaceInfinite,
    TruncatedOracle,
    lift_solution_mhr,
    lift_solution_regular,
    restrict_prices,
    truncate_values_mhr,
    truncate_values_regular,
)
from .util import (
    AnchoringError,
    ConvergenceError,
    ResourceLimitError,
    parse_number,
    rational_str,
    to_fraction,
)

__version__ = "0.1.0"

__all__ = [
    "AnchoringError",
    "CapHigh",
    "CdfOracle",
    "ClampRange",
    "ConvergenceError",
    "DiscreteDistribution",
    "HorizontalResult",
    "Instance",
    "MhrAnchor",
    "PriceVector",
    "RaiseLow",
    "RegularAnchor",
    "ReplaceInfinite",
    "ResourceLimitError",
    "RestrictedInstance",
    "TieBreak",
    "TransitionTables",
    "TruncatedOracle",
    "WinningDistribution",
    "alpha_regular",
    "back_map_prices",
    "base_distribution",
    "beta_from_constant_approx",
    "beta_mhr",
    "brute_force_optimum",
    "canonical_round",
    "check_shape",
    "compiled_kernel_available",
    "eps_bound",
    "exact_revenue",
    "exact_revenue_enumerated",
    "fast_path_threshold",
    "full_discretize",
    "horizontal_discretize",
    "horizontal_grid_count",
    "instance_to_json",
    "lift_solution_mhr",
    "lift_solution_regular",
    "load_instance",
    "monte_carlo_revenue",
    "parse_instance",
    "parse_number",
    "price_grid",
    "quantile",
    "quantile_point",
    "rational_str",
    "restrict_prices",
    "revenue_curve",
    "revenue_of",
    "run_dp",
    "single_price_mhr",
    "snap_prices",
    "tail_contribution",
    "to_fraction",
    "transition",
    "truncate_values_mhr",
    "truncate_values_regular",
    "value_grid_bound",
    "vertical_round",
]
