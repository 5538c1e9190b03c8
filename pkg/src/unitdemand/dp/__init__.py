from .core import (
    DEFAULT_STATE_CAP,
    DpResult,
    DpTable,
    TransitionTables,
    WinningDistribution,
    base_distribution,
    canonical_round,
    compiled_kernel_available,
    revenue_of,
    run_dp,
    transition,
)

__all__ = [
    "DEFAULT_STATE_CAP",
    "DpResult",
    "DpTable",
    "TransitionTables",
    "WinningDistribution",
    "base_distribution",
    "canonical_round",
    "compiled_kernel_available",
    "revenue_of",
    "run_dp",
    "transition",
]
