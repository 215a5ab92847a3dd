"""Wallenius biased-urn models for category preference data, fitted by ABC rejection."""

from .abc import (
    BudgetExhausted,
    Calibration,
    Dataset,
    PosteriorSample,
    PosteriorSummary,
    PriorConfig,
    abc_rejection,
    abc_rejection_multi,
    calibrate_tolerance,
    posterior_summaries,
    sample_prior,
    simulate_dataset,
    summary_statistic,
    tv_distance,
)
from .urn import (
    DrawState,
    FrequencyVector,
    UrnError,
    UrnSpec,
    enumerate_support,
    exact_pmf_by_enumeration,
    hypergeom_pmf,
    make_urn,
    next_draw_probs,
    sample_draw,
    validate_urn,
    wallenius_pmf,
)

__version__ = "0.1.0"
