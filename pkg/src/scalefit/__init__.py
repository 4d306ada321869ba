"""Truncated power-law fitting and attachment dynamics for sparse network topologies."""

from .tpl import (
    DomainError,
    TplParams,
    DegreeSample,
    pdf_continuous,
    ccdf_continuous,
    log_ccdf_continuous,
    zeta_trunc,
    pmf_discrete,
    ccdf_discrete,
    sample_discrete,
    log_likelihood,
)
from .fitting import (
    FitConfig,
    FitResult,
    empirical_ccdf,
    ks_statistic,
    mle_alpha,
    fit_tpl,
    bootstrap_pvalue,
)
from .estimator import TruncatedPowerLawFit
from .topology import (
    TopologyError,
    LayerSpec,
    conv_output_spatial,
    SparseMask,
    NetworkTopology,
    DegreeTable,
    degree_table,
    prune_magnitude,
    synth_masks,
    load_topology,
    save_topology,
)
from .prefatt import (
    AttachmentConfig,
    AttachmentState,
    delta_general,
    delta_layered,
    growth_factor,
    simulate,
    estimate_delta,
    estimate_omega,
)

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "TplParams",
    "DegreeSample",
    "pdf_continuous",
    "ccdf_continuous",
    "log_ccdf_continuous",
    "zeta_trunc",
    "pmf_discrete",
    "ccdf_discrete",
    "sample_discrete",
    "log_likelihood",
    "FitConfig",
    "FitResult",
    "empirical_ccdf",
    "ks_statistic",
    "mle_alpha",
    "fit_tpl",
    "bootstrap_pvalue",
    "TruncatedPowerLawFit",
    "TopologyError",
    "LayerSpec",
    "conv_output_spatial",
    "SparseMask",
    "NetworkTopology",
    "DegreeTable",
    "degree_table",
    "prune_magnitude",
    "synth_masks",
    "load_topology",
    "save_topology",
    "AttachmentConfig",
    "AttachmentState",
    "delta_general",
    "delta_layered",
    "growth_factor",
    "simulate",
    "estimate_delta",
    "estimate_omega",
]
