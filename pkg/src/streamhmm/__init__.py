"""Streaming regime-switching filters with truncated path posteriors."""

__version__ = "0.1.0"

from .baselines import (
    OnlineEmState,
    RbpfState,
    online_em_init,
    online_em_predictive,
    online_em_step,
    rbpf_init,
    rbpf_predictive,
    rbpf_step,
)
from .beam import (
    Beam,
    PathHypothesis,
    branch,
    initial_beam,
    multi_step_forecast,
    one_step_predictive,
    step,
    truncate_top_s,
)
from .datagen import (
    GaussHmmConfig,
    GpDgpConfig,
    RegimeSeries,
    gen_gaussian_hmm,
    gen_gp_regime_series,
)
from .errors import (
    CholeskyBreakdownError,
    ConfigError,
    DegenerateLikelihoodError,
    EnumerationSizeError,
    NonFiniteObservationError,
    StreamHmmError,
)
from .mixtures import GaussianMixture, mixture_from_components, mixture_moments
from .oracle import (
    PathPosterior,
    ProbeReport,
    SweepReport,
    TruncationBoundError,
    TruncationReport,
    exact_path_posterior,
    posterior_predictive,
    support_sweep,
    verify_theorem,
    weight_optimality_probe,
)
from .prequential import (
    MethodSettings,
    PrequentialConfig,
    PrequentialResult,
    aggregate_sweep,
    build_method,
    run_prequential,
    sweep_budget,
)
from .quadrature import chi2_mixture, kl_mixture
from .regimes import (
    GaussianConjugateState,
    GPState,
    KernelHyper,
    gaussian_predictive,
    gaussian_update,
    gp_predictive,
    gp_update,
    kernel_eval,
)
from .transition import TransitionMatrix, sticky_transition

__all__ = [name for name in dir() if not name.startswith("_")]
