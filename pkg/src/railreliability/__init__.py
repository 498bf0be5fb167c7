"""Reliability modeling for multi-leg train journeys.

Learns transfer-miss probabilities with gradient-boosted trees, arrival
delays with a Bayesian two-component lognormal mixture regression, and
composes both in a Monte Carlo journey sampler that yields
final-destination delay distributions and reliability metrics.
"""

from .boosting import TransferMissBooster, grid_search_cv
from .delaymodel import (
    DelayFeatures,
    DelayMixtureRegressor,
    MixtureCoefficients,
    MixturePosterior,
    fit_mcmc,
    mixture_log_density,
)
from .events import (
    ClassificationRules,
    FilterConfig,
    FilterReport,
    RuntimeTable,
    TrainEvent,
    TrainType,
    classify_train_type,
    compute_delay,
    filter_events,
    join_runtimes,
)
from .journey import (
    BoosterTransferModel,
    DelaySampleSet,
    JourneySpec,
    Leg,
    LegCatalog,
    NextTrainAlternatives,
    PosteriorDelayModel,
    sample_journey_delay,
    sample_many,
)
from .metrics import (
    auroc,
    calibration_bins,
    qq_points,
    quantile,
    reliability_buffer_time,
    reliability_rating,
    summary_stats,
)
from .synth import SynthConfig, generate_events, generate_labeled_transfers
from .transfers import TransferFeatures, TransferRecord, build_transfer_dataset, enumerate_transfers

__version__ = "0.1.0"

__all__ = [
    "BoosterTransferModel",
    "ClassificationRules",
    "DelayFeatures",
    "DelayMixtureRegressor",
    "DelaySampleSet",
    "FilterConfig",
    "FilterReport",
    "JourneySpec",
    "Leg",
    "LegCatalog",
    "MixtureCoefficients",
    "MixturePosterior",
    "NextTrainAlternatives",
    "PosteriorDelayModel",
    "RuntimeTable",
    "SynthConfig",
    "TrainEvent",
    "TrainType",
    "TransferFeatures",
    "TransferMissBooster",
    "TransferRecord",
    "auroc",
    "build_transfer_dataset",
    "calibration_bins",
    "classify_train_type",
    "compute_delay",
    "enumerate_transfers",
    "filter_events",
    "fit_mcmc",
    "generate_events",
    "generate_labeled_transfers",
    "grid_search_cv",
    "join_runtimes",
    "mixture_log_density",
    "qq_points",
    "quantile",
    "reliability_buffer_time",
    "reliability_rating",
    "sample_journey_delay",
    "sample_many",
    "summary_stats",
]
