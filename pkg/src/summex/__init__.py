"""Rule-based summary-explanations with exact and sampled integer programs."""

from .dataset import (
    BinarizeScheme,
    BinaryDataset,
    CsvFormat,
    FICO_FORMAT,
    FeatureFunction,
    RawDataset,
    SyntheticSpec,
    binarize,
    default_rules,
    load_raw,
    sample_local,
    synthesize,
)
from .explanation import (
    SummaryExplanation,
    TargetContext,
    consistency_level,
    render,
    summarize,
    support_set,
    target_context,
)
from .sis import GlobalCounts, global_counts, global_sis, local_sis, sampling_weights
from .solver import Mode, SolveResult, SolveSpec, Status, brute_force, solve

from .wcs import WcsConfig, run_wcs

__version__ = "0.1.0"
