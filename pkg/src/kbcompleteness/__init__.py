"""Class cardinality and completeness estimation from edit-history capture/recapture."""

__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    DatasetError,
    EditRecord,
    EntityRegistry,
    GenderLabel,
    NameDictionary,
    RegistryEntry,
    load_edits,
    load_name_dictionary,
    load_registry,
    parse_edit_record,
    serialize_edit_record,
)
from .estimators import (  # noqa: E402
    CardinalityEstimator,
    Estimate,
    FreqStats,
    completeness,
    convergence_score,
    estimate_jack1,
    estimate_n1_unif,
    estimate_series,
    frequency_stats,
)
from .gender import ClassifierConfig, GenderClassifier, classify_gender, gender_distribution, normalize_given_name  # noqa: E402
from .windowing import ALL, IncidenceSummary, Stratum, WindowSpec, bin_incidence, cumulative_summaries, make_windows  # noqa: E402

__all__ = [
    "ALL",
    "CardinalityEstimator",
    "ClassifierConfig",
    "DatasetError",
    "EditRecord",
    "EntityRegistry",
    "Estimate",
    "FreqStats",
    "GenderClassifier",
    "GenderLabel",
    "IncidenceSummary",
    "NameDictionary",
    "RegistryEntry",
    "Stratum",
    "WindowSpec",
    "bin_incidence",
    "classify_gender",
    "completeness",
    "convergence_score",
    "cumulative_summaries",
    "estimate_jack1",
    "estimate_n1_unif",
    "estimate_series",
    "frequency_stats",
    "gender_distribution",
    "load_edits",
    "load_name_dictionary",
    "load_registry",
    "make_windows",
    "normalize_given_name",
    "parse_edit_record",
    "serialize_edit_record",
]
