"""Feature-subset search for CTR models.

Univariate scores rank each feature kind; a nested removal schedule walks
prefix subsets of the two ranked lists; up/down neighborhood moves refine
the best cells; every evaluation lands in a deduplicating, resumable
ledger. A genetic-algorithm baseline searches free-form bitmasks over the
same ledger.
"""

from .data import (EncodedDataset, FeatureSchema, IngestError, SchemaError,
                   encode_frame, encode_typed_frame, ingest, load_schema,
                   split)
from .evaluator import (DivergenceError, EvalRecord, TrainConfig,
                        fit_with_early_stopping, make_evaluator,
                        train_and_eval)
from .ga import GAConfig, ga_select
from .metrics import auc, logloss
from .scoring import (FeatureScore, RankedFeatures, anova_f_score,
                      chi_square_score, rank_features)
from .search import (FeatureSubset, Ledger, SearchError, SearchParams,
                     canonical_key, down_search, general_schedule,
                     prefix_subset, run_general_search, run_neshfs,
                     select_top_k, subset_from_kept, up_search)
from .selector import NeshfsSelector

__version__ = "0.1.0"

__all__ = [
    "EncodedDataset", "FeatureSchema", "IngestError", "SchemaError",
    "encode_frame", "encode_typed_frame", "ingest", "load_schema", "split",
    "DivergenceError", "EvalRecord", "TrainConfig", "fit_with_early_stopping",
    "make_evaluator", "train_and_eval",
    "GAConfig", "ga_select",
    "auc", "logloss",
    "FeatureScore", "RankedFeatures", "anova_f_score", "chi_square_score",
    "rank_features",
    "FeatureSubset", "Ledger", "SearchError", "SearchParams", "canonical_key",
    "down_search", "general_schedule", "prefix_subset", "run_general_search",
    "run_neshfs", "select_top_k", "subset_from_kept", "up_search",
    "NeshfsSelector",
    "__version__",
]
