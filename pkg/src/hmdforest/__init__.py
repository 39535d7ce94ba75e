"""Hierarchical multi-label deep forest toolkit for antimicrobial peptide
annotation: dataset handling, cascade forests with multi-grained scanning,
measure-aware growth, evaluation, explanation, and persistence."""

from .cascade import (
    CascadeConfig,
    CascadeModel,
    GrowthController,
    ScanningModel,
    label_confidence,
    predict_cascade,
    predict_cascade_batch,
    scan_windows,
    train_cascade,
    train_scanner,
    transform,
)
from .embed import FeatureMatrix, load_embeddings, mean_pool, one_hot_encode
from .errors import DataError, StoreError
from .forest import (
    ForestConfig,
    ForestModel,
    best_split,
    multi_label_gini,
    out_of_fold_predict,
    predict_forest,
    predict_forest_batch,
    train_forest,
    train_tree,
)
from .hierarchy import PipelineModel, Verdict, predict, rank_candidates, train_pipeline
from .metrics import MetricsReport, ScoredLabelSet, classification_report, macro_auc, roc_points
from .seqio import Dataset, LabeledSequence, dataset_stats, deduplicate, parse_fasta, parse_labels
from .store import load, save

__version__ = "0.1.0"
