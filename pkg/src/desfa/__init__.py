"""Dynamic ensemble selection with an ENN-edited, adaptive-distance region of competence."""

__version__ = "0.1.0"

from .competence import (CompetenceIndex, adaptive_knn, build_correctness_matrix,
                         build_filtered_index, build_index, compute_radii, enn_filter, knn)
from .datasets import Dataset, SplitSpec, load_csv, save_csv, split
from .ensemble import Ensemble, bagging, majority_vote, oracle_accuracy, single_best, static_ensemble_accuracy
from .errors import ParseError, ValidationError
from .evaluation import ExperimentConfig, ExperimentReport, run_experiment
from .perceptron import Perceptron, predict, train_perceptron
from .selection import (SelectionOutcome, classify_aknn_knora, classify_des_fa, classify_knora_e,
                        knora_eliminate)
