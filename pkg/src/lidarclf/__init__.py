"""LiDAR point cloud classification frameworks.

Parses LAS point clouds, engineers neighbor-context features with an
exact kd-tree, reduces dimension with PCA or a mirrored autoencoder,
and scores KNN / random-forest / forest-ensemble / neural-network
classifiers by stratified cross-validated micro-F1.
"""

__version__ = "0.1.0"

from .errors import (BadMagic, DimMismatch, EmptyCloud, EmptyMatrix, FoldError,
                     KTooLarge, LidarclfError, PTooLarge, SampleTooLarge,
                     SpecError, TrainingDiverged, Truncated, UnsupportedFormat)
from .las_io import (DEFAULT_CLASS_CODES, LasHeader, LidarPoint, PointCloud,
                     filter_classes, load_cloud, parse_header, parse_las,
                     read_csv, subsample_uniform, write_csv, write_las)
from .kdtree import KdTree
from .features import (BASE_FEATURES, FeatureMatrix, NeighborMatrix,
                       StandardizeStats, assemble_neighbor_matrix,
                       build_spatial_index, knn_indices, normalize_rows,
                       standardize_apply, standardize_fit, to_feature_matrix)
from .nets import FeedForwardNet, TrainConfig
from .dimred import (AutoencoderModel, PcaModel, ae_encode, ae_reconstruct,
                     ae_train, pca_fit, pca_inverse_transform, pca_transform,
                     validate_ae_dims)
from .classifiers import (DecisionTree, KnnClassifier, MlpClassifier,
                          RandomForest, RfEnsemble, gini_impurity, split_gini)
from .evaluation import (CvResult, CvSummary, FoldPlan, accuracy,
                         confusion_matrix, cross_validate, error_rate,
                         f1_micro, kfold_plan, micro_precision, micro_recall)
from .synth import SynthSpec, generate, preset
from .pipeline import (CLASSIFIERS, FRAMEWORKS, ClassificationPipeline,
                       ExperimentSpec, RunReport, SuiteResult, run_experiment,
                       run_suite)
from .serialize import inspect_model, load_model, save_model
