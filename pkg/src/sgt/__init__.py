"""Stochastic gradient trees: incremental decision trees trained from gradient information."""
from .discretize import NominalFeature, NumericFeature, RangeEstimator, bin_index, threshold_candidates
from .ghstats import GradHessPair, GradHessStats
from .tasks import MilTrainer, SGTClassifier, SGTRegressor
from .tree import SgtConfig, SplitCandidate, StochasticGradientTree, leaf_value
from .ttest import student_t_cdf, t_test_p

__all__ = [
    "GradHessPair", "GradHessStats", "MilTrainer", "NominalFeature", "NumericFeature",
    "RangeEstimator", "SGTClassifier", "SGTRegressor", "SgtConfig", "SplitCandidate",
    "StochasticGradientTree", "bin_index", "leaf_value", "student_t_cdf", "t_test_p",
    "threshold_candidates",
]
