"""Score-function estimation and landscape-designed losses for one-hidden-layer networks."""

from . import analytic_scores, harness, landscape_loss, llsfe, optimizer, teacher, tensor
from .analytic_scores import Gaussian, GaussianMixture, SymmetricExponential
from .landscape_loss import (
    AnalyticScores,
    DesignedLoss,
    EstimatedScores,
    GaussianAssumed,
    LossConfig,
    param_error,
)
from .harness import ExperimentSpec, run
from .llsfe import EstimatorConfig, estimate_score, local_fit
from .optimizer import TrainConfig, random_init, train
from .teacher import Dataset, TeacherNet, make_dataset

__version__ = "0.1.0"
