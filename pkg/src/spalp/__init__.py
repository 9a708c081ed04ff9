"""ALP-GMM and self-paced ALP curriculum teachers, with a hypercube toy benchmark."""

from .gmm import GaussianMixture, fit_em, log_likelihood, sample_component, select_and_fit
from .regularizer import OFF, RegularizationState, mean_squashed, solve_alpha, squash
from .teacher import (
    ALPGMMTeacher,
    RewardHistory,
    RewardRecord,
    SPALPTeacher,
    Teacher,
    TeacherConfig,
    compute_alp,
    make_teacher,
    normalize_reward,
)
from .toyenv import CubeGrid, RewardShape, ToyEnvConfig

__version__ = "0.1.0"
