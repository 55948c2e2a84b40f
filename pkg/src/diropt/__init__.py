"""Directed-information rates, rate-distortion with feed-forward and feedback capacity
for finite-state Markov models."""

__version__ = "0.1.0"

from .channel import (
    ChannelJoint, ChannelModel, CostTable, InputPolicy, channel_spectrum_estimate,
    compose_channel_joint, expected_cost, feedback_info_rate,
)
from .directed import RatePoint, rate_delay1, rate_delayk, spectrum_estimate
from .errors import (
    BudgetExceededError, ConvergenceError, DiroptError, DomainError, ExactModeUnavailableError,
    NonErgodicError, ValidationError,
)
from .gauss import GaussMarkovParams, ba_gaussian_oracle, gauss_curve, gauss_rate
from .io import load, load_model, model_hash, save, save_model
from .models import (
    JointMarkovModel, MarkovSourceModel, TestChannelModel, Trajectory, compose_joint,
    forward_conditional, recover_test_channel, reverse_conditional, sample_trajectory,
)
from .optimality import (
    DistortionTable, OptimalityCertificate, expected_distortion, rd_point, synthesize_cost,
    synthesize_distortion, verify_cost, verify_distortion,
)
from .prob import (
    StochasticTable, conditional_mutual_information, entropy, mutual_information,
    recurrent_classes, stationary_distribution, validate_table,
)
from .stock import (
    BirthDeathChain, build_chain, build_forward_table, build_policy, distortion_table, rd_curve,
    stock_joint, stock_rate,
)
