"""Diverse, actionable counterfactual action sequences for failing RL episodes."""

from .core import (
    ActionSpace,
    Environment,
    FailureCase,
    InputError,
    ReplayLengthError,
    StochasticConfig,
    Trajectory,
    Transition,
    UnsupportedEnvironmentError,
    replay,
    sample_config,
)
from .explanation import Counterfactual, ExplanationSet
from .properties import PropertyVector, evaluate_properties

__version__ = "0.1.0"
