"""Interaction networks: structures, models, filtering and prediction."""

from .inference import (
    BeliefState,
    EventInput,
    TrajectoryPoint,
    filter_sequence,
    filter_step,
    forward_simulate,
    log_likelihood,
    predict,
)
from .model import DbnModel, StructureCandidate, default_structure, load_model, model_from_dict, model_to_dict
from .reference import reference_model

__all__ = [
    "BeliefState",
    "DbnModel",
    "EventInput",
    "StructureCandidate",
    "TrajectoryPoint",
    "default_structure",
    "filter_sequence",
    "filter_step",
    "forward_simulate",
    "load_model",
    "log_likelihood",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "reference_model",
]
