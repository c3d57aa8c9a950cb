"""Deterministic simulator of a distributed feed-forward neural network with
decentralized message-driven time management, plus fault injection and the
metrics needed to quantify learning-phase and operation-phase degradation."""

from .engine import (
    DeliveryPolicy,
    Deployment,
    Message,
    map_network,
    present_input,
    run_cycle,
)
from .fastpath import FastDeployment, make_deployment
from .faults import Fault, FaultPlan, FaultSet, apply_faults, inject
from .learning import (
    FeedbackSignal,
    TrainingConfig,
    TrainingResult,
    apply_feedback,
    equilibrate,
    shuffle_patterns,
    train,
)
from .metrics import (
    ErrorReport,
    Histogram,
    error_per_pattern,
    global_error,
    quality_of_output,
    weight_histogram,
)
from .model import (
    NetworkSpec,
    NetworkTopology,
    Pattern,
    WeightMatrix,
    build_network,
    forward_reference,
    forward_reference_batch,
    load_weights,
    make_patterns,
    save_weights,
)

__version__ = "0.1.0"

__all__ = [
    "DeliveryPolicy", "Deployment", "Message", "map_network", "present_input",
    "run_cycle", "FastDeployment", "make_deployment", "Fault", "FaultPlan",
    "FaultSet", "apply_faults", "inject", "FeedbackSignal", "TrainingConfig",
    "TrainingResult", "apply_feedback", "equilibrate", "shuffle_patterns",
    "train", "ErrorReport", "Histogram", "error_per_pattern", "global_error",
    "quality_of_output", "weight_histogram", "NetworkSpec", "NetworkTopology",
    "Pattern", "WeightMatrix", "build_network", "forward_reference",
    "forward_reference_batch", "load_weights", "make_patterns", "save_weights",
    "__version__",
]
