"""grownet: architecture search for DAG feedforward networks.

Networks are arbitrary acyclic graphs over a fixed input vector (no layer
structure required). The library trains them with reverse-mode gradients,
prunes the smallest-magnitude connections while an error guard holds,
inserts fresh neurons at the head when pruning stalls, and compares the
resulting (complexity, error) frontier against polynomial and standard
fixed-architecture baselines.
"""

__version__ = "0.1.0"

from .activations import ODD_KINDS, ActivationKind, activation_deriv, activation_eval
from .baselines import (
    EnvelopeCurve,
    PolyModel,
    SweepResult,
    envelope,
    envelope_best_complexity,
    error_original_units,
    monomial_exponents,
    poly_feature_count,
    poly_fit,
    sweep_standard,
)
from .data import (
    PREVIOUS_POINT_OFFSETS,
    GrayImage,
    PgmError,
    brightness_dataset,
    load_pgm,
    save_pgm,
    synthetic_wave_image,
    xy_dataset,
)
from .network import (
    DagNetwork,
    MaxFullyConnected,
    Neuron,
    ThreeLayer,
    dead_neuron_sweep,
    from_json_dict,
    load_network,
    parse_arch,
    remove_edge,
    save_network,
    standard_net,
    to_dot,
    to_json_dict,
)
from .search import (
    AcceptedState,
    GrowResult,
    SearchConfig,
    TrajectoryPoint,
    add_neuron,
    grow,
    least_weight_edges,
    linearize_single_input_neuron,
    prune_step,
    removal_loop,
    trajectory_to_csv,
)
from .training import (
    TrainConfig,
    TrainingMatrix,
    TrainReport,
    derive_seed,
    gradient,
    init_weights,
    loss,
    train,
)

__all__ = [
    "ActivationKind",
    "ODD_KINDS",
    "activation_eval",
    "activation_deriv",
    "DagNetwork",
    "Neuron",
    "ThreeLayer",
    "MaxFullyConnected",
    "standard_net",
    "parse_arch",
    "remove_edge",
    "dead_neuron_sweep",
    "to_json_dict",
    "from_json_dict",
    "save_network",
    "load_network",
    "to_dot",
    "TrainingMatrix",
    "TrainConfig",
    "TrainReport",
    "loss",
    "gradient",
    "train",
    "init_weights",
    "derive_seed",
    "SearchConfig",
    "TrajectoryPoint",
    "AcceptedState",
    "GrowResult",
    "least_weight_edges",
    "prune_step",
    "linearize_single_input_neuron",
    "removal_loop",
    "add_neuron",
    "grow",
    "trajectory_to_csv",
    "GrayImage",
    "PgmError",
    "PREVIOUS_POINT_OFFSETS",
    "load_pgm",
    "save_pgm",
    "synthetic_wave_image",
    "brightness_dataset",
    "xy_dataset",
    "PolyModel",
    "EnvelopeCurve",
    "SweepResult",
    "poly_feature_count",
    "monomial_exponents",
    "poly_fit",
    "sweep_standard",
    "envelope",
    "envelope_best_complexity",
    "error_original_units",
]
