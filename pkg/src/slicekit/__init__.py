"""slicekit: train one network, serve any prefix of its width.

Layers here slice along their channel axis at group boundaries, so a
single set of weights yields a nested family of subnetworks indexed by
a slice rate r in (0, 1].  The pieces:

* :mod:`slicekit.autodiff` — taped reverse-mode engine on numpy arrays
* :mod:`slicekit.layers` — width-sliceable dense/conv/norm/LSTM layers
* :mod:`slicekit.scheduling` — slice-rate sampling schemes and presets
* :mod:`slicekit.training` — joint multi-width training loop
* :mod:`slicekit.costing` — exact parameter/FLOP accounting (r^2 law)
* :mod:`slicekit.widening` — reuse a narrow forward when widening
* :mod:`slicekit.serving` — latency-budget batching policy
* :mod:`slicekit.cascade` — nested-subnet prediction cascades
"""

from .autodiff import Recording, Tensor, record
from .cascade import (CascadeStage, cascade_evaluate, error_set,
                      inclusion_coefficient, stages_from_model,
                      stages_from_models)
from .checkpoint import load_checkpoint, restore_model, save_checkpoint
from .config import ExperimentConfig
from .costing import (CostReport, cost_report, count_flops, count_params,
                      max_rate_for_budget)
from .errors import (BudgetError, ConfigError, DataError, ShapeError,
                     SliceKitError, TrainingError, UsageError)
from .layers import (GroupSpec, SlicedConv2D, SlicedDense, SlicedGroupNorm,
                     SlicedLSTM, slice_boundary)
from .models import (CharRNN, SequentialModel, build_model, char_lstm,
                     spirals_mlp, tinyimages_cnn, vgg13_cifar)
from .scheduling import (RandomScheme, RandomStaticScheme, SliceRateList,
                         StaticScheme, preset)
from .serving import (LatencyPolicy, QueryStream, burst16_trace,
                      bundled_trace, choose_rate_for_batch, plan_batch,
                      simulate_workload)
from .training import (MomentumSGD, TrainConfig, Trainer, evaluate, train,
                       train_fixed)
from .widening import (ActivationCache, partition_weight, run_base,
                       widen_approx, widen_exact, widen_model)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "SliceKitError", "ShapeError", "ConfigError", "DataError", "UsageError",
    "TrainingError", "BudgetError",
    # autodiff
    "Tensor", "Recording", "record",
    # layers
    "GroupSpec", "slice_boundary", "SlicedDense", "SlicedConv2D",
    "SlicedGroupNorm", "SlicedLSTM",
    # models
    "SequentialModel", "CharRNN", "build_model", "spirals_mlp",
    "tinyimages_cnn", "char_lstm", "vgg13_cifar",
    # scheduling
    "SliceRateList", "RandomScheme", "StaticScheme", "RandomStaticScheme",
    "preset",
    # training
    "TrainConfig", "MomentumSGD", "Trainer", "train", "train_fixed", "evaluate",
    # costing
    "CostReport", "cost_report", "count_params", "count_flops",
    "max_rate_for_budget",
    # widening
    "partition_weight", "widen_exact", "widen_approx", "run_base",
    "widen_model", "ActivationCache",
    # serving
    "LatencyPolicy", "QueryStream", "choose_rate_for_batch", "plan_batch",
    "simulate_workload", "burst16_trace", "bundled_trace",
    # cascade
    "CascadeStage", "stages_from_model", "stages_from_models",
    "cascade_evaluate", "error_set", "inclusion_coefficient",
    # config / checkpoint
    "ExperimentConfig", "save_checkpoint", "load_checkpoint", "restore_model",
]
