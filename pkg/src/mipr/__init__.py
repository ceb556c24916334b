"""Data-free structured pruning of fully-connected networks.

Neurons are scored by the mutual information between their inputs and
outputs while standard-normal noise is propagated from the network input,
and the lowest-scoring neurons are removed layer by layer.
"""

from ._kernels import BACKEND
from .data import Dataset, Split, load_cifar10_binary, load_dataset_generic, make_synthetic
from .formats import load_mi, load_model, load_trace, save_mi, save_model, save_trace
from .mi import HistogramConfig, JointHistogram, MIMatrix, all_layer_mi, joint_histogram, layer_mi, mutual_information
from .network import Activation, LinearLayer, Network, TrainConfig, evaluate, forward, train
from .probe import ActivationTrace, ProbeConfig, record_trace, sample_intervention

__version__ = "0.1.0"
