"""Entropy and mutual information of wide stochastic feed-forward networks.

The package computes, per input unit and in nats, the differential entropy
of hidden layers of multi-layer stochastic models

    t_0 ~ prior,  t_k = act_k(W_k t_{k-1} + noise_k),

in the proportional wide limit, by extremizing a layered free-entropy
potential. Two solvers are provided (damped fixed-point iteration and a
message-passing state evolution), together with sampling utilities, exact
Gaussian oracles for linear networks, and nonparametric estimators for
cross-validation.
"""

from . import channels, core, netsim, oracles, replica, spectra
from .channels import ChannelSpec, PriorSpec, QuadratureConfig
from .replica import (LayerSpec, ModelSpec, ReplicaState, SolveReport,
                      SolverConfig, entropy, mutual_info_adjacent,
                      mutual_info_with_input, solve)
from .spectra import (AnalyticMP, Empirical, PointMass, empirical_spectrum,
                      mp_spectrum)

__version__ = "0.1.0"

__all__ = [
    "AnalyticMP", "ChannelSpec", "Empirical", "LayerSpec", "ModelSpec",
    "PointMass", "PriorSpec", "QuadratureConfig", "ReplicaState",
    "SolveReport", "SolverConfig", "channels", "core", "empirical_spectrum",
    "entropy", "mp_spectrum", "mutual_info_adjacent",
    "mutual_info_with_input", "netsim", "oracles", "replica", "solve",
    "spectra", "__version__",
]
