"""flowtrain: probability-flow and contrastive-divergence training for RBMs."""

import os as _os

# Honor the thread cap before numpy (and its BLAS) is first imported.
_threads = _os.environ.get("FLOWTRAIN_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .data import BinaryDataset, SyntheticSpec, generate_synthetic, load_dense_text, load_idx, save_dense_text
from .estimator import BinaryRBM
from .exceptions import (CapacityError, ConfigurationError, DataFormatError,
                         EstimationFailedError, FlowtrainError,
                         TrainingDivergedError)
from .flow import (Factorized, FlowValue, FullEnumeration, OddFunction,
                   OneBitFlip, TransitionSpec, enumerate_full_flow,
                   factorized_flow, flow_rate, one_bit_flip_flow)
from .likelihood import (AisConfig, CslConfig, LikelihoodEstimate,
                         ais_avg_log_likelihood, ais_log_partition,
                         base_biases_from_data, csl_log_likelihood, kl_visible)
from .model import (ParamGradient, RbmParams, energy, exact_avg_log_likelihood,
                    exact_log_partition, exact_nll_grad,
                    exact_visible_log_probs, enumerate_states, free_energy,
                    free_energy_grad, gibbs_step, hidden_conditional,
                    init_params, visible_conditional)
from .modelio import export_samples_pgm, load_model, model_provenance, save_model
from .oracle import (ExplicitChain, build_chain, check_detailed_balance,
                     evolve, is_irreducible, stationarity_residual,
                     taylor_check)
from .train import (ChainPool, TrainConfig, TrainTrace, cd_k_update, fit,
                    mpf_update, pcd_update)

__version__ = "0.1.0"

__all__ = [
    "AisConfig", "BinaryDataset", "BinaryRBM", "CapacityError", "ChainPool",
    "ConfigurationError", "CslConfig", "DataFormatError",
    "EstimationFailedError", "ExplicitChain", "Factorized", "FlowValue",
    "FlowtrainError", "FullEnumeration", "LikelihoodEstimate", "OddFunction",
    "OneBitFlip", "ParamGradient", "RbmParams", "SyntheticSpec",
    "TrainConfig", "TrainTrace", "TrainingDivergedError", "TransitionSpec",
    "ais_avg_log_likelihood", "ais_log_partition", "base_biases_from_data",
    "build_chain", "cd_k_update", "check_detailed_balance",
    "csl_log_likelihood", "energy", "enumerate_full_flow", "enumerate_states",
    "evolve", "exact_avg_log_likelihood", "exact_log_partition",
    "exact_nll_grad", "exact_visible_log_probs", "export_samples_pgm",
    "factorized_flow", "fit", "flow_rate", "free_energy", "free_energy_grad",
    "generate_synthetic", "gibbs_step", "hidden_conditional", "init_params",
    "is_irreducible", "kl_visible", "load_dense_text", "load_idx",
    "load_model", "model_provenance", "mpf_update", "one_bit_flip_flow",
    "pcd_update", "save_dense_text", "save_model", "stationarity_residual",
    "taylor_check", "visible_conditional",
]
