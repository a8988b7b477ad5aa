"""Likelihood evaluation: exact, annealed importance sampling, and CSL.

AIS brackets the log-likelihood from above (its partition-function estimate
is biased low), the conservative sampling-based estimator brackets it from
below, and exact enumeration is available whenever one layer is small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from . import model
from .exceptions import CapacityError, ConfigurationError, EstimationFailedError
from .model import RbmParams, softplus
from .validation import as_rng, check_binary_matrix

BASE_BIAS_CLIP = 4.0
_BOOTSTRAP_RESAMPLES = 200


@dataclass
class AisConfig:
    """Annealed-importance-sampling settings.

    The inverse-temperature ladder is linear from 0 to 1 with
    ``n_temperatures`` rungs.  The base distribution is a zero-weight RBM
    whose visible biases default to zero; fit them to data marginals with
    :func:`base_biases_from_data` for a better-matched base.
    """

    n_temperatures: int = 10_000
    n_chains: int = 100
    transitions_per_temp: int = 1
    seed: int = 0
    base_visible_bias: np.ndarray | None = None

    def __post_init__(self):
        if self.n_temperatures < 2:
            raise ConfigurationError("n_temperatures must be >= 2")
        if self.n_chains < 1:
            raise ConfigurationError("n_chains must be >= 1")
        if self.transitions_per_temp < 1:
            raise ConfigurationError("transitions_per_temp must be >= 1")


@dataclass
class CslConfig:
    """Conservative sampling-based likelihood settings."""

    n_hidden_samples: int = 500
    burn_in: int = 2000
    thinning: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_hidden_samples < 1:
            raise ConfigurationError("n_hidden_samples must be >= 1")
        if self.burn_in < 0:
            raise ConfigurationError("burn_in must be nonnegative")
        if self.thinning < 1:
            raise ConfigurationError("thinning must be >= 1")


@dataclass
class LikelihoodEstimate:
    """An estimate in nats with its standard error and provenance."""

    value: float
    std_error: float
    method: str

    def __post_init__(self):
        if self.method == "exact" and self.std_error != 0.0:
            raise ValueError("exact estimates carry no standard error")
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")


def base_biases_from_data(data, clip: float = BASE_BIAS_CLIP) -> np.ndarray:
    """Visible biases whose independent model matches the data marginals.

    Log-odds of the empirical pixel means, clipped to +-``clip`` so constant
    pixels do not produce infinities.
    """
    rows = check_binary_matrix(getattr(data, "rows", data), "data")
    mean = rows.astype(np.float64).mean(axis=0)
    with np.errstate(divide="ignore"):
        return np.clip(np.log(mean) - np.log1p(-mean), -clip, clip)


def _interp_free_energy(params, base_bias, beta, V):
    # Grouped as base + beta * (target - base) so a zero gap telescopes to
    # exactly zero weight increments in floating point.
    pre = beta * (params.c + V @ params.W) / params.tau
    bias_gap = params.b / params.tau - base_bias
    return (-(V @ base_bias) - beta * (V @ bias_gap)
            - softplus(pre).sum(axis=1))


def ais_log_partition(params: RbmParams, cfg: AisConfig) -> LikelihoodEstimate:
    """Estimate ``log Z`` by annealing from an independent base model.

    Runs ``n_chains`` independent chains along the ladder, accumulating
    importance weights in the log domain; the standard error is a bootstrap
    over chains.
    """
    base_bias = (np.zeros(params.d) if cfg.base_visible_bias is None
                 else np.asarray(cfg.base_visible_bias, dtype=np.float64))
    if base_bias.shape != (params.d,):
        raise ConfigurationError(
            f"base_visible_bias must have shape ({params.d},), got {base_bias.shape}")

    rng = as_rng(cfg.seed)
    log_z_base = params.h * np.log(2.0) + softplus(base_bias).sum()
    betas = np.linspace(0.0, 1.0, cfg.n_temperatures)

    V = (rng.random((cfg.n_chains, params.d)) < expit(base_bias)).astype(np.float64)
    log_w = np.zeros(cfg.n_chains)
    for i in range(1, cfg.n_temperatures):
        log_w += (_interp_free_energy(params, base_bias, betas[i - 1], V)
                  - _interp_free_energy(params, base_bias, betas[i], V))
        if i == cfg.n_temperatures - 1:
            break
        beta = betas[i]
        for _ in range(cfg.transitions_per_temp):
            ph = expit(beta * (params.c + V @ params.W) / params.tau)
            Hs = (rng.random(ph.shape) < ph).astype(np.float64)
            pv = expit((1.0 - beta) * base_bias
                       + beta * (params.b + Hs @ params.W.T) / params.tau)
            V = (rng.random(pv.shape) < pv).astype(np.float64)

    log_z = float(log_z_base + logsumexp(log_w) - np.log(cfg.n_chains))
    if not np.isfinite(log_z):
        raise EstimationFailedError("all AIS weights degenerated; no finite estimate")

    if np.ptp(log_w) == 0.0:
        std_error = 0.0
    else:
        draws = rng.integers(0, cfg.n_chains, size=(_BOOTSTRAP_RESAMPLES, cfg.n_chains))
        resampled = logsumexp(log_w[draws], axis=1) - np.log(cfg.n_chains)
        std_error = float(resampled.std(ddof=1))
    return LikelihoodEstimate(log_z, std_error, "AIS")


def ais_avg_log_likelihood(params: RbmParams, data, cfg: AisConfig) -> LikelihoodEstimate:
    """Average data log-likelihood using the AIS partition-function estimate."""
    rows = check_binary_matrix(getattr(data, "rows", data), "data")
    z = ais_log_partition(params, cfg)
    value = float(np.mean(-model.free_energy(params, rows)) - z.value)
    return LikelihoodEstimate(value, z.std_error, "AIS")


def csl_log_likelihood(params: RbmParams, data, cfg: CslConfig) -> LikelihoodEstimate:
    """Conservative likelihood: mean over data of ``log mean_h p(v | h)``.

    Hidden samples come from one Gibbs chain on the model (burn-in, then
    thinned); each datum is scored against the same sample set.
    """
    rows = check_binary_matrix(getattr(data, "rows", data), "data")
    if rows.shape[1] != params.d:
        raise ValueError(f"data width {rows.shape[1]} does not match D={params.d}")
    rng = as_rng(cfg.seed)

    v = (rng.random(params.d) < 0.5).astype(np.uint8)
    h = None
    for _ in range(cfg.burn_in):
        v, h = model.gibbs_step(params, v, rng)
    hidden = np.empty((cfg.n_hidden_samples, params.h), dtype=np.uint8)
    for s in range(cfg.n_hidden_samples):
        for _ in range(cfg.thinning):
            v, h = model.gibbs_step(params, v, rng)
        hidden[s] = h

    # log p(v|h) = sum_i v_i x_i - softplus(x_i) at x = (b + W h) / tau
    X = (params.b + hidden.astype(np.float64) @ params.W.T) / params.tau
    log_cond = rows.astype(np.float64) @ X.T - softplus(X).sum(axis=1)[None, :]
    scores = logsumexp(log_cond, axis=1) - np.log(cfg.n_hidden_samples)

    value = float(scores.mean())
    n = scores.shape[0]
    std_error = float(scores.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return LikelihoodEstimate(value, std_error, "CSL")


def exact_avg_log_likelihood(params: RbmParams, data) -> LikelihoodEstimate:
    """Exact average log-likelihood, wrapped with zero standard error."""
    rows = check_binary_matrix(getattr(data, "rows", data), "data")
    return LikelihoodEstimate(model.exact_avg_log_likelihood(params, rows), 0.0, "exact")


def kl_visible(p_params: RbmParams, q_params: RbmParams) -> float:
    """``KL(p || q)`` over visible states by exact enumeration (D <= 12)."""
    if p_params.d != q_params.d:
        raise ValueError("models must share the visible dimension")
    if p_params.d > 12:
        raise CapacityError(f"D = {p_params.d} exceeds the 2^12 enumeration cap")
    log_p = model.exact_visible_log_probs(p_params)
    log_q = model.exact_visible_log_probs(q_params)
    return float(np.sum(np.exp(log_p) * (log_p - log_q)))
