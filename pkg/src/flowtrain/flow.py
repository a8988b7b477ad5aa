"""Probability-flow machinery.

Pairwise flow rates between visible states, the three connectivity schemes
(one-bit-flip, factorized/probabilistic, full enumeration), and the flow
objectives with their exact gradients.

The rate from state ``j`` to state ``i`` under connectivity weight ``g`` and
odd function ``o`` is ``g * exp(((o(F_i - F_j) + 1) / 2) * (F_j - F_i))``;
with ``o = 0`` this is the classic ``g * exp((F_j - F_i) / 2)``.  Any odd
``o`` keeps the pairwise flows in detailed balance with ``p(v) = e^-F / Z``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from . import model
from .exceptions import CapacityError
from .model import ParamGradient, RbmParams, softplus, weighted_free_energy_grad
from .validation import check_binary_matrix, check_binary_vector

# Exponents beyond this magnitude are clamped before exponentiation; clamps
# are counted and surfaced so training logs can flag them.
EXP_CLAMP = 500.0

_ODD_GRID = np.linspace(-20.0, 20.0, 41)


@dataclass(frozen=True)
class OddFunction:
    """An odd map ``o`` with ``o(-x) = -o(x)``; vectorized over numpy arrays.

    Custom functions are property-checked on a fixed grid at construction.
    """

    tag: str
    fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.tag == "custom":
            if self.fn is None:
                raise ValueError("custom OddFunction requires a callable")
            vals = np.asarray(self.fn(_ODD_GRID), dtype=np.float64)
            mirrored = np.asarray(self.fn(-_ODD_GRID), dtype=np.float64)
            if not np.allclose(vals, -mirrored, atol=1e-12):
                raise ValueError("supplied function is not odd on the test grid")
            if abs(float(self.fn(np.float64(0.0)))) > 1e-12:
                raise ValueError("supplied function must satisfy o(0) = 0")
        elif self.tag not in ("zero", "identity", "tanh"):
            raise ValueError(f"unknown odd-function tag {self.tag!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.tag == "zero":
            return np.zeros_like(x)
        if self.tag == "identity":
            return x
        if self.tag == "tanh":
            return np.tanh(x)
        return np.asarray(self.fn(x), dtype=np.float64)

    @classmethod
    def zero(cls) -> "OddFunction":
        return cls("zero")

    @classmethod
    def identity(cls) -> "OddFunction":
        return cls("identity")

    @classmethod
    def tanh(cls) -> "OddFunction":
        return cls("tanh")

    @classmethod
    def custom(cls, fn: Callable) -> "OddFunction":
        return cls("custom", fn)


ODD_FUNCTIONS = {
    "zero": OddFunction.zero(),
    "identity": OddFunction.identity(),
    "tanh": OddFunction.tanh(),
}


@dataclass(frozen=True)
class OneBitFlip:
    """Connect every state to all states one bit flip away (g = 1)."""


@dataclass(frozen=True)
class Factorized:
    """Probabilistic connectivity via an independence chain.

    ``sample_count`` fantasy states approximate the model-side factor;
    ``persistent`` resumes the sampler from the previous update's states and
    ``combine_nonpersistent`` additionally mixes in freshly data-initialized
    samples.
    """

    sample_count: int
    persistent: bool = False
    combine_nonpersistent: bool = False

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


@dataclass(frozen=True)
class FullEnumeration:
    """Complete connectivity over an enumerable state space (g = 1, D <= 12)."""


@dataclass(frozen=True)
class TransitionSpec:
    """Connectivity choice plus the odd function shaping the rates."""

    connectivity: OneBitFlip | Factorized | FullEnumeration
    odd: OddFunction = OddFunction.zero()


@dataclass
class FlowValue:
    """A flow objective value with its gradient and the exponent-clamp count."""

    objective: float
    gradient: ParamGradient
    overflows: int = 0

    def __post_init__(self):
        if not (self.objective >= 0.0):
            raise ValueError(f"flow objectives are nonnegative, got {self.objective}")


def _clamped_exp(exponents: np.ndarray) -> tuple[np.ndarray, int]:
    over = int(np.count_nonzero(np.abs(exponents) > EXP_CLAMP))
    return np.exp(np.clip(exponents, -EXP_CLAMP, EXP_CLAMP)), over


def flow_rate(params: RbmParams, from_state, to_state, g: float,
              odd: OddFunction = OddFunction.zero()) -> float:
    """Pairwise flow rate from ``from_state`` to ``to_state``.

    Returns ``g * exp(((o(F_to - F_from) + 1) / 2) * (F_from - F_to))``.
    Exponents beyond +-500 are clamped with a RuntimeWarning.
    """
    if g < 0:
        raise ValueError("connectivity weight g must be nonnegative")
    from_state = check_binary_vector(from_state, params.d, "from_state")
    to_state = check_binary_vector(to_state, params.d, "to_state")
    f_from = model.free_energy(params, from_state)
    f_to = model.free_energy(params, to_state)
    gap = f_to - f_from
    exponent = 0.5 * (float(odd(gap)) + 1.0) * (-gap)
    if abs(exponent) > EXP_CLAMP:
        warnings.warn(
            f"flow-rate exponent {exponent:.3g} clamped to +-{EXP_CLAMP:g}",
            RuntimeWarning, stacklevel=2)
        exponent = float(np.clip(exponent, -EXP_CLAMP, EXP_CLAMP))
    return g * float(np.exp(exponent))


def one_bit_flip_flow(params: RbmParams, batch, chunk: int = 256) -> FlowValue:
    """Flow objective and gradient for one-bit-flip connectivity (o = 0).

    Objective: ``mean_d sum_{i in flip1(d)} exp((F(d) - F(i)) / 2)``.
    Flipped free energies reuse the cached hidden pre-activations, so the
    whole batch costs O(N * D * H).
    """
    batch = check_binary_matrix(batch, "batch")
    if batch.shape[1] != params.d:
        raise ValueError(f"batch width {batch.shape[1]} does not match D={params.d}")
    n_total = batch.shape[0]
    d, h = params.d, params.h
    inv_tau = 1.0 / params.tau

    objective = 0.0
    overflows = 0
    dW = np.zeros((d, h))
    db = np.zeros(d)
    dc = np.zeros(h)

    for start in range(0, n_total, chunk):
        V = batch[start:start + chunk].astype(np.float64)
        n = V.shape[0]
        pre = params.c + V @ params.W                          # (n, h)
        bias = V @ params.b                                    # (n,)
        F = -bias * inv_tau - softplus(pre * inv_tau).sum(axis=1)
        delta = 1.0 - 2.0 * V                                  # +1 where a flip sets the bit
        pre_flip = pre[:, None, :] + delta[:, :, None] * params.W[None, :, :]   # (n, d, h)
        F_flip = (-(bias[:, None] + delta * params.b) * inv_tau
                  - softplus(pre_flip * inv_tau).sum(axis=2))  # (n, d)
        rates, over = _clamped_exp(0.5 * (F[:, None] - F_flip))
        overflows += over
        objective += rates.sum()

        w = 0.5 * rates                                        # d(exp)/d(exponent) weights
        sig = expit(pre * inv_tau)                             # (n, h)
        sig_flip = expit(pre_flip * inv_tau)                   # (n, d, h)
        w_delta = w * delta
        m = np.einsum("ni,nij->nj", w, sig_flip)               # sum_i w_i sigma(neighbor_i)
        s_w = w.sum(axis=1)
        db += w_delta.sum(axis=0) * inv_tau
        dc += (m - s_w[:, None] * sig).sum(axis=0) * inv_tau
        dW += (V.T @ (m - s_w[:, None] * sig)
               + np.einsum("ni,nij->ij", w_delta, sig_flip)) * inv_tau

    scale = 1.0 / n_total
    grad = ParamGradient(dW * scale, db * scale, dc * scale)
    return FlowValue(objective * scale, grad, overflows)


def factorized_flow(params: RbmParams, prev_params: RbmParams,
                    batch, samples) -> FlowValue:
    """Factorized flow objective ``J_D * J_S`` with its exact gradient.

    ``J_D = mean_d exp((F(d; theta) - F(d; theta_prev)) / 2)`` over the batch,
    ``J_S = mean_s exp((F(s; theta_prev) - F(s; theta)) / 2)`` over the
    fantasy samples; the sample weights are unnormalized, so no partition
    function enters.  At ``theta == theta_prev`` the objective is exactly 1.
    """
    batch = check_binary_matrix(batch, "batch")
    samples = check_binary_matrix(samples, "samples")
    if batch.shape[1] != params.d or samples.shape[1] != params.d:
        raise ValueError("batch/sample width does not match D")
    if params.d != prev_params.d or params.h != prev_params.h:
        raise ValueError("params and prev_params have different shapes")

    f_d = np.atleast_1d(model.free_energy(params, batch))
    f_d_prev = np.atleast_1d(model.free_energy(prev_params, batch))
    f_s = np.atleast_1d(model.free_energy(params, samples))
    f_s_prev = np.atleast_1d(model.free_energy(prev_params, samples))

    u, over_d = _clamped_exp(0.5 * (f_d - f_d_prev))
    t, over_s = _clamped_exp(0.5 * (f_s_prev - f_s))
    j_data = float(u.mean())
    j_samples = float(t.mean())

    grad_data = weighted_free_energy_grad(params, batch, u / u.shape[0])
    grad_samples = weighted_free_energy_grad(params, samples, t / t.shape[0])
    grad = 0.5 * (j_samples * grad_data - j_data * grad_samples)
    return FlowValue(j_data * j_samples, grad, over_d + over_s)


def enumerate_full_flow(params: RbmParams, data_distribution, g_matrix,
                        odd: OddFunction = OddFunction.zero()) -> float:
    """Exact flow objective on an enumerated state space.

    ``sum_{j: p0_j > 0} sum_{i: p0_i = 0} p0_j * rate(i <- j)`` with the
    states in canonical order.  The empirical weights ``p0`` carry the
    ``1/|data|`` normalization, and the overall time scale is fixed at 1.
    """
    if params.d > 12:
        raise CapacityError(f"D = {params.d} exceeds the 2^12 enumeration cap for full flow")
    n_states = 1 << params.d
    p0 = np.asarray(data_distribution, dtype=np.float64)
    if p0.shape != (n_states,):
        raise ValueError(f"data_distribution must have shape ({n_states},)")
    if np.any(p0 < 0):
        raise ValueError("data_distribution must be nonnegative")
    g = np.asarray(g_matrix, dtype=np.float64)
    if g.shape != (n_states, n_states):
        raise ValueError(f"g_matrix must have shape ({n_states}, {n_states})")
    if np.any(g < 0):
        raise ValueError("g_matrix must be nonnegative")
    if not np.array_equal(g, g.T):
        raise ValueError("g_matrix must be symmetric")
    if np.any(np.diagonal(g) != 0):
        raise ValueError("g_matrix must have a zero diagonal")

    F = model.free_energy(params, model.enumerate_states(params.d))
    data_idx = np.flatnonzero(p0 > 0)
    nondata_idx = np.flatnonzero(p0 == 0)
    if data_idx.size == 0 or nondata_idx.size == 0:
        return 0.0
    gap = F[nondata_idx][:, None] - F[data_idx][None, :]       # F_i - F_j
    exponents = 0.5 * (odd(gap) + 1.0) * (-gap)
    rates, _ = _clamped_exp(exponents)
    rates *= g[np.ix_(nondata_idx, data_idx)]
    return float((rates * p0[data_idx][None, :]).sum())
