"""Core Bernoulli RBM mathematics.

Energy, free energy, conditionals, block Gibbs transitions, and exact
enumeration for models where one layer is small enough to sum over.

Conventions used throughout the package:

* States are numpy arrays of 0/1 entries; a single state is 1-D, a batch of
  states is 2-D with one state per row.
* The joint distribution is ``p(v, h) = exp(-E(v, h) / tau) / Z``.  The
  temperature divides the full energy before any marginalization, so the
  hidden-marginalized free energy already carries ``1/tau`` and
  ``p(v) = exp(-F(v)) / Z`` with ``Z = sum_v exp(-F(v))``.
* Enumeration order is canonical: state index ``i`` maps to the bit pattern
  of ``i`` with bit 0 stored in position 0 (least significant bit first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .exceptions import CapacityError
from .validation import as_rng, check_finite, check_states

# Largest layer size we will enumerate (2^25 states).
ENUMERATION_LIMIT = 25

# Weight-initialization scale for fresh models; biases start at zero.
INIT_WEIGHT_SCALE = 0.01


def softplus(x):
    """Numerically safe ``log(1 + exp(x))`` via ``max(x, 0) + log1p(exp(-|x|))``."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


@dataclass
class RbmParams:
    """Parameters of a Bernoulli RBM: couplings, biases, and temperature.

    ``W`` has shape (D, H) coupling visible unit i to hidden unit j; ``b`` is
    the visible bias (D,), ``c`` the hidden bias (H,), and ``tau > 0`` the
    thermodynamic temperature.
    """

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    tau: float = 1.0

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.W.ndim != 2:
            raise ValueError(f"W must be 2-D, got shape {self.W.shape}")
        d, h = self.W.shape
        if d < 1 or h < 1:
            raise ValueError("model needs at least one visible and one hidden unit")
        if self.b.shape != (d,):
            raise ValueError(f"b has shape {self.b.shape}, expected ({d},)")
        if self.c.shape != (h,):
            raise ValueError(f"c has shape {self.c.shape}, expected ({h},)")
        for name in ("W", "b", "c"):
            check_finite(getattr(self, name), name)
        self.tau = float(self.tau)
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ValueError(f"tau must be a positive finite real, got {self.tau}")

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def h(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "RbmParams":
        return RbmParams(self.W.copy(), self.b.copy(), self.c.copy(), self.tau)


@dataclass
class ParamGradient:
    """Gradient with respect to (W, b, c); shapes mirror the RbmParams."""

    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray

    def __post_init__(self):
        self.dW = np.asarray(self.dW, dtype=np.float64)
        self.db = np.asarray(self.db, dtype=np.float64)
        self.dc = np.asarray(self.dc, dtype=np.float64)
        if self.dW.ndim != 2 or self.db.ndim != 1 or self.dc.ndim != 1:
            raise ValueError("gradient components have wrong rank")
        d, h = self.dW.shape
        if self.db.shape != (d,) or self.dc.shape != (h,):
            raise ValueError("gradient component shapes disagree")

    @classmethod
    def zeros(cls, d: int, h: int) -> "ParamGradient":
        return cls(np.zeros((d, h)), np.zeros(d), np.zeros(h))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dW.ravel(), self.db, self.dc])

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.dW))
            and np.all(np.isfinite(self.db))
            and np.all(np.isfinite(self.dc))
        )

    def __add__(self, other: "ParamGradient") -> "ParamGradient":
        return ParamGradient(self.dW + other.dW, self.db + other.db, self.dc + other.dc)

    def __sub__(self, other: "ParamGradient") -> "ParamGradient":
        return ParamGradient(self.dW - other.dW, self.db - other.db, self.dc - other.dc)

    def __mul__(self, a: float) -> "ParamGradient":
        return ParamGradient(self.dW * a, self.db * a, self.dc * a)

    __rmul__ = __mul__


def init_params(d: int, h: int, seed=0, tau: float = 1.0) -> RbmParams:
    """Fresh parameters: W ~ Normal(0, 0.01^2), zero biases."""
    rng = as_rng(seed)
    W = rng.normal(0.0, INIT_WEIGHT_SCALE, size=(d, h))
    return RbmParams(W, np.zeros(d), np.zeros(h), tau)


def energy(params: RbmParams, v, h) -> float | np.ndarray:
    """Joint energy ``-v'Wh - b'v - c'h``; temperature is not applied here.

    Accepts single states or aligned batches; returns a scalar or a vector.
    """
    v = check_states(v, params.d, "v")
    h = check_states(h, params.h, "h")
    if v.ndim != h.ndim:
        raise ValueError("v and h must both be single states or both be batches")
    vf = v.astype(np.float64)
    hf = h.astype(np.float64)
    if v.ndim == 1:
        return float(-(vf @ params.W @ hf) - params.b @ vf - params.c @ hf)
    if v.shape[0] != h.shape[0]:
        raise ValueError("batch sizes of v and h disagree")
    coupling = np.einsum("nd,dh,nh->n", vf, params.W, hf)
    return -(coupling + vf @ params.b + hf @ params.c)


def hidden_preactivations(params: RbmParams, v) -> np.ndarray:
    """``c + W'v`` for one or many visible states (temperature not applied)."""
    v = check_states(v, params.d, "v")
    return params.c + v.astype(np.float64) @ params.W


def free_energy(params: RbmParams, v) -> float | np.ndarray:
    """Hidden-marginalized free energy F(v) with ``exp(-F(v)) = sum_h exp(-E/tau)``.

    ``F(v) = -(b.v)/tau - sum_j softplus((c_j + (W'v)_j)/tau)``.
    """
    v = check_states(v, params.d, "v")
    pre = hidden_preactivations(params, v)
    bias = v.astype(np.float64) @ params.b
    out = -bias / params.tau - softplus(pre / params.tau).sum(axis=-1)
    return float(out) if v.ndim == 1 else out


def hidden_conditional(params: RbmParams, v) -> np.ndarray:
    """``p(h_j = 1 | v) = sigmoid((c_j + (W'v)_j) / tau)``."""
    return expit(hidden_preactivations(params, v) / params.tau)


def visible_conditional(params: RbmParams, h) -> np.ndarray:
    """``p(v_i = 1 | h) = sigmoid((b_i + (Wh)_i) / tau)``."""
    h = check_states(h, params.h, "h")
    pre = params.b + h.astype(np.float64) @ params.W.T
    return expit(pre / params.tau)


def gibbs_step(params: RbmParams, v, rng) -> tuple[np.ndarray, np.ndarray]:
    """One block Gibbs transition: sample h ~ p(h|v), then v' ~ p(v|h).

    Returns ``(v', h)``.  Deterministic given the generator state; batches
    advance all rows with a single pair of draws.
    """
    v = check_states(v, params.d, "v")
    rng = as_rng(rng)
    ph = hidden_conditional(params, v)
    h = (rng.random(ph.shape) < ph).astype(np.uint8)
    pv = visible_conditional(params, h)
    v_new = (rng.random(pv.shape) < pv).astype(np.uint8)
    return v_new, h


def free_energy_grad(params: RbmParams, v) -> ParamGradient:
    """Analytic gradient of ``free_energy`` at a single visible state.

    ``db = -v/tau``, ``dc = -sigma/tau``, ``dW = -outer(v, sigma)/tau`` where
    sigma is ``hidden_conditional(params, v)``.
    """
    v = check_states(v, params.d, "v")
    if v.ndim != 1:
        raise ValueError("free_energy_grad takes a single state; "
                         "use weighted_free_energy_grad for batches")
    vf = v.astype(np.float64)
    sig = hidden_conditional(params, v)
    inv_tau = 1.0 / params.tau
    return ParamGradient(
        dW=-np.outer(vf, sig) * inv_tau,
        db=-vf * inv_tau,
        dc=-sig * inv_tau,
    )


def weighted_free_energy_grad(params: RbmParams, V, weights) -> ParamGradient:
    """``sum_n weights[n] * dF(V[n])/dtheta`` over a batch of visible states."""
    V = check_states(V, params.d, "V")
    if V.ndim != 2:
        V = V[None, :]
    Vf = V.astype(np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (Vf.shape[0],):
        raise ValueError(f"weights must have shape ({Vf.shape[0]},), got {w.shape}")
    sig = hidden_conditional(params, V)
    inv_tau = 1.0 / params.tau
    return ParamGradient(
        dW=-(Vf.T @ (w[:, None] * sig)) * inv_tau,
        db=-(w @ Vf) * inv_tau,
        dc=-(w @ sig) * inv_tau,
    )


def enumerate_states(n_bits: int) -> np.ndarray:
    """All ``2**n_bits`` binary states in canonical order (bit 0 = unit 0)."""
    if n_bits > ENUMERATION_LIMIT:
        raise CapacityError(
            f"enumerating 2^{n_bits} states exceeds the 2^{ENUMERATION_LIMIT} limit")
    idx = np.arange(1 << n_bits, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n_bits)) & 1).astype(np.uint8)


def state_index(bits) -> int:
    """Canonical integer index of a binary state (inverse of enumerate_states)."""
    bits = np.asarray(bits)
    return int((bits.astype(np.int64) << np.arange(bits.shape[-1])).sum())


def _layer_marginal_free_energy(coupling, unit_bias, other_bias, tau, states):
    """Free energy of `states` over one layer, marginalizing the other layer.

    `coupling` maps a state of this layer to the other layer's pre-activations.
    """
    pre = other_bias + states.astype(np.float64) @ coupling
    bias = states.astype(np.float64) @ unit_bias
    return -bias / tau - softplus(pre / tau).sum(axis=-1)


def exact_log_partition(params: RbmParams, chunk: int = 1 << 16) -> float:
    """Exact ``log Z`` by enumerating the smaller layer and marginalizing the other.

    Raises :class:`CapacityError` when ``min(D, H)`` exceeds the enumeration
    limit; use annealed importance sampling for such models.
    """
    if min(params.d, params.h) > ENUMERATION_LIMIT:
        raise CapacityError(
            f"min(D, H) = {min(params.d, params.h)} exceeds {ENUMERATION_LIMIT}; "
            "use AIS (likelihood.ais_log_partition) for models this large")
    if params.d <= params.h:
        n_bits = params.d
        args = (params.W, params.b, params.c)
    else:
        n_bits = params.h
        args = (params.W.T, params.c, params.b)
    total = 1 << n_bits
    pieces = []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        states = ((idx[:, None] >> np.arange(n_bits)) & 1).astype(np.uint8)
        F = _layer_marginal_free_energy(*args, params.tau, states)
        pieces.append(logsumexp(-F))
    return float(logsumexp(pieces))


def exact_visible_log_probs(params: RbmParams) -> np.ndarray:
    """``log p(v)`` for every visible state in canonical order (D <= 12)."""
    if params.d > 12:
        raise CapacityError(f"D = {params.d} exceeds the 2^12 visible-enumeration cap")
    F = free_energy(params, enumerate_states(params.d))
    return -F - logsumexp(-F)


def exact_avg_log_likelihood(params: RbmParams, rows) -> float:
    """Average ``log p(v)`` of the given rows under the exact partition function."""
    rows = check_states(rows, params.d, "rows")
    if rows.ndim == 1:
        rows = rows[None, :]
    log_z = exact_log_partition(params)
    return float(np.mean(-free_energy(params, rows)) - log_z)


def exact_nll_grad(params: RbmParams, rows) -> ParamGradient:
    """Exact gradient of the average negative log-likelihood of ``rows``.

    ``mean_data dF - E_p[dF]`` with the model expectation taken by exact
    enumeration of the visible layer (D <= 12).
    """
    rows = check_states(rows, params.d, "rows")
    if rows.ndim == 1:
        rows = rows[None, :]
    n = rows.shape[0]
    positive = weighted_free_energy_grad(params, rows, np.full(n, 1.0 / n))
    p = np.exp(exact_visible_log_probs(params))
    negative = weighted_free_energy_grad(params, enumerate_states(params.d), p)
    return positive - negative
