"""Training loops: CD-k, PCD, and the probability-flow methods.

All update rules return a gradient with the convention that the optimizer
applies ``theta <- theta - learning_rate * gradient``, so one SGD path serves
every method.  Runs are deterministic for a fixed seed: a single generator
drives shuffling, Gibbs sampling, and chain management in a fixed order.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import model
from .exceptions import ConfigurationError, TrainingDivergedError
from .flow import (Factorized, FlowValue, FullEnumeration, OneBitFlip,
                   TransitionSpec, factorized_flow, one_bit_flip_flow)
from .model import ParamGradient, RbmParams, weighted_free_energy_grad
from .validation import as_rng, check_binary_matrix

METHODS = ("cd", "pcd", "mpf1", "fmpf", "pmpf", "fpmpf")
_PERSISTENT_METHODS = ("pcd", "pmpf", "fpmpf")


@dataclass
class TrainConfig:
    """Hyperparameters of a training run."""

    method: str
    learning_rate: float
    epochs: int
    batch_size: int
    k: int = 1
    n_chains: int = 25
    seed: int = 0
    eval_every: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.n_chains < 1:
            raise ConfigurationError("n_chains must be >= 1")
        if self.eval_every < 0:
            raise ConfigurationError("eval_every must be nonnegative")


@dataclass
class ChainPool:
    """Persistent sampler states that survive across updates and epochs."""

    states: np.ndarray
    origin: str = "data-initialized"

    def __post_init__(self):
        self.states = check_binary_matrix(self.states, "pool states")


@dataclass
class TraceRecord:
    epoch: int
    objective: float
    loglik: float | None
    overflows: int
    seconds: float


@dataclass
class TrainTrace:
    """Per-epoch training records."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord):
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("trace epochs must be strictly increasing")
        self.records.append(record)

    def write_csv(self, path, include_seconds: bool = True):
        """Write the metrics CSV; the seconds column is blanked when timing
        must not leak into byte-for-byte reproducible output."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "objective", "loglik", "overflows", "seconds"])
            for r in self.records:
                loglik = "" if r.loglik is None else repr(r.loglik)
                seconds = f"{r.seconds:.3f}" if include_seconds else ""
                writer.writerow([r.epoch, repr(r.objective), loglik, r.overflows, seconds])


def gibbs_chain(params: RbmParams, states, k: int, rng) -> np.ndarray:
    """Advance a batch of visible states by k block Gibbs transitions."""
    v = check_binary_matrix(states, "states")
    for _ in range(k):
        v, _ = model.gibbs_step(params, v, rng)
    return v


def cd_k_update(params: RbmParams, batch, k: int, rng) -> ParamGradient:
    """CD-k gradient: data term minus the term at k-step Gibbs reconstructions.

    Estimates the gradient of the negative log-likelihood, so subtracting
    ``learning_rate * gradient`` moves the model toward the data.
    """
    batch = check_binary_matrix(batch, "batch")
    rng = as_rng(rng)
    negative = gibbs_chain(params, batch, k, rng)
    n = batch.shape[0]
    w = np.full(n, 1.0 / n)
    return (weighted_free_energy_grad(params, batch, w)
            - weighted_free_energy_grad(params, negative, w))


def pcd_update(params: RbmParams, batch, pool: ChainPool, k: int,
               rng) -> tuple[ParamGradient, ChainPool]:
    """Persistent CD: the negative term comes from long-lived chains."""
    batch = check_binary_matrix(batch, "batch")
    rng = as_rng(rng)
    advanced = gibbs_chain(params, pool.states, k, rng)
    n, m = batch.shape[0], advanced.shape[0]
    grad = (weighted_free_energy_grad(params, batch, np.full(n, 1.0 / n))
            - weighted_free_energy_grad(params, advanced, np.full(m, 1.0 / m)))
    return grad, ChainPool(advanced, origin="persisted")


def _draw_sample_starts(batch: np.ndarray, count: int, rng) -> np.ndarray:
    if count == batch.shape[0]:
        return batch
    idx = rng.integers(0, batch.shape[0], size=count)
    return batch[idx]


def mpf_update(params: RbmParams, prev_params: RbmParams, batch,
               spec: TransitionSpec, pool: ChainPool | None, k: int,
               rng) -> tuple[FlowValue, ChainPool | None]:
    """One probability-flow update under the given connectivity.

    One-bit-flip connectivity needs no sampler.  Factorized connectivity
    draws its fantasy set by k Gibbs steps under ``prev_params``: from the
    batch when non-persistent, from the pool when persistent, or from both
    when the two sample sets are combined.  Returns the flow value and the
    (possibly updated) pool.
    """
    batch = check_binary_matrix(batch, "batch")
    rng = as_rng(rng)
    conn = spec.connectivity
    if isinstance(conn, OneBitFlip):
        return one_bit_flip_flow(params, batch), None
    if isinstance(conn, FullEnumeration):
        raise ConfigurationError("full-enumeration connectivity is an oracle tool, "
                                 "not a training method")
    assert isinstance(conn, Factorized)
    if conn.persistent and pool is None:
        raise ConfigurationError("persistent connectivity requires a chain pool")

    sample_sets = []
    if not conn.persistent or conn.combine_nonpersistent:
        starts = _draw_sample_starts(batch, conn.sample_count, rng)
        sample_sets.append(gibbs_chain(prev_params, starts, k, rng))
    new_pool = pool
    if conn.persistent:
        persisted = gibbs_chain(prev_params, pool.states, k, rng)
        sample_sets.append(persisted)
        new_pool = ChainPool(persisted, origin="persisted")
    samples = np.vstack(sample_sets)
    return factorized_flow(params, prev_params, batch, samples), new_pool


def _spec_for_method(config: TrainConfig) -> TransitionSpec | None:
    if config.method == "mpf1":
        return TransitionSpec(OneBitFlip())
    if config.method == "fmpf":
        return TransitionSpec(Factorized(config.n_chains))
    if config.method == "pmpf":
        return TransitionSpec(Factorized(config.n_chains, persistent=True))
    if config.method == "fpmpf":
        return TransitionSpec(Factorized(config.n_chains, persistent=True,
                                         combine_nonpersistent=True))
    return None


def fit(params0: RbmParams, data, config: TrainConfig,
        eval_hook=None) -> tuple[RbmParams, TrainTrace]:
    """Train by SGD over shuffled minibatches.

    ``eval_hook(params, epoch) -> float`` is called every ``eval_every``
    epochs and its value is stored in the trace.  For the flow methods the
    traced objective is the mean flow value across the epoch's updates; for
    CD/PCD, which have no objective, it is the mean data free energy, a
    conventional progress monitor.
    """
    rows = check_binary_matrix(getattr(data, "rows", data), "data")
    if rows.shape[1] != params0.d:
        raise ValueError(f"data width {rows.shape[1]} does not match D={params0.d}")
    if config.batch_size > rows.shape[0]:
        raise ConfigurationError("batch_size exceeds the dataset size")

    rng = as_rng(config.seed)
    params = params0.copy()
    spec = _spec_for_method(config)
    trace = TrainTrace()

    pool = None
    if config.method in _PERSISTENT_METHODS:
        idx = rng.integers(0, rows.shape[0], size=config.n_chains)
        pool = ChainPool(rows[idx].copy(), origin="data-initialized")

    lr = config.learning_rate
    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = rng.permutation(rows.shape[0])
        objectives = []
        overflows = 0
        for start in range(0, rows.shape[0], config.batch_size):
            batch = rows[order[start:start + config.batch_size]]
            if config.method == "cd":
                grad = cd_k_update(params, batch, config.k, rng)
                objectives.append(float(np.mean(model.free_energy(params, batch))))
            elif config.method == "pcd":
                grad, pool = pcd_update(params, batch, pool, config.k, rng)
                objectives.append(float(np.mean(model.free_energy(params, batch))))
            else:
                prev = params.copy()
                value, pool = mpf_update(params, prev, batch, spec, pool,
                                         config.k, rng)
                grad = value.gradient
                objectives.append(value.objective)
                overflows += value.overflows

            with np.errstate(over="ignore", invalid="ignore"):
                params.W -= lr * grad.dW
                params.b -= lr * grad.db
                params.c -= lr * grad.dc
            if not (np.all(np.isfinite(params.W)) and np.all(np.isfinite(params.b))
                    and np.all(np.isfinite(params.c))):
                raise TrainingDivergedError(
                    f"non-finite parameters after epoch {epoch} "
                    f"(method {config.method}, lr {lr})", trace=trace)

        loglik = None
        if eval_hook is not None and config.eval_every > 0 \
                and (epoch + 1) % config.eval_every == 0:
            loglik = float(eval_hook(params, epoch))
        trace.append(TraceRecord(
            epoch=epoch,
            objective=float(np.mean(objectives)) if objectives else float("nan"),
            loglik=loglik,
            overflows=overflows,
            seconds=time.perf_counter() - started,
        ))
    return params, trace
