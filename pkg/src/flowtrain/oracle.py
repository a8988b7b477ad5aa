"""Executable ground truth for the flow dynamics on enumerable state spaces.

Builds the explicit rate matrix over all visible states, checks detailed
balance and stationarity, integrates the continuous-time dynamics, and
validates the first-order relation between the KL divergence after a short
evolution and the flow objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import expm_multiply

from . import model
from .exceptions import CapacityError, ConfigurationError, EstimationFailedError
from .flow import Factorized, FullEnumeration, OneBitFlip, TransitionSpec
from .model import RbmParams
from .validation import check_binary_matrix, check_probability_vector

# 2^12 states (16.7M rate entries) keeps every oracle run in the seconds range.
MAX_ORACLE_BITS = 12


@dataclass
class ExplicitChain:
    """Dense rate matrix over the canonical state enumeration.

    ``rates[i, j]`` is the flow rate from state ``j`` to state ``i``; the
    diagonal is set so every column sums to zero, making ``dp/dt = rates @ p``
    the master equation of the chain.
    """

    rates: np.ndarray
    n_bits: int
    spec: TransitionSpec

    def __post_init__(self):
        n = 1 << self.n_bits
        if self.rates.shape != (n, n):
            raise ValueError(f"rates must have shape ({n}, {n})")
        col_sums = self.rates.sum(axis=0)
        scale = np.maximum(1.0, np.abs(self.rates).max(axis=0))
        if np.any(np.abs(col_sums) > 1e-12 * scale):
            raise ValueError("columns of the rate matrix must sum to zero")

    @property
    def n_states(self) -> int:
        return 1 << self.n_bits


class TaylorRow(NamedTuple):
    epsilon: float
    kl_divergence: float
    linear_prediction: float


def _log_rates_from_gaps(gap: np.ndarray, odd) -> np.ndarray:
    """Log rate for free-energy gaps ``gap = F_to - F_from`` (g = 1)."""
    return 0.5 * (odd(gap) + 1.0) * (-gap)


def build_chain(params: RbmParams, spec: TransitionSpec) -> ExplicitChain:
    """Explicit rate matrix for the given connectivity over all visible states."""
    if params.d > MAX_ORACLE_BITS:
        raise CapacityError(f"D = {params.d} exceeds the 2^{MAX_ORACLE_BITS} oracle cap")
    conn = spec.connectivity
    if isinstance(conn, Factorized):
        raise ConfigurationError(
            "factorized connectivity is asymmetric and has no explicit detailed-"
            "balance chain; build with OneBitFlip or FullEnumeration")

    n = 1 << params.d
    F = model.free_energy(params, model.enumerate_states(params.d))
    rates = np.zeros((n, n))

    if isinstance(conn, OneBitFlip):
        idx = np.arange(n)
        for bit in range(params.d):
            partner = idx ^ (1 << bit)
            rates[partner, idx] = np.exp(_log_rates_from_gaps(F[partner] - F[idx], spec.odd))
    elif isinstance(conn, FullEnumeration):
        chunk = max(1, (1 << 22) // n)
        for start in range(0, n, chunk):
            rows = slice(start, min(start + chunk, n))
            gap = F[rows][:, None] - F[None, :]
            rates[rows] = np.exp(_log_rates_from_gaps(gap, spec.odd))
        np.fill_diagonal(rates, 0.0)
    else:
        raise ConfigurationError(f"unsupported connectivity {conn!r}")

    # Column sums must vanish; one correction pass removes the rounding left
    # by summing the freshly placed diagonal together with the off-diagonals.
    np.fill_diagonal(rates, 0.0)
    diag = -rates.sum(axis=0)
    np.fill_diagonal(rates, diag)
    residual = rates.sum(axis=0)
    np.fill_diagonal(rates, diag - residual)
    return ExplicitChain(rates, params.d, spec)


def check_detailed_balance(chain: ExplicitChain, params: RbmParams) -> float:
    """Max relative violation of ``rate(i->j) e^-F_i == rate(j->i) e^-F_j``.

    Each connected pair is compared in the log domain and rescaled by the
    larger side, which keeps the relative measure meaningful even when the
    products under- or overflow as raw doubles.
    """
    if params.d != chain.n_bits:
        raise ValueError("chain and params disagree on the number of visible units")
    F = model.free_energy(params, model.enumerate_states(params.d))
    off = chain.rates.copy()
    np.fill_diagonal(off, 0.0)
    iu, ju = np.nonzero(np.triu((off > 0) | (off.T > 0), k=1))
    if iu.size == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        log_rates = np.log(off)
    # flow i -> j carries e^-F_i; flow j -> i carries e^-F_j
    a = log_rates[ju, iu] - F[iu]
    b = log_rates[iu, ju] - F[ju]
    m = np.maximum(a, b)
    live = m > -np.inf
    viol = np.abs(np.exp(a[live] - m[live]) - np.exp(b[live] - m[live]))
    return float(viol.max(initial=0.0))


def stationary_distribution(params: RbmParams) -> np.ndarray:
    """Exact ``p(v)`` over the canonical enumeration (the chain's fixed point)."""
    return np.exp(model.exact_visible_log_probs(params))


def stationarity_residual(chain: ExplicitChain, params: RbmParams) -> float:
    """``max |rates @ p|`` at the exact stationary distribution."""
    if params.d != chain.n_bits:
        raise ValueError("chain and params disagree on the number of visible units")
    p = stationary_distribution(params)
    return float(np.abs(chain.rates @ p).max())


def evolve(chain: ExplicitChain, p0, t: float) -> np.ndarray:
    """Propagate a distribution for time ``t`` under the master equation.

    Returns ``expm(t * rates) @ p0``.  Entries more negative than -1e-12 or a
    total mass off by more than 1e-9 indicate an integration failure.
    """
    p0 = check_probability_vector(p0, chain.n_states, "p0")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return p0.copy()
    out = expm_multiply(chain.rates * t, p0)
    if np.any(out < -1e-12) or abs(out.sum() - 1.0) > 1e-9:
        raise EstimationFailedError(
            f"master-equation integration failed (min {out.min():.3g}, "
            f"sum {out.sum()!r})")
    return np.clip(out, 0.0, None)


def empirical_distribution(rows, n_bits: int) -> np.ndarray:
    """Empirical state distribution of a batch in canonical order."""
    rows = check_binary_matrix(rows, "rows")
    if rows.shape[1] != n_bits:
        raise ValueError(f"rows have width {rows.shape[1]}, expected {n_bits}")
    idx = (rows.astype(np.int64) << np.arange(n_bits)).sum(axis=1)
    p0 = np.bincount(idx, minlength=1 << n_bits).astype(np.float64)
    return p0 / p0.sum()


def flow_objective_from_chain(chain: ExplicitChain, p0: np.ndarray) -> float:
    """Initial probability outflow from the support of ``p0`` to its complement."""
    data = p0 > 0
    if not data.any() or data.all():
        return 0.0
    off = chain.rates.copy()
    np.fill_diagonal(off, 0.0)
    return float((off[np.ix_(~data, data)] @ p0[data]).sum())


def taylor_check(chain: ExplicitChain, rows, epsilons) -> list[TaylorRow]:
    """KL divergence after short evolutions versus its linear prediction.

    For each ``eps`` returns ``KL(p0 || p_eps)`` alongside ``eps * J`` where
    ``J`` is the initial outflow from the data support; the ratio of the two
    converges to 1 as ``eps`` shrinks.
    """
    p0 = empirical_distribution(rows, chain.n_bits)
    if not np.any(p0 == 0):
        raise ValueError("data must cover a strict subset of the state space")
    j = flow_objective_from_chain(chain, p0)
    support = p0 > 0
    out = []
    for eps in epsilons:
        eps = float(eps)
        if eps == 0.0:
            out.append(TaylorRow(0.0, 0.0, 0.0))
            continue
        p_eps = evolve(chain, p0, eps)
        kl = float(np.sum(p0[support] * (np.log(p0[support]) - np.log(p_eps[support]))))
        out.append(TaylorRow(eps, kl, eps * j))
    return out


def is_irreducible(chain: ExplicitChain) -> bool:
    """True when every state can reach every other along positive rates."""
    off = chain.rates.copy()
    np.fill_diagonal(off, 0.0)
    n_comp, _ = connected_components(csr_matrix(off > 0), directed=True,
                                     connection="strong")
    return n_comp == 1
