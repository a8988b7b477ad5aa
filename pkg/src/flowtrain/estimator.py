"""Scikit-learn style estimator wrapping the training loop.

``BinaryRBM`` follows the fit/transform conventions (``get_params``,
``set_params``, clonability) so trained models compose with pipelines and
model-selection utilities from the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import model
from .train import TrainConfig, fit
from .validation import as_rng, check_binary_matrix


class BinaryRBM(BaseEstimator, TransformerMixin):
    """Bernoulli RBM trained by probability flow or contrastive divergence.

    Parameters
    ----------
    n_hidden : number of hidden units.
    method : one of ``cd``, ``pcd``, ``mpf1``, ``fmpf``, ``pmpf``, ``fpmpf``.
    k : Gibbs steps per update (CD/PCD and the factorized-flow samplers).
    learning_rate, n_epochs, batch_size : SGD settings.
    n_chains : persistent/fantasy chain count for the sampling methods.
    tau : thermodynamic temperature of the trained model.
    eval_every : epochs between exact likelihood evaluations recorded in the
        trace (0 disables; requires an enumerable model).
    random_state : seed controlling initialization and every sampler.
    """

    def __init__(self, n_hidden=20, method="mpf1", k=1, learning_rate=0.05,
                 n_epochs=20, batch_size=25, n_chains=25, tau=1.0,
                 eval_every=0, random_state=0):
        self.n_hidden = n_hidden
        self.method = method
        self.k = k
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.n_chains = n_chains
        self.tau = tau
        self.eval_every = eval_every
        self.random_state = random_state

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("this BinaryRBM instance is not fitted yet")

    def fit(self, X, y=None):
        X = check_binary_matrix(X, "X")
        params0 = model.init_params(X.shape[1], self.n_hidden,
                                    seed=self.random_state, tau=self.tau)
        config = TrainConfig(
            method=self.method,
            learning_rate=self.learning_rate,
            epochs=self.n_epochs,
            batch_size=self.batch_size,
            k=self.k,
            n_chains=self.n_chains,
            seed=self.random_state,
            eval_every=self.eval_every,
        )
        hook = None
        if self.eval_every:
            hook = lambda params, epoch: model.exact_avg_log_likelihood(params, X)
        self.params_, self.trace_ = fit(params0, X, config, eval_hook=hook)
        self.n_features_in_ = X.shape[1]
        self.random_state_ = as_rng(self.random_state)
        return self

    def transform(self, X):
        """Hidden-unit activation probabilities, shape (n_samples, n_hidden)."""
        self._check_fitted()
        X = check_binary_matrix(X, "X")
        return model.hidden_conditional(self.params_, X)

    def gibbs(self, X):
        """One block Gibbs sweep from the given visible states."""
        self._check_fitted()
        X = check_binary_matrix(X, "X")
        v, _ = model.gibbs_step(self.params_, X, self.random_state_)
        return v

    def score_samples(self, X):
        """Exact ``log p(v)`` per sample; requires an enumerable model."""
        self._check_fitted()
        X = check_binary_matrix(X, "X")
        log_z = model.exact_log_partition(self.params_)
        return -np.atleast_1d(model.free_energy(self.params_, X)) - log_z

    def score(self, X, y=None):
        """Mean exact log-likelihood of ``X``."""
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples, gibbs_steps=100):
        """Draw visible samples by running fresh noise-initialized chains."""
        self._check_fitted()
        rng = self.random_state_
        V = (rng.random((n_samples, self.n_features_in_)) < 0.5).astype(np.uint8)
        for _ in range(gibbs_steps):
            V, _ = model.gibbs_step(self.params_, V, rng)
        return V
