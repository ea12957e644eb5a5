"""Scikit-learn compatible estimator wrapping the pairwise learning solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .kernels import Kernel
from .losses import PairwiseLoss, make_loss
from .risk import Dataset, empirical_risk
from .solver import SolverOptions, fit, stationarity_residual


class PairwiseKernelRegressor(BaseEstimator):
    """Regularized pairwise learning with a kernel.

    Minimizes the empirical pairwise risk, the average of
    ``loss(x_i, y_i, x_j, y_j, f(x_i), f(x_j))`` over all ordered sample
    pairs, plus ``lam`` times the squared RKHS norm of ``f``.  The fitted
    function has the representer form ``f = sum_i alpha_i k(., x_i)``.

    For difference-of-residual losses the objective is invariant under
    adding a constant to all predictions, so ``predict`` estimates the
    response up to an additive constant.

    Parameters
    ----------
    loss : str or PairwiseLoss, default="logistic_pairwise"
        Loss family name (see ``pairlearn.losses.LOSS_FAMILIES``) or a loss
        instance.
    a : float, default=1.0
        Smoothing parameter of the logistic families.
    h : float, default=1.0
        Bandwidth of the ``mee`` family.
    kernel : str or Kernel, default="gaussian_rbf"
    gamma : float, default=1.0
        RBF width.
    lam : float, default=1.0
        Regularization constant.
    tol, max_iter, damping, mode, shifted :
        Passed through to the solver; see
        :class:`~pairlearn.solver.SolverOptions`.

    Attributes
    ----------
    alpha_ : ndarray of shape (n_samples,)
        Representer coefficients over the training inputs.
    anchors_ : ndarray of shape (n_samples, n_features)
    model_ : FittedModel
        The full fitted model, accepted by the robustness diagnostics.
    diagnostics_ : dict
    """

    def __init__(self, loss="logistic_pairwise", a=1.0, h=1.0,
                 kernel="gaussian_rbf", gamma=1.0, lam=1.0, tol=1e-8,
                 max_iter=10000, damping=0.5, mode=None, shifted=False):
        self.loss = loss
        self.a = a
        self.h = h
        self.kernel = kernel
        self.gamma = gamma
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter
        self.damping = damping
        self.mode = mode
        self.shifted = shifted

    def _build_loss(self):
        if isinstance(self.loss, PairwiseLoss):
            return self.loss
        return make_loss(self.loss, h=self.h, a=self.a)

    def _build_kernel(self):
        if isinstance(self.kernel, Kernel):
            return self.kernel
        return Kernel(
            family=self.kernel,
            gamma=self.gamma if self.kernel != "linear" else None,
        )

    def fit(self, X, y, sample_weight=None):
        """Fit the estimator.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : array-like of shape (n_samples,)
        sample_weight : array-like of shape (n_samples,), optional
            Nonnegative atom weights of the training measure; normalized to
            sum to one.

        Returns
        -------
        self
        """
        X, y = check_X_y(X, y, y_numeric=True)
        weights = None
        if sample_weight is not None:
            sw = np.asarray(sample_weight, dtype=float)
            if sw.shape != (X.shape[0],):
                raise ValueError("sample_weight has wrong shape")
            total = sw.sum()
            if total <= 0:
                raise ValueError("sample_weight must have positive total")
            weights = sw / total
        data = Dataset(X, y)
        opts = SolverOptions(
            tol=self.tol, max_iter=self.max_iter, damping=self.damping,
            mode=self.mode,
        )
        self.model_ = fit(
            self._build_loss(), data, self._build_kernel(), self.lam,
            opts=opts, weights=weights, shifted=self.shifted,
        )
        self.alpha_ = self.model_.alpha
        self.anchors_ = self.model_.function.anchors
        self.diagnostics_ = self.model_.diagnostics
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Evaluate the fitted function at the rows of ``X``."""
        check_is_fitted(self, "model_")
        X = check_array(X)
        return self.model_.predict(X)

    def score(self, X, y):
        """Negative empirical pairwise risk on ``(X, y)`` (higher is better)."""
        check_is_fitted(self, "model_")
        X, y = check_X_y(X, y, y_numeric=True)
        data = Dataset(X, y)
        return -empirical_risk(self._build_loss(), data, self.predict(X))

    def stationarity_residual(self):
        """H-seminorm of the first-order optimality residual of the fit."""
        check_is_fitted(self, "model_")
        return stationarity_residual(self.model_)
