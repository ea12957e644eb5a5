"""Empirical pairwise risks (V-statistics of degree 2) and their gradients.

The empirical risk of a prediction vector ``f`` over a weighted sample is

    R(f) = sum_i sum_j w_i w_j L(x_i, y_i, x_j, y_j, f_i, f_j),

the exact double sum over all ordered pairs, diagonal included.  Uniform
weights ``w_i = 1/n`` give the plain V-statistic ``(1/n^2) sum sum``.
Weighted sums arise from contamination mixtures, which place weight
``(1 - eps)/n`` on sample points and ``eps`` on the contaminating atom.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import RkhsFunction, evaluate, h_norm_sq


@dataclass(frozen=True)
class Dataset:
    """An ordered sample of ``(x, y)`` observations.

    Attributes
    ----------
    xs : ndarray, shape (n, d)
    ys : ndarray, shape (n,)
    """

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if xs.ndim != 2 or xs.shape[0] == 0:
            raise ValueError("xs must be a nonempty (n, d) array")
        if ys.shape[0] != xs.shape[0]:
            raise ValueError("xs and ys must have equal length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("dataset contains NaN or Inf entries")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self):
        return self.xs.shape[0]

    @property
    def dim(self):
        return self.xs.shape[1]

    def subset(self, indices):
        return Dataset(self.xs[indices], self.ys[indices])

    def append(self, x0, y0):
        x0 = np.asarray(x0, dtype=float).reshape(1, -1)
        return Dataset(np.vstack([self.xs, x0]), np.append(self.ys, float(y0)))


@dataclass(frozen=True)
class RiskReport:
    """Risk and regularized risk of one function on one sample."""

    risk: float
    regularized_risk: float
    shifted: bool
    pair_count: int


def uniform_weights(n):
    return np.full(n, 1.0 / n)


def _check_weights(weights, n):
    if weights is None:
        return uniform_weights(n)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise ValueError("weights length does not match sample size")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be nonnegative and finite")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1")
    return w


def _check_fvals(fvals, n):
    f = np.asarray(fvals, dtype=float).reshape(-1)
    if f.shape[0] != n:
        raise ValueError("fvals length does not match sample size")
    if not np.all(np.isfinite(f)):
        raise ValueError("fvals contains NaN or Inf entries")
    return f


def _pair_args(ys, fvals):
    """Broadcast views (y_i, y_j, f_i, f_j) over all ordered pairs."""
    return ys[:, None], ys[None, :], fvals[:, None], fvals[None, :]


def empirical_risk(loss, data, fvals, weights=None):
    """V-statistic risk of the prediction vector ``fvals``; nonnegative."""
    f = _check_fvals(fvals, data.n)
    w = _check_weights(weights, data.n)
    vals = loss.pair_values(*_pair_args(data.ys, f))
    return float(w @ vals @ w)


def empirical_shifted_risk(loss, data, fvals, weights=None):
    """Risk of the shifted loss; equals the risk at ``fvals`` minus the risk
    at the zero function, exactly by construction."""
    f = _check_fvals(fvals, data.n)
    return empirical_risk(loss, data, f, weights) - empirical_risk(
        loss, data, np.zeros_like(f), weights
    )


def regularized_risk(loss, data, model, lam, shifted=False, weights=None):
    """Risk plus ``lam`` times the squared H-norm of ``model``.

    ``model`` is an :class:`~pairlearn.kernels.RkhsFunction`; its anchors need
    not coincide with the data points.
    """
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError("lam must be positive")
    if not isinstance(model, RkhsFunction):
        raise ValueError("model must be an RkhsFunction")
    fvals = evaluate(model, data.xs)
    risk_fn = empirical_shifted_risk if shifted else empirical_risk
    risk = risk_fn(loss, data, fvals, weights)
    reg = risk + lam * h_norm_sq(model)
    return RiskReport(
        risk=risk, regularized_risk=reg, shifted=shifted, pair_count=data.n**2
    )


def risk_gradient_coeffs(loss, data, gram, alpha, lam, weights=None):
    """Gradient of the regularized empirical risk in coefficient space.

    For ``f = G alpha`` anchored at the data points, returns ``(g, g + 2 lam
    alpha)`` where

        g_p = sum_j w_p w_j d5(p, j) + sum_i w_i w_p d6(i, p)

    is the coefficient vector of the H-gradient of the risk.  The second
    entry is the coefficient vector of the H-gradient of the regularized
    risk; stationarity of the fit means it represents the zero function.
    """
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    gram = np.asarray(gram, dtype=float)
    n = data.n
    if alpha.shape[0] != n or gram.shape != (n, n):
        raise ValueError("alpha and gram must match the sample size")
    w = _check_weights(weights, n)
    fvals = gram @ alpha
    g = _risk_gradient_fvals(loss, data.ys, fvals, w)
    return g, g + 2.0 * lam * alpha


def _risk_gradient_fvals(loss, ys, fvals, w):
    """Risk gradient with respect to the prediction values themselves."""
    d5, d6 = loss.pair_grads(*_pair_args(ys, fvals))
    return w * (d5 @ w) + w * (d6.T @ w)


def risk_hessian_coeffs(loss, data, fvals, weights=None):
    """Hessian of the risk as a map from prediction values to gradient
    coefficients: ``W[p, q] = d g_p / d f_q``.

    Symmetric for twice differentiable losses (the mixed partials of every
    implemented family coincide) and positive semi-definite for convex ones.
    """
    f = _check_fvals(fvals, data.n)
    w = _check_weights(weights, data.n)
    d55, d56, d66 = loss.pair_seconds(*_pair_args(data.ys, f))
    diag = w * (d55 @ w + d66.T @ w)
    mat = (w[:, None] * w[None, :]) * (d56 + d56.T)
    mat[np.diag_indices_from(mat)] += diag
    return mat
