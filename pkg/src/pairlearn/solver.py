"""Solvers for regularized pairwise learning in representer form.

The estimator minimizes the (shifted) empirical pairwise risk plus
``lam * ||f||_H^2`` over the RKHS of the chosen kernel.  Any minimizer
satisfies the fixed-point identity ``alpha = -g(alpha) / (2 lam)`` where
``g`` is the coefficient gradient of the risk, which drives the default
damped fixed-point iteration; a gradient-descent mode with Armijo
backtracking serves the non-convex case, and non-smooth convex losses fall
back to subgradient descent.

Shifting the loss changes the objective by a constant only, so both the
plain and the shifted problem share minimizers; the optimizer always works
with the shifted objective internally, making fits under either version of
the loss bit-identical.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _jsonio
from .exceptions import ConvergenceWarning
from .kernels import Kernel, RkhsFunction, evaluate, h_norm_sq
from .losses import loss_from_params
from .risk import (
    Dataset,
    _check_weights,
    _risk_gradient_fvals,
    empirical_risk,
    empirical_shifted_risk,
)

logger = logging.getLogger(__name__)

_MIN_DAMPING = 1e-8
_ARMIJO_C1 = 1e-4
_ARMIJO_BACKTRACK = 0.5
_SUBGRAD_STALL_WINDOW = 50


@dataclass(frozen=True)
class SolverOptions:
    """Options controlling :func:`fit`.

    Parameters
    ----------
    tol : float
        Convergence threshold on the H-seminorm of the stationarity residual.
    max_iter : int
        Iteration cap.
    damping : float, in (0, 1]
        Damping of the fixed-point update.  Treated as an upper limit: a step
        is halved until the residual decreases, and the accepted damping is
        carried over to the next iteration.
    line_search : bool
        Armijo backtracking in gradient-descent mode; without it a constant
        step of ``damping`` is used.
    mode : str or None
        ``"fixed_point"`` or ``"gradient_descent"``; ``None`` selects
        fixed-point for convex differentiable losses and gradient descent
        otherwise.  Non-smooth losses always use subgradient descent.
    warn_nonconvex : bool
        Emit a warning when fitting a non-convex loss.
    """

    tol: float = 1e-8
    max_iter: int = 10000
    damping: float = 0.5
    line_search: bool = True
    mode: str | None = None
    warn_nonconvex: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.mode not in (None, "fixed_point", "gradient_descent"):
            raise ValueError(f"unknown solver mode {self.mode!r}")


@dataclass(frozen=True)
class FittedModel:
    """A fitted pairwise learning model ``f = sum_i alpha_i k(., x_i)``.

    ``data`` and ``weights`` record the (possibly weighted) training measure
    so that diagnostics can be recomputed; models loaded from disk carry the
    function only.
    """

    function: RkhsFunction
    lam: float
    loss: object
    diagnostics: dict
    data: Dataset | None = None
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def alpha(self):
        return self.function.coefficients

    @property
    def kernel(self):
        return self.function.kernel

    def predict(self, xs):
        return evaluate(self.function, xs)


class _State:
    """Gradient state of the objective at one coefficient vector."""

    __slots__ = ("alpha", "fvals", "g", "resid_dir", "residual")

    def __init__(self, loss, ys, gram, lam, weights, alpha):
        self.alpha = alpha
        self.fvals = gram @ alpha
        self.g = _risk_gradient_fvals(loss, ys, self.fvals, weights)
        self.resid_dir = self.g + 2.0 * lam * alpha
        self.residual = float(
            np.sqrt(max(self.resid_dir @ gram @ self.resid_dir, 0.0))
        )


def fit(loss, data, kernel, lam, opts=None, weights=None, shifted=False,
        alpha0=None):
    """Fit the regularized pairwise learning estimator.

    Parameters
    ----------
    loss : PairwiseLoss
    data : Dataset
    kernel : Kernel
    lam : float
        Regularization constant, positive.
    opts : SolverOptions, optional
    weights : array-like, optional
        Atom weights of the training measure (default uniform).  Used by the
        contamination probes.
    shifted : bool
        Report the shifted-risk objective instead of the plain one.  The
        coefficient path is identical either way.
    alpha0 : array-like, optional
        Warm start for testing; production fits always start from zero.

    Returns
    -------
    FittedModel
        Converged when the H-seminorm of ``g + 2*lam*alpha`` is at most
        ``opts.tol``; otherwise returned best-effort with a warning and
        ``diagnostics["converged"] = False``.
    """
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError("lam must be positive")
    opts = opts or SolverOptions()
    w = _check_weights(weights, data.n)
    gram = kernel.gram(data.xs)
    alpha = (
        np.zeros(data.n)
        if alpha0 is None
        else np.asarray(alpha0, dtype=float).reshape(-1).copy()
    )
    if alpha.shape[0] != data.n:
        raise ValueError("alpha0 length does not match the sample size")

    nonconvex = not loss.convex
    if nonconvex and opts.warn_nonconvex:
        warnings.warn(
            f"{loss.family} loss is not convex; the fit is a stationary "
            "point and may depend on the initialization",
            ConvergenceWarning,
        )

    if not loss.differentiable:
        alpha, diag = _subgradient_descent(loss, data, gram, lam, w, opts, alpha)
        diag["mode"] = "subgradient"
    else:
        mode = opts.mode or ("fixed_point" if loss.convex else "gradient_descent")
        if mode == "fixed_point":
            alpha, diag = _fixed_point(loss, data, gram, lam, w, opts, alpha)
        else:
            alpha, diag = _gradient_descent(loss, data, gram, lam, w, opts, alpha)
        diag["mode"] = mode

    if not diag["converged"]:
        warnings.warn(
            f"solver did not reach tol={opts.tol:g} within "
            f"{opts.max_iter} iterations (residual {diag['final_residual']:.3e})",
            ConvergenceWarning,
        )
    diag["nonconvex_warning"] = nonconvex

    risk_fn = empirical_shifted_risk if shifted else empirical_risk
    diag["objective"] = risk_fn(loss, data, gram @ alpha, w) + lam * float(
        max(alpha @ gram @ alpha, 0.0)
    )
    diag["shifted"] = shifted

    function = RkhsFunction(alpha, data.xs, kernel)
    return FittedModel(
        function=function, lam=lam, loss=loss, diagnostics=diag,
        data=data, weights=w,
    )


def _shifted_objective(loss, data, gram, lam, w, alpha, fvals):
    return empirical_shifted_risk(loss, data, fvals, w) + lam * float(
        max(alpha @ gram @ alpha, 0.0)
    )


def _fixed_point(loss, data, gram, lam, w, opts, alpha):
    """Damped fixed-point iteration on ``alpha = -g(alpha) / (2 lam)``.

    The damping backtracks until the residual decreases, which is always
    possible for convex losses since the update is a descent direction of
    the squared residual.
    """
    state = _State(loss, data.ys, gram, lam, w, alpha)
    damping = opts.damping
    iterations = 0
    while iterations < opts.max_iter and state.residual > opts.tol:
        step = -state.g / (2.0 * lam) - state.alpha
        d = damping
        while True:
            cand = _State(loss, data.ys, gram, lam, w, state.alpha + d * step)
            if cand.residual < state.residual or d <= _MIN_DAMPING:
                break
            d *= 0.5
        if cand.residual >= state.residual:
            break  # no progress possible at the smallest damping
        state = cand
        damping = min(opts.damping, d * 1.5)
        iterations += 1
    return state.alpha, {
        "iterations": iterations,
        "final_residual": state.residual,
        "converged": state.residual <= opts.tol,
    }


def _gradient_descent(loss, data, gram, lam, w, opts, alpha):
    """Steepest descent on the regularized (shifted) objective.

    The search direction is the negative H-gradient in coefficient space;
    with Armijo backtracking the objective is non-increasing per iteration.
    Terminates early once objective improvements stall at float resolution,
    below which descent on the objective cannot make progress.
    """
    state = _State(loss, data.ys, gram, lam, w, alpha)
    obj = _shifted_objective(loss, data, gram, lam, w, alpha, state.fvals)
    iterations = 0
    stalled = 0
    while iterations < opts.max_iter and state.residual > opts.tol:
        direction = -state.resid_dir
        slope = -float(state.residual**2)  # <H-grad, direction>_H
        if opts.line_search:
            step = 1.0
            while True:
                cand_alpha = state.alpha + step * direction
                cand = _State(loss, data.ys, gram, lam, w, cand_alpha)
                cand_obj = _shifted_objective(
                    loss, data, gram, lam, w, cand_alpha, cand.fvals
                )
                if cand_obj <= obj + _ARMIJO_C1 * step * slope:
                    break
                step *= _ARMIJO_BACKTRACK
                if step < 1e-15:
                    cand, cand_obj = None, None
                    break
            if cand is None:
                break  # flat to machine precision
        else:
            cand_alpha = state.alpha + opts.damping * direction
            cand = _State(loss, data.ys, gram, lam, w, cand_alpha)
            cand_obj = _shifted_objective(
                loss, data, gram, lam, w, cand_alpha, cand.fvals
            )
        if obj - cand_obj <= 4.0 * np.finfo(float).eps * max(1.0, abs(obj)):
            stalled += 1
        else:
            stalled = 0
        state, obj = cand, cand_obj
        iterations += 1
        if stalled >= 20:
            break
    return state.alpha, {
        "iterations": iterations,
        "final_residual": state.residual,
        "converged": state.residual <= opts.tol,
    }


def _subgradient_descent(loss, data, gram, lam, w, opts, alpha):
    """Subgradient descent with diminishing steps for non-smooth losses.

    Best-effort: tracks the best iterate by objective and declares
    convergence when the best objective stalls (improvement below tol) for
    a full window of iterations.
    """
    state = _State(loss, data.ys, gram, lam, w, alpha)
    best_alpha = state.alpha
    best_obj = _shifted_objective(loss, data, gram, lam, w, alpha, state.fvals)
    stall = 0
    iterations = 0
    eta0 = opts.damping
    while iterations < opts.max_iter:
        if state.residual == 0.0:
            stall = _SUBGRAD_STALL_WINDOW  # exact stationary point
            break
        eta = eta0 / np.sqrt(iterations + 1.0)
        cand_alpha = state.alpha - eta * state.resid_dir
        state = _State(loss, data.ys, gram, lam, w, cand_alpha)
        obj = _shifted_objective(loss, data, gram, lam, w, cand_alpha, state.fvals)
        if obj < best_obj - opts.tol:
            best_obj, best_alpha, stall = obj, cand_alpha, 0
        else:
            if obj < best_obj:
                best_obj, best_alpha = obj, cand_alpha
            stall += 1
        iterations += 1
        if stall >= _SUBGRAD_STALL_WINDOW:
            break
    final = _State(loss, data.ys, gram, lam, w, best_alpha)
    return best_alpha, {
        "iterations": iterations,
        "final_residual": final.residual,
        "converged": stall >= _SUBGRAD_STALL_WINDOW,
        "best_effort": True,
    }


def fit_ls_closed_form(data, kernel, lam, shifted=False):
    """Exact squared-loss fit by a linear solve.

    The squared-loss objective ``(1/n^2) sum sum ((y_i - f_i) - (y_j -
    f_j))^2 + lam * alpha' K alpha`` with ``f = K alpha`` is stationary
    exactly when ``(I + (2 / (n lam)) C K) alpha = (2 / (n lam)) C y`` with
    the centering matrix ``C = I - (1/n) 1 1'``.  A singular system falls
    back to least squares with a small diagonal jitter.
    """
    from .losses import SquaredLoss

    if not np.isfinite(lam) or lam <= 0:
        raise ValueError("lam must be positive")
    loss = SquaredLoss()
    n = data.n
    gram = kernel.gram(data.xs)
    yc = data.ys - data.ys.mean()
    factor = 2.0 / (n * lam)
    ck = factor * (gram - gram.mean(axis=0, keepdims=True))
    system = np.eye(n) + ck
    rhs = factor * yc
    try:
        alpha = np.linalg.solve(system, rhs)
        if not np.all(np.isfinite(alpha)):
            raise np.linalg.LinAlgError("non-finite solution")
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(gram) / n
        logger.warning(
            "singular closed-form system; least-squares solve with "
            "jitter %.3e", jitter,
        )
        alpha = np.linalg.lstsq(
            system + jitter * np.eye(n), rhs, rcond=None
        )[0]

    w = _check_weights(None, n)
    state = _State(loss, data.ys, gram, lam, w, alpha)
    risk_fn = empirical_shifted_risk if shifted else empirical_risk
    diag = {
        "iterations": 0,
        "final_residual": state.residual,
        "converged": True,
        "nonconvex_warning": False,
        "mode": "closed_form",
        "objective": risk_fn(loss, data, state.fvals, w)
        + lam * float(max(alpha @ gram @ alpha, 0.0)),
        "shifted": shifted,
    }
    function = RkhsFunction(alpha, data.xs, kernel)
    return FittedModel(
        function=function, lam=lam, loss=loss, diagnostics=diag,
        data=data, weights=w,
    )


def predict(model, xs):
    """Evaluate a fitted model at the rows of ``xs``."""
    return evaluate(model.function, xs)


def stationarity_residual(model, data=None, weights=None):
    """H-seminorm of ``g + 2 lam alpha`` for a fitted model.

    ``data`` defaults to the training sample stored on the model; it must be
    the sample the model was fitted on (the anchors are its inputs).
    """
    data = data if data is not None else model.data
    if data is None:
        raise ValueError("model carries no training data; pass data explicitly")
    if weights is None:
        weights = model.weights
    w = _check_weights(weights, data.n)
    if not np.array_equal(model.function.anchors, data.xs):
        raise ValueError("model anchors do not match the dataset inputs")
    gram = model.kernel.gram(data.xs)
    state = _State(model.loss, data.ys, gram, model.lam, w, model.alpha)
    return state.residual


def apriori_bound_checks(model, tol=1e-8):
    """Check the a-priori norm bounds of a fitted model.

    Returns a dict with one entry per bound: the H-norm bound
    ``||f||_H <= sqrt(R(0) / lam)`` (finite-risk losses) and the sup bound
    ``||f||_inf <= |L|_1 ||k||_inf^2 / lam`` over the training inputs
    (separately Lipschitz losses with a bounded kernel; otherwise reported
    as skipped).
    """
    if model.data is None:
        raise ValueError("model carries no training data")
    data, loss, lam = model.data, model.loss, model.lam
    consts = loss.constants()
    checks = {}

    r0 = empirical_risk(loss, data, np.zeros(data.n), model.weights)
    hnorm = float(np.sqrt(h_norm_sq(model.function)))
    rhs = float(np.sqrt(r0 / lam))
    checks["h_norm_bound"] = {
        "lhs": hnorm, "rhs": rhs, "holds": hnorm <= rhs + tol, "skipped": False,
    }

    ksup = model.kernel.sup_norm()
    if np.isfinite(consts.lip) and np.isfinite(ksup):
        fmax = float(np.max(np.abs(model.predict(data.xs))))
        rhs = consts.lip * ksup**2 / lam
        checks["sup_bound"] = {
            "lhs": fmax, "rhs": rhs, "holds": fmax <= rhs + tol, "skipped": False,
        }
    else:
        warnings.warn(
            "Lipschitz/bounded-kernel bound not applicable; check skipped",
            UserWarning,
        )
        checks["sup_bound"] = {"holds": True, "skipped": True}
    return checks


# -- persistence --------------------------------------------------------------


def _kernel_to_dict(kernel):
    out = {"family": kernel.family}
    if kernel.gamma is not None:
        out["gamma"] = kernel.gamma
    if kernel.family == "precomputed":
        out["matrix"] = kernel.matrix
    return out


def kernel_from_params(params):
    """Build a Kernel from its serialized parameter dict."""
    extra = set(params) - {"family", "gamma", "matrix"}
    if extra:
        raise ValueError(f"unknown kernel parameters {sorted(extra)}")
    if "family" not in params:
        raise ValueError("kernel block requires a 'family' key")
    matrix = params.get("matrix")
    if matrix is not None:
        matrix = np.asarray(matrix, dtype=float)
    return Kernel(
        family=params["family"], gamma=params.get("gamma"), matrix=matrix
    )


def model_to_dict(model):
    """JSON-serializable form of a fitted model."""
    return {
        "kernel": _kernel_to_dict(model.kernel),
        "loss": model.loss.params(),
        "lambda": model.lam,
        "alpha": model.alpha,
        "anchors": model.function.anchors,
        "diagnostics": model.diagnostics,
    }


def model_from_dict(doc):
    """Rebuild a fitted model (without its training sample) from JSON data."""
    required = {"kernel", "loss", "lambda", "alpha", "anchors", "diagnostics"}
    missing = required - set(doc)
    if missing:
        raise ValueError(f"model document misses keys {sorted(missing)}")
    kernel = kernel_from_params(doc["kernel"])
    loss = loss_from_params(doc["loss"])
    lam = float(doc["lambda"])
    alpha = np.asarray(doc["alpha"], dtype=float)
    anchors = np.asarray(doc["anchors"], dtype=float)
    function = RkhsFunction(alpha, anchors, kernel)
    return FittedModel(
        function=function, lam=lam, loss=loss,
        diagnostics=dict(doc["diagnostics"]),
    )


def save_model(model, path):
    """Write a model as deterministic JSON; round-trips coefficients exactly."""
    _jsonio.dump(model_to_dict(model), path)


def load_model(path):
    return model_from_dict(_jsonio.load(path))
