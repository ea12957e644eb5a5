"""Pairwise loss functions with analytic derivatives in the prediction pair.

A pairwise loss scores a joint prediction ``(t, tt)`` for two observations
``(x, y)`` and ``(xt, yt)``.  Every family implemented here reduces to a
scalar function ``rho`` of either

* ``u = (y - t) - (yt - tt)`` (difference-of-residual losses), or
* ``v = |y - yt| - (t - tt) * sign(y - yt)`` (ranking losses),

which gives closed forms for the partial derivatives with respect to the
last two arguments (``d5``, ``d6``) and the 2x2 matrix of second partials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import UnsupportedLossError

INF = float("inf")


@dataclass(frozen=True)
class LossConstants:
    """Constants a loss exposes for the robustness machinery.

    Attributes
    ----------
    lip : float
        Separate Lipschitz constant |L|_1; ``inf`` when not Lipschitz.
    grad_bound : float
        Uniform bound on |d5|, |d6|; ``inf`` when unbounded.
    hess_bound : float
        Uniform bound on the second partials; ``inf`` when unbounded or the
        loss is not twice differentiable.
    value_bound : float
        Uniform bound on the loss value; ``inf`` for unbounded losses.
    convex : bool
    differentiable : bool
    """

    lip: float
    grad_bound: float
    hess_bound: float
    value_bound: float
    convex: bool
    differentiable: bool


def _check_finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise ValueError("loss arguments must be finite")


class PairwiseLoss:
    """Base class for pairwise losses.

    Subclasses define the scalar representation through ``_arg`` (mapping the
    four relevant arguments to the scalar ``w`` and a sign factor) and the
    ``_rho`` family of methods.  All array methods broadcast.
    """

    family = None
    convex = None
    differentiable = None

    # -- scalar representation -------------------------------------------

    def _arg(self, y, yt, t, tt):
        """Return ``(w, sigma)`` with d5 = -sigma*rho'(w), d6 = +sigma*rho'(w)."""
        raise NotImplementedError

    def _rho(self, w):
        raise NotImplementedError

    def _rho_prime(self, w):
        raise NotImplementedError

    def _rho_second(self, w):
        raise UnsupportedLossError(
            f"{self.family} loss is not twice differentiable"
        )

    # -- vectorized pair interface (used by the risk machinery) ----------

    def pair_values(self, y, yt, t, tt):
        w, _ = self._arg(y, yt, t, tt)
        return self._rho(w)

    def pair_grads(self, y, yt, t, tt):
        """Return ``(d5, d6)`` arrays."""
        w, sigma = self._arg(y, yt, t, tt)
        rp = self._rho_prime(w)
        d5 = -sigma * rp
        return d5, -d5

    def pair_seconds(self, y, yt, t, tt):
        """Return ``(d55, d56, d66)``; the mixed partials coincide."""
        w, sigma = self._arg(y, yt, t, tt)
        rs = sigma * sigma * self._rho_second(w)
        return rs, -rs, rs

    # -- public six-argument surface --------------------------------------

    def value(self, x, y, xt, yt, t, tt):
        """Loss value; nonnegative."""
        _check_finite(x, y, xt, yt, t, tt)
        return float(self.pair_values(y, yt, t, tt))

    def shifted_value(self, x, y, xt, yt, t, tt):
        """Shifted loss ``L(...,t,tt) - L(...,0,0)``; may be negative."""
        _check_finite(x, y, xt, yt, t, tt)
        return float(
            self.pair_values(y, yt, t, tt) - self.pair_values(y, yt, 0.0, 0.0)
        )

    def grad(self, x, y, xt, yt, t, tt):
        """Partial derivatives ``(d5, d6)`` at ``(t, tt)``.

        At kinks of non-differentiable families the minimal-norm subgradient
        (zero) is used.
        """
        _check_finite(x, y, xt, yt, t, tt)
        d5, d6 = self.pair_grads(y, yt, t, tt)
        return float(d5), float(d6)

    def hessian(self, x, y, xt, yt, t, tt):
        """Symmetric 2x2 matrix of second partials at ``(t, tt)``."""
        _check_finite(x, y, xt, yt, t, tt)
        d55, d56, d66 = self.pair_seconds(y, yt, t, tt)
        return np.array([[float(d55), float(d56)], [float(d56), float(d66)]])

    def constants(self):
        """Return the family's :class:`LossConstants`."""
        raise NotImplementedError

    def params(self):
        """Family parameters as a serializable dict."""
        return {"family": self.family}

    def __repr__(self):
        items = ", ".join(f"{k}={v}" for k, v in self.params().items() if k != "family")
        return f"{type(self).__name__}({items})"


class _ResidualDifferenceLoss(PairwiseLoss):
    """Losses of the form ``rho((y - t) - (yt - tt))``."""

    def _arg(self, y, yt, t, tt):
        y, yt, t, tt = np.broadcast_arrays(y, yt, t, tt)
        return (np.asarray(y, float) - t) - (np.asarray(yt, float) - tt), 1.0


class _RankingLoss(PairwiseLoss):
    """Losses of the form ``rho(|y - yt| - (t - tt) * sign(y - yt))``."""

    def _arg(self, y, yt, t, tt):
        y, yt, t, tt = np.broadcast_arrays(y, yt, t, tt)
        dy = np.asarray(y, float) - yt
        s = np.sign(dy)
        return np.abs(dy) - (np.asarray(t, float) - tt) * s, s


class MeeLoss(_ResidualDifferenceLoss):
    """Minimum error entropy loss, ``rho(u) = 1 - exp(-u^2 / (2 h^2))``.

    Bounded by 1 and smooth, but not convex.  The derivative bounds
    ``exp(-1/2)/h`` and ``1/h^2`` are the analytic suprema of |rho'| and
    |rho''|.
    """

    family = "mee"
    convex = False
    differentiable = True

    def __init__(self, h=1.0):
        if not np.isfinite(h) or h <= 0:
            raise ValueError("mee bandwidth h must be positive")
        self.h = float(h)

    def _rho(self, w):
        return 1.0 - np.exp(-(w * w) / (2.0 * self.h**2))

    def _rho_prime(self, w):
        h2 = self.h**2
        return (w / h2) * np.exp(-(w * w) / (2.0 * h2))

    def _rho_second(self, w):
        h2 = self.h**2
        w2 = w * w
        return (1.0 - w2 / h2) / h2 * np.exp(-w2 / (2.0 * h2))

    def constants(self):
        gb = np.exp(-0.5) / self.h
        return LossConstants(
            lip=gb,
            grad_bound=gb,
            hess_bound=1.0 / self.h**2,
            value_bound=1.0,
            convex=False,
            differentiable=True,
        )

    def params(self):
        return {"family": self.family, "h": self.h}


class AbsoluteLoss(_ResidualDifferenceLoss):
    """Absolute-value loss, ``rho(u) = |u|``; convex, kinked at ``u = 0``."""

    family = "absolute"
    convex = True
    differentiable = False

    def _rho(self, w):
        return np.abs(w)

    def _rho_prime(self, w):
        # subgradient convention rho'(0) = 0
        return np.sign(w)

    def constants(self):
        return LossConstants(
            lip=1.0,
            grad_bound=1.0,
            hess_bound=INF,
            value_bound=INF,
            convex=True,
            differentiable=False,
        )


class _LogisticRho:
    """Shared smooth ``rho_a(w) = w - 2 a log(2 Lambda(w / a))`` pieces."""

    def __init__(self, a):
        if not np.isfinite(a) or a <= 0:
            raise ValueError("logistic smoothing parameter a must be positive")
        self.a = float(a)

    def _rho(self, w):
        # w + 2a*(softplus(-w/a) - log 2), numerically stable for large |w|
        return w + 2.0 * self.a * (np.logaddexp(0.0, -w / self.a) - np.log(2.0))

    def _rho_prime(self, w):
        # 2*Lambda(w/a) - 1 = tanh(w / (2a))
        return np.tanh(w / (2.0 * self.a))

    def _rho_second(self, w):
        lam = expit(w / self.a)
        return (2.0 / self.a) * lam * (1.0 - lam)

    def params(self):
        return {"family": self.family, "a": self.a}


class LogisticPairwiseLoss(_LogisticRho, _ResidualDifferenceLoss):
    """Smoothed absolute-value loss built from the logistic cdf.

    Convex, differentiable and separately Lipschitz with |L|_1 = 1; the
    first and second partials are bounded by 1 and ``1/(2a)``.
    """

    family = "logistic_pairwise"
    convex = True
    differentiable = True

    def constants(self):
        return LossConstants(
            lip=1.0,
            grad_bound=1.0,
            hess_bound=1.0 / (2.0 * self.a),
            value_bound=INF,
            convex=True,
            differentiable=True,
        )


class SquaredLoss(_ResidualDifferenceLoss):
    """Squared loss, ``rho(u) = u^2``; convex but with unbounded derivative."""

    family = "squared"
    convex = True
    differentiable = True

    def _rho(self, w):
        return w * w

    def _rho_prime(self, w):
        return 2.0 * w

    def _rho_second(self, w):
        return np.full_like(np.asarray(w, dtype=float), 2.0)

    def constants(self):
        return LossConstants(
            lip=INF,
            grad_bound=INF,
            hess_bound=2.0,
            value_bound=INF,
            convex=True,
            differentiable=True,
        )


class HingeRankingLoss(_RankingLoss):
    """Hinge ranking loss, ``max(0, v)``; convex, not differentiable."""

    family = "hinge_ranking"
    convex = True
    differentiable = False

    def _rho(self, w):
        return np.maximum(0.0, w)

    def _rho_prime(self, w):
        # subgradient convention: derivative 0 at the kink v = 0
        return (w > 0).astype(float)

    def constants(self):
        return LossConstants(
            lip=1.0,
            grad_bound=1.0,
            hess_bound=INF,
            value_bound=INF,
            convex=True,
            differentiable=False,
        )


class LsRankingLoss(_RankingLoss):
    """Least-squares ranking loss, ``v^2``; not separately Lipschitz."""

    family = "ls_ranking"
    convex = True
    differentiable = True

    def _rho(self, w):
        return w * w

    def _rho_prime(self, w):
        return 2.0 * w

    def _rho_second(self, w):
        return np.full_like(np.asarray(w, dtype=float), 2.0)

    def constants(self):
        return LossConstants(
            lip=INF,
            grad_bound=INF,
            hess_bound=2.0,
            value_bound=INF,
            convex=True,
            differentiable=True,
        )


class LogisticRankingLoss(_LogisticRho, _RankingLoss):
    """Smooth ranking loss ``rho_a(v)``; Lipschitz with bounded derivatives."""

    family = "logistic_ranking"
    convex = True
    differentiable = True

    def constants(self):
        return LossConstants(
            lip=1.0,
            grad_bound=1.0,
            hess_bound=1.0 / (2.0 * self.a),
            value_bound=INF,
            convex=True,
            differentiable=True,
        )


_FAMILIES = {
    cls.family: cls
    for cls in (
        MeeLoss,
        AbsoluteLoss,
        LogisticPairwiseLoss,
        SquaredLoss,
        HingeRankingLoss,
        LsRankingLoss,
        LogisticRankingLoss,
    )
}

LOSS_FAMILIES = tuple(_FAMILIES)


def make_loss(family, h=None, a=None):
    """Build a loss from its family name and parameters.

    Parameters
    ----------
    family : str
        One of ``LOSS_FAMILIES``.
    h : float, optional
        Bandwidth of the ``mee`` family.
    a : float, optional
        Smoothing parameter of the logistic families.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown loss family {family!r}")
    cls = _FAMILIES[family]
    if family == "mee":
        return cls(h=1.0 if h is None else h)
    if family in ("logistic_pairwise", "logistic_ranking"):
        return cls(a=1.0 if a is None else a)
    if h is not None or a is not None:
        raise ValueError(f"loss family {family!r} takes no parameters")
    return cls()


def loss_from_params(params):
    """Inverse of :meth:`PairwiseLoss.params`."""
    extra = set(params) - {"family", "h", "a"}
    if extra:
        raise ValueError(f"unknown loss parameters {sorted(extra)}")
    if "family" not in params:
        raise ValueError("loss block requires a 'family' key")
    return make_loss(params["family"], h=params.get("h"), a=params.get("a"))


def modulus_of_continuity_probe(loss, h, r, samples=20000, seed=0):
    """Monte-Carlo lower estimate of the local modulus of continuity of the
    second partials: the sup of ``|DiDjL(.., f, ft) - DiDjL(.., g, gt)|`` over
    arguments in ``[-r, r]`` moved by at most ``h`` in each slot.

    Requires a twice differentiable family; ``h = 0`` gives 0 exactly.
    """
    if h < 0 or r <= 0:
        raise ValueError("h must be nonnegative and r positive")
    # probe twice-differentiability up front
    loss._rho_second(np.array(0.0))
    if h == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    yr = r + h + 4.0
    y = rng.uniform(-yr, yr, samples)
    yt = rng.uniform(-yr, yr, samples)
    f = rng.uniform(-r, r, samples)
    ft = rng.uniform(-r, r, samples)
    g = np.clip(f + rng.uniform(-h, h, samples), -r, r)
    gt = np.clip(ft + rng.uniform(-h, h, samples), -r, r)
    s1 = loss.pair_seconds(y, yt, f, ft)
    s2 = loss.pair_seconds(y, yt, g, gt)
    return float(max(np.max(np.abs(a - b)) for a, b in zip(s1, s2)))
