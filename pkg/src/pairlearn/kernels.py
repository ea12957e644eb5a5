"""Bounded kernels, Gram-matrix assembly and RKHS functions in representer form.

A kernel is described by a :class:`Kernel` value object.  Functions of the
induced reproducing kernel Hilbert space are handled in representer form,
``f = sum_b alpha_b k(., x_b)``, through :class:`RkhsFunction`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

RBF_FAMILIES = ("gaussian_rbf", "abel_rbf")
KERNEL_FAMILIES = RBF_FAMILIES + ("linear", "precomputed")

# Relative threshold below which a negative alpha' G alpha is treated as
# round-off and clamped silently; larger violations are logged.
_HNORM_ROUNDOFF_REL = 1e-12


def _as_points(points, name="points"):
    """Coerce to a 2-d float array of shape (n, d) and validate."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty (n, d) array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


@dataclass(frozen=True, eq=False)
class Kernel:
    """Specification of a kernel.

    Parameters
    ----------
    family : str
        One of ``gaussian_rbf``, ``abel_rbf``, ``linear`` or ``precomputed``.
    gamma : float, optional
        Width of the RBF families, ``k(x, x') = exp(-d(x, x')/gamma)`` with
        the squared Euclidean distance (Gaussian) or the L1 distance (Abel).
        Must be positive; ignored by the other families.
    matrix : ndarray, optional
        Full symmetric kernel matrix for the ``precomputed`` family.  Points
        are then 1-d integer indices into this matrix.
    """

    family: str
    gamma: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __eq__(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        return (
            self.family == other.family
            and self.gamma == other.gamma
            and (
                (self.matrix is None) == (other.matrix is None)
                and (self.matrix is None
                     or np.array_equal(self.matrix, other.matrix))
            )
        )

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family in RBF_FAMILIES:
            if self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0:
                raise ValueError("gamma must be a positive real for RBF kernels")
        if self.family == "precomputed":
            if self.matrix is None:
                raise ValueError("precomputed kernel requires a matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("precomputed kernel matrix must be square")
            if not np.array_equal(m, m.T):
                raise ValueError("precomputed kernel matrix must be symmetric")
            object.__setattr__(self, "matrix", m)
            min_eig = float(np.linalg.eigvalsh(m).min())
            if min_eig < -1e-6:
                logger.warning(
                    "precomputed kernel matrix is not PSD (min eigenvalue %.3e)",
                    min_eig,
                )

    @property
    def bounded(self):
        """Whether sup_x k(x, x) is finite."""
        return self.family != "linear"

    def sup_norm(self):
        """Return sup_x sqrt(k(x, x)); ``inf`` for the linear kernel."""
        if self.family in RBF_FAMILIES:
            return 1.0
        if self.family == "precomputed":
            return float(np.sqrt(np.max(np.diag(self.matrix))))
        return float("inf")

    def _indices(self, points):
        """Validate and convert precomputed 'points' to integer indices."""
        arr = np.asarray(points, dtype=float)
        idx = np.rint(arr).astype(int).reshape(-1)
        n = self.matrix.shape[0]
        if idx.size == 0:
            raise ValueError("points must be nonempty")
        if np.any(idx < 0) or np.any(idx >= n):
            raise ValueError("precomputed kernel index out of range")
        return idx

    def cross(self, a, b):
        """Pairwise kernel values, shape ``(len(a), len(b))``."""
        if self.family == "precomputed":
            ia, ib = self._indices(a), self._indices(b)
            return self.matrix[np.ix_(ia, ib)]
        a, b = _as_points(a, "a"), _as_points(b, "b")
        if a.shape[1] != b.shape[1]:
            raise ValueError(
                f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
            )
        diff = a[:, None, :] - b[None, :, :]
        if self.family == "gaussian_rbf":
            return np.exp(-np.sum(diff * diff, axis=-1) / self.gamma)
        if self.family == "abel_rbf":
            return np.exp(-np.sum(np.abs(diff), axis=-1) / self.gamma)
        return a @ b.T

    def gram(self, points):
        """Symmetric Gram matrix of pairwise kernel values.

        Each unordered pair is assembled once and mirrored, so the result is
        exactly symmetric.
        """
        full = self.cross(points, points)
        upper = np.triu(full)
        return upper + np.triu(full, 1).T

    def __call__(self, x, xp):
        """Evaluate ``k(x, x')`` for two single points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xp = np.atleast_1d(np.asarray(xp, dtype=float))
        return float(self.cross(x.reshape(1, -1), xp.reshape(1, -1))[0, 0])


def load_precomputed_kernel(path):
    """Load a precomputed kernel from a headerless CSV of an n x n matrix."""
    m = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    return Kernel(family="precomputed", matrix=m)


@dataclass(frozen=True)
class RkhsFunction:
    """An RKHS element in representer form, ``f = sum_b alpha_b k(., x_b)``.

    Attributes
    ----------
    coefficients : ndarray, shape (m,)
    anchors : ndarray, shape (m, d)
        Anchor points ``x_b`` (or indices, for precomputed kernels).
    kernel : Kernel
    """

    coefficients: np.ndarray
    anchors: np.ndarray
    kernel: Kernel

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float).reshape(-1)
        anchors = np.asarray(self.anchors, dtype=float)
        if anchors.ndim == 1:
            anchors = anchors.reshape(-1, 1)
        if coeffs.shape[0] != anchors.shape[0]:
            raise ValueError("coefficients and anchors must have equal length")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "anchors", anchors)

    def __call__(self, xs):
        return evaluate(self, xs)


# -- operation surface -------------------------------------------------------


def kernel_eval(kernel, x, xp):
    """Evaluate ``k(x, x')``."""
    return kernel(x, xp)


def gram_matrix(kernel, points):
    """Symmetric Gram matrix of ``kernel`` over ``points``."""
    return kernel.gram(points)


def sup_norm(kernel):
    """``sup_x sqrt(k(x, x))``, infinite for unbounded kernels."""
    return kernel.sup_norm()


def evaluate(f, xs):
    """Evaluate an :class:`RkhsFunction` at the rows of ``xs``."""
    if f.kernel.family != "precomputed":
        xs = _as_points(xs, "xs")
        if xs.shape[1] != f.anchors.shape[1]:
            raise ValueError(
                f"dimension mismatch: {xs.shape[1]} vs {f.anchors.shape[1]}"
            )
    return f.kernel.cross(xs, f.anchors) @ f.coefficients


def h_norm_sq(f, gram=None):
    """Squared RKHS norm ``alpha' G alpha`` of a representer-form function.

    Round-off can drive the quadratic form slightly negative although it is
    nonnegative in exact arithmetic; negative values are clamped to zero, with
    a log warning when the violation exceeds the expected round-off level.
    """
    alpha = f.coefficients
    if gram is None:
        gram = f.kernel.gram(f.anchors)
    gram = np.asarray(gram, dtype=float)
    if gram.shape != (alpha.size, alpha.size):
        raise ValueError("gram size does not match coefficient length")
    val = float(alpha @ gram @ alpha)
    if val < 0.0:
        scale = float(np.dot(alpha, alpha)) * float(np.abs(gram).max(initial=0.0))
        if val < -_HNORM_ROUNDOFF_REL * scale:
            logger.warning("clamping negative squared H-norm %.3e to zero", val)
        val = 0.0
    return val


def h_norm(f, gram=None):
    """RKHS norm of a representer-form function."""
    return float(np.sqrt(h_norm_sq(f, gram)))
