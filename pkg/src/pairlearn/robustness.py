"""Statistical-robustness diagnostics for fitted pairwise learning models.

For convex, smooth, separately Lipschitz losses with a bounded kernel, the
estimator map ``P -> f_P`` has a bounded Gateaux derivative in any direction
``Q``: the solution of ``M(P) h = -T(Q; P)`` where ``T`` collects the
first-derivative feature expectations ``-2 E_{PxP} + E_{PxQ} + E_{QxP}`` of
``D5 L . Phi(X) + D6 L . Phi(X~)`` at the fitted function, and ``M(P) =
2 lam Id + E_{PxP}[sum_{i,j} D_i D_j L . Phi ox Phi]`` is the Hessian of the
regularized risk, with the tensor convention ``(a ox b) h = h(point of b) a``.
All elements live in the span of feature maps at the training inputs plus the
atoms of ``Q``, so the solve is a finite linear system in coefficient space,
verified afterwards by re-applying ``M`` in the H-norm.

For merely bounded (possibly non-convex) losses the diagnostics act on the
regularized risk value instead: maxbias probes over contamination mixtures
and sensitivity curves, whose theoretical bounds ``2 c eps (1 + eps)`` and
``2 c (1 + 1/n)`` are recomputed and checked on every report.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericFailureError, UnsupportedLossError
from .kernels import RkhsFunction
from .risk import Dataset, _check_weights, risk_hessian_coeffs
from .solver import SolverOptions, fit

_OPERATOR_RESIDUAL_RTOL = 1e-6
_BOUND_TOL = 1e-8


@dataclass(frozen=True)
class DiscreteMeasure:
    """A finitely supported probability measure on (x, y) pairs."""

    xs: np.ndarray
    ys: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if xs.shape[0] == 0 or xs.shape[0] != ys.shape[0] != w.shape[0]:
            raise ValueError("atoms and weights must be nonempty and aligned")
        if w.shape[0] != xs.shape[0]:
            raise ValueError("atoms and weights must be aligned")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be nonnegative and finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("atoms contain NaN or Inf entries")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "weights", w)

    @property
    def size(self):
        return self.xs.shape[0]

    @classmethod
    def from_dataset(cls, data, weights=None):
        """Empirical measure of a dataset (uniform unless weights given)."""
        w = _check_weights(weights, data.n)
        return cls(data.xs, data.ys, w)

    @classmethod
    def point_mass(cls, x0, y0):
        x0 = np.asarray(x0, dtype=float).reshape(1, -1)
        return cls(x0, np.array([float(y0)]), np.array([1.0]))


@dataclass(frozen=True)
class InfluenceResult:
    """A Gateaux-derivative direction with its verification numbers."""

    direction: RkhsFunction
    h_norm: float
    operator_residual: float
    t_norm: float
    bound_2lambda_check: bool


@dataclass(frozen=True)
class MaxbiasReport:
    """Worst observed regularized-risk shift under eps-contamination."""

    epsilon: float
    worst_delta: float
    bound: float
    contamination_argmax: tuple | None
    holds: bool
    deltas: np.ndarray = field(repr=False, default=None)


def h_norm_of_difference(f1, f2):
    """H-norm of ``f1 - f2`` computed over the union of their anchors."""
    if f1.kernel != f2.kernel:
        raise ValueError("functions live in different RKHSs")
    coeffs = np.concatenate([f1.coefficients, -f2.coefficients])
    anchors = np.vstack([f1.anchors, f2.anchors])
    gram = f1.kernel.gram(anchors)
    return float(np.sqrt(max(coeffs @ gram @ coeffs, 0.0)))


def contaminate(data, measure, eps, weights=None):
    """Sample points and weights of the mixture ``(1 - eps) P + eps Q``.

    Returns a dataset holding the union of atoms together with the mixture
    weights, ready for a weighted fit.
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    w = _check_weights(weights, data.n)
    if measure.xs.shape[1] != data.dim:
        raise ValueError("contamination atoms have wrong dimension")
    mixed = Dataset(
        np.vstack([data.xs, measure.xs]), np.concatenate([data.ys, measure.ys])
    )
    mixed_w = np.concatenate([(1.0 - eps) * w, eps * measure.weights])
    return mixed, mixed_w


# -- influence machinery ------------------------------------------------------


def _require_influence_admissible(loss, kernel):
    consts = loss.constants()
    if not (loss.convex and loss.differentiable):
        raise UnsupportedLossError(
            f"{loss.family} loss is not convex and differentiable; the "
            "Gateaux derivative requires both"
        )
    if not (np.isfinite(consts.grad_bound) and np.isfinite(consts.hess_bound)):
        raise UnsupportedLossError(
            f"{loss.family} loss has unbounded derivatives; the Gateaux "
            "derivative requires separately Lipschitz losses with bounded "
            "first and second partials"
        )
    if not kernel.bounded:
        raise UnsupportedLossError(
            "influence diagnostics require a bounded kernel"
        )


def _anchor_slots(train_xs, atom_xs):
    """Map sample rows and atom rows to shared anchor slots.

    Rows are matched bitwise; atoms equal to a training input reuse its slot,
    so the extended basis is the set union of the two point lists.  Returns
    ``(anchors, train_slots, atom_slots)``.
    """
    index = {}
    train_slots = np.empty(train_xs.shape[0], dtype=int)
    for i, row in enumerate(train_xs):
        train_slots[i] = index.setdefault(row.tobytes(), i)
    extra = []
    atom_slots = np.empty(atom_xs.shape[0], dtype=int)
    n = train_xs.shape[0]
    for j, row in enumerate(atom_xs):
        key = row.tobytes()
        if key not in index:
            index[key] = n + len(extra)
            extra.append(row)
        atom_slots[j] = index[key]
    anchors = np.vstack([train_xs] + extra) if extra else train_xs
    return anchors, train_slots, atom_slots


def _t_term(loss, ys_a, ys_b, f_a, f_b, w_a, w_b, slots_a, slots_b, size):
    """Coefficients of ``E_{A x B}[D5 L . Phi(X) + D6 L . Phi(X~)]``."""
    d5, d6 = loss.pair_grads(
        ys_a[:, None], ys_b[None, :], f_a[:, None], f_b[None, :]
    )
    out = np.zeros(size)
    np.add.at(out, slots_a, w_a * (d5 @ w_b))
    np.add.at(out, slots_b, w_b * (d6.T @ w_a))
    return out


@dataclass(frozen=True)
class _InfluenceSystem:
    """The coefficient-space linear system behind one Gateaux derivative."""

    anchors: np.ndarray
    gram: np.ndarray
    t_vec: np.ndarray
    m_mat: np.ndarray


def _influence_system(model, measure, data, weights):
    """Assemble ``T(Q; P)`` and ``M(P)`` over the extended anchor basis."""
    loss, kernel, lam = model.loss, model.kernel, model.lam
    w = _check_weights(weights, data.n)
    if not np.array_equal(model.function.anchors, data.xs):
        raise ValueError("model anchors do not match the dataset inputs")
    if measure.xs.shape[1] != data.dim:
        raise ValueError("measure atoms have wrong dimension")

    n = data.n
    anchors, train_slots, atom_slots = _anchor_slots(data.xs, measure.xs)
    size = anchors.shape[0]
    gram_ext = kernel.gram(anchors)
    f_anchor = gram_ext[:, :n] @ model.alpha
    f_train = f_anchor[:n]
    f_atoms = f_anchor[atom_slots]

    term_pp = _t_term(
        loss, data.ys, data.ys, f_train, f_train, w, w,
        train_slots, train_slots, size,
    )
    term_pq = _t_term(
        loss, data.ys, measure.ys, f_train, f_atoms, w, measure.weights,
        train_slots, atom_slots, size,
    )
    term_qp = _t_term(
        loss, measure.ys, data.ys, f_atoms, f_train, measure.weights, w,
        atom_slots, train_slots, size,
    )
    t_vec = (-2.0 * term_pp + term_pq) + term_qp

    # Hessian operator on the extended span: 2*lam*Id plus the map sending
    # h to second-derivative-weighted feature sums over training values.
    hess = risk_hessian_coeffs(loss, data, f_train, w)
    m_mat = 2.0 * lam * np.eye(size)
    m_mat[:n, :] += hess @ gram_ext[:n, :]
    return _InfluenceSystem(anchors=anchors, gram=gram_ext, t_vec=t_vec,
                            m_mat=m_mat)


def gateaux_derivative(model, measure, data=None, weights=None):
    """Gateaux derivative of the estimator map at the training measure in the
    direction of ``measure``, as an H-element over the extended anchor set.

    Solves ``M(P) h = -T(Q; P)`` in coefficient space and verifies the
    result by re-applying the operator; the H-norm of the residual must stay
    below ``1e-6 * max(1, ||T||_H)``.
    """
    data = data if data is not None else model.data
    if data is None:
        raise ValueError("model carries no training data; pass data explicitly")
    loss, kernel, lam = model.loss, model.kernel, model.lam
    _require_influence_admissible(loss, kernel)
    if not model.diagnostics.get("converged", True):
        raise ValueError("model did not converge; influence would be meaningless")
    if weights is None:
        weights = model.weights
    system = _influence_system(model, measure, data, weights)
    gram_ext, t_vec, m_mat = system.gram, system.t_vec, system.m_mat
    size = gram_ext.shape[0]
    t_norm = float(np.sqrt(max(t_vec @ gram_ext @ t_vec, 0.0)))

    def _solve(mat, rhs):
        try:
            sol = np.linalg.solve(mat, rhs)
            if np.all(np.isfinite(sol)):
                return sol
        except np.linalg.LinAlgError:
            pass
        return None

    beta = _solve(m_mat, -t_vec)

    def _op_residual(b):
        if b is None:
            return np.inf
        r = m_mat @ b + t_vec
        return float(np.sqrt(max(r @ gram_ext @ r, 0.0)))

    op_res = _op_residual(beta)
    tol = _OPERATOR_RESIDUAL_RTOL * max(1.0, t_norm)
    if op_res > tol:
        jitter = 1e-10 * (2.0 * lam)
        beta = np.linalg.lstsq(
            m_mat + jitter * np.eye(size), -t_vec, rcond=None
        )[0]
        op_res = _op_residual(beta)
        if op_res > tol:
            raise NumericFailureError(
                f"operator residual {op_res:.3e} exceeds tolerance {tol:.3e}"
            )

    h_norm = float(np.sqrt(max(beta @ gram_ext @ beta, 0.0)))
    return InfluenceResult(
        direction=RkhsFunction(beta, system.anchors, kernel),
        h_norm=h_norm,
        operator_residual=op_res,
        t_norm=t_norm,
        bound_2lambda_check=h_norm <= t_norm / (2.0 * lam) + _BOUND_TOL,
    )


def influence_function(model, x0, y0, data=None, weights=None):
    """Influence function at the point ``(x0, y0)``: the Gateaux derivative
    in the direction of the point mass there."""
    return gateaux_derivative(
        model, DiscreteMeasure.point_mass(x0, y0), data=data, weights=weights
    )


# -- risk-level diagnostics ---------------------------------------------------


def _require_bounded_loss(loss, what):
    c = loss.constants().value_bound
    if not np.isfinite(c):
        raise UnsupportedLossError(
            f"{what} requires a bounded loss; {loss.family} is unbounded"
        )
    return c


def _fitted_objective(loss, data, kernel, lam, opts, weights=None):
    """Regularized risk value at the fitted minimizer for the given measure."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = fit(loss, data, kernel, lam, opts=opts, weights=weights)
    return float(model.diagnostics["objective"]), model


def sensitivity_curve(data, x0, y0, loss, kernel, lam, target="risk",
                      opts=None):
    """Sensitivity curve of adding the point ``(x0, y0)`` to the sample.

    With ``m = data.n + 1``, refits on the augmented m-point sample, whose
    empirical measure is the contamination mixture ``(1 - 1/m) P + (1/m)
    delta``, and returns ``m`` times the change of the regularized risk
    (``target="risk"``, bounded losses only) or of the estimator in H-norm
    (``target="estimator"``).
    """
    if target not in ("risk", "estimator"):
        raise ValueError(f"unknown sensitivity target {target!r}")
    if target == "risk":
        _require_bounded_loss(loss, "the risk sensitivity curve")
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError("lam must be positive")
    opts = opts or SolverOptions()
    augmented = data.append(x0, y0)
    obj_ref, model_ref = _fitted_objective(loss, data, kernel, lam, opts)
    obj_aug, model_aug = _fitted_objective(loss, augmented, kernel, lam, opts)
    scale = float(augmented.n)
    if target == "risk":
        return scale * (obj_aug - obj_ref)
    return scale * h_norm_of_difference(model_aug.function, model_ref.function)


def default_contamination_grid(data):
    """Default probe atoms for :func:`maxbias_probe`.

    Corners and center of the data bounding box, scaled by 1, 3 and 10
    about the center, crossed with response values at the observed extremes
    and gross outliers ten ranges beyond them.
    """
    lo, hi = data.xs.min(axis=0), data.xs.max(axis=0)
    center = 0.5 * (lo + hi)
    corners = np.array(
        np.meshgrid(*[(l, h) for l, h in zip(lo, hi)], indexing="ij")
    ).reshape(data.dim, -1).T
    points = [center]
    for scale in (1.0, 3.0, 10.0):
        points.extend(center + scale * (corner - center) for corner in corners)
    ymin, ymax = float(data.ys.min()), float(data.ys.max())
    yrange = ymax - ymin
    if yrange == 0.0:
        yrange = max(1.0, abs(ymax))
    yvals = (ymin, ymax, ymin - 10.0 * yrange, ymax + 10.0 * yrange)
    seen = set()
    grid = []
    for p in points:
        for y in yvals:
            key = (tuple(p), y)
            if key not in seen:
                seen.add(key)
                grid.append((np.asarray(p, dtype=float), float(y)))
    return grid


def maxbias_probe(data, loss, kernel, lam, eps, grid=None, opts=None):
    """Probe the maximum bias of the regularized risk under contamination.

    For each grid atom ``z``, refits on ``(1 - eps) P + eps delta_z`` (the
    exact weighted V-statistic) and records the absolute change of the
    regularized risk value.  The worst observed change is a lower estimate
    of the maxbias; the report checks it against the theoretical bound
    ``2 c eps (1 + eps)``.
    """
    c = _require_bounded_loss(loss, "the maxbias probe")
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    bound = 2.0 * c * eps * (1.0 + eps)
    if eps == 0:
        return MaxbiasReport(
            epsilon=0.0, worst_delta=0.0, bound=0.0,
            contamination_argmax=None, holds=True, deltas=np.zeros(0),
        )
    if grid is None:
        grid = default_contamination_grid(data)
    opts = opts or SolverOptions()
    obj_ref, _ = _fitted_objective(loss, data, kernel, lam, opts)
    deltas = np.empty(len(grid))
    for i, (x0, y0) in enumerate(grid):
        mixed, mixed_w = contaminate(
            data, DiscreteMeasure.point_mass(x0, y0), eps
        )
        obj_eps, _ = _fitted_objective(
            loss, mixed, kernel, lam, opts, weights=mixed_w
        )
        deltas[i] = abs(obj_eps - obj_ref)
    worst = int(np.argmax(deltas))
    worst_delta = float(deltas[worst])
    return MaxbiasReport(
        epsilon=float(eps),
        worst_delta=worst_delta,
        bound=bound,
        contamination_argmax=(grid[worst][0].tolist(), grid[worst][1]),
        holds=worst_delta <= bound + _BOUND_TOL,
        deltas=deltas,
    )


# -- measure utilities --------------------------------------------------------


def _atom_table(measure):
    table = {}
    for x, y, w in zip(measure.xs, measure.ys, measure.weights):
        key = (x.tobytes(), float(y).hex())
        table[key] = table.get(key, 0.0) + float(w)
    return table


def total_variation(p, q):
    """Total variation distance between two discrete measures: half the L1
    distance of their weights over the union of atoms."""
    ta, tb = _atom_table(p), _atom_table(q)
    keys = set(ta) | set(tb)
    val = 0.5 * sum(abs(ta.get(k, 0.0) - tb.get(k, 0.0)) for k in keys)
    return min(max(val, 0.0), 1.0)


def product_measure(p, q=None):
    """The product measure on ordered atom pairs, encoded as a discrete
    measure with concatenated coordinates (enumeration helper)."""
    q = p if q is None else q
    xs, ys, ws = [], [], []
    for xi, yi, wi in zip(p.xs, p.ys, p.weights):
        for xj, yj, wj in zip(q.xs, q.ys, q.weights):
            xs.append(np.concatenate([xi, [yi], xj]))
            ys.append(yj)
            ws.append(wi * wj)
    ws = np.asarray(ws)
    return DiscreteMeasure(np.vstack(xs), np.asarray(ys), ws / ws.sum())


# -- stability and bootstrap --------------------------------------------------


def stability_bound_check(model_p, model_q):
    """Check ``||f_P - f_Q||_H <= 4 c_{L,1} ||k||_inf^2 / lam`` for two fits
    sharing loss, kernel and regularization."""
    if model_p.loss.params() != model_q.loss.params():
        raise ValueError("models use different losses")
    if model_p.kernel != model_q.kernel:
        raise ValueError("models use different kernels")
    if model_p.lam != model_q.lam:
        raise ValueError("models use different regularization constants")
    for m in (model_p, model_q):
        if not m.diagnostics.get("converged", True):
            raise ValueError("both models must have converged")
    _require_influence_admissible(model_p.loss, model_p.kernel)
    consts = model_p.loss.constants()
    ksup = model_p.kernel.sup_norm()
    lhs = h_norm_of_difference(model_p.function, model_q.function)
    rhs = 4.0 * consts.grad_bound * ksup**2 / model_p.lam
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + _BOUND_TOL}


def bootstrap_distribution(data, loss, kernel, lam, n_resamples, seed,
                           probes=None, opts=None, resample_indices=None):
    """Empirical bootstrap of the fitted estimator.

    Draws ``n_resamples`` samples with replacement, refits each, and
    summarizes the H-norm and the predictions at the probe points.  Each
    resample uses its own counter-derived random stream, so results do not
    depend on execution order; the report is deterministic given ``seed``.

    ``resample_indices(b, n, rng)`` can override the index draw (testing
    hook, e.g. to force the identity resample).
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be at least 1")
    probes = (
        np.empty((0, data.dim))
        if probes is None
        else np.asarray(probes, dtype=float).reshape(-1, data.dim)
    )
    opts = opts or SolverOptions()
    h_norms, preds, failed = [], [], []
    for b in range(n_resamples):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(b,))
        )
        if resample_indices is not None:
            idx = np.asarray(resample_indices(b, data.n, rng), dtype=int)
        else:
            idx = rng.integers(0, data.n, size=data.n)
        resample = data.subset(idx)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit(loss, resample, kernel, lam, opts=opts)
        if not model.diagnostics["converged"]:
            failed.append(b)
            continue
        h_norms.append(
            float(np.sqrt(max(model.alpha @ model.kernel.gram(resample.xs)
                              @ model.alpha, 0.0)))
        )
        if probes.shape[0]:
            preds.append(model.predict(probes))

    def _stats(values):
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            return {"mean": 0.0, "std": 0.0, "q05": 0.0, "q95": 0.0, "count": 0}
        q05, q95 = np.quantile(arr, [0.05, 0.95])
        return {
            "mean": float(arr.mean()),
            "std": float(arr.std()),
            "q05": float(q05),
            "q95": float(q95),
            "count": int(arr.size),
        }

    report = {
        "resamples": int(n_resamples),
        "seed": int(seed),
        "n_failed": len(failed),
        "failed_indices": failed,
        "h_norm": _stats(h_norms),
        "probes": [
            {"x": probes[j].tolist(),
             "prediction": _stats([p[j] for p in preds])}
            for j in range(probes.shape[0])
        ],
    }
    return report
