"""Command-line front end.

Commands: ``fit``, ``predict``, ``influence``, ``sc``, ``maxbias``,
``bootstrap``, ``check``.  Exit codes: 0 success, 1 input error, 2
non-convergence, 3 invariant failure.

Datasets are CSV files with header ``x1,...,xd,y``; configurations are
strict JSON documents (unknown keys are rejected).  All emitted numbers use
17 significant digits, so outputs are byte-identical across runs for the
same inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import warnings

import numpy as np

from . import _jsonio
from .exceptions import NumericFailureError, UnsupportedLossError
from .kernels import Kernel, load_precomputed_kernel
from .losses import loss_from_params
from .risk import Dataset
from .robustness import (
    bootstrap_distribution,
    influence_function,
    maxbias_probe,
    sensitivity_curve,
)
from .solver import (
    SolverOptions,
    apriori_bound_checks,
    fit,
    fit_ls_closed_form,
    load_model,
    model_to_dict,
    stationarity_residual,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2
EXIT_INVARIANT = 3


# -- file formats --------------------------------------------------------------


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [row for row in csv.reader(fh) if row]


def _parse_feature_header(header, require_y):
    header = [h.strip() for h in header]
    has_y = bool(header) and header[-1] == "y"
    xcols = header[:-1] if has_y else header
    if has_y and not xcols:
        raise ValueError("dataset must have at least one feature column")
    expected = [f"x{i + 1}" for i in range(len(xcols))]
    if xcols != expected or (require_y and not has_y):
        raise ValueError(
            "malformed CSV header: expected x1,...,xd" + (",y" if require_y else "[,y]")
        )
    return len(xcols), has_y


def read_dataset_csv(path):
    """Read a dataset CSV with header ``x1,...,xd,y``."""
    rows = _read_rows(path)
    if not rows:
        raise ValueError(f"{path}: empty file")
    dim, _ = _parse_feature_header(rows[0], require_y=True)
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: dataset has no rows")
    try:
        values = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if values.shape[1] != dim + 1:
        raise ValueError(f"{path}: row width does not match header")
    return Dataset(values[:, :dim], values[:, dim])


def read_points_csv(path):
    """Read a feature-only CSV (``x1,...,xd``; a trailing ``y`` column is
    ignored).  May contain zero rows."""
    rows = _read_rows(path)
    if not rows:
        raise ValueError(f"{path}: empty file")
    dim, has_y = _parse_feature_header(rows[0], require_y=False)
    body = rows[1:]
    width = dim + (1 if has_y else 0)
    try:
        values = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if body and values.shape[1] != width:
        raise ValueError(f"{path}: row width does not match header")
    if not body:
        return np.empty((0, dim))
    return values[:, :dim]


def write_predictions_csv(path, values):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("prediction\n")
        for v in values:
            fh.write(_jsonio.format_float(v) + "\n")


def parse_point(text, dim):
    """Parse ``"x1,...,xd;y"`` into a point/response pair."""
    parts = text.split(";")
    if len(parts) != 2:
        raise ValueError("point must be formatted as 'x1,...,xd;y'")
    try:
        x0 = np.array([float(v) for v in parts[0].split(",")])
        y0 = float(parts[1])
    except ValueError:
        raise ValueError("point contains non-numeric entries") from None
    if x0.shape[0] != dim:
        raise ValueError(f"point has dimension {x0.shape[0]}, expected {dim}")
    return x0, y0


# -- configuration --------------------------------------------------------------


_TOP_KEYS = {"kernel", "loss", "lambda", "solver", "seed", "output_dir"}
_KERNEL_KEYS = {"family", "gamma", "matrix_path"}
_SOLVER_KEYS = {"tol", "max_iter", "damping", "line_search", "mode",
                "warn_nonconvex"}


def load_config(path):
    """Load and validate a run configuration; unknown keys are rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    for key in ("kernel", "loss", "lambda"):
        if key not in doc:
            raise ValueError(f"config misses required key {key!r}")

    kblock = dict(doc["kernel"])
    unknown = set(kblock) - _KERNEL_KEYS
    if unknown:
        raise ValueError(f"unknown kernel config keys {sorted(unknown)}")
    if kblock.get("family") == "precomputed":
        matrix_path = kblock.pop("matrix_path", None)
        if matrix_path is None:
            raise ValueError("precomputed kernel requires matrix_path")
        if not os.path.isabs(matrix_path):
            matrix_path = os.path.join(os.path.dirname(path), matrix_path)
        kernel = load_precomputed_kernel(matrix_path)
    else:
        if "matrix_path" in kblock:
            raise ValueError("matrix_path is only valid for precomputed kernels")
        kernel = Kernel(family=kblock.get("family", ""),
                        gamma=kblock.get("gamma"))

    loss = loss_from_params(doc["loss"])

    lam = doc["lambda"]
    if not isinstance(lam, (int, float)) or isinstance(lam, bool) or lam <= 0:
        raise ValueError("lambda must be a positive number")

    sblock = dict(doc.get("solver", {}))
    unknown = set(sblock) - _SOLVER_KEYS
    if unknown:
        raise ValueError(f"unknown solver config keys {sorted(unknown)}")
    opts = SolverOptions(**sblock)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValueError("seed must be a nonnegative integer")

    return {
        "kernel": kernel,
        "loss": loss,
        "lam": float(lam),
        "opts": opts,
        "seed": seed,
        "output_dir": doc.get("output_dir", "."),
    }


def _out_dir(args, cfg=None):
    out = args.out or (cfg["output_dir"] if cfg else ".")
    os.makedirs(out, exist_ok=True)
    return out


# -- commands --------------------------------------------------------------------


def cmd_fit(args):
    cfg = load_config(args.config)
    data = read_dataset_csv(args.data)
    out = _out_dir(args, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if args.oracle:
            if cfg["loss"].family != "squared":
                raise ValueError("--oracle requires the squared loss")
            model = fit_ls_closed_form(data, cfg["kernel"], cfg["lam"])
        else:
            model = fit(cfg["loss"], data, cfg["kernel"], cfg["lam"],
                        opts=cfg["opts"])
        bound_checks = apriori_bound_checks(model)
    _jsonio.dump(model_to_dict(model), os.path.join(out, "model.json"))
    report = {
        "n": data.n,
        "dim": data.dim,
        "objective": model.diagnostics["objective"],
        "residual": model.diagnostics["final_residual"],
        "iterations": model.diagnostics["iterations"],
        "converged": model.diagnostics["converged"],
        "mode": model.diagnostics["mode"],
        "bound_checks": bound_checks,
    }
    _jsonio.dump(report, os.path.join(out, "fit_report.json"))
    return EXIT_OK if model.diagnostics["converged"] else EXIT_NONCONVERGED


def cmd_predict(args):
    model = load_model(args.model)
    xs = read_points_csv(args.data)
    out = _out_dir(args)
    if xs.shape[0] and xs.shape[1] != model.function.anchors.shape[1]:
        raise ValueError(
            f"input dimension {xs.shape[1]} does not match the model "
            f"({model.function.anchors.shape[1]})"
        )
    preds = model.predict(xs) if xs.shape[0] else np.empty(0)
    write_predictions_csv(os.path.join(out, "predictions.csv"), preds)
    return EXIT_OK


def cmd_influence(args):
    model = load_model(args.model)
    data = read_dataset_csv(args.data)
    if not np.array_equal(model.function.anchors, data.xs):
        raise ValueError("model anchors do not match the dataset inputs")
    x0, y0 = parse_point(args.point, data.dim)
    result = influence_function(model, x0, y0, data=data)
    out = _out_dir(args)
    _jsonio.dump(
        {
            "point": {"x": x0, "y": y0},
            "h_norm": result.h_norm,
            "operator_residual": result.operator_residual,
            "t_norm": result.t_norm,
            "bound_2lambda_check": result.bound_2lambda_check,
            "direction": {
                "coefficients": result.direction.coefficients,
                "anchors": result.direction.anchors,
            },
        },
        os.path.join(out, "influence.json"),
    )
    return EXIT_OK


def cmd_sc(args):
    cfg = load_config(args.config)
    data = read_dataset_csv(args.data)
    x0, y0 = parse_point(args.point, data.dim)
    value = sensitivity_curve(
        data, x0, y0, cfg["loss"], cfg["kernel"], cfg["lam"],
        target=args.target, opts=cfg["opts"],
    )
    report = {
        "target": args.target,
        "point": {"x": x0, "y": y0},
        "n_augmented": data.n + 1,
        "sc": value,
        "convention": "reference is the given sample; the point is appended",
    }
    c = cfg["loss"].constants().value_bound
    if args.target == "risk" and np.isfinite(c):
        report["bound"] = 2.0 * c * (1.0 + 1.0 / (data.n + 1))
    out = _out_dir(args, cfg)
    _jsonio.dump(report, os.path.join(out, "sc.json"))
    return EXIT_OK


def cmd_maxbias(args):
    cfg = load_config(args.config)
    data = read_dataset_csv(args.data)
    try:
        eps_values = [float(e) for e in args.eps.split(",") if e.strip()]
    except ValueError:
        raise ValueError("--eps must be a comma-separated list of numbers") from None
    if not eps_values:
        raise ValueError("--eps must contain at least one value")
    grid = None
    if args.grid:
        grid_data = read_dataset_csv(args.grid)
        grid = [(grid_data.xs[i], float(grid_data.ys[i]))
                for i in range(grid_data.n)]
    reports = []
    all_hold = True
    for eps in eps_values:
        rep = maxbias_probe(
            data, cfg["loss"], cfg["kernel"], cfg["lam"], eps, grid=grid,
            opts=cfg["opts"],
        )
        all_hold = all_hold and rep.holds
        reports.append({
            "epsilon": rep.epsilon,
            "worst_delta": rep.worst_delta,
            "bound": rep.bound,
            "holds": rep.holds,
            "contamination_argmax": (
                None if rep.contamination_argmax is None
                else {"x": rep.contamination_argmax[0],
                      "y": rep.contamination_argmax[1]}
            ),
        })
    out = _out_dir(args, cfg)
    _jsonio.dump({"reports": reports}, os.path.join(out, "maxbias.json"))
    return EXIT_OK if all_hold else EXIT_INVARIANT


def cmd_bootstrap(args):
    cfg = load_config(args.config)
    data = read_dataset_csv(args.data)
    seed = args.seed if args.seed is not None else cfg["seed"]
    probes = read_points_csv(args.probes) if args.probes else None
    report = bootstrap_distribution(
        data, cfg["loss"], cfg["kernel"], cfg["lam"], args.resamples, seed,
        probes=probes, opts=cfg["opts"],
    )
    out = _out_dir(args, cfg)
    _jsonio.dump(report, os.path.join(out, "bootstrap.json"))
    return EXIT_OK


def _check_entry(checks, name, passed, detail=None, skipped=False):
    entry = {"status": "skipped" if skipped else ("pass" if passed else "fail")}
    if detail is not None:
        entry["detail"] = detail
    checks[name] = entry


def cmd_check(args):
    cfg = load_config(args.config)
    data = read_dataset_csv(args.data)
    loss, kernel, lam = cfg["loss"], cfg["kernel"], cfg["lam"]
    consts = loss.constants()
    if args.inject_fault:
        if args.inject_fault not in ("grad_bound", "hess_bound"):
            raise ValueError(f"unknown fault {args.inject_fault!r}")
        value = getattr(consts, args.inject_fault)
        corrupt = value / 1000.0 if np.isfinite(value) else 1e-3
        consts = dataclasses.replace(consts, **{args.inject_fault: corrupt})

    rng = np.random.default_rng(cfg["seed"])
    checks = {}

    gram = kernel.gram(data.xs)
    _check_entry(checks, "kernel_symmetry", bool(np.array_equal(gram, gram.T)))
    min_eig = float(np.linalg.eigvalsh(gram).min())
    _check_entry(
        checks, "kernel_psd",
        min_eig >= -1e-8 * max(1.0, float(np.abs(gram).max())),
        detail={"min_eigenvalue": min_eig},
    )

    m = 200
    ys = rng.normal(size=(2, m)) * 2.0
    ts = rng.normal(size=(2, m)) * 2.0
    vals = loss.pair_values(ys[0], ys[1], ts[0], ts[1])
    _check_entry(checks, "loss_nonnegative", bool(np.all(vals >= 0.0)))
    diag_vals = loss.pair_values(ys[0], ys[0], ts[0], ts[0])
    _check_entry(checks, "loss_diagonal_zero", bool(np.all(diag_vals == 0.0)))

    if loss.differentiable:
        step = 1e-6
        d5, d6 = loss.pair_grads(ys[0], ys[1], ts[0], ts[1])
        fd5 = (loss.pair_values(ys[0], ys[1], ts[0] + step, ts[1])
               - loss.pair_values(ys[0], ys[1], ts[0] - step, ts[1])) / (2 * step)
        fd6 = (loss.pair_values(ys[0], ys[1], ts[0], ts[1] + step)
               - loss.pair_values(ys[0], ys[1], ts[0], ts[1] - step)) / (2 * step)
        scale = np.maximum(1.0, np.maximum(np.abs(d5), np.abs(d6)))
        err = max(np.max(np.abs(d5 - fd5) / scale), np.max(np.abs(d6 - fd6) / scale))
        _check_entry(checks, "gradient_finite_difference", err <= 1e-5,
                     detail={"max_rel_err": float(err)})
        d55, d56, d66 = loss.pair_seconds(ys[0], ys[1], ts[0], ts[1])
        f55 = (loss.pair_grads(ys[0], ys[1], ts[0] + step, ts[1])[0]
               - loss.pair_grads(ys[0], ys[1], ts[0] - step, ts[1])[0]) / (2 * step)
        herr = float(np.max(np.abs(d55 - f55) / np.maximum(1.0, np.abs(d55))))
        _check_entry(checks, "hessian_finite_difference", herr <= 1e-4,
                     detail={"max_rel_err": herr})
        if loss.convex:
            # eigenvalues of [[d55, d56], [d56, d66]] must be >= -1e-12
            tr = d55 + d66
            det = d55 * d66 - d56 * d56
            lo = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4 * det, 0.0)))
            _check_entry(checks, "hessian_psd", bool(np.all(lo >= -1e-12)),
                         detail={"min_eigenvalue": float(lo.min())})
    else:
        _check_entry(checks, "gradient_finite_difference", True, skipped=True)
        _check_entry(checks, "hessian_finite_difference", True, skipped=True)

    if np.isfinite(consts.grad_bound):
        d5, d6 = loss.pair_grads(ys[0], ys[1], ts[0], ts[1])
        worst = float(max(np.max(np.abs(d5)), np.max(np.abs(d6))))
        _check_entry(checks, "loss_grad_bound", worst <= consts.grad_bound + 1e-10,
                     detail={"max_abs": worst, "bound": consts.grad_bound})
    else:
        _check_entry(checks, "loss_grad_bound", True, skipped=True)
    if np.isfinite(consts.hess_bound) and loss.differentiable:
        seconds = loss.pair_seconds(ys[0], ys[1], ts[0], ts[1])
        worst = float(max(np.max(np.abs(s)) for s in seconds))
        _check_entry(checks, "loss_hess_bound", worst <= consts.hess_bound + 1e-10,
                     detail={"max_abs": worst, "bound": consts.hess_bound})
    else:
        _check_entry(checks, "loss_hess_bound", True, skipped=True)
    if np.isfinite(consts.lip):
        tsp = ts + rng.normal(size=ts.shape)
        gap = np.abs(loss.pair_values(ys[0], ys[1], ts[0], ts[1])
                     - loss.pair_values(ys[0], ys[1], tsp[0], tsp[1]))
        allowed = consts.lip * (np.abs(ts[0] - tsp[0]) + np.abs(ts[1] - tsp[1]))
        _check_entry(checks, "loss_lipschitz", bool(np.all(gap <= allowed + 1e-10)))
    else:
        _check_entry(checks, "loss_lipschitz", True, skipped=True)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = fit(loss, data, kernel, lam, opts=cfg["opts"])
    residual = stationarity_residual(model)
    _check_entry(
        checks, "representer_residual",
        model.diagnostics["converged"] and residual <= cfg["opts"].tol,
        detail={"residual": residual,
                "converged": model.diagnostics["converged"],
                "best_effort": bool(model.diagnostics.get("best_effort", False))},
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bounds = apriori_bound_checks(model)
    _check_entry(checks, "h_norm_bound", bounds["h_norm_bound"]["holds"],
                 detail=bounds["h_norm_bound"])
    _check_entry(checks, "sup_bound", bounds["sup_bound"]["holds"],
                 detail=bounds["sup_bound"], skipped=bounds["sup_bound"]["skipped"])

    failed = sorted(k for k, v in checks.items() if v["status"] == "fail")
    out = _out_dir(args, cfg)
    _jsonio.dump({"checks": checks, "failed": failed},
                 os.path.join(out, "check.json"))
    if failed:
        print("failed invariants: " + ", ".join(failed), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pairlearn",
        description="Regularized pairwise learning and robustness diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, data=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        if data:
            p.add_argument("--data", required=True, help="dataset CSV (x1..xd,y)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")

    p = sub.add_parser("fit", help="fit a model and write model.json")
    add_common(p)
    p.add_argument("--oracle", action="store_true",
                   help="use the closed-form solver (squared loss only)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="evaluate a model on new inputs")
    add_common(p, config=False)
    p.add_argument("--model", required=True, help="model JSON file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("influence", help="influence function at a point")
    add_common(p, config=False)
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--point", required=True, help="contamination point 'x1,..,xd;y'")
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("sc", help="sensitivity curve of adding a point")
    add_common(p)
    p.add_argument("--point", required=True, help="added point 'x1,..,xd;y'")
    p.add_argument("--target", choices=("risk", "estimator"), default="risk")
    p.set_defaults(func=cmd_sc)

    p = sub.add_parser("maxbias", help="maxbias probe over a contamination grid")
    add_common(p)
    p.add_argument("--eps", required=True, help="comma-separated epsilon list")
    p.add_argument("--grid", default=None, help="contamination grid CSV (x1..xd,y)")
    p.set_defaults(func=cmd_maxbias)

    p = sub.add_parser("bootstrap", help="bootstrap stability experiment")
    add_common(p)
    p.add_argument("--resamples", "--B", dest="resamples", type=int, required=True,
                   help="number of bootstrap resamples")
    p.add_argument("--probes", default=None, help="probe points CSV (x1..xd)")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("check", help="run the invariant suite on a problem")
    add_common(p)
    p.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (UnsupportedLossError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
