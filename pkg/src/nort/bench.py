"""Experiment orchestration: grid search, metrics, traces and reports.

A run takes a dataset (synthetic spec or files), a solver, and a lambda /
theta grid; each cell trains on the training split and is scored by
validation RMSE, the best cell is reported with its test RMSE when a test
reference exists.  Reports are deterministic given the seed (wall-time
fields aside).  ``NORT_THREADS`` caps grid parallelism.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .penalties import Penalty
from .solvers import (
    Objective,
    SolverConfig,
    gdpan_solve,
    nort_solve,
    pa_apg_solve,
    snort_solve,
)
from .synth import SynthSpec, rmse, synth_generate, test_rmse
from .tensors import DenseTensor3, Shape3, SparseTensor3

__all__ = ["ExperimentConfig", "run_experiment", "choose_D", "SOLVERS",
           "trace_to_rows", "write_trace_csv"]

SOLVERS = {
    "nort": nort_solve,
    "snort": snort_solve,
    "gdpan": gdpan_solve,
    "pa-apg": pa_apg_solve,
}

TRACE_HEADER = ["iteration", "seconds", "F", "val_rmse", "k1", "k2", "k3",
                "gamma", "accepted"]


def choose_D(shape: Shape3, d) -> int:
    """Resolve a D request; 'auto' regularizes two modes when I3 <= 10."""
    if d in (None, "auto"):
        return 2 if shape.dims[2] <= 10 else 3
    d = int(d)
    if d not in (1, 2, 3):
        raise ConfigError(f"D must be 1, 2, 3 or 'auto', got {d}")
    return d


@dataclass(frozen=True)
class ExperimentConfig:
    solver: str = "nort"
    penalty: str = "lsp"
    D: object = "auto"
    lambda_grid: tuple = (0.5,)
    theta_grid: tuple = (1.0,)
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)
    synth: SynthSpec | None = None
    train: SparseTensor3 | None = None
    val: SparseTensor3 | None = None
    test: SparseTensor3 | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; choose from {sorted(SOLVERS)}")
        if not self.lambda_grid or not self.theta_grid:
            raise ConfigError("lambda and theta grids must be nonempty")
        if self.synth is None and self.train is None:
            raise ConfigError("either a synthetic spec or a training set is required")


def _max_threads() -> int:
    try:
        return max(1, int(os.environ.get("NORT_THREADS", "1")))
    except ValueError:
        return 1


def trace_to_rows(trace):
    rows = []
    for r in trace:
        rows.append([r.iteration, f"{r.seconds:.6f}", repr(r.objective),
                     repr(r.val_rmse), r.ranks[0], r.ranks[1], r.ranks[2],
                     repr(r.gamma), int(r.accepted)])
    return rows


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        w.writerows(trace_to_rows(trace))


def _solve_cell(cfg: ExperimentConfig, D, train, val, lam, theta):
    pen = Penalty(cfg.penalty, theta)
    obj = Objective(train, (lam,) * D, pen)
    solver = SOLVERS[cfg.solver]
    t0 = time.perf_counter()
    res = solver(obj, cfg.solver_cfg, val=val)
    seconds = time.perf_counter() - t0
    val_rmse = rmse(res.point, val) if val is not None and val.nnz else float("nan")
    return res, seconds, val_rmse


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run the grid, pick the best validation cell, emit report and traces."""
    if cfg.synth is not None:
        train, val, truth, observed = synth_generate(cfg.synth)
    else:
        train, val, truth, observed = cfg.train, cfg.val, None, None
    shape = train.shape
    D = choose_D(shape, cfg.D)

    cells = [(lam, theta) for lam in cfg.lambda_grid for theta in cfg.theta_grid]

    def _run(cell):
        lam, theta = cell
        try:
            res, seconds, val_r = _solve_cell(cfg, D, train, val, lam, theta)
            return {"lambda": lam, "theta": theta, "val_rmse": val_r,
                    "iterations": len(res.trace), "seconds": seconds,
                    "converged": res.converged,
                    "peak_storage_values": res.peak_storage,
                    "final_objective": res.trace[-1].objective if res.trace else None,
                    "_result": res}
        except Exception as exc:  # recorded, run continues
            return {"lambda": lam, "theta": theta, "error": f"{type(exc).__name__}: {exc}"}

    workers = min(_max_threads(), len(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run, cells))
    else:
        rows = [_run(c) for c in cells]

    ok = [r for r in rows if "error" not in r and np.isfinite(r["val_rmse"])]
    best = min(ok, key=lambda r: r["val_rmse"]) if ok else None

    report = {
        "solver": cfg.solver,
        "penalty": cfg.penalty,
        "D": D,
        "shape": list(shape.dims),
        "train_nnz": train.nnz,
        "val_nnz": val.nnz if val is not None else 0,
        "grid": [{k: v for k, v in r.items() if k != "_result"} for r in rows],
    }
    if best is not None:
        report["best"] = {"lambda": best["lambda"], "theta": best["theta"],
                          "val_rmse": best["val_rmse"]}
        res = best["_result"]
        if truth is not None:
            report["test_rmse"] = test_rmse(res.point, truth, observed)
        elif cfg.test is not None and cfg.test.nnz:
            report["test_rmse"] = rmse(res.point, cfg.test)

    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
        for r in rows:
            if "_result" in r:
                name = f"trace_lam{r['lambda']:g}_theta{r['theta']:g}.csv"
                write_trace_csv(os.path.join(cfg.output_dir, name), r["_result"].trace)
        with open(os.path.join(cfg.output_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2)
    return report
