"""Command-line interface: ``nort synth|complete|eval|bench``.

Exit codes: 0 success, 2 configuration / input error, 3 numerical failure.
Config files use an INI-style grammar: ``key = value`` pairs, sections in
brackets, ``#`` comments; command-line flags override file values.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys

import numpy as np

from . import io as nio
from .bench import SOLVERS, ExperimentConfig, choose_D, run_experiment, write_trace_csv
from .errors import ConfigError, NumericalError, ParseError, RangeError, ShapeError
from .penalties import PENALTY_KINDS, Penalty
from .solvers import Objective, SolverConfig
from .svd import SvdConfig
from .synth import SynthSpec, rmse, synth_generate
from .tensors import Shape3, SparseTensor3


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--solver", choices=sorted(SOLVERS), default="nort")
    p.add_argument("--reg", choices=PENALTY_KINDS, default="lsp",
                   help="singular-value penalty")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--D", default="auto", help="regularized modes: 1, 2, 3 or auto")
    p.add_argument("--tau", type=float, default=None,
                   help="step parameter; default 1.01*(rho + D*L)")
    p.add_argument("--gamma1", type=float, default=0.1)
    p.add_argument("--p", dest="p_shrink", type=float, default=0.5)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-rank", type=int, default=None)
    p.add_argument("--svd-tol", type=float, default=1e-4)
    p.add_argument("--svd-iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)


def _solver_cfg(args) -> SolverConfig:
    return SolverConfig(
        tau=args.tau, gamma1=args.gamma1, p=args.p_shrink,
        max_iters=args.max_iters, stop_tol=args.tol, max_rank=args.max_rank,
        svd_cfg=SvdConfig(tol=args.svd_tol, max_power_iters=args.svd_iters,
                          seed=args.seed or 0),
    )


def _cmd_synth(args) -> int:
    shape = Shape3((args.i1, args.i2, args.i3))
    spec = SynthSpec(shape, rank=args.rank, noise_std=args.noise_std,
                     obs_count=args.obs_count, train_fraction=args.train_frac,
                     seed=args.seed)
    train, val, truth, _ = synth_generate(spec)
    nio.write_coo(args.out + ".train.coo", train)
    nio.write_coo(args.out + ".val.coo", val)
    nio.write_dense(args.out + ".truth.dt3", truth)
    print(json.dumps({"shape": list(shape.dims), "train_nnz": train.nnz,
                      "val_nnz": val.nnz,
                      "files": [args.out + s for s in
                                (".train.coo", ".val.coo", ".truth.dt3")]}))
    return 0


def _cmd_complete(args) -> int:
    train = nio.read_coo(args.train)
    val = nio.read_coo(args.val) if args.val else None
    D = choose_D(train.shape, args.D)
    obj = Objective(train, (args.lam,) * D, Penalty(args.reg, args.theta))
    res = SOLVERS[args.solver](obj, _solver_cfg(args), val=val)
    if args.trace:
        write_trace_csv(args.trace, res.trace)
    summary = {
        "solver": args.solver, "penalty": args.reg, "D": D,
        "lambda": args.lam, "theta": args.theta, "tau": res.tau,
        "iterations": len(res.trace), "converged": res.converged,
        "critical_point": res.critical_point,
        "final_objective": res.trace[-1].objective if res.trace else None,
        "final_ranks": list(res.trace[-1].ranks) if res.trace else None,
        "peak_storage_values": res.peak_storage,
    }
    if val is not None:
        summary["val_rmse"] = rmse(res.point, val)
    if args.save_dense:
        dense = res.point if hasattr(res.point, "values") else res.point.densify()
        nio.write_dense(args.save_dense, dense)
        summary["dense_output"] = args.save_dense
    out = json.dumps(summary, indent=2)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(out + "\n")
    print(out)
    return 0


def _cmd_eval(args) -> int:
    pred = nio.read_dense(args.pred)
    if args.ref.endswith(".dt3"):
        dense = nio.read_dense(args.ref)
        arr = dense.as_array()
        i1, i2, i3 = np.unravel_index(np.arange(dense.shape.size), dense.shape.dims,
                                      order="F")
        ref = SparseTensor3(dense.shape, i1, i2, i3, arr[i1, i2, i3])
    else:
        ref = nio.read_coo(args.ref)
    print(json.dumps({"rmse": rmse(pred, ref), "entries": ref.nnz}))
    return 0


def _grid(text) -> tuple:
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _cmd_bench(args) -> int:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if args.config:
        read = cp.read(args.config)
        if not read:
            raise ConfigError(f"cannot read config file {args.config}")
    data = cp["data"] if cp.has_section("data") else {}
    grid = cp["grid"] if cp.has_section("grid") else {}
    solver = cp["solver"] if cp.has_section("solver") else {}
    output = cp["output"] if cp.has_section("output") else {}

    def pick(section, key, flag, cast=str):
        if flag is not None:
            return flag
        if key in section:
            return cast(section[key])
        return None

    synth = None
    train = val = test = None
    source = pick(data, "source", None) or ("synth" if "i1" in data else None)
    if args.train or source == "coo":
        train = nio.read_coo(args.train or data["train"])
        vpath = args.val or data.get("val")
        val = nio.read_coo(vpath) if vpath else None
        tpath = data.get("test")
        test = nio.read_coo(tpath) if tpath else None
    else:
        shape = Shape3((int(data.get("i1", 0)), int(data.get("i2", 0)),
                        int(data.get("i3", 0))))
        synth = SynthSpec(
            shape,
            rank=int(data.get("rank", 5)),
            noise_std=pick(data, "noise_std", args.noise_std, float) or 0.1,
            seed=pick(data, "seed", args.seed, int) or 0,
        )

    lam_grid = _grid(args.lambda_grid or grid.get("lambda", "0.5"))
    theta_grid = _grid(args.theta_grid or grid.get("theta", "1.0"))

    scfg = SolverConfig(
        tau=pick(solver, "tau", args.tau, float),
        gamma1=pick(solver, "gamma1", None, float) or args.gamma1,
        p=pick(solver, "p", None, float) or args.p_shrink,
        max_iters=pick(solver, "max_iters", None, int) or args.max_iters,
        stop_tol=pick(solver, "tol", None, float) or args.tol,
        max_rank=pick(solver, "max_rank", args.max_rank, int),
        svd_cfg=SvdConfig(tol=pick(solver, "svd_tol", None, float) or args.svd_tol,
                          max_power_iters=pick(solver, "svd_iters", None, int)
                          or args.svd_iters,
                          seed=args.seed or 0),
    )
    ecfg = ExperimentConfig(
        solver=pick(solver, "solver", None) or args.solver,
        penalty=pick(solver, "reg", None) or args.reg,
        D=pick(solver, "d", args.D if args.D != "auto" else None) or "auto",
        lambda_grid=lam_grid, theta_grid=theta_grid,
        solver_cfg=scfg, synth=synth, train=train, val=val, test=test,
        output_dir=args.out or output.get("dir"),
    )
    report = run_experiment(ecfg)
    print(json.dumps(report, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nort",
                                 description="Low-rank 3-order tensor completion")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("--i1", type=int, required=True)
    sp.add_argument("--i2", type=int, required=True)
    sp.add_argument("--i3", type=int, required=True)
    sp.add_argument("--rank", type=int, default=5)
    sp.add_argument("--noise-std", type=float, default=0.1)
    sp.add_argument("--obs-count", type=int, default=None)
    sp.add_argument("--train-frac", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output path prefix")
    sp.set_defaults(func=_cmd_synth)

    cp = sub.add_parser("complete", help="complete a partially observed tensor")
    cp.add_argument("--train", required=True, help="COO training file")
    cp.add_argument("--val", default=None, help="COO validation file")
    _add_solver_flags(cp)
    cp.add_argument("--trace", default=None, help="per-iteration CSV output")
    cp.add_argument("--summary", default=None, help="summary JSON output")
    cp.add_argument("--save-dense", default=None, help="write solution as .dt3")
    cp.set_defaults(func=_cmd_complete)

    ep = sub.add_parser("eval", help="RMSE of a dense prediction vs a reference")
    ep.add_argument("--pred", required=True, help=".dt3 prediction")
    ep.add_argument("--ref", required=True, help=".coo or .dt3 reference")
    ep.set_defaults(func=_cmd_eval)

    bp = sub.add_parser("bench", help="grid-searched experiment from a config file")
    bp.add_argument("--config", default=None)
    bp.add_argument("--train", default=None)
    bp.add_argument("--val", default=None)
    bp.add_argument("--lambda-grid", default=None, help="space/comma separated")
    bp.add_argument("--theta-grid", default=None)
    bp.add_argument("--noise-std", type=float, default=None)
    bp.add_argument("--out", default=None, help="output directory")
    _add_solver_flags(bp)
    bp.set_defaults(func=_cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, ShapeError, RangeError,
            FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
