"""End-to-end acceptance checks.

Each test prints a single [PASS]/[FAIL] line for its criterion.  Oracles are
dense materializations, full SVDs, or fine grid searches; expected values are
never taken from the implementation under test.
"""

import time

import numpy as np
import pytest

from nort.penalties import PENALTY_KINDS, Penalty, gsvt, prox_sigmas, scalar_prox, svt
from nort.solvers import (
    Objective,
    SolverConfig,
    gdpan_solve,
    nort_solve,
    pa_apg_solve,
    snort_solve,
)
from nort.splr import DenseOperator, SplrOperator
from nort.svd import SvdConfig
from nort.synth import SynthSpec, synth_generate
from nort.synth import test_rmse as holdout_rmse
from nort.tensors import FactorPair, Shape3, SparseTensor3, unfold_dense

TIGHT = SvdConfig(tol=1e-12, max_power_iters=2000)
NONCONVEX = ("capped-l1", "lsp", "tnn")
THETAS = {"nn": None, "capped-l1": 1.0, "lsp": 0.5, "tnn": 2}


def report(criterion, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion} failed: {detail}"


def _random_point(rng, shape):
    terms = []
    for mode in (1, 2, 3):
        k = int(rng.integers(0, 4))
        if k:
            n, m = shape.mode_dims(mode)
            terms.append((float(rng.standard_normal()),
                          FactorPair(mode, rng.standard_normal((n, k)),
                                     rng.standard_normal((m, k)))))
    nnz = int(rng.integers(1, shape.size // 2 + 1))
    lin = rng.choice(shape.size, size=nnz, replace=False)
    i1 = lin % shape.dims[0]
    i2 = (lin // shape.dims[0]) % shape.dims[1]
    i3 = lin // (shape.dims[0] * shape.dims[1])
    sp = SparseTensor3(shape, i1, i2, i3, rng.standard_normal(nnz))
    return SplrOperator(shape, terms, (float(rng.standard_normal()), sp))


def _obs_for(rng, shape, nnz, noise=0.05, rank=2):
    gt = np.zeros(shape.dims)
    for _ in range(rank):
        gt += np.einsum("i,j,k->ijk", rng.standard_normal(shape.dims[0]),
                        rng.standard_normal(shape.dims[1]),
                        rng.standard_normal(shape.dims[2]))
    lin = rng.choice(shape.size, size=nnz, replace=False)
    i1 = lin % shape.dims[0]
    i2 = (lin // shape.dims[0]) % shape.dims[1]
    i3 = lin // (shape.dims[0] * shape.dims[1])
    vals = gt[i1, i2, i3] + noise * rng.standard_normal(nnz)
    return SparseTensor3(shape, i1, i2, i3, vals)


def test_criterion_1_kernel_equivalence():
    t0 = time.perf_counter()
    rng0 = np.random.default_rng(0)
    worst = 0.0
    for case in range(100):
        rng = np.random.default_rng(int(rng0.integers(2 ** 31)))
        shape = Shape3(tuple(int(rng.integers(2, hi + 1)) for hi in (8, 7, 6)))
        op = _random_point(rng, shape)
        dense = DenseOperator(np.zeros((1, 1)))
        for mode in (1, 2, 3):
            ref = unfold_dense(op.densify(), mode)
            scale = max(np.linalg.norm(ref), 1e-300)
            view = op.mode_view(mode)
            x = rng.standard_normal(view.ncols)
            y = rng.standard_normal(view.nrows)
            worst = max(worst,
                        np.linalg.norm(view.matvec(x) - ref @ x) / scale,
                        np.linalg.norm(view.rmatvec(y) - ref.T @ y) / scale)
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-12 and elapsed < 5.0,
           f"kernel equivalence: worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_prox_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    worst = 0.0
    lam = 0.7
    for kind in PENALTY_KINDS:
        pen = Penalty(kind, THETAS[kind])
        for _ in range(50):
            M = rng.standard_normal((20, 15))
            U, s, Vt = np.linalg.svd(M, full_matrices=False)
            oracle = (U * prox_sigmas(pen, s, lam)) @ Vt
            if kind == "nn":
                fp = svt(DenseOperator(M), lam, 5, TIGHT)
            else:
                fp = gsvt(DenseOperator(M), pen, lam, 5, TIGHT)
            got = fp.U @ fp.V.T
            worst = max(worst, np.linalg.norm(got - oracle))
    # scalar prox against a fine grid
    grid_margin = 0.0
    for kind in PENALTY_KINDS:
        pen = Penalty(kind, THETAS[kind])
        for _ in range(200):
            sigma = float(rng.uniform(0, 5))
            w = float(rng.uniform(0, 3))
            idx = int(rng.integers(1, 6))
            y = scalar_prox(pen, sigma, w, index=idx)
            from nort.penalties import kappa
            obj = lambda t: 0.5 * (t - sigma) ** 2 + w * kappa(pen, t, idx)
            grid = np.linspace(0.0, sigma + 1.0, 100_000)
            gobj = 0.5 * (grid - sigma) ** 2 + w * kappa(pen, grid, idx)
            grid_margin = max(grid_margin, obj(y) - float(gobj.min()))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-8 and grid_margin <= 1e-9 and elapsed < 30.0,
           f"prox oracle: fro err {worst:.2e}, grid margin {grid_margin:.2e}, "
           f"{elapsed:.1f}s")


def test_criterion_3_snort_vs_gdpan():
    t0 = time.perf_counter()
    shape = Shape3((20, 15, 4))
    worst = 0.0
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        obs = _obs_for(rng, shape, 250)
        for kind in NONCONVEX:
            obj = Objective(obs, (0.4, 0.6), Penalty(kind, THETAS[kind]))
            cfg = SolverConfig(max_iters=10, stop_tol=0.0, svd_cfg=TIGHT)
            sparse_its, dense_its = [], []
            snort_solve(obj, cfg, iterate_callback=lambda t, x, v:
                        sparse_its.append(x.densify().as_array()))
            gdpan_solve(obj, cfg, iterate_callback=lambda t, x, v:
                        dense_its.append(x.as_array()))
            assert len(sparse_its) == len(dense_its) == 10
            for a, b in zip(sparse_its, dense_its):
                worst = max(worst, float(np.max(np.abs(a - b))))
    elapsed = time.perf_counter() - t0
    report(3, worst <= 1e-8 and elapsed < 60.0,
           f"sNORT vs GDPAN per-iterate: worst {worst:.2e}, {elapsed:.1f}s")


def test_criterion_4_residual_bound():
    t0 = time.perf_counter()
    shape = Shape3((20, 15, 4))
    rng = np.random.default_rng(7)
    obs = _obs_for(rng, shape, 250)
    pen = Penalty("capped-l1", 2.0)
    obj = Objective(obs, (0.5, 0.5), pen)
    ok = True
    detail = []
    for T in (10, 50):
        cfg = SolverConfig(max_iters=T, stop_tol=0.0, svd_cfg=TIGHT)
        gaps = []
        res = nort_solve(
            obj, cfg, exact_f=True,
            iterate_callback=lambda t, x, v: gaps.append(
                0.5 * SplrOperator(
                    x.shape, list(x.low_rank_terms)
                    + [(-c, f) for c, f in v.low_rank_terms]).norm() ** 2))
        tau = res.tau
        L = pen.lipschitz
        eta = tau - obj.rho - obj.D * L
        bound = (res.trace[0].objective
                 + L ** 2 * sum(l * l for l in obj.lambdas)
                 / (2 * tau * obj.D)) / (eta * T)
        ok = ok and min(gaps) <= bound
        detail.append(f"T={T}: min gap {min(gaps):.3e} <= bound {bound:.3e}")
    elapsed = time.perf_counter() - t0
    report(4, ok and elapsed < 60.0, "; ".join(detail) + f", {elapsed:.1f}s")


def _desk_instance(seed=0, noise_std=0.01):
    """Criterion 5-8 instance: 250x250x5, CP rank 5, low observation noise.

    At this observation density (~2.5 observations per degree of freedom) the
    holdout RMSE floor of an oracle CP fit is about 1.06x the noise level, so
    the 0.02 target is only reachable when the noise std is 0.01.
    """
    spec = SynthSpec(Shape3((250, 250, 5)), rank=5, seed=seed,
                     noise_std=noise_std)
    train, val, gt, obs_idx = synth_generate(spec)
    obs = SparseTensor3(spec.shape,
                        np.concatenate([train.i1, val.i1]),
                        np.concatenate([train.i2, val.i2]),
                        np.concatenate([train.i3, val.i3]),
                        np.concatenate([train.values, val.values]))
    return obs, gt, obs_idx


DESK_SVD = SvdConfig(tol=1e-4, max_power_iters=300)


def test_criterion_5_desk_scale_rmse():
    t0 = time.perf_counter()
    obs, gt, obs_idx = _desk_instance()
    rmse = {}
    cfg = SolverConfig(max_iters=2900, stop_tol=1e-7, max_rank=20,
                       svd_cfg=DESK_SVD)
    res = nort_solve(Objective(obs, (1.25, 1.25), Penalty("lsp", 0.5)), cfg)
    rmse["lsp"] = holdout_rmse(res.point, gt, obs_idx)
    cfg = SolverConfig(max_iters=300, stop_tol=1e-6, max_rank=20,
                       svd_cfg=DESK_SVD)
    res = nort_solve(Objective(obs, (6.0, 6.0), Penalty("capped-l1", 20.0)),
                     cfg)
    rmse["capped-l1"] = holdout_rmse(res.point, gt, obs_idx)
    cfg = SolverConfig(max_iters=600, stop_tol=1e-6, max_rank=20,
                       svd_cfg=DESK_SVD)
    res = pa_apg_solve(Objective(obs, (0.5, 0.5), Penalty("nn")), cfg)
    rmse["pa-apg"] = holdout_rmse(res.point, gt, obs_idx)
    elapsed = time.perf_counter() - t0
    ok = (rmse["lsp"] <= 0.02 and rmse["capped-l1"] <= 0.02
          and rmse["lsp"] < rmse["pa-apg"]
          and rmse["capped-l1"] < rmse["pa-apg"]
          and elapsed < 300.0)
    report(5, ok,
           f"noise std 0.01; test RMSE lsp {rmse['lsp']:.4f}, "
           f"capped-l1 {rmse['capped-l1']:.4f}, pa-apg {rmse['pa-apg']:.4f}, "
           f"{elapsed:.0f}s")


def test_criterion_6_speedup_vs_gdpan():
    t0 = time.perf_counter()
    obs, _, _ = _desk_instance()
    obj = Objective(obs, (8.0, 8.0), Penalty("lsp", 1.0))
    cfg = SolverConfig(max_iters=150, stop_tol=0.0, max_rank=6,
                       svd_cfg=DESK_SVD)
    t1 = time.perf_counter()
    nort_solve(obj, cfg)
    t_nort = time.perf_counter() - t1
    t1 = time.perf_counter()
    gdpan_solve(obj, cfg)
    t_gdpan = time.perf_counter() - t1
    elapsed = time.perf_counter() - t0
    report(6, t_nort <= 0.5 * t_gdpan and elapsed < 600.0,
           f"150 iterations: nort {t_nort:.1f}s vs gdpan {t_gdpan:.1f}s "
           f"(ratio {t_gdpan / t_nort:.1f}x), {elapsed:.0f}s")


def test_criterion_7_momentum_benefit():
    t0 = time.perf_counter()
    wins = 0
    details = []
    for seed in (0, 1, 2):
        obs, _, _ = _desk_instance(seed=seed)
        obj = Objective(obs, (1.25, 1.25), Penalty("lsp", 0.5))
        cfg = SolverConfig(max_iters=150, stop_tol=0.0, max_rank=20,
                           svd_cfg=DESK_SVD)
        target = 1.01 * gdpan_solve(obj, cfg).trace[-1].objective

        def run(solver):
            stamps = []
            t1 = time.perf_counter()
            res = solver(obj, SolverConfig(
                max_iters=400, stop_tol=0.0, max_rank=20, svd_cfg=DESK_SVD),
                iterate_callback=lambda t, x, v: stamps.append(
                    time.perf_counter() - t1))
            for it, rec in enumerate(res.trace):
                if rec.objective <= target:
                    return it + 1, stamps[it]
            return None, None
        it_n, tm_n = run(nort_solve)
        it_s, tm_s = run(snort_solve)
        hit = (it_n is not None and it_s is not None
               and it_n <= it_s and tm_n < tm_s)
        wins += hit
        fmt = lambda it, tm: "miss" if it is None else f"{it} it/{tm:.1f}s"
        details.append(f"seed {seed}: nort {fmt(it_n, tm_n)} vs "
                       f"snort {fmt(it_s, tm_s)}")
    elapsed = time.perf_counter() - t0
    report(7, wins >= 2, f"{wins}/3 seeds; " + "; ".join(details)
           + f", {elapsed:.0f}s")


def test_criterion_8_mode_count_tradeoff():
    # lambda = 8 for every penalized mode in both runs: the comparison is
    # "penalize a third unfolding, same hyperparameters" and should trade
    # run time (mode-3 kernels touch (1/I3) I_x workspace) for roughly
    # unchanged holdout error on the flat instance
    t0 = time.perf_counter()
    obs, gt, obs_idx = _desk_instance()
    out = {}
    for lams in ((8.0, 8.0), (8.0, 8.0, 8.0)):
        cfg = SolverConfig(max_iters=2000, stop_tol=1e-6, max_rank=6,
                           svd_cfg=DESK_SVD)
        t1 = time.perf_counter()
        res = nort_solve(Objective(obs, lams, Penalty("lsp", 1.0)), cfg)
        out[len(lams)] = (time.perf_counter() - t1,
                          holdout_rmse(res.point, gt, obs_idx))
    ratio = out[3][0] / out[2][0]
    rel = abs(out[3][1] - out[2][1]) / out[2][1]
    # cubic instance: every mode is genuinely low rank, so the third
    # penalty should help rather than merely cost time
    spec = SynthSpec(Shape3((60, 60, 60)), rank=5, seed=0, noise_std=0.01)
    train, val, gt3, idx3 = synth_generate(spec)
    cube = SparseTensor3(spec.shape,
                         np.concatenate([train.i1, val.i1]),
                         np.concatenate([train.i2, val.i2]),
                         np.concatenate([train.i3, val.i3]),
                         np.concatenate([train.values, val.values]))
    cube_rmse = {}
    for lams in ((8.0, 8.0), (8.0, 8.0, 8.0)):
        cfg = SolverConfig(max_iters=1500, stop_tol=1e-6, max_rank=6,
                           svd_cfg=DESK_SVD)
        res = nort_solve(Objective(cube, lams, Penalty("lsp", 1.0)), cfg)
        cube_rmse[len(lams)] = holdout_rmse(res.point, gt3, idx3)
    elapsed = time.perf_counter() - t0
    ok = (ratio >= 2.0 and rel <= 0.20 and cube_rmse[3] < cube_rmse[2]
          and elapsed < 600.0)
    report(8, ok,
           f"250x250x5: D=3/D=2 time ratio {ratio:.2f}, rel RMSE diff "
           f"{rel:.2%}; 60^3: D=3 {cube_rmse[3]:.4f} vs D=2 "
           f"{cube_rmse[2]:.4f}, {elapsed:.0f}s")


def test_criterion_9_memory_scaling():
    t0 = time.perf_counter()
    sizes = (100, 200, 400)
    nort_store, gdpan_store, ixs = [], [], []
    for n in sizes:
        spec = SynthSpec(Shape3((n, n, 5)), seed=0)
        train, val, _, _ = synth_generate(spec)
        obj = Objective(train, (10.0, 10.0), Penalty("lsp", 1.0))
        cfg = SolverConfig(max_iters=5, stop_tol=0.0, max_rank=10,
                           svd_cfg=SvdConfig(tol=1e-3, max_power_iters=50))
        nort_store.append(nort_solve(obj, cfg).peak_storage)
        gdpan_store.append(gdpan_solve(obj, cfg).peak_storage)
        ixs.append(spec.shape.size)
    lx = np.log(np.asarray(ixs, float))
    slope = lambda ys: np.polyfit(lx, np.log(np.asarray(ys, float)), 1)[0]
    s_nort, s_gdpan = slope(nort_store), slope(gdpan_store)
    elapsed = time.perf_counter() - t0
    report(9, s_nort < 0.9 and s_gdpan > 0.9,
           f"log-log storage slope: nort {s_nort:.2f} (sublinear), "
           f"gdpan {s_gdpan:.2f} (linear), {elapsed:.1f}s")


def test_criterion_10_determinism():
    t0 = time.perf_counter()
    shape = Shape3((20, 15, 4))
    rng = np.random.default_rng(3)
    obs = _obs_for(rng, shape, 250)
    obj = Objective(obs, (0.5, 0.5), Penalty("lsp", 0.5))
    cfg = SolverConfig(max_iters=15, stop_tol=0.0)
    ok = True
    for solver in (nort_solve, snort_solve, pa_apg_solve):
        a = solver(obj, cfg)
        b = solver(obj, cfg)
        ok = ok and np.array_equal(a.point.densify().values,
                                   b.point.densify().values)
        ok = ok and all(
            ra.objective == rb.objective and ra.ranks == rb.ranks
            and ra.gamma == rb.gamma and ra.accepted == rb.accepted
            for ra, rb in zip(a.trace, b.trace))
    ga = gdpan_solve(obj, cfg)
    gb = gdpan_solve(obj, cfg)
    ok = ok and np.array_equal(ga.point.values, gb.point.values)
    elapsed = time.perf_counter() - t0
    report(10, ok, f"bitwise-identical reruns, {elapsed:.1f}s")
