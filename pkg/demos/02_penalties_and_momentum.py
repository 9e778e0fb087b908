"""Compare penalties and see what adaptive momentum buys.

Runs the same completion instance with the convex nuclear norm and three
nonconvex penalties, then contrasts NORT (adaptive momentum) with sNORT
(no momentum) on iteration counts to a common objective level.

Run:  python3 demos/02_penalties_and_momentum.py
"""

import numpy as np

from nort import (
    Objective,
    Penalty,
    Shape3,
    SolverConfig,
    SparseTensor3,
    SvdConfig,
    SynthSpec,
    nort_solve,
    pa_apg_solve,
    snort_solve,
    synth_generate,
    test_rmse,
)

spec = SynthSpec(Shape3((100, 100, 5)), rank=5, seed=1, noise_std=0.01)
train, val, truth, observed = synth_generate(spec)
full = SparseTensor3(spec.shape,
                     np.concatenate([train.i1, val.i1]),
                     np.concatenate([train.i2, val.i2]),
                     np.concatenate([train.i3, val.i3]),
                     np.concatenate([train.values, val.values]))
cfg = SolverConfig(max_iters=600, stop_tol=1e-7, max_rank=8,
                   svd_cfg=SvdConfig(tol=1e-4, seed=0))

# ------------------------------------------------- penalty comparison
# The nuclear norm shrinks every singular value by the same amount, so
# to suppress noise directions it must also bias the large (signal)
# singular values.  Nonconvex penalties shrink large values much less.
print("penalty comparison (same data, same budget):")
for pen in [Penalty("nn"), Penalty("capped-l1", theta=1.0),
            Penalty("lsp", theta=1.0), Penalty("tnn", theta=5)]:
    solve = pa_apg_solve if pen.kind == "nn" else nort_solve
    res = solve(Objective(full, (3.0, 3.0), pen), cfg, val=val)
    err = test_rmse(res.point, truth, observed)
    print(f"  {pen.kind:>10}: test RMSE {err:.4f}  ranks {res.trace[-1].ranks}"
          f"  iters {len(res.trace)}")

# ------------------------------------------------- momentum comparison
# NORT extrapolates X_t + gamma (X_t - X_{t-1}) and keeps the step only
# when it does not increase F; gamma grows on accept, shrinks on reject.
# sNORT always steps from X_t.
obj = Objective(full, (3.0, 3.0), Penalty("lsp", theta=1.0))
nort_res = nort_solve(obj, cfg, val=val)
snort_res = snort_solve(obj, cfg, val=val)
target = nort_res.trace[-1].objective * 1.01
hits = lambda tr: next((r.iteration for r in tr if r.objective <= target),
                       None)
print("\nmomentum comparison (iterations to reach final F + 1%):")
print(f"  NORT : {hits(nort_res.trace)} iterations,"
      f" accepted {sum(r.accepted for r in nort_res.trace)} extrapolations")
snort_hit = hits(snort_res.trace)
print(f"  sNORT: {snort_hit} iterations" if snort_hit is not None
      else f"  sNORT: not reached within {len(snort_res.trace)} iterations")
