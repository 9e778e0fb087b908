"""Complete a synthetic low-rank tensor from a few noisy entries.

Generates a rank-5 ground truth tensor, observes a sparse random subset
of its noise-corrupted entries, and runs the structure-aware solver with
a log-sum penalty.  Reports recovery error on the entries the solver
never saw.

Run:  python3 demos/01_complete_synthetic.py
"""

import numpy as np

from nort import (
    Objective,
    Penalty,
    SolverConfig,
    SvdConfig,
    Shape3,
    SparseTensor3,
    SynthSpec,
    nort_solve,
    synth_generate,
    test_rmse,
)

# ---------------------------------------------------------------- data
# A 100 x 100 x 5 tensor of true rank 5.  The generator observes
# |Omega| = (I1+I2+I3) * I3 * ln(I1*I2*I3) / 5 entries (2218 here) and
# splits them 50/50 into train/validation.
spec = SynthSpec(Shape3((100, 100, 5)), rank=5, seed=0, noise_std=0.01)
train, val, truth, observed = synth_generate(spec)
# The split is for hyperparameter search; the final fit uses every
# observed entry (a rank-5 model has ~1000 free parameters here, and the
# train half alone has barely that many entries).
full = SparseTensor3(spec.shape,
                     np.concatenate([train.i1, val.i1]),
                     np.concatenate([train.i2, val.i2]),
                     np.concatenate([train.i3, val.i3]),
                     np.concatenate([train.values, val.values]))
print(f"tensor {spec.shape.dims}, {full.nnz} observed entries "
      f"({100 * full.nnz / spec.shape.size:.2f}% of the tensor)")

# ------------------------------------------------------------- solve
# Regularize the first two mode unfoldings (D=2): for flat tensors the
# third unfolding is short and fat and carries little rank information.
obj = Objective(full, lambdas=(3.0, 3.0), penalty=Penalty("lsp", theta=1.0))
cfg = SolverConfig(max_iters=2500, stop_tol=1e-7, max_rank=8,
                   svd_cfg=SvdConfig(tol=1e-4, seed=0))
res = nort_solve(obj, cfg, val=val)

last = res.trace[-1]
print(f"stopped after {last.iteration} iterations "
      f"({last.seconds:.1f}s), converged={res.converged}")
print(f"final objective {last.objective:.4f}, mode ranks {last.ranks}")

# ------------------------------------------------------------ evaluate
# test_rmse compares against the *clean* ground truth on entries outside
# the observed set -- true out-of-sample recovery error.
err = test_rmse(res.point, truth, observed)
scale = float(np.sqrt(np.mean(truth.as_array() ** 2)))
print(f"test RMSE {err:.4f}  (ground-truth RMS scale {scale:.2f})")

# The iterate is never densified during the solve; it is a sum of
# per-mode factor pairs.  Materialize it only if you need the array:
dense = res.point.densify().as_array()
print(f"densified solution shape {dense.shape}, "
      f"stored factors use {res.peak_storage} floats "
      f"vs {dense.size} for the dense tensor")
