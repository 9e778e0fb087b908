"""Low-rank 3-order tensor completion with nonconvex overlapped-nuclear-norm
regularization, solved by structure-aware proximal iterations that keep every
iterate in sparse-plus-low-rank form."""

from .errors import (
    ConfigError,
    NortError,
    NumericalError,
    ParseError,
    RangeError,
    ShapeError,
)
from .penalties import Penalty, gsvt, kappa, scalar_prox, svt
from .solvers import (
    Objective,
    SolveResult,
    SolverConfig,
    TraceRecord,
    evaluate_F,
    gdpan_solve,
    matrix_complete,
    nort_solve,
    pa_apg_solve,
    snort_solve,
)
from .splr import (
    DenseOperator,
    ModeView,
    SplrOperator,
    Workspace,
    kron_matvec,
    kron_rmatvec,
    sparse_matvec,
    sparse_rmatvec,
)
from .svd import SvdConfig, TruncatedSvd, power_svd
from .synth import SynthSpec, default_obs_count, rmse, synth_generate, test_rmse
from .tensors import (
    DenseTensor3,
    FactorPair,
    Shape3,
    SparseTensor3,
    fold_dense,
    fro_norm,
    inner,
    sparse_residual,
    unfold_dense,
    unfold_index,
)

__version__ = "0.1.0"
