"""Truncated SVD of an abstract linear operator via block power iteration.

The operator only needs ``nrows``, ``ncols`` and matmat/rmatmat; this is the
single SVD path used on implicit sparse-plus-low-rank mode views, where
matrix products dominate the cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = ["SvdConfig", "TruncatedSvd", "power_svd"]


@dataclass(frozen=True)
class SvdConfig:
    """Tuning knobs for :func:`power_svd`.

    The tolerance and growth defaults are engineering choices (the subspace
    tolerance is relative to sigma_1).
    """

    max_power_iters: int = 100
    tol: float = 1e-4
    max_restarts: int = 3
    seed: int = 0
    oversampling: int = 5

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError("svd tol must be positive")
        if self.max_power_iters < 1:
            raise ConfigError("max_power_iters must be >= 1")


@dataclass
class TruncatedSvd:
    U: np.ndarray
    sigmas: np.ndarray
    V: np.ndarray
    converged: bool
    iters_used: int
    residual: float = field(default=np.nan)


def _init_basis(ncols: int, b: int, rng: np.random.Generator, warm_start):
    G = rng.standard_normal((ncols, b))
    if warm_start is not None:
        W = np.asarray(warm_start, dtype=np.float64)
        if W.ndim == 1:
            W = W[:, None]
        take = min(W.shape[1], b)
        if W.shape[0] == ncols and take > 0:
            G[:, :take] = W[:, :take]
    Q, _ = np.linalg.qr(G)
    return Q


def power_svd(view, k: int, cfg: SvdConfig, warm_start=None) -> TruncatedSvd:
    """Top-``k`` singular triplets of ``view`` by block subspace iteration.

    Each step applies the operator to an oversampled block, re-orthogonalizes
    with QR, and reads singular values off a small projected SVD.  Converged
    means max_i ||Z v_i - sigma_i u_i|| <= tol * sigma_1 over the leading k
    triplets; otherwise the best iterate is returned with converged=False.
    ``warm_start`` seeds the right subspace (e.g. V from a previous call).
    """
    n, m = view.nrows, view.ncols
    if not 1 <= k <= min(n, m):
        raise ConfigError(f"k must be in [1, {min(n, m)}], got {k}")
    b = min(k + cfg.oversampling, min(n, m))
    rng = np.random.default_rng(cfg.seed)

    def _residual(U, s, V):
        AV = view.matmat(V)
        resid = float(np.max(np.linalg.norm(AV - U * s, axis=0))) if s.size else 0.0
        sigma1 = float(s[0]) if s.size else 0.0
        return resid, (sigma1 == 0.0 or resid <= cfg.tol * sigma1)

    best = None
    for restart in range(cfg.max_restarts + 1):
        Q = _init_basis(m, b, rng, warm_start if restart == 0 else None)
        sig_prev = None
        U = V = s = None
        for it in range(cfg.max_power_iters):
            Z = view.matmat(Q)          # (n, b)
            Qu, _ = np.linalg.qr(Z)
            Y = view.rmatmat(Qu)        # (m, b) = (Qu^T A)^T
            Vb, s, W_t = np.linalg.svd(Y, full_matrices=False)
            U, V = Qu @ W_t.T, Vb
            Q, _ = np.linalg.qr(V)
            stagnated = sig_prev is not None and np.max(
                np.abs(s[:k] - sig_prev[:k])
            ) <= 0.1 * cfg.tol * max(s[0], 1e-300)
            sig_prev = s.copy()
            if stagnated or it == cfg.max_power_iters - 1:
                resid, ok = _residual(U[:, :k], s[:k], V[:, :k])
                cand = TruncatedSvd(U[:, :k], s[:k], V[:, :k], ok, it + 1, resid)
                if ok:
                    return cand
                if best is None or cand.residual < best.residual:
                    best = cand
                if stagnated and it < cfg.max_power_iters - 1:
                    continue
    return best
