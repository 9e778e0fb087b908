"""Concave singular-value penalties and their proximal maps.

The penalty acts per singular value through a scalar function kappa that is
concave, nondecreasing and L-Lipschitz on [0, inf) with kappa(0) = 0:

* ``nn``        kappa(s) = s                       (convex nuclear norm, L = 1)
* ``capped-l1`` kappa(s) = min(s, theta)           (L = 1)
* ``lsp``       kappa(s) = log(s / theta + 1)      (L = 1 / theta)
* ``tnn``       kappa_i(s) = s for index i > theta, else 0   (L = 1)

TNN is index-dependent: the integer parameter counts the leading
(unpenalized) singular values, so the scalar prox takes the 1-based sorted
position of the singular value it shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError
from .tensors import FactorPair

__all__ = ["Penalty", "kappa", "scalar_prox", "gsvt", "svt", "PENALTY_KINDS"]

PENALTY_KINDS = ("nn", "capped-l1", "lsp", "tnn")


@dataclass(frozen=True)
class Penalty:
    """A concave singular-value penalty with its Lipschitz constant."""

    kind: str
    theta: float = 1.0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ConfigError(f"unknown penalty {self.kind!r}; choose from {PENALTY_KINDS}")
        if self.kind == "tnn":
            if self.theta < 0 or self.theta != int(self.theta):
                raise ConfigError("tnn truncation parameter must be a nonnegative integer")
        elif self.kind in ("capped-l1", "lsp") and self.theta <= 0:
            raise ConfigError(f"{self.kind} requires theta > 0, got {self.theta}")

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant of kappa on [0, inf)."""
        return 1.0 / self.theta if self.kind == "lsp" else 1.0


def kappa(p: Penalty, sigma, index: int = 1):
    """Penalty value at sigma >= 0 (vectorized); ``index`` matters for tnn only."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ShapeError("kappa is defined on sigma >= 0")
    if p.kind == "nn":
        out = sigma
    elif p.kind == "capped-l1":
        out = np.minimum(sigma, p.theta)
    elif p.kind == "lsp":
        out = np.log1p(sigma / p.theta)
    else:  # tnn
        out = sigma if index > p.theta else np.zeros_like(sigma)
    return out if out.ndim else float(out)


def phi_value(p: Penalty, sigmas: np.ndarray) -> float:
    """sum_i kappa_i(sigma_i) over singular values sorted nonincreasing."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if p.kind == "tnn":
        t = int(p.theta)
        return float(np.sum(sigmas[t:]))
    return float(np.sum(kappa(p, sigmas)))


def _prox_candidates(p: Penalty, sigma: float, lam: float, index: int):
    """Closed-form candidate minimizers of 0.5*(y - sigma)^2 + lam*kappa(y)."""
    if p.kind == "nn":
        return [max(sigma - lam, 0.0)]
    if p.kind == "tnn":
        if index <= p.theta:
            return [sigma]
        return [max(sigma - lam, 0.0)]
    if p.kind == "capped-l1":
        # Piecewise: l1 branch on [0, theta], flat branch on [theta, inf).
        return [
            min(max(sigma - lam, 0.0), p.theta),
            max(sigma, p.theta),
        ]
    # lsp: stationary points solve y^2 + (theta - sigma) y + (lam - sigma*theta) = 0
    cands = [0.0]
    bq = p.theta - sigma
    cq = lam - sigma * p.theta
    disc = bq * bq - 4.0 * cq
    if disc >= 0:
        sq = np.sqrt(disc)
        for root in ((-bq + sq) / 2.0, (-bq - sq) / 2.0):
            if root > 0:
                cands.append(float(root))
    return cands


def scalar_prox(p: Penalty, sigma: float, lam: float, index: int = 1) -> float:
    """Global minimizer of 0.5*(y - sigma)^2 + lam*kappa(y) over y >= 0.

    Ties are broken toward the larger y (less shrinkage).
    """
    if sigma < 0 or lam < 0:
        raise ShapeError("scalar_prox requires sigma >= 0 and lam >= 0")
    if lam == 0.0:
        return float(sigma)
    best_y, best_obj = None, None
    for y in _prox_candidates(p, sigma, lam, index):
        obj = 0.5 * (y - sigma) ** 2 + lam * kappa(p, y, index)
        if best_obj is None or obj < best_obj - 1e-15 or (
            abs(obj - best_obj) <= 1e-15 and y > best_y
        ):
            best_y, best_obj = y, obj
    return float(best_y)


def prox_sigmas(p: Penalty, sigmas: np.ndarray, lam: float) -> np.ndarray:
    """scalar_prox applied to a sorted (nonincreasing) singular-value array."""
    return np.array(
        [scalar_prox(p, float(s), lam, index=i + 1) for i, s in enumerate(sigmas)]
    )


def gsvt(view, p: Penalty, lam: float, rank_hint: int, svd_cfg, mode: int = 1,
         warm_start=None, max_rank: int | None = None) -> FactorPair:
    """Proximal step for the singular-value penalty, in factor form.

    Computes a truncated SVD of ``view`` (anything with matmat/rmatmat),
    shrinks each singular value with :func:`scalar_prox`, and drops the zero
    tail.  If every computed value survives shrinkage and the requested rank
    is below the smaller dimension, the SVD is re-expanded (rank doubled)
    until a zero tail or full rank certifies that no component was missed.
    """
    from .svd import power_svd  # local import to avoid a module cycle

    if lam < 0:
        raise ShapeError("gsvt requires lam >= 0")
    min_dim = min(view.nrows, view.ncols)
    if max_rank is not None:
        min_dim = min(min_dim, int(max_rank))
    k = int(min(max(rank_hint, 1), min_dim))
    while True:
        res = power_svd(view, k, svd_cfg, warm_start=warm_start)
        if not res.converged:
            raise NumericalError(
                "SVD did not converge in gsvt",
                diagnostics={"rank": k, "iters": res.iters_used,
                             "residual": res.residual},
            )
        y = prox_sigmas(p, res.sigmas, lam)
        nz = int(np.count_nonzero(y))
        if nz < k or k == min_dim:
            U = res.U[:, :nz] * y[:nz]
            V = res.V[:, :nz]
            return FactorPair(mode, U, V)
        warm_start = res.V
        k = min(2 * k, min_dim)


def svt(view, lam: float, rank_hint: int, svd_cfg, mode: int = 1,
        warm_start=None) -> FactorPair:
    """Convex singular-value thresholding: y_i = max(sigma_i - lam, 0)."""
    return gsvt(view, Penalty("nn"), lam, rank_hint, svd_cfg, mode=mode,
                warm_start=warm_start)
