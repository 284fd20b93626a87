"""Declarative structural components and system assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ValidationError
from .statespace import StateSpaceSystem, psd_sqrt

DEFAULT_KAPPA = 1e6


@dataclass(frozen=True)
class LocalLevelTrend:
    c_scale: float = 1.0

    name = "trend"

    def __post_init__(self):
        if self.c_scale < 0:
            raise ValidationError("c_scale must be nonnegative")


@dataclass(frozen=True)
class Seasonal:
    period: int = 7
    c_scale: float = 1.0

    name = "seasonal"

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 2:
            raise ValidationError("seasonal period must be an integer >= 2")
        if self.c_scale < 0:
            raise ValidationError("c_scale must be nonnegative")


@dataclass(frozen=True)
class Regression:
    n_covariates: int
    selection: str = "spike-and-slab"

    name = "regression"

    def __post_init__(self):
        if self.n_covariates < 0:
            raise ValidationError("n_covariates must be nonnegative")
        if self.selection not in ("spike-and-slab", "fixed"):
            raise ValidationError(f"unknown selection mode {self.selection!r}")


ComponentSpec = LocalLevelTrend | Seasonal | Regression


def state_components(specs) -> list:
    return [s for s in specs if isinstance(s, (LocalLevelTrend, Seasonal))]


def regression_spec(specs) -> Regression | None:
    regs = [s for s in specs if isinstance(s, Regression)]
    if len(regs) > 1:
        raise ValidationError("at most one regression component is allowed")
    return regs[0] if regs else None


def seasonal_period(specs) -> int | None:
    periods = [s.period for s in specs if isinstance(s, Seasonal)]
    return max(periods) if periods else None


def assemble_system(specs, d: int, Sigma=None, H: float = 1.0,
                    kappa: float = DEFAULT_KAPPA) -> StateSpaceSystem:
    """Stack trend and seasonal blocks into one system.

    Regression components are validated but contribute no state rows; the
    coefficients enter the observation equation directly.  The initial state
    is diffuse: ``a1 = 0`` and ``P1 = kappa * I``.
    """
    specs = list(specs)
    if not specs:
        raise ValidationError("empty component list")
    blocks = state_components(specs)
    if not blocks:
        raise ValidationError("a model needs a trend or seasonal component; "
                              "regression alone is not a state-space model")
    regression_spec(specs)
    Sigma = np.eye(d) if Sigma is None else np.atleast_2d(np.asarray(Sigma, dtype=float))
    if Sigma.shape != (d, d):
        raise DimensionError(f"Sigma must be {d}x{d}")
    if not np.allclose(Sigma, Sigma.T) or np.linalg.eigvalsh(Sigma).min() <= 0:
        raise ValidationError("Sigma must be symmetric positive definite")

    sizes = [1 if isinstance(b, LocalLevelTrend) else b.period - 1 for b in blocks]
    m = sum(sizes)
    r = len(blocks)
    Z = np.zeros((1, m))
    T = np.zeros((m, m))
    R = np.zeros((m, r))
    C = np.zeros(r)
    layout = {}
    start = 0
    for j, (block, size) in enumerate(zip(blocks, sizes)):
        sl = slice(start, start + size)
        key = block.name
        if key in layout:
            key = f"{key}_{j}"
        layout[key] = (start, start + size)
        Z[0, start] = 1.0
        if isinstance(block, LocalLevelTrend):
            T[start, start] = 1.0
        else:
            T[start, sl] = -1.0
            T[start + 1:start + size, start:start + size - 1] = np.eye(size - 1)
        R[start, j] = 1.0
        C[j] = block.c_scale
        start += size
    return StateSpaceSystem(Z=Z, T=T, R=R, H=H, C=C, Sigma=Sigma, a1=np.zeros((m, d)),
                            P1=kappa * np.eye(m), block_layout=layout)


def simulate_from_system(system: StateSpaceSystem, n: int, beta=None, covariates=None,
                         rng=None):
    """Draw ``(y, alpha)`` of length ``n`` from the generative model.

    ``beta`` is P x d and ``covariates`` n x P; both may be omitted when
    there is no regression.  ``alpha_1`` is drawn from ``MN(a1, P1, Sigma)``.
    """
    rng = np.random.default_rng(rng)
    d, m, r = system.d, system.m, system.r
    if covariates is None or np.size(covariates) == 0:
        if beta is not None and np.size(beta) > 0:
            raise DimensionError("beta given without covariates")
        xb = np.zeros((n, d))
    else:
        X = np.asarray(covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        beta = np.asarray(beta, dtype=float).reshape(X.shape[1], -1)
        if X.shape[0] != n or beta.shape[1] != d:
            raise DimensionError(f"covariates must be {n} x P and beta P x {d}")
        xb = X @ beta

    eps_chol = psd_sqrt(system.sigma_eps)
    eta_chol = np.stack([psd_sqrt(S) for S in system.sigma_r])
    row_chol = psd_sqrt(system.P1)
    col_chol = psd_sqrt(system.Sigma)

    alpha = np.empty((n, m, d))
    alpha[0] = system.a1 + row_chol @ rng.standard_normal((m, d)) @ col_chol.T
    eps = rng.standard_normal((n, d)) @ eps_chol.T
    eta = np.einsum("rij,trj->tri", eta_chol, rng.standard_normal((n, r, d)))
    y = np.empty((n, d))
    for t in range(n):
        Z, T, R = system.at(t)
        y[t] = Z @ alpha[t]
        if t + 1 < n:
            alpha[t + 1] = T @ alpha[t] + R @ eta[t]
    y = y + xb + eps
    return y, alpha
