"""Gibbs sampler for the multivariate structural time-series model.

Each sweep draws, in order: the state path (simulation smoother), every
state-disturbance covariance, the regressor selection vector, the
observation covariance, and the selected regression coefficients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .components import (DEFAULT_KAPPA, assemble_system, regression_spec, seasonal_period)
from .exceptions import ValidationError
from .priors import (PriorConfig, full_conditional_beta, full_conditional_sigma_eps,
                     full_conditional_sigma_r, update_selection_vector)
from .statespace import SimulationSmoother, StateSpaceSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MCMCConfig:
    """``niter`` retained draws after ``burn_in`` discarded sweeps.

    ``burn_in=None`` means ``max(100, niter // 10)``.  ``store_states`` is
    ``"all"`` (full state paths) or ``"last"`` (only the final state, enough
    for forecasting).
    """

    niter: int = 1000
    burn_in: int | None = None
    seed: int = 0
    store_states: str = "all"
    kappa: float = DEFAULT_KAPPA
    steady_state_tol: float = 1e-10

    def __post_init__(self):
        if int(self.niter) < 1:
            raise ValidationError("niter must be >= 1")
        if self.burn_in is not None and int(self.burn_in) < 0:
            raise ValidationError("burn_in must be >= 0")
        if self.store_states not in ("all", "last"):
            raise ValidationError("store_states must be 'all' or 'last'")

    @property
    def n_burn(self) -> int:
        return max(100, self.niter // 10) if self.burn_in is None else int(self.burn_in)


@dataclass
class McmcDraws:
    """Retained posterior draws.

    Shapes: ``states`` (S, n_s, m, d) with ``n_s`` either ``t_star`` or 1;
    ``beta`` (S, P, d); ``rho`` (S, P); ``sigma_eps`` (S, d, d); ``sigma_r``
    (S, r, d, d).
    """

    states: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    sigma_eps: np.ndarray
    sigma_r: np.ndarray
    system: StateSpaceSystem
    t_star: int
    seed: int
    burn_in: int
    specs: list = field(default_factory=list)

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    @property
    def last_state(self) -> np.ndarray:
        return self.states[:, -1]

    @property
    def inclusion_probabilities(self) -> np.ndarray:
        return self.rho.mean(axis=0)

    def system_at(self, s: int) -> StateSpaceSystem:
        return self.system.with_covariances(self.sigma_eps[s], self.sigma_r[s],
                                            Sigma=self.sigma_eps[s])


def _signal(system: StateSpaceSystem, alpha: np.ndarray) -> np.ndarray:
    if system.Z.ndim == 3:
        return np.einsum("tm,tmd->td", system.Z[:alpha.shape[0], 0], alpha)
    return np.einsum("m,tmd->td", system.Z[0], alpha)


def _disturbances(system: StateSpaceSystem, alpha: np.ndarray, R_pinv: np.ndarray) -> np.ndarray:
    """eta_t for t = 1..n-1, shape (n-1, r, d)."""
    if system.T.ndim == 3 or system.R.ndim == 3:
        from .statespace import state_disturbances
        return state_disturbances(system, alpha)
    diff = alpha[1:] - np.einsum("ij,tjd->tid", system.T, alpha[:-1])
    return np.einsum("ri,tid->trd", R_pinv, diff)


def run_gibbs(panel, specs, prior: PriorConfig, mcmc: MCMCConfig | None = None) -> McmcDraws:
    """Sample the joint posterior of states and parameters on the pre-period."""
    mcmc = mcmc or MCMCConfig()
    specs = list(specs)
    Y = np.asarray(panel.Y_pre, dtype=float)
    X = np.asarray(panel.X_pre, dtype=float)
    t_star, d = Y.shape
    S = seasonal_period(specs)
    if S is not None and t_star < S + 2:
        raise ValidationError(f"pre-period of {t_star} points is too short for period {S}")
    if t_star < 3:
        raise ValidationError("pre-period too short")
    if prior.d != d:
        raise ValidationError(f"prior is for d={prior.d}, panel has d={d}")
    reg = regression_spec(specs)
    P = X.shape[1]
    if reg is None:
        X = np.zeros((t_star, 0))
        P = 0
    elif reg.n_covariates != P:
        raise ValidationError(f"regression spec expects {reg.n_covariates} covariates, panel has {P}")
    select = reg is not None and reg.selection == "spike-and-slab" and P > 0

    template = assemble_system(specs, d, np.eye(d), 1.0, kappa=mcmc.kappa)
    r, m = template.r, template.m
    R_pinv = np.linalg.pinv(template.R) if template.R.ndim == 2 else None
    rng = np.random.default_rng(mcmc.seed)

    scale = max(prior.nu_eps - d - 1, 1.0)
    sigma_eps = prior.S_eps / scale
    sigma_r = np.stack([prior.S_r / max(prior.nu_r - d - 1, 1.0)] * r)
    beta = np.zeros((P, d))
    rho = np.ones(P, dtype=bool)

    n_burn = mcmc.n_burn
    niter = int(mcmc.niter)
    n_keep_states = t_star if mcmc.store_states == "all" else 1
    out_states = np.empty((niter, n_keep_states, m, d))
    out_beta = np.zeros((niter, P, d))
    out_rho = np.zeros((niter, P), dtype=bool)
    out_se = np.empty((niter, d, d))
    out_sr = np.empty((niter, r, d, d))

    for it in range(n_burn + niter):
        system = template.with_covariances(sigma_eps, sigma_r, Sigma=sigma_eps)
        smoother = SimulationSmoother(system, t_star, steady_state_tol=mcmc.steady_state_tol)
        alpha = smoother.draw(Y, rng, x_beta=X @ beta)

        eta = _disturbances(template, alpha, R_pinv)
        for j in range(r):
            sigma_r[j] = full_conditional_sigma_r(eta[:, j, :], prior).sample(rng)

        y_tilde = Y - _signal(template, alpha)
        if select:
            rho = update_selection_vector(y_tilde, X, prior, rho, rng)
        X_sel = X[:, rho]
        sigma_eps = full_conditional_sigma_eps(y_tilde, X_sel, prior).sample(rng)
        beta = np.zeros((P, d))
        if rho.any():
            beta[rho] = full_conditional_beta(y_tilde, X_sel, sigma_eps, prior).sample(rng)

        k = it - n_burn
        if k >= 0:
            out_states[k] = alpha[-n_keep_states:]
            out_beta[k] = beta
            out_rho[k] = rho
            out_se[k] = sigma_eps
            out_sr[k] = sigma_r
        if (it + 1) % 500 == 0:
            logger.debug("gibbs sweep %d / %d", it + 1, n_burn + niter)

    return McmcDraws(states=out_states, beta=out_beta, rho=out_rho, sigma_eps=out_se,
                     sigma_r=out_sr, system=template, t_star=t_star, seed=mcmc.seed,
                     burn_in=n_burn, specs=specs)
