"""Posterior-predictive replication and counterfactual forecasting."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError, ValidationError
from .gibbs import McmcDraws
from .statespace import StateSpaceSystem


def _batched_chol(A: np.ndarray) -> np.ndarray:
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(A)
        return V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]


def _covariates(draws: McmcDraws, covariates, n: int) -> np.ndarray:
    P = draws.beta.shape[1]
    if P == 0:
        return np.zeros((n, 0))
    if covariates is None:
        if np.any(draws.rho):
            raise ValidationError("covariates are required for selected regressors")
        return np.zeros((n, P))
    X = np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape != (n, P):
        raise DimensionError(f"covariates must be {n} x {P}, got {X.shape}")
    return X


def replicate_insample(draws: McmcDraws, covariates=None, rng=None) -> np.ndarray:
    """One replicated pre-period series per draw, shape (S, t_star, d).

    Uses each draw's own state path, coefficients and observation covariance.
    """
    if draws.n_draws == 0:
        raise ValidationError("no posterior draws")
    if draws.states.shape[1] != draws.t_star:
        raise ValidationError("replication needs full state paths (store_states='all')")
    rng = np.random.default_rng(rng)
    S, n, m, d = draws.states.shape
    X = _covariates(draws, covariates, n)
    Z = draws.system.Z
    if Z.ndim == 3:
        signal = np.einsum("tm,stmd->std", Z[:n, 0], draws.states)
    else:
        signal = np.einsum("m,stmd->std", Z[0], draws.states)
    signal = signal + np.einsum("tp,spd->std", X, draws.beta)
    L = _batched_chol(draws.sigma_eps)
    noise = np.einsum("sij,stj->sti", L, rng.standard_normal((S, n, d)))
    return signal + noise


def forecast_counterfactual(draws: McmcDraws, covariates_future=None, k: int = 1,
                            rng=None) -> np.ndarray:
    """Out-of-sample predictive paths for ``k`` steps after the fit period.

    Each draw's final state is propagated through the state equation with
    fresh disturbances; returns an array of shape (S, k, d).
    """
    if k < 1:
        raise ValidationError("forecast horizon must be >= 1")
    if draws.n_draws == 0:
        raise ValidationError("no posterior draws")
    system = draws.system
    if system.time_varying:
        raise ValidationError("forecasting needs a time-invariant system")
    rng = np.random.default_rng(rng)
    X = _covariates(draws, covariates_future, k)
    S = draws.n_draws
    d, r = system.d, system.r
    Z, T, R = system.Z[0], system.T, system.R
    L_eps = _batched_chol(draws.sigma_eps)
    L_eta = _batched_chol(draws.sigma_r)
    xb = np.einsum("tp,spd->std", X, draws.beta)
    alpha = draws.last_state.copy()
    out = np.empty((S, k, d))
    for j in range(k):
        eta = np.einsum("srij,srj->sri", L_eta, rng.standard_normal((S, r, d)))
        alpha = np.einsum("ij,sjd->sid", T, alpha) + np.einsum("ir,srd->sid", R, eta)
        eps = np.einsum("sij,sj->si", L_eps, rng.standard_normal((S, d)))
        out[:, j] = Z @ alpha + xb[:, j] + eps
    return out


def analytic_forecast_error(system: StateSpaceSystem, k: int, P_start=None):
    """Forecast-error covariances for fixed parameters.

    ``P_start`` is the covariance of the vectorised state one step after the
    fit period (e.g. ``FilterOutput.P_next``); it defaults to the system's
    initial covariance.  Returns ``(pointwise, cumulative)``, each of shape
    (k, d, d): the covariance of the j-step error and of the sum of the
    first j errors.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if system.time_varying:
        raise ValidationError("analytic forecast errors need a time-invariant system")
    vs = system.vectorized()
    Z, T, RQR = vs["Z"][0], vs["T"][0], vs["RQR"][0]
    H = system.sigma_eps
    P = vs["P1"] if P_start is None else np.asarray(P_start, dtype=float)
    if P.shape != T.shape:
        raise DimensionError(f"P_start must be {T.shape}")
    d = system.d
    pointwise = np.empty((k, d, d))
    Pj = P
    for j in range(k):
        pointwise[j] = Z @ Pj @ Z.T + H
        Pj = T @ Pj @ T.T + RQR

    # ZT[i] = Z T^i
    ZT = [Z]
    for _ in range(k - 1):
        ZT.append(ZT[-1] @ T)
    cumulative = np.empty((k, d, d))
    for K in range(1, k + 1):
        # D_j = sum_{i=j}^{K} Z T^{i-j}, j = 1..K; D_K = Z and D_j = Z + D_{j+1} T
        D = [None] * (K + 1)
        D[K] = Z
        for j in range(K - 1, 0, -1):
            D[j] = Z + D[j + 1] @ T
        V = D[1] @ P @ D[1].T + K * H
        for j in range(2, K + 1):
            V = V + D[j] @ RQR @ D[j].T
        cumulative[K - 1] = 0.5 * (V + V.T)
    return pointwise, cumulative
