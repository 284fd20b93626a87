"""Priors and conjugate full conditionals for the Gibbs sampler.

Regression coefficients use a spike-and-slab prior: a Bernoulli selection
vector ``rho`` picks rows of ``beta``; selected rows get a matrix-normal slab
``MN(0, H_rho, Sigma_eps)`` with the Zellner form ``H_rho = g (X'X)^-1``.
Both covariance matrices get inverse-Wishart priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import expit, multigammaln

from .exceptions import DimensionError, NumericalError, ValidationError


COEF_COV_MODES = ("zellner", "gram")


@dataclass(frozen=True)
class PriorConfig:
    """Conjugate prior hyperparameters.

    ``coef_cov`` sets the row covariance ``H`` of the selected coefficients:
    ``"zellner"`` gives ``g (X'X)^-1``, ``"gram"`` gives ``g X'X`` and a
    positive number ``c`` gives ``c I``.
    """

    nu_eps: float
    nu_r: float
    S_eps: np.ndarray
    S_r: np.ndarray
    pi: float = 0.5
    g: float = 1.0
    coef_cov: str | float = "zellner"

    def __post_init__(self):
        S_eps = np.atleast_2d(np.asarray(self.S_eps, dtype=float))
        S_r = np.atleast_2d(np.asarray(self.S_r, dtype=float))
        d = S_eps.shape[0]
        if S_r.shape != (d, d) or S_eps.shape != (d, d):
            raise DimensionError("S_eps and S_r must both be d x d")
        for name, S in (("S_eps", S_eps), ("S_r", S_r)):
            if not np.allclose(S, S.T) or np.linalg.eigvalsh(S).min() <= 0:
                raise ValidationError(f"{name} must be symmetric positive definite")
        if self.nu_eps < d or self.nu_r < d:
            raise ValidationError(f"degrees of freedom must be >= d={d}")
        if not 0 < self.pi < 1:
            raise ValidationError("pi must lie in (0, 1)")
        if self.g <= 0:
            raise ValidationError("g must be positive")
        if isinstance(self.coef_cov, str):
            if self.coef_cov not in COEF_COV_MODES:
                raise ValidationError(f"coef_cov must be one of {COEF_COV_MODES} or a positive number")
        elif not float(self.coef_cov) > 0:
            raise ValidationError("a numeric coef_cov must be positive")
        object.__setattr__(self, "S_eps", S_eps)
        object.__setattr__(self, "S_r", S_r)

    @property
    def d(self) -> int:
        return self.S_eps.shape[0]


def prior_scale_matrix(sample_sd, rho: float, h: float = 1.0, k: float = 1.0) -> np.ndarray:
    """Scale matrix with variances ``(h s1^2, k s2^2, ...)`` and common correlation ``rho``.

    The first series is scaled by ``h`` and every other series by ``k``.
    """
    s = np.atleast_1d(np.asarray(sample_sd, dtype=float))
    if not -1 < rho < 1:
        raise ValidationError("rho must lie in (-1, 1)")
    if h <= 0 or k <= 0:
        raise ValidationError("h and k must be positive")
    if not np.all(np.isfinite(s) & (s > 0)):
        raise ValidationError("sample standard deviations must be positive (constant series?)")
    d = s.size
    w = np.full(d, float(k))
    w[0] = h
    scaled = np.sqrt(w) * s
    corr = np.full((d, d), float(rho))
    np.fill_diagonal(corr, 1.0)
    S = np.outer(scaled, scaled) * corr
    if np.linalg.eigvalsh(S).min() <= 0:
        raise ValidationError(f"rho={rho} gives a non positive definite scale for d={d}")
    return S


def default_priors(panel, rho_prior: float = 0.0, h: float = 1.0, k: float = 1.0,
                   pi: float = 0.5, g: float | str = 1.0, sr_multiplier: float = 1.0,
                   coef_cov: str | float = "zellner") -> PriorConfig:
    """Data-based default priors from the pre-intervention sample variances.

    ``nu = d + 2`` (smallest integer with a finite prior mean) for both
    inverse-Wishart priors and ``S_r = sr_multiplier * S_eps``.  ``g="unit"``
    sets ``g`` to the pre-period length (unit-information prior).
    """
    Y = panel.Y_pre if hasattr(panel, "Y_pre") else np.asarray(panel, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    if Y.shape[0] < 3:
        raise ValidationError("need at least 3 pre-intervention observations")
    if sr_multiplier <= 0:
        raise ValidationError("sr_multiplier must be positive")
    if isinstance(g, str):
        if g != "unit":
            raise ValidationError(f"g must be a positive number or 'unit', got {g!r}")
        g = float(Y.shape[0])
    d = Y.shape[1]
    S = prior_scale_matrix(Y.std(axis=0, ddof=1), rho_prior, h, k)
    return PriorConfig(nu_eps=d + 2, nu_r=d + 2, S_eps=S, S_r=sr_multiplier * S, pi=pi, g=g,
                       coef_cov=coef_cov)


# distributions -------------------------------------------------------------


@dataclass(frozen=True)
class MatrixNormalParams:
    M: np.ndarray
    W: np.ndarray
    Sigma: np.ndarray

    def sample(self, rng) -> np.ndarray:
        Lw = np.linalg.cholesky(self.W)
        Ls = np.linalg.cholesky(self.Sigma)
        return self.M + Lw @ rng.standard_normal(self.M.shape) @ Ls.T


@dataclass(frozen=True)
class InverseWishartParams:
    df: float
    scale: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        d = self.scale.shape[0]
        if self.df <= d + 1:
            raise ValueError("inverse-Wishart mean requires df > d + 1")
        return self.scale / (self.df - d - 1)

    def sample(self, rng) -> np.ndarray:
        d = self.scale.shape[0]
        draw = stats.invwishart.rvs(df=self.df, scale=self.scale, random_state=rng)
        return np.asarray(draw, dtype=float).reshape(d, d)


def _as_2d(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionError(f"{name} must be a matrix")
    return A


def _posterior_terms(y_tilde, X_sel, prior: PriorConfig):
    """(W, M, SS, logdet_H) for the selected regressors; M is None if none selected."""
    Y = _as_2d(y_tilde, "y_tilde")
    if Y.shape[0] == 0:
        raise ValidationError("empty pre-intervention period")
    if Y.shape[1] != prior.d:
        raise DimensionError(f"y_tilde has {Y.shape[1]} series, prior has {prior.d}")
    YtY = Y.T @ Y
    if X_sel is None or np.size(X_sel) == 0:
        return None, None, prior.S_eps + YtY, 0.0
    X = _as_2d(X_sel, "X_sel")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError("X_sel and y_tilde must have the same number of rows")
    XtX = X.T @ X
    try:
        cf = np.linalg.cholesky(XtX)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("selected regressors are collinear (X'X singular)") from exc
    p = X.shape[1]
    logdet_XtX = 2 * np.sum(np.log(np.diag(cf)))
    if isinstance(prior.coef_cov, str) and prior.coef_cov == "zellner":
        H_inv = XtX / prior.g
        logdet_H = p * np.log(prior.g) - logdet_XtX
    elif isinstance(prior.coef_cov, str):
        H_inv = np.linalg.inv(XtX) / prior.g
        logdet_H = p * np.log(prior.g) + logdet_XtX
    else:
        c = float(prior.coef_cov)
        H_inv = np.eye(p) / c
        logdet_H = p * np.log(c)
    prec = XtX + H_inv
    prec = 0.5 * (prec + prec.T)
    try:
        np.linalg.cholesky(prec)  # positive-definiteness check
    except np.linalg.LinAlgError as exc:
        raise NumericalError("X'X + H^-1 is singular") from exc
    W = np.linalg.inv(prec)
    W = 0.5 * (W + W.T)
    XtY = X.T @ Y
    M = W @ XtY
    SS = prior.S_eps + YtY - M.T @ prec @ M
    SS = 0.5 * (SS + SS.T)
    return W, M, SS, logdet_H


def full_conditional_beta(y_tilde, X_sel, sigma_eps, prior: PriorConfig) -> MatrixNormalParams:
    """Matrix-normal full conditional of the selected coefficient rows."""
    if X_sel is None or np.size(X_sel) == 0:
        raise ValidationError("no regressors selected")
    W, M, _, _ = _posterior_terms(y_tilde, X_sel, prior)
    return MatrixNormalParams(M=M, W=W, Sigma=np.atleast_2d(np.asarray(sigma_eps, dtype=float)))


def full_conditional_sigma_eps(y_tilde, X_sel, prior: PriorConfig) -> InverseWishartParams:
    """Inverse-Wishart full conditional of the observation covariance (beta integrated out)."""
    _, _, SS, _ = _posterior_terms(y_tilde, X_sel, prior)
    n = _as_2d(y_tilde, "y_tilde").shape[0]
    if np.linalg.eigvalsh(SS).min() <= 0:
        raise NumericalError("posterior scale matrix is not positive definite")
    return InverseWishartParams(df=prior.nu_eps + n, scale=SS)


def full_conditional_sigma_r(eta_r, prior: PriorConfig) -> InverseWishartParams:
    """Inverse-Wishart full conditional of one state-disturbance covariance."""
    eta = _as_2d(eta_r, "eta_r")
    if eta.shape[0] == 0:
        raise ValidationError("no disturbances supplied")
    if eta.shape[1] != prior.d:
        raise DimensionError(f"eta has {eta.shape[1]} series, prior has {prior.d}")
    SS = prior.S_r + eta.T @ eta
    return InverseWishartParams(df=prior.nu_r + eta.shape[0], scale=0.5 * (SS + SS.T))


def log_marginal_likelihood(y_tilde, X_sel, prior: PriorConfig) -> float:
    """log Pr(y_tilde | rho) with beta and Sigma_eps integrated out."""
    Y = _as_2d(y_tilde, "y_tilde")
    n, d = Y.shape
    W, _, SS, logdet_H = _posterior_terms(Y, X_sel, prior)
    nu = prior.nu_eps
    _, logdet_S = np.linalg.slogdet(prior.S_eps)
    sign, logdet_SS = np.linalg.slogdet(SS)
    if sign <= 0:
        raise NumericalError("posterior scale matrix is not positive definite")
    out = (-0.5 * n * d * np.log(np.pi) + 0.5 * nu * logdet_S - 0.5 * (nu + n) * logdet_SS
           + multigammaln(0.5 * (nu + n), d) - multigammaln(0.5 * nu, d))
    if W is not None:
        _, logdet_W = np.linalg.slogdet(W)
        out += -0.5 * d * logdet_H + 0.5 * d * logdet_W
    if not np.isfinite(out):
        raise NumericalError("marginal likelihood is not finite")
    return float(out)


def inclusion_probability(y_tilde, X_full, rho, p: int, prior: PriorConfig) -> float:
    """Pr(rho_p = 1 | y_tilde, rho_-p) from the log odds."""
    X_full = _as_2d(X_full, "X_full")
    on = np.asarray(rho, dtype=bool).copy()
    on[p] = True
    off = on.copy()
    off[p] = False
    log_odds = (np.log(prior.pi) - np.log1p(-prior.pi)
                + log_marginal_likelihood(y_tilde, X_full[:, on], prior)
                - log_marginal_likelihood(y_tilde, X_full[:, off], prior))
    return float(expit(log_odds))


def update_selection_vector(y_tilde, X_full, prior: PriorConfig, rho_current, rng) -> np.ndarray:
    """One sweep over the selection vector in ascending index order."""
    rho = np.asarray(rho_current, dtype=bool).copy()
    if rho.size == 0:
        return rho
    X_full = _as_2d(X_full, "X_full")
    if X_full.shape[1] != rho.size:
        raise DimensionError("selection vector length differs from covariate count")
    for p in range(rho.size):
        prob = inclusion_probability(y_tilde, X_full, rho, p, prior)
        rho[p] = rng.random() < prob
    return rho
