"""Linear-Gaussian state-space machinery for the matrix-normal model.

The model for a ``d``-variate series is::

    y_t       = Z_t alpha_t + x_t beta + eps_t,     eps_t ~ N(0, Sigma_eps)
    alpha_t+1 = T_t alpha_t + R_t eta_t,            eta_t ~ N(0, diag-block Sigma_r)
    alpha_1   ~ MN(a1, P1, Sigma)

with ``alpha_t`` an ``m x d`` matrix.  Internally the recursions run on the
row-major vectorisation of ``alpha_t`` (length ``m * d``), which lets the
observation and state disturbances carry unrelated ``d x d`` covariances as
the Gibbs sampler requires.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba.core.errors import NumbaError

from . import _kernels
from .exceptions import DimensionError, NumericalError, ValidationError

ORACLE_MAX_SIZE = 512


@dataclass(frozen=True)
class StateSpaceSystem:
    """System matrices of the multivariate structural model.

    ``Z``, ``T`` and ``R`` may carry a leading time axis for time-varying
    systems.  ``C`` holds the diagonal of the state disturbance scales, so
    that by default ``Sigma_eps = H * Sigma`` and ``Sigma_r = C[r] * Sigma``.
    ``obs_cov`` and ``state_covs`` override those products with free
    matrices (this is how posterior draws are plugged in).
    """

    Z: np.ndarray
    T: np.ndarray
    R: np.ndarray
    H: float
    C: np.ndarray
    Sigma: np.ndarray
    a1: np.ndarray
    P1: np.ndarray
    block_layout: dict = field(default_factory=dict)
    obs_cov: np.ndarray | None = None
    state_covs: np.ndarray | None = None

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        C = np.atleast_1d(np.asarray(self.C, dtype=float))
        if C.ndim == 2:
            if not np.allclose(C, np.diag(np.diag(C))):
                raise ValidationError("C must be diagonal")
            C = np.diag(C).copy()
        m = Z.shape[-1]
        d = Sigma.shape[0]
        a1 = np.asarray(self.a1, dtype=float).reshape(m, d) if np.size(self.a1) == m * d else None
        if a1 is None:
            raise DimensionError(f"a1 must have {m}x{d} entries, got shape {np.shape(self.a1)}")
        P1 = np.atleast_2d(np.asarray(self.P1, dtype=float))

        if Z.shape[-2] != 1:
            raise DimensionError(f"Z must be 1 x m, got {Z.shape}")
        if T.shape[-2:] != (m, m):
            raise DimensionError(f"T must be {m}x{m}, got {T.shape}")
        if R.shape[-2] != m:
            raise DimensionError(f"R must have {m} rows, got {R.shape}")
        r = R.shape[-1]
        if C.shape != (r,):
            raise DimensionError(f"C must hold {r} diagonal entries, got {C.shape}")
        if np.any(C < 0):
            raise ValidationError("C entries must be nonnegative")
        if Sigma.shape != (d, d):
            raise DimensionError("Sigma must be square")
        if P1.shape != (m, m):
            raise DimensionError(f"P1 must be {m}x{m}, got {P1.shape}")
        if not np.allclose(Sigma, Sigma.T):
            raise ValidationError("Sigma must be symmetric")
        if not np.allclose(P1, P1.T):
            raise ValidationError("P1 must be symmetric")

        obs_cov = self.obs_cov
        if obs_cov is not None:
            obs_cov = np.atleast_2d(np.asarray(obs_cov, dtype=float))
            if obs_cov.shape != (d, d):
                raise DimensionError("obs_cov must be d x d")
        state_covs = self.state_covs
        if state_covs is not None:
            state_covs = np.asarray(state_covs, dtype=float).reshape(-1, d, d)
            if state_covs.shape[0] != r:
                raise DimensionError(f"state_covs must hold {r} matrices")

        for name, value in (("Z", Z), ("T", T), ("R", R), ("Sigma", Sigma), ("C", C),
                            ("a1", a1), ("P1", P1), ("obs_cov", obs_cov),
                            ("state_covs", state_covs)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "H", float(self.H))

    @property
    def m(self) -> int:
        return self.Z.shape[-1]

    @property
    def d(self) -> int:
        return self.Sigma.shape[0]

    @property
    def r(self) -> int:
        return self.R.shape[-1]

    @property
    def time_varying(self) -> bool:
        return self.Z.ndim == 3 or self.T.ndim == 3 or self.R.ndim == 3

    @property
    def sigma_eps(self) -> np.ndarray:
        if self.obs_cov is not None:
            return self.obs_cov
        return self.H * self.Sigma

    @property
    def sigma_r(self) -> np.ndarray:
        """Disturbance covariances, shape (r, d, d)."""
        if self.state_covs is not None:
            return self.state_covs
        return self.C[:, None, None] * self.Sigma[None]

    def with_covariances(self, sigma_eps, sigma_r, Sigma=None) -> StateSpaceSystem:
        return replace(self, obs_cov=np.asarray(sigma_eps, dtype=float),
                       state_covs=np.asarray(sigma_r, dtype=float),
                       Sigma=self.Sigma if Sigma is None else Sigma)

    def at(self, t: int):
        """(Z, T, R) at time index ``t``."""
        Z = self.Z[t] if self.Z.ndim == 3 else self.Z
        T = self.T[t] if self.T.ndim == 3 else self.T
        R = self.R[t] if self.R.ndim == 3 else self.R
        return Z, T, R

    # vectorised matrices -------------------------------------------------

    def vectorized(self, n: int | None = None) -> dict:
        """Kronecker-expanded system arrays with a leading time axis."""
        d = self.d
        I = np.eye(d)

        def expand(A):
            A = A if A.ndim == 3 else A[None]
            if n is not None and A.shape[0] not in (1, n):
                raise DimensionError(f"time-varying matrix has {A.shape[0]} steps, expected {n}")
            return np.ascontiguousarray(np.stack([np.kron(a, I) for a in A]))

        Zv = expand(self.Z)
        Tv = expand(self.T)
        Rv = expand(self.R)
        sr = self.sigma_r
        r = self.r
        Q = np.zeros((r * d, r * d))
        for i in range(r):
            Q[i * d:(i + 1) * d, i * d:(i + 1) * d] = sr[i]
        RQR = np.ascontiguousarray(np.stack([Rk @ Q @ Rk.T for Rk in Rv]))
        H = np.ascontiguousarray(self.sigma_eps[None])
        P1 = np.kron(self.P1, self.Sigma)
        return {"Z": Zv, "T": Tv, "R": Rv, "Q": Q, "RQR": RQR, "H": H,
                "a1": self.a1.ravel().copy(), "P1": P1}


@dataclass
class FilterOutput:
    """Kalman filter results.

    ``a`` has shape (n, m, d); ``P`` holds the predicted covariances of the
    vectorised state, shape (n, m*d, m*d).  ``a_next``/``P_next`` are the
    one-step-ahead moments for the first time point after the data.
    """

    a: np.ndarray
    P: np.ndarray
    innovations: np.ndarray
    innovation_cov: np.ndarray
    loglik: float
    a_next: np.ndarray | None = None
    P_next: np.ndarray | None = None
    converged_at: int = -1


def _check_y(system: StateSpaceSystem, y, x_beta=None):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[1] != system.d:
        raise DimensionError(f"y must be n x {system.d}, got {y.shape}")
    if y.shape[0] < 1:
        raise DimensionError("need at least one observation")
    if not np.all(np.isfinite(y)):
        raise ValidationError("y contains missing or non-finite values")
    if x_beta is not None:
        x_beta = np.asarray(x_beta, dtype=float).reshape(y.shape[0], -1)
        if x_beta.shape != y.shape:
            raise DimensionError(f"x_beta must match y shape {y.shape}, got {x_beta.shape}")
        y = y - x_beta
    return np.ascontiguousarray(y)


def _covariances(vs: dict, n: int, steady_state_tol: float):
    try:
        return _kernels.covariance_pass(vs["Z"], vs["T"], vs["RQR"], vs["H"], vs["P1"], n,
                                        steady_state_tol)
    except (np.linalg.LinAlgError, NumbaError, ValueError) as exc:
        raise NumericalError(f"innovation variance is not positive definite: {exc}") from exc


def kalman_filter(system: StateSpaceSystem, y, x_beta=None, steady_state_tol: float = 0.0):
    """Run the Kalman filter and return predicted moments and log-likelihood.

    ``x_beta`` is an optional n x d matrix of regression offsets that is
    subtracted from ``y`` before filtering.
    """
    y = _check_y(system, y, x_beta)
    n = y.shape[0]
    vs = system.vectorized(n)
    Finv, logdetF, Kg, P, conv = _covariances(vs, n, steady_state_tol)
    v, a, quad = _kernels.mean_pass(y, vs["Z"], vs["T"], Finv, Kg, vs["a1"])
    p = y.shape[1]
    loglik = -0.5 * float(np.sum(p * np.log(2 * np.pi) + logdetF + quad))
    if not np.isfinite(loglik):
        raise NumericalError("log-likelihood is not finite")
    F = np.linalg.inv(Finv)
    return FilterOutput(a=a[:n].reshape(n, system.m, system.d), P=P[:n], innovations=v,
                        innovation_cov=F, loglik=loglik,
                        a_next=a[n].reshape(system.m, system.d), P_next=P[n],
                        converged_at=int(conv))


def kalman_smoother(system: StateSpaceSystem, y, x_beta=None):
    """Smoothed state means (n, m, d) and vectorised covariances (n, md, md)."""
    y = _check_y(system, y, x_beta)
    n = y.shape[0]
    vs = system.vectorized(n)
    Finv, _, Kg, P, _ = _covariances(vs, n, 0.0)
    v, a, _ = _kernels.mean_pass(y, vs["Z"], vs["T"], Finv, Kg, vs["a1"])
    mean, cov = _kernels.smoothed_moments(vs["Z"], vs["T"], Finv, Kg, P, v, a)
    return mean.reshape(n, system.m, system.d), cov


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """A square-root factor ``L`` with ``L L' = A`` that tolerates singular PSD input."""
    A = 0.5 * (A + A.T)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(A)
        if w.min() < -1e-8 * max(1.0, abs(w.max())):
            raise NumericalError("matrix is not positive semidefinite")
        return V * np.sqrt(np.clip(w, 0.0, None))


class SimulationSmoother:
    """Durbin-Koopman mean-correction simulation smoother.

    The data-independent covariance recursion is computed once per parameter
    setting; each call to :meth:`draw` then costs one unconditional
    simulation plus one filtering/smoothing pass on the means.
    """

    def __init__(self, system: StateSpaceSystem, n: int, steady_state_tol: float = 1e-10):
        self.system = system
        self.n = n
        vs = system.vectorized(n)
        self._vs = vs
        self._cov = _covariances(vs, n, steady_state_tol)
        self._RQchol = np.ascontiguousarray(
            np.stack([Rk @ psd_sqrt(vs["Q"]) for Rk in vs["R"]]))
        self._Hchol = np.ascontiguousarray(psd_sqrt(vs["H"][0])[None])
        self._P1chol = np.ascontiguousarray(psd_sqrt(vs["P1"]))

    def draw(self, y, rng: np.random.Generator, x_beta=None) -> np.ndarray:
        system = self.system
        y = _check_y(system, y, x_beta)
        if y.shape[0] != self.n:
            raise DimensionError(f"smoother was prepared for n={self.n}, got {y.shape[0]}")
        vs = self._vs
        n, p = y.shape
        k = vs["a1"].shape[0]
        z0 = rng.standard_normal(k)
        zeta = rng.standard_normal((n, self._RQchol.shape[2]))
        zeps = rng.standard_normal((n, p))
        alpha_plus, y_plus = _kernels.simulate_path(vs["Z"], vs["T"], self._RQchol, self._Hchol,
                                                    vs["a1"], self._P1chol, z0, zeta, zeps)
        Finv, _, Kg, _, _ = self._cov
        ystar = np.ascontiguousarray(y - y_plus)
        v, _, _ = _kernels.mean_pass(ystar, vs["Z"], vs["T"], Finv, Kg, np.zeros(k))
        correction = _kernels.smoothed_mean(vs["Z"], vs["T"], vs["RQR"], Finv, Kg, v,
                                            np.zeros(k), vs["P1"])
        return (alpha_plus + correction).reshape(n, system.m, system.d)


def simulation_smoother(system: StateSpaceSystem, y, x_beta=None, rng=None) -> np.ndarray:
    """One exact draw of the state path given ``y``; shape (n, m, d)."""
    rng = np.random.default_rng(rng)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    return SimulationSmoother(system, n).draw(y, rng, x_beta=x_beta)


def state_disturbances(system: StateSpaceSystem, alpha: np.ndarray) -> np.ndarray:
    """Recover eta_t from a state path; returns (n-1, r, d)."""
    alpha = np.asarray(alpha, dtype=float)
    n = alpha.shape[0]
    out = np.empty((n - 1, system.r, system.d))
    for t in range(n - 1):
        _, T, R = system.at(t)
        out[t] = np.linalg.pinv(R) @ (alpha[t + 1] - T @ alpha[t])
    return out


# brute-force oracle -------------------------------------------------------


@dataclass
class OracleMoments:
    mean: np.ndarray
    cov: np.ndarray
    loglik: float
    joint_cov: np.ndarray


def joint_gaussian_smoother_oracle(system: StateSpaceSystem, y, x_beta=None,
                                   extra_states: int = 0) -> OracleMoments:
    """Exact conditional state moments by conditioning the full joint Gaussian.

    Builds the joint distribution of all vectorised states and observations
    and conditions on ``y`` by direct linear algebra.  ``extra_states``
    appends states beyond the last observation (their moments are then
    predictive).  Intended for tests only; guarded to ``n*m*d <= 512``.
    """
    y = _check_y(system, y, x_beta)
    n_obs, d = y.shape
    n = n_obs + extra_states
    m = system.m
    k = m * d
    if n * k > ORACLE_MAX_SIZE:
        raise ValidationError(f"oracle size {n * k} exceeds {ORACLE_MAX_SIZE}")
    vs = system.vectorized()
    rd = vs["Q"].shape[0]

    def pick(A, t):
        return A[0] if A.shape[0] == 1 else A[t]

    # states = A_s @ u + mean_s, with u = (alpha_1 noise, eta_1..eta_{n-1})
    nu = k + (n - 1) * rd
    A_s = np.zeros((n * k, nu))
    mean_s = np.zeros(n * k)
    A_s[:k, :k] = np.eye(k)
    mean_s[:k] = vs["a1"]
    for t in range(n - 1):
        T = pick(vs["T"], t)
        R = pick(vs["R"], t)
        A_s[(t + 1) * k:(t + 2) * k] = T @ A_s[t * k:(t + 1) * k]
        A_s[(t + 1) * k:(t + 2) * k, k + t * rd:k + (t + 1) * rd] += R
        mean_s[(t + 1) * k:(t + 2) * k] = T @ mean_s[t * k:(t + 1) * k]
    D_u = np.zeros((nu, nu))
    D_u[:k, :k] = vs["P1"]
    for t in range(n - 1):
        D_u[k + t * rd:k + (t + 1) * rd, k + t * rd:k + (t + 1) * rd] = vs["Q"]
    S_ss = A_s @ D_u @ A_s.T

    G = np.zeros((n_obs * d, n * k))
    for t in range(n_obs):
        G[t * d:(t + 1) * d, t * k:(t + 1) * k] = pick(vs["Z"], t)
    H = np.kron(np.eye(n_obs), vs["H"][0])
    S_yy = G @ S_ss @ G.T + H
    S_sy = S_ss @ G.T
    mu_y = G @ mean_s
    resid = y.ravel() - mu_y

    chol = np.linalg.cholesky(S_yy)
    sol = np.linalg.solve(S_yy, resid)
    cond_mean = mean_s + S_sy @ sol
    cond_cov = S_ss - S_sy @ np.linalg.solve(S_yy, S_sy.T)
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    loglik = -0.5 * (n_obs * d * np.log(2 * np.pi) + 2 * np.sum(np.log(np.diag(chol)))
                     + resid @ sol)
    cov_t = np.stack([cond_cov[t * k:(t + 1) * k, t * k:(t + 1) * k] for t in range(n)])
    return OracleMoments(mean=cond_mean.reshape(n, m, d), cov=cov_t, loglik=float(loglik),
                         joint_cov=cond_cov)
