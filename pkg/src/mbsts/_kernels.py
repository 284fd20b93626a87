"""Compiled Kalman recursions on the vectorised state.

All kernels take per-time system arrays with a leading time axis that is
either ``n`` long or of length one (time-invariant).  The state vector is
the row-major vectorisation of the ``m x d`` state matrix.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _sym(A):
    return 0.5 * (A + A.T)


@njit(cache=True)
def _mv(A, x):
    out = np.zeros(A.shape[0])
    for i in range(A.shape[0]):
        acc = 0.0
        for j in range(A.shape[1]):
            acc += A[i, j] * x[j]
        out[i] = acc
    return out


@njit(cache=True)
def _mtv(A, x):
    out = np.zeros(A.shape[1])
    for j in range(A.shape[0]):
        xj = x[j]
        for i in range(A.shape[1]):
            out[i] += A[j, i] * xj
    return out


@njit(cache=True)
def covariance_pass(Zs, Ts, RQRs, Hs, P1, n, tol):
    """Data-independent part of the filter.

    Returns ``(Finv, logdetF, Kg, P, converged_at)`` where ``Kg`` is the
    prediction gain ``T P Z' F^-1`` and ``P`` holds the ``n + 1`` predicted
    state covariances.  ``converged_at`` is -1 unless the recursion reached
    a steady state, after which the remaining steps reuse it.
    """
    p = Zs.shape[1]
    k = Zs.shape[2]
    Finv = np.empty((n, p, p))
    logdetF = np.empty(n)
    Kg = np.empty((n, k, p))
    P = np.empty((n + 1, k, k))
    P[0] = P1
    constant = Zs.shape[0] == 1 and Ts.shape[0] == 1 and RQRs.shape[0] == 1 and Hs.shape[0] == 1
    converged_at = -1
    for t in range(n):
        Z = Zs[0] if Zs.shape[0] == 1 else Zs[t]
        T = Ts[0] if Ts.shape[0] == 1 else Ts[t]
        RQR = RQRs[0] if RQRs.shape[0] == 1 else RQRs[t]
        H = Hs[0] if Hs.shape[0] == 1 else Hs[t]
        Pt = P[t]
        PZt = Pt @ Z.T
        F = _sym(Z @ PZt + H)
        L = np.linalg.cholesky(F)
        ld = 0.0
        for i in range(p):
            ld += 2.0 * np.log(L[i, i])
        Fi = np.linalg.inv(F)
        Fi = _sym(Fi)
        K = T @ PZt @ Fi
        Pn = _sym(T @ Pt @ T.T + RQR - K @ F @ K.T)
        Finv[t] = Fi
        logdetF[t] = ld
        Kg[t] = K
        P[t + 1] = Pn
        if constant and tol > 0.0 and t > 0:
            scale = max(1.0, np.max(np.abs(Pt)))
            if np.max(np.abs(Pn - Pt)) <= tol * scale:
                converged_at = t
                for s in range(t + 1, n):
                    Finv[s] = Fi
                    logdetF[s] = ld
                    Kg[s] = Kg[t]
                    P[s + 1] = Pn
                break
    return Finv, logdetF, Kg, P, converged_at


@njit(cache=True)
def mean_pass(y, Zs, Ts, Finv, Kg, a1):
    """Predicted state means and innovations for data ``y`` (n x p)."""
    n = y.shape[0]
    p = y.shape[1]
    k = a1.shape[0]
    v = np.empty((n, p))
    a = np.empty((n + 1, k))
    quad = np.empty(n)
    a[0] = a1
    for t in range(n):
        Z = Zs[0] if Zs.shape[0] == 1 else Zs[t]
        T = Ts[0] if Ts.shape[0] == 1 else Ts[t]
        vt = y[t] - _mv(Z, a[t])
        v[t] = vt
        quad[t] = vt @ _mv(Finv[t], vt)
        a[t + 1] = _mv(T, a[t]) + _mv(Kg[t], vt)
    return v, a, quad


@njit(cache=True)
def smoothed_mean(Zs, Ts, RQRs, Finv, Kg, v, a1, P1):
    """Fast state smoother: E[state | y] without smoothed covariances."""
    n = v.shape[0]
    k = a1.shape[0]
    r = np.zeros((n + 1, k))
    for t in range(n - 1, -1, -1):
        Z = Zs[0] if Zs.shape[0] == 1 else Zs[t]
        T = Ts[0] if Ts.shape[0] == 1 else Ts[t]
        u = _mv(Finv[t], v[t]) - _mtv(Kg[t], r[t + 1])
        r[t] = _mtv(Z, u) + _mtv(T, r[t + 1])
    alpha = np.empty((n, k))
    alpha[0] = a1 + _mv(P1, r[0])
    for t in range(n - 1):
        T = Ts[0] if Ts.shape[0] == 1 else Ts[t]
        RQR = RQRs[0] if RQRs.shape[0] == 1 else RQRs[t]
        alpha[t + 1] = _mv(T, alpha[t]) + _mv(RQR, r[t + 1])
    return alpha


@njit(cache=True)
def smoothed_moments(Zs, Ts, Finv, Kg, P, v, a):
    """Classic state smoother with covariances."""
    n = v.shape[0]
    k = a.shape[1]
    r = np.zeros(k)
    N = np.zeros((k, k))
    mean = np.empty((n, k))
    cov = np.empty((n, k, k))
    for t in range(n - 1, -1, -1):
        Z = Zs[0] if Zs.shape[0] == 1 else Zs[t]
        T = Ts[0] if Ts.shape[0] == 1 else Ts[t]
        L = T - Kg[t] @ Z
        r = Z.T @ (Finv[t] @ v[t]) + L.T @ r
        N = _sym(Z.T @ Finv[t] @ Z + L.T @ N @ L)
        mean[t] = a[t] + P[t] @ r
        cov[t] = _sym(P[t] - P[t] @ N @ P[t])
    return mean, cov


@njit(cache=True)
def simulate_path(Zs, Ts, RQchol, Hchol, a1, P1chol, z0, zeta, zeps):
    """Unconditional draw of (state, observation) from the model.

    ``RQchol`` is ``R @ chol(Q)`` per time; ``zeta`` and ``zeps`` are standard
    normal innovations of shapes (n, rd) and (n, p).
    """
    n = zeps.shape[0]
    p = zeps.shape[1]
    k = a1.shape[0]
    alpha = np.empty((n, k))
    y = np.empty((n, p))
    alpha[0] = a1 + _mv(P1chol, z0)
    for t in range(n):
        Z = Zs[0] if Zs.shape[0] == 1 else Zs[t]
        Hc = Hchol[0] if Hchol.shape[0] == 1 else Hchol[t]
        y[t] = _mv(Z, alpha[t]) + _mv(Hc, zeps[t])
        if t + 1 < n:
            T = Ts[0] if Ts.shape[0] == 1 else Ts[t]
            Rc = RQchol[0] if RQchol.shape[0] == 1 else RQchol[t]
            alpha[t + 1] = _mv(T, alpha[t]) + _mv(Rc, zeta[t])
    return alpha, y
