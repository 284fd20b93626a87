"""Posterior predictive checks and MCMC convergence diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats
from scipy.linalg import solve_toeplitz

from .exceptions import DimensionError, NumericalError, ValidationError

logger = logging.getLogger(__name__)

GEWEKE_MIN_DRAWS = 100

STATISTICS = {
    "max": lambda y, axis=0: np.max(y, axis=axis),
    "mean": lambda y, axis=0: np.mean(y, axis=axis),
    "std": lambda y, axis=0: np.std(y, axis=axis, ddof=1),
}


def register_statistic(name: str, func) -> None:
    """Add a test statistic ``func(y, axis)`` reducing over the time axis."""
    if not callable(func):
        raise ValidationError("statistic must be callable")
    STATISTICS[name] = func


def bayesian_p_value(observed_stat: float, replicated_stats) -> float:
    """Share of replicated statistics at least as large as the observed one."""
    rep = np.asarray(replicated_stats, dtype=float).ravel()
    if rep.size == 0:
        raise ValidationError("need at least one replicated statistic")
    return float(np.mean(rep >= observed_stat))


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """Sample ACF at lags 0..max_lag (biased, denominator n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_lag >= n:
        raise ValidationError("max_lag must be below the series length")
    xc = x - x.mean()
    denom = xc @ xc
    if denom <= 0:
        raise NumericalError("zero-variance series has no autocorrelation")
    return np.array([xc[: n - k] @ xc[k:] / denom for k in range(max_lag + 1)])


@dataclass
class PpcReport:
    """Per-series posterior predictive diagnostics.

    ``p_values`` has one row per (series, statistic); ``overlay`` holds the
    observed values with the posterior-predictive mean; ``residuals`` is
    (t*, d); ``qq`` and ``acf`` are long tables keyed by series.
    """

    p_values: pd.DataFrame
    overlay: pd.DataFrame
    residuals: np.ndarray
    qq: pd.DataFrame
    acf: pd.DataFrame
    band: float
    series_names: list = field(default_factory=list)


def ppc_report(panel, draws, replicates, L: int = 20, statistics=("max",),
               series_names=None) -> PpcReport:
    """Posterior predictive checks of the pre-period fit.

    ``replicates`` is (S, t*, d), as returned by ``replicate_insample``.
    ``draws`` is accepted for interface symmetry and is not otherwise used.
    """
    Y = np.asarray(panel.Y_pre if hasattr(panel, "Y_pre") else panel, dtype=float)
    rep = np.asarray(replicates, dtype=float)
    if rep.ndim != 3 or rep.shape[1:] != Y.shape:
        raise DimensionError(f"replicates must be S x {Y.shape[0]} x {Y.shape[1]}, got {rep.shape}")
    t_star, d = Y.shape
    if t_star < L + 2:
        raise ValidationError(f"pre-period of {t_star} points too short for {L} lags")
    unknown = [s for s in statistics if s not in STATISTICS]
    if unknown:
        raise ValidationError(f"unknown statistics {unknown}")
    if series_names is None:
        series_names = list(getattr(panel, "outcome_names", None) or [f"y{i + 1}" for i in range(d)])

    rows = []
    for name in statistics:
        f = STATISTICS[name]
        obs = f(Y, axis=0)
        reps = f(rep, axis=1)
        for j in range(d):
            rows.append({"series": series_names[j], "statistic": name, "observed": float(obs[j]),
                         "p_value": bayesian_p_value(obs[j], reps[:, j])})
    p_values = pd.DataFrame(rows, columns=["series", "statistic", "observed", "p_value"])

    mean = rep.mean(axis=0)
    sd = rep.std(axis=0, ddof=1) if rep.shape[0] > 1 else np.zeros_like(mean)
    if np.any(sd <= 0):
        raise NumericalError("posterior-predictive variance is zero; residuals undefined")
    resid = (Y - mean) / sd

    t_idx = np.arange(t_star)
    overlay = pd.DataFrame({
        "time": np.tile(t_idx, d), "series": np.repeat(series_names, t_star),
        "observed": Y.T.ravel(), "predictive_mean": mean.T.ravel()})
    probs = (np.arange(1, t_star + 1) - 0.5) / t_star
    theo = stats.norm.ppf(probs)
    qq = pd.DataFrame({
        "series": np.repeat(series_names, t_star), "theoretical": np.tile(theo, d),
        "empirical": np.sort(resid, axis=0).T.ravel()})
    acf_vals = np.stack([autocorrelation(resid[:, j], L) for j in range(d)])
    acf = pd.DataFrame({
        "series": np.repeat(series_names, L + 1), "lag": np.tile(np.arange(L + 1), d),
        "acf": acf_vals.ravel()})
    return PpcReport(p_values=p_values, overlay=overlay, residuals=resid, qq=qq, acf=acf,
                     band=1.96 / np.sqrt(t_star), series_names=series_names)


def spectral_density_zero(x, max_order: int | None = None) -> float:
    """Spectral density at frequency zero from an AR fit chosen by AIC.

    Returns the long-run variance ``sigma^2 / (1 - sum(phi))^2``, i.e. the
    quantity whose ratio to ``n`` is the variance of the sample mean.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    gamma0 = xc @ xc / n
    if gamma0 <= 0:
        raise NumericalError("constant segment: spectral density undefined")
    if max_order is None:
        max_order = int(min(n - 1, np.floor(10 * np.log10(n))))
    acov = np.array([xc[: n - k] @ xc[k:] / n for k in range(max_order + 1)])
    best_aic, best = n * np.log(gamma0), (gamma0, np.zeros(0))
    for p in range(1, max_order + 1):
        phi = solve_toeplitz(acov[:p], acov[1: p + 1])
        sigma2 = acov[0] - phi @ acov[1: p + 1]
        if sigma2 <= 0:
            break
        aic = n * np.log(sigma2) + 2 * p
        if aic < best_aic:
            best_aic, best = aic, (sigma2, phi)
    sigma2, phi = best
    return float(sigma2 / (1.0 - phi.sum()) ** 2)


def geweke_diagnostic(chain, frac_a: float = 0.10, frac_b: float = 0.50) -> dict:
    """Compare the means of the first ``frac_a`` and last ``frac_b`` of a chain.

    Returns ``{"z": z, "p": p}`` with a two-sided normal p-value.
    """
    x = np.asarray(chain, dtype=float).ravel()
    if x.size < GEWEKE_MIN_DRAWS:
        raise ValidationError(f"chain must have at least {GEWEKE_MIN_DRAWS} draws")
    if not (0 < frac_a < 1 and 0 < frac_b < 1 and frac_a + frac_b <= 1):
        raise ValidationError("fractions must be in (0, 1) and sum to at most 1")
    n = x.size
    a = x[: int(np.floor(frac_a * n))]
    b = x[n - int(np.floor(frac_b * n)):]
    var_a = spectral_density_zero(a) / a.size
    var_b = spectral_density_zero(b) / b.size
    z = (a.mean() - b.mean()) / np.sqrt(var_a + var_b)
    return {"z": float(z), "p": float(2 * stats.norm.sf(abs(z)))}


def geweke_table(draws, names=None) -> pd.DataFrame:
    """Geweke z and p for the observation covariance entries and the
    included regression coefficients of a set of posterior draws.

    Chains shorter than ``GEWEKE_MIN_DRAWS`` give NaN rows instead of failing.
    """
    rows = []
    d = draws.sigma_eps.shape[1]
    if draws.sigma_eps.shape[0] < GEWEKE_MIN_DRAWS:
        logger.warning("fewer than %d draws; Geweke diagnostics skipped", GEWEKE_MIN_DRAWS)
        names = names or [f"y{i + 1}" for i in range(d)]
        return pd.DataFrame({"parameter": [f"sigma_eps[{names[i]},{names[j]}]"
                                           for i in range(d) for j in range(i, d)],
                             "z": np.nan, "p": np.nan})
    names = names or [f"y{i + 1}" for i in range(d)]
    for i in range(d):
        for j in range(i, d):
            res = geweke_diagnostic(draws.sigma_eps[:, i, j])
            rows.append({"parameter": f"sigma_eps[{names[i]},{names[j]}]", **res})
    P = draws.beta.shape[1]
    for p in range(P):
        for j in range(d):
            chain = draws.beta[:, p, j]
            if np.ptp(chain) == 0:
                continue
            try:
                res = geweke_diagnostic(chain)
            except NumericalError:
                continue
            rows.append({"parameter": f"beta[{p},{names[j]}]", **res})
    return pd.DataFrame(rows, columns=["parameter", "z", "p"])
