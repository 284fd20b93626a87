"""Scikit-learn style front end: fit on the pre-period, predict the counterfactual."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .components import DEFAULT_KAPPA, LocalLevelTrend, Regression, Seasonal
from .effects import EffectDraws, effect_draws
from .exceptions import DimensionError, ValidationError
from .forecast import forecast_counterfactual, replicate_insample
from .gibbs import MCMCConfig, run_gibbs
from .panel import TimeSeriesPanel
from .priors import default_priors


class MBSTS(BaseEstimator):
    """Multivariate structural time-series model for counterfactual forecasting.

    ``fit(X, y)`` takes pre-intervention outcomes ``y`` (t* x d) and optional
    covariates ``X`` (t* x P).  ``predict(X)`` returns the posterior-mean
    counterfactual for the post period; ``sample`` returns the full
    predictive draws and ``effects`` compares observed post-period outcomes
    with them.
    """

    def __init__(self, trend=True, seasonal_period=7, trend_scale=1.0, seasonal_scale=1.0,
                 selection="spike-and-slab", rho_prior=0.0, h=1.0, k=1.0, g=1.0, pi=0.5,
                 sr_multiplier=1.0, coef_cov="zellner", niter=1000, burn_in=None, kappa=DEFAULT_KAPPA,
                 random_state=0):
        self.trend = trend
        self.seasonal_period = seasonal_period
        self.trend_scale = trend_scale
        self.seasonal_scale = seasonal_scale
        self.selection = selection
        self.rho_prior = rho_prior
        self.h = h
        self.k = k
        self.g = g
        self.pi = pi
        self.sr_multiplier = sr_multiplier
        self.coef_cov = coef_cov
        self.niter = niter
        self.burn_in = burn_in
        self.kappa = kappa
        self.random_state = random_state

    def _specs(self, P):
        specs = []
        if self.trend:
            specs.append(LocalLevelTrend(self.trend_scale))
        if self.seasonal_period:
            specs.append(Seasonal(int(self.seasonal_period), self.seasonal_scale))
        if P:
            specs.append(Regression(P, self.selection))
        return specs

    def _seed(self):
        rs = self.random_state
        if rs is None:
            return int(np.random.SeedSequence().generate_state(1)[0])
        if isinstance(rs, (int, np.integer)):
            return int(rs)
        raise ValidationError("random_state must be an int or None")

    def fit(self, X, y):
        y = check_array(y, ensure_2d=False, dtype=float)
        y = y[:, None] if y.ndim == 1 else y
        if X is not None:
            X = check_array(X, dtype=float, ensure_min_features=0)
            if X.shape[0] != y.shape[0]:
                raise DimensionError(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
        else:
            X = np.zeros((y.shape[0], 0))
        # the panel wants a post period; fit only ever touches the pre rows
        panel = TimeSeriesPanel(Y=np.vstack([y, y[-1:]]), X=np.vstack([X, X[-1:]]),
                                t_star=y.shape[0], min_pre=3)
        specs = self._specs(X.shape[1])
        if not any(not isinstance(s, Regression) for s in specs):
            raise ValidationError("need a trend or seasonal component")
        prior = default_priors(panel, rho_prior=self.rho_prior, h=self.h, k=self.k, pi=self.pi,
                               g=self.g, sr_multiplier=self.sr_multiplier,
                               coef_cov=self.coef_cov)
        seed = self._seed()
        mcmc = MCMCConfig(niter=self.niter, burn_in=self.burn_in, seed=seed, kappa=self.kappa)
        self.draws_ = run_gibbs(panel, specs, prior, mcmc)
        self.prior_ = prior
        self.n_outputs_ = y.shape[1]
        self.n_features_in_ = X.shape[1]
        self._X_fit = X
        self._forecast_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
        return self

    def _check_future(self, X, n_steps):
        check_is_fitted(self, "draws_")
        if self.n_features_in_ == 0:
            if n_steps is None:
                if X is None:
                    raise ValidationError("give n_steps or X")
                n_steps = len(X)
            return None, int(n_steps)
        if X is None:
            raise ValidationError("covariates are required for the forecast period")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if n_steps is not None and int(n_steps) != X.shape[0]:
            raise DimensionError("n_steps disagrees with the rows of X")
        return X, X.shape[0]

    def sample(self, X=None, n_steps=None, random_state=None) -> np.ndarray:
        """Counterfactual predictive draws, shape (S, k, d)."""
        X, k = self._check_future(X, n_steps)
        rng = self._forecast_seed if random_state is None else random_state
        return forecast_counterfactual(self.draws_, X, k, rng=rng)

    def predict(self, X=None, n_steps=None) -> np.ndarray:
        return self.sample(X, n_steps).mean(axis=0)

    def predict_interval(self, X=None, n_steps=None, alpha=0.05):
        draws = self.sample(X, n_steps)
        return tuple(np.quantile(draws, [alpha / 2, 1 - alpha / 2], axis=0))

    def replicate(self, random_state=None) -> np.ndarray:
        """In-sample posterior-predictive replicates, shape (S, t*, d)."""
        check_is_fitted(self, "draws_")
        X = self._X_fit if self.n_features_in_ else None
        return replicate_insample(self.draws_, X, rng=random_state)

    def effects(self, y_post, X=None) -> EffectDraws:
        y_post = check_array(y_post, ensure_2d=False, dtype=float)
        y_post = y_post[:, None] if y_post.ndim == 1 else y_post
        cf = self.sample(X, n_steps=y_post.shape[0])
        return effect_draws(y_post, cf, t_star=self.draws_.t_star)
