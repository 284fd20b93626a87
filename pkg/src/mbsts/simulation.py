"""Simulation study: coverage, interval length, error and detection rate.

Datasets follow the trend + weekly seasonal + regression design over a daily
calendar.  A persistent multiplicative effect is applied to the observed
outcomes after the intervention.  Each dataset is fitted once per model: the
pre-period (and hence the posterior and the counterfactual forecast) does
not depend on the effect size, so all effect sizes are scored against the
same forecast draws.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .components import LocalLevelTrend, Regression, Seasonal, assemble_system, simulate_from_system
from .effects import effect_draws
from .exceptions import MBSTSError, ValidationError
from .forecast import forecast_counterfactual
from .gibbs import MCMCConfig, run_gibbs
from .panel import TimeSeriesPanel
from .priors import default_priors

logger = logging.getLogger(__name__)

PAPER_EFFECT_SIZES = ((1.01, 0.99), (1.10, 0.90), (1.25, 0.75), (1.50, 0.50), (2.00, 0.10))
# how true effects are scored against intervals; see SimulationDesign
COVERAGE_MODES = ("pointwise", "average", "pointwise_vs_average")


@dataclass(frozen=True)
class SimulationDesign:
    """Constants of the synthetic study.

    ``coverage_mode`` picks how truth is scored: ``pointwise`` checks each
    true pointwise effect against its pointwise interval, ``average`` checks
    the true temporal average against the average interval and
    ``pointwise_vs_average`` checks each true pointwise effect against the
    average interval.  Every record carries all three.
    """

    start: str = "2018-01-01"
    end: str = "2019-06-30"
    intervention: str = "2019-01-02"
    H: float = 1.0
    c1: float = 3.0
    c2: float = 2.0
    Sigma: tuple = ((1.0, -0.3), (-0.3, 1.0))
    period: int = 7
    initial_level: tuple = (100.0, 100.0)
    x1_start: float = 0.0
    x1_noise_sd: float = 0.5
    x2_mean: float = 2.0
    x2_sd: float = 0.3
    effect_sizes: tuple = PAPER_EFFECT_SIZES
    horizons_months: tuple = (1, 3, 6)
    n_datasets: int = 200
    models: tuple = ("M1", "M2")
    m2_regression: bool = True
    prior_rho: float = -0.8
    prior_h: float = 0.2
    prior_k: float = 0.2
    prior_g: float | str = "unit"
    coverage_mode: str = "pointwise"

    def __post_init__(self):
        dates = self.dates
        t0 = pd.Timestamp(self.intervention)
        if not dates[0] < t0 <= dates[-1]:
            raise ValidationError("intervention must fall strictly inside the calendar")
        for pair in self.effect_sizes:
            if len(pair) != len(self.Sigma) or min(pair) <= 0:
                raise ValidationError("effect factors must be positive, one per series")
        if self.n_datasets < 1:
            raise ValidationError("n_datasets must be >= 1")
        unknown = set(self.models) - {"M1", "M2"}
        if unknown:
            raise ValidationError(f"unknown models {sorted(unknown)}")
        if self.coverage_mode not in COVERAGE_MODES:
            raise ValidationError(f"unknown coverage_mode {self.coverage_mode!r}")

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, self.end, freq="D")

    @property
    def t_star(self) -> int:
        return int(np.sum(self.dates < pd.Timestamp(self.intervention)))

    @property
    def horizon_steps(self) -> list:
        """Post-period lengths for each horizon in months (calendar months, clipped)."""
        dates = self.dates
        t0 = pd.Timestamp(self.intervention)
        post = dates[dates >= t0]
        steps = []
        for h in self.horizons_months:
            end = t0 + pd.DateOffset(months=int(h))
            steps.append(max(1, int(np.sum(post < end))))
        return steps

    def model_specs(self, model: str) -> list:
        seasonal = Seasonal(self.period, self.c2)
        reg = [Regression(2)]
        if model == "M1":
            return [LocalLevelTrend(self.c1), seasonal, *reg]
        return [seasonal, *(reg if self.m2_regression else [])]


@dataclass
class SyntheticPanel:
    panel: TimeSeriesPanel
    counterfactual: np.ndarray
    beta: np.ndarray
    states: np.ndarray
    effect: tuple

    @property
    def true_effect(self) -> np.ndarray:
        """Pointwise true effects over the post period, K x d."""
        t = self.panel.t_star
        return self.panel.Y[t:] - self.counterfactual[t:]


def generate_covariates(design: SimulationDesign, n: int, rng) -> np.ndarray:
    # X1(t) = 1 - X1(t-1) + N(0, sd); X2 ~ N(mean, sd)
    x1 = np.empty(n)
    prev = design.x1_start
    noise = rng.normal(0.0, design.x1_noise_sd, n)
    for t in range(n):
        prev = 1.0 - prev + noise[t]
        x1[t] = prev
    x2 = rng.normal(design.x2_mean, design.x2_sd, n)
    return np.column_stack([x1, x2])


def generate_synthetic_panel(design: SimulationDesign, rng=None, effect=(1.0, 1.0),
                             group_id: str = "sim") -> SyntheticPanel:
    """Simulate one dataset and apply a persistent multiplicative effect."""
    rng = np.random.default_rng(rng)
    effect = tuple(float(f) for f in effect)
    Sigma = np.asarray(design.Sigma, dtype=float)
    d = Sigma.shape[0]
    if len(effect) != d or min(effect) <= 0:
        raise ValidationError("effect factors must be positive, one per series")
    dates = design.dates
    n = len(dates)
    t_star = design.t_star
    system = assemble_system([LocalLevelTrend(design.c1), Seasonal(design.period, design.c2)],
                             d, Sigma, design.H)
    a1 = np.zeros((system.m, d))
    a1[0] = design.initial_level
    system = type(system)(Z=system.Z, T=system.T, R=system.R, H=system.H, C=system.C,
                          Sigma=Sigma, a1=a1, P1=np.zeros((system.m, system.m)),
                          block_layout=system.block_layout)
    X = generate_covariates(design, n, rng)
    P = X.shape[1]
    # beta ~ MN(0, I_P, H * Sigma)
    beta = rng.standard_normal((P, d)) @ np.linalg.cholesky(design.H * Sigma).T
    y_cf, states = simulate_from_system(system, n, beta=beta, covariates=X, rng=rng)
    y_obs = y_cf.copy()
    y_obs[t_star:] = y_cf[t_star:] * np.asarray(effect)[None, :]
    panel = TimeSeriesPanel(Y=y_obs, X=X, t_star=t_star, dates=dates, group_id=group_id,
                            outcome_names=[f"Y{i + 1}" for i in range(d)],
                            covariate_names=["X1", "X2"], min_pre=design.period + 2)
    return SyntheticPanel(panel=panel, counterfactual=y_cf, beta=beta, states=states,
                          effect=effect)


def effect_label(effect) -> str:
    return "(" + ",".join(f"{f:.2f}" for f in effect) + ")"


def score_forecast(counterfactual_draws, y_cf_post, effect, horizons, coverage_mode="pointwise",
                   alpha=0.05) -> list:
    """Metric records for one fitted dataset and one effect size."""
    if coverage_mode not in COVERAGE_MODES:
        raise ValidationError(f"unknown coverage_mode {coverage_mode!r}")
    effect = np.asarray(effect, dtype=float)
    observed = y_cf_post * effect[None, :]
    true_tau = observed - y_cf_post
    eff = effect_draws(observed, counterfactual_draws)
    lo_p, hi_p = np.quantile(eff.pointwise, [alpha / 2, 1 - alpha / 2], axis=0)
    records = []
    for K in horizons:
        tav = eff.temporal_average[:, K - 1, :]
        lo, hi = np.quantile(tav, [alpha / 2, 1 - alpha / 2], axis=0)
        est = tav.mean(axis=0)
        truth = true_tau[:K].mean(axis=0)
        cov = {
            "pointwise": ((true_tau[:K] >= lo_p[:K]) & (true_tau[:K] <= hi_p[:K])).mean(axis=0),
            "average": ((truth >= lo) & (truth <= hi)).astype(float),
            "pointwise_vs_average": ((true_tau[:K] >= lo[None])
                                     & (true_tau[:K] <= hi[None])).mean(axis=0),
        }
        with np.errstate(divide="ignore", invalid="ignore"):
            ape = np.abs(est - truth) / np.abs(truth)
        for j in range(len(effect)):
            records.append({
                "horizon_steps": K, "series": j, "interval_length": hi[j] - lo[j],
                "ape": ape[j], "coverage": 100.0 * cov[coverage_mode][j],
                **{f"coverage_{name}": 100.0 * c[j] for name, c in cov.items()},
                "detected": 100.0 * float(lo[j] > 0 or hi[j] < 0),
                "estimate": est[j], "truth": truth[j]})
    return records


def _dataset_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(index)])


def study_dataset(design: SimulationDesign, mcmc: MCMCConfig, index: int) -> dict:
    """Fit every model on dataset ``index`` and score all effect sizes."""
    ss = _dataset_seed(mcmc.seed, index)
    data_ss, *model_ss = ss.spawn(1 + len(design.models))
    data = generate_synthetic_panel(design, np.random.default_rng(data_ss),
                                    group_id=f"sim{index:05d}")
    panel = data.panel
    t_star = panel.t_star
    horizons = design.horizon_steps
    k_max = max(horizons)
    y_cf_post = data.counterfactual[t_star:t_star + k_max]
    X_post = panel.X[t_star:t_star + k_max]
    records, failures = [], []
    for model, mss in zip(design.models, model_ss):
        fit_seed, fc_seed = mss.generate_state(2)
        try:
            prior = default_priors(panel, rho_prior=design.prior_rho, h=design.prior_h,
                                   k=design.prior_k, g=design.prior_g)
            cfg = MCMCConfig(niter=mcmc.niter, burn_in=mcmc.burn_in, seed=int(fit_seed),
                             store_states="last", kappa=mcmc.kappa,
                             steady_state_tol=mcmc.steady_state_tol)
            draws = run_gibbs(panel, design.model_specs(model), prior, cfg)
            cf = forecast_counterfactual(draws, X_post, k_max, rng=int(fc_seed))
        except (MBSTSError, np.linalg.LinAlgError) as exc:
            logger.warning("dataset %d model %s failed: %s", index, model, exc)
            failures.append({"dataset": index, "model": model, "error": str(exc)})
            continue
        for eff in design.effect_sizes:
            for rec in score_forecast(cf, y_cf_post, eff, horizons, design.coverage_mode):
                rec.update(dataset=index, model=model, effect=effect_label(eff))
                records.append(rec)
    return {"records": records, "failures": failures}


@dataclass
class CoverageReport:
    """Aggregated study metrics.

    ``table`` has one row per (model, effect, horizon, series) with mean
    interval length, mean absolute percentage error with its s.e.m.,
    coverage and detection rate (percent) with their s.e.m.
    ``records`` keeps the per-dataset values.
    """

    table: pd.DataFrame
    records: pd.DataFrame
    failures: pd.DataFrame
    design: dict = field(default_factory=dict)

    def cell(self, model, effect, horizon_months, series) -> pd.Series:
        t = self.table
        lab = effect if isinstance(effect, str) else effect_label(effect)
        row = t[(t.model == model) & (t.effect == lab) & (t.horizon_months == horizon_months)
                & (t.series == series)]
        if len(row) != 1:
            raise KeyError((model, lab, horizon_months, series))
        return row.iloc[0]


def _sem(x: pd.Series) -> float:
    x = x.dropna()
    return float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def aggregate(records: pd.DataFrame, design: SimulationDesign) -> pd.DataFrame:
    month_of = dict(zip(design.horizon_steps, design.horizons_months))
    rows = []
    keys = ["model", "effect", "horizon_steps", "series"]
    for key, grp in records.groupby(keys, sort=False):
        ape = grp["ape"].replace([np.inf, -np.inf], np.nan)
        rows.append({
            "model": key[0], "effect": key[1], "horizon_months": month_of[key[2]],
            "horizon_steps": key[2], "series": f"Y{key[3] + 1}",
            "interval_length": grp["interval_length"].mean(),
            "ape_mean": ape.mean(), "ape_sem": _sem(ape),
            "coverage": grp["coverage"].mean(), "coverage_sem": _sem(grp["coverage"]),
            "detection": grp["detected"].mean(), "detection_sem": _sem(grp["detected"]),
            "n_datasets": len(grp)})
    table = pd.DataFrame(rows)
    order = {m: i for i, m in enumerate(design.models)}
    eff_order = {effect_label(e): i for i, e in enumerate(design.effect_sizes)}
    table = table.assign(_m=table.model.map(order), _e=table.effect.map(eff_order))
    table = table.sort_values(["_m", "_e", "horizon_steps", "series"]).drop(columns=["_m", "_e"])
    return table.reset_index(drop=True)


def run_coverage_study(design: SimulationDesign, mcmc: MCMCConfig | None = None,
                       n_jobs: int = 1) -> CoverageReport:
    """Run the full study; deterministic given ``mcmc.seed`` regardless of ``n_jobs``."""
    mcmc = mcmc or MCMCConfig()
    if n_jobs == 1:
        results = [study_dataset(design, mcmc, i) for i in range(design.n_datasets)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(study_dataset)(design, mcmc, i) for i in range(design.n_datasets))
    records = pd.DataFrame([r for res in results for r in res["records"]])
    failures = pd.DataFrame([f for res in results for f in res["failures"]],
                            columns=["dataset", "model", "error"])
    if records.empty:
        raise ValidationError("every dataset failed to fit")
    cols = ["dataset", "model", "effect", "horizon_steps", "series", "interval_length", "ape",
            "coverage", *(f"coverage_{m}" for m in COVERAGE_MODES), "detected", "estimate", "truth"]
    records = records[cols]
    return CoverageReport(table=aggregate(records, design), records=records, failures=failures,
                          design=asdict(design))
