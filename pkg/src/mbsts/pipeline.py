"""End-to-end runs driven by a single JSON configuration.

A run fits every configured panel (one per group of interfering units),
forecasts its counterfactual, computes effects and diagnostics, and writes
CSV tables plus a JSON manifest into the output directory.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .components import Regression
from .diagnostics import geweke_table, ppc_report
from .dtw import dtw_preselect_controls
from .effects import EffectDraws, effect_draws, meta_analysis_summary
from .exceptions import ValidationError
from .forecast import forecast_counterfactual, replicate_insample
from .gibbs import MCMCConfig, McmcDraws, run_gibbs
from .io import (canonical_json, config_hash, file_sha256, load_draws, save_draws, spec_from_dict,
                 write_json, write_table)
from .panel import PanelSchema, TimeSeriesPanel, load_panel_csv
from .priors import default_priors

logger = logging.getLogger(__name__)

DEFAULT_COMPONENTS = ({"type": "trend"}, {"type": "seasonal", "period": 7},
                      {"type": "regression"})


@dataclass
class RunConfig:
    """Validated run configuration.

    ``panels`` is a list of ``{"path": csv, "schema": {...}}`` entries, one
    per group.  ``horizons`` are post-period step counts (ascending); empty
    means every post-period step.  ``dtw`` optionally names a candidate pool
    CSV (``pool_path``, ``top_n``, ``target``) whose best matches are
    appended as covariates.
    """

    panels: list
    output_dir: str = "mbsts_out"
    components: list = field(default_factory=lambda: [dict(c) for c in DEFAULT_COMPONENTS])
    prior: dict = field(default_factory=dict)
    mcmc: dict = field(default_factory=dict)
    horizons: list = field(default_factory=list)
    ppc: dict = field(default_factory=dict)
    dtw: dict | None = None
    alpha: float = 0.05
    base_dir: str = "."

    _PRIOR_KEYS = {"rho", "h", "k", "g", "pi", "sr_multiplier", "coef_cov"}
    _MCMC_KEYS = {"niter", "burn_in", "seed", "kappa"}

    def __post_init__(self):
        if not self.panels:
            raise ValidationError("config lists no panels")
        for entry in self.panels:
            if "path" not in entry or "schema" not in entry:
                raise ValidationError("each panel needs 'path' and 'schema'")
            if not self.resolve(entry["path"]).exists():
                raise ValidationError(f"panel file not found: {entry['path']}")
        bad = set(self.prior) - self._PRIOR_KEYS
        if bad:
            raise ValidationError(f"unknown prior keys {sorted(bad)}")
        bad = set(self.mcmc) - self._MCMC_KEYS
        if bad:
            raise ValidationError(f"unknown mcmc keys {sorted(bad)}")
        if list(self.horizons) != sorted(set(int(h) for h in self.horizons)) or any(
                h < 1 for h in self.horizons):
            raise ValidationError("horizons must be positive, unique and ascending")
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        self.specs  # validates the components
        MCMCConfig(**self.mcmc)
        if self.dtw is not None:
            if "pool_path" not in self.dtw:
                raise ValidationError("dtw settings need 'pool_path'")
            if not self.resolve(self.dtw["pool_path"]).exists():
                raise ValidationError(f"dtw pool file not found: {self.dtw['pool_path']}")

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> RunConfig:
        known = {f for f in cls.__dataclass_fields__ if not f.startswith("_")}
        bad = set(data) - known
        if bad:
            raise ValidationError(f"unknown config keys {sorted(bad)}")
        return cls(**{"base_dir": str(base_dir), **data})

    @classmethod
    def from_json(cls, path) -> RunConfig:
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON in {path}: {exc}") from exc
        data.setdefault("base_dir", str(path.parent))
        return cls.from_dict(data)

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def out(self) -> Path:
        return self.resolve(self.output_dir)

    @property
    def seed(self) -> int:
        return int(self.mcmc.get("seed", 0))

    @property
    def specs(self) -> list:
        return [spec_from_dict(c) for c in self.components]

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, mcmc={**self.mcmc, "seed": int(seed)})

    def to_dict(self) -> dict:
        """Content that determines results (paths as given, no base dir)."""
        return {"panels": self.panels, "output_dir": self.output_dir,
                "components": self.components, "prior": self.prior, "mcmc": self.mcmc,
                "horizons": list(self.horizons), "ppc": self.ppc, "dtw": self.dtw,
                "alpha": self.alpha}


def load_config_panels(config: RunConfig) -> list:
    panels = []
    for i, entry in enumerate(config.panels):
        schema = PanelSchema.from_dict({"group_id": f"group{i + 1}", **entry["schema"]})
        panel = load_panel_csv(config.resolve(entry["path"]), schema)
        if config.dtw is not None:
            panel = _append_dtw_controls(panel, config)
        panels.append(panel)
    ids = [p.group_id for p in panels]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate group ids {ids}")
    return panels


def _append_dtw_controls(panel: TimeSeriesPanel, config: RunConfig) -> TimeSeriesPanel:
    settings = config.dtw
    pool = pd.read_csv(config.resolve(settings["pool_path"]))
    date_col = settings.get("date", "date")
    if date_col not in pool.columns:
        raise ValidationError(f"dtw pool lacks date column {date_col!r}")
    pool.index = pd.DatetimeIndex(pd.to_datetime(pool.pop(date_col)))
    try:
        pool = pool.loc[panel.dates]
    except KeyError as exc:
        raise ValidationError("dtw pool does not cover every panel date") from exc
    if pool.isna().any().any():
        raise ValidationError("dtw pool has missing cells")
    target_name = settings.get("target", panel.outcome_names[0])
    if target_name not in panel.outcome_names:
        raise ValidationError(f"dtw target {target_name!r} is not an outcome")
    target = panel.Y_pre[:, panel.outcome_names.index(target_name)]
    cand = pool.to_numpy(dtype=float)
    top_n = int(settings.get("top_n", min(10, cand.shape[1])))
    idx, _ = dtw_preselect_controls(target, list(cand[: panel.t_star].T), top_n)
    names = [pool.columns[i] for i in idx]
    X = cand[:, idx] if panel.X is None or panel.P == 0 else np.hstack([panel.X, cand[:, idx]])
    return TimeSeriesPanel(Y=panel.Y, X=X, t_star=panel.t_star, dates=panel.dates,
                           group_id=panel.group_id, outcome_names=panel.outcome_names,
                           covariate_names=list(panel.covariate_names) + names,
                           frozen=list(panel.frozen) + [False] * len(names))


def _panel_specs(config: RunConfig, panel: TimeSeriesPanel) -> list:
    specs = []
    for s in config.specs:
        if isinstance(s, Regression):
            if panel.P == 0:
                continue
            s = Regression(panel.P, s.selection)
        specs.append(s)
    return specs


def _prior(config: RunConfig, panel: TimeSeriesPanel, overrides=None):
    p = {**config.prior, **(overrides or {})}
    return default_priors(panel, rho_prior=p.get("rho", 0.0), h=p.get("h", 1.0), k=p.get("k", 1.0),
                          pi=p.get("pi", 0.5), g=p.get("g", 1.0),
                          sr_multiplier=p.get("sr_multiplier", 1.0),
                          coef_cov=p.get("coef_cov", "zellner"))


def _group_seeds(config: RunConfig, index: int):
    """Independent (fit, forecast, replicate) seeds for group ``index``."""
    ss = np.random.SeedSequence([config.seed, index])
    return [int(s) for s in ss.generate_state(3)]


def fit_panel(config: RunConfig, panel: TimeSeriesPanel, index: int, prior_overrides=None,
              store_states: str = "all") -> McmcDraws:
    fit_seed = _group_seeds(config, index)[0]
    mcmc = MCMCConfig(**{**config.mcmc, "seed": fit_seed, "store_states": store_states})
    return run_gibbs(panel, _panel_specs(config, panel), _prior(config, panel, prior_overrides),
                     mcmc)


def panel_effects(config: RunConfig, panel: TimeSeriesPanel, draws: McmcDraws,
                  index: int) -> tuple:
    """Counterfactual draws (S, K, d) and effect draws for one group."""
    fc_seed = _group_seeds(config, index)[1]
    K = panel.n - panel.t_star
    X_post = panel.X_post if panel.P and draws.beta.shape[1] else None
    cf = forecast_counterfactual(draws, X_post, K, rng=fc_seed)
    return cf, effect_draws(panel.Y_post, cf, t_star=panel.t_star)


def _horizons(config: RunConfig, K: int) -> list:
    hs = list(config.horizons) or list(range(1, K + 1))
    if hs[-1] > K:
        raise ValidationError(f"horizon {hs[-1]} exceeds post-period length {K}")
    return hs


def _effect_tables(eff: EffectDraws, horizons, alpha, names) -> dict:
    out = {}
    for kind in ("pointwise", "cumulative", "temporal_average"):
        s = eff.summary(kind=kind, horizons=horizons, alpha=alpha, series_names=names)
        out[kind] = s.table
    return out


def _band_table(dates, arr_draws, alpha, names, observed=None) -> pd.DataFrame:
    mean = arr_draws.mean(axis=0)
    lo, hi = np.quantile(arr_draws, [alpha / 2, 1 - alpha / 2], axis=0)
    K, d = mean.shape
    df = pd.DataFrame({"time": np.tile(np.asarray(dates.strftime("%Y-%m-%d")), d),
                       "series": np.repeat(names, K)})
    if observed is not None:
        df["observed"] = observed.T.ravel()
    df["mean"], df["lo"], df["hi"] = mean.T.ravel(), lo.T.ravel(), hi.T.ravel()
    return df


@dataclass
class PipelineResult:
    output_dir: Path
    files: dict
    effects: dict
    manifest: dict


SECTIONS = ("effects", "ppc")


def _emit_effects(emit, config, panel, cf, eff):
    gid, names = panel.group_id, panel.outcome_names
    hs = _horizons(config, eff.horizon)
    for kind, table in _effect_tables(eff, hs, config.alpha, names).items():
        emit(f"{gid}/effects_{kind}.csv", table)
    post_dates = panel.dates[panel.t_star:]
    emit(f"{gid}/plot_effect.csv", _band_table(post_dates, eff.pointwise, config.alpha, names))
    emit(f"{gid}/plot_counterfactual.csv",
         _band_table(post_dates, cf, config.alpha, names, observed=panel.Y_post))


def _emit_diagnostics(emit, config, panel, draws, seed):
    gid, names = panel.group_id, panel.outcome_names
    ppc_cfg = config.ppc
    reps = replicate_insample(draws, panel.X_pre if draws.beta.shape[1] else None, rng=seed)
    L = int(ppc_cfg.get("max_lag", min(20, panel.t_star - 2)))
    report = ppc_report(panel, draws, reps, L=L,
                        statistics=tuple(ppc_cfg.get("statistics", ("max",))))
    emit(f"{gid}/ppc_pvalues.csv", report.p_values)
    emit(f"{gid}/ppc_overlay.csv", report.overlay)
    emit(f"{gid}/ppc_qq.csv", report.qq)
    emit(f"{gid}/ppc_acf.csv", report.acf.assign(band=report.band))
    emit(f"{gid}/geweke.csv", geweke_table(draws, names))
    if draws.beta.shape[1]:
        emit(f"{gid}/inclusion.csv", pd.DataFrame({
            "covariate": panel.covariate_names,
            "inclusion_probability": draws.inclusion_probabilities}))


def run_pipeline(config: RunConfig, draws_cache: dict | None = None,
                 sections=SECTIONS) -> PipelineResult:
    """Fit, forecast, estimate effects and diagnostics for every group.

    ``draws_cache`` maps group ids to previously fitted draws; ``sections``
    picks which tables to write.
    """
    sections = tuple(sections)
    if not sections or set(sections) - set(SECTIONS):
        raise ValidationError(f"sections must be a non-empty subset of {SECTIONS}")
    panels = load_config_panels(config)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    files, effects, seeds = {}, {}, {}

    def emit(rel, df):
        files[rel] = write_table(df, out / rel)

    for i, panel in enumerate(panels):
        gid = panel.group_id
        draws = (draws_cache or {}).get(gid) or fit_panel(config, panel, i)
        seeds[gid] = dict(zip(("fit", "forecast", "replicate"), _group_seeds(config, i)))
        if "effects" in sections:
            cf, eff = panel_effects(config, panel, draws, i)
            effects[gid] = eff
            _emit_effects(emit, config, panel, cf, eff)
        if "ppc" in sections:
            _emit_diagnostics(emit, config, panel, draws, seeds[gid]["replicate"])

    if len(effects) > 1:
        shapes = {e.temporal_average.shape for e in effects.values()}
        if len(shapes) == 1:
            pooled = meta_analysis_summary(effects.values())
            hs = _horizons(config, pooled.horizon)
            emit("meta_analysis.csv", pooled.summary(horizons=hs, alpha=config.alpha,
                                                     series_names=panels[0].outcome_names).table)
        else:
            logger.warning("groups differ in shape; meta-analysis skipped")

    manifest = {
        "package_version": __version__, "config": config.to_dict(),
        "config_hash": config_hash(config.to_dict()), "seed": config.seed, "group_seeds": seeds,
        "sections": list(sections), "files": {rel: file_sha256(p) for rel, p in sorted(files.items())}}
    name = "manifest.json" if sections == SECTIONS else f"manifest_{'_'.join(sections)}.json"
    files[name] = write_json(manifest, out / name)
    return PipelineResult(output_dir=out, files=files, effects=effects, manifest=manifest)


def fit_and_save(config: RunConfig) -> dict:
    """Fit every group and store its draws under ``<output>/<group>/draws``."""
    out = {}
    for i, panel in enumerate(load_config_panels(config)):
        draws = fit_panel(config, panel, i)
        kappa = float(config.mcmc.get("kappa", MCMCConfig().kappa))
        out[panel.group_id] = save_draws(draws, config.out / panel.group_id / "draws", kappa)
    write_json({"config": config.to_dict(), "config_hash": config_hash(config.to_dict())},
               config.out / "fit_manifest.json")
    return out


def load_saved_draws(config: RunConfig) -> dict:
    return {p.group_id: load_draws(config.out / p.group_id / "draws")
            for p in load_config_panels(config)}


SWEEP_KEYS = ("h", "k", "rho", "sr_multiplier")


def _grid_points(grid: dict) -> list:
    if not grid:
        raise ValidationError("sweep grid is empty")
    bad = set(grid) - set(SWEEP_KEYS)
    if bad:
        raise ValidationError(f"unknown sweep keys {sorted(bad)}")
    keys = [k for k in SWEEP_KEYS if k in grid]
    values = [list(grid[k]) if isinstance(grid[k], (list, tuple)) else [grid[k]] for k in keys]
    if any(len(v) == 0 for v in values):
        raise ValidationError("sweep grid has an empty axis")
    for k, vs in zip(keys, values):
        for v in vs:
            if k == "rho" and not -1 < v < 1:
                raise ValidationError(f"rho={v} outside (-1, 1)")
            if k != "rho" and v <= 0:
                raise ValidationError(f"{k}={v} must be positive")
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def sensitivity_sweep(config: RunConfig, grid: dict) -> pd.DataFrame:
    """Temporal-average effect summaries for every prior grid point.

    Every point reuses the same seeds, so differences between rows reflect
    the prior alone.  Returns a stacked table tagged with the grid values.
    """
    points = _grid_points(grid)
    panels = load_config_panels(config)
    tables = []
    for point in points:
        for i, panel in enumerate(panels):
            draws = fit_panel(config, panel, i, prior_overrides=point, store_states="last")
            _, eff = panel_effects(config, panel, draws, i)
            hs = _horizons(config, eff.horizon)
            t = eff.summary(horizons=hs, alpha=config.alpha,
                            series_names=panel.outcome_names).table
            base = {k: config.prior.get(k, 1.0 if k != "rho" else 0.0) for k in SWEEP_KEYS}
            tags = {**base, **point}
            t.insert(0, "group", panel.group_id)
            for j, k in enumerate(SWEEP_KEYS):
                t.insert(1 + j, k, float(tags[k]))
            tables.append(t)
    return pd.concat(tables, ignore_index=True)


def write_sweep(config: RunConfig, grid: dict, path=None) -> Path:
    table = sensitivity_sweep(config, grid)
    path = Path(path) if path else config.out / "sweep.csv"
    write_table(table, path)
    write_json({"config": config.to_dict(), "config_hash": config_hash(config.to_dict()),
                "grid": grid, "table_sha256": file_sha256(path)},
               path.with_name(path.stem + "_manifest.json"))
    return path


__all__ = ["RunConfig", "run_pipeline", "sensitivity_sweep", "fit_and_save", "load_saved_draws",
           "PipelineResult", "write_sweep", "canonical_json"]
