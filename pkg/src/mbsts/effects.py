"""Causal estimands computed from posterior-predictive paths.

Post-period time is indexed ``k = 1..K`` after the intervention; cumulative
sums start at the first post-intervention point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .exceptions import DimensionError, ValidationError


@dataclass(frozen=True)
class TreatmentAssignment:
    w: tuple
    label: str = ""

    def __post_init__(self):
        w = tuple(int(v) for v in self.w)
        if any(v not in (0, 1) for v in w):
            raise ValidationError("assignments must be binary")
        object.__setattr__(self, "w", w)
        if not self.label:
            object.__setattr__(self, "label", "(" + ",".join(map(str, w)) + ")")

    @property
    def d(self) -> int:
        return len(self.w)


def _key(w) -> tuple:
    return w.w if isinstance(w, TreatmentAssignment) else tuple(int(v) for v in w)


@dataclass
class EffectDraws:
    """Per-draw pointwise, cumulative and temporal-average effects, each (S, K, d)."""

    pointwise: np.ndarray
    cumulative: np.ndarray
    temporal_average: np.ndarray
    t_star: int = 0
    w: tuple | None = None
    w_tilde: tuple | None = None

    @classmethod
    def from_pointwise(cls, pointwise, t_star=0, w=None, w_tilde=None) -> EffectDraws:
        pointwise = np.asarray(pointwise, dtype=float)
        if pointwise.ndim != 3:
            raise DimensionError("pointwise effects must be draws x horizon x series")
        cumulative = np.cumsum(pointwise, axis=1)
        elapsed = np.arange(1, pointwise.shape[1] + 1)[None, :, None]
        return cls(pointwise=pointwise, cumulative=cumulative,
                   temporal_average=cumulative / elapsed, t_star=t_star, w=w, w_tilde=w_tilde)

    @property
    def horizon(self) -> int:
        return self.pointwise.shape[1]

    @property
    def n_draws(self) -> int:
        return self.pointwise.shape[0]

    def summary(self, kind: str = "temporal_average", horizons=None, alpha: float = 0.05,
                series_names=None) -> EffectSummary:
        return summarize(self, kind=kind, horizons=horizons, alpha=alpha,
                         series_names=series_names)


@dataclass
class EffectSummary:
    """Posterior mean and equal-tailed interval per horizon and series.

    ``table`` has columns horizon, series, mean, lower, upper, significant.
    """

    table: pd.DataFrame
    kind: str
    level: float

    @property
    def mean(self) -> np.ndarray:
        return self._wide("mean")

    @property
    def lower(self) -> np.ndarray:
        return self._wide("lower")

    @property
    def upper(self) -> np.ndarray:
        return self._wide("upper")

    def _wide(self, col):
        return self.table.pivot(index="horizon", columns="series", values=col).to_numpy()


def summarize(effects: EffectDraws, kind: str = "temporal_average", horizons=None,
              alpha: float = 0.05, series_names=None) -> EffectSummary:
    """Posterior means and ``1 - alpha`` equal-tailed credible intervals.

    ``horizons`` are 1-based post-period lengths; default is every step.
    """
    if kind not in ("pointwise", "cumulative", "temporal_average"):
        raise ValidationError(f"unknown effect kind {kind!r}")
    arr = getattr(effects, kind)
    K = arr.shape[1]
    horizons = list(range(1, K + 1)) if horizons is None else [int(h) for h in horizons]
    if any(h < 1 or h > K for h in horizons):
        raise ValidationError(f"horizons must lie in [1, {K}]")
    names = list(series_names) if series_names is not None else [f"y{i + 1}" for i in range(arr.shape[2])]
    idx = np.asarray(horizons) - 1
    sel = arr[:, idx, :]
    mean = sel.mean(axis=0)
    lo, hi = np.quantile(sel, [alpha / 2, 1 - alpha / 2], axis=0)
    rows = []
    for a, h in enumerate(horizons):
        for j, name in enumerate(names):
            rows.append({"horizon": h, "series": name, "mean": mean[a, j], "lower": lo[a, j],
                         "upper": hi[a, j], "significant": bool(lo[a, j] > 0 or hi[a, j] < 0)})
    table = pd.DataFrame(rows, columns=["horizon", "series", "mean", "lower", "upper", "significant"])
    return EffectSummary(table=table, kind=kind, level=1 - alpha)


def effect_draws(observed_post, counterfactual, t_star: int = 0, w=None, w_tilde=None) -> EffectDraws:
    """Effects of the observed assignment against counterfactual paths.

    ``observed_post`` is K x d (or S x K x d) and ``counterfactual`` S x K x d.
    """
    obs = np.asarray(observed_post, dtype=float)
    cf = np.asarray(counterfactual, dtype=float)
    if cf.ndim != 3:
        raise DimensionError("counterfactual must be draws x horizon x series")
    if obs.shape != cf.shape[1:] and obs.shape != cf.shape:
        raise DimensionError(f"observed shape {obs.shape} does not match {cf.shape[1:]}")
    return EffectDraws.from_pointwise(obs - cf, t_star=t_star, w=w, w_tilde=w_tilde)


def general_effect(path_draws: dict, w, w_tilde, t_star: int = 0) -> EffectDraws:
    """tau(w, w_tilde) from a map assignment -> (S, K, d) potential-outcome draws."""
    paths = {_key(k): np.asarray(v, dtype=float) for k, v in path_draws.items()}
    a, b = _key(w), _key(w_tilde)
    for key in (a, b):
        if key not in paths:
            raise ValidationError(f"assignment {key} missing from path draws")
    return EffectDraws.from_pointwise(paths[a] - paths[b], t_star=t_star, w=a, w_tilde=b)


def _contrast_pairs(d: int, i: int):
    """Ordered pairs (w, w~) with w_i = 1 and w~_i = 0."""
    treated = [w for w in itertools.product((0, 1), repeat=d) if w[i] == 1]
    control = [w for w in itertools.product((0, 1), repeat=d) if w[i] == 0]
    return [(a, b) for a in treated for b in control]


@dataclass
class MarginalEffects:
    marginal: EffectDraws
    mean_marginal: EffectDraws
    n_pairs: int


def marginal_effects(path_draws: dict, i: int, t_star: int = 0) -> MarginalEffects:
    """Marginal effect on series ``i``: sum of its general effects over all
    assignment pairs that switch unit ``i`` from 0 to 1; the mean marginal
    effect divides by the number of such pairs.  Returns (S, K) arrays
    wrapped as single-series :class:`EffectDraws`.
    """
    paths = {_key(k): np.asarray(v, dtype=float) for k, v in path_draws.items()}
    if not paths:
        raise ValidationError("empty path map")
    d = len(next(iter(paths)))
    if not 0 <= i < d:
        raise ValidationError(f"series index {i} outside [0, {d})")
    pairs = _contrast_pairs(d, i)
    missing = sorted({k for pair in pairs for k in pair if k not in paths})
    if missing:
        raise ValidationError(f"assignments missing from path draws: {missing}")
    total = sum(paths[a][..., i] - paths[b][..., i] for a, b in pairs)[..., None]
    n_pairs = len(pairs)
    return MarginalEffects(marginal=EffectDraws.from_pointwise(total, t_star=t_star),
                           mean_marginal=EffectDraws.from_pointwise(total / n_pairs, t_star=t_star),
                           n_pairs=n_pairs)


def conditional_effect(path_draws: dict, i: int, fixed_w, t_star: int = 0) -> EffectDraws:
    """Effect of switching unit ``i`` with the other units held at ``fixed_w``."""
    fixed = tuple(int(v) for v in fixed_w)
    w = fixed[:i] + (1,) + fixed[i:]
    w_tilde = fixed[:i] + (0,) + fixed[i:]
    return general_effect(path_draws, w, w_tilde, t_star=t_star)


def meta_analysis_summary(per_pair) -> EffectDraws:
    """Per-draw average of effects across groups (draws matched by index)."""
    per_pair = list(per_pair)
    if not per_pair:
        raise ValidationError("no groups to pool")
    shape = per_pair[0].temporal_average.shape
    for e in per_pair[1:]:
        if e.temporal_average.shape != shape:
            raise DimensionError("groups differ in draw count, horizon, or series count")
    pooled = EffectDraws(
        pointwise=np.mean([e.pointwise for e in per_pair], axis=0),
        cumulative=np.mean([e.cumulative for e in per_pair], axis=0),
        temporal_average=np.mean([e.temporal_average for e in per_pair], axis=0),
        t_star=per_pair[0].t_star, w=per_pair[0].w, w_tilde=per_pair[0].w_tilde)
    return pooled
