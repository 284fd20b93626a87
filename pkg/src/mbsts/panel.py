"""The per-group data container and CSV ingestion."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DimensionError, ValidationError


@dataclass
class TimeSeriesPanel:
    """Outcomes and covariates for one group of interfering units.

    ``t_star`` is the number of pre-intervention rows: rows ``[:t_star]``
    are the fitting period and rows ``[t_star:]`` the post period.
    """

    Y: np.ndarray
    t_star: int
    X: np.ndarray | None = None
    dates: pd.DatetimeIndex | None = None
    group_id: str = "group"
    outcome_names: list = field(default_factory=list)
    covariate_names: list = field(default_factory=list)
    frozen: list = field(default_factory=list)
    min_pre: int = 3

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.ndim != 2:
            raise DimensionError("Y must be n x d")
        n, d = Y.shape
        if self.X is None or np.size(self.X) == 0:
            X = np.zeros((n, 0))
        else:
            X = np.asarray(self.X, dtype=float)
            if X.ndim == 1:
                X = X[:, None]
            if X.shape[0] != n:
                raise DimensionError(f"X has {X.shape[0]} rows, Y has {n}")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise ValidationError("panel contains missing or non-finite cells")
        t_star = int(self.t_star)
        if not self.min_pre <= t_star <= n - 1:
            raise ValidationError(f"t_star={t_star} outside [{self.min_pre}, {n - 1}]")
        if self.dates is not None:
            dates = pd.DatetimeIndex(self.dates)
            if len(dates) != n:
                raise DimensionError("dates length differs from Y")
            _check_dates(dates)
            self.dates = dates
        self.outcome_names = list(self.outcome_names) or [f"y{i + 1}" for i in range(d)]
        self.covariate_names = list(self.covariate_names) or [f"x{i + 1}" for i in range(X.shape[1])]
        frozen = list(self.frozen) or [False] * X.shape[1]
        if len(frozen) != X.shape[1]:
            raise DimensionError("frozen flags must match the covariate count")
        self.frozen = [bool(f) for f in frozen]
        if any(self.frozen):
            X = X.copy()
            idx = np.flatnonzero(self.frozen)
            X[t_star:, idx] = X[t_star - 1, idx]
        self.Y, self.X, self.t_star = Y, X, t_star

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    @property
    def P(self) -> int:
        return self.X.shape[1]

    @property
    def Y_pre(self) -> np.ndarray:
        return self.Y[:self.t_star]

    @property
    def Y_post(self) -> np.ndarray:
        return self.Y[self.t_star:]

    @property
    def X_pre(self) -> np.ndarray:
        return self.X[:self.t_star]

    @property
    def X_post(self) -> np.ndarray:
        return self.X[self.t_star:]


def _check_dates(dates: pd.DatetimeIndex):
    if len(dates) < 2:
        return
    diffs = np.diff(dates.asi8)
    if np.any(diffs <= 0):
        raise ValidationError("dates must be strictly increasing (duplicate or unsorted dates)")
    if np.any(diffs != diffs[0]):
        raise ValidationError("dates must be equally spaced (gap in dates)")


@dataclass
class PanelSchema:
    """Column roles for :func:`load_panel_csv`."""

    date: str
    outcomes: list
    covariates: list = field(default_factory=list)
    frozen: list = field(default_factory=list)
    intervention_date: str | None = None
    t_star: int | None = None
    group_id: str = "group"
    ignore: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, spec: dict) -> PanelSchema:
        return cls(**spec)


def load_panel_csv(path, schema: PanelSchema, min_pre: int = 3) -> TimeSeriesPanel:
    """Read a UTF-8 CSV with one row per date into a validated panel.

    Frozen covariates (e.g. a "prior price") are overwritten in the post
    period with their last pre-intervention value.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"panel file not found: {path}")
    df = pd.read_csv(path, encoding="utf-8")
    mapped = [schema.date, *schema.outcomes, *schema.covariates, *schema.ignore]
    missing = [c for c in mapped if c not in df.columns]
    if missing:
        raise ValidationError(f"columns missing from {path.name}: {missing}")
    unmapped = [c for c in df.columns if c not in mapped]
    if unmapped:
        raise ValidationError(f"unmapped columns in {path.name}: {unmapped}")
    unknown_frozen = [c for c in schema.frozen if c not in schema.covariates]
    if unknown_frozen:
        raise ValidationError(f"frozen columns are not covariates: {unknown_frozen}")
    used = df[[schema.date, *schema.outcomes, *schema.covariates]]
    if used.isna().any().any():
        bad = used.columns[used.isna().any()].tolist()
        raise ValidationError(f"missing cells in columns {bad}")
    dates = pd.DatetimeIndex(pd.to_datetime(df[schema.date]))
    if dates.has_duplicates:
        raise ValidationError("duplicate dates")
    _check_dates(dates)
    if schema.t_star is not None:
        t_star = int(schema.t_star)
    elif schema.intervention_date is not None:
        t_star = int(np.sum(dates < pd.Timestamp(schema.intervention_date)))
    else:
        raise ValidationError("schema needs intervention_date or t_star")
    if not min_pre <= t_star <= len(df) - 1:
        raise ValidationError(f"intervention index {t_star} outside [{min_pre}, {len(df) - 1}]")
    X = df[schema.covariates].to_numpy(dtype=float) if schema.covariates else None
    return TimeSeriesPanel(
        Y=df[schema.outcomes].to_numpy(dtype=float), X=X, t_star=t_star, dates=dates,
        group_id=schema.group_id, outcome_names=list(schema.outcomes),
        covariate_names=list(schema.covariates),
        frozen=[c in schema.frozen for c in schema.covariates], min_pre=min_pre)
