"""Table emission, draw persistence and run manifests.

Everything written here is byte-deterministic: CSV floats use the shortest
round-trip representation, JSON keys are sorted, draws are stored as plain
``.npy`` files (no archive timestamps), and manifests carry no wall-clock
times.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

from .components import LocalLevelTrend, Regression, Seasonal, assemble_system
from .exceptions import ValidationError
from .gibbs import McmcDraws

_COMPONENTS = {"trend": LocalLevelTrend, "seasonal": Seasonal, "regression": Regression}


def write_table(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    return path


def read_table(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj), encoding="utf-8")
    return path


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def spec_to_dict(spec) -> dict:
    return {"type": spec.name, **asdict(spec)}


def spec_from_dict(entry: dict):
    entry = dict(entry)
    kind = entry.pop("type", None)
    if kind not in _COMPONENTS:
        raise ValidationError(f"unknown component type {kind!r}; expected one of {sorted(_COMPONENTS)}")
    if kind == "regression":
        # the covariate count comes from the panel when omitted
        entry.setdefault("n_covariates", 0)
    try:
        return _COMPONENTS[kind](**entry)
    except TypeError as exc:
        raise ValidationError(f"bad {kind} component: {exc}") from exc


_DRAW_ARRAYS = ("states", "beta", "rho", "sigma_eps", "sigma_r")


def save_draws(draws: McmcDraws, directory, kappa: float) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in _DRAW_ARRAYS:
        np.save(directory / f"{name}.npy", getattr(draws, name), allow_pickle=False)
    meta = {"t_star": draws.t_star, "seed": draws.seed, "burn_in": draws.burn_in,
            "d": draws.system.d, "kappa": kappa,
            "specs": [spec_to_dict(s) for s in draws.specs]}
    write_json(meta, directory / "meta.json")
    return directory


def load_draws(directory) -> McmcDraws:
    directory = Path(directory)
    if not (directory / "meta.json").exists():
        raise ValidationError(f"no saved draws in {directory}")
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    arrays = {name: np.load(directory / f"{name}.npy", allow_pickle=False) for name in _DRAW_ARRAYS}
    specs = [spec_from_dict(s) for s in meta["specs"]]
    system = assemble_system(specs, meta["d"], np.eye(meta["d"]), 1.0, kappa=meta["kappa"])
    return McmcDraws(system=system, t_star=meta["t_star"], seed=meta["seed"],
                     burn_in=meta["burn_in"], specs=specs, **arrays)
