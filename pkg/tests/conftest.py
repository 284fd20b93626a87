from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from mbsts import McmcDraws, StateSpaceSystem, TimeSeriesPanel


def random_spd(rng, d, scale=1.0, jitter=0.1):
    A = rng.standard_normal((d, d))
    return scale * (A @ A.T / d + jitter * np.eye(d))


def random_system(rng, d=None, m=None, time_varying=False, n=None):
    """A small random system with free covariances (d <= 3, m <= 6)."""
    d = d or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 7))
    r = int(rng.integers(1, m + 1))
    if time_varying:
        Z = rng.standard_normal((n, 1, m))
        T = 0.9 * rng.standard_normal((n, m, m)) / np.sqrt(m)
        R = rng.standard_normal((n, m, r))
    else:
        Z = rng.standard_normal((1, m))
        T = 0.9 * rng.standard_normal((m, m)) / np.sqrt(m)
        R = rng.standard_normal((m, r))
    Sigma = random_spd(rng, d)
    sys = StateSpaceSystem(Z=Z, T=T, R=R, H=1.0, C=np.ones(r), Sigma=Sigma,
                           a1=rng.standard_normal((m, d)), P1=random_spd(rng, m, 2.0))
    state_covs = np.stack([random_spd(rng, d, 0.5) for _ in range(r)])
    return sys.with_covariances(random_spd(rng, d, 0.8), state_covs, Sigma=Sigma)


def make_panel(Y, X=None, t_star=None, **kw):
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    X = np.zeros((n, 0)) if X is None else np.asarray(X, dtype=float)
    kw.setdefault("min_pre", 3)
    return TimeSeriesPanel(Y=Y, X=X, t_star=t_star or n - 1, **kw)


def fixed_draws(system, states, beta=None, S=None):
    """Draws that all carry the system's own covariances."""
    states = np.asarray(states, dtype=float)
    S = S or states.shape[0]
    d, r = system.d, system.r
    P = 0 if beta is None else np.shape(beta)[0]
    beta = np.zeros((P, d)) if beta is None else np.asarray(beta, dtype=float)
    return McmcDraws(states=states, beta=np.broadcast_to(beta, (S, P, d)).copy(),
                     rho=np.ones((S, P), dtype=bool),
                     sigma_eps=np.broadcast_to(system.sigma_eps, (S, d, d)).copy(),
                     sigma_r=np.broadcast_to(system.sigma_r, (S, r, d, d)).copy(),
                     system=system, t_star=states.shape[1], seed=0, burn_in=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def write_panel_csv(path, n=80, t_star=60, effect=0.0, seed=0, d=2):
    """Local level + weekly panel with one covariate, written as CSV."""
    g = np.random.default_rng(seed)
    level = 50 + np.cumsum(g.normal(0, 0.5, (n, d)), axis=0)
    season = np.tile(g.normal(0, 1, (7, d)), (n // 7 + 1, 1))[:n]
    x = g.normal(0, 1, n)
    Y = level + season + 0.8 * x[:, None] + g.normal(0, 0.5, (n, d))
    Y[t_star:] += effect
    df = pd.DataFrame({"date": pd.date_range("2020-01-01", periods=n, freq="D")
                       .strftime("%Y-%m-%d")})
    for j in range(d):
        df[f"y{j + 1}"] = Y[:, j]
    df["x1"] = x
    df.to_csv(path, index=False)
    return df


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(cid, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
