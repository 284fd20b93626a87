import numpy as np
import pytest

from mbsts import (DimensionError, LocalLevelTrend, Regression, Seasonal, ValidationError,
                   assemble_system, kalman_filter, simulate_from_system)


def test_local_level_is_scalar_system():
    sys = assemble_system([LocalLevelTrend()], d=2)
    assert sys.m == 1
    assert sys.Z.tolist() == [[1.0]] and sys.T.tolist() == [[1.0]] and sys.R.tolist() == [[1.0]]


def test_trend_plus_weekly_layout():
    sys = assemble_system([LocalLevelTrend(3.0), Seasonal(7, 2.0)], d=2)
    assert (sys.m, sys.r) == (7, 2)
    assert sys.Z.tolist() == [[1, 1, 0, 0, 0, 0, 0]]
    assert sys.block_layout == {"trend": (0, 1), "seasonal": (1, 7)}
    assert sys.T[1, 1:].tolist() == [-1.0] * 6
    np.testing.assert_array_equal(sys.T[2:, 1:6], np.eye(5))
    np.testing.assert_array_equal(np.flatnonzero(sys.R.any(axis=1)), [0, 1])
    assert sys.C.tolist() == [3.0, 2.0]


def test_layout_partitions_state_rows():
    sys = assemble_system([Seasonal(4), LocalLevelTrend(), Seasonal(3)], d=1)
    covered = sorted(i for a, b in sys.block_layout.values() for i in range(a, b))
    assert covered == list(range(sys.m))


def test_regression_only_rejected():
    with pytest.raises(ValidationError):
        assemble_system([Regression(2)], d=1)


def test_empty_and_bad_specs_rejected():
    with pytest.raises(ValidationError):
        assemble_system([], d=1)
    with pytest.raises(ValidationError):
        Seasonal(1)
    with pytest.raises(ValidationError):
        assemble_system([LocalLevelTrend()], d=2, Sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_regression_adds_no_state_rows():
    a = assemble_system([LocalLevelTrend(), Seasonal(7)], d=1)
    b = assemble_system([LocalLevelTrend(), Seasonal(7), Regression(3)], d=1)
    assert a.m == b.m == 7


def test_seasonal_sums_to_zero_without_noise():
    sys = assemble_system([Seasonal(7, 0.0)], d=2, H=0.0)
    sys = type(sys)(Z=sys.Z, T=sys.T, R=sys.R, H=0.0, C=sys.C, Sigma=sys.Sigma,
                    a1=np.arange(12.0).reshape(6, 2), P1=np.zeros((6, 6)))
    _, alpha = simulate_from_system(sys, 40, rng=0)
    gamma = alpha[:, 0, :]
    window = np.lib.stride_tricks.sliding_window_view(gamma, 7, axis=0).sum(axis=-1)
    np.testing.assert_allclose(window, 0.0, atol=1e-9)


def test_noise_free_simulation_is_propagation():
    sys = assemble_system([LocalLevelTrend(0.0), Seasonal(3, 0.0)], d=1, H=0.0)
    a1 = np.array([[5.0], [1.0], [-0.5]])
    sys = type(sys)(Z=sys.Z, T=sys.T, R=sys.R, H=0.0, C=sys.C, Sigma=sys.Sigma, a1=a1,
                    P1=np.zeros((3, 3)))
    y, _ = simulate_from_system(sys, 6, rng=1)
    expect, a = [], a1
    for _ in range(6):
        expect.append((sys.Z @ a)[0, 0])
        a = sys.T @ a
    np.testing.assert_allclose(y[:, 0], expect, atol=1e-12)


def test_observation_noise_covariance():
    Sigma = np.array([[1.0, -0.3], [-0.3, 1.0]])
    sys = assemble_system([LocalLevelTrend(0.0)], d=2, Sigma=Sigma, H=1.0)
    sys = type(sys)(Z=sys.Z, T=sys.T, R=sys.R, H=1.0, C=sys.C, Sigma=Sigma,
                    a1=np.zeros((1, 2)), P1=np.zeros((1, 1)))
    y, _ = simulate_from_system(sys, 10_000, rng=2)
    np.testing.assert_allclose(np.cov(y.T), Sigma, atol=0.02)


def test_simulation_seed_determinism():
    sys = assemble_system([LocalLevelTrend(), Seasonal(7)], d=2)
    X = np.ones((20, 1))
    a = simulate_from_system(sys, 20, beta=[[1.0, 2.0]], covariates=X, rng=3)
    b = simulate_from_system(sys, 20, beta=[[1.0, 2.0]], covariates=X, rng=3)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_simulation_dimension_checks():
    sys = assemble_system([LocalLevelTrend()], d=2)
    with pytest.raises(DimensionError):
        simulate_from_system(sys, 5, beta=[[1.0, 1.0]])
    with pytest.raises(DimensionError):
        simulate_from_system(sys, 5, beta=[[1.0, 1.0]], covariates=np.ones((4, 1)))


def test_loglik_peaks_near_truth():
    truth = dict(H=1.0, c1=1.0, c2=0.5)
    Sigma = np.array([[1.0, 0.3], [0.3, 1.0]])

    def system(H, c1, c2):
        sys = assemble_system([LocalLevelTrend(c1), Seasonal(7, c2)], d=2, Sigma=Sigma, H=H,
                              kappa=1e4)
        return sys

    gen = system(**truth)
    gen = type(gen)(Z=gen.Z, T=gen.T, R=gen.R, H=gen.H, C=gen.C, Sigma=Sigma,
                    a1=np.zeros((7, 2)), P1=np.eye(7))
    y, _ = simulate_from_system(gen, 3000, rng=5)
    grid = {(H, c1, c2): kalman_filter(system(H, c1, c2), y).loglik
            for H in (0.5, 1.0, 2.0) for c1 in (0.5, 1.0, 2.0) for c2 in (0.25, 0.5, 1.0)}
    assert max(grid, key=grid.get) == (1.0, 1.0, 0.5)
