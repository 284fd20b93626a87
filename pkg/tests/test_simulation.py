import numpy as np
import pandas as pd
import pytest

from mbsts import MCMCConfig, SimulationDesign, ValidationError, generate_synthetic_panel
from mbsts import run_coverage_study
from mbsts.simulation import (PAPER_EFFECT_SIZES, effect_label, generate_covariates,
                              score_forecast)


def test_calendar():
    d = SimulationDesign()
    assert d.dates[0] == pd.Timestamp("2018-01-01") and d.dates[-1] == pd.Timestamp("2019-06-30")
    assert d.dates[d.t_star] == pd.Timestamp("2019-01-02")
    assert d.horizon_steps == [31, 90, 180]


def test_paper_effect_grid():
    assert PAPER_EFFECT_SIZES[0] == (1.01, 0.99) and PAPER_EFFECT_SIZES[-1] == (2.0, 0.1)
    assert effect_label((1.1, 0.9)) == "(1.10,0.90)"


def test_null_effect_observed_equals_counterfactual():
    data = generate_synthetic_panel(SimulationDesign(), rng=3)
    np.testing.assert_array_equal(data.panel.Y, data.counterfactual)
    np.testing.assert_array_equal(data.true_effect, 0.0)


def test_multiplicative_effect():
    data = generate_synthetic_panel(SimulationDesign(), rng=3, effect=(1.10, 0.90))
    t = data.panel.t_star
    ratio = data.panel.Y[t:] / data.counterfactual[t:]
    np.testing.assert_allclose(ratio, [[1.10, 0.90]] * ratio.shape[0])
    np.testing.assert_array_equal(data.panel.Y[:t], data.counterfactual[:t])


def test_same_seed_same_panel():
    a = generate_synthetic_panel(SimulationDesign(), rng=11)
    b = generate_synthetic_panel(SimulationDesign(), rng=11)
    np.testing.assert_array_equal(a.panel.Y, b.panel.Y)


def test_covariate_generators():
    d = SimulationDesign()
    X = generate_covariates(d, 200_000, np.random.default_rng(0))
    # X1 alternates around 1/2; X2 ~ N(2, 0.3)
    assert X[:, 1].mean() == pytest.approx(2.0, abs=0.01)
    assert X[:, 1].std() == pytest.approx(0.3, abs=0.01)
    assert X[:, 0].mean() == pytest.approx(0.5, abs=0.01)
    x1 = X[:, 0]
    resid = x1[1:] - (1 - x1[:-1])
    assert resid.std() == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("kw", [dict(coverage_mode="both"), dict(n_datasets=0),
                                dict(intervention="2017-01-01"), dict(models=("M3",)),
                                dict(effect_sizes=((1.0,),))])
def test_design_validation(kw):
    with pytest.raises(ValidationError):
        SimulationDesign(**kw)


def test_effect_validation():
    with pytest.raises(ValidationError):
        generate_synthetic_panel(SimulationDesign(), effect=(1.0, -1.0))


def test_score_forecast_modes():
    # four draws, two steps, one series; truth is zero counterfactual noise
    y_cf = np.array([[10.0], [10.0]])
    cf = np.array([[[9.0], [11.0]], [[10.0], [10.0]], [[11.0], [9.0]], [[10.0], [12.0]]])
    recs = score_forecast(cf, y_cf, (1.5,), [2], alpha=0.5)
    (r,) = recs
    assert r["truth"] == pytest.approx(5.0)
    for key in ("coverage_pointwise", "coverage_average", "coverage_pointwise_vs_average"):
        assert 0 <= r[key] <= 100
    assert r["coverage"] == r["coverage_pointwise"]
    with pytest.raises(ValidationError):
        score_forecast(cf, y_cf, (1.5,), [2], coverage_mode="nope")


def test_single_dataset_coverage_is_degenerate():
    design = SimulationDesign(n_datasets=1, effect_sizes=((1.0, 1.0),), models=("M1",),
                              horizons_months=(1,), coverage_mode="average")
    rep = run_coverage_study(design, MCMCConfig(niter=20, burn_in=5, seed=1))
    assert set(rep.table.coverage) <= {0.0, 100.0}
    assert set(rep.table.detection) <= {0.0, 100.0}
    assert (rep.table.coverage_sem == 0).all()
    row = rep.cell("M1", (1.0, 1.0), 1, "Y1")
    assert row.n_datasets == 1


def test_study_is_deterministic():
    design = SimulationDesign(n_datasets=2, effect_sizes=((1.1, 0.9),), models=("M2",),
                              horizons_months=(1,))
    cfg = MCMCConfig(niter=15, burn_in=3, seed=4)
    a = run_coverage_study(design, cfg)
    b = run_coverage_study(design, cfg)
    pd.testing.assert_frame_equal(a.records, b.records)
