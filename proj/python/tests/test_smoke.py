import json

import numpy as np
import pytest

import ndvicast


def test_soft_threshold():
    assert ndvicast.soft_threshold(2.5, 1.0) == 1.5
    assert ndvicast.soft_threshold(0.3, 0.5) == 0.0


def test_elastic_net_matches_least_squares():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 5))
    y = X @ np.array([1.0, -2.0, 0.0, 0.5, 3.0]) + 0.1 * rng.normal(size=30)
    cfg = ndvicast.ElasticNetConfig()
    cfg.lambda_ = 0.0
    cfg.tol = 1e-12
    model = ndvicast.elastic_net(X, y, cfg)
    A = np.c_[np.ones(30), X]
    ref = np.linalg.lstsq(A, y, rcond=None)[0]
    assert model.converged
    assert abs(model.beta0 - ref[0]) < 1e-8
    np.testing.assert_allclose(model.beta, ref[1:], atol=1e-8)
    np.testing.assert_allclose(model.predict(X), A @ ref, atol=1e-8)


def test_pca_eigenvalues_match_numpy():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 6))
    model = ndvicast.fit_pca(X)
    ref = np.sort(np.linalg.eigvalsh(np.cov(X, rowvar=False, bias=True)))[::-1]
    np.testing.assert_allclose(model.eigenvalues, ref, atol=1e-10)


def test_regpcr_fit_and_predict():
    rng = np.random.default_rng(2)
    X = 0.1 * rng.normal(size=(36, 80))
    arrivals = np.exp(6.0 + 3.0 * X[:, 4] - 2.0 * X[:, 9] + 0.01 * rng.normal(size=36))
    model = ndvicast.fit_regpcr(X, arrivals)
    assert "4" in model.selected_locations()
    pred = model.predict(X)
    assert pred.shape == (36,)
    assert np.mean(np.abs(np.log(pred) - np.log(arrivals))) < 0.1
    assert json.loads(model.to_json())["location_ids"][0] == "0"


def test_f_survival():
    assert abs(ndvicast.f_survival(3.0, 1, 1) - 1.0 / 3.0) < 1e-12


def test_arima_trend():
    model = ndvicast.arima([2.0 + 0.5 * t for t in range(20)], max_p=0, max_d=1, max_q=0, drift=True)
    np.testing.assert_allclose(model.forecast(2), [12.0, 12.5], atol=1e-9)


def test_validation_error_is_value_error():
    with pytest.raises(ValueError):
        ndvicast.fit_pca(np.zeros((1, 3)))


def test_cli_usage_error():
    code, out, err = ndvicast.run_cli(["no-such-command"])
    assert code == 2
    assert err


def test_cli_synth(tmp_path):
    code, out, _ = ndvicast.run_cli(["synth", "--out", str(tmp_path), "--n_locations", "50", "--months", "30"])
    assert code == 0
    assert (tmp_path / "ndvi.csv").exists()
    assert json.loads(out)
