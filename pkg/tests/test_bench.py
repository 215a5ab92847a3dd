import json

import numpy as np
import pytest

from wallenius_abc import bench
from wallenius_abc.abc import PosteriorSample
from wallenius_abc.bench import ScenarioConfig, run_grid, run_scenario, scenario_urn

QUICK = dict(replications=2, T=50, pilot_size=500)


def test_scenario_urn_increasing_decreasing():
    m, w = scenario_urn(ScenarioConfig(c=3, k=1, config="increasing-decreasing"))
    assert m.tolist() == [1, 2, 3]
    np.testing.assert_allclose(w, [3 / 6, 2 / 6, 1 / 6])


def test_scenario_urn_uniform():
    m, w = scenario_urn(ScenarioConfig(c=4, k=1, config="uniform"))
    assert m.tolist() == [5, 5, 5, 5]
    np.testing.assert_allclose(w, 0.25)


def test_scenario_urn_increasing_increasing():
    m, w = scenario_urn(ScenarioConfig(c=2, k=1, config="increasing-increasing"))
    assert m.tolist() == [1, 2]
    np.testing.assert_allclose(w, [1 / 3, 2 / 3])


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(c=1, k=5)
    with pytest.raises(ValueError):
        ScenarioConfig(c=3, k=5, config="decreasing")
    with pytest.raises(ValueError):
        ScenarioConfig(c=3, k=5, replications=0)


def test_run_scenario_deterministic():
    cfg = ScenarioConfig(c=3, k=5, **QUICK)
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.rmse == b.rmse and a.records == b.records
    for rec in a.records:
        assert 0 < rec.acceptance_rate <= 1
        assert rec.acceptance_rate == rec.accepted / rec.attempts
    assert a.total_attempts == sum(r.attempts for r in a.records)


def test_half_the_urn_is_drawn(monkeypatch):
    seen = []
    real = bench.simulate_dataset

    def spy(m, omega, n_list, rng, *a):
        seen.append((int(np.sum(m)), set(n_list)))
        return real(m, omega, n_list, rng, *a)

    monkeypatch.setattr(bench, "simulate_dataset", spy)
    run_scenario(ScenarioConfig(c=4, k=3, config="increasing-increasing", **QUICK))
    assert seen == [(10, {5}), (10, {5})]
    seen.clear()
    run_scenario(ScenarioConfig(c=5, k=3, **QUICK))
    assert seen[0] == (15, {7})


def test_exact_recovery_gives_zero_rmse(monkeypatch):
    cfg = ScenarioConfig(c=3, k=4, **QUICK)
    _, truth = scenario_urn(cfg)

    def oracle(data, prior, eps, T, *a, **kw):
        return PosteriorSample(np.tile(truth, (T, 1)), attempts=2 * T, epsilon=eps, seed=0)

    monkeypatch.setattr(bench, "abc_rejection", oracle)
    res = run_scenario(cfg)
    assert res.rmse == pytest.approx(0.0, abs=1e-12)
    assert res.acceptance_rate == 0.5
    assert all(r.ranking_recovered for r in res.records)


def test_uniform_two_colours_rmse():
    res = run_scenario(ScenarioConfig(c=2, k=50, config="uniform", replications=5, T=300, pilot_size=2000))
    for rec in res.records:
        np.testing.assert_allclose(rec.posterior_mean, 0.5, atol=0.1)
        assert rec.ranking_recovered is None
    assert res.rmse <= 0.1


def test_grid_outputs(tmp_path):
    base = ScenarioConfig(c=2, k=1, **QUICK)
    results = run_grid(base, ["increasing-decreasing"], [2, 3], [5], tmp_path)
    assert len(results) == 2
    rows = (tmp_path / "grid.csv").read_text().splitlines()
    assert rows[0] == "c,k,config,rmse,acc_rate,attempts,detail"
    assert rows[1].startswith("2,5,increasing-decreasing,")
    detail = tmp_path / "replications" / "increasing-decreasing_c3_k5.jsonl"
    recs = [json.loads(line) for line in detail.read_text().splitlines()]
    assert [r["replication"] for r in recs] == [0, 1]
    tables = (tmp_path / "tables.txt").read_text()
    assert tables.startswith(bench.RMSE_NOTE)
    assert "increasing-decreasing (2 replications)" in tables


def test_default_grid_shape():
    assert len(bench.CONFIGS) * len(bench.DEFAULT_C) * len(bench.DEFAULT_K) == 3 * 11 * 3
    assert bench.DEFAULT_C == (2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20)
    assert bench.DEFAULT_K == (5, 50, 1000)
