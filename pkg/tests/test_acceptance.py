"""Acceptance suite: one recorded pass/fail line per criterion."""

import json
import time

import numpy as np
import pytest

from wallenius_abc import cli
from wallenius_abc import rng as rngmod
from wallenius_abc.abc import Dataset, PriorConfig, abc_rejection, posterior_summaries, simulate_dataset
from wallenius_abc.bench import ScenarioConfig, run_scenario
from wallenius_abc.ingest import journals_map, write_frequency_csv
from wallenius_abc.urn import (
    DrawState,
    enumerate_support,
    exact_pmf_by_enumeration,
    hypergeom_pmf,
    make_urn,
    next_draw_probs,
    wallenius_pmf,
)


def random_urn(g, max_c=4, max_m=6, weights=None):
    c = int(g.integers(2, max_c + 1))
    m = g.integers(1, max_m + 1, size=c)
    omega = np.ones(c) if weights is None else g.uniform(*weights, size=c)
    n = int(g.integers(0, m.sum() + 1))
    return make_urn(m, omega), n


def test_c1_hypergeometric_reduction(criterion):
    g = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst, points = 0.0, 0
    for _ in range(200):
        spec, n = random_urn(g)
        for x in enumerate_support(spec, n):
            worst = max(worst, abs(wallenius_pmf(spec, x) - hypergeom_pmf(spec, x)))
            points += 1
    elapsed = time.perf_counter() - t0
    ok = criterion("1 hypergeometric reduction", worst <= 1e-10 and elapsed < 10,
                   f"max |diff| = {worst:.2e} over {points} points, {elapsed:.1f} s")
    assert ok


def test_c2_oracle_equivalence(criterion):
    g = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = worst_sum = 0.0
    for _ in range(100):
        spec, n = random_urn(g, weights=(0.1, 10.0))
        oracle = exact_pmf_by_enumeration(spec, n)
        total = 0.0
        for x, p in oracle.items():
            q = wallenius_pmf(spec, x)
            worst = max(worst, abs(q - p))
            total += q
        worst_sum = max(worst_sum, abs(total - 1))
    elapsed = time.perf_counter() - t0
    ok = criterion("2 oracle equivalence", worst <= 1e-8 and worst_sum <= 1e-8 and elapsed < 60,
                   f"max |diff| = {worst:.2e}, max |sum-1| = {worst_sum:.2e}, {elapsed:.1f} s")
    assert ok


def test_c3_scale_invariance(criterion):
    g = np.random.default_rng(3)
    worst = 0.0
    for _ in range(30):
        spec, n = random_urn(g, weights=(0.1, 10.0))
        for kappa in (1e-3, 10.0, 1e3):
            scaled = make_urn(spec.m, kappa * np.asarray(spec.omega))
            for x in enumerate_support(spec, n):
                worst = max(worst, abs(wallenius_pmf(spec, x) - wallenius_pmf(scaled, x)))
                state = DrawState(np.minimum(x.counts, np.asarray(spec.m) - 1).clip(0))
                if np.any(np.asarray(spec.m) > state.drawn):
                    diff = next_draw_probs(spec, state) - next_draw_probs(scaled, state)
                    worst = max(worst, float(np.abs(diff).max()))
    ok = criterion("3 scale invariance", worst <= 1e-10, f"max |diff| = {worst:.2e}")
    assert ok


def test_c4_sampler_fidelity(criterion):
    t0 = time.perf_counter()
    data = simulate_dataset([2, 2], [2.0, 1.0], [2] * 100_000, rngmod.stream(0, rngmod.DATA))
    elapsed = time.perf_counter() - t0
    exact = {(2, 0): 1 / 3, (1, 1): 3 / 5, (0, 2): 1 / 15}
    oracle = exact_pmf_by_enumeration(make_urn([2, 2], [2.0, 1.0]), 2)
    assert all(oracle[k] == pytest.approx(v, abs=1e-12) for k, v in exact.items())
    rows, counts = np.unique(data.counts, axis=0, return_counts=True)
    emp = {tuple(int(v) for v in r): c / data.k for r, c in zip(rows, counts)}
    tv = 0.5 * sum(abs(emp.get(x, 0.0) - p) for x, p in exact.items())
    ok = criterion("4 sampler fidelity", tv < 0.01 and elapsed < 5, f"TV = {tv:.4f}, {elapsed:.2f} s")
    assert ok


@pytest.fixture(scope="module")
def desk_study():
    cfg = ScenarioConfig(c=5, k=50, config="increasing-decreasing", replications=5,
                         T=1000, pilot_size=10_000, quantile=0.05, seed=0)
    t0 = time.perf_counter()
    res = run_scenario(cfg, threads=4)
    return res, time.perf_counter() - t0


@pytest.mark.slow
def test_c5_simulation_study(criterion, desk_study):
    res, elapsed = desk_study
    ok = criterion("5 simulation study (c=5, k=50)",
                   res.rmse <= 0.15 and 0.005 <= res.acceptance_rate <= 0.06 and elapsed < 600,
                   f"RMSE = {res.rmse:.4f}, acc. rate = {res.acceptance_rate:.4f}, {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_c6_ranking_recovery(criterion, desk_study):
    res, _ = desk_study
    hits = sum(bool(r.ranking_recovered) for r in res.records)
    means = "; ".join(" ".join(f"{v:.3f}" for v in r.posterior_mean) for r in res.records)
    ok = criterion("6 ranking recovery", hits >= 4, f"{hits}/5 strictly decreasing [{means}]")
    assert ok


def test_c7_prior_sanity(criterion):
    data = simulate_dataset([3, 3, 3, 3, 3], [0.4, 0.3, 0.1, 0.1, 0.1], [6] * 20, rngmod.stream(0, rngmod.DATA))
    sample = abc_rejection(data, PriorConfig(), 1.0, 10_000, seed=0, threads=4)
    s = posterior_summaries(sample)
    mean_err = float(np.abs(s.mean - 0.2).max())
    off = ~np.eye(5, dtype=bool)
    p_err = float(np.abs(s.exceedance[off] - 0.5).max())
    ok = criterion("7 prior sanity", mean_err <= 0.01 and p_err <= 0.02,
                   f"max |mean-1/c| = {mean_err:.4f}, max |p_ij-0.5| = {p_err:.4f}, acc. rate = {sample.acceptance_rate:.3f}")
    assert ok


@pytest.mark.slow
def test_c8_journals_pipeline(criterion, tmp_path):
    cmap = journals_map()
    m = cmap.multiplicities
    map_ok = cmap.c == 5 and m.tolist() == [45, 23, 34, 9, 13] and int(m.sum()) == 124
    truth = np.array([0.35, 0.2, 0.25, 0.1, 0.1])
    g = rngmod.stream(0, rngmod.DATA)
    n_list = g.integers(10, 21, size=174)
    data = simulate_dataset(m, truth, n_list, g, categories=list(cmap.categories))
    path = tmp_path / "journals.csv"
    write_frequency_csv(data, path)
    out = tmp_path / "fit"
    code = cli.main(["fit", "--data", str(path), "--calibrate-quantile", "0.05", "--pilot-size", "20000",
                     "-T", "1000", "--threads", "4", "--out", str(out)])
    fit = json.loads((out / "summary.json").read_text())["fits"][0]
    err = float(np.abs(np.array(fit["mean"]) - truth).max())
    ok = criterion("8 journals pipeline", map_ok and code == 0 and err <= 0.1,
                   f"m = {m.tolist()}, eps = {fit['epsilon']:.3f}, max |mean-truth| = {err:.3f}")
    assert ok


def _snapshot(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_c9_determinism(criterion, tmp_path):
    data = simulate_dataset([4, 4, 4], [0.5, 0.3, 0.2], [6] * 40, rngmod.stream(1, rngmod.DATA))
    path = tmp_path / "d.csv"
    write_frequency_csv(data, path)
    fit1, fit2 = tmp_path / "fit1", tmp_path / "fit2"
    cli.main(["fit", "--data", str(path), "--calibrate-quantile", "0.05", "--pilot-size", "2000",
              "--epsilon", "0.3", "-T", "300", "--seed", "5", "--threads", "1", "--out", str(fit1)])
    cli.main(["fit", "--manifest", str(fit1 / "manifest.json"), "--threads", "4", "--out", str(fit2)])
    b1, b2 = tmp_path / "bench1", tmp_path / "bench2"
    cli.main(["bench", "--configs", "increasing-decreasing,uniform", "--c", "3", "--k", "5", "--reps", "2",
              "-T", "50", "--pilot-size", "500", "--threads", "1", "--out", str(b1)])
    cli.main(["bench", "--manifest", str(b1 / "manifest.json"), "--threads", "4", "--out", str(b2)])
    same_fit = _snapshot(fit1) == _snapshot(fit2) and len(_snapshot(fit1)) >= 4
    same_bench = _snapshot(b1) == _snapshot(b2) and len(_snapshot(b1)) >= 4
    ok = criterion("9 determinism", same_fit and same_bench,
                   f"fit identical: {same_fit}, bench identical: {same_bench} (threads 1 vs 4)")
    assert ok
