"""Simulation study: recover known urn weights over a grid of scenarios.

RMSE convention: the mean, over replications, of the Euclidean norm of
(posterior mean - true weights), both on the unit simplex.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng as rngmod
from .abc import PriorConfig, abc_rejection, calibrate_tolerance, simulate_dataset

CONFIGS = ("uniform", "increasing-increasing", "increasing-decreasing")
DEFAULT_C = (2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20)
DEFAULT_K = (5, 50, 1000)
RMSE_NOTE = "RMSE = mean over replications of ||posterior mean - true omega||_2, both normalised to sum to 1"


@dataclass(frozen=True)
class ScenarioConfig:
    c: int
    k: int
    config: str = "increasing-decreasing"
    replications: int = 20
    quantile: float = 0.05
    T: int = 1000
    seed: int = 0
    pilot_size: int = 100_000
    uniform_m: int = 5
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.c < 2:
            raise ValueError(f"c must be at least 2, got {self.c}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.config not in CONFIGS:
            raise ValueError(f"unknown configuration {self.config!r}; choose from {', '.join(CONFIGS)}")


@dataclass
class ReplicationRecord:
    replication: int
    seed: int
    epsilon: float
    attempts: int
    accepted: int
    acceptance_rate: float
    posterior_mean: list[float]
    error_norm: float
    ranking_recovered: bool | None


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rmse: float
    acceptance_rate: float
    records: list[ReplicationRecord] = field(default_factory=list)

    @property
    def total_attempts(self) -> int:
        return sum(r.attempts for r in self.records)


def scenario_urn(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    c = config.c
    if config.config == "uniform":
        return np.full(c, config.uniform_m, dtype=np.int64), np.full(c, 1.0 / c)
    m = np.arange(1, c + 1, dtype=np.int64)
    w = np.arange(1, c + 1, dtype=float)
    if config.config == "increasing-decreasing":
        w = w[::-1].copy()
    return m, w / w.sum()


def replication_seed(config: ScenarioConfig, r: int) -> int:
    entropy = [config.seed, rngmod.REPLICATION, config.c, config.k, CONFIGS.index(config.config), r]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _strict_order(w: np.ndarray) -> np.ndarray | None:
    order = np.argsort(-w, kind="stable")
    return order if np.all(np.diff(w[order]) < 0) else None


def run_replication(config: ScenarioConfig, r: int, threads: int = 1) -> ReplicationRecord:
    m, omega = scenario_urn(config)
    n = int(m.sum()) // 2
    seed = replication_seed(config, r)
    prior = PriorConfig(config.alpha)
    data = simulate_dataset(m, omega, [n] * config.k, rngmod.stream(seed, rngmod.DATA))
    cal = calibrate_tolerance(data, prior, config.pilot_size, config.quantile, seed, threads)
    sample = abc_rejection(data, prior, cal.epsilon, config.T, seed=seed, threads=threads)
    mean = sample.draws.mean(axis=0)
    truth = _strict_order(omega)
    recovered = None
    if truth is not None:
        est = _strict_order(mean)
        recovered = est is not None and bool(np.array_equal(est, truth))
    return ReplicationRecord(
        replication=r,
        seed=seed,
        epsilon=cal.epsilon,
        attempts=sample.attempts,
        accepted=sample.T,
        acceptance_rate=sample.acceptance_rate,
        posterior_mean=mean.tolist(),
        error_norm=float(np.linalg.norm(mean - omega)),
        ranking_recovered=recovered,
    )


def run_scenario(config: ScenarioConfig, threads: int = 1, detail_path=None) -> ScenarioResult:
    records = [run_replication(config, r, threads) for r in range(config.replications)]
    result = ScenarioResult(
        config=config,
        rmse=float(np.mean([rec.error_norm for rec in records])),
        acceptance_rate=float(np.mean([rec.acceptance_rate for rec in records])),
        records=records,
    )
    if detail_path is not None:
        with open(detail_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")
    return result


def cell_name(config: ScenarioConfig) -> str:
    return f"{config.config}_c{config.c}_k{config.k}"


def run_grid(
    base: ScenarioConfig,
    configs: Sequence[str] = CONFIGS,
    cs: Sequence[int] = DEFAULT_C,
    ks: Sequence[int] = DEFAULT_K,
    out_dir=None,
    threads: int = 1,
) -> list[ScenarioResult]:
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "replications").mkdir(parents=True, exist_ok=True)
    results = []
    for tag in configs:
        for c in cs:
            for k in ks:
                cfg = replace(base, config=tag, c=c, k=k)
                detail = out / "replications" / f"{cell_name(cfg)}.jsonl" if out is not None else None
                results.append(run_scenario(cfg, threads, detail))
    if out is not None:
        write_grid_csv(results, out / "grid.csv")
        (out / "tables.txt").write_text(format_tables(results), encoding="utf-8")
    return results


def write_grid_csv(results: Iterable[ScenarioResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c", "k", "config", "rmse", "acc_rate", "attempts", "detail"])
        for res in results:
            cfg = res.config
            w.writerow([
                cfg.c, cfg.k, cfg.config, f"{res.rmse:.6f}", f"{res.acceptance_rate:.6f}",
                res.total_attempts, f"replications/{cell_name(cfg)}.jsonl",
            ])


def format_tables(results: Sequence[ScenarioResult]) -> str:
    """One block per configuration: rows are c, column pairs are (RMSE, acc. rate) per k."""
    blocks = [RMSE_NOTE]
    by_cfg: dict[str, dict[tuple[int, int], ScenarioResult]] = {}
    for res in results:
        by_cfg.setdefault(res.config.config, {})[(res.config.c, res.config.k)] = res
    for tag, cells in by_cfg.items():
        cs = sorted({c for c, _ in cells})
        ks = sorted({k for _, k in cells})
        reps = next(iter(cells.values())).config.replications
        lines = [f"\n{tag} ({reps} replications)"]
        lines.append(f"{'':>4} |" + "|".join(f"{'k=' + str(k):^19}" for k in ks))
        lines.append(f"{'c':>4} |" + "|".join(f"{'RMSE':>9}{'acc.rate':>10}" for _ in ks))
        lines.append("-" * len(lines[-1]))
        for c in cs:
            cells_txt = []
            for k in ks:
                res = cells.get((c, k))
                cells_txt.append(f"{res.rmse:>9.4f}{res.acceptance_rate:>10.4f}" if res else f"{'':>19}")
            lines.append(f"{c:>4} |" + "|".join(cells_txt))
        blocks.append("\n".join(lines))
    return "\n".join(blocks) + "\n"
