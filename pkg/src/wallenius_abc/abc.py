"""ABC rejection inference for the urn weights.

Proposals are numbered ``0, 1, 2, ...``; proposal ``i`` draws its weight
vector and its pseudo-data from its own counter-based substream, so the
accepted set depends only on the master seed, never on batching or on the
number of worker threads.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import rng as rngmod
from .urn import FrequencyVector, UrnError, draw_counts, freq

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9
# elements of the (batch, respondent, ball) uniform block per work item
_BATCH_ELEMS = 2**21


class BudgetExhausted(RuntimeError):
    """Attempt budget ran out before enough draws were accepted."""

    def __init__(self, message: str, partial: "PosteriorSample | list[PosteriorSample]"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True, eq=False)
class Dataset:
    """``k`` respondents' colour counts drawn from one shared urn ``m``."""

    counts: np.ndarray
    m: np.ndarray
    categories: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        m = np.asarray(self.m, dtype=np.int64)
        if counts.ndim != 2:
            raise UrnError(f"counts must be a (k, c) matrix, got shape {counts.shape}")
        if m.shape != (counts.shape[1],):
            raise UrnError(f"dimension mismatch: {counts.shape[1]} categories, len(m)={m.size}")
        if np.any(counts < 0):
            raise UrnError("negative counts")
        bad = np.nonzero((counts > m).any(axis=1))[0]
        if bad.size:
            raise UrnError(f"respondent {int(bad[0]) + 1} exceeds the multiplicities {m.tolist()}")
        if self.categories is not None and len(self.categories) != m.size:
            raise UrnError("category names do not match the number of categories")
        counts.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "m", m)

    @classmethod
    def from_vectors(cls, observations: Sequence[FrequencyVector | Sequence[int]], m, categories=None) -> "Dataset":
        rows = [o.counts if isinstance(o, FrequencyVector) else tuple(o) for o in observations]
        c = len(m)
        return cls(np.array(rows, dtype=np.int64).reshape(len(rows), c), np.asarray(m), categories)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def c(self) -> int:
        return self.counts.shape[1]

    @property
    def n(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def observations(self) -> list[FrequencyVector]:
        return [freq(row) for row in self.counts]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.counts, other.counts)
            and np.array_equal(self.m, other.m)
            and self.categories == other.categories
        )


@dataclass(frozen=True)
class PriorConfig:
    """Symmetric Dirichlet prior on the normalised weights."""

    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"Dirichlet alpha must be positive, got {self.alpha}")

    @classmethod
    def reference(cls, c: int) -> "PriorConfig":
        return cls(1.0 / c)


@dataclass
class PosteriorSample:
    draws: np.ndarray
    attempts: int
    epsilon: float
    seed: int
    proposal_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    distances: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def T(self) -> int:
        return self.draws.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return self.T / self.attempts if self.attempts else 0.0


@dataclass
class Calibration:
    epsilon: float
    quantile: float
    distances: np.ndarray
    degenerate: bool


@dataclass
class PosteriorSummary:
    mean: np.ndarray
    sd: np.ndarray
    exceedance: np.ndarray
    T: int
    attempts: int | None = None
    epsilon: float | None = None

    @property
    def acceptance_rate(self) -> float | None:
        return self.T / self.attempts if self.attempts else None

    def as_dict(self, categories: Sequence[str] | None = None) -> dict:
        c = self.mean.size
        names = list(categories) if categories else [f"omega_{j + 1}" for j in range(c)]
        return {
            "epsilon": self.epsilon,
            "T": self.T,
            "attempts": self.attempts,
            "acceptance_rate": self.acceptance_rate,
            "categories": names,
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "exceedance": [[None if i == j else float(self.exceedance[i, j]) for j in range(c)] for i in range(c)],
        }

    def table(self, categories: Sequence[str] | None = None) -> str:
        c = self.mean.size
        names = list(categories) if categories else [f"omega_{j + 1}" for j in range(c)]
        width = max(10, *(len(s) for s in names)) + 2
        head = f"T={self.T}"
        if self.epsilon is not None:
            head = f"epsilon={self.epsilon:.3f}  " + head
        if self.attempts:
            head += f"  attempts={self.attempts}  acc. rate={self.acceptance_rate:.4f}"
        lines = [head, f"{'':<{width}}{'mean':>8}{'sd':>8}"]
        for j, name in enumerate(names):
            lines.append(f"{name:<{width}}{self.mean[j]:>8.3f}{'(' + format(self.sd[j], '.3f') + ')':>8}")
        lines.append("")
        lines.append("Pr(omega_i > omega_j)")
        lines.append(" " * 6 + "".join(f"{j + 1:>8}" for j in range(c)))
        for i in range(c):
            cells = "".join(f"{'-':>8}" if i == j else f"{self.exceedance[i, j]:>8.3f}" for j in range(c))
            lines.append(f"{i + 1:>6}{cells}")
        return "\n".join(lines)


def _as_simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("expected a 1-d probability vector")
    if np.any(p < -SIMPLEX_TOL) or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"not a probability vector (sum={p.sum()!r})")
    return p


def sample_prior(c: int, prior: PriorConfig, rng: np.random.Generator) -> np.ndarray:
    """One Dirichlet(alpha, ..., alpha) draw on the open simplex.

    For alpha < 1 the gamma variates are built as Gamma(alpha + 1) * U**(1/alpha)
    in log space, so small shapes do not underflow to exact zeros.
    """
    if c < 2:
        raise ValueError(f"need at least two categories, got c={c}")
    a = prior.alpha
    if a >= 1.0:
        g = rng.standard_gamma(a, size=c)
        return g / g.sum()
    lg = np.log(rng.standard_gamma(a + 1.0, size=c)) + np.log1p(-rng.random(c)) / a
    lg -= lg.max()
    w = np.maximum(np.exp(lg), np.finfo(float).tiny)
    return w / w.sum()


def summary_statistic(data: Dataset) -> np.ndarray:
    """Mean over respondents of the per-respondent relative frequencies."""
    if data.k == 0:
        raise ValueError("empty dataset")
    n = data.n
    if np.any(n == 0):
        raise ValueError(f"respondent {int(np.argmin(n)) + 1} has an empty draw")
    return (data.counts / n[:, None]).mean(axis=0)


def tv_distance(p, q) -> float:
    p, q = _as_simplex(p), _as_simplex(q)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    return 0.5 * float(np.abs(p - q).sum())


def simulate_dataset(m, omega, n_list, rng: np.random.Generator, categories=None) -> Dataset:
    m = np.asarray(m, dtype=np.int64)
    omega = np.asarray(omega, dtype=float)
    n_h = np.asarray(n_list, dtype=np.int64)
    if omega.shape != m.shape:
        raise UrnError(f"dimension mismatch: len(m)={m.size}, len(omega)={omega.size}")
    if np.any(omega <= 0):
        raise UrnError(f"non-positive weight at index {int(np.argmax(omega <= 0)) + 1}")
    if n_h.size and (n_h.max() > m.sum() or n_h.min() < 1):
        raise UrnError(f"draw sizes must lie in [1, N={int(m.sum())}]")
    u = rng.random((1, n_h.size, int(n_h.max()) if n_h.size else 0))
    return Dataset(draw_counts(m, omega[None, :], n_h, u)[0], m, categories)


class _Proposals:
    """Proposal ``i``: weights and pseudo-data summary from substream ``(seed, tag, i)``."""

    def __init__(self, data: Dataset, prior: PriorConfig, seed: int, tag: int):
        self.m = data.m
        self.n_h = data.n
        self.n_max = int(self.n_h.max())
        self.c = data.c
        self.prior = prior
        self.seed = seed
        self.tag = tag
        self.observed = summary_statistic(data)
        self.batch = max(1, min(4096, _BATCH_ELEMS // max(1, data.k * self.n_max)))

    def draw(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Weights ``(B, c)`` and TV distances ``(B,)`` for proposals ``start..stop-1``."""
        B = stop - start
        omega = np.empty((B, self.c))
        u = np.empty((B, self.n_h.size, self.n_max))
        for b in range(B):
            g = rngmod.stream(self.seed, self.tag, start + b)
            omega[b] = sample_prior(self.c, self.prior, g)
            u[b] = g.random((self.n_h.size, self.n_max))
        counts = draw_counts(self.m, omega, self.n_h, u)
        summaries = (counts / self.n_h[None, :, None]).mean(axis=1)
        dist = 0.5 * np.abs(summaries - self.observed).sum(axis=1)
        return omega, dist

    def batches(self, start: int, threads: int = 1) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        """Yield ``(first_index, omega, dist)`` in index order, forever."""
        threads = max(1, int(threads))
        if threads == 1:
            i = start
            while True:
                yield (i, *self.draw(i, i + self.batch))
                i += self.batch
        with ThreadPoolExecutor(threads) as pool:
            i = start
            while True:
                futs = [pool.submit(self.draw, i + j * self.batch, i + (j + 1) * self.batch) for j in range(threads)]
                for j, f in enumerate(futs):
                    yield (i + j * self.batch, *f.result())
                i += threads * self.batch


def replay_proposal(data: Dataset, prior: PriorConfig, seed: int, index: int, tag: int = rngmod.MAIN):
    """Regenerate proposal ``index``: its weights, pseudo-data and distance."""
    g = rngmod.stream(seed, tag, index)
    omega = sample_prior(data.c, prior, g)
    pseudo = simulate_dataset(data.m, omega, data.n, g)
    return omega, pseudo, tv_distance(summary_statistic(pseudo), summary_statistic(data))


def pilot_distances(data: Dataset, prior: PriorConfig, pilot_size: int, seed: int, threads: int = 1) -> np.ndarray:
    props = _Proposals(data, prior, seed, rngmod.PILOT)
    props.batch = min(props.batch, pilot_size)
    out = np.empty(pilot_size)
    for start, _, dist in props.batches(0, threads):
        take = min(dist.size, pilot_size - start)
        out[start:start + take] = dist[:take]
        if start + take >= pilot_size:
            break
    return out


def calibrate_tolerance(
    data: Dataset,
    prior: PriorConfig,
    pilot_size: int = 100_000,
    quantile: float = 0.05,
    seed: int = 0,
    threads: int = 1,
) -> Calibration:
    """Pick the tolerance as a low quantile of prior-predictive distances.

    The quantile is the order statistic of rank ``ceil(q * pilot_size)``.
    The pilot uses its own substreams, independent of the main run.  A zero
    quantile is lifted to the smallest positive pilot distance.
    """
    if pilot_size < 100:
        raise ValueError(f"pilot_size must be at least 100, got {pilot_size}")
    if not 0 < quantile <= 1:
        raise ValueError(f"quantile must lie in (0, 1], got {quantile}")
    dist = pilot_distances(data, prior, pilot_size, seed, threads)
    rank = max(1, math.ceil(quantile * pilot_size))
    eps = float(np.partition(dist, rank - 1)[rank - 1])
    if eps == 0.0:
        # Acceptance is strict, so a zero tolerance could never accept.  Lift it
        # to the next attainable distance, which admits exact matches only.
        positive = dist[dist > 0]
        if positive.size:
            eps = float(positive.min())
            warnings.warn(f"pilot quantile is 0; using smallest positive distance {eps:g}", RuntimeWarning, stacklevel=2)
    degenerate = bool(dist.min() == dist.max())
    if degenerate:
        warnings.warn("all pilot distances are equal; the tolerance is uninformative", RuntimeWarning, stacklevel=2)
    return Calibration(eps, quantile, dist, degenerate)


def abc_rejection_multi(
    data: Dataset,
    prior: PriorConfig,
    epsilons: Sequence[float],
    T: int,
    max_attempts: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> list[PosteriorSample]:
    """Rejection ABC at several tolerances over one shared proposal sequence.

    Each tolerance keeps the first ``T`` proposals (by index) whose distance
    is strictly below it, so the accepted sets nest across tolerances.
    """
    eps = [float(e) for e in epsilons]
    if not eps or min(eps) <= 0:
        raise ValueError("tolerances must be positive")
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    if max_attempts is None:
        max_attempts = 1000 * T
    props = _Proposals(data, prior, seed, rngmod.MAIN)
    acc_idx: list[list[np.ndarray]] = [[] for _ in eps]
    acc_om: list[list[np.ndarray]] = [[] for _ in eps]
    acc_d: list[list[np.ndarray]] = [[] for _ in eps]
    have = [0] * len(eps)
    attempts = [0] * len(eps)
    done = [False] * len(eps)
    for start, omega, dist in props.batches(0, threads):
        stop = min(start + dist.size, max_attempts)
        span = stop - start
        for e_i, e in enumerate(eps):
            if done[e_i]:
                continue
            hit = np.nonzero(dist[:span] < e)[0]
            need = T - have[e_i]
            if hit.size >= need:
                hit = hit[:need]
                attempts[e_i] = start + int(hit[-1]) + 1
                done[e_i] = True
            else:
                attempts[e_i] = stop
            acc_idx[e_i].append(start + hit)
            acc_om[e_i].append(omega[hit])
            acc_d[e_i].append(dist[hit])
            have[e_i] += hit.size
        if all(done) or stop >= max_attempts:
            break
    out = []
    for e_i, e in enumerate(eps):
        out.append(
            PosteriorSample(
                draws=np.concatenate(acc_om[e_i]) if acc_om[e_i] else np.zeros((0, data.c)),
                attempts=attempts[e_i],
                epsilon=e,
                seed=seed,
                proposal_index=np.concatenate(acc_idx[e_i]).astype(np.int64),
                distances=np.concatenate(acc_d[e_i]),
            )
        )
    if not all(done):
        short = [f"{s.epsilon:g} ({s.T}/{T})" for s in out if s.T < T]
        raise BudgetExhausted(
            f"attempt budget of {max_attempts} exhausted before {T} acceptances at tolerance {', '.join(short)}",
            out,
        )
    return out


def abc_rejection(
    data: Dataset,
    prior: PriorConfig,
    epsilon: float,
    T: int,
    max_attempts: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> PosteriorSample:
    try:
        return abc_rejection_multi(data, prior, [epsilon], T, max_attempts, seed, threads)[0]
    except BudgetExhausted as exc:
        raise BudgetExhausted(str(exc), exc.partial[0]) from None


def posterior_summaries(sample: PosteriorSample) -> PosteriorSummary:
    draws = np.asarray(sample.draws, dtype=float)
    if draws.shape[0] < 2:
        raise ValueError("need at least two posterior draws")
    exceed = (draws[:, :, None] > draws[:, None, :]).mean(axis=0)
    np.fill_diagonal(exceed, np.nan)
    return PosteriorSummary(
        mean=draws.mean(axis=0),
        sd=draws.std(axis=0, ddof=1),
        exceedance=exceed,
        T=draws.shape[0],
        attempts=sample.attempts,
        epsilon=sample.epsilon,
    )


def write_posterior_csv(sample: PosteriorSample, path) -> None:
    c = sample.draws.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"omega_{j + 1}" for j in range(c)])
        for row in sample.draws:
            w.writerow([repr(float(v)) for v in row])


def read_posterior_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty posterior file")
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))


def write_summary_json(summaries: Sequence[PosteriorSummary], path, categories=None, extra: dict | None = None) -> None:
    payload = dict(extra or {})
    payload["fits"] = [s.as_dict(categories) for s in summaries]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
