"""Wallenius biased urn: validation, sequential sampling and exact pmf.

Colours are drawn one ball at a time without replacement; the chance that
the next ball has colour ``i`` is proportional to ``remaining_i * omega_i``.
The pmf of the resulting colour counts has no closed form and is evaluated
here by adaptive quadrature. Two independent references back it up: the
multivariate hypergeometric mass (equal weights) and a dynamic program that
pushes probability through the draw-by-draw transitions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import quadrature

SUPPORT_CAP = 10**6
_LN2 = math.log(2.0)


class UrnError(ValueError):
    """Invalid urn parameters or an incompatible frequency vector."""


@dataclass(frozen=True)
class UrnSpec:
    c: int
    m: tuple[int, ...]
    omega: tuple[float, ...]

    @property
    def N(self) -> int:
        return sum(self.m)


@dataclass(frozen=True)
class FrequencyVector:
    counts: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        if any(x < 0 for x in self.counts):
            raise UrnError(f"negative count in {self.counts}")
        if sum(self.counts) != self.n:
            raise UrnError(f"counts {self.counts} sum to {sum(self.counts)}, expected n={self.n}")


@dataclass
class DrawState:
    drawn: list[int]


def make_urn(m: Sequence[int], omega: Sequence[float]) -> UrnSpec:
    """Build and validate an urn, inferring ``c`` from ``m``."""
    return validate_urn(UrnSpec(len(m), tuple(int(v) for v in m), tuple(float(w) for w in omega)))


def freq(counts: Iterable[int]) -> FrequencyVector:
    counts = tuple(int(v) for v in counts)
    return FrequencyVector(counts, sum(counts))


def validate_urn(spec: UrnSpec) -> UrnSpec:
    if spec.c < 1:
        raise UrnError(f"need at least one colour, got c={spec.c}")
    if len(spec.m) != spec.c or len(spec.omega) != spec.c:
        raise UrnError(
            f"dimension mismatch: c={spec.c}, len(m)={len(spec.m)}, len(omega)={len(spec.omega)}"
        )
    for i, w in enumerate(spec.omega, start=1):
        if not (w > 0 and math.isfinite(w)):
            raise UrnError(f"non-positive weight at index {i}: {w}")
    for i, mi in enumerate(spec.m, start=1):
        if mi < 0:
            raise UrnError(f"negative multiplicity at index {i}: {mi}")
    if spec.N < 1:
        raise UrnError("empty urn: N = 0")
    return spec


def _check_x(spec: UrnSpec, x: FrequencyVector | Sequence[int]) -> FrequencyVector:
    if not isinstance(x, FrequencyVector):
        x = freq(x)
    if len(x.counts) != spec.c:
        raise UrnError(f"dimension mismatch: x has {len(x.counts)} entries, urn has c={spec.c}")
    if sum(x.counts) != x.n:
        raise UrnError(f"counts sum to {sum(x.counts)}, expected n={x.n}")
    return x


def next_draw_probs(spec: UrnSpec, state: DrawState | Sequence[int]) -> np.ndarray:
    drawn = state.drawn if isinstance(state, DrawState) else state
    if len(drawn) != spec.c:
        raise UrnError(f"dimension mismatch: state has {len(drawn)} entries, urn has c={spec.c}")
    remaining = np.asarray(spec.m, dtype=float) - np.asarray(drawn, dtype=float)
    if np.any(remaining < 0):
        raise UrnError(f"state {list(drawn)} exceeds multiplicities {spec.m}")
    w = remaining * np.asarray(spec.omega)
    total = w.sum()
    if total <= 0:
        raise UrnError("urn exhausted")
    return w / total


def draw_counts(
    m: np.ndarray, omega: np.ndarray, n_h: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """Vectorised sequential draws.

    ``omega`` has shape ``(B, c)`` (one weight vector per batch row), ``n_h``
    shape ``(k,)`` and ``u`` shape ``(B, k, max(n_h))``. Ball ``t`` of
    respondent ``h`` in row ``b`` uses ``u[b, h, t]`` by inverse CDF over the
    current draw probabilities, ties going to the lower colour index.
    Returns counts of shape ``(B, k, c)``.
    """
    m = np.asarray(m, dtype=np.int64)
    omega = np.asarray(omega, dtype=float)
    n_h = np.asarray(n_h, dtype=np.int64)
    B, c = omega.shape
    k = n_h.shape[0]
    drawn = np.zeros((B, k, c), dtype=np.int64)
    if k == 0:
        return drawn
    om = omega[:, None, :]
    bi, hi = np.indices((B, k))
    for t in range(int(n_h.max())):
        w = (m - drawn) * om
        cum = np.cumsum(w, axis=-1)
        target = u[:, :, t] * cum[..., -1]
        idx = (cum <= target[..., None]).sum(axis=-1)
        over = idx >= c
        if over.any():
            # u * total rounded up to total: fall back to the last live colour
            last = c - 1 - np.argmax((w[over] > 0)[:, ::-1], axis=-1)
            idx[over] = last
        active = t < n_h
        drawn[bi[:, active], hi[:, active], idx[:, active]] += 1
    return drawn


def sample_draw(spec: UrnSpec, n: int, rng: np.random.Generator) -> FrequencyVector:
    if n < 1:
        raise UrnError(f"draw size must be positive, got {n}")
    if n > spec.N:
        raise UrnError(f"draw size n={n} exceeds urn size N={spec.N}")
    u = rng.random((1, 1, n))
    counts = draw_counts(
        np.asarray(spec.m), np.asarray(spec.omega)[None, :], np.array([n]), u
    )
    return freq(counts[0, 0])


def _log_binom(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def _log1mexp(a: np.ndarray) -> np.ndarray:
    # log(1 - exp(a)) for a < 0
    return np.where(a > -_LN2, np.log(-np.expm1(a)), np.log1p(-np.exp(a)))


def _log_integral(x: np.ndarray, r: np.ndarray) -> float:
    """log of the integral over [0, 1] of prod (1 - t**r_j)**x_j dt.

    Writing t = exp(-u), the integrand in u is log-concave with a single
    peak u*. The substitution t = z**s with s = max(1, u*/ln 2) places that
    peak near z = 1/2, so the panels see a well-scaled bump whatever the
    size of d.
    """
    n = float(x.sum())
    R = float((x * r).sum())

    def dphi(u: float) -> float:
        with np.errstate(over="ignore"):
            return -1.0 + float((x * r / np.expm1(r * u)).sum())

    lo = n / (2.0 + 0.5 * R)
    hi = 2.0 * n
    u_star = brentq(dphi, lo, hi, rtol=1e-6) if dphi(lo) > 0 > dphi(hi) else n
    s = max(1.0, u_star / _LN2)
    sr = s * r

    def log_g(z: np.ndarray) -> np.ndarray:
        lz = np.log(z)
        return math.log(s) + (s - 1.0) * lz + _log1mexp(np.multiply.outer(lz, sr)) @ x

    ref = float(log_g(np.array([0.5]))[0])
    val = quadrature.integrate(lambda z: np.exp(log_g(z) - ref))
    return ref + math.log(val)


def log_wallenius_pmf(spec: UrnSpec, x: FrequencyVector | Sequence[int]) -> float:
    x = _check_x(spec, x)
    if x.n > spec.N:
        raise UrnError(f"draw size n={x.n} exceeds urn size N={spec.N}")
    if any(xi > mi for xi, mi in zip(x.counts, spec.m)):
        return -math.inf
    d = sum(w * (mi - xi) for w, mi, xi in zip(spec.omega, spec.m, x.counts))
    if d == 0:
        # exhaustive draw: x == m is certain
        return 0.0
    if x.n == 0:
        return 0.0
    log_coef = sum(_log_binom(mi, xi) for mi, xi in zip(spec.m, x.counts))
    xs = np.array([xi for xi in x.counts if xi > 0], dtype=float)
    r = np.array([w / d for w, xi in zip(spec.omega, x.counts) if xi > 0])
    return log_coef + _log_integral(xs, r)


def wallenius_pmf(spec: UrnSpec, x: FrequencyVector | Sequence[int]) -> float:
    """Probability of colour counts ``x`` under the Wallenius urn ``spec``.

    Exact pmf evaluation is meant for moderate draw sizes; inference never
    calls it.
    """
    return math.exp(log_wallenius_pmf(spec, x))


def hypergeom_pmf(spec: UrnSpec, x: FrequencyVector | Sequence[int]) -> float:
    """Multivariate hypergeometric mass; the weights in ``spec`` are ignored."""
    x = _check_x(spec, x)
    if x.n > spec.N:
        raise UrnError(f"draw size n={x.n} exceeds urn size N={spec.N}")
    if any(xi > mi for xi, mi in zip(x.counts, spec.m)):
        return 0.0
    log_p = sum(_log_binom(mi, xi) for mi, xi in zip(spec.m, x.counts))
    return math.exp(log_p - _log_binom(spec.N, x.n))


def _layer_sizes(m: Sequence[int], n: int) -> list[int]:
    """Number of count vectors with each total 0..n (polynomial coefficients)."""
    poly = [1]
    for mi in m:
        nxt = [0] * min(len(poly) + mi, n + 1)
        for i, a in enumerate(poly):
            for j in range(mi + 1):
                if i + j > n:
                    break
                nxt[i + j] += a
        poly = nxt
    return poly + [0] * (n + 1 - len(poly))


def support_size(spec: UrnSpec, n: int) -> int:
    return _layer_sizes(spec.m, n)[n]


def enumerate_support(spec: UrnSpec, n: int, cap: int = SUPPORT_CAP) -> list[FrequencyVector]:
    if n < 0 or n > spec.N:
        raise UrnError(f"draw size n={n} outside [0, N={spec.N}]")
    size = support_size(spec, n)
    if size > cap:
        raise UrnError(f"support has {size} points, above the cap of {cap}")
    # suffix capacities prune branches that cannot reach n
    tail = list(itertools.accumulate(reversed(spec.m)))[::-1] + [0]
    out: list[FrequencyVector] = []

    def rec(j: int, left: int, prefix: list[int]) -> None:
        if j == spec.c:
            if left == 0:
                out.append(FrequencyVector(tuple(prefix), n))
            return
        for v in range(max(0, left - tail[j + 1]), min(spec.m[j], left) + 1):
            prefix.append(v)
            rec(j + 1, left - v, prefix)
            prefix.pop()

    rec(0, n, [])
    return out


def exact_pmf_by_enumeration(
    spec: UrnSpec, n: int, cap: int = SUPPORT_CAP
) -> dict[tuple[int, ...], float]:
    """Exact pmf by propagating mass through the draw-by-draw chain."""
    if n < 0 or n > spec.N:
        raise UrnError(f"draw size n={n} outside [0, N={spec.N}]")
    states = sum(_layer_sizes(spec.m, n))
    if states > cap:
        raise UrnError(f"state lattice has {states} states, above the cap of {cap}")
    m = spec.m
    om = spec.omega
    layer: dict[tuple[int, ...], float] = {(0,) * spec.c: 1.0}
    for _ in range(n):
        nxt: dict[tuple[int, ...], float] = {}
        for drawn, mass in layer.items():
            w = [(m[i] - drawn[i]) * om[i] for i in range(spec.c)]
            total = sum(w)
            for i, wi in enumerate(w):
                if wi > 0:
                    key = drawn[:i] + (drawn[i] + 1,) + drawn[i + 1:]
                    nxt[key] = nxt.get(key, 0.0) + mass * wi / total
        layer = nxt
    return dict(sorted(layer.items()))
