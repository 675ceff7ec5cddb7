"""Inverse temperature as a sample budget.

The Boltzmann distribution ``Q exp(alpha U) / Z`` at a positive integer
``alpha`` is compared with the exact distribution of the maximum (by
utility) of ``alpha`` i.i.d. draws from a source ``M``; the two differ by at
most ``exp(-(alpha - xi) delta)`` for constants computed below.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .free_energy import Distribution, UtilityVector, as_distribution, as_utility, equilibrium_distribution
from .tree import InverseTemperature

BOUND_SLACK = 1e-12
MC_BLOCK = 8192


@dataclass(frozen=True)
class SampleModel:
    m: Distribution
    q: Distribution
    u: UtilityVector

    def __post_init__(self):
        if not (self.m.support == self.q.support == self.u.support):
            raise ValueError("m, q and u must share one support")
        if not (np.all(self.m.probs > 0) and np.all(self.q.probs > 0)):
            raise ValueError("m and q must be strictly positive")
        if len(np.unique(self.u.values)) != len(self.u.values):
            raise ValueError("utilities must be pairwise distinct")

    @classmethod
    def from_json(cls, spec: Mapping[str, Any]) -> SampleModel:
        support = [str(s) for s in spec["support"]]
        return cls(
            Distribution(tuple(support), np.asarray(spec["m"], float)),
            Distribution(tuple(support), np.asarray(spec["q"], float)),
            UtilityVector(tuple(support), np.asarray(spec["u"], float)),
        )

    @property
    def support(self) -> tuple[str, ...]:
        return self.m.support


def _check_alpha(alpha):
    if isinstance(alpha, bool) or int(alpha) != alpha or alpha < 1:
        raise ValueError(f"alpha must be a positive integer, got {alpha!r}")
    return int(alpha)


def _ascending(u: np.ndarray) -> np.ndarray:
    if len(np.unique(u)) != len(u):
        raise ValueError("utilities must be pairwise distinct")
    return np.argsort(u, kind="stable")


def max_of_alpha_distribution(m, u, alpha: int) -> Distribution:
    """Distribution of the utility-maximal outcome among ``alpha`` draws from ``m``.

    With outcomes sorted by utility and ``F`` the cumulative of ``m``, the
    mass of the n-th outcome is ``F(n)**alpha - F(n-1)**alpha``.
    """
    m = as_distribution(m)
    u = as_utility(u, m.support)
    alpha = _check_alpha(alpha)
    order = _ascending(u.values)
    cdf = np.cumsum(m.probs[order])
    cdf[-1] = 1.0
    powered = cdf**alpha
    mass_sorted = np.diff(powered, prepend=0.0)
    out = np.empty_like(mass_sorted)
    out[order] = mass_sorted
    return Distribution(m.support, out)


@dataclass(frozen=True)
class OutcomeConstants:
    label: str
    delta: float
    c: float
    gamma: float
    xi: float


@dataclass(frozen=True)
class BoundConstants:
    delta: float
    xi: float
    delta_min: float
    delta_max: float
    xi_raw: float
    per_outcome: tuple[OutcomeConstants, ...]


def bound_constants(model: SampleModel) -> BoundConstants:
    """Per-outcome gap constants and their aggregates.

    For every outcome below the utility maximum ``x_N``:
    ``delta_n = U(x_N) - U(x_n)``, ``c_n = log Q(x_n) - log Q(x_N)``,
    ``gamma_n = -log F(x_n)`` and ``xi_n = c_n / delta_n``. The aggregate
    ``xi`` is the largest ``xi_n`` floored at 0 (``xi_raw`` keeps the
    unfloored value); a negative ``xi`` would shrink the lower-side bound
    ``exp(-alpha gamma_n)`` below its true size. ``delta_max`` is the largest of all
    ``delta_n`` and ``gamma_n``; ``delta_min`` the smallest, and it is the
    operative ``delta`` because only the smallest rate bounds every outcome.
    """
    u = model.u.values
    order = _ascending(u)
    top = order[-1]
    cdf = np.cumsum(model.m.probs[order])
    rows = []
    for rank, idx in enumerate(order[:-1]):
        delta = float(u[top] - u[idx])
        c = math.log(model.q.probs[idx]) - math.log(model.q.probs[top])
        gamma = -math.log(cdf[rank])
        rows.append(OutcomeConstants(model.support[idx], delta, c, gamma, c / delta))
    if not rows:
        raise ValueError("the model needs at least two outcomes")
    rates = [r.delta for r in rows] + [r.gamma for r in rows]
    xi_raw = max(r.xi for r in rows)
    return BoundConstants(min(rates), max(0.0, xi_raw), min(rates), max(rates), xi_raw, tuple(rows))


@dataclass(frozen=True)
class BoundReport:
    alpha: int
    m_alpha: Distribution
    boltzmann: Distribution
    sup_gap: float
    delta: float
    xi: float
    stated_bound: float
    bound_satisfied: bool
    delta_max: float
    stated_bound_max: float
    bound_satisfied_max: bool

    @property
    def informative(self) -> bool:
        """False where the bound exceeds 1 and says nothing."""
        return self.stated_bound < 1.0


def check_bound(model: SampleModel, alphas: Sequence[int]) -> list[BoundReport]:
    if not alphas:
        raise ValueError("alphas must be nonempty")
    consts = bound_constants(model)
    reports = []
    for alpha in alphas:
        alpha = _check_alpha(alpha)
        boltzmann = equilibrium_distribution(model.q, model.u, InverseTemperature.finite(alpha))
        m_alpha = max_of_alpha_distribution(model.m, model.u, alpha)
        gap = float(np.max(np.abs(boltzmann.probs - m_alpha.probs)))
        bound = math.exp(-(alpha - consts.xi) * consts.delta_min)
        bound_max = math.exp(-(alpha - consts.xi) * consts.delta_max)
        reports.append(
            BoundReport(
                alpha,
                m_alpha,
                boltzmann,
                gap,
                consts.delta_min,
                consts.xi,
                bound,
                gap <= bound + BOUND_SLACK,
                consts.delta_max,
                bound_max,
                gap <= bound_max + BOUND_SLACK,
            )
        )
    return reports


def _block_maxima(m_probs, rank, alpha, n, seed, block):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(alpha, block)))
    draws = rng.choice(len(m_probs), size=(n, alpha), p=m_probs)
    return np.bincount(rank[draws].max(axis=1), minlength=len(m_probs))


def monte_carlo_max(model: SampleModel, alpha: int, trials: int, seed: int, workers: int | None = None) -> Distribution:
    """Empirical distribution of the per-trial maximum of ``alpha`` draws from ``m``.

    Trials are split into fixed blocks, each with its own generator derived
    from ``(seed, alpha, block index)``; the output does not depend on
    ``workers``.
    """
    alpha = _check_alpha(alpha)
    if isinstance(trials, bool) or int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials!r}")
    order = _ascending(model.u.values)
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    m_probs = np.asarray(model.m.probs) / math.fsum(model.m.probs)
    sizes = [min(MC_BLOCK, trials - start) for start in range(0, trials, MC_BLOCK)]
    jobs = [(m_probs, rank, alpha, n, int(seed), b) for b, n in enumerate(sizes)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(lambda j: _block_maxima(*j), jobs))
    else:
        counts = [_block_maxima(*j) for j in jobs]
    by_rank = np.sum(counts, axis=0)
    return Distribution(model.support, by_rank[rank] / trials)


def total_variation(p, q) -> float:
    p, q = as_distribution(p), as_distribution(q)
    if p.support != q.support:
        raise ValueError("support mismatch")
    return 0.5 * math.fsum(np.abs(p.probs - q.probs))
