"""Exact Gibbs computations by full enumeration of {-1,+1}^N.

The energy table over all 2^N configurations is built by a meet-in-the-middle
split (half-energies plus a cross matrix product), which reproduces a naive
per-configuration evaluation to floating-point accuracy while keeping the
cost at O(2^N * N) flops.  A sequential Gray-code traversal with incremental
flip deltas is kept as an independent reference path.  All log-partition
accumulations are two-pass log-sum-exp (max first, then exponentials of
differences).

Configuration index convention: bit i of the index is spin i (+1 if set),
so index 0 is the all-down configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .models import (
    CONSTANT_FIELD,
    SK,
    ModelSpec,
    SpinConfiguration,
    check_beta,
    energy_flip_delta,
    hamiltonian,
)

#: Largest N accepted for full enumeration by default.
ENUMERATION_LIMIT = 24

#: Default number of energy-density histogram bins.
HISTOGRAM_BINS = 512

LOG2 = np.log(2.0)


class EnumerationLimitError(RuntimeError):
    """System too large for full enumeration; use the MC engine instead."""


def _check_limit(n: int, limit: int) -> None:
    if n > limit:
        raise EnumerationLimitError(
            f"n={n} exceeds the enumeration limit {limit}; "
            "use glasslab.mc (Metropolis / parallel tempering) instead"
        )


def spins_matrix(n: int) -> np.ndarray:
    """All 2^n configurations as a (2^n, n) +/-1 int8 matrix."""
    idx = np.arange(1 << n, dtype=np.uint32)
    bits = (idx[:, None] >> np.arange(n, dtype=np.uint32)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def energy_table(model: ModelSpec, limit: int = ENUMERATION_LIMIT) -> np.ndarray:
    """Energies of all 2^n configurations, indexed by bit pattern."""
    n = model.n
    _check_limit(n, limit)
    n_lo = n // 2
    n_hi = n - n_lo
    if model.kind == CONSTANT_FIELD:
        h = model.field_strength
        mag_lo = 2.0 * np.bitwise_count(np.arange(1 << n_lo, dtype=np.uint32)) - n_lo
        mag_hi = 2.0 * np.bitwise_count(np.arange(1 << n_hi, dtype=np.uint32)) - n_hi
        table2d = h * (mag_hi[:, None] + mag_lo[None, :])
        return table2d.ravel()
    g = model.disorder.couplings
    s_lo = spins_matrix(n_lo).astype(np.float64)
    s_hi = spins_matrix(n_hi).astype(np.float64)
    e_lo = np.einsum("ci,ij,cj->c", s_lo, g[:n_lo, :n_lo], s_lo)
    e_hi = np.einsum("ci,ij,cj->c", s_hi, g[n_lo:, n_lo:], s_hi)
    cross = g[:n_lo, n_lo:] + g[n_lo:, :n_lo].T
    # table2d[hi, lo] so that C-order ravel gives flat index lo + (hi << n_lo)
    table2d = e_hi[:, None] + e_lo[None, :] + s_hi @ (s_lo @ cross).T
    table2d /= np.sqrt(n)
    return table2d.ravel()


def gray_code_energies(model: ModelSpec, limit: int = ENUMERATION_LIMIT):
    """Energies via sequential Gray-code traversal with incremental deltas.

    Returns (indices, energies) where indices[t] is the configuration index
    visited at Gray step t.  Slower than energy_table; used as an independent
    traversal for cross-checks.
    """
    n = model.n
    _check_limit(n, limit)
    total = 1 << n
    indices = np.arange(total, dtype=np.uint32)
    indices ^= indices >> 1
    energies = np.empty(total)
    config = SpinConfiguration(n, int(indices[0]))
    energy = hamiltonian(model, config)
    energies[0] = energy
    for t in range(1, total):
        site = (t & -t).bit_length() - 1
        energy += energy_flip_delta(model, config, site)
        config = config.flip(site)
        energies[t] = energy
    return indices, energies


def naive_energy_table(model: ModelSpec, limit: int = 16) -> np.ndarray:
    """Per-configuration recomputation, the slow oracle for energy_table."""
    n = model.n
    _check_limit(n, limit)
    return np.array(
        [hamiltonian(model, SpinConfiguration(n, b)) for b in range(1 << n)]
    )


def log_partition_per_spin(energies: np.ndarray, beta: float, n: int) -> float:
    """N^{-1} log Z with the uniform 2^{-N} prior folded in."""
    return float(logsumexp(beta * energies) - n * LOG2) / n


def gibbs_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    x = beta * energies
    w = np.exp(x - x.max())
    w /= w.sum()
    return w


@dataclass(frozen=True)
class ExactGibbsSummary:
    """Exact thermodynamics of one model at one inverse temperature."""

    n: int
    beta: float
    free_energy: float
    energy_density_mean: float
    energy_density_second_moment: float
    min_energy_density: float
    max_energy_density: float
    histogram_edges: np.ndarray
    histogram_mass: np.ndarray

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "free_energy": self.free_energy,
            "energy_density_mean": self.energy_density_mean,
            "energy_density_second_moment": self.energy_density_second_moment,
            "min_energy_density": self.min_energy_density,
            "max_energy_density": self.max_energy_density,
        }

    def histogram_rows(self) -> list[tuple[float, float, float]]:
        """(bin_left, bin_right, gibbs_mass) rows for CSV export."""
        return [
            (float(self.histogram_edges[i]), float(self.histogram_edges[i + 1]),
             float(self.histogram_mass[i]))
            for i in range(len(self.histogram_mass))
        ]


def enumerate_gibbs(
    model: ModelSpec,
    beta: float,
    bins: int = HISTOGRAM_BINS,
    limit: int = ENUMERATION_LIMIT,
    energies: Optional[np.ndarray] = None,
) -> ExactGibbsSummary:
    """Exact free energy, energy-density moments, and Gibbs histogram."""
    beta = check_beta(beta)
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    density = energies / n
    free_energy = log_partition_per_spin(energies, beta, n)
    w = gibbs_weights(energies, beta)
    lo, hi = float(density.min()), float(density.max())
    if hi - lo < 1e-15:
        lo, hi = lo - 0.5, hi + 0.5
    mass, edges = np.histogram(density, bins=bins, range=(lo, hi), weights=w)
    return ExactGibbsSummary(
        n=n,
        beta=beta,
        free_energy=free_energy,
        energy_density_mean=float(w @ density),
        energy_density_second_moment=float(w @ density**2),
        min_energy_density=float(density.min()),
        max_energy_density=float(density.max()),
        histogram_edges=edges,
        histogram_mass=mass,
    )


def gibbs_expectation(
    model: ModelSpec,
    beta: float,
    observable: Callable[[SpinConfiguration], float],
    limit: int = ENUMERATION_LIMIT,
    energies: Optional[np.ndarray] = None,
) -> float:
    """Exact <observable>_beta by enumeration with Gibbs weights."""
    beta = check_beta(beta)
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    values = np.fromiter(
        (observable(SpinConfiguration(n, b)) for b in range(1 << n)),
        dtype=np.float64,
        count=1 << n,
    )
    return float(gibbs_weights(energies, beta) @ values)


@dataclass(frozen=True)
class SetMass:
    """Gibbs and prior mass of a configuration set, plus its restricted
    per-spin log partition (None iff the set is empty)."""

    gibbs_mass: float
    prior_mass: float
    restricted_log_partition: Optional[float]

    def to_json(self) -> dict:
        return {
            "gibbs_mass": self.gibbs_mass,
            "prior_mass": self.prior_mass,
            "restricted_log_partition": self.restricted_log_partition,
        }


def set_mass_from_mask(
    model: ModelSpec,
    beta: float,
    mask: np.ndarray,
    energies: Optional[np.ndarray] = None,
    limit: int = ENUMERATION_LIMIT,
) -> SetMass:
    """SetMass for a precomputed boolean mask over configuration indices."""
    beta = check_beta(beta)
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != energies.shape:
        raise ValueError("mask must cover all configurations")
    prior = float(mask.mean())
    if not mask.any():
        return SetMass(gibbs_mass=0.0, prior_mass=0.0, restricted_log_partition=None)
    w = gibbs_weights(energies, beta)
    restricted = log_partition_per_spin(energies[mask], beta, n)
    return SetMass(
        gibbs_mass=float(w[mask].sum()),
        prior_mass=prior,
        restricted_log_partition=restricted,
    )


def set_mass(
    model: ModelSpec,
    beta: float,
    predicate: Callable[[SpinConfiguration], bool],
    limit: int = ENUMERATION_LIMIT,
    energies: Optional[np.ndarray] = None,
) -> SetMass:
    """Exact masses of {sigma : predicate(sigma)} under Gibbs and prior."""
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    mask = np.fromiter(
        (bool(predicate(SpinConfiguration(n, b))) for b in range(1 << n)),
        dtype=bool,
        count=1 << n,
    )
    return set_mass_from_mask(model, beta, mask, energies=energies)


def free_energy_curve(
    model: ModelSpec,
    betas: Sequence[float],
    limit: int = ENUMERATION_LIMIT,
    energies: Optional[np.ndarray] = None,
) -> list[tuple[float, float, float]]:
    """(beta, F_N(beta), <H/N>_beta) rows over a strictly increasing grid.

    The energy table is computed once and reused across the grid.
    """
    betas = [check_beta(b) for b in betas]
    if len(betas) == 0:
        raise ValueError("beta grid must be nonempty")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta grid must be strictly increasing")
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    density = energies / n
    rows = []
    for beta in betas:
        f = log_partition_per_spin(energies, beta, n)
        u = float(gibbs_weights(energies, beta) @ density)
        rows.append((beta, f, u))
    return rows


def free_energy_partitioned(
    model: ModelSpec,
    beta: float,
    parts: int,
    limit: int = ENUMERATION_LIMIT,
) -> float:
    """Free energy via independent contiguous sub-ranges merged afterwards.

    The merge is a log-sum-exp over per-part (max, sum) pairs; it must agree
    with the single-pass result to 1e-12 absolute regardless of `parts`.
    """
    beta = check_beta(beta)
    if parts < 1:
        raise ValueError(f"parts must be >= 1, got {parts}")
    energies = energy_table(model, limit)
    n = model.n
    chunks = np.array_split(beta * energies, parts)
    partial = np.array([logsumexp(c) for c in chunks if c.size])
    return float(logsumexp(partial) - n * LOG2) / n
