"""Metropolis and parallel-tempering sampling of the Gibbs measure.

The Gibbs weight is exp(+beta*H), matching the sign convention of the rest
of the package: energy-RAISING moves are always accepted.  Sweeps visit
sites in fixed order; each proposal draws a uniform candidate spin and
accepts it with probability min(1, exp(beta*dH)), so a beta=0 sweep is a
uniform refresh of every site.  Per-proposal detailed balance holds and the
composed sweep kernel leaves the Gibbs measure invariant.

All chains own private numpy PCG64 generator streams derived from the run
seed, so output is bit-reproducible and independent of physical parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .models import CONSTANT_FIELD, ModelSpec, SpinConfiguration, check_beta, hamiltonian
from .replicas import ReplicaBatch
from .seeds import derive_seed

#: Fraction of sweeps discarded as burn-in when not given explicitly.
BURN_IN_FRACTION = 0.2

#: Sweeps between full energy recomputations of the incremental cache.
RESYNC_INTERVAL = 1000

#: Tolerance for the cached-vs-recomputed energy integrity check.
CACHE_TOLERANCE = 1e-8


@njit(cache=True)
def _sweep_kernel(spins, local, a, d, beta, h, u, trace, energy):
    """Run u.shape[0] fixed-order sweeps in place; returns the cached energy.

    spins: +/-1 floats; local = a @ spins is maintained incrementally;
    u[t, 2k] picks the candidate spin at site k, u[t, 2k+1] decides acceptance.
    trace[t] receives the post-sweep energy density.
    """
    n = spins.shape[0]
    for t in range(u.shape[0]):
        for k in range(n):
            cand = 1.0 if u[t, 2 * k] < 0.5 else -1.0
            if cand != spins[k]:
                dh = -2.0 * spins[k] * (local[k] - 2.0 * d[k] * spins[k] + h)
                if dh >= 0.0 or u[t, 2 * k + 1] < np.exp(beta * dh):
                    spins[k] = cand
                    energy += dh
                    for j in range(n):
                        local[j] += 2.0 * cand * a[j, k]
        trace[t] = energy / n
    return energy


def _kernel_params(model: ModelSpec):
    n = model.n
    if model.kind == CONSTANT_FIELD:
        a = np.zeros((n, n))
        d = np.zeros(n)
        h = model.field_strength
    else:
        g = model.disorder.couplings
        a = (g + g.T) / np.sqrt(n)
        d = np.diag(g) / np.sqrt(n)
        h = 0.0
    return a, d, h


@dataclass
class ChainState:
    """One Markov chain: configuration, cached energy, and its RNG stream."""

    model: ModelSpec
    beta: float
    spins: np.ndarray
    local: np.ndarray
    energy: float
    rng: np.random.Generator
    sweep_count: int = 0

    @classmethod
    def create(cls, model: ModelSpec, beta: float, seed: int) -> "ChainState":
        beta = check_beta(beta)
        rng = np.random.Generator(np.random.PCG64(seed))
        spins = np.where(rng.random(model.n) < 0.5, -1.0, 1.0)
        a, _, _ = _kernel_params(model)
        state = cls(model=model, beta=beta, spins=spins, local=a @ spins,
                    energy=0.0, rng=rng)
        state.energy = state.recompute_energy()
        return state

    @property
    def config(self) -> SpinConfiguration:
        return SpinConfiguration.from_spins(self.spins.astype(np.int8))

    def recompute_energy(self) -> float:
        return hamiltonian(self.model, SpinConfiguration.from_spins(
            self.spins.astype(np.int8)))

    def resync(self) -> None:
        """Check the incremental energy cache against a full recomputation."""
        exact = self.recompute_energy()
        if abs(exact - self.energy) > CACHE_TOLERANCE:
            raise RuntimeError(
                f"energy cache drifted by {abs(exact - self.energy):.3e} "
                f"after {self.sweep_count} sweeps"
            )
        self.energy = exact


def metropolis_sweeps(state: ChainState, sweeps: int = 1,
                      resync_interval: int = RESYNC_INTERVAL) -> np.ndarray:
    """Advance the chain by `sweeps` sweeps; returns the energy-density trace."""
    if sweeps < 1:
        raise ValueError(f"sweeps must be >= 1, got {sweeps}")
    a, d, h = _kernel_params(state.model)
    trace = np.empty(sweeps)
    done = 0
    while done < sweeps:
        block = min(sweeps - done, resync_interval)
        u = state.rng.random((block, 2 * state.model.n))
        state.energy = _sweep_kernel(
            state.spins, state.local, a, d, state.beta, h, u,
            trace[done:done + block], state.energy,
        )
        state.sweep_count += block
        done += block
        state.resync()
    return trace


def metropolis_sweep(state: ChainState) -> ChainState:
    """One fixed-order sweep of N proposals; mutates and returns the state."""
    metropolis_sweeps(state, 1)
    return state


@dataclass(frozen=True)
class TemperatureLadder:
    """Strictly increasing inverse temperatures with swap statistics."""

    betas: tuple[float, ...]
    swap_acceptance: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.betas) < 1:
            raise ValueError("ladder needs at least one temperature")
        if any(b2 <= b1 for b1, b2 in zip(self.betas, self.betas[1:])):
            raise ValueError("ladder betas must be strictly increasing")
        for b in self.betas:
            check_beta(b)


@dataclass(frozen=True)
class TraceSummary:
    """Autocorrelation-adjusted estimate of <H/N>_beta from one trace."""

    beta: float
    u_mean: float
    u_stderr: float
    n_samples: int
    burn_in: int
    tau: float = 1.0

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _auto_window(taus: np.ndarray, c: float) -> int:
    m = np.arange(len(taus)) >= c * taus
    if m.any():
        return int(np.argmax(m))
    return len(taus) - 1


def integrated_autocorr_time(x: np.ndarray, c: float = 6.0) -> float:
    """Integrated autocorrelation time with automatic windowing."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        return 1.0
    xc = x - x.mean()
    if not np.any(xc):
        return 1.0
    f = np.fft.irfft(np.abs(np.fft.rfft(xc, 2 * n)) ** 2)[:n]
    rho = f / f[0]
    taus = 2.0 * np.cumsum(rho) - 1.0
    return float(max(taus[_auto_window(taus, c)], 1.0))


def summarize_trace(trace: np.ndarray, beta: float, burn_in: int) -> TraceSummary:
    if burn_in >= len(trace):
        raise ValueError("burn-in must be smaller than the trace length")
    kept = trace[burn_in:]
    tau = integrated_autocorr_time(kept)
    stderr = float(np.sqrt(kept.var(ddof=0) * tau / len(kept))) if len(kept) > 1 else 0.0
    return TraceSummary(
        beta=beta,
        u_mean=float(kept.mean()),
        u_stderr=stderr,
        n_samples=len(kept),
        burn_in=burn_in,
        tau=tau,
    )


@dataclass
class PTResult:
    """Parallel-tempering output: per-beta summaries, traces, retained
    configurations, and adjacent-pair swap acceptance rates."""

    ladder: TemperatureLadder
    summaries: list[TraceSummary]
    traces: np.ndarray
    retained: list[np.ndarray]
    swap_acceptance: list[float]


def swap_acceptance_probability(
    beta_i: float, beta_j: float, energy_i: float, energy_j: float
) -> float:
    """min(1, exp((beta_i - beta_j)(H_j - H_i))); 1 for identical betas."""
    delta = (beta_i - beta_j) * (energy_j - energy_i)
    return float(np.exp(min(delta, 0.0)))


def parallel_tempering_run(
    model: ModelSpec,
    ladder: TemperatureLadder | Sequence[float],
    sweeps: int,
    swap_interval: int = 10,
    seed: int = 0,
    burn_in: Optional[int] = None,
) -> PTResult:
    """Replica-exchange Metropolis over a beta ladder.

    Every `swap_interval` sweeps, adjacent pairs (alternating even/odd
    pairing) propose a configuration exchange accepted with probability
    min(1, exp((beta_i - beta_j)(H_j - H_i))).  Configurations are retained
    per beta at the end of every post-burn-in swap block.
    """
    if not isinstance(ladder, TemperatureLadder):
        ladder = TemperatureLadder(betas=tuple(float(b) for b in ladder))
    if sweeps < 1 or swap_interval < 1:
        raise ValueError("sweeps and swap_interval must be >= 1")
    if burn_in is None:
        burn_in = int(BURN_IN_FRACTION * sweeps)
    if burn_in >= sweeps:
        raise ValueError("burn-in must be smaller than the sweep count")
    betas = ladder.betas
    n_chains = len(betas)
    chains = [
        ChainState.create(model, b, derive_seed(seed, i))
        for i, b in enumerate(betas)
    ]
    swap_rng = np.random.Generator(np.random.PCG64(derive_seed(seed, n_chains)))
    a, d, h = _kernel_params(model)
    traces = np.empty((n_chains, sweeps))
    retained: list[list[np.ndarray]] = [[] for _ in range(n_chains)]
    attempts = np.zeros(max(n_chains - 1, 1))
    accepts = np.zeros(max(n_chains - 1, 1))
    done = 0
    block_index = 0
    while done < sweeps:
        block = min(sweeps - done, swap_interval)
        for i, ch in enumerate(chains):
            u = ch.rng.random((block, 2 * model.n))
            ch.energy = _sweep_kernel(
                ch.spins, ch.local, a, d, ch.beta, h, u,
                traces[i, done:done + block], ch.energy,
            )
            ch.sweep_count += block
        done += block
        if n_chains > 1 and done < sweeps:
            start = block_index % 2
            for i in range(start, n_chains - 1, 2):
                lo, hi = chains[i], chains[i + 1]
                prob = swap_acceptance_probability(
                    betas[i], betas[i + 1], lo.energy, hi.energy
                )
                attempts[i] += 1
                if swap_rng.random() < prob:
                    accepts[i] += 1
                    lo.spins, hi.spins = hi.spins, lo.spins
                    lo.local, hi.local = hi.local, lo.local
                    lo.energy, hi.energy = hi.energy, lo.energy
        if done >= burn_in:
            for i, ch in enumerate(chains):
                retained[i].append(ch.spins.astype(np.int8).copy())
        block_index += 1
    for ch in chains:
        ch.resync()
    summaries = [
        summarize_trace(traces[i], betas[i], burn_in) for i in range(n_chains)
    ]
    rates = [
        float(accepts[i] / attempts[i]) if attempts[i] else float("nan")
        for i in range(max(n_chains - 1, 0))
    ]
    return PTResult(
        ladder=TemperatureLadder(betas=betas, swap_acceptance=tuple(rates)),
        summaries=summaries,
        traces=traces,
        retained=[np.array(r) for r in retained],
        swap_acceptance=rates,
    )


def metropolis_run(
    model: ModelSpec, beta: float, sweeps: int, seed: int = 0,
    burn_in: Optional[int] = None,
) -> tuple[TraceSummary, np.ndarray, ChainState]:
    """Plain single-chain Metropolis; stream-identical to a one-rung ladder."""
    if burn_in is None:
        burn_in = int(BURN_IN_FRACTION * sweeps)
    state = ChainState.create(model, beta, derive_seed(seed, 0))
    trace = metropolis_sweeps(state, sweeps)
    return summarize_trace(trace, beta, burn_in), trace, state


def exact_reference_u0(model: ModelSpec) -> float:
    """<H/N> under the uniform prior, the exact beta=0 integration anchor."""
    if model.kind == CONSTANT_FIELD:
        return 0.0
    return float(np.trace(model.disorder.couplings)) / model.n ** 1.5


def reference_anchor(model: ModelSpec) -> TraceSummary:
    """Exact beta=0 trace summary (zero stderr) for thermodynamic integration."""
    return TraceSummary(beta=0.0, u_mean=exact_reference_u0(model),
                        u_stderr=0.0, n_samples=0, burn_in=0)


def thermo_integrate(
    traces: Sequence[TraceSummary], target_beta: float
) -> tuple[float, float]:
    """F_N(target) as the trapezoidal integral of <H/N> from 0, with error.

    Requires a grid starting at beta = 0 and covering the target.  The
    returned error combines the propagated trace stderrs (trapezoid weights,
    in quadrature) and an O(h^2) quadrature term estimated from the endpoint
    slopes of the integrand.
    """
    target_beta = check_beta(target_beta)
    if not traces:
        raise ValueError("need at least one trace summary")
    betas = np.array([t.beta for t in traces])
    if np.any(np.diff(betas) <= 0):
        raise ValueError("trace grid must be strictly increasing in beta")
    if abs(betas[0]) > 1e-12:
        raise ValueError("trace grid must start at beta = 0")
    if target_beta > betas[-1] + 1e-12:
        raise ValueError(
            f"trace grid (max beta {betas[-1]}) does not cover target {target_beta}"
        )
    if target_beta == 0.0:
        return 0.0, 0.0
    u = np.array([t.u_mean for t in traces])
    sig = np.array([t.u_stderr for t in traces])
    keep = betas <= target_beta + 1e-12
    bg, ug, sg = betas[keep], u[keep], sig[keep]
    if bg[-1] < target_beta - 1e-12:
        # interpolate the integrand at the target
        ut = float(np.interp(target_beta, betas, u))
        st = float(np.interp(target_beta, betas, sig))
        bg = np.append(bg, target_beta)
        ug = np.append(ug, ut)
        sg = np.append(sg, st)
    f_hat = float(np.trapezoid(ug, bg))
    steps = np.diff(bg)
    weights = np.zeros_like(bg)
    weights[:-1] += steps / 2
    weights[1:] += steps / 2
    stat_err = float(np.sqrt(np.sum((weights * sg) ** 2)))
    if len(bg) > 2:
        slope_a = (ug[1] - ug[0]) / steps[0]
        slope_b = (ug[-1] - ug[-2]) / steps[-1]
        quad_err = float(steps.max() ** 2 / 12.0 * abs(slope_b - slope_a))
    else:
        quad_err = float(steps.max() ** 2 / 12.0 * abs(ug[-1] - ug[0]))
    return f_hat, stat_err + quad_err


def sample_replicas(
    model: ModelSpec,
    beta: float,
    k: int,
    sweeps: int,
    thin: Optional[int] = None,
    seed: int = 0,
    burn_in: Optional[int] = None,
) -> ReplicaBatch:
    """k independent chains on the same disorder; thinned retained configs.

    Chains get distinct derived RNG streams and random starts.  Configurations
    retained across chains at the same thinning index approximate i.i.d.
    draws from the Gibbs measure.
    """
    beta = check_beta(beta)
    if k < 2:
        raise ValueError(f"need at least 2 replicas, got {k}")
    if thin is None:
        thin = 1  # one sweep = N proposals between retained samples
    if burn_in is None:
        burn_in = int(BURN_IN_FRACTION * sweeps)
    if burn_in >= sweeps:
        raise ValueError("burn-in must be smaller than the sweep count")
    m = (sweeps - burn_in) // thin
    if m < 1:
        raise ValueError("no retained samples: increase sweeps or lower thin")
    spins_out = np.empty((k, m, model.n), dtype=np.int8)
    for i in range(k):
        state = ChainState.create(model, beta, derive_seed(seed, i))
        if burn_in:
            metropolis_sweeps(state, burn_in)
        for j in range(m):
            metropolis_sweeps(state, thin)
            spins_out[i, j] = state.spins.astype(np.int8)
        state.resync()
    disorder_seed = model.disorder.seed if model.disorder is not None else None
    return ReplicaBatch(
        n=model.n, beta=beta, spins=spins_out, source="mc-chains",
        disorder_seed=disorder_seed,
    )
