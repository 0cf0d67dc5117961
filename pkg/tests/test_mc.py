"""Metropolis dynamics, parallel tempering, thermodynamic integration."""

import numpy as np
import pytest

from glasslab.exact import energy_table, gibbs_weights, log_partition_per_spin
from glasslab.mc import (
    ChainState,
    TemperatureLadder,
    integrated_autocorr_time,
    metropolis_run,
    metropolis_sweeps,
    parallel_tempering_run,
    reference_anchor,
    sample_replicas,
    summarize_trace,
    swap_acceptance_probability,
    thermo_integrate,
)
from glasslab.models import ModelSpec
from glasslab.seeds import derive_seed


def spins_to_index(spins):
    return int(sum(1 << i for i, s in enumerate(spins) if s > 0))


def test_chain_energy_cache_consistent():
    model = ModelSpec.sk_from_seed(10, 3)
    state = ChainState.create(model, 1.0, 42)
    metropolis_sweeps(state, 250)
    assert state.energy == pytest.approx(state.recompute_energy(), abs=1e-8)


def test_sweeps_chunking_invariant():
    # the uniform stream is consumed per sweep, so 60 sweeps in one call and
    # in three calls of 20 must land in the same state
    model = ModelSpec.sk_from_seed(8, 5)
    a = ChainState.create(model, 0.9, 7)
    b = ChainState.create(model, 0.9, 7)
    trace_a = metropolis_sweeps(a, 60)
    parts = [metropolis_sweeps(b, 20) for _ in range(3)]
    # each call ends by snapping the cached energy to a full recomputation,
    # so traces agree to machine precision and the walks are identical
    np.testing.assert_allclose(trace_a, np.concatenate(parts), atol=1e-12)
    np.testing.assert_array_equal(a.spins, b.spins)


def test_beta_zero_is_uniform_refresh():
    # at beta = 0 every proposal is a fresh uniform candidate, so the
    # visited configurations are uniform on the hypercube
    model = ModelSpec.sk_from_seed(4, 0)
    state = ChainState.create(model, 0.0, 11)
    counts = np.zeros(16)
    sweeps = 8000
    for _ in range(sweeps):
        metropolis_sweeps(state, 1)
        counts[spins_to_index(state.spins)] += 1
    freq = counts / sweeps
    assert np.max(np.abs(freq - 1 / 16)) < 5 * np.sqrt((1 / 16) * (15 / 16) / sweeps) * 4


def test_stationary_distribution_matches_gibbs():
    # empirical visit frequencies at N=4 against the exact Gibbs
    # weights from enumeration; tolerance is a loose multiple of the binomial
    # standard error since successive sweeps are correlated
    model = ModelSpec.sk_from_seed(4, 9)
    beta = 0.8
    energies = energy_table(model)
    probs = gibbs_weights(energies, beta)
    state = ChainState.create(model, beta, 23)
    metropolis_sweeps(state, 500)
    counts = np.zeros(16)
    sweeps = 60_000
    for _ in range(sweeps):
        metropolis_sweeps(state, 1)
        counts[spins_to_index(state.spins)] += 1
    freq = counts / sweeps
    for idx in range(16):
        se = np.sqrt(probs[idx] * (1 - probs[idx]) / sweeps)
        assert abs(freq[idx] - probs[idx]) < 12 * se + 1e-3


def test_energy_raising_moves_always_accepted():
    # with Gibbs weight exp(+beta H), moves that raise H are always
    # accepted and at very large beta lowering moves are essentially never
    # accepted, so the energy trace is non-decreasing and reaches the maximum
    model = ModelSpec.sk_from_seed(6, 1)
    state = ChainState.create(model, 60.0, 3)
    trace = metropolis_sweeps(state, 400)
    assert np.min(np.diff(trace)) >= -1e-9
    # the chain ends in a single-flip local maximum of the energy
    from glasslab.models import energy_flip_delta

    final = state.config
    assert all(energy_flip_delta(model, final, k) <= 1e-9 for k in range(6))


def test_swap_acceptance_probability_rules():
    # equal energies or equal temperatures give certain acceptance
    assert swap_acceptance_probability(0.5, 1.0, -3.0, -3.0) == 1.0
    assert swap_acceptance_probability(1.0, 1.0, -3.0, 4.0) == 1.0
    # moving the hotter chain onto the higher energy is always accepted;
    # the reverse exchange is exponentially damped
    assert swap_acceptance_probability(0.5, 1.0, 4.0, -3.0) == 1.0
    p = swap_acceptance_probability(0.5, 1.0, -3.0, 4.0)
    assert p == pytest.approx(np.exp((0.5 - 1.0) * (4.0 - (-3.0))))


def test_ladder_must_increase():
    with pytest.raises(ValueError):
        TemperatureLadder(betas=(0.5, 0.5, 1.0))
    with pytest.raises(ValueError):
        TemperatureLadder(betas=(1.0, 0.5))


def test_single_rung_pt_equals_metropolis():
    model = ModelSpec.sk_from_seed(8, 2)
    result = parallel_tempering_run(model, [1.0], sweeps=300, seed=6)
    _, trace, _ = metropolis_run(model, 1.0, sweeps=300, seed=6)
    np.testing.assert_array_equal(result.traces[0], trace)


def test_pt_matches_enumeration():
    model = ModelSpec.sk_from_seed(10, 14)
    betas = [0.4, 0.8, 1.2]
    result = parallel_tempering_run(model, betas, sweeps=6000, seed=8)
    energies = energy_table(model)
    for s in result.summaries:
        exact_u = float(gibbs_weights(energies, s.beta) @ energies) / 10
        assert abs(s.u_mean - exact_u) < 4 * s.u_stderr + 0.02
    assert all(0.0 <= r <= 1.0 for r in result.swap_acceptance)
    assert len(result.swap_acceptance) == len(betas) - 1


def test_pt_deterministic():
    model = ModelSpec.sk_from_seed(8, 4)
    a = parallel_tempering_run(model, [0.5, 1.0], sweeps=200, seed=3)
    b = parallel_tempering_run(model, [0.5, 1.0], sweeps=200, seed=3)
    np.testing.assert_array_equal(a.traces, b.traces)
    c = parallel_tempering_run(model, [0.5, 1.0], sweeps=200, seed=4)
    assert not np.array_equal(a.traces, c.traces)


def test_integrated_autocorr_time():
    rng = np.random.default_rng(0)
    iid = rng.normal(size=20_000)
    assert integrated_autocorr_time(iid) == pytest.approx(1.0, abs=0.15)
    # AR(1) with coefficient rho has tau = (1+rho)/(1-rho)
    rho = 0.8
    x = np.empty(200_000)
    x[0] = 0.0
    noise = rng.normal(size=x.size)
    for t in range(1, x.size):
        x[t] = rho * x[t - 1] + noise[t]
    assert integrated_autocorr_time(x) == pytest.approx((1 + rho) / (1 - rho), rel=0.2)


def test_summarize_trace_inflates_stderr():
    rng = np.random.default_rng(1)
    trace = np.repeat(rng.normal(size=500), 10)  # strongly correlated
    s = summarize_trace(trace, 1.0, burn_in=0)
    naive = trace.std(ddof=1) / np.sqrt(trace.size)
    assert s.u_stderr > 2 * naive
    assert s.tau > 5


def test_reference_anchor():
    model = ModelSpec.sk_from_seed(9, 7)
    anchor = reference_anchor(model)
    assert anchor.beta == 0.0 and anchor.u_stderr == 0.0
    expected = np.trace(model.disorder.couplings) / 9**1.5
    assert anchor.u_mean == pytest.approx(expected)
    field = ModelSpec.constant_field(5, 2.0)
    assert reference_anchor(field).u_mean == 0.0


def test_thermo_integrate_exact_integrand():
    # feeding the exact integrand u(beta) = tanh(beta) reproduces
    # log cosh within the reported quadrature error
    from glasslab.mc import TraceSummary

    betas = np.linspace(0.0, 1.0, 21)
    traces = [
        TraceSummary(beta=b, u_mean=float(np.tanh(b)), u_stderr=0.0,
                     n_samples=1, burn_in=0)
        for b in betas
    ]
    f_hat, err = thermo_integrate(traces, 1.0)
    exact = float(np.log(np.cosh(1.0)))
    assert abs(f_hat - exact) <= 3 * err + 1e-6
    assert err < 1e-3


def test_thermo_integrate_requires_anchor():
    from glasslab.mc import TraceSummary

    traces = [TraceSummary(beta=0.5, u_mean=0.1, u_stderr=0.0, n_samples=1, burn_in=0)]
    with pytest.raises(ValueError):
        thermo_integrate(traces, 0.5)


def test_thermo_integration_sk_end_to_end():
    model = ModelSpec.sk_from_seed(10, 21)
    betas = np.round(np.arange(0.2, 1.21, 0.2), 10)
    result = parallel_tempering_run(model, betas, sweeps=6000, seed=2)
    traces = [reference_anchor(model)] + list(result.summaries)
    f_hat, err = thermo_integrate(traces, 1.2)
    exact = log_partition_per_spin(energy_table(model), 1.2, 10)
    assert abs(f_hat - exact) <= 3 * err


def test_sample_replicas_shapes_and_validation():
    model = ModelSpec.sk_from_seed(6, 0)
    batch = sample_replicas(model, 1.0, k=3, sweeps=100, seed=5)
    assert batch.spins.shape[0] == 3
    assert batch.spins.shape[2] == 6
    assert set(np.unique(batch.spins)) <= {-1, 1}
    with pytest.raises(ValueError):
        sample_replicas(model, 1.0, k=1, sweeps=100)
    with pytest.raises(ValueError):
        sample_replicas(model, 1.0, k=2, sweeps=10, burn_in=10)


def test_sample_replicas_beta0_overlap():
    # independent uniform replicas have E[R^2] = 1/N
    model = ModelSpec.sk_from_seed(10, 1)
    batch = sample_replicas(model, 0.0, k=2, sweeps=4000, seed=9)
    a, b = batch.spins[0].astype(float), batch.spins[1].astype(float)
    r2 = ((a * b).sum(axis=1) / 10) ** 2
    se = r2.std(ddof=1) / np.sqrt(r2.size)
    assert abs(r2.mean() - 0.1) < 5 * se


def test_derive_seed_gives_distinct_chains():
    model = ModelSpec.sk_from_seed(8, 0)
    s1 = ChainState.create(model, 1.0, derive_seed(0, 0))
    s2 = ChainState.create(model, 1.0, derive_seed(0, 1))
    t1 = metropolis_sweeps(s1, 50)
    t2 = metropolis_sweeps(s2, 50)
    assert not np.array_equal(t1, t2)
