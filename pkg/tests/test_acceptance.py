"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Tolerances are stated inline.  Ensembles are seeded deterministically, so
every run evaluates the same disorder samples.
"""

import json

import numpy as np
from scipy.stats import binom

from glasslab.cli import main
from glasslab.concentration import (
    gibbs_l1_concentration,
    moment_bound_audit,
    tail_bound_audit,
    concentration_report,
)
from glasslab.exact import energy_table, enumerate_gibbs, free_energy_curve, \
    gibbs_weights, log_partition_per_spin
from glasslab.mc import (
    integrated_autocorr_time,
    parallel_tempering_run,
    reference_anchor,
    thermo_integrate,
)
from glasslab.models import ModelSpec
from glasslab.replicas import exact_overlap_moment, gg_residual, ibp_audit
from glasslab.seeds import derive_seed


def report(criterion: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[acceptance {criterion}] {status}: {detail}")


def plugin_e_ref(energies: np.ndarray, beta: float, n: int) -> float:
    return float(gibbs_weights(energies, beta) @ energies) / n


def test_criterion_1_closed_form_oracle():
    """ConstantField h=1: F = log cosh(beta), u = tanh(beta) to 1e-12."""
    h = 1.0
    worst = 0.0
    for n in (8, 16, 20):
        for beta in (0.5, 1.0):
            summary = enumerate_gibbs(ModelSpec.constant_field(n, h), beta)
            worst = max(
                worst,
                abs(summary.free_energy - np.log(np.cosh(beta * h))),
                abs(summary.energy_density_mean - h * np.tanh(beta * h)),
            )
    ok = worst <= 1e-12
    report(1, ok, f"max closed-form deviation {worst:.2e} (tol 1e-12)")
    assert ok


def _sk_ensemble():
    cases = []
    for n in (6, 8, 10):
        for seed_idx in range(100):
            model = ModelSpec.sk_from_seed(n, derive_seed(1000 + n, seed_idx))
            cases.append((model, energy_table(model)))
    return cases


ENSEMBLE = _sk_ensemble()


def test_criterion_2_deterministic_proof_chains():
    """Tail and moment chains: zero violations beyond 1e-9 slack over
    300 SK samples x 3 betas x (10 epsilon x 8 lambda) grid."""
    epsilons = [round(0.05 * i, 2) for i in range(1, 11)]
    lambdas = [round(0.05 * i, 2) for i in range(1, 9)]
    checked = violations = 0
    for model, energies in ENSEMBLE:
        n = model.n
        for beta in (0.5, 1.0, 1.5):
            e_ref = plugin_e_ref(energies, beta, n)
            for audit in tail_bound_audit(model, beta, epsilons, lambdas,
                                          e_ref, energies=energies):
                checked += 1
                violations += not audit.passed
            moment = moment_bound_audit(model, beta, 0.2, e_ref,
                                        energies=energies)
            checked += 1
            violations += not moment.passed
    ok = violations == 0
    report(2, ok, f"{violations} violations in {checked} audited inequalities")
    assert ok


def test_criterion_3_concentration_set_bounds():
    """Outside mass <= 2 exp(-N^0.4) and restricted gap <= same/N with the
    plug-in reference, c = c' = 0.3: zero violations."""
    checked = violations = 0
    for model, energies in ENSEMBLE:
        for beta in (0.5, 1.0, 1.5):
            rep = concentration_report(model, beta, 0.3, 0.3, energies=energies)
            checked += 1
            violations += not (rep.audit_ii and rep.audit_iii)
    ok = violations == 0
    report(3, ok, f"{violations} violations in {checked} reports")
    assert ok


def field_l1_oracle(n: int, beta: float, h: float = 1.0) -> float:
    # binomial law of the magnetization under the product Gibbs measure
    p = np.exp(beta * h) / (2 * np.cosh(beta * h))
    k = np.arange(n + 1)
    values = h * (2 * k - n) / n
    return float(binom.pmf(k, n, p) @ np.abs(values - h * np.tanh(beta * h)))


def test_criterion_4_l1_concentration_trend():
    """Disorder-mean Gibbs L1 deviation strictly decreasing in N within
    2 stderr for SK (200 seeds); field analogue decreasing and equal to the
    binomial oracle (tolerance 1e-10, the measure has no disorder)."""
    ns = (6, 8, 10, 12)
    means, errs = [], []
    for n in ns:
        models = [ModelSpec.sk_from_seed(n, derive_seed(4000 + n, i))
                  for i in range(200)]
        res = gibbs_l1_concentration(models, 1.0)
        means.append(res.disorder_mean)
        errs.append(res.stderr)
    sk_ok = all(
        means[i + 1] < means[i] + 2 * np.hypot(errs[i], errs[i + 1])
        for i in range(len(ns) - 1)
    )
    field_vals, oracle_gap = [], 0.0
    for n in ns:
        res = gibbs_l1_concentration([ModelSpec.constant_field(n, 1.0)], 1.0)
        field_vals.append(res.disorder_mean)
        oracle_gap = max(oracle_gap, abs(res.disorder_mean - field_l1_oracle(n, 1.0)))
    field_ok = all(b < a for a, b in zip(field_vals, field_vals[1:]))
    oracle_ok = oracle_gap <= 1e-10
    ok = sk_ok and field_ok and oracle_ok
    report(4, ok, f"SK means {np.round(means, 4).tolist()} decreasing={sk_ok}, "
                  f"field decreasing={field_ok}, oracle gap {oracle_gap:.1e}")
    assert ok


def test_criterion_5_gaussian_ibp():
    """Corrected identity holds (|z| <= 3) for phi in {1, R^2} at
    beta in {0.5, 1.0}, 500 SK seeds at N=8; the uncorrected form fails
    (|z| > 5) at beta = 0.5."""
    models = [ModelSpec.sk_from_seed(8, derive_seed(5000, i)) for i in range(500)]
    zs, ok = {}, True
    for beta in (0.5, 1.0):
        for phi in ("one", "r2"):
            audit = ibp_audit(models, beta, 2, phi)
            zs[(beta, phi)] = audit.z_score
            ok &= abs(audit.z_score) <= 3.0
    uncorrected = ibp_audit(models, 0.5, 2, "r2").z_score_uncorrected
    ok &= abs(uncorrected) > 5.0
    detail = ", ".join(f"z(beta={b},phi={p})={z:+.2f}" for (b, p), z in zs.items())
    report(5, ok, f"{detail}; uncorrected z at beta=0.5 = {uncorrected:+.1f}")
    assert ok


def test_criterion_6_gg_residual():
    """|residual| within its L1 bound (3 stderr) at every N in {6,8,10,12}
    over 500 seeds, non-increasing in N within 2 stderr; phi = 1 residual
    zero to 1e-12 in exact mode."""
    ns = (6, 8, 10, 12)
    reports = []
    for n in ns:
        models = [ModelSpec.sk_from_seed(n, derive_seed(6000 + n, i))
                  for i in range(500)]
        reports.append(gg_residual(models, 1.0, 2, "r2"))
    bound_ok = all(r.passed for r in reports)
    mags = [abs(r.residual) for r in reports]
    ses = [r.stderr for r in reports]
    trend_ok = all(
        mags[i + 1] <= mags[i] + 2 * np.hypot(ses[i], ses[i + 1])
        for i in range(len(ns) - 1)
    )
    one_models = [ModelSpec.sk_from_seed(8, derive_seed(6500, i)) for i in range(10)]
    one_res = abs(gg_residual(one_models, 1.0, 2, "one").residual)
    one_ok = one_res <= 1e-12
    ok = bound_ok and trend_ok and one_ok
    report(6, ok, f"|residual| by N {np.round(mags, 5).tolist()}, "
                  f"bounds={bound_ok}, trend={trend_ok}, phi=1 residual {one_res:.1e}")
    assert ok


def test_criterion_7_mc_vs_exact():
    """PT (20k sweeps, N=12): u and <R^2> within 3 adjusted stderr of
    enumeration on >= 95% of grid points; integrated free energy within
    3 reported errors at beta = 1."""
    n = 12
    model = ModelSpec.sk_from_seed(n, derive_seed(7000, 0))
    betas = [round(0.2 * i, 10) for i in range(1, 9)]
    run_a = parallel_tempering_run(model, betas, sweeps=20_000, seed=71)
    run_b = parallel_tempering_run(model, betas, sweeps=20_000, seed=72)
    energies = energy_table(model)
    passes = total = 0
    for s in run_a.summaries:
        exact_u = plugin_e_ref(energies, s.beta, n)
        total += 1
        passes += abs(s.u_mean - exact_u) <= 3 * s.u_stderr
    for i, beta in enumerate(betas):
        a = run_a.retained[i].astype(float)
        b = run_b.retained[i].astype(float)
        m = min(len(a), len(b))
        r2 = ((a[:m] * b[:m]).sum(axis=1) / n) ** 2
        tau = integrated_autocorr_time(r2)
        se = r2.std(ddof=1) * np.sqrt(2 * tau / m)
        exact_r2 = exact_overlap_moment(model, beta, 2)
        total += 1
        passes += abs(r2.mean() - exact_r2) <= 3 * se
    fraction = passes / total
    traces = [reference_anchor(model)] + list(run_a.summaries)
    f_hat, err = thermo_integrate(traces, 1.0)
    f_exact = log_partition_per_spin(energies, 1.0, n)
    thermo_ok = abs(f_hat - f_exact) <= 3 * err
    ok = fraction >= 0.95 and thermo_ok
    report(7, ok, f"{passes}/{total} grid checks within 3 stderr "
                  f"({fraction:.0%}); |F_hat - F| = {abs(f_hat - f_exact):.2e} "
                  f"vs 3*err = {3 * err:.2e}")
    assert ok


def test_criterion_8_convexity_and_derivative():
    """Second differences of F >= -1e-9 on a 0.05 grid over [0.1, 2.0] and
    <H/N> matches centered differences with constant <= 10 (50 seeds, N=10)."""
    step = 0.05
    betas = np.round(np.arange(0.1, 2.0 + step / 2, step), 10)
    worst_second = np.inf
    worst_const = 0.0
    for i in range(50):
        model = ModelSpec.sk_from_seed(10, derive_seed(8000, i))
        rows = free_energy_curve(model, betas)
        f = np.array([r[1] for r in rows])
        u = np.array([r[2] for r in rows])
        second = f[2:] - 2 * f[1:-1] + f[:-2]
        worst_second = min(worst_second, float(second.min()))
        fd = (f[2:] - f[:-2]) / (2 * step)
        worst_const = max(worst_const, float(np.max(np.abs(fd - u[1:-1]))) / step**2)
    ok = worst_second >= -1e-9 and worst_const <= 10.0
    report(8, ok, f"min second difference {worst_second:.2e} (tol -1e-9), "
                  f"derivative-mismatch constant {worst_const:.2f} (tol 10)")
    assert ok


def test_criterion_9_reproducibility(tmp_path):
    """Re-running a CLI configuration yields byte-identical data files."""
    argv = ["concentration", "--model", "sk", "--n", "10", "--beta", "1.0",
            "--samples", "5", "--seed", "17", "--no-plots"]
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(out_a)]) == 0
    assert main(argv + ["--out", str(out_b)]) == 0
    hashes_a = json.loads((out_a / "manifest.json").read_text())["file_hashes"]
    hashes_b = json.loads((out_b / "manifest.json").read_text())["file_hashes"]
    same_hashes = hashes_a == hashes_b
    same_bytes = all(
        (out_a / rel).read_bytes() == (out_b / rel).read_bytes()
        for rel in hashes_a
    )
    ok = same_hashes and same_bytes and len(hashes_a) > 0
    report(9, ok, f"{len(hashes_a)} data files byte-identical across reruns")
    assert ok
