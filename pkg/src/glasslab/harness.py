"""Experiment orchestration: configs, seed bookkeeping, persistence.

Every run writes delimited data (CSV for tables, JSON for structured
reports) plus a manifest recording the echoed configuration, generator
identifiers, per-sample seeds, and content hashes of every data file.
Re-running the same configuration reproduces the data files byte for byte;
only the manifest timestamp differs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import kendalltau

from . import __version__
from .concentration import (
    DEFAULT_C,
    DEFAULT_CPRIME,
    DELTA_WINDOW,
    PLUGIN,
    gibbs_l1_concentration,
    moment_bound_audit,
    sandwich_check,
    tail_bound_audit,
    concentration_report,
)
from .exact import (
    ENUMERATION_LIMIT,
    energy_table,
    enumerate_gibbs,
    gibbs_weights,
    log_partition_per_spin,
)
from .mc import (
    TraceSummary,
    parallel_tempering_run,
    reference_anchor,
    thermo_integrate,
)
from .models import CONSTANT_FIELD, SK, ModelSpec
from .replicas import gg_residual, ibp_audit
from .seeds import GAUSSIAN_RNG_ID, SEED_FN_ID, derive_seed


@dataclass
class ExperimentConfig:
    """Validated parameters for one experiment run."""

    command: str
    model: str = SK
    ns: tuple[int, ...] = ()
    beta: float = 1.0
    betas: tuple[float, ...] = ()
    h: float = 1.0
    c: float = DEFAULT_C
    cprime: float = DEFAULT_CPRIME
    lambda0: float = 0.2
    delta_window: float = DELTA_WINDOW
    samples: int = 1
    sweeps: int = 2000
    swap_interval: int = 10
    chains: int = 2
    thin: int = 1
    replicas: int = 2
    phi: str = "r2"
    mode: str = "auto"
    eref: str = PLUGIN
    kind: str = "tail"
    epsilons: tuple[float, ...] = ()
    lambdas: tuple[float, ...] = ()
    beta_prime: float = 0.9
    epsilon: float = 0.1
    seed: int = 0
    out: str = "out"
    plots: bool = True
    enumeration_limit: int = ENUMERATION_LIMIT

    def validate(self) -> None:
        errors = []
        if self.model not in (SK, CONSTANT_FIELD):
            errors.append(f"model must be sk or field, got {self.model!r}")
        if not self.ns:
            errors.append("N list must be nonempty")
        elif any(n < 1 for n in self.ns) or list(self.ns) != sorted(set(self.ns)):
            errors.append("N list must be positive and strictly increasing")
        if self.beta < 0:
            errors.append("beta must be >= 0")
        if self.c <= 0 or self.cprime <= 0 or self.c + self.cprime >= 1:
            errors.append("exponents must satisfy c>0, c'>0, c+c'<1")
        if not 0 < self.lambda0 < self.delta_window:
            errors.append("lambda0 must lie in (0, delta_window)")
        if self.samples < 1:
            errors.append("samples must be >= 1")
        if self.mode not in ("exact", "mc", "auto"):
            errors.append(f"mode must be exact, mc, or auto, got {self.mode!r}")
        if self.betas and any(
            b2 <= b1 for b1, b2 in zip(self.betas, self.betas[1:])
        ):
            errors.append("beta ladder must be strictly increasing")
        if errors:
            raise ValueError("invalid configuration: " + "; ".join(errors))

    def use_exact(self, n: int) -> bool:
        if self.mode == "exact":
            return True
        if self.mode == "mc":
            return False
        return n <= self.enumeration_limit

    def to_json(self) -> dict:
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


def model_for(config: ExperimentConfig, n: int, sample_index: int) -> ModelSpec:
    if config.model == CONSTANT_FIELD:
        return ModelSpec.constant_field(n, config.h)
    return ModelSpec.sk_from_seed(n, derive_seed(config.seed, sample_index))


def disorder_ensemble(config: ExperimentConfig, n: int) -> list[ModelSpec]:
    return [model_for(config, n, i) for i in range(config.samples)]


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """Provenance record for one run: config echo, seeds, file hashes."""

    config: dict
    rng_id: str = GAUSSIAN_RNG_ID
    seed_fn_id: str = SEED_FN_ID
    per_sample_seeds: list[int] = field(default_factory=list)
    version: str = __version__
    created_at: str = ""
    file_hashes: dict[str, str] = field(default_factory=dict)
    all_passed: bool = True

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "rng_id": self.rng_id,
            "seed_fn_id": self.seed_fn_id,
            "per_sample_seeds": self.per_sample_seeds,
            "version": self.version,
            "created_at": self.created_at,
            "file_hashes": self.file_hashes,
            "all_passed": self.all_passed,
        }


def finish_run(config: ExperimentConfig, files: list[Path], all_passed: bool) -> RunManifest:
    """Hash the data files and write the manifest into the output directory."""
    out = Path(config.out)
    manifest = RunManifest(
        config=config.to_json(),
        per_sample_seeds=[derive_seed(config.seed, i) for i in range(config.samples)],
        created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        file_hashes={str(p.relative_to(out)): sha256_of(p) for p in files},
        all_passed=all_passed,
    )
    write_json(out / "manifest.json", manifest.to_json())
    return manifest


def _resolve_eref(raw: str):
    if raw == PLUGIN:
        return PLUGIN
    return float(raw)


# ----------------------------------------------------------------------
# per-command pipelines; each returns (all_passed, data files written)


def run_exact(config: ExperimentConfig) -> tuple[bool, list[Path]]:
    config.validate()
    out = Path(config.out)
    files = []
    for n in config.ns:
        model = model_for(config, n, 0)
        summary = enumerate_gibbs(model, config.beta, limit=config.enumeration_limit)
        files.append(write_json(out / f"exact-{n}.json", summary.to_json()))
        files.append(write_csv(
            out / f"histogram-{n}.csv",
            ["bin_left", "bin_right", "gibbs_mass"],
            summary.histogram_rows(),
        ))
        if config.model == SK:
            files.append(write_json(
                out / f"disorder-{n}.json", model.disorder.to_json()
            ))
    return True, files


def run_concentration(config: ExperimentConfig) -> tuple[bool, list[Path]]:
    config.validate()
    out = Path(config.out)
    eref = _resolve_eref(config.eref)
    files = []
    all_ok = True
    for n in config.ns:
        rows = []
        for i in range(config.samples):
            model = model_for(config, n, i)
            rep = concentration_report(
                model, config.beta, config.c, config.cprime, eref,
                limit=config.enumeration_limit,
            )
            all_ok &= rep.all_pass
            rows.append([
                i, rep.epsilon_n, rep.e_ref, rep.gamma, rep.free_energy,
                rep.gibbs_mass_outside, rep.bound_ii,
                rep.restricted_gap, rep.bound_iii,
                rep.prior_log_mass, rep.entropy_target,
                rep.audit_ii, rep.audit_iii,
            ])
        files.append(write_csv(
            out / f"concentration-{n}.csv",
            ["sample", "epsilon_n", "e_ref", "gamma", "free_energy",
             "gibbs_mass_outside", "bound_ii", "restricted_gap", "bound_iii",
             "prior_log_mass", "entropy_target", "audit_ii", "audit_iii"],
            rows,
        ))
    return all_ok, files


def run_audit(config: ExperimentConfig) -> tuple[bool, list[Path]]:
    config.validate()
    out = Path(config.out)
    files = []
    all_ok = True
    for n in config.ns:
        if config.kind == "tail":
            rows = []
            for i in range(config.samples):
                model = model_for(config, n, i)
                energies = energy_table(model, config.enumeration_limit)
                eref = _resolve_eref(config.eref)
                if eref == PLUGIN:
                    eref = float(gibbs_weights(energies, config.beta) @ energies) / n
                audits = tail_bound_audit(
                    model, config.beta, config.epsilons, config.lambdas, eref,
                    delta_window=config.delta_window, energies=energies,
                )
                for a in audits:
                    all_ok &= a.passed
                    rows.append([
                        i, a.epsilon, a.lam, a.gamma, a.b_plus, a.rhs_plus,
                        a.b_minus, a.rhs_minus, a.gibbs_plus, a.gibbs_minus,
                        a.exp_bound, a.passed,
                    ])
            files.append(write_csv(
                out / f"tail-{n}.csv",
                ["sample", "epsilon", "lambda", "gamma", "b_plus", "rhs_plus",
                 "b_minus", "rhs_minus", "gibbs_plus", "gibbs_minus",
                 "exp_bound", "pass"],
                rows,
            ))
        elif config.kind == "moment":
            rows = []
            for i in range(config.samples):
                model = model_for(config, n, i)
                energies = energy_table(model, config.enumeration_limit)
                eref = _resolve_eref(config.eref)
                if eref == PLUGIN:
                    eref = float(gibbs_weights(energies, config.beta) @ energies) / n
                audit = moment_bound_audit(
                    model, config.beta, config.lambda0, eref,
                    delta_window=config.delta_window, energies=energies,
                )
                all_ok &= audit.passed
                rows.append([
                    i, audit.lhs_plus, audit.lhs_minus, audit.lhs_abs,
                    audit.rhs, audit.one_sided_bound, audit.lambda_selected,
                    audit.gamma0, audit.passed,
                ])
            files.append(write_csv(
                out / f"moment-{n}.csv",
                ["sample", "lhs_plus", "lhs_minus", "lhs_abs", "rhs",
                 "one_sided_bound", "lambda_selected", "gamma0", "pass"],
                rows,
            ))
        elif config.kind == "sandwich":
            reports = []
            for i in range(config.samples):
                model = model_for(config, n, i)
                energies = energy_table(model, config.enumeration_limit)
                e_b = float(gibbs_weights(energies, config.beta) @ energies) / n
                e_bp = float(
                    gibbs_weights(energies, config.beta_prime) @ energies
                ) / n
                eps = max(config.epsilon, 2 * abs(e_b - e_bp))
                check = sandwich_check(
                    model, config.beta, config.beta_prime, eps, e_b, e_bp,
                )
                all_ok &= check.passed
                reports.append({"sample": i, "epsilon": eps, **check.to_json()})
            files.append(write_json(out / f"sandwich-{n}.json", reports))
        else:
            raise ValueError(f"unknown audit kind {config.kind!r}")
    return all_ok, files


def run_gg(config: ExperimentConfig) -> tuple[bool, list[Path]]:
    config.validate()
    out = Path(config.out)
    files = []
    all_ok = True
    rows = []
    for n in config.ns:
        models = disorder_ensemble(config, n)
        mode = "exact" if config.use_exact(n) else "mc"
        if config.mode in ("exact", "mc"):
            mode = config.mode
        report = gg_residual(
            models, config.beta, config.replicas, config.phi, mode=mode,
            mc_sweeps=config.sweeps, mc_seed=derive_seed(config.seed, 1 << 20),
            limit=config.enumeration_limit,
        )
        ibp = ibp_audit(
            models, config.beta, config.replicas, config.phi, mode=mode,
            mc_sweeps=config.sweeps, mc_seed=derive_seed(config.seed, 1 << 21),
            limit=config.enumeration_limit,
        )
        all_ok &= report.passed
        files.append(write_json(out / f"gg-{n}.json", {
            "gg": report.to_json(), "ibp": ibp.to_json(),
        }))
        rows.append([n, config.beta, config.replicas, config.phi,
                     report.residual, report.stderr, report.bound,
                     report.passed])
    files.append(write_csv(
        out / "gg.csv",
        ["N", "beta", "n", "phi_id", "residual", "stderr", "bound", "pass"],
        rows,
    ))
    return all_ok, files


def run_sample(config: ExperimentConfig) -> tuple[bool, list[Path]]:
    config.validate()
    if not config.betas:
        raise ValueError("sample requires a beta ladder (--betas)")
    out = Path(config.out)
    files = []
    for n in config.ns:
        model = model_for(config, n, 0)
        result = parallel_tempering_run(
            model, config.betas, sweeps=config.sweeps,
            swap_interval=config.swap_interval, seed=config.seed,
        )
        trace_rows = []
        for i, beta in enumerate(result.ladder.betas):
            for t, u in enumerate(result.traces[i]):
                trace_rows.append([t, beta, u])
        files.append(write_csv(
            out / f"traces-{n}.csv", ["sweep", "beta", "energy_density"],
            trace_rows,
        ))
        files.append(write_csv(
            out / f"summaries-{n}.csv",
            ["beta", "u_mean", "u_stderr", "tau", "n_samples", "burn_in"],
            [[s.beta, s.u_mean, s.u_stderr, s.tau, s.n_samples, s.burn_in]
             for s in result.summaries],
        ))
        anchored = [reference_anchor(model)] + [
            s for s in result.summaries if s.beta > 0
        ]
        target = max(config.betas)
        f_hat, err = thermo_integrate(anchored, target)
        thermo = {"target_beta": target, "free_energy": f_hat, "error": err}
        if config.use_exact(n):
            energies = energy_table(model, config.enumeration_limit)
            thermo["exact_free_energy"] = log_partition_per_spin(
                energies, target, n
            )
        files.append(write_json(out / f"thermo-{n}.json", thermo))
        configs = {
            str(beta): result.retained[i][-1].tolist()
            for i, beta in enumerate(result.ladder.betas)
            if len(result.retained[i])
        }
        files.append(write_json(out / f"configs-{n}.json", configs))
        files.append(write_json(out / f"swaps-{n}.json", {
            "betas": list(result.ladder.betas),
            "swap_acceptance": result.swap_acceptance,
        }))
    return True, files


def run_sweep(config: ExperimentConfig) -> tuple[bool, list[Path]]:
    """N-sweep trend tables for the asymptotic statements, with Kendall-tau
    monotonicity statistics (trends reported, limits never asserted)."""
    config.validate()
    out = Path(config.out)
    files = []
    all_ok = True
    eps_rows, f_rows, l1_rows, gg_rows = [], [], [], []
    for n in config.ns:
        models = disorder_ensemble(config, n)
        eref = _resolve_eref(config.eref)
        eps_vals, f_vals = [], []
        for m in models:
            rep = concentration_report(
                m, config.beta, config.c, config.cprime, eref,
                limit=config.enumeration_limit,
            )
            all_ok &= rep.all_pass
            eps_vals.append(rep.epsilon_n)
            f_vals.append(rep.free_energy)
        eps_vals, f_vals = np.array(eps_vals), np.array(f_vals)
        k = len(models)
        eps_rows.append([n, eps_vals.mean(),
                         eps_vals.std(ddof=1) / np.sqrt(k) if k > 1 else 0.0])
        f_rows.append([n, f_vals.mean(),
                       f_vals.std(ddof=1) / np.sqrt(k) if k > 1 else 0.0])
        l1 = gibbs_l1_concentration(models, config.beta, eref,
                                    limit=config.enumeration_limit)
        l1_rows.append([n, l1.disorder_mean, l1.stderr, l1.centered_mean])
        if config.model == SK:
            rep = gg_residual(models, config.beta, config.replicas, config.phi,
                              mode="exact", limit=config.enumeration_limit)
            all_ok &= rep.passed
            gg_rows.append([n, rep.residual, rep.stderr, rep.bound])
    files.append(write_csv(out / "epsilon-trend.csv",
                           ["N", "mean_epsilon", "stderr"], eps_rows))
    files.append(write_csv(out / "free-energy-trend.csv",
                           ["N", "mean_free_energy", "stderr"], f_rows))
    files.append(write_csv(out / "l1-trend.csv",
                           ["N", "mean_l1", "stderr", "centered_mean"], l1_rows))
    if gg_rows:
        files.append(write_csv(out / "gg-trend.csv",
                               ["N", "residual", "stderr", "bound"], gg_rows))
    trends = {}
    if len(config.ns) > 1:
        ns = [r[0] for r in eps_rows]
        for name, rows in (("epsilon", eps_rows), ("l1", l1_rows)):
            tau, _ = kendalltau(ns, [r[1] for r in rows])
            trends[name + "_kendall_tau"] = float(tau)
    files.append(write_json(out / "trends.json", trends))
    return all_ok, files


COMMANDS = {
    "exact": run_exact,
    "concentration": run_concentration,
    "audit": run_audit,
    "gg": run_gg,
    "sample": run_sample,
    "sweep": run_sweep,
}


def run_experiment(config: ExperimentConfig) -> RunManifest:
    """Execute the configured pipeline, render figures, write the manifest."""
    try:
        runner = COMMANDS[config.command]
    except KeyError:
        raise ValueError(f"unknown command {config.command!r}") from None
    all_passed, files = runner(config)
    if config.plots:
        from . import plots

        plots.render_for_run(config, files)
    return finish_run(config, files, all_passed)
