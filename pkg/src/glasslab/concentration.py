"""Finite-N audits of free-energy and Gibbs-average concentration.

Everything here checks deterministic inequality chains built from exact
enumeration: the concentration set around a reference energy density, its
Gibbs/prior masses and restricted log partitions, the exponential tail
bounds, the integrated moment bound, exponential equivalence of conditional
measures, and the two-temperature sandwich chains.

The reference energy density ``e_ref`` stands in for the limiting derivative
of the free energy.  The default "plugin" policy uses the finite-N exact
derivative <H/N>_beta, which makes every chain checkable per sample; a fixed
numeric value may be supplied instead (e.g. the closed form of the
constant-field control model).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .exact import (
    ENUMERATION_LIMIT,
    SetMass,
    energy_table,
    gibbs_weights,
    log_partition_per_spin,
    set_mass_from_mask,
)
from .models import ModelSpec, SpinConfiguration, check_beta

#: Half-width of the inverse-temperature window the lambda grids must stay in.
DELTA_WINDOW = 0.5

#: Default concentration-set exponents (must satisfy c + c' < 1).
DEFAULT_C = 0.3
DEFAULT_CPRIME = 0.3

#: Absolute float slack for inequality audits on log-scale quantities.
LOG_SLACK = 1e-9
#: Absolute float slack for inequality audits on probabilities.
MASS_SLACK = 1e-12

PLUGIN = "plugin"

ERefPolicy = Union[str, float]


@dataclass(frozen=True)
class DeltaPair:
    """Finite-difference slopes of the free energy around beta, measured
    against a reference energy density."""

    delta_plus: float
    delta_minus: float
    gamma: float
    lam: float
    beta: float
    e_ref: float


def finite_deltas(
    f_minus: float, f_center: float, f_plus: float, lam: float, e_ref: float,
    beta: float = 0.0,
) -> DeltaPair:
    """Slope defects delta+/- and gamma = max(delta+, delta-, 0).

    Inputs are F_N(beta-lam), F_N(beta), F_N(beta+lam).
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    delta_plus = (f_plus - f_center) / lam - e_ref
    delta_minus = (f_minus - f_center) / lam + e_ref
    gamma = max(delta_plus, delta_minus, 0.0)
    return DeltaPair(delta_plus=delta_plus, delta_minus=delta_minus, gamma=gamma,
                     lam=lam, beta=beta, e_ref=e_ref)


def _resolve_e_ref(policy: ERefPolicy, energies: np.ndarray, beta: float, n: int) -> float:
    if isinstance(policy, str):
        if policy != PLUGIN:
            raise ValueError(f"unknown e_ref policy {policy!r}")
        return float(gibbs_weights(energies, beta) @ energies) / n
    return float(policy)


def _deltas_at(model: ModelSpec, beta: float, lam: float, e_ref: float,
               energies: np.ndarray) -> DeltaPair:
    n = model.n
    f_center = log_partition_per_spin(energies, beta, n)
    f_plus = log_partition_per_spin(energies, beta + lam, n)
    f_minus = log_partition_per_spin(energies, beta - lam, n)
    return finite_deltas(f_minus, f_center, f_plus, lam, e_ref, beta=beta)


@dataclass(frozen=True)
class ConcentrationSetReport:
    """Concentration-set report: epsilon, masses, bounds, and pass/fail audits."""

    n: int
    beta: float
    c: float
    cprime: float
    lambda_n: float
    epsilon_n: float
    e_ref: float
    gamma: float
    free_energy: float
    gibbs_mass_outside: float
    bound_ii: float
    restricted_gap: Optional[float]
    bound_iii: float
    prior_log_mass: Optional[float]
    entropy_target: float
    audit_ii: bool
    audit_iii: bool
    audit_entropy_window: Optional[bool]

    @property
    def all_pass(self) -> bool:
        return bool(self.audit_ii and self.audit_iii)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _validate_exponents(c: float, cprime: float) -> None:
    if c <= 0 or cprime <= 0 or c + cprime >= 1:
        raise ValueError(
            f"exponents must satisfy c>0, c'>0, c+c'<1; got c={c}, c'={cprime}"
        )


def concentration_report(
    model: ModelSpec,
    beta: float,
    c: float = DEFAULT_C,
    cprime: float = DEFAULT_CPRIME,
    e_ref_policy: ERefPolicy = PLUGIN,
    energies: Optional[np.ndarray] = None,
    limit: int = ENUMERATION_LIMIT,
) -> ConcentrationSetReport:
    """Build the concentration set with lambda = N^{-c} and audit its bounds.

    Audits: (ii) the Gibbs mass outside the set is at most 2*exp(-N^{1-(c+c')});
    (iii) the restricted per-spin log partition is within 2*exp(-N^{1-(c+c')})/N
    of the free energy.  The entropy pair (prior log mass vs F - beta*e_ref) is
    reported without asserting equality; the exact window
    |prior_log_mass - (B_C - beta*e_ref)| <= beta*epsilon_N is audited instead.
    """
    beta = check_beta(beta)
    _validate_exponents(c, cprime)
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    e_ref = _resolve_e_ref(e_ref_policy, energies, beta, n)
    lam = n ** (-c)
    pair = _deltas_at(model, beta, lam, e_ref, energies)
    epsilon = n ** (-cprime) + pair.gamma
    f_center = log_partition_per_spin(energies, beta, n)
    density = energies / n
    mask = np.abs(density - e_ref) <= epsilon
    sm = set_mass_from_mask(model, beta, mask, energies=energies)
    bound_ii = 2.0 * np.exp(-(n ** (1.0 - (c + cprime))))
    bound_iii = bound_ii / n
    outside = 1.0 - sm.gibbs_mass
    if sm.restricted_log_partition is None:
        restricted_gap = None
        prior_log_mass = None
        audit_iii = False
        audit_entropy = None
    else:
        restricted_gap = abs(sm.restricted_log_partition - f_center)
        prior_log_mass = float(np.log(sm.prior_mass)) / n
        audit_iii = restricted_gap <= bound_iii + LOG_SLACK
        audit_entropy = (
            abs(prior_log_mass - (sm.restricted_log_partition - beta * e_ref))
            <= beta * epsilon + LOG_SLACK
        )
    return ConcentrationSetReport(
        n=n,
        beta=beta,
        c=c,
        cprime=cprime,
        lambda_n=lam,
        epsilon_n=epsilon,
        e_ref=e_ref,
        gamma=pair.gamma,
        free_energy=f_center,
        gibbs_mass_outside=outside,
        bound_ii=bound_ii,
        restricted_gap=restricted_gap,
        bound_iii=bound_iii,
        prior_log_mass=prior_log_mass,
        entropy_target=f_center - beta * e_ref,
        audit_ii=outside <= bound_ii + MASS_SLACK,
        audit_iii=audit_iii,
        audit_entropy_window=audit_entropy,
    )


@dataclass(frozen=True)
class TailAudit:
    """One (epsilon, lambda) cell of the exponential tail-bound grid."""

    epsilon: float
    lam: float
    gamma: float
    b_plus: Optional[float]
    b_minus: Optional[float]
    rhs_plus: float
    rhs_minus: float
    gibbs_plus: float
    gibbs_minus: float
    exp_bound: float
    passed: bool

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def tail_bound_audit(
    model: ModelSpec,
    beta: float,
    epsilons: Sequence[float],
    lambdas: Sequence[float],
    e_ref: float,
    delta_window: float = DELTA_WINDOW,
    energies: Optional[np.ndarray] = None,
    limit: int = ENUMERATION_LIMIT,
) -> list[TailAudit]:
    """Verify the restricted-partition and tail-mass inequalities on a grid.

    For each (epsilon, lambda) the audited chain is
      B+ <= F(beta+lambda) - lambda*(epsilon + e_ref),
      B- <= F(beta-lambda) - lambda*(epsilon - e_ref),
      G(A+-) <= exp(-N*lambda*(epsilon - gamma)),
      G(A+ u A-) <= 2*exp(-N*lambda*(epsilon - gamma)),
    which holds for ANY reference value because the deltas are defined
    relative to it.  Empty tail sets pass vacuously.
    """
    beta = check_beta(beta)
    epsilons = [float(e) for e in epsilons]
    lambdas = [float(l) for l in lambdas]
    if not epsilons or not lambdas:
        raise ValueError("epsilon and lambda grids must be nonempty")
    if any(e <= 0 for e in epsilons):
        raise ValueError("epsilons must be positive")
    if any(not 0 < l < delta_window for l in lambdas):
        raise ValueError(f"lambdas must lie in (0, {delta_window})")
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    density = energies / n
    w = gibbs_weights(energies, beta)
    audits = []
    for lam in lambdas:
        pair = _deltas_at(model, beta, lam, e_ref, energies)
        f_plus = log_partition_per_spin(energies, beta + lam, n)
        f_minus = log_partition_per_spin(energies, beta - lam, n)
        for eps in epsilons:
            mask_plus = density - e_ref > eps
            mask_minus = density - e_ref < -eps
            sm_plus = set_mass_from_mask(model, beta, mask_plus, energies=energies)
            sm_minus = set_mass_from_mask(model, beta, mask_minus, energies=energies)
            rhs_plus = f_plus - lam * (eps + e_ref)
            rhs_minus = f_minus - lam * (eps - e_ref)
            exp_bound = float(np.exp(-n * lam * (eps - pair.gamma)))
            union = float(w[mask_plus | mask_minus].sum())
            ok = True
            if sm_plus.restricted_log_partition is not None:
                ok &= sm_plus.restricted_log_partition <= rhs_plus + LOG_SLACK
            if sm_minus.restricted_log_partition is not None:
                ok &= sm_minus.restricted_log_partition <= rhs_minus + LOG_SLACK
            ok &= sm_plus.gibbs_mass <= exp_bound + MASS_SLACK
            ok &= sm_minus.gibbs_mass <= exp_bound + MASS_SLACK
            ok &= union <= 2.0 * exp_bound + MASS_SLACK
            audits.append(TailAudit(
                epsilon=eps,
                lam=lam,
                gamma=pair.gamma,
                b_plus=sm_plus.restricted_log_partition,
                b_minus=sm_minus.restricted_log_partition,
                rhs_plus=rhs_plus,
                rhs_minus=rhs_minus,
                gibbs_plus=sm_plus.gibbs_mass,
                gibbs_minus=sm_minus.gibbs_mass,
                exp_bound=exp_bound,
                passed=bool(ok),
            ))
    return audits


@dataclass(frozen=True)
class MomentBoundAudit:
    """One-sided and absolute Gibbs moments of H/N - e_ref vs their bounds."""

    lhs_plus: float
    lhs_minus: float
    lhs_abs: float
    rhs: float
    one_sided_bound: float
    lambda0: float
    lambda_selected: float
    gamma0: float
    passed: bool

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def moment_bound_audit(
    model: ModelSpec,
    beta: float,
    lambda0: float,
    e_ref: float,
    delta_window: float = DELTA_WINDOW,
    energies: Optional[np.ndarray] = None,
    limit: int = ENUMERATION_LIMIT,
) -> MomentBoundAudit:
    """Audit <(H/N - e_ref)_+-> <= exp(N*lam*gamma(lam))/(N*lam) and the
    derived absolute bound 2e/(N*lambda0) + 2e*gamma(lambda0).

    The lambda selection follows the integrated-bound argument: keep lambda0
    when lambda0*N*gamma(lambda0) <= 1, otherwise switch to 1/(N*gamma).
    """
    beta = check_beta(beta)
    if not 0 < lambda0 < delta_window:
        raise ValueError(f"lambda0 must lie in (0, {delta_window}), got {lambda0}")
    if energies is None:
        energies = energy_table(model, limit)
    n = model.n
    density = energies / n
    w = gibbs_weights(energies, beta)
    dev = density - e_ref
    lhs_plus = float(w @ np.maximum(dev, 0.0))
    lhs_minus = float(w @ np.maximum(-dev, 0.0))
    gamma0 = _deltas_at(model, beta, lambda0, e_ref, energies).gamma
    if lambda0 * n * gamma0 <= 1.0:
        lam = lambda0
    else:
        lam = 1.0 / (n * gamma0)
    gamma_sel = _deltas_at(model, beta, lam, e_ref, energies).gamma
    one_sided = float(np.exp(n * lam * gamma_sel) / (n * lam))
    rhs = 2.0 * np.e / (n * lambda0) + 2.0 * np.e * gamma0
    lhs_abs = lhs_plus + lhs_minus
    passed = (
        lhs_plus <= one_sided + LOG_SLACK
        and lhs_minus <= one_sided + LOG_SLACK
        and lhs_abs <= rhs + LOG_SLACK
    )
    return MomentBoundAudit(
        lhs_plus=lhs_plus,
        lhs_minus=lhs_minus,
        lhs_abs=lhs_abs,
        rhs=rhs,
        one_sided_bound=one_sided,
        lambda0=lambda0,
        lambda_selected=lam,
        gamma0=gamma0,
        passed=bool(passed),
    )


@dataclass(frozen=True)
class L1Concentration:
    """Per-sample and disorder-averaged Gibbs L1 deviation of H/N."""

    per_sample: list[float]
    disorder_mean: float
    stderr: float
    centered_per_sample: list[float] = field(default_factory=list)
    centered_mean: float = float("nan")

    def to_json(self) -> dict:
        return {
            "disorder_mean": self.disorder_mean,
            "stderr": self.stderr,
            "centered_mean": self.centered_mean,
            "per_sample": self.per_sample,
        }


def gibbs_l1_concentration(
    models: Sequence[ModelSpec],
    beta: float,
    e_ref_policy: ERefPolicy = PLUGIN,
    limit: int = ENUMERATION_LIMIT,
) -> L1Concentration:
    """<|H/N - e_ref|>_beta per disorder sample, with ensemble statistics.

    The plugin policy centers each sample at its own Gibbs mean.  The centered
    variant (reported separately) centers every sample at the ensemble average
    of the Gibbs means, matching the quenched-centering form.
    """
    beta = check_beta(beta)
    if len(models) == 0:
        raise ValueError("model ensemble must be nonempty")
    tables = [energy_table(m, limit) for m in models]
    weights = [gibbs_weights(t, beta) for t in tables]
    u_means = [float(w @ t) / m.n for m, t, w in zip(models, tables, weights)]
    per_sample = []
    for m, t, w, u in zip(models, tables, weights, u_means):
        e_ref = u if e_ref_policy == PLUGIN else float(e_ref_policy)
        per_sample.append(float(w @ np.abs(t / m.n - e_ref)))
    ensemble_u = float(np.mean(u_means))
    centered = [
        float(w @ np.abs(t / m.n - ensemble_u))
        for m, t, w in zip(models, tables, weights)
    ]
    vals = np.asarray(per_sample)
    stderr = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return L1Concentration(
        per_sample=per_sample,
        disorder_mean=float(vals.mean()),
        stderr=stderr,
        centered_per_sample=centered,
        centered_mean=float(np.mean(centered)),
    )


@dataclass(frozen=True)
class ConditionalEquivalence:
    """Per-spin log ratio of the two conditional measures on the
    concentration set, with the chain terms it decomposes into."""

    value: float
    b_intersection: float
    b_set: float
    log_prior_intersection: float
    log_prior_set: float
    epsilon_n: float
    e_ref: float
    free_energy: float
    chain_bound: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def conditional_equivalence(
    model: ModelSpec,
    beta: float,
    test_set: Union[Callable[[SpinConfiguration], bool], np.ndarray],
    c: float = DEFAULT_C,
    cprime: float = DEFAULT_CPRIME,
    e_ref_policy: ERefPolicy = PLUGIN,
    limit: int = ENUMERATION_LIMIT,
) -> ConditionalEquivalence:
    """N^{-1} log [ G(A|C_N) / nu(A|C_N) ], computed exactly.

    `test_set` is a per-configuration predicate or a precomputed boolean mask
    over configuration indices.  Raises if A does not meet the concentration
    set.  The report carries every term of the conditional chain plus the
    a-priori bound beta*epsilon_N + |F_N - beta*e_ref - N^{-1} log nu(C_N)|.
    """
    beta = check_beta(beta)
    _validate_exponents(c, cprime)
    energies = energy_table(model, limit)
    n = model.n
    e_ref = _resolve_e_ref(e_ref_policy, energies, beta, n)
    lam = n ** (-c)
    gamma = _deltas_at(model, beta, lam, e_ref, energies).gamma
    epsilon = n ** (-cprime) + gamma
    density = energies / n
    c_mask = np.abs(density - e_ref) <= epsilon
    if isinstance(test_set, np.ndarray):
        a_mask = np.asarray(test_set, dtype=bool)
        if a_mask.shape != energies.shape:
            raise ValueError("mask must cover all configurations")
    else:
        a_mask = np.fromiter(
            (bool(test_set(SpinConfiguration(n, b))) for b in range(1 << n)),
            dtype=bool,
            count=1 << n,
        )
    inter = a_mask & c_mask
    if not inter.any():
        raise ValueError("test set does not intersect the concentration set")
    sm_inter = set_mass_from_mask(model, beta, inter, energies=energies)
    sm_c = set_mass_from_mask(model, beta, c_mask, energies=energies)
    log_nu_inter = float(np.log(sm_inter.prior_mass)) / n
    log_nu_c = float(np.log(sm_c.prior_mass)) / n
    value = (
        (sm_inter.restricted_log_partition - sm_c.restricted_log_partition)
        - (log_nu_inter - log_nu_c)
    )
    f_center = log_partition_per_spin(energies, beta, n)
    chain_bound = beta * epsilon + abs(f_center - beta * e_ref - log_nu_c)
    return ConditionalEquivalence(
        value=float(value),
        b_intersection=sm_inter.restricted_log_partition,
        b_set=sm_c.restricted_log_partition,
        log_prior_intersection=log_nu_inter,
        log_prior_set=log_nu_c,
        epsilon_n=epsilon,
        e_ref=e_ref,
        free_energy=f_center,
        chain_bound=chain_bound,
    )


@dataclass(frozen=True)
class SandwichCheck:
    """Finite-N two-temperature sandwich around an energy-window restriction."""

    upper_terms: tuple[float, float, float]
    lower_terms: tuple[float, float, float]
    passed: bool

    def to_json(self) -> dict:
        return {
            "upper_terms": list(self.upper_terms),
            "lower_terms": list(self.lower_terms),
            "passed": self.passed,
        }


def sandwich_check(
    model: ModelSpec,
    beta: float,
    beta_prime: float,
    epsilon: float,
    e_beta: float,
    e_beta_prime: float,
    limit: int = ENUMERATION_LIMIT,
) -> SandwichCheck:
    """Verify the two finite-N restriction chains linking the window around
    E(beta) at temperature beta to windows around E(beta') at beta'.

    Upper chain: T1 <= T2 <= T3 with
      T1 = B(beta, |H/N - E(beta)| <= eps),
      T2 = B(beta, |H/N - E(beta')| <= 2 eps),
      T3 = B(beta', same window) + (beta - beta') (E(beta') + 2 eps).
    Lower chain: U1 >= U2 >= U3 with
      U1 = B(beta, |H/N - E(beta)| <= 2 eps),
      U2 = B(beta, |H/N - E(beta')| <= eps),
      U3 = B(beta', same window) + (beta - beta') (E(beta') - eps).
    Requires |E(beta) - E(beta')| <= eps (the window-containment hypothesis)
    and beta' <= beta.  Empty windows enter as -inf and pass vacuously.
    """
    beta = check_beta(beta)
    beta_prime = check_beta(beta_prime)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if beta_prime > beta:
        raise ValueError("beta_prime must not exceed beta")
    if abs(e_beta - e_beta_prime) > epsilon:
        raise ValueError(
            "containment hypothesis violated: |E(beta) - E(beta')| > epsilon"
        )
    energies = energy_table(model, limit)
    n = model.n
    density = energies / n

    def restricted(b: float, center: float, width: float) -> float:
        mask = np.abs(density - center) <= width
        if not mask.any():
            return float("-inf")
        return log_partition_per_spin(energies[mask], b, n)

    gap = beta - beta_prime
    t1 = restricted(beta, e_beta, epsilon)
    t2 = restricted(beta, e_beta_prime, 2 * epsilon)
    t3 = restricted(beta_prime, e_beta_prime, 2 * epsilon) + gap * (e_beta_prime + 2 * epsilon)
    u1 = restricted(beta, e_beta, 2 * epsilon)
    u2 = restricted(beta, e_beta_prime, epsilon)
    u3 = restricted(beta_prime, e_beta_prime, epsilon) + gap * (e_beta_prime - epsilon)
    passed = (
        t1 <= t2 + LOG_SLACK
        and t2 <= t3 + LOG_SLACK
        and u1 >= u2 - LOG_SLACK
        and u2 >= u3 - LOG_SLACK
    )
    return SandwichCheck(
        upper_terms=(t1, t2, t3),
        lower_terms=(u1, u2, u3),
        passed=bool(passed),
    )
