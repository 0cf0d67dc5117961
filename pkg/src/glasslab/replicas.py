"""Overlap statistics, Gaussian integration-by-parts audits, and the
Ghirlanda-Guerra residual under disorder averaging.

The bounded overlap observables phi live in a small registry; each is a
function of the two-replica overlap R_{1,2} with a declared sup norm.  Exact
mode evaluates the replica brackets by factorizing over the product Gibbs
measure: conditioning on replica 1 reduces every bracket to weighted sums
over configuration pairs, so nothing beyond 2^N x 2^N blocks is ever
enumerated.  MC mode estimates the same brackets from independent chains.

Convention note: the integration-by-parts displays are implemented WITH the
factor beta on the bracket side,
    E<phi H/N> = beta * [ E<phi sum_{l=1}^{n} R_{1,l}^2> - n E<phi R_{1,n+1}^2> ],
which is what the standard Gaussian formula E[z f(z)] = E[f'(z)] produces
for the exp(+beta*H) Gibbs density.  The beta-free variant is reported too,
so its failure at beta != 1 is measurable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .exact import ENUMERATION_LIMIT, energy_table, gibbs_weights, spins_matrix
from .models import SK, ModelSpec, SpinConfiguration, check_beta, hamiltonian

_PAIR_BLOCK = 1024


@dataclass(frozen=True)
class PhiObservable:
    """Bounded function of the overlap R_{1,2} with known sup norm."""

    phi_id: str
    fn: Callable[[np.ndarray], np.ndarray]
    sup_norm: float


PHI_LIBRARY: dict[str, PhiObservable] = {
    "one": PhiObservable("one", lambda r: np.ones_like(r), 1.0),
    "r2": PhiObservable("r2", lambda r: r * r, 1.0),
    "abs_r": PhiObservable("abs_r", np.abs, 1.0),
    "r4": PhiObservable("r4", lambda r: r ** 4, 1.0),
}


def get_phi(phi_id: str) -> PhiObservable:
    try:
        return PHI_LIBRARY[phi_id]
    except KeyError:
        raise ValueError(
            f"unknown phi {phi_id!r}; available: {sorted(PHI_LIBRARY)}"
        ) from None


def overlap(a: SpinConfiguration, b: SpinConfiguration) -> float:
    """R(a, b) = N^{-1} sum_i a_i b_i via bitwise agreement count."""
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} != {b.n}")
    differing = int(a.bits ^ b.bits).bit_count()
    return (a.n - 2 * differing) / a.n


@dataclass(frozen=True, eq=False)
class ReplicaBatch:
    """Replica configurations on one disorder sample at one temperature.

    ``spins`` has shape (k_chains, m_retained, n); configurations across
    chains at the same retained index are (approximately) i.i.d. Gibbs draws.
    """

    n: int
    beta: float
    spins: np.ndarray
    source: str
    disorder_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.spins.ndim != 3 or self.spins.shape[2] != self.n:
            raise ValueError("spins must have shape (k, m, n)")
        if self.spins.shape[0] < 2:
            raise ValueError("need at least 2 replica chains")

    @property
    def k(self) -> int:
        return self.spins.shape[0]

    @property
    def replicas(self) -> list[SpinConfiguration]:
        return [
            SpinConfiguration.from_spins(self.spins[i, j])
            for i in range(self.spins.shape[0])
            for j in range(self.spins.shape[1])
        ]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "source": self.source,
            "disorder_seed": self.disorder_seed,
            "spins": self.spins.tolist(),
        }


def exact_replica_batch(
    model: ModelSpec, beta: float, k: int, m: int, seed: int,
    limit: int = ENUMERATION_LIMIT,
) -> ReplicaBatch:
    """Exact i.i.d. Gibbs draws via categorical sampling of the enumerated
    weight vector; shaped like an MC batch with k chains of m samples."""
    beta = check_beta(beta)
    if k < 2:
        raise ValueError(f"need at least 2 replicas, got {k}")
    w = gibbs_weights(energy_table(model, limit), beta)
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.choice(len(w), size=(k, m), p=w)
    bits = (idx[..., None] >> np.arange(model.n)) & 1
    spins = (2 * bits - 1).astype(np.int8)
    disorder_seed = model.disorder.seed if model.disorder is not None else None
    return ReplicaBatch(n=model.n, beta=beta, spins=spins,
                        source="exact-product-measure",
                        disorder_seed=disorder_seed)


def _pair_overlaps(batch: ReplicaBatch) -> np.ndarray:
    """Overlaps of all unordered chain pairs at matching retained indices."""
    s = batch.spins.astype(np.float64)
    k, m, n = s.shape
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            out.append(np.einsum("ts,ts->t", s[i], s[j]) / n)
    return np.concatenate(out)


def overlap_moment(
    batches: Sequence[ReplicaBatch], k: int
) -> tuple[float, float]:
    """Disorder-and-replica average of R_{1,2}^k with between-disorder stderr."""
    if len(batches) == 0:
        raise ValueError("ensemble of batches must be nonempty")
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    per_batch = np.array([
        float(np.mean(_pair_overlaps(b) ** k)) for b in batches
    ])
    mean = float(per_batch.mean())
    stderr = (
        float(per_batch.std(ddof=1) / np.sqrt(len(per_batch)))
        if len(per_batch) > 1 else 0.0
    )
    return mean, stderr


def exact_overlap_moment(
    model: ModelSpec, beta: float, k: int, limit: int = ENUMERATION_LIMIT
) -> float:
    """Exact <R_{1,2}^k>_beta over the two-replica product measure."""
    beta = check_beta(beta)
    energies = energy_table(model, limit)
    w = gibbs_weights(energies, beta)
    s = spins_matrix(model.n).astype(np.float64)
    n = model.n
    total = 0.0
    for start in range(0, len(w), _PAIR_BLOCK):
        stop = min(start + _PAIR_BLOCK, len(w))
        r_blk = (s[start:stop] @ s.T) / n
        total += float(w[start:stop] @ ((r_blk ** k) @ w))
    return total


@dataclass(frozen=True)
class ReplicaBrackets:
    """Exact or estimated Gibbs brackets entering the replica identities.

    For phi = phi(R_{1,2}):
      phi_mean   = <phi>
      r2_mean    = <R_{1,2}^2>
      pair       = <phi R_{1,2}^2>
      triple     = <phi R_{1,l}^2> for any l >= 3 (equal by exchangeability)
      phi_h      = <phi H(sigma^1)/N>
      u          = <H/N>
    """

    phi_mean: float
    r2_mean: float
    pair: float
    triple: float
    phi_h: float
    u: float


def exact_replica_brackets(
    model: ModelSpec, beta: float, phi_id: str,
    limit: int = ENUMERATION_LIMIT,
) -> ReplicaBrackets:
    """Brackets over the product Gibbs measure by conditioning on replica 1.

    A(c1) = E_{c2}[phi(R(c1, c2))] is accumulated in row blocks; the
    second-moment factor B(c1) = E_{c3}[R(c1, c3)^2] reduces to a quadratic
    form in the Gibbs-weighted two-point matrix.
    """
    beta = check_beta(beta)
    phi = get_phi(phi_id)
    energies = energy_table(model, limit)
    w = gibbs_weights(energies, beta)
    n = model.n
    s = spins_matrix(n).astype(np.float64)
    corr = (s * w[:, None]).T @ s  # Gibbs-weighted <sigma_i sigma_j>
    b_vec = np.einsum("ci,ij,cj->c", s, corr, s) / n ** 2
    a_vec = np.empty(len(w))
    pair = 0.0
    for start in range(0, len(w), _PAIR_BLOCK):
        stop = min(start + _PAIR_BLOCK, len(w))
        r_blk = (s[start:stop] @ s.T) / n
        phi_blk = phi.fn(r_blk)
        a_vec[start:stop] = phi_blk @ w
        pair += float(w[start:stop] @ ((phi_blk * r_blk ** 2) @ w))
    density = energies / n
    return ReplicaBrackets(
        phi_mean=float(w @ a_vec),
        r2_mean=float(w @ b_vec),
        pair=pair,
        triple=float(w @ (a_vec * b_vec)),
        phi_h=float(w @ (density * a_vec)),
        u=float(w @ density),
    )


def mc_replica_brackets(
    model: ModelSpec, batch: ReplicaBatch, phi_id: str
) -> ReplicaBrackets:
    """Brackets estimated from independent chains (needs >= 3 chains)."""
    phi = get_phi(phi_id)
    if batch.k < 3:
        raise ValueError("MC brackets need at least 3 replica chains")
    s = batch.spins.astype(np.float64)
    n = batch.n
    r12 = np.einsum("ts,ts->t", s[0], s[1]) / n
    r13 = np.einsum("ts,ts->t", s[0], s[2]) / n
    phi12 = phi.fn(r12)
    h1 = np.array([
        hamiltonian(model, SpinConfiguration.from_spins(batch.spins[0, t]))
        for t in range(s.shape[1])
    ])
    return ReplicaBrackets(
        phi_mean=float(phi12.mean()),
        r2_mean=float((r12 ** 2).mean()),
        pair=float((phi12 * r12 ** 2).mean()),
        triple=float((phi12 * r13 ** 2).mean()),
        phi_h=float((phi12 * h1 / n).mean()),
        u=float((h1 / n).mean()),
    )


def _gather_brackets(
    models: Sequence[ModelSpec],
    beta: float,
    phi_id: str,
    mode: str,
    mc_sweeps: int,
    mc_seed: int,
    limit: int,
) -> list[ReplicaBrackets]:
    if len(models) == 0:
        raise ValueError("disorder ensemble must be nonempty")
    for m in models:
        if m.kind != SK:
            raise ValueError(
                "replica identities require Gaussian (SK) disorder"
            )
    if mode == "exact":
        return [exact_replica_brackets(m, beta, phi_id, limit) for m in models]
    if mode == "mc":
        from .mc import sample_replicas  # deferred: mc imports ReplicaBatch

        out = []
        for i, m in enumerate(models):
            batch = sample_replicas(m, beta, k=3, sweeps=mc_sweeps,
                                    seed=mc_seed + i)
            out.append(mc_replica_brackets(m, batch, phi_id))
        return out
    raise ValueError(f"unknown mode {mode!r}; expected 'exact' or 'mc'")


@dataclass(frozen=True)
class IbpAudit:
    """Gaussian integration-by-parts discrepancy over a disorder ensemble."""

    n_system: int
    n_replicas: int
    beta: float
    phi_id: str
    lhs: float
    rhs: float
    rhs_uncorrected: float
    stderr_lhs: float
    stderr_rhs: float
    stderr_diff: float
    z_score: float
    z_score_uncorrected: float
    samples: int

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def ibp_audit(
    models: Sequence[ModelSpec],
    beta: float,
    n_replicas: int,
    phi_id: str,
    mode: str = "exact",
    mc_sweeps: int = 2000,
    mc_seed: int = 0,
    limit: int = ENUMERATION_LIMIT,
) -> IbpAudit:
    """Compare E<phi H/N> against the beta-corrected replica expansion.

    For phi = phi(R_{1,2}) and any n >= 2 the expansion collapses to
    beta * [ <phi> + <phi R_{1,2}^2> - 2 <phi R_{1,n+1}^2> ]
    by replica exchangeability.  z-scores are computed from the per-sample
    paired differences; the beta-free variant's z-score is reported so its
    failure away from beta = 1 is visible.
    """
    beta = check_beta(beta)
    if n_replicas < 2:
        raise ValueError(f"need n_replicas >= 2, got {n_replicas}")
    brackets = _gather_brackets(models, beta, phi_id, mode, mc_sweeps, mc_seed, limit)
    lhs = np.array([b.phi_h for b in brackets])
    raw = np.array([b.phi_mean + b.pair - 2.0 * b.triple for b in brackets])
    rhs = beta * raw
    diff = lhs - rhs
    diff_unc = lhs - raw
    se_diff = _stderr(diff)
    se_unc = _stderr(diff_unc)
    return IbpAudit(
        n_system=models[0].n,
        n_replicas=n_replicas,
        beta=beta,
        phi_id=phi_id,
        lhs=float(lhs.mean()),
        rhs=float(rhs.mean()),
        rhs_uncorrected=float(raw.mean()),
        stderr_lhs=_stderr(lhs),
        stderr_rhs=_stderr(rhs),
        stderr_diff=se_diff,
        z_score=float(diff.mean() / se_diff) if se_diff else 0.0,
        z_score_uncorrected=float(diff_unc.mean() / se_unc) if se_unc else 0.0,
        samples=len(models),
    )


@dataclass(frozen=True)
class GGReport:
    """Ghirlanda-Guerra residual and its L1-concentration bound."""

    n_system: int
    n_replicas: int
    beta: float
    phi_id: str
    residual: float
    stderr: float
    bound: float
    bound_stderr: float
    samples: int
    passed: bool

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _jackknife_stderr(stat: Callable[[np.ndarray], float], rows: np.ndarray) -> float:
    m = len(rows)
    if m < 2:
        return 0.0
    loo = np.array([
        stat(np.delete(rows, i, axis=0)) for i in range(m)
    ])
    return float(np.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2)))


def gg_residual(
    models: Sequence[ModelSpec],
    beta: float,
    n_replicas: int,
    phi_id: str,
    mode: str = "exact",
    mc_sweeps: int = 2000,
    mc_seed: int = 0,
    limit: int = ENUMERATION_LIMIT,
) -> GGReport:
    """Residual Delta = E<phi R_{1,n+1}^2> - (1/n) E<phi> E<R_{1,2}^2>
    - (1/n) sum_{l=2}^{n} E<phi R_{1,l}^2>, with the finite-N bound
    |Delta| <= ||phi||_inf / (beta * n) * E<|H/N - E<H/N>|>.

    Uncertainties on both sides come from jackknife over disorder samples
    (the bound's centering uses the ensemble mean of <H/N>, held at the
    full-sample value inside the jackknife of the L1 term).
    """
    beta = check_beta(beta)
    if beta <= 0:
        raise ValueError("GG residual bound requires beta > 0")
    if n_replicas < 2:
        raise ValueError(f"need n_replicas >= 2, got {n_replicas}")
    phi = get_phi(phi_id)
    n = n_replicas
    brackets = _gather_brackets(models, beta, phi_id, mode, mc_sweeps, mc_seed, limit)
    # rows: phi_mean, r2_mean, pair, triple, u
    rows = np.array([
        [b.phi_mean, b.r2_mean, b.pair, b.triple, b.u] for b in brackets
    ])

    def residual_stat(r: np.ndarray) -> float:
        phi_m, r2_m, pair_m, triple_m = r[:, 0].mean(), r[:, 1].mean(), \
            r[:, 2].mean(), r[:, 3].mean()
        return (
            triple_m
            - phi_m * r2_m / n
            - (pair_m + (n - 2) * triple_m) / n
        )

    delta = residual_stat(rows)
    delta_se = _jackknife_stderr(residual_stat, rows)
    # L1 concentration of H/N about the ensemble Gibbs mean
    u_bar = float(rows[:, 4].mean())
    if mode == "exact":
        l1_vals = []
        for m in models:
            energies = energy_table(m, limit)
            w = gibbs_weights(energies, beta)
            l1_vals.append(float(w @ np.abs(energies / m.n - u_bar)))
        l1_vals = np.array(l1_vals)
    else:
        from .mc import sample_replicas

        l1_vals = []
        for i, m in enumerate(models):
            batch = sample_replicas(m, beta, k=3, sweeps=mc_sweeps,
                                    seed=mc_seed + i)
            h0 = np.array([
                hamiltonian(m, SpinConfiguration.from_spins(batch.spins[0, t]))
                for t in range(batch.spins.shape[1])
            ])
            l1_vals.append(float(np.abs(h0 / m.n - u_bar).mean()))
        l1_vals = np.array(l1_vals)
    bound = phi.sup_norm / (beta * n) * float(l1_vals.mean())
    bound_se = phi.sup_norm / (beta * n) * _stderr(l1_vals)
    combined = float(np.hypot(delta_se, bound_se))
    return GGReport(
        n_system=models[0].n,
        n_replicas=n_replicas,
        beta=beta,
        phi_id=phi_id,
        residual=float(delta),
        stderr=delta_se,
        bound=bound,
        bound_stderr=bound_se,
        samples=len(models),
        passed=bool(abs(delta) <= bound + 3.0 * combined),
    )
