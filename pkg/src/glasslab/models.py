"""Configuration space, Hamiltonians, and quenched disorder.

Two models are implemented on the hypercube {-1,+1}^N with uniform
reference measure:

* ``sk``: H(sigma) = N^{-1/2} sum_{i,j=1}^{N} g_ij sigma_i sigma_j, the
  double sum running over ALL ordered pairs including i=j, with g_ij i.i.d.
  standard normal (not symmetrized).  With this convention
  E[H(sigma)H(sigma')] = N * R(sigma, sigma')^2 exactly.
* ``field``: H(sigma) = h * sum_i sigma_i, a closed-form control model whose
  free energy is log cosh(beta*h); it serves as an analytic oracle for the
  concentration audits downstream.

Note the Gibbs weight everywhere in this package is exp(+beta*H).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .seeds import GAUSSIAN_RNG_ID, derive_seed, gaussian_stream

SK = "sk"
CONSTANT_FIELD = "field"


@dataclass(frozen=True)
class SpinConfiguration:
    """Bit-packed spin assignment: bit i of ``bits`` set <=> sigma_i = +1."""

    n: int
    bits: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"system size must be positive, got {self.n}")
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError(f"bits out of range for n={self.n}: {self.bits:#x}")

    @classmethod
    def from_spins(cls, spins) -> "SpinConfiguration":
        spins = np.asarray(spins)
        if spins.ndim != 1 or spins.size == 0:
            raise ValueError("spins must be a nonempty 1-d array")
        if not np.all(np.abs(spins) == 1):
            raise ValueError("spins must take values in {-1, +1}")
        bits = 0
        for i, s in enumerate(spins):
            if s > 0:
                bits |= 1 << i
        return cls(n=spins.size, bits=bits)

    def to_spins(self) -> np.ndarray:
        """Return the +/-1 integer vector; lossless round-trip with from_spins."""
        idx = np.arange(self.n)
        up = (self.bits >> idx) & 1
        return (2 * up - 1).astype(np.int8)

    def flip(self, site: int) -> "SpinConfiguration":
        if not 0 <= site < self.n:
            raise ValueError(f"site {site} out of range for n={self.n}")
        return SpinConfiguration(self.n, self.bits ^ (1 << site))

    def spin(self, site: int) -> int:
        if not 0 <= site < self.n:
            raise ValueError(f"site {site} out of range for n={self.n}")
        return 1 if (self.bits >> site) & 1 else -1

    def magnetization(self) -> float:
        return (2 * int(self.bits).bit_count() - self.n) / self.n

    def to_json(self) -> list:
        return [int(s) for s in self.to_spins()]

    @classmethod
    def from_json(cls, spins: list) -> "SpinConfiguration":
        return cls.from_spins(np.asarray(spins, dtype=np.int8))


@dataclass(frozen=True, eq=False)
class DisorderSample:
    """Quenched SK couplings with seed provenance.

    The matrix holds n^2 independent draws in row-major order; it is NOT
    symmetrized and the diagonal is kept.
    """

    n: int
    seed: int
    couplings: np.ndarray
    rng_id: str = GAUSSIAN_RNG_ID

    def __post_init__(self) -> None:
        if self.couplings.shape != (self.n, self.n):
            raise ValueError(
                f"couplings shape {self.couplings.shape} != ({self.n}, {self.n})"
            )
        self.couplings.setflags(write=False)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "seed": int(self.seed),
            "rng_id": self.rng_id,
            "couplings": self.couplings.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DisorderSample":
        n = int(obj["n"])
        couplings = np.asarray(obj["couplings"], dtype=np.float64).reshape(n, n)
        return cls(n=n, seed=int(obj["seed"]), couplings=couplings,
                   rng_id=obj.get("rng_id", GAUSSIAN_RNG_ID))


def sk_disorder(n: int, seed: int) -> DisorderSample:
    """Draw an n x n matrix of i.i.d. standard normals, deterministically.

    The row-major entries are the first n^2 outputs of the documented
    Gaussian stream for this seed, so regeneration is bit-exact.
    """
    if n < 1:
        raise ValueError(f"system size must be positive, got {n}")
    couplings = gaussian_stream(seed, n * n).reshape(n, n)
    return DisorderSample(n=n, seed=seed, couplings=couplings)


@dataclass(frozen=True)
class ModelSpec:
    """A Hamiltonian instance: SK with fixed disorder, or the field control."""

    kind: str
    n: int
    field_strength: float = 0.0
    disorder: Optional[DisorderSample] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"system size must be positive, got {self.n}")
        if self.kind == SK:
            if self.disorder is None:
                raise ValueError("SK model requires a disorder sample")
            if self.disorder.n != self.n:
                raise ValueError(
                    f"disorder size {self.disorder.n} != model size {self.n}"
                )
        elif self.kind == CONSTANT_FIELD:
            if self.disorder is not None:
                raise ValueError("constant-field model takes no disorder")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")

    @classmethod
    def sk(cls, disorder: DisorderSample) -> "ModelSpec":
        return cls(kind=SK, n=disorder.n, disorder=disorder)

    @classmethod
    def sk_from_seed(cls, n: int, seed: int) -> "ModelSpec":
        return cls.sk(sk_disorder(n, seed))

    @classmethod
    def constant_field(cls, n: int, h: float) -> "ModelSpec":
        return cls(kind=CONSTANT_FIELD, n=n, field_strength=float(h))


def check_beta(beta: float) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"inverse temperature must be finite and >= 0, got {beta}")
    return beta


def hamiltonian(model: ModelSpec, config: SpinConfiguration) -> float:
    """Energy in extensive units."""
    if config.n != model.n:
        raise ValueError(f"config size {config.n} != model size {model.n}")
    s = config.to_spins().astype(np.float64)
    if model.kind == SK:
        g = model.disorder.couplings
        return float(s @ g @ s) / np.sqrt(model.n)
    return model.field_strength * float(s.sum())


def energy_flip_delta(model: ModelSpec, config: SpinConfiguration, site: int) -> float:
    """H(config with spin `site` flipped) - H(config), in O(N).

    For SK only the row and column of `site` contribute; the diagonal term
    g_ss * sigma_s^2 is invariant under the flip.
    """
    if config.n != model.n:
        raise ValueError(f"config size {config.n} != model size {model.n}")
    if not 0 <= site < model.n:
        raise ValueError(f"site {site} out of range for n={model.n}")
    sk = config.spin(site)
    if model.kind == CONSTANT_FIELD:
        return -2.0 * model.field_strength * sk
    g = model.disorder.couplings
    s = config.to_spins().astype(np.float64)
    cross = float((g[site, :] + g[:, site]) @ s) - 2.0 * g[site, site] * sk
    return -2.0 * sk * cross / np.sqrt(model.n)


def covariance_probe(
    n: int,
    config_a: SpinConfiguration,
    config_b: SpinConfiguration,
    n_samples: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Empirical disorder-mean of H(a)H(b) with its standard error.

    Estimates E[H(a)H(b)] = N * R(a,b)^2 by drawing fresh SK disorder per
    sample (seeds derived from `seed`).
    """
    if config_a.n != n or config_b.n != n:
        raise ValueError("configuration sizes must match n")
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    sa = config_a.to_spins().astype(np.float64)
    sb = config_b.to_spins().astype(np.float64)
    outer_a = np.outer(sa, sa).ravel()
    outer_b = np.outer(sb, sb).ravel()
    vals = np.empty(n_samples)
    for k in range(n_samples):
        g = gaussian_stream(derive_seed(seed, k), n * n)
        vals[k] = (g @ outer_a) * (g @ outer_b) / n
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(n_samples))
    return mean, stderr
