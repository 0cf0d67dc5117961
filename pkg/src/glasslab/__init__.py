"""Desk-scale disordered-Hamiltonian statistical mechanics.

Exact Gibbs measures by enumeration, Metropolis / parallel-tempering
sampling, and numerical audits of free-energy concentration, Gibbs-average
concentration, and the overlap replica identities for the SK model.
"""

__version__ = "0.1.0"

from .models import (  # noqa: F401
    CONSTANT_FIELD,
    SK,
    DisorderSample,
    ModelSpec,
    SpinConfiguration,
    covariance_probe,
    energy_flip_delta,
    hamiltonian,
    sk_disorder,
)
from .exact import (  # noqa: F401
    ENUMERATION_LIMIT,
    EnumerationLimitError,
    ExactGibbsSummary,
    SetMass,
    enumerate_gibbs,
    free_energy_curve,
    gibbs_expectation,
    set_mass,
)
from .seeds import derive_seed, gaussian_stream  # noqa: F401
