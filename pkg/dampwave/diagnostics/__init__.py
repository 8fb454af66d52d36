"""
Diagnostics for dampwave: energies, decay fits, semigroup constants and stability certificates
"""
from .certificate import (
    BoundsReport,
    ConditionCheck,
    StabilityCertificate,
    check_delay_condition,
    check_indefinite_condition,
    smallness_certificate,
    verify_energy_bounds,
)
from .decay import DecayFit, fit_decay
from .energy import (
    DissipationReport,
    EnergyReport,
    dissipation_residual,
    energy_delayed,
    energy_indefinite,
    energy_linear,
    energy_series,
)
from .semigroup import (
    SemigroupEstimate,
    compare_estimates,
    estimate_semigroup_constants,
    spectral_abscissa,
)

__all__ = [
    "BoundsReport",
    "ConditionCheck",
    "DecayFit",
    "DissipationReport",
    "EnergyReport",
    "SemigroupEstimate",
    "StabilityCertificate",
    "check_delay_condition",
    "check_indefinite_condition",
    "compare_estimates",
    "dissipation_residual",
    "energy_delayed",
    "energy_indefinite",
    "energy_linear",
    "energy_series",
    "estimate_semigroup_constants",
    "fit_decay",
    "smallness_certificate",
    "spectral_abscissa",
    "verify_energy_bounds",
]
