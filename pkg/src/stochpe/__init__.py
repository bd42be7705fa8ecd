"""Spectral-Galerkin simulator and verification harness for the stochastic
3D primitive equations of the ocean with gradient-dependent transport noise."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    FIELDS,
    DomainSpec,
    BasisIndex,
    SpectralState,
    PhysicalFields,
    NormBundle,
    Grid,
    build_basis,
    to_physical,
    to_spectral,
    apply_A_power,
    project_n,
    complement_q,
    norms,
    random_state,
    single_mode_state,
)
