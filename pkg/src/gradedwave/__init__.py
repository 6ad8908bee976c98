"""Energy estimates and Gevrey well-posedness for u_tt + a(t) R u = 0, checked numerically."""
from .coefficients import (
    CoefficientProfile, estimate_hoelder_seminorm, make_constant, make_hoelder_degenerate,
    make_lipschitz, make_smooth_degenerate, make_weierstrass,
)
from .errors import ConfigError, DegenerateTransform, DomainError, InsufficientData, InvalidParameter
from .growth_fit import (
    GrowthVerdict, SweepRecord, beta_sweep, fit_growth_exponent, theoretical_exponent, verdict,
)
from .mollify import (
    MollifierKernel, RegularizedPair, bump_kernel, mollify_sqrt, regularized_pair,
    verify_mollification_bounds,
)
from .ode_energy import (
    EnergyTrace, StateVector, Trajectory, base_energy, minimal_decay_rate, quasi_energy,
    quasi_symmetrizer_commutator, solve, symmetrizer_energy, transformed_energy,
)
from .spectral import (
    Gevrey, Sobolev, SpectralField, SpectralMode, abstract_grid, evolve, gevrey_char_check,
    gevrey_norm, heisenberg_grid, sobolev_norm, synthesize_data, wellposedness_report,
)

__version__ = "0.1.0"
