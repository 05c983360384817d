"""Spectral simulator for a two-dimensional annular ring with Rashba coupling.

Exact eigenmodes for constant coupling strength, driven (Floquet) modes for
a cosine-modulated coupling, and time evolution of arbitrary spinor states
with position-resolved spin and charge observables.
"""

from .errors import (ConsistencyError, ContractError, DegeneracyError,
                     DomainError, NumericalError, RingsoiError, SamplingError,
                     TruncationError, ValidationError)
from .geometry import (PolarGrid, RadialQuadrature, RingGeometry, UnitSystem,
                       make_quadrature, spinor_inner_product)
from .specfun import (HarmonicWeightTable, bessel_j, bessel_n,
                      cross_product_det, jacobi_anger_weights,
                      suggest_cutoff, wronskian_defect)
from .spectrum import (Eigenmode, NodeCount, boundary_determinant,
                       build_eigenmode, count_radial_nodes, pair_doublets,
                       scan_spectrum, wavenumbers_for_energy)
from .floquet import (Drive, FloquetMode, build_floquet_mode,
                      floquet_boundary_determinant, floquet_eigenpair,
                      propagator_2x2, scan_floquet_spectrum, sideband_weights)
from .dynamics import (FrequencySpectrum, Observables, SpinorField,
                       StateExpansion, angular_density_profile,
                       autocorrelation, count_angular_lobes, evolve,
                       expand_state, field_of_mode, fourier_spectrum,
                       gaussian_packet, lattice_magnitudes, moving_average,
                       observables, revival_estimate, sector_weights,
                       spectral_peaks, time_series)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
