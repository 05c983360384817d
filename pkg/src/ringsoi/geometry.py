"""Annular geometry, unit bookkeeping, quadrature, and inner products.

Internally every length is measured in units of the outer radius, so a ring
is described by the single ratio rho = r0 / r1 and all wavenumbers are
dimensionless (k r1). Energies are measured in hbar * Omega with
Omega = hbar / (2 m_eff r1^2), the coupling strength as omega / Omega, and
time in units of 1 / Omega, so a stationary state evolves as
exp(-i energy * tau) without extra factors.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, NumericalError

HBAR_SI = 1.054571817e-34  # J s
ELECTRON_MASS_SI = 9.1093837015e-31  # kg


@dataclass(frozen=True)
class RingGeometry:
    """Hard-wall annulus rho <= r <= 1 in outer-radius units."""

    rho: float

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise DomainError(f"inner/outer radius ratio must lie in (0, 1), got {self.rho}")

    @property
    def width(self) -> float:
        return 1.0 - self.rho


@dataclass(frozen=True)
class UnitSystem:
    """Conversion between SI quantities and the internal dimensionless set."""

    r1_meters: float
    effective_mass_ratio: float

    def __post_init__(self):
        if self.r1_meters <= 0 or self.effective_mass_ratio <= 0:
            raise DomainError("outer radius and effective mass must be positive")

    @property
    def omega_scale_rad_per_s(self) -> float:
        """Omega = hbar / (2 m_eff r1^2), the frequency unit."""
        m = self.effective_mass_ratio * ELECTRON_MASS_SI
        return HBAR_SI / (2.0 * m * self.r1_meters ** 2)

    @property
    def energy_scale_joule(self) -> float:
        return HBAR_SI * self.omega_scale_rad_per_s

    def soi_ratio(self, rashba_alpha_si: float) -> float:
        """Dimensionless coupling omega / Omega for a Rashba parameter in J m."""
        m = self.effective_mass_ratio * ELECTRON_MASS_SI
        gamma = 2.0 * m * rashba_alpha_si / HBAR_SI ** 2
        return gamma * self.r1_meters

    def time_to_seconds(self, tau: float) -> float:
        return tau / self.omega_scale_rad_per_s


@dataclass(frozen=True)
class RadialQuadrature:
    """Gauss-Legendre rule mapped onto [rho, 1]."""

    geom: RingGeometry
    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def integrate(self, values) -> complex:
        """Integral over [rho, 1] of a function sampled on the nodes."""
        values = np.asarray(values)
        if values.shape[-1] != self.nodes.size:
            raise ContractError(
                f"sample count {values.shape[-1]} does not match quadrature order {self.order}")
        return values @ self.weights

    def integrate_radial(self, values) -> complex:
        """Integral of f(r) r dr, the radial part of the area measure."""
        values = np.asarray(values)
        if values.shape[-1] != self.nodes.size:
            raise ContractError(
                f"sample count {values.shape[-1]} does not match quadrature order {self.order}")
        return values @ (self.weights * self.nodes)


def make_quadrature(order: int, geom: RingGeometry) -> RadialQuadrature:
    """Gauss-Legendre quadrature of the given order on [rho, 1].

    Exact for polynomials up to degree 2*order - 1, which covers the
    monomial checks (dr, r dr) at machine precision for any order >= 2.

    Parameters
    ----------
    order : int
        Number of nodes, >= 2.
    geom : RingGeometry
    """
    if order < 2 or int(order) != order:
        raise DomainError(f"quadrature order must be an integer >= 2, got {order!r}")
    x, w = np.polynomial.legendre.leggauss(int(order))
    a, b = geom.rho, 1.0
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w
    return RadialQuadrature(geom=geom, order=int(order), nodes=nodes, weights=weights)


def refine_until_stable(geom: RingGeometry, integrand, start_order: int = 64,
                        tol: float = 1e-10, max_order: int = 4096) -> RadialQuadrature:
    """Double the quadrature order until the integral of `integrand` settles.

    `integrand` maps a node array to sample values. Returns the first rule
    whose result differs from the doubled rule by less than tol (absolute,
    relative to a unit-scale integrand).
    """
    order = start_order
    q = make_quadrature(order, geom)
    val = q.integrate_radial(integrand(q.nodes))
    while order <= max_order:
        q2 = make_quadrature(2 * order, geom)
        val2 = q2.integrate_radial(integrand(q2.nodes))
        if abs(val - val2) < tol:
            return q
        order *= 2
        q, val = q2, val2
    raise NumericalError(
        f"quadrature did not stabilise to {tol:.1e} below order {max_order}")


@dataclass(frozen=True)
class PolarGrid:
    """Tensor grid: quadrature nodes in r, uniform periodic grid in phi.

    The azimuthal count is a power of two exceeding 2 * m_max + 1 so that
    every azimuthal order up to m_max (and the partner order m_max + 1 in
    the spin-down component) is alias-free under the FFT.
    """

    geom: RingGeometry
    radial: np.ndarray = field(repr=False)
    radial_weights: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    m_max: int

    @classmethod
    def build(cls, q: RadialQuadrature, m_max: int) -> "PolarGrid":
        if m_max < 0:
            raise DomainError(f"m_max must be non-negative, got {m_max}")
        need = 2 * (m_max + 1) + 2
        n_phi = 1
        while n_phi < need:
            n_phi *= 2
        phi = np.arange(n_phi) * (2.0 * np.pi / n_phi)
        return cls(geom=q.geom, radial=q.nodes, radial_weights=q.weights,
                   phi=phi, m_max=m_max)

    @property
    def n_phi(self) -> int:
        return self.phi.size

    @property
    def n_r(self) -> int:
        return self.radial.size


def spinor_inner_product(f, g, q: RadialQuadrature, m_f: int, m_g: int) -> complex:
    """Inner product of two single-sector spinor fields.

    A sector-m spinor has components (u(r) e^{i m phi}, w(r) e^{i (m+1) phi});
    f and g are the radial samples, shape (2, n_nodes), rows (u, w) on the
    quadrature nodes. The azimuthal integral is done analytically: sectors
    with different m are exactly orthogonal, equal sectors contribute
    2 pi * integral of (conj(u_f) u_g + conj(w_f) w_g) r dr.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != (2, q.nodes.size) or g.shape != (2, q.nodes.size):
        raise ContractError(
            f"spinor samples must have shape (2, {q.nodes.size}), got {f.shape} and {g.shape}")
    if m_f != m_g:
        return 0.0 + 0.0j
    dens = np.conjugate(f[0]) * g[0] + np.conjugate(f[1]) * g[1]
    return 2.0 * np.pi * complex(q.integrate_radial(dens))
