"""Periodically driven coupling: exact propagator and driven ring modes.

When the Rashba strength oscillates as soi(tau) = A cos(nu tau) + B, the
reduced two-level problem at wavenumber k has a Hamiltonian that commutes
with itself at all times, so the propagator is a single exponential with
the accumulated phase

    theta(tau) = (A k / nu) sin(nu tau) + B k tau.

Quasienergies come from a 4 x 4 boundary determinant that contains no drive
parameters at all; each root k gives the doubly degenerate quasienergy k^2.
The boundary-adapted driven modes are single-component radial profiles of
the undriven annulus dressed with the phase e^{-i k^2 tau -/+ i theta(tau)}.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DegeneracyError, DomainError
from .geometry import RadialQuadrature, RingGeometry, make_quadrature
from .spectrum import RescanWarning, boundary_matrix, NormCertificate
from .specfun import (HarmonicWeightTable, bessel_j, bessel_n,
                      cross_product_det, jacobi_anger_weights,
                      suggest_cutoff)

_RANK_TOL = 1e-6
_ROOT_TOL = 1e-7   # |D2| threshold accepted by the mode builder


@dataclass(frozen=True)
class Drive:
    """Oscillating coupling soi(tau) = amp * cos(nu * tau) + offset."""

    amp: float
    offset: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.amp) and np.isfinite(self.offset)
                and np.isfinite(self.nu)):
            raise DomainError("drive parameters must be finite")
        if self.amp < 0:
            raise DomainError(f"drive amplitude must be >= 0, got {self.amp}")
        if self.nu <= 0:
            raise DomainError(f"drive frequency must be > 0, got {self.nu}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.nu

    def coupling(self, tau):
        return self.amp * np.cos(self.nu * np.asarray(tau, dtype=float)) + self.offset

    def phase_integral(self, k, tau):
        """theta(tau) = k * integral of the coupling from 0 to tau."""
        tau = np.asarray(tau, dtype=float)
        return (self.amp * k / self.nu) * np.sin(self.nu * tau) + self.offset * k * tau


def propagator_2x2(k, drive: Drive, tau):
    """Exact reduced-problem propagator at wavenumber k.

    U(tau) = e^{-i k^2 tau} [[cos th, -i sin th], [-i sin th, cos th]]
    with th = drive.phase_integral(k, tau). Unitary by construction and the
    identity at tau = 0.
    """
    if k < 0 or not np.isfinite(k):
        raise DomainError(f"wavenumber must be finite and >= 0, got {k}")
    th = drive.phase_integral(k, tau)
    dyn = np.exp(-1j * k * k * np.asarray(tau, dtype=float))
    c, s = np.cos(th), np.sin(th)
    return dyn * np.array([[c, -1j * s], [-1j * s, c]])


def floquet_eigenpair(k, branch, drive: Drive, tau):
    """Reduced-problem Floquet solution for one spin branch.

    Returns e^{-i k^2 tau} e^{-/+ i theta(tau)} (+/-1, 1)/sqrt(2); an exact
    eigenvector of propagator_2x2 at every tau. The branches stay mutually
    orthogonal because the spin direction is constant.
    """
    if branch not in (+1, -1):
        raise DomainError(f"branch must be +1 or -1, got {branch}")
    th = drive.phase_integral(k, tau)
    phase = np.exp(-1j * (k * k * np.asarray(tau, dtype=float) + branch * th))
    return phase * np.array([branch, 1.0]) / np.sqrt(2.0)


def floquet_boundary_determinant(k, m, geom: RingGeometry, conditioned: bool = True):
    """Quasienergy determinant D2(k); its zeros set the allowed wavenumbers.

    Built from the same hard-wall matrix as the static problem, evaluated
    with both branch wavenumbers equal to k. No drive parameter enters, so
    the root set is shared by every drive. Column conditioning as in the
    static determinant; the raw value factorises into the two scalar
    annulus determinants (orders m and m + 1) times -4.
    """
    if k <= 0:
        raise DomainError(f"determinant is defined for k > 0, got {k}")
    M = boundary_matrix(k, k, m, geom.rho)
    if conditioned:
        M = M / np.linalg.norm(M, axis=0)
    return float(np.linalg.det(M))


@dataclass(frozen=True)
class QuasienergyRoot:
    """One root of D2 with its labels; the quasienergy k^2 is twofold."""

    m: int
    n: int
    k: float
    family: str          # "up" (order-m profile) or "down" (order m+1)
    degeneracy: int = 2

    @property
    def kappa(self) -> float:
        return self.m + 0.5

    @property
    def quasienergy(self) -> float:
        return self.k ** 2

    def reduced_quasienergy(self, nu: float) -> float:
        return self.quasienergy % nu


def scan_floquet_spectrum(m, k_max, geom: RingGeometry) -> list:
    """All roots of D2 in (0, k_max], refined to |delta k| < 1e-10.

    Roots alternate between the two single-component families; each entry
    records which component carries the profile and the degeneracy marker.
    Radial labels count within a family, mirroring the static branch
    convention (the "up" family continues the -1 branch, "down" the +1).
    """
    if k_max <= 0:
        raise DomainError(f"k_max must be positive, got {k_max}")
    from scipy.optimize import brentq

    step = np.pi / (32.0 * geom.width)
    grid = np.linspace(1e-4, k_max, max(int(k_max / step) + 2, 16))
    vals = np.array([floquet_boundary_determinant(k, m, geom) for k in grid])

    brackets = []
    sign_change = set(np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0])
    brackets.extend((grid[i], grid[i + 1]) for i in sorted(sign_change))
    absv = np.abs(vals)
    # A cross-family root pair tighter than the grid leaves no sign change,
    # only a quadratic dip; chase every low local minimum down.
    floor = 0.25 * np.median(absv)
    for i in range(1, len(grid) - 1):
        if absv[i] < floor and absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1] \
                and i not in sign_change and (i - 1) not in sign_change:
            found, resolved = _dip_brackets_k(grid[i - 1], grid[i + 1], m, geom)
            brackets.extend(found)
            if not resolved:
                warnings.warn(
                    f"|D2| dip near k = {grid[i]:.6g} in sector m = {m} "
                    "never produced a sign change; a root pair may be "
                    "unresolved there",
                    RescanWarning, stacklevel=2)

    roots = []
    for lo, hi in brackets:
        root = brentq(lambda k: floquet_boundary_determinant(k, m, geom),
                      lo, hi, xtol=1e-12, rtol=8.9e-16)
        roots.append(_polish_root(root, m, geom))
    roots.sort()

    entries = []
    counters = {"up": 0, "down": 0}
    for k in roots:
        family = _root_family(k, m, geom)
        counters[family] += 1
        entries.append(QuasienergyRoot(m=m, n=counters[family], k=float(k),
                                       family=family))
    _check_family_ladder(entries, m)
    return entries


def _polish_root(k, m, geom):
    """Secant-polish a D2 root on the scalar factor that vanishes there.

    Near a root the 4x4 determinant sits on a cancellation noise floor
    that limits brentq to a few 1e-10 in k. The root is exactly a zero of
    one of the two cross-product factors, whose two-term evaluation is
    clean, so a short secant run on that factor reaches machine accuracy.
    """
    rho = geom.rho
    order = m if abs(cross_product_det(m, k, rho, 1.0)) \
        <= abs(cross_product_det(m + 1, k, rho, 1.0)) else m + 1
    a = k
    b = k * (1.0 + 1e-9)
    fa = cross_product_det(order, a, rho, 1.0)
    fb = cross_product_det(order, b, rho, 1.0)
    for _ in range(12):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        if not np.isfinite(c) or abs(c - k) > 1e-6 * max(1.0, k):
            return k
        a, fa = b, fb
        b, fb = c, cross_product_det(order, c, rho, 1.0)
        if fb == 0.0 or abs(b - a) <= 4.0 * np.finfo(float).eps * abs(b):
            break
    return float(b)


def _dip_brackets_k(lo, hi, m, geom, depth=5):
    """Chase a dip of |D2| down until it either flips sign or bottoms out."""
    start = max(abs(floquet_boundary_determinant(lo, m, geom)),
                abs(floquet_boundary_determinant(hi, m, geom)))
    fv = None
    for _ in range(depth):
        fine = np.linspace(lo, hi, 129)
        fv = np.array([floquet_boundary_determinant(k, m, geom) for k in fine])
        flips = np.nonzero(np.sign(fv[:-1]) * np.sign(fv[1:]) < 0)[0]
        if flips.size:
            return [(fine[j], fine[j + 1]) for j in flips], True
        j = int(np.clip(np.argmin(np.abs(fv)), 1, 127))
        lo, hi = fine[j - 1], fine[j + 1]
    return [], bool(np.min(np.abs(fv)) > 1e-6 * start)


def _check_family_ladder(entries, m):
    """Warn when the family sequence betrays a missed determinant root.

    The order-m and order-(m + 1) Dirichlet wavenumbers interlace, starting
    with order m, so the sorted root list must read up, down, up, down, ...
    Any other pattern means a root escaped the scan.
    """
    expected = ("up", "down")
    for i, entry in enumerate(entries):
        if entry.family != expected[i % 2]:
            warnings.warn(
                f"family sequence broken at k = {entry.k:.9g} in sector "
                f"m = {m}; a determinant root was likely missed",
                RescanWarning, stacklevel=3)
            return


def _root_family(k, m, geom):
    """Which scalar factor vanishes at a D2 root: order m or order m + 1."""
    M = boundary_matrix(k, k, m, geom.rho)
    scale = np.linalg.norm(M, axis=0)
    _, svals, vh = np.linalg.svd(M / scale)
    alpha = vh[3] / scale
    p = np.hypot(alpha[0] - alpha[2], alpha[1] - alpha[3])
    s = np.hypot(alpha[0] + alpha[2], alpha[1] + alpha[3])
    return "up" if p >= s else "down"


def natural_branch(family: str) -> int:
    """Spin branch continuing a family to the static limit amp -> 0.

    With a residual constant coupling the order-m (spin-up) profile is the
    lower doublet member, branch -1, and carries phase e^{+i theta}; the
    order-(m+1) profile is branch +1 with e^{-i theta}.
    """
    if family == "up":
        return -1
    if family == "down":
        return +1
    raise DomainError(f"unknown family {family!r}")


@dataclass
class FloquetMode:
    """One boundary-adapted driven mode.

    The spinor field is

        psi(r, phi, tau) = e^{-i k^2 tau} e^{-branch * i theta(tau)}
                           * (u(r) e^{i m phi}, w(r) e^{i (m+1) phi})

    where exactly one of u, w is nonzero (which one is `family`) and theta
    is the drive's accumulated phase at this k. Hard-wall conditions hold at
    every instant because the spatial profile is time independent; the part
    left after stripping e^{-i k^2 tau} and, for offset drives, the secular
    e^{-branch * i * offset * k * tau}, is periodic with the drive.
    """

    geom: RingGeometry
    drive: Drive
    m: int
    n: int
    branch: int
    family: str
    k: float
    coeffs: np.ndarray = field(repr=False)
    norm_certificate: NormCertificate = None

    @property
    def kappa(self) -> float:
        return self.m + 0.5

    @property
    def quasienergy(self) -> float:
        return self.k ** 2

    @property
    def reduced_quasienergy(self) -> float:
        return self.quasienergy % self.drive.nu

    def radial_profiles(self, r):
        """Time-independent radial components (u, w); one is identically 0."""
        r = np.asarray(r, dtype=float)
        c = self.coeffs
        u = ((c[0] - c[2]) * bessel_j(self.m, self.k * r)
             + (c[1] - c[3]) * bessel_n(self.m, self.k * r))
        w = ((c[0] + c[2]) * bessel_j(self.m + 1, self.k * r)
             + (c[1] + c[3]) * bessel_n(self.m + 1, self.k * r))
        return u, w

    def phase(self, tau):
        """Scalar time factor multiplying the spatial profile."""
        tau = np.asarray(tau, dtype=float)
        th = self.drive.phase_integral(self.k, tau)
        return np.exp(-1j * (self.k ** 2 * tau + self.branch * th))

    def periodic_phase(self, tau):
        """Phase with e^{-i k^2 tau} and the secular offset part removed."""
        tau = np.asarray(tau, dtype=float)
        th = (self.drive.amp * self.k / self.drive.nu) * np.sin(self.drive.nu * tau)
        return np.exp(-1j * self.branch * th)

    def spinor_samples(self, q: RadialQuadrature, tau=0.0):
        u, w = self.radial_profiles(q.nodes)
        return self.phase(tau) * np.stack([u, w]).astype(complex)


def build_floquet_mode(k_root, branch, m, drive: Drive, geom: RingGeometry,
                       q: RadialQuadrature = None, n: int = 0) -> FloquetMode:
    """Driven mode at a refined D2 root, for the requested spin branch.

    The coefficient vector is the null direction of the conditioned
    boundary matrix M_plus; flipping the signs of its third and fourth
    components gives the null vector of the partner matrix M_minus, which
    shares the same single-component spatial profile. Both spin branches
    are available on every root (that is the twofold quasienergy
    degeneracy); the branch only selects the sign of the accumulated phase.
    """
    if q is None:
        q = make_quadrature(128, geom)
    if branch not in (+1, -1):
        raise DomainError(f"branch must be +1 or -1, got {branch}")
    dval = floquet_boundary_determinant(k_root, m, geom)
    if abs(dval) > _ROOT_TOL:
        raise ConsistencyError(
            f"k = {k_root} is not a quasienergy root in sector m = {m}: "
            f"|D2| = {abs(dval):.3e}")
    k_root = _polish_root(k_root, m, geom)

    M = boundary_matrix(k_root, k_root, m, geom.rho)
    scale = np.linalg.norm(M, axis=0)
    _, svals, vh = np.linalg.svd(M / scale)
    if svals[2] / svals[0] < _RANK_TOL:
        raise DegeneracyError(
            f"coincident family roots at k = {k_root} in sector m = {m}",
            null_vectors=(vh[3] / scale, vh[2] / scale))
    alpha = vh[3] / scale

    p = np.hypot(alpha[0] - alpha[2], alpha[1] - alpha[3])
    s = np.hypot(alpha[0] + alpha[2], alpha[1] + alpha[3])
    family = "up" if p >= s else "down"

    mode = FloquetMode(geom=geom, drive=drive, m=m, n=n, branch=branch,
                       family=family, k=float(k_root), coeffs=alpha)
    u, w = mode.radial_profiles(q.nodes)
    norm2 = 2.0 * np.pi * q.integrate_radial(u * u + w * w)
    mode.coeffs = alpha / np.sqrt(norm2)

    u, w = mode.radial_profiles(q.nodes)
    peak = np.sqrt(np.max(u * u + w * w))
    walls = np.abs(np.concatenate(mode.radial_profiles(np.array([geom.rho, 1.0]))))
    mode.norm_certificate = NormCertificate(
        boundary_residual=float(np.max(walls) / peak),
        norm_deviation=float(abs(2.0 * np.pi * q.integrate_radial(u * u + w * w) - 1.0)),
        null_residual=float(svals[3] / svals[0]))
    return mode


def minus_matrix_null_vector(alpha):
    """Map an M_plus null vector to the M_minus one (components 3, 4 flipped)."""
    out = np.array(alpha, dtype=float, copy=True)
    out[2] = -out[2]
    out[3] = -out[3]
    return out


def sideband_weights(mode: FloquetMode, cutoff: int = None) -> HarmonicWeightTable:
    """Harmonic content of the mode's periodic phase factor.

    The argument is z = amp * k / nu; weight alpha is the amplitude with
    which the harmonic alpha * nu rides on the mode's observables.
    """
    z = mode.drive.amp * mode.k / mode.drive.nu
    if cutoff is None:
        cutoff = suggest_cutoff(z)
    return jacobi_anger_weights(z, cutoff)


def quasienergy_partners(value, nu, count=3):
    """Representative quasienergies equivalent to `value` modulo the drive."""
    return [value + j * nu for j in range(-count, count + 1)]
