"""Stationary states of the annular ring with constant Rashba coupling.

The total angular momentum j = l + s/2 is conserved, so the problem splits
into sectors labeled by the half-integer kappa = m + 1/2: the spin-up
component carries orbital order m, the spin-down component order m + 1.
Inside the ring a state of energy eps mixes four cylinder-function
solutions, two per effective branch, evaluated at branch wavenumbers

    k_plus  = -soi/2 + sqrt((soi/2)^2 + eps)
    k_minus = +soi/2 + sqrt((soi/2)^2 + eps)

where soi is the dimensionless coupling (omega / Omega in the docs) and
energies are in hbar * Omega. Hard walls at r = rho and r = 1 quantise eps
through a 4 x 4 boundary determinant; its refined roots, the null vector of
the boundary matrix, and the resulting spinor profiles are what this module
produces.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DegeneracyError, DomainError
from .geometry import RadialQuadrature, RingGeometry, make_quadrature
from .specfun import bessel_j, bessel_n, cross_product_det

_REFINE_XTOL = 1e-12  # root refinement in eps, comfortably below the 1e-10 contract
_RANK_TOL = 1e-6      # singular value ratios for root/degeneracy classification


class RescanWarning(UserWarning):
    """A structural check suggests the scan step may have been too coarse."""


@dataclass(frozen=True)
class NormCertificate:
    """Numerical quality record attached to every constructed mode."""

    boundary_residual: float   # max wall amplitude relative to interior peak
    norm_deviation: float      # |<psi|psi> - 1| after normalisation
    null_residual: float       # smallest singular value ratio at the root


def wavenumbers_for_energy(eps, soi):
    """Branch wavenumbers (k_plus, k_minus) for a dimensionless energy.

    Both satisfy their branch dispersion exactly:
    k_plus^2 + soi * k_plus = eps and k_minus^2 - soi * k_minus = eps.
    Energies below -(soi/2)^2 have no real wavenumbers and are rejected.
    """
    eps = float(eps)
    soi = float(soi)
    half = 0.5 * soi
    disc = half * half + eps
    if disc < 0.0:
        raise DomainError(
            f"energy {eps} below the branch minimum {-half * half} has no real wavenumbers")
    s = np.sqrt(disc)
    return -half + s, half + s


def boundary_matrix(k_plus, k_minus, m, rho):
    """4 x 4 hard-wall matrix in the kappa = m + 1/2 sector.

    Rows: spin-up value at r = rho, spin-down at rho, spin-up at 1,
    spin-down at 1. Columns: first/second kind at k_plus, then first/second
    kind at k_minus with the spin-up entries sign-flipped (the lower branch
    carries amplitude ratio -1 between the components).
    """
    r = np.array([rho, 1.0])
    jp_m, np_m = bessel_j(m, k_plus * r), bessel_n(m, k_plus * r)
    jp_m1, np_m1 = bessel_j(m + 1, k_plus * r), bessel_n(m + 1, k_plus * r)
    jm_m, nm_m = bessel_j(m, k_minus * r), bessel_n(m, k_minus * r)
    jm_m1, nm_m1 = bessel_j(m + 1, k_minus * r), bessel_n(m + 1, k_minus * r)
    return np.array([
        [jp_m[0], np_m[0], -jm_m[0], -nm_m[0]],
        [jp_m1[0], np_m1[0], jm_m1[0], nm_m1[0]],
        [jp_m[1], np_m[1], -jm_m[1], -nm_m[1]],
        [jp_m1[1], np_m1[1], jm_m1[1], nm_m1[1]],
    ])


def boundary_determinant(eps, soi, m, geom: RingGeometry, conditioned: bool = True):
    """Boundary determinant D(eps) whose zeros are the sector's energies.

    With `conditioned` (default) every column is scaled to unit Euclidean
    norm first; that keeps the value O(1) across the scan range without
    moving any zero. The raw determinant is available for structural checks.
    """
    if eps <= 0:
        raise DomainError(f"determinant is defined for eps > 0, got {eps}")
    kp, km = wavenumbers_for_energy(eps, soi)
    M = boundary_matrix(kp, km, m, geom.rho)
    if conditioned:
        M = M / np.linalg.norm(M, axis=0)
    return float(np.linalg.det(M))


def _determinant_batch(eps_grid, soi, m, geom):
    """Conditioned determinant on an energy grid, vectorised over eps."""
    half = 0.5 * soi
    s = np.sqrt(half * half + eps_grid)
    kp, km = -half + s, half + s
    r = np.array([geom.rho, 1.0])
    cols = np.empty((eps_grid.size, 4, 4))
    xp = kp[:, None] * r[None, :]
    xm = km[:, None] * r[None, :]
    jp_m, np_m = bessel_j(m, xp), bessel_n(m, xp)
    jp_m1, np_m1 = bessel_j(m + 1, xp), bessel_n(m + 1, xp)
    jm_m, nm_m = bessel_j(m, xm), bessel_n(m, xm)
    jm_m1, nm_m1 = bessel_j(m + 1, xm), bessel_n(m + 1, xm)
    cols[:, 0, 0], cols[:, 1, 0], cols[:, 2, 0], cols[:, 3, 0] = \
        jp_m[:, 0], jp_m1[:, 0], jp_m[:, 1], jp_m1[:, 1]
    cols[:, 0, 1], cols[:, 1, 1], cols[:, 2, 1], cols[:, 3, 1] = \
        np_m[:, 0], np_m1[:, 0], np_m[:, 1], np_m1[:, 1]
    cols[:, 0, 2], cols[:, 1, 2], cols[:, 2, 2], cols[:, 3, 2] = \
        -jm_m[:, 0], jm_m1[:, 0], -jm_m[:, 1], jm_m1[:, 1]
    cols[:, 0, 3], cols[:, 1, 3], cols[:, 2, 3], cols[:, 3, 3] = \
        -nm_m[:, 0], nm_m1[:, 0], -nm_m[:, 1], nm_m1[:, 1]
    cols /= np.linalg.norm(cols, axis=1, keepdims=True)
    return np.linalg.det(cols)


@dataclass
class Eigenmode:
    """One stationary spinor mode of the constant-coupling ring.

    The spinor field is
        psi(r, phi) = (u(r) e^{i m phi}, w(r) e^{i (m+1) phi})
    with real radial profiles reconstructed from the four coefficients
    `coeffs` multiplying the (first/second kind x branch) basis.
    Normalisation is <<psi|psi>> = 1 under the area measure r dr dphi.
    """

    geom: RingGeometry
    soi: float
    m: int
    n: int                     # radial label within the branch family, from 1
    branch: int                # +1 or -1
    energy: float
    k_plus: float
    k_minus: float
    coeffs: np.ndarray = field(repr=False)   # 4 real numbers
    norm_certificate: NormCertificate = None

    @property
    def kappa(self) -> float:
        return self.m + 0.5

    def radial_profiles(self, r):
        """Radial spinor components (u, w) on the given radii."""
        r = np.asarray(r, dtype=float)
        c = self.coeffs
        u = (c[0] * bessel_j(self.m, self.k_plus * r)
             + c[1] * bessel_n(self.m, self.k_plus * r)
             - c[2] * bessel_j(self.m, self.k_minus * r)
             - c[3] * bessel_n(self.m, self.k_minus * r))
        w = (c[0] * bessel_j(self.m + 1, self.k_plus * r)
             + c[1] * bessel_n(self.m + 1, self.k_plus * r)
             + c[2] * bessel_j(self.m + 1, self.k_minus * r)
             + c[3] * bessel_n(self.m + 1, self.k_minus * r))
        return u, w

    def kinetic_profiles(self, r):
        """Action of the spin-diagonal kinetic operator on (u, w).

        Each basis column is an exact eigenfunction of the scalar operator
        at its own wavenumber, so the action is algebraic.
        """
        r = np.asarray(r, dtype=float)
        c = self.coeffs
        kp2, km2 = self.k_plus ** 2, self.k_minus ** 2
        u = (kp2 * (c[0] * bessel_j(self.m, self.k_plus * r)
                    + c[1] * bessel_n(self.m, self.k_plus * r))
             - km2 * (c[2] * bessel_j(self.m, self.k_minus * r)
                      + c[3] * bessel_n(self.m, self.k_minus * r)))
        w = (kp2 * (c[0] * bessel_j(self.m + 1, self.k_plus * r)
                    + c[1] * bessel_n(self.m + 1, self.k_plus * r))
             + km2 * (c[2] * bessel_j(self.m + 1, self.k_minus * r)
                      + c[3] * bessel_n(self.m + 1, self.k_minus * r)))
        return u, w

    def spinor_samples(self, q: RadialQuadrature):
        u, w = self.radial_profiles(q.nodes)
        return np.stack([u, w]).astype(complex)

    def density(self, r):
        u, w = self.radial_profiles(r)
        return np.abs(u) ** 2 + np.abs(w) ** 2


def build_eigenmode(eps_root, m, soi, geom: RingGeometry, q: RadialQuadrature,
                    n: int = 0, branch: int = 0) -> Eigenmode:
    """Construct and normalise the mode at a refined determinant root.

    The coefficient vector is the null direction of the conditioned boundary
    matrix (smallest singular vector). A smallest singular value that is not
    small flags eps_root as not actually a root; two comparably small values
    flag an unresolved degeneracy and both candidate null vectors are
    attached to the error.

    When `branch` is 0 the branch is classified from the sign of the
    coupling expectation eps - <kinetic>, which is negative for the member
    continuing the lower (spin-up dominated) state of each doublet.
    """
    kp, km = wavenumbers_for_energy(eps_root, soi)
    M = boundary_matrix(kp, km, m, geom.rho)
    scale = np.linalg.norm(M, axis=0)
    _, svals, vh = np.linalg.svd(M / scale)
    if svals[3] / svals[0] > _RANK_TOL:
        raise ConsistencyError(
            f"eps = {eps_root} is not a boundary root in sector m = {m}: "
            f"singular values {svals}")
    if svals[2] / svals[0] < _RANK_TOL:
        raise DegeneracyError(
            f"degenerate root eps = {eps_root} in sector m = {m}",
            null_vectors=(vh[3] / scale, vh[2] / scale))
    coeffs = vh[3] / scale

    mode = Eigenmode(geom=geom, soi=soi, m=m, n=n, branch=branch,
                     energy=float(eps_root), k_plus=kp, k_minus=km,
                     coeffs=coeffs)
    u, w = mode.radial_profiles(q.nodes)
    norm2 = 2.0 * np.pi * q.integrate_radial(u * u + w * w)
    mode.coeffs = coeffs / np.sqrt(norm2)

    u, w = mode.radial_profiles(q.nodes)
    peak = np.sqrt(np.max(u * u + w * w))
    uw_walls = np.abs(np.concatenate(mode.radial_profiles(np.array([geom.rho, 1.0]))))
    residual = float(np.max(uw_walls) / peak)
    norm_dev = abs(2.0 * np.pi * q.integrate_radial(u * u + w * w) - 1.0)
    mode.norm_certificate = NormCertificate(
        boundary_residual=residual, norm_deviation=float(norm_dev),
        null_residual=float(svals[3] / svals[0]))

    if branch == 0:
        ku, kw = mode.kinetic_profiles(q.nodes)
        kinetic = 2.0 * np.pi * q.integrate_radial(u * ku + w * kw)
        mode.branch = 1 if eps_root - kinetic > 0 else -1
    return mode


def _scalar_roots(m, k_max, geom, k_min=1e-6):
    """Zeros of the annulus cross product for order m in (k_min, k_max]."""
    if k_max <= k_min:
        return []
    step = np.pi / (8.0 * geom.width)
    grid = np.linspace(k_min, k_max, max(int((k_max - k_min) / step) + 2, 8))
    vals = cross_product_det(m, grid, geom.rho, 1.0)
    from scipy.optimize import brentq
    roots = []
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in sign_change:
        roots.append(brentq(lambda k: cross_product_det(m, k, geom.rho, 1.0),
                            grid[i], grid[i + 1], xtol=1e-14, rtol=8.9e-16))
    return roots


def _scalar_mode(k_root, m_order, sector_m, branch, n, soi, geom, q) -> Eigenmode:
    """Decoupled mode at soi = 0: a scalar annulus profile in one component.

    m_order is the orbital order carrying the profile (sector_m for spin-up,
    sector_m + 1 for spin-down); the other component vanishes identically.
    """
    p = np.array([bessel_n(m_order, k_root * geom.rho),
                  -bessel_j(m_order, k_root * geom.rho)])
    p /= np.linalg.norm(p)
    if m_order == sector_m:
        coeffs = 0.5 * np.array([p[0], p[1], -p[0], -p[1]])
    else:
        coeffs = 0.5 * np.array([p[0], p[1], p[0], p[1]])
    mode = Eigenmode(geom=geom, soi=soi, m=sector_m, n=n, branch=branch,
                     energy=float(k_root ** 2), k_plus=float(k_root),
                     k_minus=float(k_root), coeffs=coeffs)
    u, w = mode.radial_profiles(q.nodes)
    norm2 = 2.0 * np.pi * q.integrate_radial(u * u + w * w)
    mode.coeffs = coeffs / np.sqrt(norm2)
    u, w = mode.radial_profiles(q.nodes)
    peak = np.sqrt(np.max(u * u + w * w))
    walls = np.abs(np.concatenate(mode.radial_profiles(np.array([geom.rho, 1.0]))))
    mode.norm_certificate = NormCertificate(
        boundary_residual=float(np.max(walls) / peak),
        norm_deviation=float(abs(2.0 * np.pi * q.integrate_radial(u * u + w * w) - 1.0)),
        null_residual=0.0)
    return mode


def _grid_steps(eps_max, m, geom):
    """Scan grid with a step tracking the locally expected level spacing."""
    inv_r2 = (1.0 / geom.rho - 1.0) / geom.width
    pair_gap = max(1.0, (2 * min(abs(m), abs(m + 1)) + 1) * inv_r2)
    pts = [1e-4]
    while pts[-1] < eps_max:
        eps = pts[-1]
        radial_gap = 2.0 * np.sqrt(max(eps, 4.0)) * np.pi / geom.width
        step = min(0.25, radial_gap / 8.0, pair_gap / 6.0)
        pts.append(eps + step)
    pts[-1] = eps_max
    return np.array(pts)


def scan_spectrum(m, eps_max, soi, geom: RingGeometry,
                  q: RadialQuadrature = None) -> list:
    """All eigenmodes of sector kappa = m + 1/2 with 0 < energy <= eps_max.

    Roots of the boundary determinant are bracketed on an adaptive grid,
    refined to |delta eps| < 1e-10, and built into labeled, normalised
    Eigenmode objects, sorted by energy. Dips of |D| toward zero without a
    sign change trigger a recursive local subdivision so near-tangent pairs
    (tightly split doublets at small coupling) are not skipped. A rescan
    warning is emitted when the radial node counts of the collected modes
    show a gap, which is the symptom of a missed root.

    At soi = 0 the sector decouples into two scalar annulus problems; the
    scan then dispatches to the cross-product solver directly and labels
    the spin-up (order m) family branch -1 and the spin-down (order m + 1)
    family branch +1, matching the small-soi continuation.
    """
    if eps_max <= 0:
        raise DomainError(f"eps_max must be positive, got {eps_max}")
    if soi < 0:
        raise DomainError(f"negative coupling not supported, got soi = {soi}")
    if q is None:
        q = make_quadrature(128, geom)

    if soi == 0.0:
        k_max = np.sqrt(eps_max)
        modes = []
        for n, k in enumerate(_scalar_roots(m, k_max, geom), start=1):
            modes.append(_scalar_mode(k, m, m, -1, n, soi, geom, q))
        for n, k in enumerate(_scalar_roots(m + 1, k_max, geom), start=1):
            modes.append(_scalar_mode(k, m + 1, m, +1, n, soi, geom, q))
        modes.sort(key=lambda md: md.energy)
        return modes

    from scipy.optimize import brentq

    grid = _grid_steps(eps_max, m, geom)
    vals = _determinant_batch(grid, soi, m, geom)

    brackets = []
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    brackets.extend((grid[i], grid[i + 1]) for i in sign_change)

    # Guard against double roots hiding between grid points: subdivide deep
    # |D| dips that come back up without changing sign.
    absv = np.abs(vals)
    floor = 0.05 * np.median(absv)
    for i in range(1, len(grid) - 1):
        if absv[i] < floor and absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1] \
                and i not in sign_change and (i - 1) not in sign_change:
            found, resolved = _dip_brackets(grid[i - 1], grid[i + 1],
                                            soi, m, geom)
            brackets.extend(found)
            if not resolved:
                warnings.warn(
                    f"|D| dip near eps = {grid[i]:.6g} in sector m = {m} "
                    "never produced a sign change; a root pair may be "
                    "unresolved there",
                    RescanWarning, stacklevel=2)

    roots = []
    for lo, hi in brackets:
        root = brentq(lambda e: boundary_determinant(e, soi, m, geom),
                      lo, hi, xtol=_REFINE_XTOL, rtol=8.9e-16)
        roots.append(root)
    roots.sort()

    modes = []
    for eps in roots:
        try:
            modes.append(build_eigenmode(eps, m, soi, geom, q))
        except DegeneracyError:
            warnings.warn(
                f"unresolved degeneracy at eps = {eps:.12g} in sector m = {m}",
                RescanWarning, stacklevel=2)
            raise
    counters = {1: 0, -1: 0}
    for mode in modes:
        counters[mode.branch] += 1
        mode.n = counters[mode.branch]

    _check_node_ladder(modes, soi, eps_max, m)
    return modes


def _dip_brackets(lo, hi, soi, m, geom, depth=5):
    """Chase a dip of |D| down until it either flips sign or bottoms out.

    Returns (brackets, resolved). resolved is False only when the dip kept
    deepening through every level without a sign change, i.e. a suspected
    root pair tighter than the final subdivision.
    """
    start = max(abs(boundary_determinant(lo, soi, m, geom)),
                abs(boundary_determinant(hi, soi, m, geom)))
    fv = None
    for _ in range(depth):
        fine = np.linspace(lo, hi, 129)
        fv = _determinant_batch(fine, soi, m, geom)
        flips = np.nonzero(np.sign(fv[:-1]) * np.sign(fv[1:]) < 0)[0]
        if flips.size:
            return [(fine[j], fine[j + 1]) for j in flips], True
        j = int(np.clip(np.argmin(np.abs(fv)), 1, 127))
        lo, hi = fine[j - 1], fine[j + 1]
    return [], bool(np.min(np.abs(fv)) > 1e-6 * start)


def _check_node_ladder(modes, soi, eps_max, m):
    """Warn when the sector's node counts betray a missed determinant root.

    Every radial label contributes a doublet, so the multiset of node
    counts fills 0, 0, 1, 1, ... A value that appears once is fine only
    when its partner could still sit above eps_max (the upper doublet
    member lies at most about 2 soi sqrt(eps) higher); a value that is
    skipped entirely, or appears more than twice, cannot come from a
    complete scan. Sectors with any ambiguous count are left unchecked.
    """
    tally = {}
    for mode in modes:
        nodes = count_radial_nodes(mode, samples=1024)
        if nodes.ambiguous:
            return
        tally.setdefault(nodes.count, []).append(mode.energy)
    if not tally:
        return
    top = max(tally)
    suspect = None
    for v in range(top + 1):
        eners = tally.get(v, [])
        if len(eners) > 2:
            suspect = v
        elif not eners:
            suspect = v
        elif len(eners) == 1 and v < top:
            margin = 2.5 * soi * np.sqrt(eners[0]) + 5.0
            if eners[0] + margin < eps_max:
                suspect = v
        if suspect is not None:
            warnings.warn(
                f"node count {suspect} in sector m = {m} does not ladder "
                "up in doublets; a determinant root was probably missed, "
                "rescan finer",
                RescanWarning, stacklevel=3)
            return


def pair_doublets(modes):
    """Group a sector scan into (lower, upper) doublet pairs by radial label."""
    by_n = {}
    for mode in modes:
        by_n.setdefault(mode.n, {})[mode.branch] = mode
    pairs = []
    for n in sorted(by_n):
        d = by_n[n]
        if -1 in d and +1 in d:
            pairs.append((d[-1], d[+1]))
    return pairs


@dataclass(frozen=True)
class NodeCount:
    """Interior node circles of a mode: paired zero crossings of both components."""

    count: int
    locations: tuple
    separations: tuple       # |r_up - r_down| per paired node
    unpaired_up: tuple
    unpaired_down: tuple

    @property
    def ambiguous(self) -> bool:
        return bool(self.unpaired_up or self.unpaired_down)


def count_radial_nodes(mode: Eigenmode, samples: int = 4096,
                       pair_window: float = None) -> NodeCount:
    """Count interior radii where both spinor components change sign together.

    The two components cross zero at slightly different radii (the offset
    grows with the coupling), so a node circle is detected as a pair of
    sign changes, one per component, closer than `pair_window`. The default
    window is a quarter of the smallest same-component zero spacing, capped
    at a tenth of the annulus width. Sign changes left unpaired are reported
    instead of silently dropped.
    """
    geom = mode.geom
    margin = 3.0 * geom.width / samples
    r = np.linspace(geom.rho + margin, 1.0 - margin, samples)
    u, w = mode.radial_profiles(r)

    from scipy.optimize import brentq

    def zeros_of(component_index):
        vals = u if component_index == 0 else w
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        out = []
        for i in idx:
            f = lambda rr: mode.radial_profiles(np.array([rr]))[component_index][0]
            out.append(brentq(f, r[i], r[i + 1], xtol=1e-13))
        return out

    zu, zw = zeros_of(0), zeros_of(1)

    spacings = [b - a for a, b in zip(sorted(zu)[:-1], sorted(zu)[1:])]
    spacings += [b - a for a, b in zip(sorted(zw)[:-1], sorted(zw)[1:])]
    if pair_window is None:
        pair_window = 0.1 * geom.width
        if spacings:
            pair_window = min(pair_window, 0.25 * min(spacings))

    zu_left, zw_left = list(zu), list(zw)
    nodes, seps = [], []
    for a in list(zu_left):
        if not zw_left:
            break
        b = min(zw_left, key=lambda x: abs(x - a))
        if abs(b - a) < pair_window:
            nodes.append(0.5 * (a + b))
            seps.append(abs(b - a))
            zu_left.remove(a)
            zw_left.remove(b)
    return NodeCount(count=len(nodes), locations=tuple(nodes),
                     separations=tuple(seps), unpaired_up=tuple(zu_left),
                     unpaired_down=tuple(zw_left))
