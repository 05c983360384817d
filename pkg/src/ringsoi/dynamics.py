"""State preparation, time propagation, and observables.

An arbitrary spinor field on the polar grid is expanded over eigenmodes
(constant coupling) or driven modes (oscillating coupling); evolution then
multiplies each coefficient by its mode's scalar time factor, so norm and
angular-sector weights are conserved to rounding. Observables are pointwise
spinor bilinears; time series at a probe point feed the Fourier, averaging,
and revival diagnostics.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, SamplingError
from .floquet import FloquetMode
from .geometry import PolarGrid, RadialQuadrature, RingGeometry


class TruncationWarning(UserWarning):
    """An expansion captured materially less than the full state norm."""


class ClippedPacketWarning(UserWarning):
    """Requested packet leaks past the walls before masking."""


@dataclass
class SpinorField:
    """Complex 2-spinor sampled on a polar grid at one instant.

    values has shape (2, n_r, n_phi): component 0 is spin-up, 1 spin-down.
    """

    grid: PolarGrid
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    def norm(self) -> float:
        dens = np.abs(self.values[0]) ** 2 + np.abs(self.values[1]) ** 2
        dphi = 2.0 * np.pi / self.grid.n_phi
        radial = self.grid.radial_weights * self.grid.radial
        return float(np.sqrt(dphi * np.sum(radial[:, None] * dens)))

    def azimuthal_modes(self) -> np.ndarray:
        """Azimuthal Fourier amplitudes, shape (2, n_r, n_phi), index = order."""
        return np.fft.fft(self.values, axis=2) / self.grid.n_phi


@dataclass(frozen=True)
class Observables:
    """Pointwise density and spin vector of a spinor field."""

    density: np.ndarray
    spin_x: np.ndarray
    spin_y: np.ndarray
    spin_z: np.ndarray


def observables(psi: SpinorField) -> Observables:
    """Density and local spin expectation maps (spin-1/2, dimensionless).

    density = |a|^2 + |b|^2, S_x = Re(conj(a) b), S_y = Im(conj(a) b),
    S_z = (|a|^2 - |b|^2)/2; a pure spinor is fully polarised pointwise:
    |S| = density / 2.
    """
    a, b = psi.values[0], psi.values[1]
    cross = np.conj(a) * b
    return Observables(density=np.abs(a) ** 2 + np.abs(b) ** 2,
                       spin_x=np.real(cross),
                       spin_y=np.imag(cross),
                       spin_z=0.5 * (np.abs(a) ** 2 - np.abs(b) ** 2))


_SELECTORS = ("density", "spin_x", "spin_y", "spin_z")


def _select(selector, a, b):
    if selector == "density":
        return np.abs(a) ** 2 + np.abs(b) ** 2
    if selector == "spin_x":
        return np.real(np.conj(a) * b)
    if selector == "spin_y":
        return np.imag(np.conj(a) * b)
    if selector == "spin_z":
        return 0.5 * (np.abs(a) ** 2 - np.abs(b) ** 2)
    raise DomainError(f"unknown observable {selector!r}; expected one of {_SELECTORS}")


def gaussian_packet(center, widths, spin, geom: RingGeometry,
                    grid: PolarGrid) -> SpinorField:
    """Normalised Gaussian wave packet with exact wall zeros.

    The envelope is exp(-(r - r_c)^2 / 4 sigma_r^2) times a Gaussian in the
    wrapped angular distance to phi_c, multiplied by sin(pi (r - rho)/(1 -
    rho)) so both walls are exact zeros, and carrying a constant spinor.
    The angular factor uses the nearest-branch distance, which is the right
    wrapped-Gaussian convention for sigma_phi well below pi. A packet whose
    unmasked radial tails hold more than 1e-6 of the mass triggers a
    warning (the mask clips them regardless).
    """
    r_c, phi_c = center
    sigma_r, sigma_phi = widths
    rho = geom.rho
    if not (rho < r_c < 1.0):
        raise DomainError(f"packet center r = {r_c} outside the open annulus")
    if sigma_r <= 0 or sigma_phi <= 0:
        raise DomainError("packet widths must be positive")
    spin = np.asarray(spin, dtype=complex)
    spin_norm = np.linalg.norm(spin)
    if spin.shape != (2,) or spin_norm == 0:
        raise DomainError("spin must be a nonzero 2-component vector")
    spin = spin / spin_norm

    from scipy.special import erfc
    tail = 0.5 * (erfc((1.0 - r_c) / (np.sqrt(2.0) * sigma_r))
                  + erfc((r_c - rho) / (np.sqrt(2.0) * sigma_r)))
    if tail > 1e-6:
        warnings.warn(
            f"fraction {tail:.2e} of the unmasked packet lies outside the "
            "annulus; the wall mask clips it", ClippedPacketWarning,
            stacklevel=2)

    r = grid.radial[:, None]
    dphi = (grid.phi[None, :] - phi_c + np.pi) % (2.0 * np.pi) - np.pi
    envelope = (np.exp(-(r - r_c) ** 2 / (4.0 * sigma_r ** 2))
                * np.exp(-dphi ** 2 / (4.0 * sigma_phi ** 2))
                * np.sin(np.pi * (r - rho) / (1.0 - rho)))
    values = np.stack([spin[0] * envelope, spin[1] * envelope]).astype(complex)
    psi = SpinorField(grid=grid, values=values, time=0.0)
    psi.values /= psi.norm()
    return psi


def _mode_phase(mode, tau):
    if isinstance(mode, FloquetMode):
        return mode.phase(tau)
    return np.exp(-1j * mode.energy * np.asarray(tau, dtype=float))


def _mode_frequency(mode) -> float:
    return mode.quasienergy if isinstance(mode, FloquetMode) else mode.energy


def field_of_mode(mode, grid: PolarGrid, tau: float = 0.0) -> SpinorField:
    """Sample one mode as a spinor field at time tau."""
    u, w = mode.radial_profiles(grid.radial)
    phase = _mode_phase(mode, tau)
    values = np.zeros((2, grid.n_r, grid.n_phi), dtype=complex)
    values[0] = phase * np.outer(u, np.exp(1j * mode.m * grid.phi))
    values[1] = phase * np.outer(w, np.exp(1j * (mode.m + 1) * grid.phi))
    return SpinorField(grid=grid, values=values, time=float(tau))


@dataclass
class StateExpansion:
    """Coefficients of a state over a static or driven mode basis.

    Evolution keeps the coefficients fixed; all time dependence lives in the
    modes' scalar phases, which conserves both the norm and the angular
    sector weights exactly.
    """

    basis_kind: str                       # "static" or "floquet"
    modes: tuple
    coefficients: np.ndarray
    captured_norm: float
    grid: PolarGrid
    quadrature: RadialQuadrature
    _profiles: tuple = field(default=None, repr=False)

    def labels(self):
        return [(md.n, md.kappa, md.branch) for md in self.modes]

    def frequencies(self) -> np.ndarray:
        return np.array([_mode_frequency(md) for md in self.modes])

    def profiles_on_grid(self):
        if self._profiles is None:
            self._profiles = tuple(md.radial_profiles(self.grid.radial)
                                   for md in self.modes)
        return self._profiles


def expand_state(psi0: SpinorField, modes, q: RadialQuadrature,
                 norm_floor: float = 0.999) -> StateExpansion:
    """Project a field onto a mode set via the 2D spinor inner product.

    Driven modes are projected at tau = 0, where their phases are all 1.
    The sum of |coefficient|^2 is reported as captured_norm; falling below
    norm_floor (for a unit-norm input) triggers a truncation warning that
    names the weakest directions to extend.
    """
    modes = tuple(modes)
    if not modes:
        raise ContractError("cannot expand over an empty mode set")
    kinds = {isinstance(md, FloquetMode) for md in modes}
    if len(kinds) > 1:
        raise ContractError("mode set mixes static and driven bases")
    basis_kind = "floquet" if kinds.pop() else "static"
    grid = psi0.grid
    if grid.n_r != q.order or np.max(np.abs(grid.radial - q.nodes)) > 1e-12:
        raise ContractError("grid radial nodes do not match the quadrature")

    hat = psi0.azimuthal_modes()
    n_phi = grid.n_phi
    rw = q.weights * q.nodes
    coeffs = np.empty(len(modes), dtype=complex)
    for j, md in enumerate(modes):
        if abs(md.m) > grid.m_max or abs(md.m + 1) > grid.m_max + 1:
            raise ContractError(
                f"mode sector m = {md.m} exceeds the grid band limit {grid.m_max}")
        u, w = md.radial_profiles(q.nodes)
        up_hat = hat[0, :, md.m % n_phi]
        dn_hat = hat[1, :, (md.m + 1) % n_phi]
        coeffs[j] = 2.0 * np.pi * np.sum(rw * (np.conj(u) * up_hat
                                               + np.conj(w) * dn_hat))

    captured = float(np.sum(np.abs(coeffs) ** 2))
    total = psi0.norm() ** 2
    if captured < norm_floor * total:
        sectors = sorted({md.m for md in modes})
        warnings.warn(
            f"expansion captured {captured:.6f} of {total:.6f}; extend the "
            f"energy cutoff or the sector range beyond m in "
            f"[{sectors[0]}, {sectors[-1]}]", TruncationWarning, stacklevel=2)
    return StateExpansion(basis_kind=basis_kind, modes=modes,
                          coefficients=coeffs, captured_norm=captured,
                          grid=grid, quadrature=q)


def evolve(exp: StateExpansion, tau: float) -> SpinorField:
    """Reconstruct the state at time tau on the expansion's grid."""
    grid = exp.grid
    n_phi = grid.n_phi
    spectral = np.zeros((2, grid.n_r, n_phi), dtype=complex)
    for md, beta, (u, w) in zip(exp.modes, exp.coefficients,
                                exp.profiles_on_grid()):
        amp = beta * _mode_phase(md, tau)
        spectral[0, :, md.m % n_phi] += amp * u
        spectral[1, :, (md.m + 1) % n_phi] += amp * w
    values = np.fft.ifft(spectral * n_phi, axis=2)
    return SpinorField(grid=grid, values=values, time=float(tau))


def time_series(exp: StateExpansion, probe, selector: str, taus) -> np.ndarray:
    """Sample one observable at a fixed point over a time grid."""
    r_star, phi_star = probe
    geom = exp.quadrature.geom
    if not (geom.rho < r_star < 1.0):
        raise DomainError(f"probe radius {r_star} outside the open annulus")
    taus = np.asarray(taus, dtype=float)
    a = np.zeros(taus.shape, dtype=complex)
    b = np.zeros(taus.shape, dtype=complex)
    r_arr = np.array([r_star])
    for md, beta in zip(exp.modes, exp.coefficients):
        u, w = md.radial_profiles(r_arr)
        ph = beta * _mode_phase(md, taus)
        a += ph * (u[0] * np.exp(1j * md.m * phi_star))
        b += ph * (w[0] * np.exp(1j * (md.m + 1) * phi_star))
    return _select(selector, a, b)


def sector_weights(psi: SpinorField):
    """Weight of each angular sector kappa = m + 1/2 in a field.

    Returns (m values, weights); the weight sums |up| mass at azimuthal
    order m with |down| mass at order m + 1.
    """
    hat = psi.azimuthal_modes()
    grid = psi.grid
    rw = grid.radial_weights * grid.radial
    mass = 2.0 * np.pi * np.sum(rw[:, None] * np.abs(hat) ** 2, axis=1)
    n = grid.n_phi
    ms = np.arange(-(grid.m_max + 1), grid.m_max + 1)
    weights = np.array([mass[0, m % n] + mass[1, (m + 1) % n] for m in ms])
    return ms, weights


@dataclass(frozen=True)
class FrequencySpectrum:
    """Peak-normalised magnitude spectrum of a real time series."""

    frequencies: np.ndarray     # angular, units of the inverse time unit
    magnitudes: np.ndarray      # max = 1
    window: str
    dt: float
    n_samples: int

    @property
    def bin_width(self) -> float:
        return 2.0 * np.pi / (self.n_samples * self.dt)


def _uniform_dt(taus):
    taus = np.asarray(taus, dtype=float)
    if taus.size < 16:
        raise SamplingError(f"need at least 16 samples, got {taus.size}")
    steps = np.diff(taus)
    dt = steps[0]
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * abs(dt):
        raise SamplingError("time grid must be uniform and increasing")
    return dt


def fourier_spectrum(taus, values, window: str = "hann",
                     subtract_mean: bool = True,
                     expected_max_frequency: float = None) -> FrequencySpectrum:
    """Magnitude spectrum of a sampled series, normalised to its peak.

    Angular frequencies; optional Hann window for leakage control. When the
    caller predicts a maximal frequency, sampling finer than Nyquist for it
    is enforced up front.
    """
    dt = _uniform_dt(taus)
    values = np.asarray(values, dtype=float)
    if values.shape != np.asarray(taus).shape:
        raise ContractError("series and time grid differ in length")
    if expected_max_frequency is not None:
        nyquist = np.pi / dt
        if expected_max_frequency >= 0.95 * nyquist:
            raise SamplingError(
                f"expected content at {expected_max_frequency} exceeds 95% of "
                f"the Nyquist frequency {nyquist:.6g}; decrease the time step")
    if window == "hann":
        taper = np.hanning(values.size)
    elif window == "none":
        taper = np.ones(values.size)
    else:
        raise DomainError(f"unknown window {window!r}")
    work = values - np.mean(values) if subtract_mean else values
    mags = np.abs(np.fft.rfft(work * taper))
    freqs = 2.0 * np.pi * np.fft.rfftfreq(values.size, dt)
    peak = np.max(mags)
    if peak > 0:
        mags = mags / peak
    return FrequencySpectrum(frequencies=freqs, magnitudes=mags,
                             window=window, dt=dt, n_samples=values.size)


def spectral_peaks(spectrum: FrequencySpectrum, rel_threshold: float = 0.01):
    """Local maxima above a fraction of the global peak, as (freq, magnitude)."""
    m = spectrum.magnitudes
    inner = (m[1:-1] >= m[:-2]) & (m[1:-1] >= m[2:]) & (m[1:-1] >= rel_threshold)
    idx = np.nonzero(inner)[0] + 1
    return [(float(spectrum.frequencies[i]), float(m[i])) for i in idx]


def lattice_magnitudes(taus, values, frequencies) -> np.ndarray:
    """Hann-windowed projection magnitudes at exactly the given frequencies.

    Sharper than reading FFT bins when the frequencies are known a priori;
    used to compare measured sideband magnitudes against analytic weights.
    """
    _uniform_dt(taus)
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    taper = np.hanning(values.size)
    work = (values - np.mean(values)) * taper
    out = np.empty(len(frequencies))
    for i, f in enumerate(frequencies):
        out[i] = np.abs(np.sum(work * np.exp(-1j * f * taus)))
    return out


def moving_average(taus, values, window: float) -> np.ndarray:
    """Boxcar average over a time window, length preserved.

    Edges are handled by symmetric reflection padding. The window must hold
    at least two samples and at most half the series.
    """
    dt = _uniform_dt(taus)
    values = np.asarray(values, dtype=float)
    n_w = int(round(window / dt))
    if n_w < 2:
        raise SamplingError(
            f"window {window} shorter than two samples (dt = {dt:.3g})")
    if n_w > values.size // 2:
        raise SamplingError(
            f"window {window} exceeds half the series span")
    n_w |= 1
    half = n_w // 2
    padded = np.pad(values, half, mode="reflect")
    kernel = np.full(n_w, 1.0 / n_w)
    return np.convolve(padded, kernel, mode="valid")


def autocorrelation(exp: StateExpansion, taus) -> np.ndarray:
    """|<state(0)|state(tau)>| straight from expansion coefficients.

    Modes stay mutually orthogonal under evolution, so the overlap is a
    weighted sum of scalar phases; no grid resampling enters.
    """
    taus = np.asarray(taus, dtype=float)
    out = np.zeros(taus.shape, dtype=complex)
    for md, beta in zip(exp.modes, exp.coefficients):
        out += np.abs(beta) ** 2 * _mode_phase(md, taus)
    return np.abs(out)


def revival_estimate(exp: StateExpansion) -> float:
    """Revival time 2 pi / delta omega from the expansion's frequency spread.

    delta omega is twice the weighted RMS width of the frequency
    distribution, so two equal-weight modes with gap delta give exactly
    2 pi / delta. This is an order-of-magnitude estimate, not a period.
    """
    freqs = exp.frequencies()
    weights = np.abs(exp.coefficients) ** 2
    total = np.sum(weights)
    if total == 0:
        raise DomainError("expansion has zero captured norm")
    weights = weights / total
    mean = np.sum(weights * freqs)
    var = np.sum(weights * (freqs - mean) ** 2)
    spread = 2.0 * np.sqrt(var)
    if spread <= 1e-12 * max(1.0, abs(mean)):
        raise DomainError("single-frequency expansion has no revival time")
    return 2.0 * np.pi / spread


def angular_density_profile(psi: SpinorField) -> np.ndarray:
    """Radially integrated density as a function of the grid angles."""
    dens = np.abs(psi.values[0]) ** 2 + np.abs(psi.values[1]) ** 2
    rw = psi.grid.radial_weights * psi.grid.radial
    return np.sum(rw[:, None] * dens, axis=0)


def count_angular_lobes(profile: np.ndarray, rel_height: float = 0.5,
                        smooth: int = 5) -> int:
    """Number of distinct lobes in a periodic angular density profile.

    The profile is lightly smoothed, then local maxima above rel_height of
    the global maximum are counted with periodic wraparound.
    """
    prof = np.asarray(profile, dtype=float)
    if smooth > 1:
        kernel = np.full(smooth, 1.0 / smooth)
        ext = np.concatenate([prof[-smooth:], prof, prof[:smooth]])
        prof = np.convolve(ext, kernel, mode="same")[smooth:-smooth]
    threshold = rel_height * np.max(prof)
    n = prof.size
    count = 0
    for i in range(n):
        left, right = prof[(i - 1) % n], prof[(i + 1) % n]
        if prof[i] >= threshold and prof[i] >= left and prof[i] > right:
            count += 1
    return count
