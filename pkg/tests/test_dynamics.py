"""Packet preparation, expansion, evolution, and the signal-analysis helpers."""

import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ringsoi import (Drive, PolarGrid, build_floquet_mode, make_quadrature,
                     scan_floquet_spectrum, scan_spectrum)
from ringsoi.dynamics import (ClippedPacketWarning, FrequencySpectrum,
                              SpinorField, StateExpansion, TruncationWarning,
                              angular_density_profile, autocorrelation,
                              count_angular_lobes, evolve, expand_state,
                              field_of_mode, fourier_spectrum, gaussian_packet,
                              lattice_magnitudes, moving_average, observables,
                              revival_estimate, sector_weights, spectral_peaks,
                              time_series)
from ringsoi.errors import ContractError, DomainError, SamplingError


@pytest.fixture(scope="module")
def grid(quad):
    return PolarGrid.build(quad, m_max=8)


@pytest.fixture(scope="module")
def sector0(geom, quad):
    return scan_spectrum(0, 300.0, 1.0, geom, quad)


@pytest.fixture(scope="module")
def sector1(geom, quad):
    return scan_spectrum(1, 300.0, 1.0, geom, quad)


def quiet_packet(center, widths, spin, geom, grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClippedPacketWarning)
        return gaussian_packet(center, widths, spin, geom, grid)


# ---------------------------------------------------------------- packets

def test_packet_normalised_with_constant_spin(geom, grid):
    psi = quiet_packet((0.8, 1.0), (0.1, 0.4), (0.6, 0.8), geom, grid)
    assert abs(psi.norm() - 1.0) < 1e-12
    # constant spinor: the component ratio matches the spin everywhere
    ratio = psi.values[1] / psi.values[0]
    assert np.max(np.abs(ratio - 0.8 / 0.6)) < 1e-12


def test_packet_vanishes_at_both_walls(geom, quad):
    # append zero-weight wall nodes so the walls are actual samples
    radial = np.concatenate([quad.nodes, [geom.rho, 1.0]])
    weights = np.concatenate([quad.weights, [0.0, 0.0]])
    grid = PolarGrid(geom=geom, radial=radial, radial_weights=weights,
                     phi=np.arange(8) * (np.pi / 4.0), m_max=2)
    psi = quiet_packet((0.8, 0.0), (0.2, 0.5), (1.0, 1.0), geom, grid)
    walls = psi.values[:, -2:, :]
    assert np.max(np.abs(walls)) < 1e-15


def test_packet_clipping_warning(geom, grid):
    with pytest.warns(ClippedPacketWarning):
        gaussian_packet((0.8, 0.0), (0.35, 0.5), (1.0, 0.0), geom, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gaussian_packet((0.8, 0.0), (0.03, 0.5), (1.0, 0.0), geom, grid)


def test_packet_rejects_bad_parameters(geom, grid):
    with pytest.raises(DomainError):
        gaussian_packet((0.5, 0.0), (0.1, 0.3), (1.0, 0.0), geom, grid)
    with pytest.raises(DomainError):
        gaussian_packet((1.0, 0.0), (0.1, 0.3), (1.0, 0.0), geom, grid)
    with pytest.raises(DomainError):
        gaussian_packet((0.8, 0.0), (0.0, 0.3), (1.0, 0.0), geom, grid)
    with pytest.raises(DomainError):
        gaussian_packet((0.8, 0.0), (0.1, -0.3), (1.0, 0.0), geom, grid)
    with pytest.raises(DomainError):
        gaussian_packet((0.8, 0.0), (0.1, 0.3), (0.0, 0.0), geom, grid)
    with pytest.raises(DomainError):
        gaussian_packet((0.8, 0.0), (0.1, 0.3), (1.0, 0.0, 0.0), geom, grid)


def test_wide_packet_concentrates_on_spin_weighted_sector(geom, grid):
    # nearly angle-independent packet: sector weights pile up around the
    # mean set by the spin composition (up -> m = 0, down -> m = -1)
    for spin, m_star in (((1.0, 0.0), 0), ((0.0, 1.0), -1)):
        psi = quiet_packet((0.8, 0.0), (0.1, 2.0), spin, geom, grid)
        ms, wts = sector_weights(psi)
        top = ms[np.argmax(wts)]
        assert top == m_star
        window = np.abs(ms - m_star) <= 2
        assert np.sum(wts[window]) / np.sum(wts) > 0.999
        mean = np.sum(ms * wts) / np.sum(wts)
        assert abs(mean - m_star) < 0.01


# ------------------------------------------------------------- expansions

def test_expand_recovers_single_mode(grid, quad, sector0):
    md = sector0[0]
    psi = field_of_mode(md, grid)
    exp = expand_state(psi, sector0, quad)
    beta = exp.coefficients
    assert abs(beta[0] - 1.0) < 1e-10
    assert np.max(np.abs(beta[1:])) < 1e-10
    assert exp.captured_norm <= 1.0 + 1e-9
    assert abs(exp.captured_norm - 1.0) < 1e-9


def test_expand_is_linear(grid, quad, sector0):
    a, b = sector0[0], sector0[1]
    values = (field_of_mode(a, grid).values + field_of_mode(b, grid).values) \
        / np.sqrt(2.0)
    psi = SpinorField(grid=grid, values=values)
    exp = expand_state(psi, [a, b], quad)
    assert np.max(np.abs(exp.coefficients - 1.0 / np.sqrt(2.0))) < 1e-10


def test_expand_narrow_packet_capture(geom, grid, quad):
    # moderately deep basis pins > 99.9% of a sigma_r = 0.05 packet
    psi = quiet_packet((0.8, 0.0), (0.05, 0.3), (1.0, 0.0), geom, grid)
    modes = []
    for m in range(-7, 8):
        modes += scan_spectrum(m, 2000.0, 1.0, geom, quad)
    exp = expand_state(psi, modes, quad)
    assert exp.captured_norm > 0.999


def test_expand_warns_on_truncation(geom, grid, quad, sector0, sector1):
    psi = quiet_packet((0.8, 0.0), (0.35, 0.5), (1.0, 0.0), geom, grid)
    with pytest.warns(TruncationWarning):
        expand_state(psi, sector0 + sector1, quad)


def test_expand_contract_violations(geom, grid, quad, sector0):
    psi = field_of_mode(sector0[0], grid)
    with pytest.raises(ContractError):
        expand_state(psi, [], quad)
    with pytest.raises(ContractError):
        expand_state(psi, sector0, make_quadrature(64, geom))
    roots = scan_floquet_spectrum(0, 10.0, geom)
    driven = build_floquet_mode(roots[0].k, -1, 0, Drive(1.0, nu=1.0), geom, quad)
    with pytest.raises(ContractError):
        expand_state(psi, [sector0[0], driven], quad)
    small = PolarGrid.build(quad, m_max=2)
    mode_m5 = scan_spectrum(5, 120.0, 1.0, geom, quad)[0]
    with pytest.raises(ContractError):
        expand_state(field_of_mode(sector0[0], small), [mode_m5], quad)


# -------------------------------------------------------------- evolution

def test_evolve_reconstructs_initial_state(grid, quad, sector0):
    a, b = sector0[0], sector0[1]
    values = (field_of_mode(a, grid).values + field_of_mode(b, grid).values) \
        / np.sqrt(2.0)
    psi = SpinorField(grid=grid, values=values)
    back = evolve(expand_state(psi, [a, b], quad), 0.0)
    assert np.max(np.abs(back.values - psi.values)) < 1e-10


def test_single_mode_density_is_stationary(grid, quad, sector0):
    exp = expand_state(field_of_mode(sector0[0], grid), sector0[:1], quad)
    d0 = observables(evolve(exp, 0.0)).density
    d1 = observables(evolve(exp, 0.9)).density
    assert np.max(np.abs(d1 - d0)) < 1e-12


def test_evolution_conserves_norm_and_sector(geom, grid, quad, sector0):
    values = sum(c * field_of_mode(md, grid).values
                 for c, md in zip((0.8, 0.6), sector0[:2]))
    exp = expand_state(SpinorField(grid=grid, values=values), sector0, quad)
    for tau in np.linspace(0.0, 5.0, 7):
        psi = evolve(exp, tau)
        assert abs(psi.norm() ** 2 - exp.captured_norm) < 1e-9
        ms, wts = sector_weights(psi)
        leak = np.sum(wts[ms != 0])
        assert leak < 1e-12


def test_time_series_matches_evolved_field(grid, quad, sector0):
    values = sum(c * field_of_mode(md, grid).values
                 for c, md in zip((0.8, 0.6j), sector0[:2]))
    exp = expand_state(SpinorField(grid=grid, values=values), sector0[:2], quad)
    i, j = 50, 3
    probe = (grid.radial[i], grid.phi[j])
    taus = np.array([0.0, 0.37, 1.9])
    for selector in ("density", "spin_x", "spin_y", "spin_z"):
        series = time_series(exp, probe, selector, taus)
        for t_idx, tau in enumerate(taus):
            obs = observables(evolve(exp, tau))
            ref = getattr(obs, selector if selector != "density" else "density")
            assert abs(series[t_idx] - ref[i, j]) < 1e-12


def test_two_mode_series_is_single_beat(grid, quad, sector0):
    a, b = sector0[0], sector0[1]
    delta = abs(a.energy - b.energy)
    values = (field_of_mode(a, grid).values + field_of_mode(b, grid).values) \
        / np.sqrt(2.0)
    exp = expand_state(SpinorField(grid=grid, values=values), [a, b], quad)
    taus = np.linspace(0.0, 3.0 * 2.0 * np.pi / delta, 200)
    series = time_series(exp, (0.75, 0.0), "density", taus)
    design = np.stack([np.ones_like(taus), np.cos(delta * taus),
                       np.sin(delta * taus)], axis=1)
    fit, *_ = np.linalg.lstsq(design, series, rcond=None)
    assert np.max(np.abs(series - design @ fit)) < 1e-10 * np.max(np.abs(series))

    solo = time_series(expand_state(field_of_mode(a, grid), [a], quad),
                       (0.75, 0.0), "density", taus)
    assert np.ptp(solo) < 1e-13


def test_time_series_rejects_bad_probe_and_selector(grid, quad, sector0):
    exp = expand_state(field_of_mode(sector0[0], grid), sector0[:1], quad)
    with pytest.raises(DomainError):
        time_series(exp, (0.5, 0.0), "density", np.linspace(0, 1, 4))
    with pytest.raises(DomainError):
        time_series(exp, (0.8, 0.0), "helicity", np.linspace(0, 1, 4))


# ------------------------------------------------------------ observables

def test_observable_reference_spinors(geom, grid):
    psi = quiet_packet((0.8, 0.0), (0.15, 0.5), (1.0, 1.0), geom, grid)
    obs = observables(psi)
    assert np.max(np.abs(obs.spin_x - obs.density / 2.0)) < 1e-14
    assert np.max(np.abs(obs.spin_y)) < 1e-14
    assert np.max(np.abs(obs.spin_z)) < 1e-14

    psi = quiet_packet((0.8, 0.0), (0.15, 0.5), (1.0, 0.0), geom, grid)
    obs = observables(psi)
    assert np.max(np.abs(obs.spin_z - obs.density / 2.0)) < 1e-14
    assert np.max(np.abs(obs.spin_x)) < 1e-14
    assert np.max(np.abs(obs.spin_y)) < 1e-14


finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


@given(finite, finite, finite, finite)
def test_pure_spinor_is_fully_polarised(ar, ai, br, bi):
    a, b = complex(ar, ai), complex(br, bi)
    dens = abs(a) ** 2 + abs(b) ** 2
    if dens < 1e-6:
        return
    grid = PolarGrid(geom=None, radial=np.array([0.8]),
                     radial_weights=np.array([1.0]),
                     phi=np.array([0.0]), m_max=0)
    psi = SpinorField(grid=grid, values=np.array([[[a]], [[b]]]))
    obs = observables(psi)
    mag = np.sqrt(obs.spin_x ** 2 + obs.spin_y ** 2 + obs.spin_z ** 2)
    assert abs(mag[0, 0] - dens / 2.0) < 1e-12 * dens


# -------------------------------------------------------- signal analysis

def test_moving_average_removes_integer_periods():
    taus = np.arange(512) * 0.1
    series = np.cos(2.0 * np.pi * taus / 2.5)
    out = moving_average(taus, series, 2.5)
    assert np.max(np.abs(out[13:-13])) < 1e-12

    const = moving_average(taus, np.full(taus.size, 3.7), 2.5)
    assert np.max(np.abs(const - 3.7)) < 1e-12


def test_moving_average_window_limits():
    taus = np.arange(64) * 0.1
    series = np.sin(taus)
    with pytest.raises(SamplingError):
        moving_average(taus, series, 0.1)
    with pytest.raises(SamplingError):
        moving_average(taus, series, 5.0)


def test_fourier_spectrum_single_tone():
    n, dt = 256, 0.05
    taus = np.arange(n) * dt
    omega0 = 40 * 2.0 * np.pi / (n * dt)
    spec = fourier_spectrum(taus, np.sin(omega0 * taus),
                            expected_max_frequency=omega0)
    assert np.max(spec.magnitudes) == 1.0
    peaks = spectral_peaks(spec)
    assert len(peaks) == 1
    assert abs(peaks[0][0] - omega0) < 1e-12 * omega0
    assert abs(spec.bin_width - 2.0 * np.pi / (n * dt)) < 1e-15


def test_fourier_spectrum_rejects_bad_sampling():
    taus = np.arange(64) * 0.05
    series = np.sin(taus)
    bent = taus.copy()
    bent[10] += 0.01
    with pytest.raises(SamplingError):
        fourier_spectrum(bent, series)
    with pytest.raises(SamplingError):
        fourier_spectrum(taus[:8], series[:8])
    with pytest.raises(SamplingError):
        fourier_spectrum(taus, series, expected_max_frequency=100.0)
    with pytest.raises(DomainError):
        fourier_spectrum(taus, series, window="flattop")
    with pytest.raises(ContractError):
        fourier_spectrum(taus, series[:-1])


def test_spectral_peaks_threshold():
    mags = np.zeros(32)
    mags[5], mags[11], mags[20] = 1.0, 0.4, 0.004
    spec = FrequencySpectrum(frequencies=np.arange(32.0), magnitudes=mags,
                             window="none", dt=1.0, n_samples=62)
    got = spectral_peaks(spec)
    assert [f for f, _ in got] == [5.0, 11.0]
    assert len(spectral_peaks(spec, rel_threshold=1e-3)) == 3


def test_lattice_magnitudes_two_tone_ratio():
    n, dt = 512, 0.1
    taus = np.arange(n) * dt
    base = 2.0 * np.pi / (n * dt)
    w1, w2 = 30 * base, 60 * base
    series = 1.0 * np.cos(w1 * taus + 0.7) + 0.4 * np.cos(w2 * taus)
    m1, m2 = lattice_magnitudes(taus, series, [w1, w2])
    # symmetric Hann leaks a little between exact bins; scales like 1/n^2
    assert abs(m1 / m2 - 2.5) < 1e-4


# -------------------------------------------------- revival diagnostics

def test_autocorrelation_closed_form(grid, quad, sector0):
    a, b = sector0[0], sector0[1]
    values = 0.8 * field_of_mode(a, grid).values \
        + 0.6 * field_of_mode(b, grid).values
    exp = expand_state(SpinorField(grid=grid, values=values), [a, b], quad)
    taus = np.linspace(0.0, 4.0, 37)
    got = autocorrelation(exp, taus)
    assert abs(got[0] - exp.captured_norm) < 1e-12
    w1, w2 = np.abs(exp.coefficients) ** 2
    delta = a.energy - b.energy
    ref = np.sqrt(w1 ** 2 + w2 ** 2 + 2.0 * w1 * w2 * np.cos(delta * taus))
    assert np.max(np.abs(got - ref)) < 1e-12

    solo = autocorrelation(expand_state(field_of_mode(a, grid), [a], quad), taus)
    assert np.ptp(solo) < 1e-13


def test_revival_estimate_two_point_distribution(grid, quad, sector0):
    a, b = sector0[0], sector0[1]
    values = (field_of_mode(a, grid).values + field_of_mode(b, grid).values) \
        / np.sqrt(2.0)
    exp = expand_state(SpinorField(grid=grid, values=values), [a, b], quad)
    delta = abs(a.energy - b.energy)
    assert abs(revival_estimate(exp) - 2.0 * np.pi / delta) < 1e-12 * (2 * np.pi / delta)

    solo = expand_state(field_of_mode(a, grid), [a], quad)
    with pytest.raises(DomainError):
        revival_estimate(solo)


def test_angular_profile_and_lobe_count(grid):
    r = grid.radial[:, None]
    bump = np.exp(-(r - 0.8) ** 2 / 0.01)
    for lobes, shape in ((1, 1.0 + np.cos(grid.phi - 1.0)),
                         (2, 1.0 + np.cos(2.0 * grid.phi)),
                         (4, 1.0 + np.cos(4.0 * grid.phi))):
        values = np.zeros((2, grid.n_r, grid.n_phi), dtype=complex)
        values[0] = bump * np.sqrt(shape)[None, :]
        psi = SpinorField(grid=grid, values=values)
        profile = angular_density_profile(psi)
        # profile factorises: angle dependence matches the seeded shape
        ref = shape * (profile.max() / shape.max())
        assert np.max(np.abs(profile - ref)) < 1e-12 * profile.max()
        assert count_angular_lobes(profile) == lobes


# ---------------------------------------------------------- driven states

def rk4_eigenphase(k, branch, drive, taus):
    """Diagonal Floquet phase from step integration of the reduced problem."""
    omega = k * k + k * (drive.amp + abs(drive.offset))
    n_steps = max(20_000, int(np.ceil(omega * max(taus) / 8e-3)))
    h = max(taus) / n_steps
    v0 = np.array([branch, 1.0], dtype=complex) / np.sqrt(2.0)

    def rhs(t, v):
        coupling = drive.amp * np.cos(drive.nu * t) + drive.offset
        return -1j * np.array([k * k * v[0] + k * coupling * v[1],
                               k * coupling * v[0] + k * k * v[1]])

    record = {}
    targets = sorted(float(t) for t in taus)
    v, t = v0.copy(), 0.0
    for t_target in targets:
        while t < t_target - 1e-12:
            dt = min(h, t_target - t)
            k1 = rhs(t, v)
            k2 = rhs(t + dt / 2, v + dt / 2 * k1)
            k3 = rhs(t + dt / 2, v + dt / 2 * k2)
            k4 = rhs(t + dt, v + dt * k3)
            v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        record[t_target] = np.vdot(v0, v)
    return record


def test_driven_two_mode_field_matches_oracle(geom, grid, quad):
    drive = Drive(1.0, nu=1.0)
    roots = scan_floquet_spectrum(0, 10.0, geom)
    modes = [build_floquet_mode(roots[0].k, -1, 0, drive, geom, quad),
             build_floquet_mode(roots[1].k, +1, 0, drive, geom, quad)]
    fields0 = [field_of_mode(md, grid).values for md in modes]
    psi0 = SpinorField(grid=grid, values=(fields0[0] + fields0[1]) / np.sqrt(2.0))
    exp = expand_state(psi0, modes, quad)
    assert exp.basis_kind == "floquet"
    assert np.max(np.abs(exp.coefficients - 1.0 / np.sqrt(2.0))) < 1e-10

    taus = np.linspace(0.0, drive.period, 9)[1:]
    phases = [rk4_eigenphase(md.k, md.branch, drive, taus) for md in modes]
    for tau in taus:
        got = evolve(exp, tau)
        ref = sum(beta * ph[float(tau)] * f0
                  for beta, ph, f0 in zip(exp.coefficients, phases, fields0))
        assert np.max(np.abs(got.values - ref)) < 1e-7
        assert abs(got.norm() ** 2 - exp.captured_norm) < 1e-9
        ms, wts = sector_weights(got)
        assert np.sum(wts[ms != 0]) < 1e-12
