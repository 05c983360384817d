"""Quadrature, polar grids, unit conversions and the spinor inner product."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringsoi import (DomainError, ContractError, PolarGrid, RingGeometry,
                     UnitSystem, bessel_j, make_quadrature,
                     spinor_inner_product)
from ringsoi.geometry import refine_until_stable


def test_geometry_validation():
    with pytest.raises(DomainError):
        RingGeometry(0.0)
    with pytest.raises(DomainError):
        RingGeometry(1.0)
    with pytest.raises(DomainError):
        RingGeometry(1.2)
    assert RingGeometry(0.6).width == pytest.approx(0.4)


def test_quadrature_polynomial_moments(geom, quad):
    assert quad.integrate(np.ones_like(quad.nodes)) == pytest.approx(
        0.4, abs=1e-14)
    assert quad.integrate(quad.nodes) == pytest.approx(
        (1.0 - 0.36) / 2.0, abs=1e-14)


def test_quadrature_gauss_degree(geom):
    q = make_quadrature(8, geom)
    rng = np.random.default_rng(11)
    coeffs = rng.normal(size=16)       # degree 15 = 2 * order - 1
    vals = np.polyval(coeffs, q.nodes)
    anti = np.polyint(np.poly1d(coeffs))
    exact = anti(1.0) - anti(0.6)
    assert q.integrate(vals) == pytest.approx(exact, abs=1e-13)


def test_quadrature_matches_trapezoid_oracle(geom):
    q = make_quadrature(64, geom)
    vals = bessel_j(4, 12.0 * q.nodes) ** 2
    got = q.integrate_radial(vals)
    r = np.linspace(0.6, 1.0, 1_000_001)
    ref = np.trapezoid(bessel_j(4, 12.0 * r) ** 2 * r, r)
    assert got == pytest.approx(ref, abs=1e-10)


def test_quadrature_rejects_low_order(geom):
    with pytest.raises(DomainError):
        make_quadrature(1, geom)


def test_refine_until_stable(geom):
    def integrand(r):
        return bessel_j(4, 12.0 * r) ** 2

    q = refine_until_stable(geom, integrand)
    value = q.integrate_radial(integrand(q.nodes))
    big = make_quadrature(512, geom)
    ref = big.integrate_radial(integrand(big.nodes))
    assert value == pytest.approx(ref, abs=1e-10)
    assert q.order >= 64


def test_polar_grid_band_limit(geom, quad):
    grid = PolarGrid.build(quad, m_max=8)
    n_phi = grid.phi.size
    assert n_phi & (n_phi - 1) == 0
    assert n_phi > 2 * 8 + 1
    assert grid.phi[0] == 0.0
    assert np.allclose(np.diff(grid.phi), 2.0 * np.pi / n_phi)
    assert np.array_equal(grid.radial, quad.nodes)


def test_inner_product_sector_orthogonality(geom, quad):
    u = np.exp(-quad.nodes)
    f = (u, 0.3 * u)
    assert spinor_inner_product(f, f, quad, 2, 3) == 0.0


def test_inner_product_value_against_direct_sum(geom, quad):
    rng = np.random.default_rng(3)
    f = (rng.normal(size=quad.nodes.size) + 1j * rng.normal(size=quad.nodes.size),
         rng.normal(size=quad.nodes.size) + 1j * rng.normal(size=quad.nodes.size))
    g = (rng.normal(size=quad.nodes.size) + 1j * rng.normal(size=quad.nodes.size),
         rng.normal(size=quad.nodes.size) + 1j * rng.normal(size=quad.nodes.size))
    got = spinor_inner_product(f, g, quad, 5, 5)
    ref = 2.0 * np.pi * np.sum(quad.weights * quad.nodes
                               * (np.conj(f[0]) * g[0] + np.conj(f[1]) * g[1]))
    assert got == pytest.approx(ref, rel=1e-13)


def test_inner_product_conjugate_symmetry_and_positivity(geom, quad):
    rng = np.random.default_rng(5)
    f = (rng.normal(size=quad.nodes.size) + 1j * rng.normal(size=quad.nodes.size),
         rng.normal(size=quad.nodes.size))
    g = (np.cos(quad.nodes), np.sin(3.0 * quad.nodes) + 0.2j)
    fg = spinor_inner_product(f, g, quad, 1, 1)
    gf = spinor_inner_product(g, f, quad, 1, 1)
    assert fg == pytest.approx(np.conj(gf), rel=1e-13)
    assert spinor_inner_product(f, f, quad, 1, 1).real > 0.0


def test_inner_product_rejects_mismatched_sampling(geom, quad):
    short = (np.ones(8), np.ones(8))
    with pytest.raises(ContractError):
        spinor_inner_product(short, short, quad, 0, 0)


def test_unit_system_scales():
    units = UnitSystem(r1_meters=250e-9, effective_mass_ratio=0.023)
    omega = units.omega_scale_rad_per_s
    assert omega > 0
    # energy scale is hbar * Omega; time unit is 1/Omega
    assert units.energy_scale_joule == pytest.approx(
        1.054571817e-34 * omega, rel=1e-12)
    assert units.time_to_seconds(1.0) == pytest.approx(1.0 / omega, rel=1e-12)
    # quadratic radius scaling of the frequency unit
    doubled = UnitSystem(r1_meters=500e-9, effective_mass_ratio=0.023)
    assert doubled.omega_scale_rad_per_s == pytest.approx(omega / 4.0,
                                                          rel=1e-12)


def test_unit_system_soi_ratio_linear():
    units = UnitSystem(r1_meters=250e-9, effective_mass_ratio=0.023)
    a = units.soi_ratio(1e-12)
    assert units.soi_ratio(2e-12) == pytest.approx(2.0 * a, rel=1e-12)
    assert a > 0


@given(st.integers(min_value=2, max_value=40))
@settings(max_examples=20, deadline=None)
def test_quadrature_weight_positivity(order):
    q = make_quadrature(order, RingGeometry(0.6))
    assert np.all(q.weights > 0)
    assert np.all((q.nodes > 0.6) & (q.nodes < 1.0))
