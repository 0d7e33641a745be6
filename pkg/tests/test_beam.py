"""Beam-model unit tests.

Derived oracles are computed independently inside the tests: bisection for
the bending characteristic roots, dense trapezoid quadrature for integrals,
and finite differences for the analytic shape derivatives.
"""

import numpy as np
import pytest

from flexlink.beam import (
    BENDING,
    DeformationState,
    LinkParams,
    bending_wavenumbers,
    elastic_energy,
    eval_deformation,
    gauss_points,
    make_clamped_free_basis,
    mass_properties,
    stiffness_matrices,
)


def bisect_root(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# wavenumbers
# ---------------------------------------------------------------------------


def test_bending_roots_against_independent_bisection():
    f = lambda z: 1.0 + np.cos(z) * np.cosh(z)
    expected = [bisect_root(f, 1.0, 3.0), bisect_root(f, 4.0, 6.0), bisect_root(f, 7.0, 9.0)]
    got = bending_wavenumbers(3, 1.0)
    np.testing.assert_allclose(got, expected, rtol=1e-12)


def test_bending_roots_frozen_values():
    got = bending_wavenumbers(2, 1.0)
    assert got[0] == pytest.approx(1.8751040687119611, abs=1e-12)
    assert got[1] == pytest.approx(4.694091132974175, abs=1e-12)


def test_bending_roots_scale_with_length():
    l = 1.2
    np.testing.assert_allclose(bending_wavenumbers(3, l) * l, bending_wavenumbers(3, 1.0), rtol=1e-12)


# ---------------------------------------------------------------------------
# section properties of the benchmark links
# ---------------------------------------------------------------------------


def test_link1_section_stiffness(link1):
    assert link1.bending_stiffness_z == pytest.approx(4725.0, rel=1e-12)
    assert link1.bending_stiffness_y == pytest.approx(525.0, rel=1e-12)
    assert link1.axial_stiffness == pytest.approx(2.1e11 * 3e-4, rel=1e-12)
    assert link1.rho_a == pytest.approx(2.34, rel=1e-12)


def test_link2_section_stiffness(link2):
    assert link2.bending_stiffness_z == pytest.approx(21875.0, rel=1e-12)
    assert link2.bending_stiffness_y == pytest.approx(875.0, rel=1e-12)
    assert link2.rho_a == pytest.approx(3.9, rel=1e-12)


def test_mass_properties_closed_form(link1, link2):
    m1, s1, ib1 = mass_properties(link1)
    assert m1 == pytest.approx(2.808, rel=1e-12)
    np.testing.assert_allclose(s1, [2.34 * 1.2**2 / 2.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(
        ib1, np.diag([0.0, 2.34 * 1.2**3 / 3.0, 2.34 * 1.2**3 / 3.0]), atol=1e-10
    )
    assert ib1[1, 1] == pytest.approx(1.34784, rel=1e-9)

    m2, s2, ib2 = mass_properties(link2)
    assert m2 == pytest.approx(3.9, rel=1e-12)
    np.testing.assert_allclose(s2, [1.95, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(ib2, np.diag([0.0, 1.3, 1.3]), atol=1e-10)


def test_mass_properties_with_transverse_offset():
    p = LinkParams(length=1.0, density=1000.0, width=0.02, height=0.02, modulus=1e9,
                   offset_y=0.05, offset_z=-0.02)
    m, s, ib = mass_properties(p)
    rho_a = 1000.0 * 4e-4
    assert m == pytest.approx(rho_a * 1.0, rel=1e-12)
    np.testing.assert_allclose(s, [rho_a * 0.5, rho_a * 0.05, rho_a * -0.02], rtol=1e-12)
    # axial-rotation inertia now strictly positive
    assert ib[0, 0] == pytest.approx(rho_a * (0.05**2 + 0.02**2), rel=1e-9)
    w = np.linalg.eigvalsh(ib)
    assert w.min() > 0.0


def test_stiffness_matrices_layout(link2):
    cs = stiffness_matrices(link2)
    np.testing.assert_allclose(cs.iv1, np.diag([link2.axial_stiffness, 0.0, 0.0]), atol=0.0)
    np.testing.assert_allclose(cs.iv2, np.diag([0.0, 21875.0, 875.0]), atol=1e-9)


# ---------------------------------------------------------------------------
# basis properties
# ---------------------------------------------------------------------------


def test_basis_mass_orthonormality(basis2, link2):
    from scipy.integrate import simpson

    xi = np.linspace(link2.span_start, link2.span_end, 4001)
    phi = basis2.shapes(xi)  # same-axis scalar shapes
    gram = np.zeros((basis2.n_modes, basis2.n_modes))
    for j in range(basis2.n_modes):
        for k in range(basis2.n_modes):
            if basis2.axis[j] == basis2.axis[k]:
                gram[j, k] = link2.rho_a * simpson(phi[j] * phi[k], x=xi)
    np.testing.assert_allclose(gram, np.eye(basis2.n_modes), atol=1e-8)


def test_basis_boundary_conditions(basis1, link1):
    a, c = link1.span_start, link1.span_end
    val_a = basis1.shapes(np.array([a]), 0)[:, 0]
    np.testing.assert_allclose(val_a, np.zeros(basis1.n_modes), atol=1e-12)
    d1_a = basis1.shapes(np.array([a]), 1)[:, 0]
    d2_c = basis1.shapes(np.array([c]), 2)[:, 0]
    d3_c = basis1.shapes(np.array([c]), 3)[:, 0]
    for j in range(basis1.n_modes):
        if basis1.kind[j] == BENDING:
            assert abs(d1_a[j]) < 1e-9 * abs(basis1.beta[j])
            scale = basis1.norm[j] * basis1.beta[j] ** 2
            assert abs(d2_c[j]) < 1e-8 * scale
            assert abs(d3_c[j]) < 1e-8 * scale * basis1.beta[j]
        else:
            assert abs(basis1.shapes(np.array([c]), 1)[j, 0]) < 1e-12 * basis1.beta[j]


def test_bending_fourth_derivative_eigenrelation(basis2):
    xi = np.linspace(basis2.params.span_start, basis2.params.span_end, 57)
    phi0 = basis2.shapes(xi, 0)
    phi4 = basis2.shapes(xi, 4)
    for j in range(basis2.n_modes):
        if basis2.kind[j] == BENDING:
            np.testing.assert_allclose(
                phi4[j], basis2.beta[j] ** 4 * phi0[j], rtol=1e-6, atol=1e-8 * basis2.beta[j] ** 4
            )


def test_shape_derivatives_match_finite_differences(basis1):
    xi = np.linspace(0.05, basis1.params.span_end - 0.05, 11)
    h = 1e-6
    for order in range(4):
        lo = basis1.shapes(xi - h, order)
        hi = basis1.shapes(xi + h, order)
        fd = (hi - lo) / (2.0 * h)
        exact = basis1.shapes(xi, order + 1)
        np.testing.assert_allclose(exact, fd, rtol=1e-4, atol=1e-3 * np.abs(exact).max())


def test_rigid_link_empty_basis(link1):
    basis = make_clamped_free_basis(link1, n_bending=0, n_axial=0)
    assert basis.n_modes == 0
    state = eval_deformation(basis, np.zeros(0), np.array([0.3, 0.9]))
    np.testing.assert_allclose(state.r, np.zeros((3, 2)), atol=0.0)
    assert elastic_energy(basis, np.zeros(0), np.zeros(0)) == 0.0


def test_natural_frequencies_closed_form(basis2, link2):
    w2 = basis2.natural_frequencies_sq()
    betas = bending_wavenumbers(3, link2.length)
    # y-displacement modes resisted by EIz
    np.testing.assert_allclose(w2[:3], 21875.0 / 3.9 * betas**4, rtol=1e-12)
    # z-displacement modes resisted by EIy
    np.testing.assert_allclose(w2[3:6], 875.0 / 3.9 * betas**4, rtol=1e-12)
    gamma = np.pi / (2.0 * link2.length)
    assert w2[6] == pytest.approx(link2.axial_stiffness / 3.9 * gamma**2, rel=1e-12)


def test_natural_frequencies_match_quadrature_stiffness_form(basis2, link2):
    """omega_j^2 equals the mass-normalized stiffness quadratic form."""
    xi, w = gauss_points(link2, 64)
    d1 = basis2.displacement_field(xi, 1)
    d2 = basis2.displacement_field(xi, 2)
    cs = stiffness_matrices(link2)
    w2 = basis2.natural_frequencies_sq()
    for j in range(basis2.n_modes):
        form = np.sum(w * np.sum(d2[j] * (cs.iv2 @ d2[j]), axis=0))
        form += np.sum(w * np.sum(d1[j] * (cs.iv1 @ d1[j]), axis=0))
        assert form == pytest.approx(w2[j], rel=1e-8)


# ---------------------------------------------------------------------------
# deformation evaluation and energy
# ---------------------------------------------------------------------------


def test_eval_deformation_single_mode_axis(basis2):
    q = np.zeros(basis2.n_modes)
    q[0] = 0.01  # first y-bending mode
    xi = np.array([0.25, 0.5, 1.0])
    state = eval_deformation(basis2, q, xi)
    assert np.all(state.r[0] == 0.0) and np.all(state.r[2] == 0.0)
    assert state.r[1, 2] != 0.0
    expected_tip = 0.01 * basis2.shapes(np.array([1.0]))[0, 0]
    assert state.r[1, 2] == pytest.approx(expected_tip, rel=1e-12)


def test_eval_deformation_wrong_size_raises(basis2):
    with pytest.raises(ValueError):
        eval_deformation(basis2, np.zeros(basis2.n_modes + 1), np.array([0.5]))


def test_elastic_energy_single_mode_closed_form(basis2):
    w2 = basis2.natural_frequencies_sq()
    for j in (0, 3, 6):
        q = np.zeros(basis2.n_modes)
        qd = np.zeros(basis2.n_modes)
        q[j] = 2e-3
        qd[j] = 0.05
        e = elastic_energy(basis2, q, qd)
        assert e == pytest.approx(0.5 * qd[j] ** 2 + 0.5 * w2[j] * q[j] ** 2, rel=1e-8)


def test_elastic_energy_against_dense_quadrature(basis2, link2, rng):
    q = rng.standard_normal(basis2.n_modes) * 1e-3
    qd = rng.standard_normal(basis2.n_modes) * 0.1
    omega = rng.standard_normal(3)
    e = elastic_energy(basis2, q, qd, omega)

    xi = np.linspace(link2.span_start, link2.span_end, 8001)
    state = eval_deformation(basis2, q, xi)
    rate = eval_deformation(basis2, qd, xi).r + np.cross(omega[:, None], state.r, axis=0)
    cs = stiffness_matrices(link2)
    kinetic = 0.5 * link2.rho_a * np.trapezoid(np.sum(rate**2, axis=0), xi)
    potential = 0.5 * np.trapezoid(
        np.sum(state.d1 * (cs.iv1 @ state.d1), axis=0)
        + np.sum(state.d2 * (cs.iv2 @ state.d2), axis=0),
        xi,
    )
    assert e == pytest.approx(kinetic + potential, rel=1e-7)


def test_elastic_energy_nonnegative_random(basis1, rng):
    for _ in range(25):
        q = rng.standard_normal(basis1.n_modes) * 1e-2
        qd = rng.standard_normal(basis1.n_modes)
        omega = rng.standard_normal(3)
        assert elastic_energy(basis1, q, qd, omega) >= 0.0


def test_static_tip_deflection_converges_to_cantilever_formula(link2):
    """Modal statics q_j = phi_j(c) F / w_j^2 reproduce F l^3 / (3 EI)."""
    basis = make_clamped_free_basis(link2, n_bending=12, n_axial=0)
    force = 10.0  # transverse tip load along y
    tip = basis.shapes(np.array([link2.span_end]))[:, 0]
    w2 = basis.natural_frequencies_sq()
    mask = basis.axis == 1
    deflection = np.sum(tip[mask] ** 2 / w2[mask]) * force
    expected = force * link2.length**3 / (3.0 * 21875.0)
    assert deflection == pytest.approx(expected, rel=5e-5)


def test_deformation_state_is_dataclass_grid(basis1):
    state = eval_deformation(basis1, np.zeros(basis1.n_modes), np.array([0.1, 0.2]))
    assert isinstance(state, DeformationState)
    assert state.r.shape == (3, 2)
    assert state.d4.shape == (3, 2)
