import numpy as np
import pytest

from reconlab import mollifier as mm
from reconlab.errors import ScaleTooFineError
from reconlab.grid import DyadicGrid, dilate_translate, quadrature

G12 = DyadicGrid(12)


@pytest.mark.parametrize("kind", ["exp", "poly"])
def test_base_bump_oracles(kind):
    phi0 = mm.base_bump(G12, kind)
    assert abs(quadrature(phi0) - 1.0) <= 1e-12
    v = phi0.values
    assert np.array_equal(v[1:], v[1:][::-1])  # even about y = 0 on the torus
    assert abs(phi0.moment(1)) <= 1e-12


def test_base_bump_rejects_coarse_grid_and_unknown_kind():
    with pytest.raises(ValueError):
        mm.base_bump(DyadicGrid(6))
    with pytest.raises(ValueError):
        mm.base_bump(G12, "gauss")


@pytest.mark.parametrize("r,expected", [(0.5, 0), (1.0, 0), (1.5, 1), (2.0, 1), (2.5, 2), (4.2, 4)])
def test_r_tilde(r, expected):
    assert mm.r_tilde_for(r) == expected


@pytest.mark.parametrize("r_tilde", [0, 1])
def test_no_cancellation_needed_for_even_bump(r_tilde):
    phi0 = mm.base_bump(G12)
    phi, coef = mm.moment_cancel(phi0, r_tilde)
    np.testing.assert_array_equal(coef, [1.0])
    np.testing.assert_allclose(phi.values, phi0.values, rtol=0, atol=0)


def test_second_order_cancellation_coefficients():
    phi0 = mm.base_bump(G12)
    phi, coef = mm.moment_cancel(phi0, 2)
    np.testing.assert_allclose(coef, [-1.0 / 3.0, 4.0 / 3.0], rtol=1e-12)
    assert abs(phi.moment(2)) <= 1e-8
    # hand-built combination agrees with the solver
    manual = -1.0 / 3.0 * phi0.values + 4.0 / 3.0 * dilate_translate(phi0, 1).values
    np.testing.assert_allclose(phi.values, manual, atol=1e-12)


@pytest.mark.parametrize("r_tilde", [3, 4])
def test_higher_order_moments_vanish(r_tilde):
    phi, _ = mm.moment_cancel(mm.base_bump(G12, "poly"), r_tilde)
    for a in range(1, r_tilde + 1):
        assert abs(phi.moment(a)) <= 1e-8
    assert abs(quadrature(phi) - 1.0) <= 1e-10


def test_moment_cancel_range():
    with pytest.raises(ValueError):
        mm.moment_cancel(mm.base_bump(G12), 5)


@pytest.mark.parametrize("r", [0.5, 1.5, 2.5, 3.5])
def test_rho_has_unit_mass(r):
    stack = mm.build_stack(G12, r)
    assert abs(quadrature(stack.rho) - 1.0) <= 1e-10
    assert abs(quadrature(stack.rho_at(3)) - 1.0) <= 1e-10


def test_small_r_uses_plain_bump():
    stack = mm.build_stack(G12, 0.5)
    assert stack.r_tilde == 0
    np.testing.assert_array_equal(stack.phi.values, stack.base.values)


def test_psi_moments_vanish_for_r_tilde_2():
    stack = mm.build_stack(G12, 2.5)
    m2_fine = dilate_translate(stack.phi, 2).moment(2)
    m2 = stack.phi.moment(2)
    assert abs(m2) <= 1e-8 and abs(m2_fine) <= 1e-8
    assert abs(stack.psi.moment(2)) <= 1e-8
    assert abs(stack.psi.moment(0)) <= 1e-12


def test_moment_table_rows():
    stack = mm.build_stack(G12, 2.5)
    rows = stack.moment_table()
    assert [r[0] for r in rows] == [0, 1, 2, 3, 4]
    alpha, m_phi, m_rho, m_psi = rows[0]
    assert m_phi == pytest.approx(1.0, abs=1e-10) and m_rho == pytest.approx(1.0, abs=1e-10)
    for row in rows[1:3]:
        assert max(abs(v) for v in row[1:]) <= 1e-8


def test_phi_levels_have_unit_mass():
    stack = mm.build_stack(DyadicGrid(14), 1.5)
    for n in range(0, 11):
        assert abs(quadrature(stack.phi_at(n)) - 1.0) <= 1e-13


def test_rho_support_radius_is_three_quarters():
    stack = mm.build_stack(G12, 1.5)
    assert stack.rho.support_radius == 0.75
    assert stack.rho_at(2).support_radius == pytest.approx(0.75 / 4)
    offs, _ = stack.rho_at(2).stencil()
    assert np.abs(offs).max() * G12.spacing <= 0.75 / 4


def test_telescope_identity_at_level_zero():
    stack = mm.build_stack(DyadicGrid(14), 2.5)
    assert mm.check_telescope_identity(stack, 0) <= 1e-8


def test_telescope_negative_control():
    stack = mm.build_stack(G12, 1.5)
    control = mm.check_telescope_identity(stack, 0, zero_psi=True)
    diff = stack.rho_at(1).values - stack.rho_at(0).values
    assert control == pytest.approx(np.abs(diff).max() / stack.rho_at(1).sup_norm(), rel=1e-10)
    assert control > 0.1


def test_telescope_level_budget():
    with pytest.raises(ScaleTooFineError):
        mm.check_telescope_identity(mm.build_stack(G12, 1.5), 7)
