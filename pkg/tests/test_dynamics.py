import math

import numpy as np
import pytest
from scipy.linalg import expm

from reachtime.convex_geometry import box, point
from reachtime.dynamics import (
    EULER, HEUN, LinearSystem, Scheme, Tabulated, TimeGrid, default_direction_count,
    phi_invertibility_check, phi_step, substep, time_reverse, transition,
)

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])
DI = np.array([[0.0, 1.0], [0.0, 0.0]])


def make(A=DI, B=((0.0,), (1.0,)), m=1, **kw):
    return LinearSystem(A, np.array(B), box([-1] * m, [1] * m), point([0, 0]), **kw)


def test_time_reverse_constant():
    sys = make()
    r = time_reverse(sys)
    np.testing.assert_array_equal(r.A_at(0.3), -DI)
    np.testing.assert_array_equal(r.B_at(0.7), -np.array([[0.0], [1.0]]))
    assert r.reversed and not time_reverse(r).reversed


def test_time_reverse_time_dependent():
    sys = LinearSystem(lambda t: t * np.eye(2), np.eye(2), box([-1, -1], [1, 1]), point([0, 0]), 0.0, 1.0)
    r = time_reverse(sys)
    for t in (0.0, 0.25, 1.0):
        np.testing.assert_allclose(r.A_at(t), -(1 - t) * np.eye(2))
    assert time_reverse(r).A is sys.A


def test_system_validation():
    with pytest.raises(ValueError):
        make(t0=1.0, tf=1.0)
    with pytest.raises(ValueError):
        LinearSystem(np.eye(2), np.eye(2), box([-1], [1]), point([0, 0]))
    with pytest.raises(ValueError):
        LinearSystem(np.ones((2, 3)), np.eye(2), box([-1, -1], [1, 1]), point([0, 0]))


def test_tabulated_nearest_lookup():
    T = Tabulated([0.0, 1.0, 2.0], [np.eye(1) * k for k in range(3)])
    assert T(0.4)[0, 0] == 0 and T(0.6)[0, 0] == 1 and T(5)[0, 0] == 2


def test_phi_step_examples():
    for s in ("euler", "heun"):
        np.testing.assert_array_equal(phi_step(s, np.zeros((2, 2)), 0.0, 0.1), np.eye(2))
    np.testing.assert_allclose(phi_step("euler", DI, 0.0, 0.1), [[1, 0.1], [0, 1]])
    H = phi_step("heun", ROT, 0.0, 0.1)
    np.testing.assert_allclose(H, np.eye(2) + 0.1 * ROT + 0.005 * ROT @ ROT, atol=1e-15)
    assert np.abs(H - expm(0.1 * ROT)).max() <= 5e-4


@pytest.mark.parametrize("scheme", [EULER, HEUN])
def test_local_order_against_matrix_exponential(scheme):
    hs = [0.1, 0.05, 0.025]
    err = [np.abs(phi_step(scheme, ROT, 0.0, h) - expm(h * ROT)).max() for h in hs]
    rates = [math.log2(a / b) for a, b in zip(err, err[1:])]
    assert min(rates) >= scheme.order + 1 - 0.2


def test_invertibility_check():
    assert phi_invertibility_check(np.eye(3))
    assert phi_invertibility_check(np.eye(2) + 0.1 * ROT)
    assert not phi_invertibility_check(np.zeros((2, 2)))
    assert not phi_invertibility_check(np.eye(2) - np.eye(2) * 1.0)


def test_semigroup_holds_by_composition():
    sys = time_reverse(make())
    grid = TimeGrid(0.0, 1.0, 4, 5)
    for i in range(3):
        two = transition(HEUN, sys, grid, i, i + 2)
        assert np.array_equal(two, transition(HEUN, sys, grid, i + 1, i + 2) @ transition(HEUN, sys, grid, i, i + 1))
    np.testing.assert_allclose(transition(HEUN, sys, grid, 0, 4), expm(-DI), atol=1e-12)


def test_time_grid():
    g = TimeGrid(0.0, 1.0, 4, 5)
    assert g.dt == 0.25 and g.h == 0.05 and g.n_fine == 20
    assert g.fine_time(20) == 1.0 and g.level_time(2) == 0.5
    assert abs(g.h * g.N * g.K - 1.0) <= 1e-15
    with pytest.raises(ValueError):
        TimeGrid(0, 1, 0, 3)


def test_scheme_lookup():
    assert Scheme.get("combination").n_terms == 2
    assert Scheme.get("heun").order == 2 and Scheme.get("euler").order == 1
    with pytest.raises(ValueError):
        Scheme.get("rk4")


def test_substep_euler_is_riemann_combination():
    sys = time_reverse(make())
    st = substep("euler", sys, 0.0, 0.1)
    np.testing.assert_allclose(st.G[0], 0.1 * st.P @ sys.B_at(0.0))


def test_substep_heun_weight():
    sys = time_reverse(make())
    st = substep("heun", sys, 0.0, 0.1)
    Ab, Bb = sys.A_at(0.1), sys.B_at(0.0)
    np.testing.assert_allclose(st.G[0], 0.05 * ((np.eye(2) + 0.1 * Ab) @ Bb + sys.B_at(0.1)))


def test_default_direction_count():
    assert default_direction_count(0.1, 1) == 32
    assert default_direction_count(0.01, 2) == math.ceil(math.pi / 1e-4)
    assert default_direction_count(1.0, 1) == 16
