import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from reachtime import adjoint, catalog, reach
from reachtime.adjoint import ControlSignal
from reachtime.convex_geometry import GeometryError, box, convex_hull_normalize, point, support_function
from reachtime.dynamics import LinearSystem, TimeGrid, phi_step
from reachtime.errors import UnsupportedError

DI = catalog.get("double_integrator").system
ROT = catalog.get("rotation").system
SI = catalog.get("scalar_integrator").system
A_DI = np.array([[0.0, 1.0], [0.0, 0.0]])


@pytest.fixture(scope="module")
def di_run():
    return reach.run(DI, "heun", 4, 10, 128, mode="global")


def test_square_corner_bisector():
    n = adjoint.outer_normal_at_vertex(box([-1, -1], [1, 1]), [1, 1])
    np.testing.assert_allclose(n, [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-15)


def test_hexagon_bisector_lies_in_normal_cone():
    ang = np.arange(6) * np.pi / 3
    H = convex_hull_normalize(np.column_stack([np.cos(ang), np.sin(ang)]), 2)
    for v in H.vertices:
        z = adjoint.outer_normal_at_vertex(H, v)
        assert np.max((H.vertices - v) @ z) <= 1e-9
        np.testing.assert_allclose(z, v / np.linalg.norm(v), atol=1e-12)


def test_normal_at_non_vertex_or_segment_fails():
    with pytest.raises(GeometryError):
        adjoint.outer_normal_at_vertex(box([-1, -1], [1, 1]), [1, 0])
    with pytest.raises(GeometryError):
        adjoint.outer_normal_at_vertex(convex_hull_normalize([[-1, 0], [1, 0]], 2), [1, 0])


def test_adjoint_sequence_examples():
    etas = adjoint.adjoint_sequence([0.3, -0.4], [np.eye(2)] * 5)
    assert np.all(etas == [0.3, -0.4])
    P = phi_step("euler", A_DI, 0.0, 0.1)
    np.testing.assert_allclose(adjoint.adjoint_sequence([0, 1], [P])[0], [0, 1])
    np.testing.assert_allclose(adjoint.adjoint_sequence([1, 0], [P])[0], [1, 0.1])
    with pytest.raises(GeometryError):
        adjoint.adjoint_sequence([0, 0], [P])


@pytest.mark.parametrize("scheme,order", [("euler", 1), ("heun", 2)])
def test_adjoint_sequence_matches_matrix_exponential(scheme, order):
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    zeta = np.array([0.6, 0.8])
    errs = []
    for n in (20, 40):
        etas = adjoint.adjoint_sequence(zeta, [phi_step(scheme, A, 0, 1 / n)] * n)
        assert np.all(np.linalg.norm(etas, axis=1) > 0)
        errs.append(np.abs(etas[0] - zeta @ expm(A)).max())
    assert errs[0] <= 0.1
    assert math.log2(errs[0] / errs[1]) >= order - 0.2


def test_bang_bang_examples():
    B = np.eye(2)
    assert adjoint.bang_bang_control([0.5, -2], B).tolist() == [1, -1]
    assert adjoint.bang_bang_control([0, 3], B).tolist() == [0, 1]
    assert adjoint.bang_bang_control([0, 0], B).tolist() == [0, 0]


def test_maximum_condition_examples():
    U = box([-1, -1], [1, 1])
    S = np.random.default_rng(0).standard_normal((20, 2))
    C = np.vstack([adjoint.bang_bang_control(s, np.eye(2)) for s in S])
    assert adjoint.maximum_condition_check(S, C, U)
    C[3, 1] = -C[3, 1]
    assert not adjoint.maximum_condition_check(S, C, U)
    assert adjoint.maximum_condition_check(np.zeros((5, 2)), np.random.default_rng(1).uniform(-1, 1, (5, 2)), U)


def test_replay_examples():
    sys = LinearSystem(np.zeros((2, 2)), np.eye(2), box([-1, -1], [1, 1]), point([0, 0]), 0, 1)
    y = adjoint.replay_trajectory(sys, "euler", TimeGrid(0, 1, 2, 5), np.zeros((10, 2)), [0.3, 0.2])
    assert np.all(y == [0.3, 0.2])
    y = adjoint.replay_trajectory(SI, "euler", TimeGrid(0, 1, 1, 10), np.ones((10, 1)), [0.0])
    assert y[-1, 0] == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        adjoint.replay_trajectory(SI, "combination", TimeGrid(0, 1, 1, 10), np.ones((10, 1)), [0.0])


def test_normality_examples():
    assert adjoint.normality_check(A_DI, [[0.0], [1.0]])
    assert not adjoint.normality_check(np.zeros((2, 2)), [[1.0], [0.0]])
    # with A = I every Krylov matrix is [Bω, Bω]: rank 1, so not normal
    assert not adjoint.normality_check(np.eye(2), np.eye(2))
    assert adjoint.normality_check(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2))
    with pytest.raises(UnsupportedError):
        adjoint.normality_check(lambda t: A_DI, [[0.0], [1.0]])


def test_l1_distance_examples():
    u = ControlSignal([0.0, 0.5, 1.0], [[1.0], [-1.0]])
    assert adjoint.l1_control_distance(u, u) == 0.0
    assert adjoint.l1_control_distance(ControlSignal([0, 1], [[1.0]]), ControlSignal([0, 1], [[-1.0]])) == 2.0
    v = ControlSignal([0.0, 0.25, 1.0], [[1.0], [-1.0]])
    assert adjoint.l1_control_distance(u, v) == pytest.approx(0.5)
    assert u(1.0).tolist() == [[-1.0]]
    assert u.node_values()[-1].tolist() == [-1.0]


def test_switching_counts():
    assert adjoint.switching_counts([[1], [1], [0], [-1], [-1]]).tolist() == [1]
    assert adjoint.switching_counts([[1, -1], [-1, -1], [1, 1]]).tolist() == [2, 1]


def test_reconstruction_reaches_the_vertex(di_run):
    diam = di_run.fronts[-1].polytope.diameter()
    for k in adjoint.vertex_directions(di_run, di_run.K):
        p = adjoint.reconstruct(di_run, di_run.K, int(k))
        assert p.defect <= 1e-8 * diam
        assert np.all(p.trajectory[0] == 0.0)
        assert adjoint.maximum_condition_check(p.switching, p.controls, di_run.U_delta)
        assert adjoint.switching_counts(p.controls).max() <= 1
        assert abs(p.duality_gap()) <= 1e-9 * max(1.0, abs(p.etas[-1] @ p.endpoint))
        assert p.zeta @ p.endpoint >= support_function(di_run.fronts[-1].polytope, p.zeta) - 1e-8


def test_backward_recursion_holds_exactly(di_run):
    p = adjoint.reconstruct(di_run, 2, 5)
    phis = [s.P for s in di_run.steps[:len(p.etas) - 1]]
    np.testing.assert_array_equal(p.etas, adjoint.adjoint_sequence(p.zeta, phis))


def test_reconstruction_with_explicit_covector(di_run):
    z = adjoint.outer_normal_at_vertex(di_run.fronts[-1], di_run.fronts[-1].polytope.vertices[0])
    p = adjoint.reconstruct(di_run, di_run.K, zeta=z)
    assert z @ p.endpoint >= support_function(di_run.fronts[-1].polytope, z) - 1e-8


def test_controls_converge_in_l1():
    sigs = []
    for N in (5, 10, 20, 40):
        r = reach.run(DI, "euler", 2, N, 64, mode="global")
        sigs.append([adjoint.reconstruct(r, 2, k).control_signal() for k in range(64)])
    d = np.array([[adjoint.l1_control_distance(a, b) for a, b in zip(u, v)] for u, v in zip(sigs, sigs[1:])])
    assert np.all(np.diff(d.max(axis=1)) < 0)
    assert np.all(np.diff(d.mean(axis=1)) < 0)


def test_normal_cone_proxy_on_rotation():
    z = []
    for N in (5, 10, 20, 40):
        r = reach.run(ROT, "heun", 2, N, 64, mode="global")
        p = adjoint.reconstruct(r, 2, 7)
        V = r.fronts[2].polytope.vertices
        assert np.max((V - p.endpoint) @ p.zeta) <= 1e-9
        z.append(p.zeta)
    ang = [math.acos(min(1.0, float(a @ b))) for a, b in zip(z, z[1:])]
    assert ang[0] >= ang[1] >= ang[2]


def test_scheme_mismatch_and_bad_arguments(di_run):
    with pytest.raises(ValueError, match="heun"):
        adjoint.reconstruct(di_run, 1, 0, scheme="euler")
    with pytest.raises(IndexError):
        adjoint.reconstruct(di_run, 1, 128)
    with pytest.raises(ValueError):
        adjoint.reconstruct(di_run, 0, 0)
    with pytest.raises(GeometryError):
        adjoint.reconstruct(di_run, 1, zeta=[0.0, 0.0])


def test_time_varying_system_is_unsupported():
    sys = LinearSystem(lambda t: np.array([[0.0, 1.0 + t], [0.0, 0.0]]), np.array([[0.0], [1.0]]),
                       box([-1], [1]), point([0, 0]), 0.0, 1.0)
    r = reach.run(sys, "heun", 2, 3, 32, mode="global")
    with pytest.raises(UnsupportedError):
        adjoint.reconstruct(r, 1, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 63), st.sampled_from(["euler", "heun", "combination"]))
def test_duality_identity_on_rotation(k, scheme):
    r = reach.run(ROT, scheme, 2, 4, 64, mode="global")
    p = adjoint.reconstruct(r, 2, k)
    assert abs(p.duality_gap()) <= 1e-9 * max(1.0, abs(p.etas[-1] @ p.endpoint))
    assert p.defect <= 1e-8 * r.fronts[2].polytope.diameter()
    assert adjoint.maximum_condition_check(p.switching, p.controls, r.U_delta)
