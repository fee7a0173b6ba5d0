import math

import numpy as np
import pytest

from chainlock.chains import check_certificates, min_clearance, scene_valid
from chainlock.constructions import (
    CORNER_JOINTS,
    IDX,
    DegenerateJag,
    JagSpec,
    ParameterDomain,
    TangleParams,
    TrapezoidParams,
    build_jag,
    build_scene,
    build_tangle34,
    build_trapezoid16,
    line_gap,
    thread_two_chain,
)


# -- tangle ------------------------------------------------------------------

def test_unit_tangle_lengths():
    c3, c4, cert = build_tangle34(TangleParams())
    assert np.allclose(c3.reference_lengths, [3, 1, 3], atol=1e-12)
    assert np.allclose(c4.reference_lengths, [3, 1, 1, 3], atol=1e-12)
    assert cert.piercer == (0, 1) and cert.target == (1, (1, 2, 3))


def test_epsilon_tangle_lengths():
    c3, c4, _ = build_tangle34(TangleParams("epsilon", 0.06))
    assert np.allclose(c3.reference_lengths, [0.03, 0.01, 0.03], atol=1e-12)
    assert np.allclose(c4.reference_lengths, [0.03, 0.01, 0.01, 0.03], atol=1e-12)


def test_epsilon_tangle_inside_ball():
    c3, c4, _ = build_tangle34(TangleParams("epsilon", 0.1))
    P = c3.joints[1:3].mean(axis=0)
    pts = np.vstack([c3.joints, c4.joints])
    assert np.linalg.norm(pts - P, axis=1).max() < 0.1


def test_tangle_frame_is_respected():
    ang = 0.7
    axes = ((math.cos(ang), math.sin(ang), 0.0), (-math.sin(ang), math.cos(ang), 0.0), (0.0, 0.0, 1.0))
    base = build_tangle34(TangleParams())
    moved = build_tangle34(TangleParams(origin=(1.0, 2.0, 3.0), axes=axes))
    R = np.array(axes).T
    for a, b in zip(base[:2], moved[:2]):
        assert np.allclose(a.joints @ R.T + [1, 2, 3], b.joints, atol=1e-12)


def test_tangle_scene_counts():
    s = build_scene("tangle_only")
    assert [c.n_joints for c in s.chains] == [4, 5]
    assert sum(c.n_joints for c in s.chains) == 5 + 4


def test_non_orthonormal_frame_rejected():
    with pytest.raises(ParameterDomain):
        TangleParams(axes=((1.0, 0, 0), (1.0, 0, 0), (0, 0, 1.0)))


# -- jag ---------------------------------------------------------------------

def test_jag_short_link():
    a, b, c, d = build_jag(JagSpec())
    assert np.linalg.norm(c - b) == pytest.approx(0.01, abs=1e-12)
    assert len({tuple(p) for p in (a, b, c, d)}) == 4


def test_jag_parallel_directions_rejected():
    with pytest.raises(DegenerateJag):
        build_jag(JagSpec(incoming=(1.0, 0, 0), outgoing=(-2.0, 0, 0)))


def test_jag_line_gap():
    a, b, c, d = build_jag(JagSpec())
    assert line_gap(a, b - a, c, d - c) <= 0.01 + 1e-12


# -- trapezoid ----------------------------------------------------------------

@pytest.fixture(scope="module")
def trap():
    return build_trapezoid16(TrapezoidParams())


def test_link_count(trap):
    assert trap.chain.n_joints == 17
    assert trap.chain.n_edges == 5 + (5 + 4 + 1 + 1)


@pytest.mark.parametrize("p", [
    TrapezoidParams(),
    TrapezoidParams(B=2.0, L=1.5, theta=1.2, epsilon=0.005),
    TrapezoidParams(B=1.0, L=0.8, theta=0.9, epsilon=0.008),
])
def test_link_count_any_params(p):
    assert build_trapezoid16(p).chain.n_edges == 16


def test_structural_joints_near_corners(trap):
    eps = trap.params.epsilon
    J = trap.chain.joints
    for corner, names in CORNER_JOINTS.items():
        d = np.linalg.norm(J[[IDX[n] for n in names]] - trap.corners[corner], axis=1)
        assert d.max() < eps, corner


def test_end_links_leave_every_ball(trap):
    J, eps = trap.chain.joints, trap.params.epsilon
    for end in (J[0], J[-1]):
        for c in trap.corners.values():
            assert np.linalg.norm(end - c) > 10 * eps


def test_trapezoid_clearance(trap):
    s = build_scene("interlocked")
    assert min_clearance(s) >= s.tau == pytest.approx(trap.params.epsilon / 100)


def test_parameter_domain():
    with pytest.raises(ParameterDomain):
        TrapezoidParams(epsilon=0.5)
    with pytest.raises(ParameterDomain):
        TrapezoidParams(theta=math.pi / 2)
    with pytest.raises(ParameterDomain):
        TrapezoidParams(L=2.0)  # sides meet at the apex


def test_scale_equivariance():
    base = build_scene("interlocked")
    for s in (0.5, 2.0):
        p = TrapezoidParams(B=s, L=s, epsilon=0.01 * s)
        scaled = build_scene("interlocked", p)
        for a, b in zip(base.chains, scaled.chains):
            assert np.allclose(s * a.joints, b.joints, atol=1e-9)


# -- threading ----------------------------------------------------------------

def test_threading_certificates(trap):
    two, certs = thread_two_chain(trap.params, trap)
    assert len(certs) == 4
    assert {c.expected_sign for c in certs} == {-1}
    assert check_certificates(build_scene("interlocked"))


def test_apex_height(trap):
    two, _ = thread_two_chain(trap.params, trap)
    h = math.tan(math.pi / 3)
    assert h == pytest.approx(1.7320508, abs=1e-7)
    assert abs(two.joints[1][1] - h) <= trap.params.epsilon


def test_two_chain_links_long(trap):
    two, _ = thread_two_chain(trap.params, trap)
    assert two.reference_lengths.min() >= 10 * trap.params.L


def test_control_scene():
    from chainlock.escape import objective

    s = build_scene("control")
    assert s.certificates == ()
    assert check_certificates(s)
    assert scene_valid(s)
    assert objective(s) > 0


def test_interlocked_objective_zero():
    from chainlock.escape import objective

    assert objective(build_scene("interlocked")) == 0.0
