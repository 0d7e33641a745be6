"""Reference-pipeline tests: tip path, blending, deflection compensation,
small-angle joint reference, desired twists, and rate differencing."""

import warnings

import numpy as np
import pytest

from flexlink.reference import (
    ReferenceGenerator,
    TrajectorySpec,
    TwistDifferencer,
    consistent_desired_twists,
    corrected_joint_reference,
    deflection_estimate,
    desired_twists,
    endpoint_reference,
    joint_rates_pseudoinverse,
    planned_rigid_twists,
    pose_blend,
    rigid_tip_position,
    scenario_world_rates,
)
from flexlink.screw import body_jacobian, exp_so3

from conftest import consistent_two_link_state


SPEC = TrajectorySpec()


def test_endpoint_reference_starts_at_origin_and_reaches_radius():
    p0, _ = endpoint_reference(SPEC, 0.0)
    assert np.allclose(p0, 0.0, atol=1e-15)
    p_inf, _ = endpoint_reference(SPEC, 60.0)
    assert abs(np.linalg.norm(p_inf[1:]) - SPEC.radius) < 1e-9


def test_endpoint_velocity_matches_central_difference():
    h = 1e-6
    for t in np.linspace(0.05, 20.0, 25):
        _, v = endpoint_reference(SPEC, t)
        p_plus, _ = endpoint_reference(SPEC, t + h)
        p_minus, _ = endpoint_reference(SPEC, t - h)
        fd = (p_plus - p_minus) / (2.0 * h)
        assert np.abs(v - fd).max() < 1e-6


def test_ramp_and_blend_are_smooth_and_monotone():
    dt = 1e-3
    ts = np.arange(0.0, 10.0, dt)
    ramp_prev, blend_prev = None, None
    for t in ts:
        ramp = 1.0 - np.exp(-t / SPEC.tau_ramp)
        b, b_dot = pose_blend(SPEC, t)
        if ramp_prev is not None:
            assert ramp >= ramp_prev  # monotone up
            assert b <= blend_prev  # monotone down
            assert abs(b - blend_prev) <= abs(b_dot) * dt * 1.1 + 1e-12
        ramp_prev, blend_prev = ramp, b


def test_deflection_estimate_zero_when_undeformed(two_link):
    y = consistent_two_link_state(two_link, spin=0.4)
    delta, delta_dot = deflection_estimate(two_link, two_link.unpack(y))
    assert np.allclose(delta, 0.0, atol=1e-15)
    assert np.allclose(delta_dot, 0.0, atol=1e-15)


def test_deflection_estimate_single_link_identity(two_link):
    m = two_link.links[0]
    q = np.zeros(m.n_q)
    q[0] = 0.01
    st = m.state(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), q=q)
    # one-link view: only link 0 contributes
    from flexlink.chain import Chain, JointSpec

    solo = Chain([m], [JointSpec(child=0, parent=None, locked_rot_axes=(0,))])
    delta, delta_dot = deflection_estimate(solo, [st])
    assert np.allclose(delta, m.tip_deformation(q), atol=1e-15)
    assert np.allclose(delta_dot, 0.0, atol=1e-15)


def test_deflection_rate_isolates_rotation_term(two_link):
    """Static deformation on a rotating link: the rate is purely the frame
    sweep of the fixed tip offset."""
    m = two_link.links[0]
    q = np.zeros(m.n_q)
    q[3] = 0.02
    omega = np.array([0.0, 0.0, 1.3])
    theta = np.array([0.0, 0.0, 0.7])
    st = m.state(theta, np.zeros(3), omega, np.zeros(3), q=q)
    from flexlink.chain import Chain, JointSpec

    solo = Chain([m], [JointSpec(child=0, parent=None, locked_rot_axes=(0,))])
    _, delta_dot = deflection_estimate(solo, [st])
    expected = st.rot @ np.cross(omega, m.tip_deformation(q))
    assert np.allclose(delta_dot, expected, atol=1e-14)


def test_joint_reference_starts_at_start_pose(two_link):
    y = consistent_two_link_state(two_link)
    q_jd, _, _, _ = corrected_joint_reference(SPEC, two_link, two_link.unpack(y), 0.0)
    assert np.allclose(q_jd, SPEC.start_angles, atol=1e-12)


def test_joint_reference_tracks_circle_after_blend(two_link):
    y = consistent_two_link_state(two_link)
    states = two_link.unpack(y)
    t = 80.0
    q_jd, _, p, p_corr = corrected_joint_reference(SPEC, two_link, states, t)
    length = sum(m.params.length for m in two_link.links)
    assert np.allclose(p_corr, p, atol=1e-15)  # undeformed: no correction
    assert abs(q_jd[1] - p[1] / length) < 1e-12
    assert abs(q_jd[2] - p[1] / length) < 1e-12
    assert abs(q_jd[0] + p[2] / length) < 1e-12


def test_deflection_correction_shifts_reference(two_link):
    q1 = np.zeros(two_link.links[0].n_q)
    q1[0] = 0.02  # transverse-y tip deflection
    y_def = consistent_two_link_state(two_link, q1=q1)
    y_rig = consistent_two_link_state(two_link)
    t = 3.0
    qd_def, _, _, _ = corrected_joint_reference(SPEC, two_link, two_link.unpack(y_def), t)
    qd_rig, _, _, _ = corrected_joint_reference(SPEC, two_link, two_link.unpack(y_rig), t)
    delta, _ = deflection_estimate(two_link, two_link.unpack(y_def))
    length = sum(m.params.length for m in two_link.links)
    shift = qd_def - qd_rig
    assert abs(shift[1] + delta[1] / length) < 1e-12
    assert abs(shift[2] + delta[1] / length) < 1e-12
    assert abs(shift[0] - delta[2] / length) < 1e-12


def test_desired_twists_literal_form():
    # stationary
    zeros = np.zeros((2, 3))
    assert np.allclose(desired_twists(zeros, zeros, zeros, zeros), 0.0, atol=1e-15)
    # constant rate about a single axis: angular part is exactly the rate
    theta = np.array([[0.0, 0.0, 0.6]])
    theta_dot = np.array([[0.0, 0.0, 1.7]])
    r = np.array([[0.3, -0.2, 0.1]])
    r_dot = np.array([[0.05, 0.0, -0.02]])
    v = desired_twists(theta, theta_dot, r, r_dot)[0]
    assert np.allclose(v[:3], [0.0, 0.0, 1.7], atol=1e-13)
    assert np.allclose(v[3:], r_dot[0] + np.cross(v[:3], r[0]), atol=1e-13)
    # general axis agrees with the body Jacobian
    rng = np.random.default_rng(6)
    th = rng.uniform(-1.0, 1.0, 3)
    thd = rng.uniform(-1.0, 1.0, 3)
    v2 = desired_twists(th, thd, np.zeros(3), np.zeros(3))[0]
    assert np.allclose(v2[:3], body_jacobian(th) @ thd, atol=1e-13)


def test_twist_differencer_is_exact_on_quadratics():
    dt = 1e-3
    diff = TwistDifferencer(dt)
    coeffs = np.arange(1.0, 7.0)

    def poly(t):
        return coeffs * (2.0 + 3.0 * t + 4.0 * t * t)

    out = []
    for k in range(6):
        out.append(diff.update(poly(k * dt)))
    # from the third sample on: central difference about the previous sample
    for k in range(2, 6):
        t_center = (k - 1) * dt
        exact = coeffs * (3.0 + 8.0 * t_center)
        assert np.abs(out[k] - exact).max() < 1e-7


def test_twist_differencer_converges_at_second_order():
    errs = []
    for dt in (1e-3, 5e-4):
        diff = TwistDifferencer(dt)
        last = None
        for k in range(5):
            t = k * dt
            last = diff.update(np.array([np.sin(40.0 * t)]))
        t_center = 3 * dt  # center of the last central difference
        errs.append(abs(last[0] - 40.0 * np.cos(40.0 * t_center)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


def test_reference_twists_respect_joint_locks_exactly(two_link):
    """The desired twist stack must lie in the constraint null space at the
    measured configuration, with the actual modal rates in the modal slots."""
    from flexlink.chain import AppliedLoads

    rng = np.random.default_rng(77)
    for _ in range(5):
        y = consistent_two_link_state(
            two_link,
            spin=rng.uniform(-1, 1),
            q1=1e-2 * rng.standard_normal(two_link.links[0].n_q),
            q2=1e-2 * rng.standard_normal(two_link.links[1].n_q),
            qd1=0.2 * rng.standard_normal(two_link.links[0].n_q),
            qd2=0.2 * rng.standard_normal(two_link.links[1].n_q),
        )
        states = two_link.unpack(y)
        q_jdot = rng.uniform(-1.0, 1.0, 3)
        v_d = consistent_desired_twists(two_link, states, scenario_world_rates(q_jdot))
        a_mat, _, _ = two_link.assemble(states, AppliedLoads.zero(two_link))
        u_vel = np.zeros(two_link.n_dyn)
        for i, m in enumerate(two_link.links):
            ro, mo = two_link.rigid_offset[i], two_link.modal_offset[i]
            u_vel[ro : ro + 6] = v_d[i]
            u_vel[mo : mo + m.n_q] = states[i].q_dot
        residual = a_mat[two_link.n_dyn :, : two_link.n_dyn] @ u_vel
        assert np.abs(residual).max() < 1e-12


def test_generator_produces_lagged_central_rates(two_link):
    gen = ReferenceGenerator(two_link, SPEC, dt=1e-3)
    y = consistent_two_link_state(two_link)
    states = two_link.unpack(y)
    samples = [gen.sample(k * 1e-3, states) for k in range(5)]
    assert np.allclose(samples[0].vdot_d, 0.0)
    expect = (samples[2].v_d - samples[0].v_d) / (2e-3)
    assert np.allclose(samples[2].vdot_d, expect, atol=1e-12)
    # frozen state, smooth spec: rates stay bounded
    assert all(np.isfinite(s.vdot_d).all() for s in samples)


def test_planned_twists_match_consistent_on_rigid_chain(two_link):
    """Posed undeformed at the reference angles, the planned (tracking) and
    measured-configuration (bookkeeping) constructions are the same twist."""
    rng = np.random.default_rng(3)
    for _ in range(5):
        q_jd = rng.uniform(-0.8, 0.8, 3)
        q_jdot = rng.uniform(-1.0, 1.0, 3)
        theta = [
            np.array([0.0, q_jd[0], q_jd[1]]),
            np.array([0.0, q_jd[0], q_jd[2]]),
        ]
        rots = [exp_so3(t) for t in theta]
        omega_world = scenario_world_rates(q_jdot)
        omega = [rots[k].T @ omega_world[k] for k in range(2)]
        q = [np.zeros(m.n_q) for m in two_link.links]
        states = two_link.consistent_states(theta, omega, q, q)
        planned = planned_rigid_twists(two_link, q_jd, q_jdot)
        consistent = consistent_desired_twists(two_link, states, omega_world)
        assert np.allclose(planned, consistent, atol=1e-12)


def test_tracking_twist_sees_rates_only_through_deflection_estimate(two_link):
    """Measured modal rates reach the tracking twist only through the
    three-component tip deflection-rate estimate, while the bookkeeping twist
    carries the per-link tip rates directly.  Perturbing the modal rates
    inside the kernel of the estimate map must leave the tracking twist
    bit-identical and still move the bookkeeping twist."""
    n1, n2 = two_link.links[0].n_q, two_link.links[1].n_q

    def build(rates):
        y = consistent_two_link_state(two_link, qd1=rates[:n1], qd2=rates[n1:])
        return two_link.unpack(y)

    # linear map: stacked modal rates -> deflection-rate estimate
    jac = np.zeros((3, n1 + n2))
    for k in range(n1 + n2):
        e = np.zeros(n1 + n2)
        e[k] = 1.0
        jac[:, k] = deflection_estimate(two_link, build(e))[1]
    _, _, vt = np.linalg.svd(jac)
    kernel = vt[3:].T  # columns span the kernel (rank of the map is at most 3)
    assert kernel.shape[1] >= 1

    rng = np.random.default_rng(11)
    base_rates = 0.3 * rng.standard_normal(n1 + n2)
    shifted_rates = base_rates + kernel @ rng.uniform(0.2, 0.5, kernel.shape[1])
    t = 0.4
    out = {}
    for tag, rates in (("base", base_rates), ("shifted", shifted_rates)):
        states = build(rates)
        q_jd, q_jdot, _, _ = corrected_joint_reference(SPEC, two_link, states, t)
        out[tag, "planned"] = planned_rigid_twists(two_link, q_jd, q_jdot)
        out[tag, "consistent"] = consistent_desired_twists(
            two_link, states, scenario_world_rates(q_jdot)
        )
    d_planned = np.abs(out["base", "planned"] - out["shifted", "planned"]).max()
    d_consistent = np.abs(out["base", "consistent"] - out["shifted", "consistent"]).max()
    assert d_planned < 1e-12
    assert d_consistent > 1e-3
    assert not np.allclose(out["base", "planned"], out["base", "consistent"])


def test_pseudoinverse_rates_reproduce_target(two_link):
    q_jd = np.array([0.15, 0.5, 0.3])
    p_dot = np.array([0.0, 0.08, -0.05])
    with warnings.catch_warnings():
        warnings.simplefilter("error")  # must not warn away from singularity
        rates = joint_rates_pseudoinverse(two_link, q_jd, p_dot)
    # validate against the finite-difference Jacobian action
    h = 1e-6
    p0 = rigid_tip_position(two_link, q_jd)
    p1 = rigid_tip_position(two_link, q_jd + h * rates)
    assert np.allclose((p1 - p0) / h, p_dot, atol=1e-4)


def test_pseudoinverse_warns_at_singular_stretch(two_link):
    q_jd = np.zeros(3)  # arm stretched along +x: tip cannot move along x
    with pytest.warns(RuntimeWarning):
        rates = joint_rates_pseudoinverse(two_link, q_jd, np.array([0.0, 0.1, 0.0]))
    assert np.all(np.isfinite(rates))
