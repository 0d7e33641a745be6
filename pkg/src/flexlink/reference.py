"""Desired-motion pipeline.

Circular tip target with a smooth first-order ramp, exponential start-pose
blend, deflection-compensated small-angle inverse kinematics, and per-link
desired twists assembled so that every joint lock is respected exactly at the
measured configuration.  Twist rates come from sample-to-sample central
differences (the estimate lags its center by one sample).
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .chain import Chain
from .dynamics import LinkState
from .screw import body_jacobian

__all__ = [
    "TrajectorySpec",
    "ReferenceSample",
    "ReferenceGenerator",
    "TwistDifferencer",
    "endpoint_reference",
    "pose_blend",
    "deflection_estimate",
    "corrected_joint_reference",
    "scenario_world_rates",
    "consistent_desired_twists",
    "desired_twists",
    "rigid_tip_position",
    "joint_rates_pseudoinverse",
]


@dataclass(frozen=True)
class TrajectorySpec:
    """Tip path and blending parameters.

    ``start_angles`` are the initial joint angles in the order (first-link y,
    first-link z, second-link absolute z); the blend bleeds them off so the
    reference departs from the actual start pose without a jump.
    """

    radius: float = 0.5
    angular_rate: float = 1.0
    tau_ramp: float = 1.5
    tau_blend: float = 2.0
    t_final: float = 25.0
    start_angles: tuple[float, float, float] = (0.0, np.pi / 6.0, np.pi / 6.0 + np.pi / 8.0)

    def __post_init__(self):
        if self.tau_ramp <= 0.0 or self.tau_blend <= 0.0 or self.t_final <= 0.0:
            raise ValueError("time constants must be positive")


def endpoint_reference(spec: TrajectorySpec, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Transverse world tip target ``(0, p_y, p_z)`` and its analytic rate.

    The circle is approached through ``1 - exp(-t/tau_ramp)`` so the target
    starts at the origin with zero radius.
    """
    ramp = 1.0 - np.exp(-t / spec.tau_ramp)
    ramp_dot = np.exp(-t / spec.tau_ramp) / spec.tau_ramp
    ph = spec.angular_rate * t
    s, c = np.sin(ph), np.cos(ph)
    r = spec.radius
    p = np.array([0.0, r * s * ramp, r * c * ramp])
    p_dot = np.array(
        [
            0.0,
            r * (spec.angular_rate * c * ramp + s * ramp_dot),
            r * (-spec.angular_rate * s * ramp + c * ramp_dot),
        ]
    )
    return p, p_dot


def pose_blend(spec: TrajectorySpec, t: float) -> tuple[float, float]:
    """Start-pose blend weight ``exp(-t/tau_blend)`` and its rate."""
    b = np.exp(-t / spec.tau_blend)
    return b, -b / spec.tau_blend


def deflection_estimate(
    chain: Chain, states: list[LinkState]
) -> tuple[np.ndarray, np.ndarray]:
    """World tip-deflection sum over links and its analytic rate.

    Each link contributes its rotated tip deformation; the rate carries both
    the frame rotation and the modal rates (the simulation plays the role of
    tip sensing).
    """
    delta = np.zeros(3)
    delta_dot = np.zeros(3)
    for i, m in enumerate(chain.links):
        st = states[i]
        d = m.tip_deformation(st.q)
        rate = m.tip_deformation_rate(st.q_dot)
        delta += st.rot @ d
        delta_dot += st.rot @ (np.cross(st.omega, d) + rate)
    return delta, delta_dot


def corrected_joint_reference(
    spec: TrajectorySpec, chain: Chain, states: list[LinkState], t: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form small-angle joint reference on the deflection-corrected target.

    Returns ``(q_jd, q_jdot, p_target, p_corrected)`` with joint order
    (first-link y, first-link z, second-link z).  The transverse target is
    divided by the total arm length; the start angles decay with the blend.
    """
    p, p_dot = endpoint_reference(spec, t)
    delta, delta_dot = deflection_estimate(chain, states)
    p_corr = p - delta
    pd_corr = p_dot - delta_dot
    length = sum(m.params.length for m in chain.links)
    b, b_dot = pose_blend(spec, t)
    a1y, a1z, a2z = spec.start_angles
    q_jd = np.array(
        [
            -p_corr[2] / length + a1y * b,
            p_corr[1] / length + a1z * b,
            p_corr[1] / length + a2z * b,
        ]
    )
    q_jdot = np.array(
        [
            -pd_corr[2] / length + a1y * b_dot,
            pd_corr[1] / length + a1z * b_dot,
            pd_corr[1] / length + a2z * b_dot,
        ]
    )
    return q_jd, q_jdot, p, p_corr


def scenario_world_rates(q_jdot: np.ndarray) -> np.ndarray:
    """Per-link desired world angular rates for the two-link arm.

    The locked components coincide across the joint by construction: the
    first link carries (0, y-rate, first z-rate), the second (0, y-rate,
    second z-rate).
    """
    return np.array(
        [
            [0.0, q_jdot[0], q_jdot[1]],
            [0.0, q_jdot[0], q_jdot[2]],
        ]
    )


def consistent_desired_twists(
    chain: Chain, states: list[LinkState], omega_world: np.ndarray
) -> np.ndarray:
    """Per-link body twists realizing the given world angular rates.

    The linear parts are derived serially: each ground-jointed base point
    stays on its anchor, each child base point follows the parent's deformed
    tip (actual deformation and modal rates).  The result satisfies every
    joint velocity row at the measured configuration exactly, so twist errors
    against it lie in the constraint null space.
    """
    out = np.zeros((chain.n_links, 6))
    joint_of = {j.child: j for j in chain.joints}
    tip_vel_world: dict[int, np.ndarray] = {}
    for i, m in enumerate(chain.links):
        st = states[i]
        w_b = st.rot.T @ omega_world[i]
        joint = joint_of.get(i)
        if joint is None or joint.parent is None:
            base_vel_world = np.zeros(3)
        else:
            base_vel_world = tip_vel_world[joint.parent]
        v_b = st.rot.T @ base_vel_world - np.cross(w_b, m.base_rb)
        out[i, :3] = w_b
        out[i, 3:] = v_b
        p_tp = m.tip_rb + m.tip_deformation(st.q)
        tip_rate = m.tip_deformation_rate(st.q_dot)
        tip_vel_world[i] = st.rot @ (v_b + np.cross(w_b, p_tp) + tip_rate)
    return out


def desired_twists(
    theta_d: np.ndarray,
    theta_dot_d: np.ndarray,
    r_d: np.ndarray,
    r_dot_d: np.ndarray,
) -> np.ndarray:
    """Body twist of a rigid motion given in exponential coordinates.

    Angular part ``J(theta) theta_dot`` (body Jacobian of the exponential
    map), linear part ``r_dot + skew(omega) r`` for the body-frame origin
    position ``r``.  Arrays are (n, 3) per link; returns (n, 6).
    """
    theta_d = np.atleast_2d(np.asarray(theta_d, dtype=float))
    theta_dot_d = np.atleast_2d(np.asarray(theta_dot_d, dtype=float))
    r_d = np.atleast_2d(np.asarray(r_d, dtype=float))
    r_dot_d = np.atleast_2d(np.asarray(r_dot_d, dtype=float))
    n = theta_d.shape[0]
    out = np.zeros((n, 6))
    for i in range(n):
        omega = body_jacobian(theta_d[i]) @ theta_dot_d[i]
        out[i, :3] = omega
        out[i, 3:] = r_dot_d[i] + np.cross(omega, r_d[i])
    return out


def planned_rigid_twists(chain: Chain, q_jd: np.ndarray, q_jdot: np.ndarray) -> np.ndarray:
    """Body twists of the rigid arm moving exactly on the joint reference.

    Same serial recursion as :func:`consistent_desired_twists`, but evaluated
    on the planned configuration with the links held rigid: no measured
    rotations, deformations, or modal rates enter, so consecutive samples
    inherit the smoothness of the joint reference and the result is safe to
    difference for a feedforward twist rate.  On an undeformed chain posed at
    the reference angles the two constructions coincide.
    """
    from .screw import exp_so3

    th = np.array([[0.0, q_jd[0], q_jd[1]], [0.0, q_jd[0], q_jd[2]]])
    omega_world = scenario_world_rates(q_jdot)
    out = np.zeros((chain.n_links, 6))
    joint_of = {j.child: j for j in chain.joints}
    tip_vel_world: dict[int, np.ndarray] = {}
    for i, m in enumerate(chain.links):
        rot = exp_so3(th[i])
        w_b = rot.T @ omega_world[i]
        joint = joint_of.get(i)
        if joint is None or joint.parent is None:
            base_vel_world = np.zeros(3)
        else:
            base_vel_world = tip_vel_world[joint.parent]
        v_b = rot.T @ base_vel_world - np.cross(w_b, m.base_rb)
        out[i, :3] = w_b
        out[i, 3:] = v_b
        tip_vel_world[i] = rot @ (v_b + np.cross(w_b, m.tip_rb))
    return out


def rigid_tip_position(chain: Chain, q_j: np.ndarray) -> np.ndarray:
    """Rigid forward kinematics of the arm tip for the three joint angles."""
    from .screw import exp_so3

    th1y, th1z, th2z = q_j
    r1 = exp_so3(np.array([0.0, th1y, th1z]))
    r2 = exp_so3(np.array([0.0, th1y, th2z]))
    return r1 @ chain.links[0].tip_rb + r2 @ chain.links[1].tip_rb


def joint_rates_pseudoinverse(
    chain: Chain,
    q_jd: np.ndarray,
    p_dot_target: np.ndarray,
    damping: float = 1e-6,
) -> np.ndarray:
    """General-mode joint rates: damped pseudoinverse of the rigid tip Jacobian.

    The Jacobian is evaluated at the reference angles by central differences;
    a near-singular map (smallest singular value below 1e-3) still solves
    through the damping but emits a warning.
    """
    h = 1e-7
    jac = np.zeros((3, 3))
    for k in range(3):
        dq = np.zeros(3)
        dq[k] = h
        jac[:, k] = (
            rigid_tip_position(chain, q_jd + dq) - rigid_tip_position(chain, q_jd - dq)
        ) / (2.0 * h)
    svals = np.linalg.svd(jac, compute_uv=False)
    if svals.min() < 1e-3:
        warnings.warn(
            "near-singular kinematic Jacobian; using damped pseudoinverse",
            RuntimeWarning,
            stacklevel=2,
        )
    gram = jac @ jac.T + damping**2 * np.eye(3)
    return jac.T @ np.linalg.solve(gram, np.asarray(p_dot_target, dtype=float))


class TwistDifferencer:
    """Central-difference rate estimate over the sample history.

    The first sample returns zero, the second a one-sided difference; from
    the third on the estimate is the central difference about the previous
    sample (one-sample lag).
    """

    def __init__(self, dt: float):
        self.dt = dt
        self._hist: deque[np.ndarray] = deque(maxlen=3)

    def update(self, value: np.ndarray) -> np.ndarray:
        self._hist.append(np.array(value, dtype=float, copy=True))
        h = self._hist
        if len(h) == 1:
            return np.zeros_like(h[0])
        if len(h) == 2:
            return (h[1] - h[0]) / self.dt
        return (h[2] - h[0]) / (2.0 * self.dt)

    def reset(self) -> None:
        self._hist.clear()


@dataclass
class ReferenceSample:
    """One control-rate reference evaluation.

    ``v_d``/``vdot_d`` form the tracking pair, evaluated on the planned joint
    trajectory alone so the differenced rate stays smooth under measured
    vibration.  ``v_d_consistent`` realizes the same angular rates through the
    measured configuration (deformed tips, modal rates); it satisfies the
    joint velocity rows exactly, which error bookkeeping that pairs twist
    errors with constraint forces depends on.
    """

    t: float
    p_target: np.ndarray
    p_corrected: np.ndarray
    q_jd: np.ndarray
    q_jdot: np.ndarray
    v_d: np.ndarray  # (n_links, 6)
    vdot_d: np.ndarray  # (n_links, 6)
    v_d_consistent: np.ndarray  # (n_links, 6)


class ReferenceGenerator:
    """Stateful per-sample pipeline for the two-link arm.

    Owns the difference history for the twist-rate estimate; call
    :meth:`sample` once per control period in time order.
    """

    def __init__(self, chain: Chain, spec: TrajectorySpec | None = None, dt: float = 1e-3):
        self.chain = chain
        self.spec = spec or TrajectorySpec()
        self.dt = dt
        self._diff = TwistDifferencer(dt)

    def reset(self) -> None:
        self._diff.reset()

    def sample(self, t: float, states: list[LinkState]) -> ReferenceSample:
        q_jd, q_jdot, p, p_corr = corrected_joint_reference(self.spec, self.chain, states, t)
        v_d = planned_rigid_twists(self.chain, q_jd, q_jdot)
        vdot_d = self._diff.update(v_d)
        v_d_consistent = consistent_desired_twists(
            self.chain, states, scenario_world_rates(q_jdot)
        )
        return ReferenceSample(
            t=t,
            p_target=p,
            p_corrected=p_corr,
            q_jd=q_jd,
            q_jdot=q_jdot,
            v_d=v_d,
            vdot_d=vdot_d,
            v_d_consistent=v_d_consistent,
        )
