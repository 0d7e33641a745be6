"""Canonical two-link experiment arm: geometry, joints, motors, start pose.

Link 1: 1.2 m, 10x30 mm steel section; link 2: 1.0 m, 10x50 mm.  The base
joint is a two-motor gimbal (world y and z) with the world-x spin locked;
the elbow is a hinge about world z with one motor.  Gravity is zero in the
reference experiment; the arm moves in both bending planes.
"""

from __future__ import annotations

import numpy as np

from .beam import LinkParams, ModalBasis, make_clamped_free_basis
from .chain import BaumgarteParams, Chain, JointSpec, MotorSpec
from .control import GainSet
from .dynamics import LinkModel

__all__ = [
    "LINK1_PARAMS",
    "LINK2_PARAMS",
    "START_ANGLES",
    "two_link_arm",
    "two_link_gains",
    "start_state",
]


LINK1_PARAMS = LinkParams(length=1.2, density=7800.0, width=0.01, height=0.03, modulus=2.1e11)
LINK2_PARAMS = LinkParams(length=1.0, density=7800.0, width=0.01, height=0.05, modulus=2.1e11)

# start pose: first joint z-angle pi/6, second absolute z-angle pi/6 + pi/8
START_ANGLES = (np.pi / 6.0, np.pi / 6.0 + np.pi / 8.0)


def two_link_arm(
    n_bending: int = 3,
    n_axial: int = 1,
    gravity: np.ndarray | None = None,
    baumgarte: BaumgarteParams | None = None,
) -> Chain:
    """Build the two-link arm with the given modal resolution per link."""
    links = []
    for params in (LINK1_PARAMS, LINK2_PARAMS):
        basis = make_clamped_free_basis(params, n_bending=n_bending, n_axial=n_axial)
        links.append(LinkModel(params, basis))
    joints = [
        JointSpec(
            child=0,
            parent=None,
            locked_rot_axes=(0,),
            motors=(MotorSpec(axis=1, inertia=1.0), MotorSpec(axis=2, inertia=3.0)),
        ),
        JointSpec(
            child=1,
            parent=0,
            locked_rot_axes=(0, 1),
            free_rot_axis=2,
            motors=(MotorSpec(axis=2, inertia=1.7),),
        ),
    ]
    return Chain(links, joints, gravity=gravity, baumgarte=baumgarte)


def two_link_gains() -> list[GainSet]:
    """Reference feedback gains for the two-link arm.

    Twist gains act on the actuated angular axes in the angular-first twist
    layout: 300/s on the base gimbal's y and z rotations, 200/s on the elbow
    hinge's z rotation.  The base link's linear velocity vanishes identically
    (pinned base), so linear twist rows carry no feedback.  PD joint gains
    are 500/20 at the gimbal and 400/20 at the elbow; all motor torques
    saturate at 100 N·m.
    """
    k1 = np.diag([0.0, 300.0, 300.0, 0.0, 0.0, 0.0])
    k2 = np.diag([0.0, 0.0, 200.0, 0.0, 0.0, 0.0])
    return [
        GainSet(twist_gain=k1, kp=500.0, kd=20.0, torque_limit=100.0),
        GainSet(twist_gain=k2, kp=400.0, kd=20.0, torque_limit=100.0),
    ]


def start_state(chain: Chain) -> np.ndarray:
    """Packed rest state at the experiment start pose (zero residuals)."""
    theta = [
        np.array([0.0, 0.0, START_ANGLES[0]]),
        np.array([0.0, 0.0, START_ANGLES[1]]),
    ]
    omega = [np.zeros(3), np.zeros(3)]
    states = chain.consistent_states(theta, omega)
    return chain.pack(states)
