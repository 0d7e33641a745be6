"""Feedback laws on body twists and joint angles, plus actuation routing.

Every twist-space controller returns a desired body wrench for one link with
the torque components first, matching the twist layout (angular velocity,
then linear velocity).  The wrench is a request: only the directions spanned
by the link's base motors are realizable, and :func:`wrench_to_actuation`
projects the request onto that span, returning motor torques together with
the unactuated remainder for diagnostics.

The inertia-shaped law comes in two flavours.  :func:`slpc_nominal` uses the
link's true inertia and bias; :func:`slpc_adaptive` rebuilds both from a
five-entry parameter estimate through the regressor factorization, so the two
coincide exactly when the estimate equals the truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adaptation import inertia_at, regressor_V
from .chain import JointSpec
from .dynamics import LinkModel, LinkState, bias_Hc, endpoint_wrench_map

__all__ = [
    "ActuationResult",
    "GainSet",
    "actuation_matrix",
    "pd_joint",
    "ptc",
    "saturate",
    "slpc_adaptive",
    "slpc_nominal",
    "wrench_to_actuation",
]

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class GainSet:
    """Per-link feedback gains plus the shared motor torque ceiling.

    ``twist_gain`` multiplies the inertia-weighted twist error, so its units
    are 1/s and its spectrum sets closed-loop decay rates directly.  Zero
    rows mark twist directions that receive no feedback (unactuated axes).
    ``kp``/``kd`` are the joint-space PD gains for this link's base joint and
    ``torque_limit`` is the symmetric saturation bound in newton-metres.
    """

    twist_gain: np.ndarray
    kp: float
    kd: float
    torque_limit: float = 100.0

    def __post_init__(self) -> None:
        k = np.asarray(self.twist_gain, dtype=float)
        if k.shape != (6, 6):
            raise ValueError(f"twist gain must be 6x6, got {k.shape}")
        if not np.allclose(k, k.T, atol=_SYM_TOL):
            raise ValueError("twist gain must be symmetric")
        scale = max(1.0, float(np.abs(k).max()))
        if np.linalg.eigvalsh(0.5 * (k + k.T)).min() < -_SYM_TOL * scale:
            raise ValueError("twist gain must be positive semidefinite")
        object.__setattr__(self, "twist_gain", k)
        if self.kp < 0.0 or self.kd < 0.0:
            raise ValueError("PD gains must be nonnegative")
        if self.torque_limit <= 0.0:
            raise ValueError("torque limit must be positive")


def slpc_nominal(
    model: LinkModel,
    state: LinkState,
    v_d: np.ndarray,
    vdot_d: np.ndarray,
    k: np.ndarray,
    gravity: np.ndarray | None = None,
) -> np.ndarray:
    """Inertia-shaped twist tracking wrench ``M vdot_d + H_c + K M (v_d - V)``.

    The feedforward uses the rigid rows in their substituted form (modal
    accelerations eliminated), so applying this wrench to an otherwise
    unloaded link yields the error dynamics ``M e_dot + K M e = 0``.
    """
    v_d = np.asarray(v_d, dtype=float)
    vdot_d = np.asarray(vdot_d, dtype=float)
    k = np.asarray(k, dtype=float)
    e_v = v_d - state.twist
    return model.m6 @ vdot_d + bias_Hc(model, state, gravity) + k @ (model.m6 @ e_v)


def slpc_adaptive(
    model: LinkModel,
    state: LinkState,
    v_d: np.ndarray,
    vdot_d: np.ndarray,
    k: np.ndarray,
    s_hat: np.ndarray,
    gravity: np.ndarray | None = None,
) -> np.ndarray:
    """Estimate-based variant of :func:`slpc_nominal`.

    The feedforward is the regressor product ``Y(state, vdot_d) s_hat``,
    which equals ``M_hat vdot_d + H_c_hat`` by linearity of the rigid rows in
    the parameter vector; the error term uses the estimate-consistent
    inertia.  At ``s_hat`` equal to the true parameters the output matches
    the nominal law to rounding error.
    """
    v_d = np.asarray(v_d, dtype=float)
    vdot_d = np.asarray(vdot_d, dtype=float)
    k = np.asarray(k, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    e_v = v_d - state.twist
    feedforward = regressor_V(model, state, vdot_d, gravity) @ s_hat
    return feedforward + k @ (inertia_at(model, s_hat) @ e_v)


def ptc(v_d: np.ndarray, v: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Proportional twist controller: wrench ``K (v_d - v)``, no model terms."""
    return np.asarray(k, dtype=float) @ (
        np.asarray(v_d, dtype=float) - np.asarray(v, dtype=float)
    )


def pd_joint(
    theta_d: np.ndarray | float,
    theta: np.ndarray | float,
    rate_d: np.ndarray | float,
    rate: np.ndarray | float,
    kp: float,
    kd: float,
) -> np.ndarray:
    """Joint-space PD torque ``Kp (theta_d - theta) + Kd (rate_d - rate)``.

    Purely kinematic feedback on the measured joint angles and rates; no
    gravity or model compensation of any kind.
    """
    pos_err = np.asarray(theta_d, dtype=float) - np.asarray(theta, dtype=float)
    rate_err = np.asarray(rate_d, dtype=float) - np.asarray(rate, dtype=float)
    return kp * pos_err + kd * rate_err


def saturate(values: np.ndarray | float, limit: float) -> np.ndarray:
    """Clamp componentwise to ``[-limit, limit]``; idempotent and odd."""
    if limit <= 0.0:
        raise ValueError("saturation limit must be positive")
    return np.clip(np.asarray(values, dtype=float), -limit, limit)


@dataclass(frozen=True)
class ActuationResult:
    """Motor torques realizing the actuated part of a requested wrench.

    ``torques[k]`` drives motor ``k`` of the joint about its inertial axis;
    ``applied`` is the body wrench those torques produce through the base
    joint and ``residual`` is the unactuated remainder of the request —
    useful as a runtime diagnostic of how much of the commanded wrench the
    hardware cannot express.
    """

    torques: np.ndarray
    applied: np.ndarray
    residual: np.ndarray


def actuation_matrix(model: LinkModel, state: LinkState, joint: JointSpec) -> np.ndarray:
    """Columns: body wrench produced by a unit torque about each motor axis.

    A base motor torque enters the link as a pure moment at the base
    section, so each column is the endpoint wrench map evaluated on
    ``(R^T a_k, 0)`` with ``a_k`` the motor's inertial axis.
    """
    if not joint.motors:
        raise ValueError("joint has no motors to actuate")
    cols = np.empty((6, len(joint.motors)))
    zero = np.zeros(6)
    for k, motor in enumerate(joint.motors):
        base = np.zeros(6)
        base[:3] = state.rot.T @ motor.axis_vec
        cols[:, k] = endpoint_wrench_map(model, state, base, zero)
    return cols


def wrench_to_actuation(
    desired: np.ndarray,
    model: LinkModel,
    state: LinkState,
    joint: JointSpec,
) -> ActuationResult:
    """Least-squares motor torques whose base wrench best matches ``desired``.

    Only the span of the motor-axis columns is reachable; the orthogonal
    remainder of the request is returned in ``residual``.  A rank-deficient
    motor set (duplicated axes) admits no well-posed solve and raises.
    """
    desired = np.asarray(desired, dtype=float)
    if desired.shape != (6,):
        raise ValueError(f"desired wrench must have shape (6,), got {desired.shape}")
    mat = actuation_matrix(model, state, joint)
    if np.linalg.matrix_rank(mat) < mat.shape[1]:
        raise ValueError("actuation map is rank-deficient")
    torques, *_ = np.linalg.lstsq(mat, desired, rcond=None)
    applied = mat @ torques
    return ActuationResult(torques=torques, applied=applied, residual=desired - applied)
