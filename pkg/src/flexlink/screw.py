"""Body-fixed screw algebra: rotations, twists, wrenches, and their transforms.

Conventions
-----------
* A twist is a 6-vector ``V = (omega, v)`` — angular velocity first, then the
  linear velocity of the body point currently at the frame origin, both in
  body coordinates.
* A wrench is a 6-vector ``W = (tau, f)`` — torque about the frame origin,
  then force, both in body coordinates.
* ``pairing(W, V) = tau . omega + f . v`` is the instantaneous power and is
  invariant under a change of frame when the wrench is moved with the
  co-adjoint map.
* Rotations are plain ``(3, 3)`` orthonormal arrays; exponential coordinates
  ``theta`` map to a rotation via :func:`exp_so3`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "skew",
    "unskew",
    "exp_so3",
    "log_so3",
    "body_jacobian",
    "body_jacobian_inv",
    "AdjointTransform",
    "adjoint_apply",
    "coadjoint_apply",
    "small_adjoint",
    "point_shift",
    "wrench_shift",
    "pairing",
    "Twist",
    "Wrench",
]

_SMALL_ANGLE = 1e-6


def skew(v: np.ndarray) -> np.ndarray:
    """Return the 3x3 antisymmetric matrix with ``skew(v) @ u == np.cross(v, u)``."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def unskew(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`skew` for an antisymmetric matrix (uses the lower triangle)."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(theta: np.ndarray) -> np.ndarray:
    """Rotation matrix for exponential coordinates ``theta`` (Rodrigues formula).

    Falls back to a truncated series below ``1e-6`` radians so the result is
    smooth through the identity.
    """
    theta = np.asarray(theta, dtype=float)
    angle = float(np.linalg.norm(theta))
    k = skew(theta)
    if angle < _SMALL_ANGLE:
        # sin(a)/a ~ 1 - a^2/6, (1-cos a)/a^2 ~ 1/2 - a^2/24
        return np.eye(3) + (1.0 - angle**2 / 6.0) * k + (0.5 - angle**2 / 24.0) * (k @ k)
    return (
        np.eye(3)
        + (np.sin(angle) / angle) * k
        + ((1.0 - np.cos(angle)) / angle**2) * (k @ k)
    )


def log_so3(r: np.ndarray) -> np.ndarray:
    """Exponential coordinates of a rotation matrix (principal branch, angle < pi)."""
    r = np.asarray(r, dtype=float)
    cos_angle = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    angle = float(np.arccos(cos_angle))
    if angle < _SMALL_ANGLE:
        return unskew(0.5 * (r - r.T))
    if angle > np.pi - 1e-9:
        # Near pi the antisymmetric part degenerates; recover the axis from
        # the symmetric part r = 2 a a^T - I + O(pi - angle).
        axis_sq = np.clip((np.diag(r) + 1.0) / 2.0, 0.0, None)
        axis = np.sqrt(axis_sq)
        i = int(np.argmax(axis))
        if axis[i] > 0.0:
            for j in range(3):
                if j != i and r[i, j] + r[j, i] < 0.0:
                    axis[j] = -axis[j]
        off = unskew(0.5 * (r - r.T))
        if np.dot(off, axis) < 0.0:
            axis = -axis
        return angle * axis
    return unskew(0.5 * (r - r.T)) * (angle / np.sin(angle))


def body_jacobian(theta: np.ndarray) -> np.ndarray:
    """Right Jacobian ``J`` of :func:`exp_so3`: ``omega_body = J(theta) @ theta_dot``.

    Equivalently ``R(theta).T @ d/dt R(theta) == skew(J(theta) @ theta_dot)``.
    """
    theta = np.asarray(theta, dtype=float)
    angle = float(np.linalg.norm(theta))
    k = skew(theta)
    if angle < _SMALL_ANGLE:
        return np.eye(3) - (0.5 - angle**2 / 24.0) * k + (1.0 / 6.0 - angle**2 / 120.0) * (k @ k)
    return (
        np.eye(3)
        - ((1.0 - np.cos(angle)) / angle**2) * k
        + ((angle - np.sin(angle)) / angle**3) * (k @ k)
    )


def body_jacobian_inv(theta: np.ndarray) -> np.ndarray:
    """Closed-form inverse of :func:`body_jacobian` (valid for ``|theta| < 2 pi``)."""
    theta = np.asarray(theta, dtype=float)
    angle = float(np.linalg.norm(theta))
    k = skew(theta)
    if angle < _SMALL_ANGLE:
        return np.eye(3) + 0.5 * k + (1.0 / 12.0 + angle**2 / 720.0) * (k @ k)
    coeff = 1.0 / angle**2 - (1.0 + np.cos(angle)) / (2.0 * angle * np.sin(angle))
    return np.eye(3) + 0.5 * k + coeff * (k @ k)


@dataclass(frozen=True)
class AdjointTransform:
    """Rigid change of twist coordinates from a source frame to a target frame.

    Parameters
    ----------
    rotation:
        ``R`` with ``x_target = R @ x_source`` for free vectors.
    origin:
        Position of the source-frame origin expressed in target coordinates.
    """

    rotation: np.ndarray
    origin: np.ndarray

    def matrix(self) -> np.ndarray:
        ad = np.zeros((6, 6))
        ad[:3, :3] = self.rotation
        ad[3:, 3:] = self.rotation
        ad[3:, :3] = skew(self.origin) @ self.rotation
        return ad

    def compose(self, inner: "AdjointTransform") -> "AdjointTransform":
        """Transform equivalent to applying ``inner`` first, then ``self``."""
        return AdjointTransform(
            rotation=self.rotation @ inner.rotation,
            origin=self.origin + self.rotation @ inner.origin,
        )

    def inverse(self) -> "AdjointTransform":
        return AdjointTransform(
            rotation=self.rotation.T,
            origin=-self.rotation.T @ self.origin,
        )


def adjoint_apply(transform: AdjointTransform, twist: np.ndarray) -> np.ndarray:
    """Re-express a twist in the transform's target frame."""
    omega = np.asarray(twist[:3], dtype=float)
    v = np.asarray(twist[3:], dtype=float)
    r_mat = transform.rotation
    omega_t = r_mat @ omega
    v_t = r_mat @ v + np.cross(transform.origin, omega_t)
    return np.concatenate([omega_t, v_t])


def coadjoint_apply(transform: AdjointTransform, wrench: np.ndarray) -> np.ndarray:
    """Re-express a wrench in the target frame (inverse-transpose of the adjoint).

    Preserves :func:`pairing` against :func:`adjoint_apply` of any twist.
    """
    tau = np.asarray(wrench[:3], dtype=float)
    f = np.asarray(wrench[3:], dtype=float)
    r_mat = transform.rotation
    f_t = r_mat @ f
    tau_t = r_mat @ tau + np.cross(transform.origin, f_t)
    return np.concatenate([tau_t, f_t])


def small_adjoint(twist: np.ndarray) -> np.ndarray:
    """Matrix of the twist bracket: ``small_adjoint(V1) @ V2 == [V1, V2]``."""
    omega = np.asarray(twist[:3], dtype=float)
    v = np.asarray(twist[3:], dtype=float)
    ad = np.zeros((6, 6))
    ad[:3, :3] = skew(omega)
    ad[3:, 3:] = skew(omega)
    ad[3:, :3] = skew(v)
    return ad


def point_shift(r: np.ndarray) -> np.ndarray:
    """The 6x6 map ``[[I, 0], [skew(r), I]]``.

    ``point_shift(r1) @ point_shift(r2) == point_shift(r1 + r2)``.  To move a
    twist's linear part from the frame origin to the body point at ``r`` use
    ``point_shift(-r)`` (the point picks up ``omega x r``).
    """
    x = np.eye(6)
    x[3:, :3] = skew(np.asarray(r, dtype=float))
    return x


def wrench_shift(r: np.ndarray, wrench: np.ndarray) -> np.ndarray:
    """Re-refer a wrench's torque from the frame origin to the body point at ``r``.

    Dual to shifting a twist with ``point_shift(-r)``: pairing is preserved,
    ``tau_at_r = tau - r x f``.
    """
    tau = np.asarray(wrench[:3], dtype=float)
    f = np.asarray(wrench[3:], dtype=float)
    return np.concatenate([tau - np.cross(np.asarray(r, dtype=float), f), f])


def pairing(wrench: np.ndarray, twist: np.ndarray) -> float:
    """Instantaneous power ``tau . omega + f . v``."""
    return float(np.dot(np.asarray(wrench, dtype=float), np.asarray(twist, dtype=float)))


@dataclass(frozen=True)
class Twist:
    """Angular-first body twist ``(omega, v)``."""

    omega: np.ndarray
    v: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.omega, float), np.asarray(self.v, float)])

    @staticmethod
    def from_array(arr: np.ndarray) -> "Twist":
        arr = np.asarray(arr, dtype=float)
        return Twist(omega=arr[:3].copy(), v=arr[3:].copy())


@dataclass(frozen=True)
class Wrench:
    """Torque-first body wrench ``(tau, f)`` about the frame origin."""

    tau: np.ndarray
    f: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.tau, float), np.asarray(self.f, float)])

    @staticmethod
    def from_array(arr: np.ndarray) -> "Wrench":
        arr = np.asarray(arr, dtype=float)
        return Wrench(tau=arr[:3].copy(), f=arr[3:].copy())
