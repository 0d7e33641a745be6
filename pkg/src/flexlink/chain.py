"""Serial-chain assembly: joints, constraint rows, saddle solve, integration.

The chain couples per-link dynamics (see :mod:`flexlink.dynamics`) through
ideal joints enforced as acceleration-level constraint rows with Baumgarte
stabilization.  The unknown vector of one solve is::

    u = [Vdot_0 (6), qddot_0 (n_0), Vdot_1 (6), qddot_1 (n_1), ..., lambda]

Joints lock translations between the (deformed) tip material point of the
parent and the base point of the child, plus a configurable set of inertial
rotation axes; motor rotor inertias appear as exact configuration-dependent
blocks on the rotational rows.  Multipliers enter every dynamics row through
the transposed constraint gradient, so constraint forces are workless at zero
residual by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beam import elastic_energy
from .dynamics import (
    LinkModel,
    LinkState,
    TORQUE_CURVATURE_SELECTOR,
    bias_H,
    link_kinetic_energy,
)
from .screw import body_jacobian_inv, exp_so3, skew

__all__ = [
    "MotorSpec",
    "JointSpec",
    "BaumgarteParams",
    "AppliedLoads",
    "SaddleSolution",
    "EnergyReport",
    "Chain",
    "NumericalBlowup",
    "actuation_loads",
]

_EYE3 = np.eye(3)


class NumericalBlowup(RuntimeError):
    """Raised when a solve or step produces non-finite state."""


@dataclass(frozen=True)
class MotorSpec:
    """A rotor spinning about a fixed inertial axis with the given inertia."""

    axis: int
    inertia: float

    @property
    def axis_vec(self) -> np.ndarray:
        return _EYE3[self.axis]


@dataclass
class JointSpec:
    """Connection of link ``child`` to ``parent`` (or the ground when None).

    ``locked_rot_axes`` are inertial axes along which the relative angular
    velocity must vanish.  With two locked axes the joint is a hinge about
    ``free_rot_axis`` and a small-tilt position residual is stabilized; with
    fewer locked axes the rotational constraint is velocity-level only (the
    reachable orientation set is not a submanifold).  ``anchor`` is the world
    position the child base point is pinned to for a ground joint.
    """

    child: int
    parent: int | None = None
    locked_rot_axes: tuple[int, ...] = ()
    free_rot_axis: int | None = None
    motors: tuple[MotorSpec, ...] = ()
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def n_rows(self) -> int:
        return len(self.locked_rot_axes) + 3


@dataclass(frozen=True)
class BaumgarteParams:
    """Constraint stabilization: residual dynamics ``c'' + 2 zeta w c' + w^2 c``.

    The pole must sit well below the first structural bending frequency:
    acceleration-level residual feedback is not passive, and a pole placed
    among the beam modes pumps them (energy growth, measured to blow up at
    ``frequency=50`` against ~37 rad/s first bending).  The default keeps a
    gentle in-step pull; drift removal is the job of the per-sample manifold
    projection (:func:`flexlink.fastpath.fast_project`).
    """

    frequency: float = 2.0
    damping: float = 1.0

    @property
    def velocity_gain(self) -> float:
        return 2.0 * self.damping * self.frequency

    @property
    def position_gain(self) -> float:
        return self.frequency**2


@dataclass
class AppliedLoads:
    """External loads per link: rigid wrench (link frame) and modal forces."""

    wrench: np.ndarray
    modal: list[np.ndarray]

    @classmethod
    def zero(cls, chain: "Chain") -> "AppliedLoads":
        return cls(
            wrench=np.zeros((chain.n_links, 6)),
            modal=[np.zeros(m.n_q) for m in chain.links],
        )

    def copy(self) -> "AppliedLoads":
        return AppliedLoads(self.wrench.copy(), [m.copy() for m in self.modal])


@dataclass
class SaddleSolution:
    """One constrained-dynamics solve."""

    vdot: np.ndarray  # (n_links, 6)
    qddot: list[np.ndarray]
    lam: np.ndarray
    rigid_gradient: np.ndarray  # (n_links, n_lambda, 6): constraint rows vs rigid cols
    lstsq_used: bool


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    motor_kinetic: float
    elastic: float
    gravity: float

    @property
    def total(self) -> float:
        return self.kinetic + self.motor_kinetic + self.elastic + self.gravity


class Chain:
    """Serial flexible chain with ideal joints and rotor inertias.

    ``gravity`` is the physical gravity acceleration in world coordinates
    (default zero); internally the equations carry its negative.
    """

    def __init__(
        self,
        links: list[LinkModel],
        joints: list[JointSpec],
        gravity: np.ndarray | None = None,
        baumgarte: BaumgarteParams | None = None,
    ):
        self.links = list(links)
        self.joints = list(joints)
        self.n_links = len(self.links)
        self.gravity = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=float)
        self.baumgarte = baumgarte or BaumgarteParams()

        for j in self.joints:
            if j.parent is not None and j.parent != j.child - 1:
                raise ValueError("chain joints must connect consecutive links")
            if len(j.locked_rot_axes) == 2 and j.free_rot_axis is None:
                raise ValueError("a two-axis rotational lock needs free_rot_axis")

        # layout offsets
        self.rigid_offset = []
        self.modal_offset = []
        off = 0
        for m in self.links:
            self.rigid_offset.append(off)
            self.modal_offset.append(off + 6)
            off += 6 + m.n_q
        self.n_dyn = off
        self.lam_offset = []
        n_lam = 0
        for j in self.joints:
            self.lam_offset.append(n_lam)
            n_lam += j.n_rows
        self.n_lambda = n_lam
        self.n_unknowns = self.n_dyn + n_lam
        self.state_dim = sum(12 + 2 * m.n_q for m in self.links)

    # -- state packing ------------------------------------------------------

    def pack(self, states: list[LinkState]) -> np.ndarray:
        parts = []
        for st in states:
            parts.extend([st.theta, st.r, st.omega, st.v, st.q, st.q_dot])
        return np.concatenate(parts)

    def unpack(self, y: np.ndarray) -> list[LinkState]:
        states = []
        k = 0
        for m in self.links:
            theta = y[k : k + 3]
            r = y[k + 3 : k + 6]
            omega = y[k + 6 : k + 9]
            v = y[k + 9 : k + 12]
            q = y[k + 12 : k + 12 + m.n_q]
            q_dot = y[k + 12 + m.n_q : k + 12 + 2 * m.n_q]
            states.append(
                LinkState(
                    theta=theta,
                    r=r,
                    omega=omega,
                    v=v,
                    q=q,
                    q_dot=q_dot,
                    rot=exp_so3(theta),
                )
            )
            k += 12 + 2 * m.n_q
        return states

    # -- joint geometry helpers ----------------------------------------------

    def _tip_point(self, i: int, states: list[LinkState]) -> np.ndarray:
        """Deformed tip material point of link i, link-frame coordinates."""
        m = self.links[i]
        return m.tip_rb + m.tip_deformation(states[i].q)

    def _tip_point_rate(self, i: int, states: list[LinkState]) -> np.ndarray:
        return self.links[i].tip_deformation_rate(states[i].q_dot)

    # -- assembly -------------------------------------------------------------

    def assemble(
        self, states: list[LinkState], loads: AppliedLoads
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Build the saddle system ``A u = b``.

        Returns ``(A, b, rigid_gradient)`` where ``rigid_gradient[i]`` is the
        (n_lambda, 6) block of constraint-row gradients against link i's
        rigid accelerations (used for interaction-wrench bookkeeping).
        """
        n = self.n_unknowns
        a_mat = np.zeros((n, n))
        b = np.zeros(n)
        grav_eq = -self.gravity  # equation-side gravity vector

        for i, m in enumerate(self.links):
            st = states[i]
            ro, mo = self.rigid_offset[i], self.modal_offset[i]
            rho = m.params.rho_a
            q, qd = st.q, st.q_dot
            w_mat = skew(st.omega)

            a_mat[ro : ro + 6, ro : ro + 6] = m.m6
            # distributed-inertia couplings on the rigid rows
            iq = m.deformation_moment(q)
            iqd = m.deformation_moment(qd)
            pair_qq = m.axis_pair_sum(q, q)
            pair_qqd = m.axis_pair_sum(q, qd)
            rot_wdot = np.zeros((3, 3))
            rot_qdd = np.zeros((3, m.n_q))
            d_const_rot = np.zeros(3)
            for k in range(m.n_q):
                e_k = m.axis_onehot[:, k]
                # both cross terms of -rho*integral(skew(r)skew(r)) linear in q:
                # the inertia correction must stay symmetric or energy leaks
                rot_wdot -= rho * q[k] * (m.sk1[k] @ skew(e_k) + skew(e_k) @ m.sk1[k])
                rot_qdd[:, k] = rho * (m.sk1[k] @ e_k)
                for j in range(m.n_q):
                    g = m.g0[j, k]
                    if g != 0.0:
                        rot_qdd[:, k] += rho * q[j] * g * np.cross(m.axis_onehot[:, j], e_k)
                d_const_rot += rho * qd[k] * (m.sk1[k] @ (w_mat @ e_k))
            for a_ax in range(3):
                ea = _EYE3[a_ax]
                for b_ax in range(3):
                    eb = _EYE3[b_ax]
                    if pair_qq[a_ax, b_ax] != 0.0:
                        rot_wdot -= rho * pair_qq[a_ax, b_ax] * (skew(ea) @ skew(eb))
                    if pair_qqd[a_ax, b_ax] != 0.0:
                        d_const_rot += rho * pair_qqd[a_ax, b_ax] * np.cross(ea, w_mat @ eb)
            a_mat[ro : ro + 3, ro : ro + 3] += rot_wdot
            # deformed first moment couples both ways (transpose pair)
            a_mat[ro : ro + 3, ro + 3 : ro + 6] += rho * skew(iq)
            a_mat[ro + 3 : ro + 6, ro : ro + 3] += -rho * skew(iq)
            if m.n_q:
                a_mat[ro : ro + 3, mo : mo + m.n_q] = rot_qdd
                a_mat[ro + 3 : ro + 6, mo : mo + m.n_q] = rho * (
                    m.axis_onehot * m.f0[None, :]
                )
            d_const = np.concatenate([d_const_rot, rho * (w_mat @ iqd)])

            h_vec = bias_H(m, st, grav_eq if np.any(grav_eq) else None)
            b[ro : ro + 6] = loads.wrench[i] - h_vec - d_const

            # modal rows
            if m.n_q:
                a_mat[mo : mo + m.n_q, mo : mo + m.n_q] = np.eye(m.n_q)
                # symmetric coupling to rigid accelerations
                a_mat[mo : mo + m.n_q, ro : ro + 3] = rot_qdd.T
                a_mat[mo : mo + m.n_q, ro + 3 : ro + 6] = (
                    rho * (m.axis_onehot * m.f0[None, :])
                ).T
                grav_body = st.rot.T @ grav_eq
                bias_q = np.zeros(m.n_q)
                for j in range(m.n_q):
                    e_j = m.axis_onehot[:, j]
                    rb_j = m.f1[j] * np.array([1.0, 0.0, 0.0]) + m.f0[j] * np.array(
                        [0.0, m.params.offset_y, m.params.offset_z]
                    )
                    acc = m.f0[j] * float(e_j @ (w_mat @ st.v)) + float(
                        e_j @ (w_mat @ (w_mat @ rb_j))
                    )
                    for k in range(m.n_q):
                        g = m.g0[j, k]
                        if g == 0.0:
                            continue
                        acc += g * q[k] * float(e_j @ (w_mat @ (w_mat @ m.axis_onehot[:, k])))
                        acc += 2.0 * g * qd[k] * float(e_j @ (w_mat @ m.axis_onehot[:, k]))
                    bias_q[j] = rho * acc + rho * m.f0[j] * float(e_j @ grav_body)
                    # modal stiffness (exactly omega_j^2 q_j for same-axis orthonormal modes)
                    stiff = 0.0
                    for k in range(m.n_q):
                        if m.basis.axis[k] == m.basis.axis[j]:
                            stiff -= m.g0[j, k] * m.eta[k] * q[k]
                    bias_q[j] += stiff
                b[mo : mo + m.n_q] = loads.modal[i] - bias_q

        self._add_constraints(a_mat, b, states)
        self._add_motor_blocks(a_mat, states)

        rigid_gradient = np.zeros((self.n_links, self.n_lambda, 6))
        crow0 = self.n_dyn
        for i in range(self.n_links):
            ro = self.rigid_offset[i]
            rigid_gradient[i] = a_mat[crow0 : crow0 + self.n_lambda, ro : ro + 6]
        return a_mat, b, rigid_gradient

    def _add_constraints(self, a_mat: np.ndarray, b: np.ndarray, states: list[LinkState]):
        kv = self.baumgarte.velocity_gain
        kp = self.baumgarte.position_gain
        for jn, joint in enumerate(self.joints):
            row0 = self.n_dyn + self.lam_offset[jn]
            c = joint.child
            st_c = states[c]
            r_c = st_c.rot
            ro_c = self.rigid_offset[c]
            p_bc = self.links[c].base_rb
            has_parent = joint.parent is not None
            if has_parent:
                p = joint.parent
                st_p = states[p]
                r_p = st_p.rot
                ro_p = self.rigid_offset[p]
                mo_p = self.modal_offset[p]
                m_p = self.links[p]
                p_tp = self._tip_point(p, states)
                tip_rate = self._tip_point_rate(p, states)
                w_p = skew(st_p.omega)

            # rotational rows
            for a_idx, ax in enumerate(joint.locked_rot_axes):
                row = row0 + a_idx
                e_a = _EYE3[ax]
                a_mat[row, ro_c : ro_c + 3] = e_a @ r_c
                vel_res = float(e_a @ (r_c @ st_c.omega))
                if has_parent:
                    a_mat[row, ro_p : ro_p + 3] = -(e_a @ r_p)
                    vel_res -= float(e_a @ (r_p @ st_p.omega))
                b[row] = -kv * vel_res
                if has_parent and len(joint.locked_rot_axes) == 2:
                    e_f = _EYE3[joint.free_rot_axis]
                    q_rel = r_c @ r_p.T
                    tilt = float(e_a @ np.cross(e_f, q_rel @ e_f))
                    b[row] -= kp * tilt

            # translational rows
            row = slice(row0 + len(joint.locked_rot_axes), row0 + joint.n_rows)
            a_mat[row, ro_c + 3 : ro_c + 6] = r_c
            a_mat[row, ro_c : ro_c + 3] = -r_c @ skew(p_bc)
            w_c = skew(st_c.omega)
            bias = r_c @ (w_c @ (st_c.v + w_c @ p_bc))
            vel_res = r_c @ (st_c.v + w_c @ p_bc)
            pos_res = r_c @ (st_c.r + p_bc) - joint.anchor
            if has_parent:
                a_mat[row, ro_p + 3 : ro_p + 6] = -r_p
                a_mat[row, ro_p : ro_p + 3] = r_p @ skew(p_tp)
                if m_p.n_q:
                    a_mat[row, mo_p : mo_p + m_p.n_q] = -(r_p @ m_p.tip_phi)
                bias -= r_p @ (w_p @ (st_p.v + w_p @ p_tp + 2.0 * tip_rate))
                vel_res -= r_p @ (st_p.v + w_p @ p_tp + tip_rate)
                pos_res = r_c @ (st_c.r + p_bc) - r_p @ (st_p.r + p_tp)
            b[row] = -(bias + kv * vel_res + kp * pos_res)

        # multiplier columns: minus transposed gradients on the dynamics rows
        crow0 = self.n_dyn
        if self.n_lambda:
            g_block = a_mat[crow0 : crow0 + self.n_lambda, : self.n_dyn]
            a_mat[: self.n_dyn, crow0 : crow0 + self.n_lambda] = -g_block.T

    def _add_motor_blocks(self, a_mat: np.ndarray, states: list[LinkState]):
        for joint in self.joints:
            c = joint.child
            r_c = states[c].rot
            ro_c = self.rigid_offset[c]
            if joint.parent is not None:
                r_p = states[joint.parent].rot
                ro_p = self.rigid_offset[joint.parent]
            for motor in joint.motors:
                e_m = motor.axis_vec
                a_c = r_c.T @ e_m
                blk_cc = motor.inertia * np.outer(a_c, a_c)
                a_mat[ro_c : ro_c + 3, ro_c : ro_c + 3] += blk_cc
                if joint.parent is not None:
                    a_p = r_p.T @ e_m
                    a_mat[ro_p : ro_p + 3, ro_p : ro_p + 3] += motor.inertia * np.outer(
                        a_p, a_p
                    )
                    a_mat[ro_p : ro_p + 3, ro_c : ro_c + 3] -= motor.inertia * np.outer(
                        a_p, a_c
                    )
                    a_mat[ro_c : ro_c + 3, ro_p : ro_p + 3] -= motor.inertia * np.outer(
                        a_c, a_p
                    )

    # -- solve / step ---------------------------------------------------------

    def solve(self, states: list[LinkState], loads: AppliedLoads) -> SaddleSolution:
        a_mat, b, rigid_gradient = self.assemble(states, loads)
        if not (np.all(np.isfinite(a_mat)) and np.all(np.isfinite(b))):
            raise NumericalBlowup("constrained solve received non-finite terms")
        lstsq_used = False
        try:
            u = np.linalg.solve(a_mat, b)
            if not np.all(np.isfinite(u)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            u, *_ = np.linalg.lstsq(a_mat, b, rcond=None)
            lstsq_used = True
        if not np.all(np.isfinite(u)):
            raise NumericalBlowup("constrained solve produced non-finite accelerations")
        vdot = np.zeros((self.n_links, 6))
        qddot = []
        for i, m in enumerate(self.links):
            ro, mo = self.rigid_offset[i], self.modal_offset[i]
            vdot[i] = u[ro : ro + 6]
            qddot.append(u[mo : mo + m.n_q].copy())
        lam = u[self.n_dyn :].copy()
        return SaddleSolution(vdot, qddot, lam, rigid_gradient, lstsq_used)

    def rhs(self, y: np.ndarray, loads: AppliedLoads) -> np.ndarray:
        states = self.unpack(y)
        sol = self.solve(states, loads)
        out = np.zeros_like(y)
        k = 0
        for i, m in enumerate(self.links):
            st = states[i]
            out[k : k + 3] = body_jacobian_inv(st.theta) @ st.omega
            out[k + 3 : k + 6] = st.v - np.cross(st.omega, st.r)
            out[k + 6 : k + 9] = sol.vdot[i, :3]
            out[k + 9 : k + 12] = sol.vdot[i, 3:]
            out[k + 12 : k + 12 + m.n_q] = st.q_dot
            out[k + 12 + m.n_q : k + 12 + 2 * m.n_q] = sol.qddot[i]
            k += 12 + 2 * m.n_q
        return out

    def step_rk4(self, y: np.ndarray, loads: AppliedLoads, dt: float, substeps: int = 1):
        """Advance the state by ``dt`` with ``substeps`` classical RK4 stages.

        Loads are held constant across the step (zero-order hold).
        """
        h = dt / substeps
        for _ in range(substeps):
            k1 = self.rhs(y, loads)
            k2 = self.rhs(y + 0.5 * h * k1, loads)
            k3 = self.rhs(y + 0.5 * h * k2, loads)
            k4 = self.rhs(y + h * k3, loads)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NumericalBlowup("integration produced non-finite state")
        return y

    # -- diagnostics ----------------------------------------------------------

    def constraint_residuals(self, states: list[LinkState]) -> tuple[np.ndarray, np.ndarray]:
        """Velocity- and position-level joint residuals, aligned with lambda rows.

        Rows without a position-level quantity (single-axis rotational locks)
        report zero in the position slot.
        """
        vel = np.zeros(self.n_lambda)
        pos = np.zeros(self.n_lambda)
        for jn, joint in enumerate(self.joints):
            row0 = self.lam_offset[jn]
            c = joint.child
            st_c = states[c]
            r_c = st_c.rot
            p_bc = self.links[c].base_rb
            has_parent = joint.parent is not None
            if has_parent:
                p = joint.parent
                st_p = states[p]
                r_p = st_p.rot
                p_tp = self._tip_point(p, states)
                tip_rate = self._tip_point_rate(p, states)
            for a_idx, ax in enumerate(joint.locked_rot_axes):
                e_a = _EYE3[ax]
                val = float(e_a @ (r_c @ st_c.omega))
                if has_parent:
                    val -= float(e_a @ (r_p @ st_p.omega))
                vel[row0 + a_idx] = val
                if has_parent and len(joint.locked_rot_axes) == 2:
                    e_f = _EYE3[joint.free_rot_axis]
                    q_rel = r_c @ r_p.T
                    pos[row0 + a_idx] = float(e_a @ np.cross(e_f, q_rel @ e_f))
            sl = slice(row0 + len(joint.locked_rot_axes), row0 + joint.n_rows)
            v_res = r_c @ (st_c.v + np.cross(st_c.omega, p_bc))
            p_res = r_c @ (st_c.r + p_bc) - joint.anchor
            if has_parent:
                v_res = v_res - r_p @ (st_p.v + np.cross(st_p.omega, p_tp) + tip_rate)
                p_res = r_c @ (st_c.r + p_bc) - r_p @ (st_p.r + p_tp)
            vel[sl] = v_res
            pos[sl] = p_res
        return vel, pos

    def consistent_states(
        self,
        theta: list[np.ndarray],
        omega: list[np.ndarray],
        q: list[np.ndarray] | None = None,
        q_dot: list[np.ndarray] | None = None,
    ) -> list[LinkState]:
        """Build link states with joint residuals exactly zero.

        Given per-link orientations, angular velocities, and modal
        coordinates, the positions and linear velocities are derived by
        pinning each ground-jointed link's base to its anchor and each child
        link's base to the parent's deformed tip material point.  Angular
        velocities are taken as given; callers are responsible for honoring
        rotational locks.
        """
        q = [np.zeros(m.n_q) for m in self.links] if q is None else q
        q_dot = [np.zeros(m.n_q) for m in self.links] if q_dot is None else q_dot
        joint_of = {j.child: j for j in self.joints}
        states: list[LinkState] = []
        for i, m in enumerate(self.links):
            rot = exp_so3(np.asarray(theta[i], dtype=float))
            w = np.asarray(omega[i], dtype=float)
            qi = np.asarray(q[i], dtype=float)
            qdi = np.asarray(q_dot[i], dtype=float)
            joint = joint_of.get(i)
            if joint is None:
                r = np.zeros(3)
                v = np.zeros(3)
            elif joint.parent is None:
                r = rot.T @ joint.anchor - m.base_rb
                v = -np.cross(w, m.base_rb)
            else:
                p = joint.parent
                st_p = states[p]
                m_p = self.links[p]
                p_tp = m_p.tip_rb + m_p.tip_deformation(st_p.q)
                tip_rate = m_p.tip_deformation_rate(st_p.q_dot)
                world_pos = st_p.rot @ (st_p.r + p_tp)
                world_vel = st_p.rot @ (st_p.v + np.cross(st_p.omega, p_tp) + tip_rate)
                r = rot.T @ world_pos - m.base_rb
                v = rot.T @ world_vel - np.cross(w, m.base_rb)
            states.append(
                LinkState(
                    theta=np.asarray(theta[i], dtype=float),
                    r=r,
                    omega=w,
                    v=v,
                    q=qi,
                    q_dot=qdi,
                    rot=rot,
                )
            )
        return states

    def link_joint_wrenches(self, sol: SaddleSolution) -> np.ndarray:
        """Per-link total joint wrench as it appears on the equation left side.

        Equal to minus the generalized constraint force, so the rigid rows
        read ``M Vdot + D + H + W_joint = W_applied``.
        """
        out = np.zeros((self.n_links, 6))
        for i in range(self.n_links):
            out[i] = -sol.rigid_gradient[i].T @ sol.lam
        return out

    def energy(self, states: list[LinkState]) -> EnergyReport:
        kinetic = 0.0
        elastic = 0.0
        gravity_pot = 0.0
        for i, m in enumerate(self.links):
            st = states[i]
            kinetic += link_kinetic_energy(m, st)
            elastic += elastic_energy(m.basis, st.q, np.zeros(m.n_q))
            rho = m.params.rho_a
            com_int = m.mass * st.r + m.first_moment + rho * m.deformation_moment(st.q)
            gravity_pot -= float(self.gravity @ (st.rot @ com_int))
        motor = 0.0
        for joint in self.joints:
            w_c = states[joint.child].rot @ states[joint.child].omega
            w_rel = w_c.copy()
            if joint.parent is not None:
                w_rel -= states[joint.parent].rot @ states[joint.parent].omega
            for m in joint.motors:
                motor += 0.5 * m.inertia * float(m.axis_vec @ w_rel) ** 2
        return EnergyReport(kinetic, motor, elastic, gravity_pot)


def actuation_loads(
    chain: Chain, states: list[LinkState], torques: list[np.ndarray]
) -> AppliedLoads:
    """Route motor torques into link loads.

    ``torques[j][k]`` drives motor k of joint j about its inertial axis.  The
    rotor side torques the child link at its base; the stator reaction acts on
    the parent (when there is one) at the deformed tip section, entering both
    the rigid rotational row and, through the tip slope shapes, the modal
    forces.
    """
    loads = AppliedLoads.zero(chain)
    for jn, joint in enumerate(chain.joints):
        tq = np.atleast_1d(np.asarray(torques[jn], dtype=float))
        if tq.size != len(joint.motors):
            raise ValueError(f"joint {jn} expects {len(joint.motors)} torques, got {tq.size}")
        for motor, u in zip(joint.motors, tq):
            world_torque = u * motor.axis_vec
            c = joint.child
            loads.wrench[c][:3] += states[c].rot.T @ world_torque
            if joint.parent is not None:
                p = joint.parent
                m_p = chain.links[p]
                body_torque = states[p].rot.T @ world_torque
                loads.wrench[p][:3] -= body_torque
                if m_p.n_q:
                    loads.modal[p] -= m_p.tip_phi_slope.T @ (
                        TORQUE_CURVATURE_SELECTOR @ body_torque
                    )
    return loads
