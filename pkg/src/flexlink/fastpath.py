"""Compiled hot path for chain integration.

Mirrors :class:`flexlink.chain.Chain` assembly, solve, and RK4 stepping as a
set of numba-jitted kernels over flat arrays.  The numpy implementation in
``chain.py`` remains the readable reference; the test suite cross-checks the
two routes to near machine precision on random states.

Only stepping and the constrained solve live here — controllers, parameter
adaptation, and logging run at the slower control rate in plain numpy.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .chain import Chain, NumericalBlowup

__all__ = [
    "FastChain",
    "build_fast_chain",
    "fast_assemble",
    "fast_project",
    "fast_rhs",
    "fast_solve",
    "fast_step",
]


def _skew_np(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


# cross(e_a, e_b), skew(e_a), and skew(e_a) @ skew(e_b) lookup tables; global
# numpy arrays are frozen as read-only constants inside the jitted kernels.
_EYE = np.eye(3)
G_SKEW = np.stack([_skew_np(_EYE[a]) for a in range(3)])
G_CROSS = np.stack([[np.cross(_EYE[a], _EYE[b]) for b in range(3)] for a in range(3)])
G_SKEW2 = np.stack([[G_SKEW[a] @ G_SKEW[b] for b in range(3)] for a in range(3)])


class FastChain:
    """Flat-array snapshot of a :class:`Chain` consumed by the jitted kernels."""

    def __init__(self, chain: Chain):
        self.chain = chain
        links = chain.links
        n_links = len(links)
        max_nq = max((m.n_q for m in links), default=0)
        max_nq = max(max_nq, 1)

        self.n_q = np.array([m.n_q for m in links], dtype=np.int64)
        self.mass = np.array([m.mass for m in links])
        self.rho = np.array([m.params.rho_a for m in links])
        self.length = np.array([m.params.length for m in links])
        self.offset = np.array(
            [[0.0, m.params.offset_y, m.params.offset_z] for m in links]
        )
        self.first_moment = np.array([m.first_moment for m in links])
        self.rotary_inertia = np.array([m.rotary_inertia for m in links])
        self.m6 = np.array([m.m6 for m in links])
        self.f0 = np.zeros((n_links, max_nq))
        self.f1 = np.zeros((n_links, max_nq))
        self.eta = np.zeros((n_links, max_nq))
        self.g0 = np.zeros((n_links, max_nq, max_nq))
        self.sk1 = np.zeros((n_links, max_nq, 3, 3))
        self.axis = np.zeros((n_links, max_nq), dtype=np.int64)
        self.tip_phi = np.zeros((n_links, 3, max_nq))
        self.tip_phi_slope = np.zeros((n_links, 3, max_nq))
        self.tip_rb = np.array([m.tip_rb for m in links])
        self.base_rb = np.array([m.base_rb for m in links])
        for i, m in enumerate(links):
            nq = m.n_q
            if nq:
                self.f0[i, :nq] = m.f0
                self.f1[i, :nq] = m.f1
                self.eta[i, :nq] = m.eta
                self.g0[i, :nq, :nq] = m.g0
                self.sk1[i, :nq] = m.sk1
                self.axis[i, :nq] = m.basis.axis
                self.tip_phi[i, :, :nq] = m.tip_phi
                self.tip_phi_slope[i, :, :nq] = m.tip_phi_slope

        self.rigid_offset = np.array(chain.rigid_offset, dtype=np.int64)
        self.modal_offset = np.array(chain.modal_offset, dtype=np.int64)
        state_off = []
        off = 0
        for m in links:
            state_off.append(off)
            off += 12 + 2 * m.n_q
        self.state_offset = np.array(state_off, dtype=np.int64)
        self.state_dim = chain.state_dim
        self.n_dyn = chain.n_dyn
        self.n_lambda = chain.n_lambda
        self.n_unknowns = chain.n_unknowns

        joints = chain.joints
        n_j = len(joints)
        self.j_child = np.array([j.child for j in joints], dtype=np.int64)
        self.j_parent = np.array(
            [-1 if j.parent is None else j.parent for j in joints], dtype=np.int64
        )
        self.j_nlock = np.array([len(j.locked_rot_axes) for j in joints], dtype=np.int64)
        self.j_locked = np.zeros((n_j, 3), dtype=np.int64)
        self.j_free = np.zeros(n_j, dtype=np.int64)
        self.j_anchor = np.zeros((n_j, 3))
        self.j_lam_offset = np.array(chain.lam_offset, dtype=np.int64)
        for k, j in enumerate(joints):
            for a, ax in enumerate(j.locked_rot_axes):
                self.j_locked[k, a] = ax
            self.j_free[k] = -1 if j.free_rot_axis is None else j.free_rot_axis
            self.j_anchor[k] = j.anchor
        motors = []
        for k, j in enumerate(joints):
            for mt in j.motors:
                motors.append((k, mt.axis, mt.inertia))
        self.m_joint = np.array([m[0] for m in motors], dtype=np.int64)
        self.m_axis = np.array([m[1] for m in motors], dtype=np.int64)
        self.m_inertia = np.array([m[2] for m in motors])

        self.kv = chain.baumgarte.velocity_gain
        self.kp = chain.baumgarte.position_gain
        self.gravity = chain.gravity.copy()

        # constant per-mode aggregates used by the scalar assembly loops
        self.col0 = np.zeros((n_links, max_nq, 3))  # rho * sk1[k] @ e_axis
        # symmetrized cross terms sk1[k]@skew(e) + skew(e)@sk1[k]: the q-linear
        # inertia correction (must stay symmetric or energy leaks)
        self.sk1sk = np.zeros((n_links, max_nq, 3, 3))
        self.rb_mode = np.zeros((n_links, max_nq, 3))  # f1[k] e_x + f0[k] offset
        eye = np.eye(3)
        for i, m in enumerate(links):
            for k in range(m.n_q):
                e_k = eye[m.basis.axis[k]]
                self.col0[i, k] = m.params.rho_a * (m.sk1[k] @ e_k)
                sk_e = _skew_np(e_k)
                self.sk1sk[i, k] = m.sk1[k] @ sk_e + sk_e @ m.sk1[k]
                self.rb_mode[i, k] = m.f1[k] * eye[0] + m.f0[k] * self.offset[i]

    def as_args(self) -> tuple:
        return (
            self.n_q,
            self.mass,
            self.rho,
            self.length,
            self.offset,
            self.first_moment,
            self.rotary_inertia,
            self.m6,
            self.f0,
            self.f1,
            self.eta,
            self.g0,
            self.sk1,
            self.axis,
            self.tip_phi,
            self.tip_phi_slope,
            self.tip_rb,
            self.base_rb,
            self.rigid_offset,
            self.modal_offset,
            self.state_offset,
            self.n_dyn,
            self.n_lambda,
            self.n_unknowns,
            self.j_child,
            self.j_parent,
            self.j_nlock,
            self.j_locked,
            self.j_free,
            self.j_anchor,
            self.j_lam_offset,
            self.m_joint,
            self.m_axis,
            self.m_inertia,
            self.kv,
            self.kp,
            self.gravity,
            self.col0,
            self.sk1sk,
            self.rb_mode,
        )


def build_fast_chain(chain: Chain) -> FastChain:
    return FastChain(chain)


@njit(cache=True)
def _skew_mat(v):
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _exp_so3(theta):
    t2 = theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]
    t = np.sqrt(t2)
    k = _skew_mat(theta)
    k2 = k @ k
    if t < 1e-6:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
    else:
        a = np.sin(t) / t
        b = (1.0 - np.cos(t)) / t2
    return np.eye(3) + a * k + b * k2


@njit(cache=True)
def _body_jacobian_inv(theta):
    t2 = theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]
    t = np.sqrt(t2)
    k = _skew_mat(theta)
    k2 = k @ k
    if t < 1e-6:
        c = 1.0 / 12.0 + t2 / 720.0
    else:
        c = (1.0 / t2) - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t))
    return np.eye(3) + 0.5 * k + c * k2


@njit(cache=True)
def _unit(ax):
    e = np.zeros(3)
    e[ax] = 1.0
    return e


@njit(cache=True)
def _assemble(
    y,
    wrench,
    modal,
    # link data
    n_q,
    mass,
    rho_arr,
    length,
    offset,
    first_moment,
    rotary_inertia,
    m6,
    f0,
    f1,
    eta,
    g0,
    sk1,
    axis,
    tip_phi,
    tip_phi_slope,
    tip_rb,
    base_rb,
    rigid_offset,
    modal_offset,
    state_offset,
    n_dyn,
    n_lambda,
    n_unknowns,
    j_child,
    j_parent,
    j_nlock,
    j_locked,
    j_free,
    j_anchor,
    j_lam_offset,
    m_joint,
    m_axis,
    m_inertia,
    kv,
    kp,
    gravity,
    col0,
    sk1sk,
    rb_mode,
):
    n_links = n_q.shape[0]
    a_mat = np.zeros((n_unknowns, n_unknowns))
    b = np.zeros(n_unknowns)
    grav_eq = -gravity

    # cache rotations
    rots = np.zeros((n_links, 3, 3))
    for i in range(n_links):
        so = state_offset[i]
        rots[i] = _exp_so3(y[so : so + 3])

    # scratch reused across links
    w_mat = np.zeros((3, 3))
    ww = np.zeros((3, 3))
    pair_qq = np.zeros((3, 3))
    pair_qqd = np.zeros((3, 3))
    rot_wdot = np.zeros((3, 3))
    iq = np.zeros(3)
    iqd = np.zeros(3)
    wv = np.zeros(3)
    wwoff = np.zeros(3)
    grav_body = np.zeros(3)
    d_const_rot = np.zeros(3)
    h_rot = np.zeros(3)
    h_trans = np.zeros(3)
    col = np.zeros(3)
    tvec = np.zeros(3)

    for i in range(n_links):
        so = state_offset[i]
        nq = n_q[i]
        omega = y[so + 6 : so + 9]
        v = y[so + 9 : so + 12]
        q = y[so + 12 : so + 12 + nq]
        qd = y[so + 12 + nq : so + 12 + 2 * nq]
        rot = rots[i]
        ro = rigid_offset[i]
        mo = modal_offset[i]
        rho = rho_arr[i]

        # velocity tables: w_mat column a is (omega x e_a); ww = w_mat @ w_mat
        w_mat[0, 0] = 0.0
        w_mat[0, 1] = -omega[2]
        w_mat[0, 2] = omega[1]
        w_mat[1, 0] = omega[2]
        w_mat[1, 1] = 0.0
        w_mat[1, 2] = -omega[0]
        w_mat[2, 0] = -omega[1]
        w_mat[2, 1] = omega[0]
        w_mat[2, 2] = 0.0
        for a in range(3):
            wv[a] = w_mat[a, 0] * v[0] + w_mat[a, 1] * v[1] + w_mat[a, 2] * v[2]
            for c in range(3):
                ww[a, c] = (
                    w_mat[a, 0] * w_mat[0, c]
                    + w_mat[a, 1] * w_mat[1, c]
                    + w_mat[a, 2] * w_mat[2, c]
                )
        for a in range(3):
            wwoff[a] = (
                ww[a, 0] * offset[i, 0] + ww[a, 1] * offset[i, 1] + ww[a, 2] * offset[i, 2]
            )
            grav_body[a] = (
                rot[0, a] * grav_eq[0] + rot[1, a] * grav_eq[1] + rot[2, a] * grav_eq[2]
            )

        for a in range(6):
            for c in range(6):
                a_mat[ro + a, ro + c] = m6[i, a, c]

        # deformation aggregates
        for a in range(3):
            iq[a] = 0.0
            iqd[a] = 0.0
            for c in range(3):
                pair_qq[a, c] = 0.0
                pair_qqd[a, c] = 0.0
                rot_wdot[a, c] = 0.0
            d_const_rot[a] = 0.0
        for k in range(nq):
            ax = axis[i, k]
            iq[ax] += f0[i, k] * q[k]
            iqd[ax] += f0[i, k] * qd[k]
        for j in range(nq):
            aj = axis[i, j]
            for k in range(nq):
                g = g0[i, j, k]
                if g != 0.0:
                    ak = axis[i, k]
                    pair_qq[aj, ak] += q[j] * g * q[k]
                    pair_qqd[aj, ak] += q[j] * g * qd[k]

        for k in range(nq):
            ax = axis[i, k]
            sq = rho * q[k]
            sqd = rho * qd[k]
            # rot_wdot -= rho q_k (sk1[k] @ skew(e_k)); d_const += rho qd_k sk1[k] @ w e_k
            for a in range(3):
                for c in range(3):
                    rot_wdot[a, c] -= sq * sk1sk[i, k, a, c]
                d_const_rot[a] += sqd * (
                    sk1[i, k, a, 0] * w_mat[0, ax]
                    + sk1[i, k, a, 1] * w_mat[1, ax]
                    + sk1[i, k, a, 2] * w_mat[2, ax]
                )
            # modal column on the rotational rows
            for a in range(3):
                col[a] = col0[i, k, a]
            for j in range(nq):
                g = g0[i, j, k]
                if g != 0.0:
                    s = rho * q[j] * g
                    aj = axis[i, j]
                    col[0] += s * G_CROSS[aj, ax, 0]
                    col[1] += s * G_CROSS[aj, ax, 1]
                    col[2] += s * G_CROSS[aj, ax, 2]
            for a in range(3):
                a_mat[ro + a, mo + k] = col[a]
                a_mat[mo + k, ro + a] = col[a]
        for a_ax in range(3):
            for b_ax in range(3):
                pq = pair_qq[a_ax, b_ax]
                pqd = pair_qqd[a_ax, b_ax]
                if pq != 0.0:
                    s = rho * pq
                    for a in range(3):
                        for c in range(3):
                            rot_wdot[a, c] -= s * G_SKEW2[a_ax, b_ax, a, c]
                if pqd != 0.0:
                    s = rho * pqd
                    for a in range(3):
                        d_const_rot[a] += s * (
                            G_SKEW[a_ax, a, 0] * w_mat[0, b_ax]
                            + G_SKEW[a_ax, a, 1] * w_mat[1, b_ax]
                            + G_SKEW[a_ax, a, 2] * w_mat[2, b_ax]
                        )
        for a in range(3):
            for c in range(3):
                a_mat[ro + a, ro + c] += rot_wdot[a, c]
        # -rho skew(iq) on the translational/angular-acceleration block and its
        # transpose +rho skew(iq) on the rotational/linear-acceleration block
        a_mat[ro + 3 + 0, ro + 1] += rho * iq[2]
        a_mat[ro + 3 + 0, ro + 2] -= rho * iq[1]
        a_mat[ro + 3 + 1, ro + 0] -= rho * iq[2]
        a_mat[ro + 3 + 1, ro + 2] += rho * iq[0]
        a_mat[ro + 3 + 2, ro + 0] += rho * iq[1]
        a_mat[ro + 3 + 2, ro + 1] -= rho * iq[0]
        a_mat[ro + 0, ro + 3 + 1] -= rho * iq[2]
        a_mat[ro + 0, ro + 3 + 2] += rho * iq[1]
        a_mat[ro + 1, ro + 3 + 0] += rho * iq[2]
        a_mat[ro + 1, ro + 3 + 2] -= rho * iq[0]
        a_mat[ro + 2, ro + 3 + 0] -= rho * iq[1]
        a_mat[ro + 2, ro + 3 + 1] += rho * iq[0]
        for k in range(nq):
            val = rho * f0[i, k]
            ax = axis[i, k]
            a_mat[ro + 3 + ax, mo + k] = val
            a_mat[mo + k, ro + 3 + ax] = val

        # bias H + velocity part of the distributed inertia
        for a in range(3):
            sb_a = first_moment[i, a] / rho
            h_rot[a] = 0.0
            h_trans[a] = rho * length[i] * wv[a] + mass[i] * grav_body[a]
            tvec[a] = sb_a + iq[a]
        # h_trans += rho ( ww @ (sb+iq) + w @ iqd ); reuse tvec = sb + iq
        for a in range(3):
            h_trans[a] += rho * (
                ww[a, 0] * tvec[0]
                + ww[a, 1] * tvec[1]
                + ww[a, 2] * tvec[2]
                + w_mat[a, 0] * iqd[0]
                + w_mat[a, 1] * iqd[1]
                + w_mat[a, 2] * iqd[2]
            )
        # h_rot = rho (sb+iq) x wv + w x (I_b w) + rho (sb+iq) x grav
        for a in range(3):
            col[a] = (
                rotary_inertia[i, a, 0] * omega[0]
                + rotary_inertia[i, a, 1] * omega[1]
                + rotary_inertia[i, a, 2] * omega[2]
            )
        h_rot[0] += rho * (tvec[1] * wv[2] - tvec[2] * wv[1]) + (
            omega[1] * col[2] - omega[2] * col[1]
        )
        h_rot[1] += rho * (tvec[2] * wv[0] - tvec[0] * wv[2]) + (
            omega[2] * col[0] - omega[0] * col[2]
        )
        h_rot[2] += rho * (tvec[0] * wv[1] - tvec[1] * wv[0]) + (
            omega[0] * col[1] - omega[1] * col[0]
        )
        h_rot[0] += rho * (tvec[1] * grav_body[2] - tvec[2] * grav_body[1])
        h_rot[1] += rho * (tvec[2] * grav_body[0] - tvec[0] * grav_body[2])
        h_rot[2] += rho * (tvec[0] * grav_body[1] - tvec[1] * grav_body[0])
        for k in range(nq):
            ax = axis[i, k]
            sq = rho * q[k]
            sqd = rho * qd[k]
            # u = w(w rb_k) = f1 ww[:,0] + f0 ww@off
            u0 = f1[i, k] * ww[0, 0] + f0[i, k] * wwoff[0]
            u1 = f1[i, k] * ww[1, 0] + f0[i, k] * wwoff[1]
            u2 = f1[i, k] * ww[2, 0] + f0[i, k] * wwoff[2]
            for a in range(3):
                h_rot[a] += sq * (
                    sk1[i, k, a, 0] * ww[0, ax]
                    + sk1[i, k, a, 1] * ww[1, ax]
                    + sk1[i, k, a, 2] * ww[2, ax]
                )
                h_rot[a] += sqd * (
                    sk1[i, k, a, 0] * w_mat[0, ax]
                    + sk1[i, k, a, 1] * w_mat[1, ax]
                    + sk1[i, k, a, 2] * w_mat[2, ax]
                )
                # e_k x u
                h_rot[a] += sq * (
                    G_SKEW[ax, a, 0] * u0 + G_SKEW[ax, a, 1] * u1 + G_SKEW[ax, a, 2] * u2
                )
        for a_ax in range(3):
            for b_ax in range(3):
                pq = pair_qq[a_ax, b_ax]
                pqd = pair_qqd[a_ax, b_ax]
                if pq != 0.0:
                    s = rho * pq
                    for a in range(3):
                        h_rot[a] += s * (
                            G_SKEW[a_ax, a, 0] * ww[0, b_ax]
                            + G_SKEW[a_ax, a, 1] * ww[1, b_ax]
                            + G_SKEW[a_ax, a, 2] * ww[2, b_ax]
                        )
                if pqd != 0.0:
                    s = rho * pqd
                    for a in range(3):
                        h_rot[a] += s * (
                            G_SKEW[a_ax, a, 0] * w_mat[0, b_ax]
                            + G_SKEW[a_ax, a, 1] * w_mat[1, b_ax]
                            + G_SKEW[a_ax, a, 2] * w_mat[2, b_ax]
                        )
        for a in range(3):
            b[ro + a] = wrench[i, a] - h_rot[a] - d_const_rot[a]
            # velocity part of D on the translational rows: rho (w @ iqd)
            d_tr = rho * (
                w_mat[a, 0] * iqd[0] + w_mat[a, 1] * iqd[1] + w_mat[a, 2] * iqd[2]
            )
            b[ro + 3 + a] = wrench[i, 3 + a] - h_trans[a] - d_tr

        # modal rows
        for j in range(nq):
            a_mat[mo + j, mo + j] = 1.0
            aj = axis[i, j]
            acc = f0[i, j] * wv[aj] + f1[i, j] * ww[aj, 0] + f0[i, j] * wwoff[aj]
            for k in range(nq):
                g = g0[i, j, k]
                if g == 0.0:
                    continue
                ak = axis[i, k]
                acc += g * q[k] * ww[aj, ak] + 2.0 * g * qd[k] * w_mat[aj, ak]
            bias_q = rho * acc + rho * f0[i, j] * grav_body[aj]
            for k in range(nq):
                if axis[i, k] == aj:
                    bias_q -= g0[i, j, k] * eta[i, k] * q[k]
            b[mo + j] = modal[i, j] - bias_q

    # constraints
    for jn in range(j_child.shape[0]):
        row0 = n_dyn + j_lam_offset[jn]
        c = j_child[jn]
        so_c = state_offset[c]
        r_c = rots[c]
        ro_c = rigid_offset[c]
        omega_c = y[so_c + 6 : so_c + 9]
        v_c = y[so_c + 9 : so_c + 12]
        rpos_c = y[so_c + 3 : so_c + 6]
        p_bc = base_rb[c]
        w_c = _skew_mat(omega_c)
        par = j_parent[jn]
        if par >= 0:
            so_p = state_offset[par]
            r_p = rots[par]
            ro_p = rigid_offset[par]
            mo_p = modal_offset[par]
            nq_p = n_q[par]
            omega_p = y[so_p + 6 : so_p + 9]
            v_p = y[so_p + 9 : so_p + 12]
            rpos_p = y[so_p + 3 : so_p + 6]
            q_p = y[so_p + 12 : so_p + 12 + nq_p]
            qd_p = y[so_p + 12 + nq_p : so_p + 12 + 2 * nq_p]
            w_p = _skew_mat(omega_p)
            p_tp = tip_rb[par].copy()
            tip_rate = np.zeros(3)
            for k in range(nq_p):
                for a in range(3):
                    p_tp[a] += tip_phi[par, a, k] * q_p[k]
                    tip_rate[a] += tip_phi[par, a, k] * qd_p[k]

        for a_idx in range(j_nlock[jn]):
            row = row0 + a_idx
            e_a = _unit(j_locked[jn, a_idx])
            ra_c = e_a @ r_c
            for cc in range(3):
                a_mat[row, ro_c + cc] = ra_c[cc]
            vel_res = ra_c @ omega_c
            if par >= 0:
                ra_p = e_a @ r_p
                for cc in range(3):
                    a_mat[row, ro_p + cc] = -ra_p[cc]
                vel_res -= ra_p @ omega_p
            b[row] = -kv * vel_res
            if par >= 0 and j_nlock[jn] == 2:
                e_f = _unit(j_free[jn])
                q_rel = r_c @ r_p.T
                tilt = e_a @ _cross(e_f, q_rel @ e_f)
                b[row] -= kp * tilt

        rowt = row0 + j_nlock[jn]
        sk_bc = _skew_mat(p_bc)
        rc_skbc = r_c @ sk_bc
        for a in range(3):
            for cc in range(3):
                a_mat[rowt + a, ro_c + 3 + cc] = r_c[a, cc]
                a_mat[rowt + a, ro_c + cc] = -rc_skbc[a, cc]
        bias = r_c @ (w_c @ (v_c + w_c @ p_bc))
        vel_res = r_c @ (v_c + w_c @ p_bc)
        pos_res = r_c @ (rpos_c + p_bc) - j_anchor[jn]
        if par >= 0:
            sk_tp = _skew_mat(p_tp)
            rp_sktp = r_p @ sk_tp
            for a in range(3):
                for cc in range(3):
                    a_mat[rowt + a, ro_p + 3 + cc] = -r_p[a, cc]
                    a_mat[rowt + a, ro_p + cc] = rp_sktp[a, cc]
                for k in range(nq_p):
                    val = 0.0
                    for cc in range(3):
                        val += r_p[a, cc] * tip_phi[par, cc, k]
                    a_mat[rowt + a, mo_p + k] = -val
            bias -= r_p @ (w_p @ (v_p + w_p @ p_tp + 2.0 * tip_rate))
            vel_res -= r_p @ (v_p + w_p @ p_tp + tip_rate)
            pos_res = r_c @ (rpos_c + p_bc) - r_p @ (rpos_p + p_tp)
        for a in range(3):
            b[rowt + a] = -(bias[a] + kv * vel_res[a] + kp * pos_res[a])

    # multiplier columns
    for row in range(n_dyn, n_unknowns):
        for col in range(n_dyn):
            a_mat[col, row] = -a_mat[row, col]

    # motor blocks (after lambda columns: they only touch dynamics rows/cols)
    for mi in range(m_joint.shape[0]):
        jn = m_joint[mi]
        e_m = _unit(m_axis[mi])
        inertia = m_inertia[mi]
        c = j_child[jn]
        ro_c = rigid_offset[c]
        a_c = rots[c].T @ e_m
        for a in range(3):
            for cc in range(3):
                a_mat[ro_c + a, ro_c + cc] += inertia * a_c[a] * a_c[cc]
        par = j_parent[jn]
        if par >= 0:
            ro_p = rigid_offset[par]
            a_p = rots[par].T @ e_m
            for a in range(3):
                for cc in range(3):
                    a_mat[ro_p + a, ro_p + cc] += inertia * a_p[a] * a_p[cc]
                    a_mat[ro_p + a, ro_c + cc] -= inertia * a_p[a] * a_c[cc]
                    a_mat[ro_c + a, ro_p + cc] -= inertia * a_c[a] * a_p[cc]
    return a_mat, b


@njit(cache=True)
def _log_so3(r):
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    cos_angle = (tr - 1.0) / 2.0
    if cos_angle > 1.0:
        cos_angle = 1.0
    elif cos_angle < -1.0:
        cos_angle = -1.0
    angle = np.arccos(cos_angle)
    off = np.empty(3)
    off[0] = 0.5 * (r[2, 1] - r[1, 2])
    off[1] = 0.5 * (r[0, 2] - r[2, 0])
    off[2] = 0.5 * (r[1, 0] - r[0, 1])
    if angle < 1e-6:
        return off
    if angle > np.pi - 1e-9:
        axis = np.empty(3)
        for a in range(3):
            val = (r[a, a] + 1.0) / 2.0
            axis[a] = np.sqrt(val) if val > 0.0 else 0.0
        i = 0
        if axis[1] > axis[i]:
            i = 1
        if axis[2] > axis[i]:
            i = 2
        if axis[i] > 0.0:
            for j in range(3):
                if j != i and r[i, j] + r[j, i] < 0.0:
                    axis[j] = -axis[j]
        if off[0] * axis[0] + off[1] * axis[1] + off[2] * axis[2] < 0.0:
            axis = -axis
        return angle * axis
    return off * (angle / np.sin(angle))


@njit(cache=True)
def _project(
    y,
    n_q,
    mass,
    rho_arr,
    length,
    offset,
    first_moment,
    rotary_inertia,
    m6,
    f0,
    f1,
    eta,
    g0,
    sk1,
    axis,
    tip_phi,
    tip_phi_slope,
    tip_rb,
    base_rb,
    rigid_offset,
    modal_offset,
    state_offset,
    n_dyn,
    n_lambda,
    n_unknowns,
    j_child,
    j_parent,
    j_nlock,
    j_locked,
    j_free,
    j_anchor,
    j_lam_offset,
    m_joint,
    m_axis,
    m_inertia,
    kv,
    kp,
    gravity,
    col0,
    sk1sk,
    rb_mode,
):
    """Return the state projected onto the joint constraint manifold.

    Hinge tilts are removed by minimal world-frame rotations of the child,
    positions are rebuilt by the serial base-to-tip recursion, and the
    velocity residuals are removed by a mass-weighted least-squares step
    (one solve with the same saddle matrix, zero dynamics right side).
    """
    n_links = n_q.shape[0]
    out = y.copy()
    if n_lambda == 0:
        return out

    rots = np.zeros((n_links, 3, 3))
    for i in range(n_links):
        so = state_offset[i]
        rots[i] = _exp_so3(out[so : so + 3])

    # hinge tilt fix: minimal world rotation of the child about locked axes
    for _ in range(2):
        for jn in range(j_child.shape[0]):
            if j_nlock[jn] != 2:
                continue
            c = j_child[jn]
            par = j_parent[jn]
            if par >= 0:
                q_rel = rots[c] @ rots[par].T
            else:
                q_rel = rots[c].copy()
            e_f = _unit(j_free[jn])
            qe = q_rel @ e_f
            tilt_vec = _cross(e_f, qe)
            delta = np.zeros(3)
            for a_idx in range(2):
                ax = j_locked[jn, a_idx]
                delta[ax] = tilt_vec[ax]
            rots[c] = _exp_so3(-delta) @ rots[c]
            so_c = state_offset[c]
            out[so_c : so_c + 3] = _log_so3(rots[c])

    # rebuild positions along the chain (children follow deformed parent tips)
    for jn in range(j_child.shape[0]):
        c = j_child[jn]
        so_c = state_offset[c]
        par = j_parent[jn]
        if par < 0:
            world = j_anchor[jn]
        else:
            so_p = state_offset[par]
            nq_p = n_q[par]
            q_p = out[so_p + 12 : so_p + 12 + nq_p]
            p_tp = tip_rb[par].copy()
            for k in range(nq_p):
                for a in range(3):
                    p_tp[a] += tip_phi[par, a, k] * q_p[k]
            world = rots[par] @ (out[so_p + 3 : so_p + 6] + p_tp)
        out[so_c + 3 : so_c + 6] = rots[c].T @ world - base_rb[c]

    # velocity projection: min 1/2 du^T M du  s.t.  G(u + du) = 0
    wrench0 = np.zeros((n_links, 6))
    modal0 = np.zeros((n_links, f0.shape[1]))
    a_mat, _unused = _assemble(
        out,
        wrench0,
        modal0,
        n_q,
        mass,
        rho_arr,
        length,
        offset,
        first_moment,
        rotary_inertia,
        m6,
        f0,
        f1,
        eta,
        g0,
        sk1,
        axis,
        tip_phi,
        tip_phi_slope,
        tip_rb,
        base_rb,
        rigid_offset,
        modal_offset,
        state_offset,
        n_dyn,
        n_lambda,
        n_unknowns,
        j_child,
        j_parent,
        j_nlock,
        j_locked,
        j_free,
        j_anchor,
        j_lam_offset,
        m_joint,
        m_axis,
        m_inertia,
        kv,
        kp,
        gravity,
        col0,
        sk1sk,
        rb_mode,
    )
    rhs_vec = np.zeros(n_unknowns)
    for jn in range(j_child.shape[0]):
        row0 = n_dyn + j_lam_offset[jn]
        c = j_child[jn]
        so_c = state_offset[c]
        omega_c = out[so_c + 6 : so_c + 9]
        v_c = out[so_c + 9 : so_c + 12]
        r_c = rots[c]
        p_bc = base_rb[c]
        par = j_parent[jn]
        for a_idx in range(j_nlock[jn]):
            e_a = _unit(j_locked[jn, a_idx])
            res = (e_a @ r_c) @ omega_c
            if par >= 0:
                res -= (e_a @ rots[par]) @ out[state_offset[par] + 6 : state_offset[par] + 9]
            rhs_vec[row0 + a_idx] = -res
        rowt = row0 + j_nlock[jn]
        vres = r_c @ (v_c + _cross(omega_c, p_bc))
        if par >= 0:
            so_p = state_offset[par]
            nq_p = n_q[par]
            omega_p = out[so_p + 6 : so_p + 9]
            v_p = out[so_p + 9 : so_p + 12]
            q_p = out[so_p + 12 : so_p + 12 + nq_p]
            qd_p = out[so_p + 12 + nq_p : so_p + 12 + 2 * nq_p]
            p_tp = tip_rb[par].copy()
            tip_rate = np.zeros(3)
            for k in range(nq_p):
                for a in range(3):
                    p_tp[a] += tip_phi[par, a, k] * q_p[k]
                    tip_rate[a] += tip_phi[par, a, k] * qd_p[k]
            vres -= rots[par] @ (v_p + _cross(omega_p, p_tp) + tip_rate)
        for a in range(3):
            rhs_vec[rowt + a] = -vres[a]

    du = np.linalg.solve(a_mat, rhs_vec)
    for i in range(n_links):
        so = state_offset[i]
        ro = rigid_offset[i]
        mo = modal_offset[i]
        for a in range(6):
            out[so + 6 + a] += du[ro + a]
        for k in range(n_q[i]):
            out[so + 12 + n_q[i] + k] += du[mo + k]
    return out


@njit(cache=True)
def _solve_u(y, wrench, modal, *data):
    a_mat, b = _assemble(y, wrench, modal, *data)
    return np.linalg.solve(a_mat, b)


@njit(cache=True)
def _rhs(y, wrench, modal, *data):
    n_q = data[0]
    state_offset = data[20]
    rigid_offset = data[18]
    modal_offset = data[19]
    u = _solve_u(y, wrench, modal, *data)
    out = np.zeros_like(y)
    for i in range(n_q.shape[0]):
        so = state_offset[i]
        nq = n_q[i]
        theta = y[so : so + 3]
        r = y[so + 3 : so + 6]
        omega = y[so + 6 : so + 9]
        v = y[so + 9 : so + 12]
        out[so : so + 3] = _body_jacobian_inv(theta) @ omega
        out[so + 3 : so + 6] = v - _cross(omega, r)
        ro = rigid_offset[i]
        mo = modal_offset[i]
        for a in range(6):
            out[so + 6 + a] = u[ro + a]
        for k in range(nq):
            out[so + 12 + k] = y[so + 12 + nq + k]
            out[so + 12 + nq + k] = u[mo + k]
    return out


@njit(cache=True)
def _step(y, wrench, modal, dt, substeps, *data):
    h = dt / substeps
    out = y.copy()
    for _ in range(substeps):
        k1 = _rhs(out, wrench, modal, *data)
        k2 = _rhs(out + 0.5 * h * k1, wrench, modal, *data)
        k3 = _rhs(out + 0.5 * h * k2, wrench, modal, *data)
        k4 = _rhs(out + h * k3, wrench, modal, *data)
        out = out + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def _modal_matrix(fc: FastChain, loads) -> np.ndarray:
    max_nq = fc.f0.shape[1]
    modal = np.zeros((len(fc.chain.links), max_nq))
    for i, vec in enumerate(loads.modal):
        modal[i, : vec.size] = vec
    return modal


def fast_rhs(fc: FastChain, y: np.ndarray, loads) -> np.ndarray:
    return _rhs(y, loads.wrench, _modal_matrix(fc, loads), *fc.as_args())


def fast_solve(fc: FastChain, y: np.ndarray, loads) -> np.ndarray:
    """Flat unknown vector ``[Vdot/qddot blocks, lambda]`` at the given state."""
    return _solve_u(y, loads.wrench, _modal_matrix(fc, loads), *fc.as_args())


def fast_assemble(fc: FastChain, y: np.ndarray, loads) -> tuple[np.ndarray, np.ndarray]:
    """The saddle system ``(A, b)`` exactly as the reference chain builds it."""
    return _assemble(y, loads.wrench, _modal_matrix(fc, loads), *fc.as_args())


def fast_step(fc: FastChain, y: np.ndarray, loads, dt: float, substeps: int) -> np.ndarray:
    try:
        out = _step(y, loads.wrench, _modal_matrix(fc, loads), dt, substeps, *fc.as_args())
    except np.linalg.LinAlgError as exc:
        raise NumericalBlowup("integration hit a singular constrained solve") from exc
    if not np.all(np.isfinite(out)):
        raise NumericalBlowup("integration produced non-finite state")
    return out


def fast_project(fc: FastChain, y: np.ndarray) -> np.ndarray:
    """Project a state onto the joint constraint manifold.

    Removes hinge tilt by a minimal child rotation, rebuilds positions along
    the chain, and removes velocity residuals by a mass-weighted
    least-squares correction.  Called once per control sample by the
    simulation loop so integration drift never accumulates.
    """
    try:
        out = _project(y, *fc.as_args())
    except np.linalg.LinAlgError as exc:
        raise NumericalBlowup("constraint projection hit a singular solve") from exc
    if not np.all(np.isfinite(out)):
        raise NumericalBlowup("constraint projection produced non-finite state")
    return out
