"""Compiled hot path vs the dense reference route, plus the per-sample
constraint projection and long-horizon passive-energy behavior."""

import numpy as np
import pytest

from flexlink.chain import AppliedLoads, NumericalBlowup, actuation_loads
from flexlink.fastpath import (
    fast_assemble,
    fast_project,
    fast_rhs,
    fast_step,
)
from flexlink.presets import start_state

from conftest import consistent_two_link_state, random_link_states


def _rel(err, ref):
    return np.abs(err).max() / max(np.abs(ref).max(), 1.0)


def _random_loads(chain, rng):
    return AppliedLoads(
        wrench=rng.uniform(-5.0, 5.0, (chain.n_links, 6)),
        modal=[0.1 * rng.standard_normal(m.n_q) for m in chain.links],
    )


def test_compiled_assembly_matches_reference(two_link, fast_two_link):
    rng = np.random.default_rng(101)
    for _ in range(30):
        states = random_link_states(two_link, rng)
        loads = _random_loads(two_link, rng)
        a_ref, b_ref, _ = two_link.assemble(states, loads)
        a_fast, b_fast = fast_assemble(fast_two_link, two_link.pack(states), loads)
        assert _rel(a_fast - a_ref, a_ref) < 1e-12
        assert _rel(b_fast - b_ref, b_ref) < 1e-12


def test_compiled_rhs_matches_reference(two_link, fast_two_link):
    rng = np.random.default_rng(202)
    for _ in range(30):
        states = random_link_states(two_link, rng)
        loads = _random_loads(two_link, rng)
        y = two_link.pack(states)
        ref = two_link.rhs(y, loads)
        fast = fast_rhs(fast_two_link, y, loads)
        assert _rel(fast - ref, ref) < 1e-12


def test_compiled_step_tracks_reference(two_link, fast_two_link):
    y_ref = start_state(two_link)
    y_fast = y_ref.copy()
    for k in range(20):
        t = k * 1e-3
        torques = [
            np.array([2.0 * np.sin(8.0 * t), 1.5 * np.cos(8.0 * t)]),
            np.array([np.sin(16.0 * t)]),
        ]
        loads = actuation_loads(two_link, two_link.unpack(y_ref), torques)
        y_ref = two_link.step_rk4(y_ref, loads, 1e-3, substeps=10)
        y_fast = fast_step(fast_two_link, y_fast, loads, 1e-3, substeps=10)
    assert np.abs(y_fast - y_ref).max() < 1e-10


def test_projection_is_identity_on_consistent_states(two_link, fast_two_link):
    rng = np.random.default_rng(303)
    y = consistent_two_link_state(
        two_link,
        spin=0.7,
        q1=1e-2 * rng.standard_normal(two_link.links[0].n_q),
        q2=1e-2 * rng.standard_normal(two_link.links[1].n_q),
        qd1=0.1 * rng.standard_normal(two_link.links[0].n_q),
        qd2=0.1 * rng.standard_normal(two_link.links[1].n_q),
    )
    y_proj = fast_project(fast_two_link, y)
    assert np.abs(y_proj - y).max() < 1e-12 * max(1.0, np.abs(y).max())


def test_projection_restores_perturbed_state(two_link, fast_two_link):
    rng = np.random.default_rng(404)
    y = consistent_two_link_state(two_link, spin=0.5, q1=None, q2=None)
    y_bad = y + 1e-4 * rng.standard_normal(y.size)
    vel_bad, pos_bad = two_link.constraint_residuals(two_link.unpack(y_bad))
    assert max(np.abs(vel_bad).max(), np.abs(pos_bad).max()) > 1e-6  # actually off-manifold
    y_fix = fast_project(fast_two_link, y_bad)
    vel, pos = two_link.constraint_residuals(two_link.unpack(y_fix))
    assert np.abs(vel).max() < 1e-9
    assert np.abs(pos).max() < 1e-9
    # idempotent: a second projection barely moves the state
    y_fix2 = fast_project(fast_two_link, y_fix)
    assert np.abs(y_fix2 - y_fix).max() < 1e-12


def test_projection_removes_hinge_tilt(two_link, fast_two_link):
    y = consistent_two_link_state(two_link)
    so = 12 + 2 * two_link.links[0].n_q  # start of the forearm state block
    y_bad = y.copy()
    y_bad[so] += 5e-3  # tilt the forearm about the locked world-x axis
    _, pos_bad = two_link.constraint_residuals(two_link.unpack(y_bad))
    assert np.abs(pos_bad).max() > 1e-4
    y_fix = fast_project(fast_two_link, y_bad)
    vel, pos = two_link.constraint_residuals(two_link.unpack(y_fix))
    assert np.abs(pos).max() < 1e-10
    assert np.abs(vel).max() < 1e-10


def test_passive_bending_run_keeps_energy_and_constraints(two_link, fast_two_link):
    """Free vibration of both links for 1.5 s: the stepping plus per-sample
    projection neither pumps energy nor lets the joints drift."""
    q1 = np.zeros(two_link.links[0].n_q)
    q2 = np.zeros(two_link.links[1].n_q)
    q1[0], q1[3] = 0.005, 0.01  # first bending mode on each axis
    q2[0], q2[3] = 0.004, 0.008
    y = consistent_two_link_state(two_link, q1=q1, q2=q2)
    loads = AppliedLoads.zero(two_link)
    e0 = two_link.energy(two_link.unpack(y)).total
    assert e0 > 0.0
    worst_res = 0.0
    max_energy = e0
    for k in range(1500):
        y = fast_step(fast_two_link, y, loads, 1e-3, substeps=10)
        y = fast_project(fast_two_link, y)
        if k % 10 == 0:
            vel, pos = two_link.constraint_residuals(two_link.unpack(y))
            worst_res = max(worst_res, np.abs(vel).max(), np.abs(pos).max())
            max_energy = max(max_energy, two_link.energy(two_link.unpack(y)).total)
    e1 = two_link.energy(two_link.unpack(y)).total
    assert worst_res < 1e-9
    assert abs(e1 - e0) < 0.02 * e0
    assert max_energy < 1.01 * e0


def test_passive_spin_run_conserves_energy(two_link, fast_two_link):
    y = consistent_two_link_state(two_link, spin=1.0)
    loads = AppliedLoads.zero(two_link)
    e0 = two_link.energy(two_link.unpack(y)).total
    for _ in range(1000):
        y = fast_step(fast_two_link, y, loads, 1e-3, substeps=10)
        y = fast_project(fast_two_link, y)
    e1 = two_link.energy(two_link.unpack(y)).total
    vel, pos = two_link.constraint_residuals(two_link.unpack(y))
    assert abs(e1 - e0) < 1e-5 * e0
    assert max(np.abs(vel).max(), np.abs(pos).max()) < 1e-9


def test_driven_run_power_balance(two_link, fast_two_link):
    """Without projection, the energy gained over a driven run equals the
    time-integrated power of the applied loads (trapezoid in the velocities,
    loads held per-sample)."""
    y = start_state(two_link)
    e0 = two_link.energy(two_link.unpack(y)).total
    work = 0.0
    for k in range(200):
        t = k * 1e-3
        torques = [
            np.array([1.5 * np.sin(6.0 * t), 2.0 * np.cos(6.0 * t)]),
            np.array([1.0 * np.sin(12.0 * t)]),
        ]
        states = two_link.unpack(y)
        loads = actuation_loads(two_link, states, torques)
        p_before = _load_power(two_link, states, loads)
        y = fast_step(fast_two_link, y, loads, 1e-3, substeps=10)
        p_after = _load_power(two_link, two_link.unpack(y), loads)
        work += 0.5e-3 * (p_before + p_after)
    e1 = two_link.energy(two_link.unpack(y)).total
    assert abs((e1 - e0) - work) < 2e-3 * max(abs(work), abs(e1 - e0), 1e-3)


def _load_power(chain, states, loads):
    p = 0.0
    for i, m in enumerate(chain.links):
        p += float(loads.wrench[i] @ states[i].twist)
        p += float(loads.modal[i] @ states[i].q_dot)
    return p


def test_fast_blowup_is_reported(two_link, fast_two_link):
    y = consistent_two_link_state(two_link, spin=0.5) * 1e160
    with pytest.raises(NumericalBlowup):
        for _ in range(5):
            y = fast_step(fast_two_link, y, AppliedLoads.zero(two_link), 1e-3, 2)
