"""Shared fixtures: the two-link benchmark arm used across the suite."""

import numpy as np
import pytest

from flexlink.beam import LinkParams, make_clamped_free_basis


def link1_params() -> LinkParams:
    return LinkParams(length=1.2, density=7800.0, width=0.01, height=0.03, modulus=2.1e11)


def link2_params() -> LinkParams:
    return LinkParams(length=1.0, density=7800.0, width=0.01, height=0.05, modulus=2.1e11)


@pytest.fixture(scope="session")
def link1():
    return link1_params()


@pytest.fixture(scope="session")
def link2():
    return link2_params()


@pytest.fixture(scope="session")
def basis1(link1):
    return make_clamped_free_basis(link1, n_bending=3, n_axial=1)


@pytest.fixture(scope="session")
def basis2(link2):
    return make_clamped_free_basis(link2, n_bending=3, n_axial=1)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def two_link():
    from flexlink.presets import two_link_arm

    return two_link_arm()


@pytest.fixture(scope="session")
def fast_two_link(two_link):
    from flexlink.fastpath import FastChain

    return FastChain(two_link)


def random_link_states(chain, rng, angle=0.6, rate=0.8, defo=5e-3):
    """Arbitrary (not constraint-consistent) states for operator-level checks."""
    return [
        m.state(
            theta=rng.uniform(-angle, angle, 3),
            r=rng.uniform(-0.5, 0.5, 3),
            omega=rng.uniform(-rate, rate, 3),
            v=rng.uniform(-rate, rate, 3),
            q=defo * rng.standard_normal(m.n_q),
            q_dot=10.0 * defo * rng.standard_normal(m.n_q),
        )
        for m in chain.links
    ]


def consistent_two_link_state(chain, rng=None, spin=0.0, q1=None, q2=None, qd1=None, qd2=None):
    """Packed lock-respecting state at the start pose, optionally spun/deformed."""
    from flexlink.presets import START_ANGLES

    theta = [
        np.array([0.0, 0.0, START_ANGLES[0]]),
        np.array([0.0, 0.0, START_ANGLES[1]]),
    ]
    rots = [_exp_z(t[2]) for t in theta]
    omega_world = np.array([0.0, 0.0, spin])
    omega = [rots[0].T @ omega_world, rots[1].T @ omega_world]
    n1, n2 = chain.links[0].n_q, chain.links[1].n_q
    q = [np.zeros(n1) if q1 is None else np.asarray(q1, float),
         np.zeros(n2) if q2 is None else np.asarray(q2, float)]
    qd = [np.zeros(n1) if qd1 is None else np.asarray(qd1, float),
          np.zeros(n2) if qd2 is None else np.asarray(qd2, float)]
    states = chain.consistent_states(theta, omega, q, qd)
    return chain.pack(states)


def _exp_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
