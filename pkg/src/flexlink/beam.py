"""Slender-link modal models.

A link is a uniform prismatic beam along its body x-axis spanning material
coordinates ``xi in [a, c]``.  Deformation is expanded in a mass-normalized
modal basis: clamped-free bending eigenfunctions on each transverse axis plus
fixed-free axial bar modes.  All shape functions are analytic through the
fourth derivative, so elastic terms can be evaluated without numerical
differentiation.

Cross-section stiffness follows the displacement-axis convention: transverse
displacement along body-y is resisted by ``E*Iz`` (bending about z) and
displacement along body-z by ``E*Iy``; axial displacement by ``E*A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .screw import skew

__all__ = [
    "LinkParams",
    "CrossSectionStiffness",
    "ModalBasis",
    "DeformationState",
    "bending_wavenumbers",
    "make_clamped_free_basis",
    "eval_deformation",
    "stiffness_matrices",
    "mass_properties",
    "elastic_energy",
    "gauss_points",
]

AXIAL, BENDING = 0, 1


@dataclass(frozen=True)
class LinkParams:
    """Geometry and material of one uniform link.

    ``width`` is the cross-section dimension along body-y and ``height`` along
    body-z; the section centroid may be offset transversally by
    ``(offset_y, offset_z)`` from the reference line.
    """

    length: float
    density: float
    width: float
    height: float
    modulus: float
    span_start: float = 0.0
    offset_y: float = 0.0
    offset_z: float = 0.0

    @property
    def span_end(self) -> float:
        return self.span_start + self.length

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def rho_a(self) -> float:
        return self.density * self.area

    @property
    def mass(self) -> float:
        return self.rho_a * self.length

    @property
    def axial_stiffness(self) -> float:
        return self.modulus * self.area

    @property
    def bending_stiffness_z(self) -> float:
        """Resists displacement along body-y (second moment about z)."""
        return self.modulus * self.width * self.height**3 / 12.0

    @property
    def bending_stiffness_y(self) -> float:
        """Resists displacement along body-z (second moment about y)."""
        return self.modulus * self.height * self.width**3 / 12.0

    def reference_point(self, xi: np.ndarray) -> np.ndarray:
        """Undeformed section position ``r_b(xi)`` in body coordinates, shape (3, N)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.zeros((3, xi.size))
        out[0] = xi
        out[1] = self.offset_y
        out[2] = self.offset_z
        return out


@dataclass(frozen=True)
class CrossSectionStiffness:
    """Diagonal elastic operators: ``iv1`` acts on r' (membrane), ``iv2`` on r''/r''''."""

    iv1: np.ndarray  # diag(EA, 0, 0)
    iv2: np.ndarray  # diag(0, EIz, EIy)


def stiffness_matrices(params: LinkParams) -> CrossSectionStiffness:
    iv1 = np.diag([params.axial_stiffness, 0.0, 0.0])
    iv2 = np.diag([0.0, params.bending_stiffness_z, params.bending_stiffness_y])
    return CrossSectionStiffness(iv1=iv1, iv2=iv2)


def _bending_characteristic(z: float) -> float:
    return 1.0 + np.cos(z) * np.cosh(z)


def bending_wavenumbers(n_modes: int, length: float) -> np.ndarray:
    """First ``n_modes`` roots ``beta`` of ``1 + cos(beta*l) cosh(beta*l) = 0``."""
    roots = []
    for k in range(1, n_modes + 1):
        center = (2 * k - 1) * np.pi / 2.0
        lo, hi = center - 1.0, center + 1.0
        if k == 1:
            lo, hi = 1.0, 3.0
        roots.append(brentq(_bending_characteristic, lo, hi, xtol=1e-15, rtol=8.9e-16))
    return np.asarray(roots) / length


@dataclass(frozen=True)
class ModalBasis:
    """Mass-normalized per-axis modal basis for one link.

    ``axis[j]`` is the displacement axis of mode j (0=x axial, 1=y, 2=z),
    ``kind[j]`` distinguishes bending from axial modes, ``beta[j]`` is the
    spatial wavenumber, ``sigma[j]`` the bending shape constant, and
    ``norm[j]`` scales the raw shape to satisfy ``rho_a * integral(phi_j
    phi_k) = delta_jk``.
    """

    params: LinkParams
    axis: np.ndarray
    kind: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    norm: np.ndarray

    @property
    def n_modes(self) -> int:
        return int(self.axis.size)

    def shapes(self, xi: np.ndarray, order: int = 0) -> np.ndarray:
        """Scalar shape functions (or their ``order``-th derivative), shape (n, N)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        x = xi - self.params.span_start
        out = np.zeros((self.n_modes, x.size))
        for j in range(self.n_modes):
            b = self.beta[j]
            if self.kind[j] == BENDING:
                s = self.sigma[j]
                bx = b * x
                # cycle of derivatives of cosh-cos - sigma*(sinh-sin)
                if order % 4 == 0:
                    val = np.cosh(bx) - np.cos(bx) - s * (np.sinh(bx) - np.sin(bx))
                elif order % 4 == 1:
                    val = np.sinh(bx) + np.sin(bx) - s * (np.cosh(bx) - np.cos(bx))
                elif order % 4 == 2:
                    val = np.cosh(bx) + np.cos(bx) - s * (np.sinh(bx) + np.sin(bx))
                else:
                    val = np.sinh(bx) - np.sin(bx) - s * (np.cosh(bx) + np.cos(bx))
                out[j] = self.norm[j] * b**order * val
            else:
                bx = b * x
                if order % 4 == 0:
                    val = np.sin(bx)
                elif order % 4 == 1:
                    val = np.cos(bx)
                elif order % 4 == 2:
                    val = -np.sin(bx)
                else:
                    val = -np.cos(bx)
                out[j] = self.norm[j] * b**order * val
        return out

    def displacement_field(self, xi: np.ndarray, order: int = 0) -> np.ndarray:
        """Vector shape functions on their axes, shape (n, 3, N)."""
        scalar = self.shapes(xi, order)
        n, npts = scalar.shape
        out = np.zeros((n, 3, npts))
        for j in range(n):
            out[j, self.axis[j], :] = scalar[j]
        return out

    def natural_frequencies_sq(self) -> np.ndarray:
        """Diagonal modal stiffness ``omega_j^2`` of the mass-normalized basis."""
        p = self.params
        out = np.zeros(self.n_modes)
        for j in range(self.n_modes):
            if self.kind[j] == BENDING:
                ei = p.bending_stiffness_z if self.axis[j] == 1 else p.bending_stiffness_y
                out[j] = ei / p.rho_a * self.beta[j] ** 4
            else:
                out[j] = p.axial_stiffness / p.rho_a * self.beta[j] ** 2
        return out


def make_clamped_free_basis(
    params: LinkParams, n_bending: int = 3, n_axial: int = 1
) -> ModalBasis:
    """Clamped-free bending modes on y and z plus fixed-free axial modes.

    Mode order: y-bending 1..n, z-bending 1..n, axial 1..n.  A rigid link is
    the ``n_bending = n_axial = 0`` case (empty basis).
    """
    length = params.length
    axis, kind, beta, sigma, norm = [], [], [], [], []
    if n_bending > 0:
        betas = bending_wavenumbers(n_bending, length)
        bend_norm = 1.0 / np.sqrt(params.rho_a * length)
        for ax in (1, 2):
            for b in betas:
                bl = b * length
                axis.append(ax)
                kind.append(BENDING)
                beta.append(b)
                sigma.append((np.cosh(bl) + np.cos(bl)) / (np.sinh(bl) + np.sin(bl)))
                norm.append(bend_norm)
    for k in range(1, n_axial + 1):
        axis.append(0)
        kind.append(AXIAL)
        beta.append((2 * k - 1) * np.pi / (2.0 * length))
        sigma.append(0.0)
        norm.append(np.sqrt(2.0 / (params.rho_a * length)))
    return ModalBasis(
        params=params,
        axis=np.asarray(axis, dtype=int),
        kind=np.asarray(kind, dtype=int),
        beta=np.asarray(beta, dtype=float),
        sigma=np.asarray(sigma, dtype=float),
        norm=np.asarray(norm, dtype=float),
    )


@dataclass(frozen=True)
class DeformationState:
    """Deformation field and its spatial derivatives on a grid, each (3, N)."""

    xi: np.ndarray
    r: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray


def eval_deformation(basis: ModalBasis, q: np.ndarray, xi: np.ndarray) -> DeformationState:
    """Evaluate ``r_xi = sum_j phi_j q_j`` and derivatives analytically."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    q = np.asarray(q, dtype=float)
    if q.size != basis.n_modes:
        raise ValueError(f"expected {basis.n_modes} modal coordinates, got {q.size}")
    fields = []
    for order in range(5):
        mat = basis.displacement_field(xi, order)  # (n, 3, N)
        fields.append(np.einsum("j,jan->an", q, mat) if basis.n_modes else np.zeros((3, xi.size)))
    return DeformationState(xi=xi, r=fields[0], d1=fields[1], d2=fields[2], d3=fields[3], d4=fields[4])


def gauss_points(params: LinkParams, n: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on the material span ``[a, c]``."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    a, c = params.span_start, params.span_end
    mid, half = 0.5 * (a + c), 0.5 * (c - a)
    return mid + half * nodes, half * weights


def mass_properties(params: LinkParams) -> tuple[float, np.ndarray, np.ndarray]:
    """Rigid mass data from the line-density model.

    Returns ``(m, s, i_b)``: total mass, first moment ``rho_a *
    integral(r_b)``, and rotary inertia ``-rho_a * integral(skew(r_b)^2)``.
    With zero transverse offsets ``i_b = diag(0, m l^2/3-ish, ...)`` has an
    exactly zero axial-rotation entry; callers must treat the matrix as
    positive semidefinite.
    """
    xi, w = gauss_points(params)
    rb = params.reference_point(xi)  # (3, N)
    s = params.rho_a * rb @ w
    i_b = np.zeros((3, 3))
    for i in range(xi.size):
        sk = skew(rb[:, i])
        i_b -= params.rho_a * w[i] * (sk @ sk)
    return params.mass, s, i_b


def elastic_energy(
    basis: ModalBasis,
    q: np.ndarray,
    q_dot: np.ndarray,
    omega: np.ndarray | None = None,
    n_quad: int = 32,
) -> float:
    """Total deformation energy.

    Kinetic part: ``rho_a/2 * integral |r_xi_dot + omega x r_xi|^2``; potential
    part: ``1/2 * integral (r' Iv1 r' + r'' Iv2 r'')``.  With ``omega=None``
    (or zero) and a mass-normalized basis the kinetic part is ``|q_dot|^2/2``.
    """
    params = basis.params
    if basis.n_modes == 0:
        return 0.0
    xi, w = gauss_points(params, n_quad)
    state = eval_deformation(basis, q, xi)
    rate = eval_deformation(basis, np.asarray(q_dot, dtype=float), xi).r
    if omega is not None:
        rate = rate + np.cross(np.asarray(omega, dtype=float)[:, None], state.r, axis=0)
    kinetic = 0.5 * params.rho_a * np.sum(w * np.sum(rate * rate, axis=0))
    stiff = stiffness_matrices(params)
    pot_membrane = np.sum(w * np.sum(state.d1 * (stiff.iv1 @ state.d1), axis=0))
    pot_bending = np.sum(w * np.sum(state.d2 * (stiff.iv2 @ state.d2), axis=0))
    return float(kinetic + 0.5 * (pot_membrane + pot_bending))
