"""Orthonormal radiation-pattern basis built from real spherical harmonics.

A pattern f(theta, phi) is represented by a real coefficient vector alpha of
length K = (N+1)^2 against the basis {omega_k}; the basis is orthonormal under
integration over the sphere, so the radiated-power normalization
``integral |f|^2 sin(theta) dtheta dphi = 1`` is exactly ``||alpha||^2 = 1``.

The quadrature rule is Gauss-Legendre in cos(theta) crossed with a uniform
(trapezoid) azimuth grid. Both factors are exact for products of two basis
functions up to degree N, which makes the orthonormality and Parseval checks
sharp to rounding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lpmv

from .errors import ContractError
from .scenario import PathSet


@dataclass(frozen=True)
class BasisSet:
    """Real spherical harmonics up to max_degree, with a product quadrature rule.

    Basis functions are flattened in (degree, order) order: for each degree
    l = 0..N the orders m = -l..l, so index k = l^2 + l + m.
    """

    max_degree: int
    theta_nodes: np.ndarray   # (n_q,) polar angles of the quadrature nodes
    phi_nodes: np.ndarray     # (n_q,)
    weights: np.ndarray       # (n_q,) includes the sin(theta) surface factor
    node_values: np.ndarray   # (n_q, K) basis evaluated at the nodes

    @property
    def size(self) -> int:
        """K = (N+1)^2."""
        return (self.max_degree + 1) ** 2

    def evaluate(self, theta, phi) -> np.ndarray:
        """Evaluate all K basis functions; returns shape broadcast(theta, phi) + (K,)."""
        return evaluate_basis(self.max_degree, theta, phi)

    def gram_matrix(self) -> np.ndarray:
        """Quadrature of omega_k * omega_k' over the sphere; identity when exact."""
        return self.node_values.T @ (self.weights[:, None] * self.node_values)


def build_basis(max_degree: int) -> BasisSet:
    """Construct the orthonormal basis and its quadrature rule.

    Node counts are 2(N+1) Gauss-Legendre polar nodes and 2(2N+1) uniform
    azimuth nodes, enough to integrate products of two degree-N harmonics
    exactly.
    """
    if max_degree < 0:
        raise ContractError("max_degree must be >= 0")
    n_polar = 2 * (max_degree + 1)
    n_azimuth = 2 * (2 * max_degree + 1)
    x, w = np.polynomial.legendre.leggauss(n_polar)
    theta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    theta_grid = np.repeat(theta, n_azimuth)
    phi_grid = np.tile(phi, n_polar)
    weights = np.repeat(w, n_azimuth) * (2.0 * np.pi / n_azimuth)
    return BasisSet(
        max_degree=max_degree,
        theta_nodes=_lock(theta_grid),
        phi_nodes=_lock(phi_grid),
        weights=_lock(weights),
        node_values=_lock(evaluate_basis(max_degree, theta_grid, phi_grid)),
    )


def evaluate_basis(max_degree: int, theta, phi) -> np.ndarray:
    """Real spherical harmonics Y_lm(theta, phi), orthonormalized on the sphere.

    Y_l0 = N_l0 P_l(cos theta);  for m > 0,
    Y_lm  = sqrt(2) N_lm P_l^m(cos theta) cos(m phi) and
    Y_l,-m = sqrt(2) N_lm P_l^m(cos theta) sin(m phi),
    with N_lm = sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!).
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    theta, phi = np.broadcast_arrays(theta, phi)
    ct = np.cos(theta)
    K = (max_degree + 1) ** 2
    out = np.empty(theta.shape + (K,))
    for ell in range(max_degree + 1):
        base = ell * ell + ell
        out[..., base] = _norm_const(ell, 0) * lpmv(0, ell, ct)
        for m in range(1, ell + 1):
            radial = math.sqrt(2.0) * _norm_const(ell, m) * lpmv(m, ell, ct)
            out[..., base + m] = radial * np.cos(m * phi)
            out[..., base - m] = radial * np.sin(m * phi)
    return out


def _norm_const(ell: int, m: int) -> float:
    return math.sqrt((2 * ell + 1) / (4.0 * math.pi)
                     * math.factorial(ell - m) / math.factorial(ell + m))


def pattern_gain(basis: BasisSet, alpha: np.ndarray, theta, phi):
    """Pattern response sum_k alpha_k omega_k(theta, phi)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (basis.size,):
        raise ContractError(f"alpha must have shape ({basis.size},), got {alpha.shape}")
    return basis.evaluate(theta, phi) @ alpha


def pattern_power(basis: BasisSet, alpha: np.ndarray) -> float:
    """Radiated power of the pattern: quadrature of |f|^2 over the sphere.

    Equals ||alpha||^2 up to quadrature rounding (Parseval).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (basis.size,):
        raise ContractError(f"alpha must have shape ({basis.size},), got {alpha.shape}")
    f = basis.node_values @ alpha
    return float(np.dot(basis.weights, f * f))


def isotropic_coefficients(basis_size: int) -> np.ndarray:
    """Unit coefficient vector selecting the constant (degree-0) pattern."""
    alpha = np.zeros(basis_size)
    alpha[0] = 1.0
    return alpha


def departure_angles(path_set: PathSet) -> tuple[np.ndarray, np.ndarray]:
    """Polar/azimuth departure angles of each path's transmit wave vector.

    theta = arccos(k_z), phi = atan2(k_y, k_x) mapped to [0, 2 pi).
    """
    k = path_set.tx_wave_vectors
    theta = np.arccos(np.clip(k[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(k[:, 1], k[:, 0]), 2.0 * np.pi)
    return theta, phi


def build_omega(basis: BasisSet, path_set: PathSet) -> np.ndarray:
    """Per-UE pattern-response matrix: row i is omega(theta_i, phi_i), shape (L, K)."""
    theta, phi = departure_angles(path_set)
    return basis.evaluate(theta, phi)


def _lock(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr
