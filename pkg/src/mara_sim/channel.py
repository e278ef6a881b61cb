"""Channel coefficients for all four antenna schemes via one factorized path.

Every scheme is evaluated through the same expression
``h[u, m, g] = ecsi(u, m, g)^H alpha_m``: fixed-pattern schemes (TFA, SMA) pin
alpha to the canonical isotropic coefficient, fixed-position schemes
(TFA, ERA) pin every antenna at its nominal array location. This keeps the
feasible sets nested across schemes and the comparison on one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .scenario import SCHEME_ORDER, PathSet, Scenario
from .shod import BasisSet, build_basis, build_omega, isotropic_coefficients

MOVABLE_SCHEMES = ("SMA", "MARA")
RECONFIGURABLE_SCHEMES = ("ERA", "MARA")


@dataclass
class AntennaState:
    """Decision variables of the transmitter: per-antenna position and pattern."""

    positions: np.ndarray     # (M, 3) meters
    coefficients: np.ndarray  # (M, K) real pattern coefficients, unit rows
    scheme: str

    def copy(self) -> "AntennaState":
        return AntennaState(self.positions.copy(), self.coefficients.copy(), self.scheme)

    def retagged(self, scheme: str) -> "AntennaState":
        return AntennaState(self.positions.copy(), self.coefficients.copy(), scheme)


@dataclass(frozen=True)
class ChannelTensor:
    """Channel coefficients h[u, m, g], tagged with the scheme they were built for."""

    h: np.ndarray  # (U, M, G) complex
    scheme: str


def initial_state(scenario: Scenario, scheme: str) -> AntennaState:
    """Nominal array positions with the isotropic pattern on every antenna."""
    if scheme not in SCHEME_ORDER:
        raise ContractError(f"unknown scheme {scheme!r}")
    K = (scenario.config.shod_max_degree + 1) ** 2
    coeffs = np.tile(isotropic_coefficients(K), (scenario.config.num_bs_antennas, 1))
    return AntennaState(scenario.initial_positions.copy(), coeffs, scheme)


def project_to_movement_region(scenario: Scenario, positions: np.ndarray) -> np.ndarray:
    """Radially clamp each position into its closed per-antenna ball."""
    offsets = positions - scenario.initial_positions
    radius = scenario.config.movement_radius
    norms = np.linalg.norm(offsets, axis=1)
    scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
    return scenario.initial_positions + offsets * scale[:, None]


def validate_state(scenario: Scenario, state: AntennaState, scheme: str | None = None) -> None:
    """Check state invariants for its scheme; raises ContractError on violation."""
    if scheme is not None and scheme != state.scheme:
        raise ContractError(f"state is tagged {state.scheme!r}, expected {scheme!r}")
    scheme = state.scheme
    if scheme not in SCHEME_ORDER:
        raise ContractError(f"unknown scheme {scheme!r}")
    cfg = scenario.config
    M = cfg.num_bs_antennas
    K = (cfg.shod_max_degree + 1) ** 2
    if state.positions.shape != (M, 3):
        raise ContractError(f"positions must have shape ({M}, 3)")
    if state.coefficients.shape != (M, K):
        raise ContractError(f"coefficients must have shape ({M}, {K})")
    d = cfg.antenna_spacing
    offsets = np.linalg.norm(state.positions - scenario.initial_positions, axis=1)
    if scheme in MOVABLE_SCHEMES:
        if np.any(offsets > cfg.movement_radius + 1e-9 * d):
            raise ContractError("a position lies outside its movement ball")
    else:
        if np.any(offsets > 1e-9 * d):
            raise ContractError(f"positions must stay at the nominal array for {scheme}")
    norms = np.linalg.norm(state.coefficients, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise ContractError("pattern coefficient rows must be unit-norm within 1e-10")
    if scheme not in RECONFIGURABLE_SCHEMES:
        pinned = np.tile(isotropic_coefficients(K), (M, 1))
        if np.max(np.abs(state.coefficients - pinned)) > 1e-10:
            raise ContractError(f"patterns must be the isotropic coefficient for {scheme}")


def tx_steering(path_set: PathSet, position: np.ndarray, wavelength: float) -> np.ndarray:
    """Per-path transmit phase factors exp(-j 2 pi / lambda * k_tx . p)."""
    phase = (2.0 * np.pi / wavelength) * (path_set.tx_wave_vectors @ np.asarray(position))
    return np.exp(-1j * phase)


def rx_steering(path_set: PathSet, ue_position: np.ndarray, wavelength: float) -> np.ndarray:
    """Per-path receive phase factors exp(-j 2 pi / lambda * k_rx . q)."""
    phase = (2.0 * np.pi / wavelength) * (path_set.rx_wave_vectors @ np.asarray(ue_position))
    return np.exp(-1j * phase)


def path_gains(path_set: PathSet, frequency_hz: float) -> np.ndarray:
    """Complex per-path gains with the delay phase folded in at one subcarrier."""
    return path_set.gains * np.exp(-2j * np.pi * path_set.delays * frequency_hz)


def ecsi(path_set: PathSet, omega: np.ndarray, position: np.ndarray,
         ue_position: np.ndarray, frequency_hz: float, wavelength: float) -> np.ndarray:
    """Environment part of one channel coefficient: h = ecsi^H alpha.

    Returns the complex K-vector q with
    q^H = (a ⊙ x ⊙ b)^T Omega, where a/b are the receive/transmit steering
    factors and x the delay-adjusted path gains. The receive antenna is a
    fixed isotropic element, so no receive-pattern factor appears.
    """
    L = path_set.num_paths
    omega = np.asarray(omega, dtype=np.float64)
    if omega.ndim != 2 or omega.shape[0] != L:
        raise ContractError(f"omega must have shape ({L}, K), got {omega.shape}")
    a = rx_steering(path_set, ue_position, wavelength)
    b = tx_steering(path_set, position, wavelength)
    x = path_gains(path_set, frequency_hz)
    return omega.T @ np.conj(a * x * b)


class ChannelWorkspace:
    """Precomputed per-scenario factors for fast channel/gradient evaluation.

    Holds, per UE: the pattern-response matrix omega (L, K), the transmit wave
    vectors (L, 3), and the position/pattern-independent path factors
    env[i, g] = a_i * gains_i * exp(-j 2 pi tau_i f_g) of shape (L, G).
    """

    def __init__(self, scenario: Scenario, basis: BasisSet | None = None):
        cfg = scenario.config
        self.scenario = scenario
        self.basis = basis if basis is not None else build_basis(cfg.shod_max_degree)
        if self.basis.max_degree != cfg.shod_max_degree:
            raise ContractError("basis degree does not match the scenario config")
        self.wavenumber = 2.0 * np.pi / scenario.wavelength
        self.omegas = []
        self.tx_vectors = []
        self.env = []
        freqs = scenario.subcarrier_frequencies
        for u, ps in enumerate(scenario.path_sets):
            self.omegas.append(build_omega(self.basis, ps))
            self.tx_vectors.append(ps.tx_wave_vectors)
            a = rx_steering(ps, scenario.ue_positions[u], scenario.wavelength)
            x = ps.gains[:, None] * np.exp(-2j * np.pi * ps.delays[:, None] * freqs[None, :])
            self.env.append(a[:, None] * x)

    def tx_phases(self, u: int, positions: np.ndarray) -> np.ndarray:
        """Transmit steering factors for all antennas at once, shape (L, M)."""
        return np.exp(-1j * self.wavenumber * (self.tx_vectors[u] @ positions.T))

    def tensor(self, positions: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
        """Channel coefficients h[u, m, g] without feasibility checks."""
        cfg = self.scenario.config
        h = np.empty((cfg.num_ues, cfg.num_bs_antennas, cfg.num_subcarriers),
                     dtype=np.complex128)
        for u in range(cfg.num_ues):
            pattern = self.omegas[u] @ coefficients.T          # (L, M)
            per_path = self.tx_phases(u, positions) * pattern  # (L, M)
            h[u] = per_path.T @ self.env[u]                    # (M, G)
        return h

    def state_tensor(self, state: AntennaState) -> np.ndarray:
        return self.tensor(state.positions, state.coefficients)


def channel_tensor(scenario: Scenario, state: AntennaState, scheme: str,
                   basis: BasisSet | None = None) -> ChannelTensor:
    """Build the (U, M, G) channel tensor after validating state against scheme."""
    validate_state(scenario, state, scheme)
    ws = ChannelWorkspace(scenario, basis)
    return ChannelTensor(h=ws.state_tensor(state), scheme=scheme)
