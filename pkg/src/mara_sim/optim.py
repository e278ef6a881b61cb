"""Solvers for the three spectral-efficiency maximization problems.

Per scheme, an outer loop alternates between the digital precoder (zero
forcing plus water-filling), antenna positions (projected gradient ascent
inside per-antenna balls), and pattern coefficients (retracted gradient ascent
on per-antenna unit spheres). Every sub-step keeps its candidate only if the
objective does not decrease, so the reported trace is monotone by
construction. Warm starts enforce the scheme nesting: SMA/ERA start from the
TFA solution and MARA from the better of the converged SMA and ERA states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, SingularChannelError, SizeLimitError
from .scenario import Scenario
from .channel import (
    MOVABLE_SCHEMES,
    RECONFIGURABLE_SCHEMES,
    AntennaState,
    ChannelTensor,
    ChannelWorkspace,
    initial_state,
    project_to_movement_region,
)
from .se import PrecoderSet, sum_se_arrays

_LN2 = math.log(2.0)
_BRUTE_FORCE_GUARD = 10_000_000


@dataclass(frozen=True)
class OptimOptions:
    """Knobs for the gradient loops; defaults suit desk-scale instances."""

    max_outer_iters: int = 50
    inner_grad_iters: int = 100
    step_init_pos: float = 1e-2    # initial position step, as a fraction of d
    step_init_alpha: float = 1e-1  # initial pattern step
    armijo_c: float = 1e-4
    backtrack_ratio: float = 0.5
    tol_rel: float = 1e-6
    fd_step: float = 1e-6          # finite-difference step for gradient checks
    restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.backtrack_ratio < 1.0:
            raise ContractError("backtrack_ratio must lie in (0, 1)")
        for name in ("step_init_pos", "step_init_alpha", "armijo_c",
                     "tol_rel", "fd_step"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        for name in ("max_outer_iters", "inner_grad_iters", "restarts"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be nonnegative")


@dataclass
class OptimResult:
    scheme: str
    state: AntennaState
    precoders: PrecoderSet
    se_trace: list[float]
    iterations: int
    converged: bool

    def __post_init__(self):
        trace = np.asarray(self.se_trace)
        if trace.size > 1 and np.any(np.diff(trace) < -1e-9):
            raise ContractError(f"se_trace is not nondecreasing: {self.se_trace}")

    @property
    def se(self) -> float:
        return self.se_trace[-1]


def water_fill(slopes: np.ndarray, total_power: float) -> np.ndarray:
    """Allocate total_power over parallel channels with per-unit-power SINRs `slopes`.

    Returns p maximizing sum log(1 + p_j * slopes_j); the water level is found
    by bisection to 1e-10 absolute power residual, then the allocation is
    rescaled so the powers sum to total_power exactly.
    """
    slopes = np.asarray(slopes, dtype=np.float64)
    if np.any(slopes <= 0):
        raise ContractError("water_fill requires strictly positive channel slopes")
    floors = 1.0 / slopes
    lo, hi = float(np.min(floors)), float(np.max(floors)) + total_power
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        excess = float(np.sum(np.maximum(0.0, mid - floors))) - total_power
        if abs(excess) <= 1e-10:
            break
        if excess > 0:
            hi = mid
        else:
            lo = mid
    powers = np.maximum(0.0, mid - floors)
    return powers * (total_power / powers.sum())


def digital_precoder(channel: ChannelTensor, total_power: float, noise_power: float,
                     method: str = "ZF") -> PrecoderSet:
    """Per-subcarrier precoders under the total power budget.

    ZF: pseudo-inverse directions with water-filling over the G*U effective
    parallel channels. MRT: matched-filter columns with an equal power split.
    Both spend the budget exactly.
    """
    h = channel.h
    U, M, G = h.shape
    w = np.zeros((G, M, U), dtype=np.complex128)
    if method == "MRT":
        cols = np.conj(np.transpose(h, (2, 1, 0)))  # (G, M, U)
        norms = np.linalg.norm(cols, axis=1)        # (G, U)
        usable = norms > 0
        per_column = total_power / max(int(usable.sum()), 1)
        scale = np.where(usable, math.sqrt(per_column) / np.where(usable, norms, 1.0), 0.0)
        w = cols * scale[:, None, :]
        return PrecoderSet(w)
    if method != "ZF":
        raise ContractError(f"unknown precoding method {method!r}")
    directions = np.zeros((G, M, U), dtype=np.complex128)
    slopes = np.zeros((G, U))
    for g in range(G):
        H = h[:, :, g]
        sv = np.linalg.svd(H, compute_uv=False)
        if sv[0] == 0.0 or sv[-1] <= 1e-12 * sv[0]:
            raise SingularChannelError(
                f"channel matrix is rank-deficient at subcarrier {g}")
        pinv = H.conj().T @ np.linalg.inv(H @ H.conj().T)  # (M, U), H @ pinv = I
        norms = np.linalg.norm(pinv, axis=0)
        directions[g] = pinv / norms
        slopes[g] = 1.0 / (norms ** 2 * noise_power)
    powers = water_fill(slopes.ravel(), total_power).reshape(G, U)
    w = directions * np.sqrt(powers)[:, None, :]
    return PrecoderSet(w)


def _sinr_chain_weights(gains: np.ndarray, noise_power: float) -> np.ndarray:
    """Weights c[g,u,u'] * conj(gains) such that d(SE) = sum 2 Re(weights * d gains)."""
    power = np.abs(gains) ** 2
    signal = np.einsum("guu->gu", power)
    total = power.sum(axis=2) + noise_power
    denom = total - signal
    coef = np.empty_like(power)
    coef[:] = (1.0 / total - 1.0 / denom)[:, :, None]
    diag = np.arange(gains.shape[1])
    coef[:, diag, diag] = 1.0 / total
    return coef * np.conj(gains) / _LN2


def _grad_positions_all(ws: ChannelWorkspace, positions: np.ndarray,
                        coefficients: np.ndarray, precoders: PrecoderSet,
                        noise_power: float) -> np.ndarray:
    """Gradient of sum_se with respect to every antenna position, shape (M, 3)."""
    h = ws.tensor(positions, coefficients)
    gains = np.einsum("umg,gmv->guv", h, precoders.w)
    weights = _sinr_chain_weights(gains, noise_power)
    z = np.einsum("guv,gmv->umg", weights, precoders.w)
    grad = np.zeros((positions.shape[0], 3))
    for u in range(h.shape[0]):
        per_path = ws.tx_phases(u, positions) * (ws.omegas[u] @ coefficients.T)  # (L, M)
        summed = per_path * (ws.env[u] @ z[u].T)                                 # (L, M)
        grad += 2.0 * np.real(-1j * ws.wavenumber * (ws.tx_vectors[u].T @ summed)).T
    return grad


def _grad_patterns_all(ws: ChannelWorkspace, positions: np.ndarray,
                       coefficients: np.ndarray, precoders: PrecoderSet,
                       noise_power: float) -> np.ndarray:
    """Euclidean gradient of sum_se with respect to every alpha_m, shape (M, K)."""
    h = ws.tensor(positions, coefficients)
    gains = np.einsum("umg,gmv->guv", h, precoders.w)
    weights = _sinr_chain_weights(gains, noise_power)
    z = np.einsum("guv,gmv->umg", weights, precoders.w)
    grad = np.zeros_like(coefficients)
    for u in range(h.shape[0]):
        q = ws.tx_phases(u, positions) * (ws.env[u] @ z[u].T)  # (L, M)
        grad += 2.0 * np.real(ws.omegas[u].T @ q).T
    return grad


def se_gradient_positions(scenario: Scenario, state: AntennaState,
                          precoders: PrecoderSet, m: int,
                          ws: ChannelWorkspace | None = None) -> np.ndarray:
    """Analytic gradient of sum_se with respect to antenna m's position."""
    ws = ws if ws is not None else ChannelWorkspace(scenario)
    _check_antenna_index(scenario, m)
    grad = _grad_positions_all(ws, state.positions, state.coefficients,
                               precoders, scenario.config.noise_power_w)
    return grad[m]


def se_gradient_patterns(scenario: Scenario, state: AntennaState,
                         precoders: PrecoderSet, m: int,
                         ws: ChannelWorkspace | None = None) -> np.ndarray:
    """Euclidean gradient of sum_se with respect to antenna m's pattern coefficients."""
    ws = ws if ws is not None else ChannelWorkspace(scenario)
    _check_antenna_index(scenario, m)
    grad = _grad_patterns_all(ws, state.positions, state.coefficients,
                              precoders, scenario.config.noise_power_w)
    return grad[m]


def _check_antenna_index(scenario: Scenario, m: int) -> None:
    if not 0 <= m < scenario.config.num_bs_antennas:
        raise ContractError(f"antenna index {m} out of range")


def _ascend_positions(ws, start, coefficients, precoders, noise_power, opts):
    scenario = ws.scenario
    step0 = opts.step_init_pos * scenario.config.antenna_spacing
    positions = start.copy()
    f = sum_se_arrays(ws.tensor(positions, coefficients), precoders.w, noise_power)
    for _ in range(opts.inner_grad_iters):
        grad = _grad_positions_all(ws, positions, coefficients, precoders, noise_power)
        if float(np.sum(grad * grad)) < 1e-24 * max(1.0, f * f):
            break
        t = step0
        accepted = False
        while t > 1e-14 * step0:
            cand = project_to_movement_region(scenario, positions + t * grad)
            advance = float(np.sum(grad * (cand - positions)))
            if advance <= 0.0:
                break
            fc = sum_se_arrays(ws.tensor(cand, coefficients), precoders.w, noise_power)
            if fc >= f + opts.armijo_c * advance:
                accepted = True
                break
            t *= opts.backtrack_ratio
        if not accepted:
            break
        gain = fc - f
        positions, f = cand, fc
        if gain < opts.tol_rel * max(abs(f), 1e-12):
            break
    return positions, f


def _ascend_patterns(ws, positions, start, precoders, noise_power, opts):
    coefficients = start.copy()
    f = sum_se_arrays(ws.tensor(positions, coefficients), precoders.w, noise_power)
    for _ in range(opts.inner_grad_iters):
        grad = _grad_patterns_all(ws, positions, coefficients, precoders, noise_power)
        radial = np.sum(grad * coefficients, axis=1, keepdims=True)
        tangent = grad - radial * coefficients
        tnorm2 = float(np.sum(tangent * tangent))
        if tnorm2 < 1e-24 * max(1.0, f * f):
            break
        t = opts.step_init_alpha
        accepted = False
        while t > 1e-14 * opts.step_init_alpha:
            cand = coefficients + t * tangent
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            fc = sum_se_arrays(ws.tensor(positions, cand), precoders.w, noise_power)
            if fc >= f + opts.armijo_c * t * tnorm2:
                accepted = True
                break
            t *= opts.backtrack_ratio
        if not accepted:
            break
        gain = fc - f
        coefficients, f = cand, fc
        if gain < opts.tol_rel * max(abs(f), 1e-12):
            break
    return coefficients, f


def optimize_positions(scenario: Scenario, state: AntennaState, precoders: PrecoderSet,
                       opts: OptimOptions | None = None,
                       ws: ChannelWorkspace | None = None) -> AntennaState:
    """Projected gradient ascent over antenna positions; best of seeded restarts.

    Restart 0 warm-starts from the incoming state (projected into the movement
    balls first); further restarts begin at random feasible positions seeded
    seed + restart index. The returned state never has lower SE than the
    incoming one under the given precoders.
    """
    opts = opts if opts is not None else OptimOptions()
    if state.scheme not in MOVABLE_SCHEMES:
        raise ContractError(f"positions are pinned for scheme {state.scheme!r}")
    ws = ws if ws is not None else ChannelWorkspace(scenario)
    start = project_to_movement_region(scenario, state.positions)
    if opts.inner_grad_iters == 0:
        return AntennaState(start, state.coefficients.copy(), state.scheme)
    noise = scenario.config.noise_power_w
    radius = scenario.config.movement_radius
    best_positions, best_f = None, -np.inf
    for r in range(max(1, opts.restarts)):
        if r == 0:
            init = start
        else:
            rng = np.random.default_rng(opts.seed + r)
            direction = rng.standard_normal(start.shape)
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            frac = np.cbrt(rng.uniform(0.0, 1.0, (start.shape[0], 1)))
            init = scenario.initial_positions + radius * frac * direction
        positions, f = _ascend_positions(ws, init, state.coefficients, precoders,
                                         noise, opts)
        if f > best_f:
            best_positions, best_f = positions, f
    return AntennaState(best_positions, state.coefficients.copy(), state.scheme)


def optimize_patterns(scenario: Scenario, state: AntennaState, precoders: PrecoderSet,
                      opts: OptimOptions | None = None,
                      ws: ChannelWorkspace | None = None) -> AntennaState:
    """Retracted gradient ascent over per-antenna unit-sphere pattern coefficients."""
    opts = opts if opts is not None else OptimOptions()
    if state.scheme not in RECONFIGURABLE_SCHEMES:
        raise ContractError(f"patterns are pinned for scheme {state.scheme!r}")
    ws = ws if ws is not None else ChannelWorkspace(scenario)
    start = state.coefficients / np.linalg.norm(state.coefficients, axis=1, keepdims=True)
    if opts.inner_grad_iters == 0:
        return AntennaState(state.positions.copy(), start, state.scheme)
    noise = scenario.config.noise_power_w
    best_coeffs, best_f = None, -np.inf
    for r in range(max(1, opts.restarts)):
        if r == 0:
            init = start
        else:
            rng = np.random.default_rng(opts.seed + r)
            init = rng.standard_normal(start.shape)
            init /= np.linalg.norm(init, axis=1, keepdims=True)
        coeffs, f = _ascend_patterns(ws, state.positions, init, precoders, noise, opts)
        if f > best_f:
            best_coeffs, best_f = coeffs, f
    return AntennaState(state.positions.copy(), best_coeffs, state.scheme)


def alternating_optimize(scenario: Scenario, scheme: str,
                         opts: OptimOptions | None = None,
                         warm: dict[str, OptimResult] | None = None) -> OptimResult:
    """Alternate precoder, position, and pattern steps for one scheme.

    `warm` may carry already-computed results for the schemes a run depends on
    (TFA for SMA/ERA; additionally SMA and ERA for MARA); missing entries are
    computed internally. Each sub-step keeps its candidate only if the
    objective does not drop, so the trace is nondecreasing and the final SE
    dominates the warm-start SE.
    """
    opts = opts if opts is not None else OptimOptions()
    if scheme not in scenario.config.schemes:
        raise ContractError(f"scheme {scheme!r} is not in the configured set")
    return _optimize_scheme(scenario, scheme, opts, dict(warm or {}))


def _optimize_scheme(scenario, scheme, opts, warm):
    cfg = scenario.config
    ws = ChannelWorkspace(scenario)
    noise = cfg.noise_power_w

    def se_of(state, precoders):
        return sum_se_arrays(ws.state_tensor(state), precoders.w, noise)

    def precoder_for(state):
        return digital_precoder(ChannelTensor(ws.state_tensor(state), scheme),
                                cfg.total_power_w, noise)

    if scheme == "TFA":
        state = initial_state(scenario, "TFA")
        precoders = precoder_for(state)
        return OptimResult("TFA", state, precoders, [se_of(state, precoders)], 1, True)

    if scheme in ("SMA", "ERA"):
        base = warm.get("TFA")
        if base is None:
            base = _optimize_scheme(scenario, "TFA", opts, warm)
            warm["TFA"] = base
    else:
        sma = warm.get("SMA")
        if sma is None:
            sma = _optimize_scheme(scenario, "SMA", opts, warm)
        era = warm.get("ERA")
        if era is None:
            era = _optimize_scheme(scenario, "ERA", opts, warm)
        base = sma if sma.se >= era.se else era

    state = base.state.retagged(scheme)
    precoders = base.precoders.copy()
    current = se_of(state, precoders)
    trace: list[float] = []
    converged = False
    for _ in range(opts.max_outer_iters):
        before = current
        state, precoders, current = _accept_precoder(
            state, precoders, current, precoder_for, se_of)
        if scheme in MOVABLE_SCHEMES:
            state = optimize_positions(scenario, state, precoders, opts, ws)
            current = se_of(state, precoders)
            state, precoders, current = _accept_precoder(
                state, precoders, current, precoder_for, se_of)
        if scheme in RECONFIGURABLE_SCHEMES:
            state = optimize_patterns(scenario, state, precoders, opts, ws)
            current = se_of(state, precoders)
            state, precoders, current = _accept_precoder(
                state, precoders, current, precoder_for, se_of)
        trace.append(current)
        if current - before < opts.tol_rel * max(abs(before), 1e-12):
            converged = True
            break
    return OptimResult(scheme, state, precoders, trace, len(trace), converged)


def _accept_precoder(state, precoders, current, precoder_for, se_of):
    """Re-derive the precoder and keep it only if the objective does not drop."""
    candidate = precoder_for(state)
    se_candidate = se_of(state, candidate)
    if se_candidate > current:
        return state, candidate, se_candidate
    return state, precoders, current


def brute_force_positions(scenario: Scenario, state: AntennaState,
                          precoders: PrecoderSet, grid_step: float,
                          rederive_precoders: bool = False) -> AntennaState:
    """Coordinate-wise exhaustive position search (test oracle).

    Antennas are processed in index order; each one is moved to the best point
    of a Cartesian grid (spacing grid_step, centered on its nominal position)
    intersected with its movement ball. The incoming position is always a
    candidate, so the result never has lower SE. Ties keep the earliest
    candidate: the incoming position first, then ascending grid index.
    """
    if state.scheme not in MOVABLE_SCHEMES:
        raise ContractError(f"positions are pinned for scheme {state.scheme!r}")
    if grid_step <= 0:
        raise ContractError("grid_step must be positive")
    cfg = scenario.config
    radius = cfg.movement_radius
    n = int(math.floor(radius / grid_step))
    lattice = (2 * n + 1) ** 3
    if cfg.num_bs_antennas * lattice > _BRUTE_FORCE_GUARD:
        raise SizeLimitError(
            f"{cfg.num_bs_antennas} x {lattice} grid candidates exceed "
            f"the {_BRUTE_FORCE_GUARD} guard")
    axis = np.arange(-n, n + 1, dtype=np.float64) * grid_step
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    offsets = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    offsets = offsets[np.linalg.norm(offsets, axis=1) <= radius]
    ws = ChannelWorkspace(scenario)
    noise = cfg.noise_power_w
    positions = project_to_movement_region(scenario, state.positions).copy()

    def evaluate(pos):
        h = ws.tensor(pos, state.coefficients)
        if rederive_precoders:
            w = digital_precoder(ChannelTensor(h, state.scheme),
                                 cfg.total_power_w, noise)
            return sum_se_arrays(h, w.w, noise)
        return sum_se_arrays(h, precoders.w, noise)

    for m in range(cfg.num_bs_antennas):
        candidates = np.vstack([positions[m][None, :],
                                scenario.initial_positions[m] + offsets])
        best_idx, best_f = 0, -np.inf
        trial = positions.copy()
        for idx in range(candidates.shape[0]):
            trial[m] = candidates[idx]
            f = evaluate(trial)
            if f > best_f:
                best_idx, best_f = idx, f
        positions[m] = candidates[best_idx]
    return AntennaState(positions, state.coefficients.copy(), state.scheme)
