"""Command-line entry point: run experiments, self-check invariants, run oracles.

Exit codes: 0 success, 1 error (bad usage, bad config, runtime failure),
2 ordering-assertion failure during a run.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .errors import ConfigError, ContractError, SizeLimitError
from .scenario import (SCHEME_ORDER, SystemConfig, config_from_mapping,
                       generate_scenario, load_config)
from .shod import build_basis, build_omega, pattern_gain, pattern_power
from .channel import (AntennaState, ChannelTensor, ChannelWorkspace, ecsi,
                      initial_state, project_to_movement_region)
from .se import sum_se_arrays
from .optim import (OptimOptions, alternating_optimize, brute_force_positions,
                    digital_precoder, optimize_patterns, optimize_positions,
                    se_gradient_patterns, se_gradient_positions)

_CONFIG_KEYS = (
    "carrier_frequency_hz", "num_subcarriers", "subcarrier_spacing_hz",
    "num_ues", "num_bs_antennas", "antenna_spacing_wavelengths",
    "num_paths_per_ue", "max_delay_s", "total_power_w", "noise_power_w",
    "shod_max_degree", "seed", "schemes",
)
_INT_KEYS = {"num_subcarriers", "num_ues", "num_bs_antennas",
             "num_paths_per_ue", "shod_max_degree", "seed"}
# Extra override keys understood by `check` and `oracle`.
_TOOL_KEYS = {"fd_step", "grid_step"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mara-sim",
                     description="Downlink MIMO-OFDM simulator for movable / "
                                 "pattern-reconfigurable antenna schemes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (("run", "run an experiment and write CSV results"),
                       ("check", "run the invariant self-check suites"),
                       ("oracle", "compare optimizers against brute-force oracles")):
        p = sub.add_parser(name, description=desc)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (run)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--seeds", default=None, help="comma-separated seed list")
        p.add_argument("-q", "--quiet", action="store_true")
        p.add_argument("--json-summary", action="store_true")
    return parser


def _parse_overrides(pairs, allow_tool_keys=False):
    config_updates, tool_updates = {}, {}
    for pair in pairs:
        if "=" not in pair:
            raise ContractError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key in _TOOL_KEYS and allow_tool_keys:
            tool_updates[key] = float(raw)
            continue
        if key not in _CONFIG_KEYS:
            raise ContractError(f"unknown override key: {key}")
        if key == "schemes":
            config_updates[key] = [s.strip() for s in raw.split(",") if s.strip()]
        elif key in _INT_KEYS:
            config_updates[key] = int(raw)
        else:
            config_updates[key] = float(raw)
    return config_updates, tool_updates


def _load_base_config(args, default: SystemConfig | None, allow_tool_keys):
    updates, tool = _parse_overrides(args.overrides, allow_tool_keys)
    if args.config is not None:
        base = load_config(args.config)
    elif default is not None:
        base = default
    else:
        raise ContractError("--config is required for this command")
    if updates:
        merged = {k: getattr(base, k) for k in _CONFIG_KEYS}
        merged["schemes"] = list(merged["schemes"])
        merged.update(updates)
        base = config_from_mapping(merged)
    return base, tool


def cmd_run(args) -> int:
    base, _ = _load_base_config(args, default=None, allow_tool_keys=False)
    seeds = _parse_seeds(args.seeds) if args.seeds else (base.seed,)
    spec = harness.ExperimentSpec(base=base, seeds=seeds, schemes=base.schemes)
    rows = harness.run_experiment(spec)
    os.makedirs(args.out, exist_ok=True)
    results_path = os.path.join(args.out, "results.csv")
    summary_path = os.path.join(args.out, "summary.csv")
    harness.emit_csv(rows, results_path)
    summary = harness.summarize(rows, schemes=base.schemes)
    harness.emit_summary_csv(summary, summary_path)
    if args.json_summary:
        payload = {s: vars(st) for s, st in summary.per_scheme.items()}
        payload["mara_tfa_ratio"] = summary.mara_tfa_ratio
        print(json.dumps(payload, sort_keys=True))
    elif not args.quiet:
        print(harness.format_summary(summary))
        print(f"wrote {results_path} and {summary_path}")
    nesting_failures = [r for r in rows if not r.ok and r.scheme == "nesting_violation"]
    errors = [r for r in rows if not r.ok and r.scheme != "nesting_violation"]
    if nesting_failures:
        for r in nesting_failures:
            print(f"nesting assertion failed: {r.note}", file=sys.stderr)
        return 2
    if errors:
        for r in errors:
            print(f"cell failed: {r.note}", file=sys.stderr)
        return 1
    return 0


def _check_default_config() -> SystemConfig:
    return SystemConfig(
        carrier_frequency_hz=3.5e9, num_subcarriers=2, subcarrier_spacing_hz=120e3,
        num_ues=2, num_bs_antennas=2, num_paths_per_ue=3, max_delay_s=1e-7,
        total_power_w=1.0, noise_power_w=1e-2, shod_max_degree=2, seed=7,
        schemes=SCHEME_ORDER)


def _fd_gradient_positions(ws, state, precoders, noise, m, step):
    grad = np.zeros(3)
    for axis in range(3):
        for sign, slot in ((+1, 0), (-1, 1)):
            pos = state.positions.copy()
            pos[m, axis] += sign * step
            f = sum_se_arrays(ws.tensor(pos, state.coefficients), precoders.w, noise)
            grad[axis] += sign * f
    return grad / (2.0 * step)


def _fd_gradient_patterns(ws, state, precoders, noise, m, step):
    K = state.coefficients.shape[1]
    grad = np.zeros(K)
    for k in range(K):
        for sign in (+1, -1):
            coeff = state.coefficients.copy()
            coeff[m, k] += sign * step
            f = sum_se_arrays(ws.tensor(state.positions, coeff), precoders.w, noise)
            grad[k] += sign * f
    return grad / (2.0 * step)


def _random_feasible_state(scenario, rng) -> AntennaState:
    cfg = scenario.config
    K = (cfg.shod_max_degree + 1) ** 2
    direction = rng.standard_normal((cfg.num_bs_antennas, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    frac = np.cbrt(rng.uniform(0, 1, (cfg.num_bs_antennas, 1)))
    positions = scenario.initial_positions + cfg.movement_radius * frac * direction
    coeffs = rng.standard_normal((cfg.num_bs_antennas, K))
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    return AntennaState(positions, coeffs, "MARA")


def cmd_check(args) -> int:
    base, tool = _load_base_config(args, default=_check_default_config(),
                                   allow_tool_keys=True)
    fd_step = tool.get("fd_step", OptimOptions().fd_step)
    quiet = args.quiet
    results = []

    def record(name, passed, detail):
        results.append(passed)
        if not quiet or not passed:
            print(f"{'PASS' if passed else 'FAIL'} {name} ({detail})")

    degree = base.shod_max_degree
    worst = 0.0
    for n in range(degree + 1):
        basis = build_basis(n)
        gram = basis.gram_matrix()
        worst = max(worst, float(np.max(np.abs(gram - np.eye(basis.size)))))
    record("orthonormality", worst < 1e-8, f"max |Gram - I| = {worst:.3e}, N <= {degree}")

    basis = build_basis(degree)
    rng = np.random.default_rng(base.seed)
    worst = 0.0
    for _ in range(1000):
        alpha = rng.standard_normal(basis.size)
        worst = max(worst, abs(pattern_power(basis, alpha) - float(alpha @ alpha)))
    record("parseval", worst < 1e-8, f"max |power - ||a||^2| = {worst:.3e}")

    scenario = generate_scenario(base)
    ws = ChannelWorkspace(scenario, basis)
    state = _random_feasible_state(scenario, rng)
    h = ws.state_tensor(state)
    worst = 0.0
    for u, ps in enumerate(scenario.path_sets):
        omega = build_omega(basis, ps)
        for m in range(base.num_bs_antennas):
            for g in range(base.num_subcarriers):
                q = ecsi(ps, omega, state.positions[m], scenario.ue_positions[u],
                         scenario.subcarrier_frequencies[g], scenario.wavelength)
                direct = np.conj(q) @ state.coefficients[m]
                worst = max(worst, abs(h[u, m, g] - direct))
    record("factorization", worst < 1e-12, f"max |h - q^H a| = {worst:.3e}")

    worst = 0.0
    noise = base.noise_power_w
    for trial in range(5):
        cfg = replace(base, seed=base.seed + trial)
        scen = generate_scenario(cfg)
        wst = ChannelWorkspace(scen, basis)
        st = _random_feasible_state(scen, rng)
        prec = digital_precoder(ChannelTensor(wst.state_tensor(st), "MARA"),
                                cfg.total_power_w, noise)
        for m in range(cfg.num_bs_antennas):
            ga = se_gradient_positions(scen, st, prec, m, ws=wst)
            gf = _fd_gradient_positions(wst, st, prec, noise, m,
                                        fd_step * scen.wavelength)
            worst = max(worst, _rel_err(ga, gf))
            ga = se_gradient_patterns(scen, st, prec, m, ws=wst)
            gf = _fd_gradient_patterns(wst, st, prec, noise, m, fd_step)
            worst = max(worst, _rel_err(ga, gf))
    record("gradients", worst < 1e-5,
           f"max rel err = {worst:.3e} at fd_step {fd_step:g}")

    return 0 if all(results) else 1


def _rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def cmd_oracle(args) -> int:
    base, tool = _load_base_config(args, default=_oracle_default_config(),
                                   allow_tool_keys=True)
    grid_step = tool.get("grid_step", base.antenna_spacing / 40.0)
    opts = OptimOptions(restarts=4, seed=123)
    gap_pos = 0.0
    try:
        for trial in range(3):
            cfg = replace(base, seed=base.seed + trial)
            scen = generate_scenario(cfg)
            state = initial_state(scen, "SMA")
            ws = ChannelWorkspace(scen)
            prec = digital_precoder(ChannelTensor(ws.state_tensor(state), "SMA"),
                                    cfg.total_power_w, cfg.noise_power_w)
            opt_state = optimize_positions(scen, state, prec, opts, ws)
            bf_state = brute_force_positions(scen, state, prec, grid_step)
            se_opt = sum_se_arrays(ws.state_tensor(opt_state), prec.w, cfg.noise_power_w)
            se_bf = sum_se_arrays(ws.state_tensor(bf_state), prec.w, cfg.noise_power_w)
            gap_pos = max(gap_pos, (se_bf - se_opt) / max(se_bf, 1e-300))
    except SizeLimitError as exc:
        print(f"oracle aborted: {exc}", file=sys.stderr)
        return 1

    gap_pat = 0.0
    for trial in range(3):
        cfg = replace(base, num_subcarriers=1, seed=base.seed + 100 + trial)
        scen = generate_scenario(cfg)
        state = initial_state(scen, "ERA")
        ws = ChannelWorkspace(scen)
        prec = digital_precoder(ChannelTensor(ws.state_tensor(state), "ERA"),
                                cfg.total_power_w, cfg.noise_power_w)
        opt_state = optimize_patterns(scen, state, prec, opts, ws)
        ps = scen.path_sets[0]
        q = ecsi(ps, build_omega(ws.basis, ps), scen.initial_positions[0],
                 scen.ue_positions[0], scen.subcarrier_frequencies[0], scen.wavelength)
        best = float(np.linalg.eigvalsh(np.real(np.outer(np.conj(q), q)))[-1])
        achieved = abs(np.conj(q) @ opt_state.coefficients[0]) ** 2
        gap_pat = max(gap_pat, (best - achieved) / max(best, 1e-300))

    print(f"max relative SE gap, positions vs grid: {max(gap_pos, 0.0):.3e}")
    print(f"max relative gap, patterns vs eigenvector: {max(gap_pat, 0.0):.3e}")
    return 0


def _oracle_default_config() -> SystemConfig:
    return SystemConfig(
        carrier_frequency_hz=3.5e9, num_subcarriers=1, subcarrier_spacing_hz=120e3,
        num_ues=1, num_bs_antennas=1, num_paths_per_ue=2, max_delay_s=0.0,
        total_power_w=1.0, noise_power_w=1e-2, shod_max_degree=2, seed=11,
        schemes=SCHEME_ORDER)


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in raw.split(",") if s.strip())
    except ValueError:
        raise ContractError(f"--seeds must be a comma-separated integer list, got {raw!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "check":
            return cmd_check(args)
        return cmd_oracle(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ContractError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
