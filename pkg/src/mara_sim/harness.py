"""Multi-seed, multi-scheme experiment runner with CSV emission.

Cells (seed, sweep value) are independent pure computations; within a cell the
schemes are solved in nesting order so warm starts can be shared. After each
cell the scheme-ordering assertions are evaluated and any violation is
recorded as a failure row rather than aborting the run.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .scenario import SCHEME_ORDER, SystemConfig, generate_scenario
from .optim import OptimOptions, alternating_optimize

SWEEPABLE_PARAMS = ("total_power_w", "num_bs_antennas", "num_paths_per_ue",
                    "shod_max_degree")

CSV_HEADER = ("seed,scheme,sweep_param,sweep_value,se_sum_bps_hz,"
              "se_per_sc_bps_hz,iterations,wall_time_s")

NESTING_TOL = 1e-9

# Test hook: when set, maps (scheme, se_sum) -> se_sum before the nesting
# assertions run. Used to exercise the failure-detection path; leave None.
se_fault_hook = None


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig
    seeds: tuple[int, ...]
    schemes: tuple[str, ...]
    sweep: tuple[str, tuple[float, ...]] | None = None
    options: OptimOptions = field(default_factory=OptimOptions)

    def __post_init__(self):
        if not self.seeds:
            raise ContractError("seeds must be nonempty")
        unknown = set(self.schemes) - set(SCHEME_ORDER)
        if unknown:
            raise ContractError(f"unknown scheme(s) {sorted(unknown)}")
        if self.sweep is not None:
            name, values = self.sweep
            if name not in SWEEPABLE_PARAMS:
                raise ContractError(f"sweep parameter {name!r} not in {SWEEPABLE_PARAMS}")
            if not values or any(b <= a for a, b in zip(values, values[1:])):
                raise ContractError("sweep values must be strictly increasing")


@dataclass
class ResultRow:
    seed: int
    scheme: str
    sweep_param: str
    sweep_value: float
    se_sum: float
    se_per_subcarrier: float
    iterations: int
    wall_time: float
    ok: bool = True
    note: str = ""


def _cell_config(spec: ExperimentSpec, seed: int, sweep_value) -> SystemConfig:
    updates = {"seed": seed, "schemes": tuple(SCHEME_ORDER)}
    if spec.sweep is not None:
        name = spec.sweep[0]
        value = sweep_value
        if name != "total_power_w":
            value = int(value)
        updates[name] = value
    config = dataclasses.replace(spec.base, **updates)
    config.validate()
    return config


def _run_cell(spec: ExperimentSpec, seed: int, sweep_value,
              trace_sink=None) -> list[ResultRow]:
    sweep_param = spec.sweep[0] if spec.sweep is not None else "none"
    value = float(sweep_value) if sweep_value is not None else 0.0

    def make_row(scheme, se_sum=math.nan, iterations=0, wall=0.0, ok=True, note=""):
        per_sc = se_sum / config.num_subcarriers if math.isfinite(se_sum) else math.nan
        return ResultRow(seed, scheme, sweep_param, value, se_sum, per_sc,
                         iterations, wall, ok, note)

    config = _cell_config(spec, seed, sweep_value)
    scenario = generate_scenario(config)
    # Solve in nesting order so later schemes reuse converged warm starts.
    needed = set(spec.schemes)
    if "MARA" in needed:
        needed.update(("TFA", "SMA", "ERA"))
    elif needed & {"SMA", "ERA"}:
        needed.add("TFA")
    warm = {}
    rows = {}
    for scheme in SCHEME_ORDER:
        if scheme not in needed:
            continue
        start = time.perf_counter()
        try:
            result = alternating_optimize(scenario, scheme, spec.options, warm)
            se_sum = result.se
            if se_fault_hook is not None:
                se_sum = se_fault_hook(scheme, se_sum)
        except Exception as exc:  # diagnostic row aborts the cell, not the run
            return [make_row(scheme, ok=False, note=f"error: {exc}")]
        warm[scheme] = result
        if trace_sink is not None:
            trace_sink.append((seed, value, scheme, tuple(result.se_trace)))
        rows[scheme] = make_row(scheme, se_sum, result.iterations,
                                time.perf_counter() - start)
    out = [rows[s] for s in spec.schemes]
    for lo, hi in (("TFA", "SMA"), ("TFA", "ERA"), ("SMA", "MARA"), ("ERA", "MARA")):
        if lo in rows and hi in rows:
            if rows[hi].se_sum < rows[lo].se_sum - NESTING_TOL:
                out.append(make_row(
                    "nesting_violation", ok=False,
                    note=f"{hi} se {rows[hi].se_sum!r} < {lo} se {rows[lo].se_sum!r}"))
    return out


def run_experiment(spec: ExperimentSpec, trace_sink: list | None = None) -> list[ResultRow]:
    """Run every (seed, sweep value, scheme) cell; rows in deterministic order.

    When a list is passed as trace_sink, every per-scheme objective trace is
    appended to it as (seed, sweep_value, scheme, trace).
    """
    values = list(spec.sweep[1]) if spec.sweep is not None else [None]
    cells = [(seed, value) for seed in spec.seeds for value in values]
    workers = _worker_count()
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _run_cell(spec, *c, trace_sink), cells))
    else:
        results = [_run_cell(spec, *cell, trace_sink) for cell in cells]
    rows = []
    for cell_rows in results:
        rows.extend(cell_rows)
    return rows


def _worker_count() -> int:
    raw = os.environ.get("MARA_SIM_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            raise ContractError(f"MARA_SIM_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1


def emit_csv(rows, path, include_wall_time: bool = True) -> None:
    """Write rows as CSV with LF endings and shortest round-trip floats.

    With include_wall_time=False the wall-time column is written as 0.0, which
    makes repeated runs byte-identical for determinism comparisons.
    """
    lines = [CSV_HEADER]
    for r in rows:
        wall = r.wall_time if include_wall_time else 0.0
        lines.append(",".join([
            str(r.seed), r.scheme, r.sweep_param, repr(float(r.sweep_value)),
            repr(float(r.se_sum)), repr(float(r.se_per_subcarrier)),
            str(r.iterations), repr(float(wall)),
        ]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class SchemeStats:
    mean: float
    std: float
    min: float
    count: int


@dataclass
class Summary:
    per_scheme: dict[str, SchemeStats]
    mara_tfa_ratio: float | None
    notices: list[str]


def summarize(rows, schemes=SCHEME_ORDER) -> Summary:
    """Per-scheme aggregates of se_sum plus the mean per-cell MARA/TFA ratio."""
    good = [r for r in rows if r.ok and math.isfinite(r.se_sum)]
    if not good:
        raise ContractError("summarize requires at least one successful row")
    per_scheme = {}
    notices = []
    for scheme in schemes:
        values = np.array([r.se_sum for r in good if r.scheme == scheme])
        if values.size == 0:
            notices.append(f"scheme {scheme} missing from results; omitted")
            continue
        per_scheme[scheme] = SchemeStats(float(values.mean()), float(values.std()),
                                         float(values.min()), int(values.size))
    ratios = []
    by_cell = {}
    for r in good:
        by_cell.setdefault((r.seed, r.sweep_value), {})[r.scheme] = r.se_sum
    for cell in by_cell.values():
        if "MARA" in cell and "TFA" in cell and cell["TFA"] > 0:
            ratios.append(cell["MARA"] / cell["TFA"])
    ratio = float(np.mean(ratios)) if ratios else None
    if ratio is None:
        notices.append("MARA/TFA ratio not applicable (need both schemes)")
    return Summary(per_scheme, ratio, notices)


def format_summary(summary: Summary) -> str:
    lines = [f"{'scheme':<8} {'mean_se':>12} {'std_se':>12} {'min_se':>12} {'rows':>6}"]
    for scheme, st in summary.per_scheme.items():
        lines.append(f"{scheme:<8} {st.mean:>12.6f} {st.std:>12.6f} "
                     f"{st.min:>12.6f} {st.count:>6d}")
    if summary.mara_tfa_ratio is not None:
        lines.append(f"mean MARA/TFA SE ratio: {summary.mara_tfa_ratio:.4f}")
    for note in summary.notices:
        lines.append(f"note: {note}")
    return "\n".join(lines)


def emit_summary_csv(summary: Summary, path) -> None:
    lines = ["scheme,mean_se,std_se,min_se"]
    for scheme, st in summary.per_scheme.items():
        lines.append(f"{scheme},{st.mean!r},{st.std!r},{st.min!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def reference_config(seed: int = 0) -> SystemConfig:
    """The artifact's reference configuration for the four-scheme comparison."""
    return SystemConfig(
        carrier_frequency_hz=3.5e9,
        num_subcarriers=8,
        subcarrier_spacing_hz=120e3,
        num_ues=2,
        num_bs_antennas=4,
        num_paths_per_ue=6,
        max_delay_s=1e-6,
        total_power_w=1.0,
        noise_power_w=2e-3,
        shod_max_degree=2,
        seed=seed,
        schemes=SCHEME_ORDER,
    )


def reference_experiment(num_seeds: int = 20) -> ExperimentSpec:
    """Reference experiment: a 5-point transmit-power sweep over seeded scenarios."""
    return ExperimentSpec(
        base=reference_config(),
        seeds=tuple(range(num_seeds)),
        schemes=SCHEME_ORDER,
        sweep=("total_power_w", (0.0625, 0.125, 0.25, 0.5, 1.0)),
        options=OptimOptions(max_outer_iters=4, inner_grad_iters=40,
                             restarts=2, tol_rel=1e-4),
    )
