"""Config-driven Monte-Carlo campaigns with deterministic CSV output.

A campaign crosses algorithms x SNRs x pilot lengths x trials. Within a
trial every algorithm and every (snr, pilot) cell sees the same scenario and
channels (so comparisons are paired), while pilots and noise are redrawn per
cell from seeds derived with a stated mixing function. Rows are gathered,
sorted and written so the output bytes are a pure function of the config,
regardless of how many workers ran the trials.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import math
import multiprocessing
import time
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .channel import (
    QuadratureGrid,
    apply_activity_floor,
    draw_scenario,
    sample_channels,
    variance_maps,
)
from .estimators import (
    EstimatorConfig,
    gcse,
    generate_measurements,
    jgc_ce,
    nmse,
    wd_omp,
)
from .lattice import ArrayGeometry, build_basis, build_lattice

ALGORITHMS = ("jgc_ce", "gcse", "wd_omp")

CSV_HEADER = (
    "algorithm,trial,seed,snr_db,pilot_len,iteration,user,nmse,mean_nmse,"
    "residual_norm,common_support_size,channel_checksum,wall_time_ms"
)
CSV_COLUMNS = CSV_HEADER.split(",")

# Final-summary rows carry this sentinel in the iteration column.
FINAL_ITERATION = -1


class ConfigError(ValueError):
    """Invalid campaign configuration; message lists the offending fields."""


@dataclass(frozen=True)
class GeometryConfig:
    n_x: int = 17
    n_y: int = 17
    delta: float = 0.25
    lam: float = 1.0

    def build(self) -> ArrayGeometry:
        return ArrayGeometry(n_x=self.n_x, n_y=self.n_y, delta=self.delta, lam=self.lam)


@dataclass(frozen=True)
class ScenarioConfig:
    n_shared: int = 2
    n_private: int = 2
    concentration: float = 140.0
    theta_max: float = 0.42 * math.pi
    weight_low: float = 0.15
    weight_high: float = 0.45


@dataclass(frozen=True)
class CampaignConfig:
    geometry: GeometryConfig = GeometryConfig()
    scenario: ScenarioConfig = ScenarioConfig()
    quadrature: QuadratureGrid = QuadratureGrid()
    estimator: EstimatorConfig = EstimatorConfig()
    users: int = 5
    pilot_lengths: tuple = (32,)
    snr_db: tuple = (15.0,)
    trials: int = 100
    base_seed: int = 20260809
    algorithms: tuple = ("jgc_ce", "gcse")
    omp_sparsity: int | None = None
    output_path: str = "results.csv"
    threads: int = 1
    record_timing: bool = False

    def validate(self):
        problems = []
        if self.users < 1:
            problems.append("users: must be at least 1")
        if self.trials < 1:
            problems.append("trials: must be at least 1")
        if not self.pilot_lengths:
            problems.append("pilot_lengths: must be non-empty")
        elif any(t < 1 for t in self.pilot_lengths):
            problems.append("pilot_lengths: every entry must be at least 1")
        if not self.snr_db:
            problems.append("snr_db: must be non-empty")
        elif any(not math.isfinite(s) for s in self.snr_db):
            problems.append("snr_db: entries must be finite")
        if not self.algorithms:
            problems.append("algorithms: must be non-empty")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                problems.append(f"algorithms: unknown algorithm {alg!r} "
                                f"(choose from {', '.join(ALGORITHMS)})")
        if self.threads < 1:
            problems.append("threads: must be at least 1")
        if self.scenario.n_shared < 0 or self.scenario.n_private < 0:
            problems.append("scenario: cluster counts must be non-negative")
        if self.scenario.n_shared + self.scenario.n_private < 1:
            problems.append("scenario: at least one cluster per user required")
        if not 0 < self.scenario.theta_max <= math.pi / 2:
            problems.append("scenario.theta_max: must lie in (0, pi/2]")
        if not 0 < self.scenario.weight_low <= self.scenario.weight_high:
            problems.append("scenario: need 0 < weight_low <= weight_high")
        if self.omp_sparsity is not None and self.omp_sparsity < 1:
            problems.append("omp_sparsity: must be positive when given")
        if problems:
            raise ConfigError("invalid campaign config: " + "; ".join(problems))
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pilot_lengths"] = list(self.pilot_lengths)
        d["snr_db"] = list(self.snr_db)
        d["algorithms"] = list(self.algorithms)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        data = dict(data)
        sections = {
            "geometry": GeometryConfig,
            "scenario": ScenarioConfig,
            "quadrature": QuadratureGrid,
            "estimator": EstimatorConfig,
        }
        kwargs = {}
        problems = []
        for name, section_cls in sections.items():
            if name in data:
                section = data.pop(name)
                if not isinstance(section, dict):
                    problems.append(f"{name}: expected a mapping")
                    continue
                known = {f.name for f in fields(section_cls)}
                unknown = set(section) - known
                if unknown:
                    problems.append(f"{name}: unknown keys {sorted(unknown)}")
                    continue
                try:
                    kwargs[name] = section_cls(**section)
                except (TypeError, ValueError) as exc:
                    problems.append(f"{name}: {exc}")
        known_top = {f.name for f in fields(cls)}
        unknown_top = set(data) - known_top
        if unknown_top:
            problems.append(f"unknown keys {sorted(unknown_top)}")
        if problems:
            raise ConfigError("invalid campaign config: " + "; ".join(problems))
        for key in ("pilot_lengths", "snr_db", "algorithms"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            return cls(**kwargs, **{k: v for k, v in data.items() if k in known_top})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid campaign config: {exc}") from exc


def load_config(path: str) -> CampaignConfig:
    """Read a JSON campaign config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path}: top level must be an object")
    return CampaignConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Seed derivation: splitmix64 over the base seed and the cell coordinates.

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *tokens) -> int:
    """Mix the base seed with integer or string tokens into a 64-bit seed."""
    state = _splitmix64(base_seed & _MASK64)
    for tok in tokens:
        if isinstance(tok, str):
            tok = int.from_bytes(
                hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "big")
        state = _splitmix64(state ^ (int(tok) & _MASK64))
    return state


def _snr_token(snr: float) -> int:
    return int(round(snr * 1000.0))


def channel_checksum(h_mat: np.ndarray) -> str:
    """Stable 16-hex-digit digest of a channel matrix."""
    buf = np.ascontiguousarray(h_mat, dtype=np.complex128)
    return hashlib.sha256(buf.tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Campaign execution.


def _resolved_trim_budget(cfg: CampaignConfig, floored_maps) -> int:
    # Sized from the cells carrying real energy (>= 1e-3 of the map peak);
    # counting every floor-positive cell would make the budget toothless.
    if cfg.estimator.trim_budget is not None:
        return cfg.estimator.trim_budget
    active = [int(np.count_nonzero(m >= 1e-3 * m.max())) for m in floored_maps]
    L = floored_maps[0].size
    return min(L, int(math.ceil(1.5 * float(np.mean(active)))))


def _row(algorithm, trial, seed, snr, pilot_len, iteration, user, err, mean_err,
         res_norm, common_size, checksum, wall_ms):
    return {
        "algorithm": algorithm,
        "trial": trial,
        "seed": seed,
        "snr_db": snr,
        "pilot_len": pilot_len,
        "iteration": iteration,
        "user": user,
        "nmse": err,
        "mean_nmse": mean_err,
        "residual_norm": res_norm,
        "common_support_size": common_size,
        "channel_checksum": checksum,
        "wall_time_ms": wall_ms,
    }


def _graph_cut_rows(alg, result, truth, trial, seed, snr, pilot_len, checksum, wall_ms):
    rows = []
    n_users = truth.shape[1]
    for rec in result.trace:
        for u in range(n_users):
            rows.append(_row(alg, trial, seed, snr, pilot_len, rec.iteration, u,
                             float(rec.nmse_per_user[u]), float(rec.nmse_joint),
                             float(rec.residual_norms[u]), rec.common_support_size,
                             checksum, wall_ms))
    final_mean = nmse(truth, result.h_hat)
    for u in range(n_users):
        rows.append(_row(alg, trial, seed, snr, pilot_len, FINAL_ITERATION, u,
                         nmse(truth[:, u], result.h_hat[:, u]), final_mean,
                         float(np.linalg.norm(result.final_residuals[u])),
                         int(result.common_support.size), checksum, wall_ms))
    return rows


def _omp_rows(measurements, truth, est_cfg, sparsity, trial, seed, snr, pilot_len,
              checksum, timing):
    n_cells, n_users = truth.shape
    start = time.perf_counter()
    estimates = np.zeros((n_cells, n_users), dtype=complex)
    traces = []
    for u in range(n_users):
        h_u, trace_u = wd_omp(measurements.received[u], measurements.effective,
                              est_cfg, sparsity, truth_i=truth[:, u])
        estimates[:, u] = h_u
        traces.append(trace_u)
    wall_ms = (time.perf_counter() - start) * 1e3 if timing else 0.0

    truth_energy = np.sum(np.abs(truth) ** 2, axis=0)
    total_energy = float(truth_energy.sum())
    rows = []
    max_len = max((len(t) for t in traces), default=0)
    for j in range(1, max_len + 1):
        # carry the last value forward for users that stopped early
        errs, norms = [], []
        for u in range(n_users):
            it, rnorm, err = traces[u][min(j, len(traces[u])) - 1]
            errs.append(err)
            norms.append(rnorm)
        joint = sum(e * truth_energy[u] for u, e in enumerate(errs)) / total_energy
        for u in range(n_users):
            rows.append(_row("wd_omp", trial, seed, snr, pilot_len, j, u,
                             float(errs[u]), float(joint), float(norms[u]), 0,
                             checksum, wall_ms))
    final_mean = nmse(truth, estimates)
    final_res = measurements.received - (measurements.effective @ estimates).T
    for u in range(n_users):
        rows.append(_row("wd_omp", trial, seed, snr, pilot_len, FINAL_ITERATION, u,
                         nmse(truth[:, u], estimates[:, u]), final_mean,
                         float(np.linalg.norm(final_res[u])), 0, checksum, wall_ms))
    return rows


_WORKER_CTX: dict = {}


def _trial_rows(cfg: CampaignConfig, lattice, basis, trial: int):
    geometry = cfg.geometry.build()
    scen_seed = derive_seed(cfg.base_seed, "scenario", trial)
    rng = np.random.default_rng(scen_seed)
    scenario = draw_scenario(
        cfg.users, rng,
        n_shared=cfg.scenario.n_shared,
        n_private=cfg.scenario.n_private,
        concentration=cfg.scenario.concentration,
        theta_max=cfg.scenario.theta_max,
        weight_low=cfg.scenario.weight_low,
        weight_high=cfg.scenario.weight_high,
    )
    maps = variance_maps(scenario, lattice, geometry, cfg.quadrature)
    floored = [apply_activity_floor(m.sigma_sq) for m in maps]
    signal_power = float(np.mean([f.sum() for f in floored]))
    channels = sample_channels(scenario, maps, rng)
    truth = np.column_stack([ch.h_f for ch in channels])
    checksum = channel_checksum(truth)
    est_cfg = replace(cfg.estimator, trim_budget=_resolved_trim_budget(cfg, floored))

    rows = []
    for snr in cfg.snr_db:
        for pilot_len in cfg.pilot_lengths:
            meas_seed = derive_seed(cfg.base_seed, "measurement", trial,
                                    _snr_token(snr), pilot_len)
            measurements = generate_measurements(
                channels, basis, pilot_len, snr,
                np.random.default_rng(meas_seed), signal_power=signal_power)
            for alg in cfg.algorithms:
                if alg == "wd_omp":
                    sparsity = cfg.omp_sparsity or min(pilot_len, len(lattice))
                    sparsity = min(sparsity, pilot_len)
                    rows.extend(_omp_rows(measurements, truth, est_cfg, sparsity,
                                          trial, meas_seed, snr, pilot_len,
                                          checksum, cfg.record_timing))
                    continue
                runner = jgc_ce if alg == "jgc_ce" else gcse
                start = time.perf_counter()
                result = runner(measurements, basis, lattice, est_cfg, truth=truth)
                wall_ms = (time.perf_counter() - start) * 1e3 if cfg.record_timing else 0.0
                rows.extend(_graph_cut_rows(alg, result, truth, trial, meas_seed,
                                            snr, pilot_len, checksum, wall_ms))
    return rows


def _worker_init(cfg_dict):
    cfg = CampaignConfig.from_dict(cfg_dict)
    geometry = cfg.geometry.build()
    lattice = build_lattice(geometry)
    _WORKER_CTX["cfg"] = cfg
    _WORKER_CTX["lattice"] = lattice
    _WORKER_CTX["basis"] = build_basis(geometry, lattice)


def _worker_run(trial: int):
    return _trial_rows(_WORKER_CTX["cfg"], _WORKER_CTX["lattice"],
                       _WORKER_CTX["basis"], trial)


def _sort_key(row):
    iteration = row["iteration"]
    return (
        row["algorithm"],
        row["snr_db"],
        row["pilot_len"],
        row["trial"],
        math.inf if iteration == FINAL_ITERATION else iteration,
        row["user"],
    )


def run_campaign(cfg: CampaignConfig, write_csv: bool = True):
    """Execute a campaign; returns the sorted rows and optionally writes CSV.

    Trials are independent and may run in parallel workers; rows are sorted
    by (algorithm, snr, pilot length, trial, iteration, user) before writing,
    with final-summary rows (iteration sentinel -1) after each trial's trace.
    """
    cfg.validate()
    geometry = cfg.geometry.build()
    lattice = build_lattice(geometry)
    basis = build_basis(geometry, lattice)

    rows = []
    if cfg.threads > 1:
        ctx = multiprocessing.get_context("fork")
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=cfg.threads, mp_context=ctx,
                initializer=_worker_init, initargs=(cfg.to_dict(),)) as pool:
            for chunk in pool.map(_worker_run, range(cfg.trials)):
                rows.extend(chunk)
    else:
        for trial in range(cfg.trials):
            rows.extend(_trial_rows(cfg, lattice, basis, trial))

    rows.sort(key=_sort_key)
    if write_csv:
        write_results(rows, cfg.output_path)
    return rows


# ---------------------------------------------------------------------------
# CSV serialization. Floats carry 9 significant digits.


def _fmt(value) -> str:
    if isinstance(value, bool):
        raise TypeError("no boolean columns in the schema")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_results(rows, path: str):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row[col]) for col in CSV_COLUMNS) + "\n")
    except OSError as exc:
        raise IOError(f"cannot write results to {path}: {exc}") from exc


_INT_COLUMNS = {"trial", "seed", "pilot_len", "iteration", "user", "common_support_size"}
_FLOAT_COLUMNS = {"snr_db", "nmse", "mean_nmse", "residual_norm", "wall_time_ms"}


def read_results(path: str):
    """Parse a results CSV back into typed row dicts; validates the schema."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise ValueError(
                f"unexpected CSV columns {header}, expected {CSV_COLUMNS}")
        rows = []
        for rec in reader:
            row = {}
            for col, raw in zip(CSV_COLUMNS, rec):
                if col in _INT_COLUMNS:
                    row[col] = int(raw)
                elif col in _FLOAT_COLUMNS:
                    row[col] = float(raw)
                else:
                    row[col] = raw
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Aggregation. Sequential (left-to-right) summation keeps the aggregates
# reproducible bit-for-bit by any consumer of the CSV, whatever language.


def _seq_mean_std(values):
    n = len(values)
    total = 0.0
    for v in values:
        total += v
    mean = total / n
    if n < 2:
        return mean, 0.0
    acc = 0.0
    for v in values:
        acc += (v - mean) ** 2
    return mean, math.sqrt(acc / (n - 1))


def convergence_iteration(iteration_rows, residual_tol: float):
    """First iteration whose mean relative residual change is below tol.

    iteration_rows: trace rows of one (cell, trial), any order. Falls back
    to the last iteration when the tolerance is never met.
    """
    per_iter: dict[int, dict[int, float]] = {}
    for row in iteration_rows:
        per_iter.setdefault(row["iteration"], {})[row["user"]] = row["residual_norm"]
    its = sorted(per_iter)
    for prev_it, cur_it in zip(its, its[1:]):
        prev, cur = per_iter[prev_it], per_iter[cur_it]
        shared = sorted(set(prev) & set(cur))
        if not shared:
            continue
        changes = []
        for u in shared:
            if prev[u] == 0.0:
                changes.append(0.0 if cur[u] == 0.0 else math.inf)
            else:
                changes.append(abs(cur[u] - prev[u]) / prev[u])
        if sum(changes) / len(changes) < residual_tol:
            return cur_it
    return its[-1] if its else 0


def summarize(rows, residual_tol: float = 1e-4) -> dict:
    """Aggregate result rows per cell.

    Returns {"final": [...], "by_iteration": [...]}: final entries carry the
    trial count, mean and sample std of the final joint NMSE and the median
    convergence iteration; by_iteration entries carry the mean joint NMSE of
    the trials that reached that iteration (for convergence curves).
    """
    if not rows:
        raise ValueError("no rows to summarize")
    rows = sorted(rows, key=_sort_key)

    final_values: dict[tuple, list] = {}
    trace_by_trial: dict[tuple, list] = {}
    iter_values: dict[tuple, list] = {}
    for row in rows:
        cell = (row["algorithm"], row["snr_db"], row["pilot_len"])
        if row["iteration"] == FINAL_ITERATION:
            if row["user"] == 0:
                final_values.setdefault(cell, []).append(row["mean_nmse"])
        else:
            trace_by_trial.setdefault(cell + (row["trial"],), []).append(row)
            if row["user"] == 0:
                iter_values.setdefault(cell + (row["iteration"],), []).append(row["mean_nmse"])

    final = []
    for cell in sorted(final_values):
        values = final_values[cell]
        mean, std = _seq_mean_std(values)
        conv = [
            convergence_iteration(trace_by_trial[key], residual_tol)
            for key in sorted(trace_by_trial)
            if key[:3] == cell
        ]
        final.append({
            "algorithm": cell[0],
            "snr_db": cell[1],
            "pilot_len": cell[2],
            "trials": len(values),
            "nmse_mean": mean,
            "nmse_std": std,
            "convergence_iteration_median": float(np.median(conv)) if conv else math.nan,
        })

    by_iteration = []
    for key in sorted(iter_values):
        values = iter_values[key]
        mean, _ = _seq_mean_std(values)
        by_iteration.append({
            "algorithm": key[0],
            "snr_db": key[1],
            "pilot_len": key[2],
            "iteration": key[3],
            "nmse_mean": mean,
            "count": len(values),
        })
    return {"final": final, "by_iteration": by_iteration}


def print_summary(summary: dict, stream=None) -> None:
    """Render the final-cell aggregate table."""
    out = stream or io.StringIO()
    out.write(f"{'algorithm':>10} {'snr_db':>8} {'T':>5} {'trials':>7} "
              f"{'mean NMSE':>12} {'std':>12} {'conv_iter':>10}\n")
    for entry in summary["final"]:
        out.write(f"{entry['algorithm']:>10} {entry['snr_db']:>8g} "
                  f"{entry['pilot_len']:>5d} {entry['trials']:>7d} "
                  f"{entry['nmse_mean']:>12.4e} {entry['nmse_std']:>12.4e} "
                  f"{entry['convergence_iteration_median']:>10.1f}\n")
    if stream is None:
        print(out.getvalue(), end="")
