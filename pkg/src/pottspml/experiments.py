"""Monte Carlo harness: accuracy and contamination-sensitivity studies.

One replication simulates a class map, emits Gaussian observations at each
requested class separation, classifies them (per-site ML, then ICM seeded
with the ML map at the true ``beta``), and estimates the smoothness
parameter with both score functions on up to three maps:

* ``pure`` — the simulated map itself (model holds exactly);
* ``ml``   — the per-site ML classification (spatially unstructured noise);
* ``icm``  — the ICM output (over-smoothed relative to a model draw).

Cells are keyed by (L, beta, k, method, scenario).  Realizations are shared
across ``k`` within a cell — the class map does not depend on the emission
separation — via value-based seed derivation, so contamination comparisons
at different separations are matched on fields.

Everything is a pure function of the config (master seed included):
replication seeds derive from the master seed with a SplitMix64 chain,
replications may run in parallel processes, and aggregation folds results
in a fixed order, so reruns produce byte-identical CSVs.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import partial
from pathlib import Path

import numpy as np

from ._version import __version__ as _pkg_version
from .emission import build_separated_model, ml_classify, sample_emission
from .estimator import (
    EstimationResult,
    NonConvergenceError,
    ScoreContext,
    SolverOptions,
    estimate_beta,
    sample_curve,
)
from .lattice import GridDims, LabelField, SECOND_ORDER
from .rng import RNG_ALGORITHM, derive_seed, float_bits, make_rng
from .sampler import SamplerConfig, simulate_potts
from .segmentation import IcmOptions, icm

__all__ = [
    "ExperimentConfig",
    "ReplicationRecord",
    "AccuracyRow",
    "parse_config",
    "format_config",
    "read_config",
    "run_replication",
    "aggregate",
    "run_experiment",
    "write_accuracy_csv",
    "export_bias_vs_beta",
    "export_curve_bundles",
    "ACCURACY_CSV_HEADER",
    "BIAS_CSV_HEADER",
    "CURVES_CSV_HEADER",
]

SCENARIOS = ("pure", "ml", "icm")
METHODS = ("prior", "post")

ACCURACY_CSV_HEADER = "L,beta,k,method,scenario,rmse,mean,std,bias,degenerate_count"
BIAS_CSV_HEADER = "L,k,beta,method,scenario,bias"
CURVES_CSV_HEADER = "replication,variant,beta,score"

# seed-derivation stream tags
_STREAM_FIELD = 0
_STREAM_EMISSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment request; the output is a pure function of this."""

    dims: GridDims
    L_values: tuple[int, ...]
    beta_values: tuple[float, ...]
    k_values: tuple[float, ...]
    sigma: float
    base_mean: float
    replications: int
    master_seed: int
    scenarios: tuple[str, ...] = ("pure",)
    curve_grid: tuple[float, ...] = ()
    sweeps: int = 1000
    icm_max_sweeps: int = 100
    solver: SolverOptions = dc_field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.L_values or any(L < 2 for L in self.L_values):
            raise ValueError("L_values must be non-empty with entries >= 2")
        if not self.beta_values:
            raise ValueError("beta_values must be non-empty")
        if not self.k_values or any(k <= 0 for k in self.k_values):
            raise ValueError("k_values must be non-empty and positive")
        if not (self.sigma > 0):
            raise ValueError("sigma must be positive")
        bad = [s for s in self.scenarios if s not in SCENARIOS]
        if bad or not self.scenarios:
            raise ValueError(f"scenarios must be a non-empty subset of "
                             f"{SCENARIOS}, got {self.scenarios}")


@dataclass
class ReplicationRecord:
    """Estimates (and optional curve samples) from one pipeline pass."""

    L: int
    beta: float
    k: float
    replication: int
    estimates: dict
    derivative_at_root: dict
    icm_sweeps: int = 0
    icm_converged: bool = True
    icm_objective_decreases: int = 0
    curves: list = dc_field(default_factory=list)


@dataclass(frozen=True)
class AccuracyRow:
    """Aggregated cell: root-mean-square error, mean, sample std, bias.

    Cells with fewer than two usable replications are unavailable (NaN
    statistics); degenerate replications are excluded and counted.
    """

    L: int
    beta: float
    k: float
    method: str
    scenario: str
    rmse: float
    mean: float
    std: float
    bias: float
    degenerate_count: int


# ---------------------------------------------------------------------------
# Config file: line-oriented `key = value`, lists comma-separated
# ---------------------------------------------------------------------------

_LIST_KEYS = {"L_values", "beta_values", "k_values", "scenarios", "curve_grid"}
_INT_KEYS = {"rows", "cols", "replications", "master_seed", "sweeps",
             "icm_max_sweeps"}
_FLOAT_KEYS = {"sigma", "base_mean"}


def parse_config(text: str, filename: str = "<config>") -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{filename}:{lineno}: expected `key = value`")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key == "scenarios":
                values[key] = tuple(v.strip() for v in val.split(",") if v.strip())
            elif key in _LIST_KEYS:
                items = [v.strip() for v in val.split(",") if v.strip()]
                if key == "L_values":
                    values[key] = tuple(int(v) for v in items)
                else:
                    values[key] = tuple(float(v) for v in items)
            else:
                raise ValueError(f"{filename}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if "unknown key" in str(exc):
                raise
            raise ValueError(
                f"{filename}:{lineno}: bad value {val!r} for {key!r}"
            ) from None
    missing = [k for k in ("rows", "cols", "L_values", "beta_values",
                           "k_values", "sigma", "base_mean", "replications",
                           "master_seed") if k not in values]
    if missing:
        raise ValueError(f"{filename}: missing keys: {', '.join(missing)}")
    dims = GridDims(values.pop("rows"), values.pop("cols"))
    return ExperimentConfig(dims=dims, **values)


def format_config(cfg: ExperimentConfig) -> str:
    def lst(xs):
        return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in xs)

    lines = [
        f"rows = {cfg.dims.rows}",
        f"cols = {cfg.dims.cols}",
        f"L_values = {lst(cfg.L_values)}",
        f"beta_values = {lst(cfg.beta_values)}",
        f"k_values = {lst(cfg.k_values)}",
        f"sigma = {cfg.sigma!r}",
        f"base_mean = {cfg.base_mean!r}",
        f"replications = {cfg.replications}",
        f"master_seed = {cfg.master_seed}",
        f"scenarios = {', '.join(cfg.scenarios)}",
        f"curve_grid = {lst(cfg.curve_grid)}",
        f"sweeps = {cfg.sweeps}",
        f"icm_max_sweeps = {cfg.icm_max_sweeps}",
    ]
    return "\n".join(lines) + "\n"


def read_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# Replication pipeline
# ---------------------------------------------------------------------------


def field_seed(master_seed: int, L: int, beta: float, replication: int) -> int:
    return derive_seed(master_seed, _STREAM_FIELD, L, float_bits(beta),
                       replication)


def emission_seed(master_seed: int, L: int, beta: float, k: float,
                  replication: int) -> int:
    return derive_seed(master_seed, _STREAM_EMISSION, L, float_bits(beta),
                       float_bits(k), replication)


def simulate_replication_field(cfg: ExperimentConfig, L: int, beta: float,
                               replication: int) -> LabelField:
    seed = field_seed(cfg.master_seed, L, beta, replication)
    return simulate_potts(cfg.dims, L, SamplerConfig(beta, cfg.sweeps, seed))


def _variant_name(method: str, scenario: str) -> str:
    return method if scenario == "pure" else f"{method}_{scenario}"


def run_replication_with_field(cfg: ExperimentConfig, field: LabelField,
                               L: int, beta: float, k: float,
                               replication: int) -> ReplicationRecord:
    model = build_separated_model(L, cfg.base_mean, cfg.sigma, k)
    rng = make_rng(emission_seed(cfg.master_seed, L, beta, k, replication))
    image = sample_emission(field, model, rng)

    maps = {"pure": field}
    rec = ReplicationRecord(L=L, beta=beta, k=k, replication=replication,
                            estimates={}, derivative_at_root={})
    if "ml" in cfg.scenarios or "icm" in cfg.scenarios:
        ml_map = ml_classify(image, model)
        maps["ml"] = ml_map
        if "icm" in cfg.scenarios:
            icm_res = icm(image, model, ml_map,
                          IcmOptions(beta=beta, max_sweeps=cfg.icm_max_sweeps))
            maps["icm"] = icm_res.field
            rec.icm_sweeps = icm_res.sweeps
            rec.icm_converged = icm_res.converged
            rec.icm_objective_decreases = icm_res.objective_decreases

    for scenario in cfg.scenarios:
        for method in METHODS:
            evidence = (image, model) if method == "post" else None
            ctx = ScoreContext(maps[scenario], SECOND_ORDER, evidence)
            try:
                result = estimate_beta(ctx, cfg.solver)
            except NonConvergenceError as exc:
                raise NonConvergenceError(
                    f"L={L} beta={beta} k={k} rep={replication} "
                    f"{method}/{scenario}: {exc}", exc.bracket) from exc
            rec.estimates[(method, scenario)] = result
            if not result.degenerate:
                rec.derivative_at_root[(method, scenario)] = (
                    ctx.derivative(result.beta_hat))
            if cfg.curve_grid:
                variant = _variant_name(method, scenario)
                for b, s in sample_curve(ctx, cfg.curve_grid):
                    rec.curves.append((variant, b, s))
    return rec


def run_replication(cfg: ExperimentConfig, L: int, beta: float, k: float,
                    replication: int) -> ReplicationRecord:
    """One full pipeline pass; deterministic in (cfg, L, beta, k, replication)."""
    field = simulate_replication_field(cfg, L, beta, replication)
    return run_replication_with_field(cfg, field, L, beta, k, replication)


def _run_task(cfg: ExperimentConfig, task: tuple[int, float, int]) -> list:
    # one simulated field serves every k
    L, beta, replication = task
    field = simulate_replication_field(cfg, L, beta, replication)
    return [run_replication_with_field(cfg, field, L, beta, k, replication)
            for k in cfg.k_values]


def run_all_replications(cfg: ExperimentConfig,
                         threads: int | None = None,
                         progress=None) -> list[ReplicationRecord]:
    """All replication records in deterministic (L, beta, replication, k) order.

    ``threads`` caps worker processes (default: CPU count); results are
    identical for any worker count.  ``progress``, if given, is called with
    (done_tasks, total_tasks) after each simulated field completes.
    """
    tasks = [(L, beta, rep)
             for L in cfg.L_values
             for beta in cfg.beta_values
             for rep in range(cfg.replications)]
    records: list[ReplicationRecord] = []
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(threads, len(tasks)))
    run = partial(_run_task, cfg)
    if threads == 1:
        for i, task in enumerate(tasks):
            records.extend(run(task))
            if progress:
                progress(i + 1, len(tasks))
    else:
        chunksize = max(1, len(tasks) // (8 * threads))
        with ProcessPoolExecutor(max_workers=threads) as ex:
            for i, recs in enumerate(ex.map(run, tasks, chunksize=chunksize)):
                records.extend(recs)
                if progress:
                    progress(i + 1, len(tasks))
    return records


# ---------------------------------------------------------------------------
# Aggregation and CSV export
# ---------------------------------------------------------------------------


def aggregate(records: list[ReplicationRecord],
              cfg: ExperimentConfig) -> list[AccuracyRow]:
    """Per-cell accuracy statistics, in the config's cell order.

    ``rmse`` is sqrt(mean((estimate - beta)^2)), ``std`` the sample standard
    deviation (denominator r - 1), ``bias`` the mean minus the true value;
    degenerate replications are excluded from all three and counted.
    """
    by_cell: dict = {}
    for rec in records:
        by_cell.setdefault((rec.L, rec.beta, rec.k), []).append(rec)
    rows = []
    for L in cfg.L_values:
        for beta in cfg.beta_values:
            for k in cfg.k_values:
                cell = by_cell.get((L, beta, k), [])
                for method in METHODS:
                    for scenario in cfg.scenarios:
                        key = (method, scenario)
                        values = [r.estimates[key].beta_hat for r in cell
                                  if not r.estimates[key].degenerate]
                        degenerate = sum(1 for r in cell
                                         if r.estimates[key].degenerate)
                        if len(values) >= 2:
                            arr = np.asarray(values)
                            rmse = float(np.sqrt(np.mean((arr - beta) ** 2)))
                            mean = float(arr.mean())
                            std = float(arr.std(ddof=1))
                            bias = mean - beta
                        else:
                            rmse = mean = std = bias = float("nan")
                        rows.append(AccuracyRow(L, beta, k, method, scenario,
                                                rmse, mean, std, bias,
                                                degenerate))
    return rows


def _fmt(x: float) -> str:
    return repr(float(x))


def write_accuracy_csv(rows: list[AccuracyRow], path: str | Path) -> None:
    lines = [ACCURACY_CSV_HEADER]
    for r in rows:
        lines.append(f"{r.L},{_fmt(r.beta)},{_fmt(r.k)},{r.method},"
                     f"{r.scenario},{_fmt(r.rmse)},{_fmt(r.mean)},"
                     f"{_fmt(r.std)},{_fmt(r.bias)},{r.degenerate_count}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_bias_vs_beta(rows: list[AccuracyRow], path: str | Path) -> None:
    """Bias of every cell, shaped for plotting bias-versus-beta curves."""
    lines = [BIAS_CSV_HEADER]
    for r in rows:
        lines.append(f"{r.L},{_fmt(r.k)},{_fmt(r.beta)},{r.method},"
                     f"{r.scenario},{_fmt(r.bias)}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_curve_bundles(records: list[ReplicationRecord],
                         path: str | Path) -> None:
    """Long-format score curves of every replication and variant."""
    lines = [CURVES_CSV_HEADER]
    for rec in records:
        for variant, beta, score in rec.curves:
            lines.append(f"{rec.replication},{variant},{_fmt(beta)},"
                         f"{_fmt(score)}")
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path,
                   threads: int | None = None,
                   progress=None) -> tuple[list[AccuracyRow], list[ReplicationRecord]]:
    """Run every cell, write accuracy.csv / bias.csv / curves.csv + metadata."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = run_all_replications(cfg, threads=threads, progress=progress)
    rows = aggregate(records, cfg)
    write_accuracy_csv(rows, out_dir / "accuracy.csv")
    export_bias_vs_beta(rows, out_dir / "bias.csv")
    export_curve_bundles(records, out_dir / "curves.csv")
    meta = format_config(cfg) + f"rng = {RNG_ALGORITHM}\nversion = {_pkg_version}\n"
    (out_dir / "experiment.meta").write_text(meta)
    return rows, records
