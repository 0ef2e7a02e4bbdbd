"""Multi-sample batch execution, covariate extraction, and the timing harness.

Batch runs fan out over samples (optionally across processes) with
deterministic per-sample seeds derived by hashing the master seed together
with the sample id, so results do not depend on scheduling order. Per-sample
failures are logged and skipped; they never abort the batch. Output is a
long-format tab-separated results table plus a side-car JSON metadata
document (timestamps live only in the metadata, so result tables are
byte-identical across reruns of the same config and seed).
"""

from __future__ import annotations

import hashlib
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from ._version import __version__
from .errors import KampError, RadiusNotOnGridError
from .geometry import EdgeCorrection, PointPattern, Window
from .inference import run_kamp, run_kamp_lite, run_theoretical
from .io import CellTable, write_table
from .kstat import MarkQuery, RadiusGrid
from .permutation import perm_null
from .simulate import IMMUNE, Condition, SimScenario, simulate

RESULT_COLUMNS = (
    "sample_id",
    "method",
    "r",
    "khat",
    "expectation",
    "variance",
    "z",
    "pvalue",
    "ktilde",
    "n_cells",
    "n_marked",
    "seed",
)

KNOWN_METHODS = ("kamp", "kamp_lite", "perm", "k_theoretical")


def derive_seed(master_seed: int, *parts) -> int:
    """Deterministic 63-bit seed from the master seed and arbitrary labels."""
    digest = hashlib.sha256(
        ("\x1f".join([str(master_seed), *map(str, parts)])).encode()
    ).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class RunConfig:
    """Batch configuration for run_batch."""

    query: MarkQuery
    methods: tuple[str, ...] = ("kamp",)
    r_max: float | None = None
    r_step: float | None = None
    radii: np.ndarray | None = None
    correction: EdgeCorrection = EdgeCorrection.TRANSLATION
    thin_prob: float = 0.5
    n_perms: int = 1000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.methods:
            raise KampError("at least one method must be selected")
        for method in self.methods:
            if method not in KNOWN_METHODS:
                raise KampError(
                    f"unknown method {method!r}; expected subset of {KNOWN_METHODS}"
                )
        if "perm" in self.methods and self.n_perms < 1:
            raise KampError("perm method requires n_perms >= 1")
        if self.workers < 1:
            raise KampError("workers must be >= 1")

    def grid_for(self, window: Window) -> RadiusGrid:
        if self.radii is not None:
            return RadiusGrid(np.asarray(self.radii, dtype=float))
        if self.r_max is not None:
            step = self.r_step if self.r_step else self.r_max / 100.0
            return RadiusGrid.from_range(self.r_max, step)
        return RadiusGrid.default(window)


def _result_rows(result):
    seed = result.seed if result.seed is not None else None
    rows = []
    for k, r in enumerate(result.grid.radii):
        rows.append(
            (
                result.sample_id,
                result.method,
                float(r),
                float(result.k_hat[k]),
                float(result.expectation[k]),
                float(result.variance[k]),
                float(result.z[k]),
                float(result.p_value[k]),
                float(result.k_tilde[k]),
                result.n_points,
                result.n_marked,
                seed,
            )
        )
    return rows


def run_sample(pattern: PointPattern, sample_id: str, cfg: RunConfig):
    """All configured methods on one sample.

    Returns (rows, timings, failures); failures carry (sample_id, method,
    message) and leave the other methods of the sample untouched.
    """
    grid = cfg.grid_for(pattern.window)
    rows, timings, failures = [], {}, []
    for method in cfg.methods:
        started = time.perf_counter()
        try:
            if method == "kamp":
                result = run_kamp(
                    pattern, cfg.query, grid, cfg.correction, sample_id=sample_id
                )
            elif method == "kamp_lite":
                result = run_kamp_lite(
                    pattern,
                    cfg.query,
                    grid,
                    cfg.correction,
                    keep_prob=cfg.thin_prob,
                    seed=derive_seed(cfg.seed, sample_id, "thin"),
                    sample_id=sample_id,
                )
            elif method == "perm":
                _, result = perm_null(
                    pattern,
                    cfg.query,
                    grid,
                    cfg.correction,
                    n_perms=cfg.n_perms,
                    seed=derive_seed(cfg.seed, sample_id, "perm"),
                    sample_id=sample_id,
                )
            else:
                result = run_theoretical(
                    pattern, cfg.query, grid, cfg.correction, sample_id=sample_id
                )
        except KampError as exc:
            failures.append((sample_id, method, str(exc)))
            continue
        timings[method] = time.perf_counter() - started
        rows.extend(_result_rows(result))
    return rows, timings, failures


def _run_one(args):
    sample_id, pattern, cfg = args
    return sample_id, run_sample(pattern, sample_id, cfg)


@dataclass
class BatchOutput:
    results_path: Path
    metadata_path: Path
    rows: list
    failures: list
    timings: dict = field(default_factory=dict)


def run_batch(table: CellTable, cfg: RunConfig, out_dir) -> BatchOutput:
    """Run every configured method on every sample and write result files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    tasks = [(sid, table.pattern(sid), cfg) for sid in table.sample_ids]
    per_sample = {}
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for sid, outcome in pool.map(_run_one, tasks):
                per_sample[sid] = outcome
    else:
        for task in tasks:
            sid, outcome = _run_one(task)
            per_sample[sid] = outcome

    method_order = {m: k for k, m in enumerate(cfg.methods)}
    rows, failures, timings = [], [], {}
    for sid in sorted(per_sample):
        sample_rows, sample_timings, sample_failures = per_sample[sid]
        rows.extend(sample_rows)
        failures.extend(sample_failures)
        timings[sid] = sample_timings
    rows.sort(key=lambda row: (row[0], method_order[row[1]], row[2]))

    results_path = out_dir / "results.tsv"
    write_table(results_path, RESULT_COLUMNS, rows)
    metadata_path = out_dir / "metadata.json"
    metadata = {
        "config": {
            "query": cfg.query.describe(),
            "bivariate": cfg.query.is_bivariate,
            "methods": list(cfg.methods),
            "r_max": cfg.r_max,
            "r_step": cfg.r_step,
            "explicit_radii": None if cfg.radii is None else list(map(float, cfg.radii)),
            "correction": cfg.correction.value,
            "thin_prob": cfg.thin_prob,
            "n_perms": cfg.n_perms,
            "seed": cfg.seed,
            "workers": cfg.workers,
        },
        "versions": {
            "kamp": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "kernel_backend": _kernels.active_backend(),
        },
        "input": table.source,
        "window_source": {
            sid: ("file" if sid in table.windows else "bounding_box")
            for sid in table.sample_ids
        },
        "p_value_convention": "one-sided upper tail; perm uses (1 + count >=) / (B + 1)",
        "wall_clock_seconds": timings,
        "failures": [
            {"sample_id": sid, "method": method, "error": message}
            for sid, method, message in failures
        ],
        "started_unix": started,
        "finished_unix": time.time(),
    }
    metadata_path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    return BatchOutput(
        results_path=results_path,
        metadata_path=metadata_path,
        rows=rows,
        failures=failures,
        timings=timings,
    )


COVARIATE_COLUMNS = ("sample_id", "method", "ktilde", "pvalue")


def extract_covariate(rows, r_star: float, rtol: float = 1e-9):
    """Per-sample degree-of-clustering covariate at one radius.

    ``rows`` is the long-format result table (sequence of tuples in
    RESULT_COLUMNS order, or of equal-length sequences with the same layout).
    Emits one (sample_id, method, ktilde, pvalue) row per sample and method;
    undefined p-values stay as the NA marker. Raises RadiusNotOnGridError if
    some (sample, method) group has no radius matching r_star.
    """
    groups: dict[tuple, list] = {}
    for row in rows:
        groups.setdefault((row[0], row[1]), []).append(row)
    out = []
    for (sid, method), group in sorted(
        groups.items(), key=lambda item: (item[0][0], item[0][1])
    ):
        hit = None
        for row in group:
            if abs(float(row[2]) - r_star) <= rtol * max(1.0, abs(r_star)):
                hit = row
                break
        if hit is None:
            raise RadiusNotOnGridError(
                f"radius {r_star} is not on the grid of sample {sid!r} ({method})"
            )
        out.append((sid, method, hit[8], hit[7]))
    return out


@dataclass
class BenchConfig:
    """Configuration of the method-timing study."""

    lambdas: tuple = (1000, 5000, 10000)
    abundances: tuple = (0.01, 0.1, 0.2)
    replicates: int = 50
    methods: tuple = ("kamp", "kamp_lite", "perm")
    n_perms: int = 1000
    seed: int = 0
    condition: Condition = Condition.HOM_NULL
    thin_prob: float = 0.5
    compare_kernels: bool = False


TIMING_COLUMNS = ("lambda_n", "abundance", "method", "replicate", "seconds")
KERNEL_COLUMNS = ("lambda_n", "abundance", "replicate", "backend", "seconds")


def _time_methods(pattern, cfg: BenchConfig, seed: int):
    grid = RadiusGrid.default(pattern.window)
    query = MarkQuery.univariate(IMMUNE)
    timings = {}
    for method in cfg.methods:
        started = time.perf_counter()
        if method == "kamp":
            run_kamp(pattern, query, grid)
        elif method == "kamp_lite":
            run_kamp_lite(pattern, query, grid, keep_prob=cfg.thin_prob, seed=seed)
        elif method == "perm":
            perm_null(pattern, query, grid, n_perms=cfg.n_perms, seed=seed)
        elif method == "k_theoretical":
            run_theoretical(pattern, query, grid)
        else:
            raise KampError(f"unknown benchmark method {method!r}")
        timings[method] = time.perf_counter() - started
    return timings


def run_benchmark(cfg: BenchConfig, out_dir) -> dict:
    """Time each method across the scenario grid; write plot-ready tables.

    Produces timings.tsv (one row per scenario, method, and replicate) and a
    median summary. When ``compare_kernels`` is set, the analytical-moment
    pipeline is additionally timed under every available kernel backend.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, kernel_rows = [], []
    for lam in cfg.lambdas:
        for p in cfg.abundances:
            for rep in range(cfg.replicates):
                scenario = SimScenario(
                    condition=cfg.condition,
                    lambda_n=lam,
                    abundance=p,
                    seed=derive_seed(cfg.seed, "bench", lam, p, rep),
                )
                pattern = simulate(scenario)
                timings = _time_methods(
                    pattern, cfg, derive_seed(cfg.seed, "method", lam, p, rep)
                )
                for method, seconds in timings.items():
                    rows.append((lam, p, method, rep, seconds))
                if cfg.compare_kernels:
                    backends = ["numpy"] + (["numba"] if _kernels.HAS_NUMBA else [])
                    for backend in backends:
                        with _kernels.use_backend(backend):
                            started = time.perf_counter()
                            run_kamp(pattern, MarkQuery.univariate(IMMUNE))
                            kernel_rows.append(
                                (lam, p, rep, backend, time.perf_counter() - started)
                            )
    write_table(out_dir / "timings.tsv", TIMING_COLUMNS, rows)

    summary = {}
    for lam, p, method, _, seconds in rows:
        summary.setdefault((lam, p, method), []).append(seconds)
    summary_rows = [
        (lam, p, method, float(np.median(times)), len(times))
        for (lam, p, method), times in sorted(summary.items(), key=lambda i: str(i[0]))
    ]
    write_table(
        out_dir / "timing_summary.tsv",
        ("lambda_n", "abundance", "method", "median_seconds", "replicates"),
        summary_rows,
    )
    if kernel_rows:
        write_table(out_dir / "kernel_timings.tsv", KERNEL_COLUMNS, kernel_rows)
    return {
        "timings": rows,
        "summary": summary_rows,
        "kernel_timings": kernel_rows,
    }
