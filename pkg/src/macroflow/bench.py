"""Benchmark / ablation runner over (method x prior x steps) arms.

Every arm runs the same instances with the same seed list, so comparisons are
paired by construction. Wall time is measured around sampling only and kept
in a separate artifact, leaving the main report bitwise reproducible.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .core import PlacementInstance, hpwl, is_legal, overlap_ratio
from .io import read_dataset, read_instance
from .network import VelocityModel
from .sampling import SamplerConfig, sample


@dataclass(frozen=True)
class BenchArm:
    name: str
    checkpoint: str | None = None
    prior: str = "uniform"
    steps: int = 50
    mode: str = "hard_constraint"


@dataclass(frozen=True)
class BenchRow:
    instance_id: str
    method: str
    prior: str
    steps: int
    seed: int
    hpwl: float
    overlap_ratio: float
    legal: bool
    wall_time_s: float


@dataclass
class BenchSpec:
    arms: list[BenchArm]
    instances: list[tuple[str, PlacementInstance]]
    seeds: list[int]
    grid_cols: int = 64
    grid_rows: int = 64
    boundary_weight: float = 0.1
    threads: int | None = None


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    skipped: list[dict] = field(default_factory=list)


def default_threads() -> int:
    env = os.environ.get("MACROFLOW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def load_bench_spec(path) -> BenchSpec:
    """Read a benchmark description file; see README for the schema."""
    doc = json.loads(Path(path).read_text())
    base = Path(path).parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    inst_field = doc["instances"]
    instances: list[tuple[str, PlacementInstance]] = []
    if isinstance(inst_field, str):
        directory = resolve(inst_field)
        for i, (instance, _) in enumerate(read_dataset(directory, require_placement=False)):
            instances.append((f"{directory.name}/{i:05d}", instance))
    else:
        for p in inst_field:
            instance, _ = read_instance(resolve(p))
            instances.append((Path(p).stem, instance))

    seeds_field = doc.get("seeds", [0])
    seeds = list(range(seeds_field)) if isinstance(seeds_field, int) else [int(s) for s in seeds_field]

    arms = [
        BenchArm(
            name=a["name"],
            checkpoint=str(resolve(a["checkpoint"])) if a.get("checkpoint") else None,
            prior=str(a.get("prior", "uniform")),
            steps=int(a.get("steps", 50)),
            mode=a.get("mode", "hard_constraint"),
        )
        for a in doc["arms"]
    ]
    return BenchSpec(
        arms=arms,
        instances=instances,
        seeds=seeds,
        grid_cols=int(doc.get("grid_cols", 64)),
        grid_rows=int(doc.get("grid_rows", 64)),
        boundary_weight=float(doc.get("boundary_weight", 0.1)),
        threads=doc.get("threads"),
    )


def _paired_pvalue(a: np.ndarray, b: np.ndarray) -> float:
    """One-sided paired test of mean(a) < mean(b)."""
    diffs = np.asarray(a) - np.asarray(b)
    if np.allclose(diffs.std(), 0.0):
        return 1.0
    return float(stats.ttest_rel(a, b, alternative="less").pvalue)


def compute_aggregates(rows: list[BenchRow]) -> dict:
    """Per-arm means, HPWL ratios normalized to the best arm per (instance, seed),
    and pairwise one-sided paired-test p-values."""
    arms = sorted({r.method for r in rows})
    groups: dict[tuple[str, int], dict[str, float]] = {}
    for r in rows:
        groups.setdefault((r.instance_id, r.seed), {})[r.method] = r.hpwl

    shared = [g for g in groups.values() if len(g) == len(arms)]
    per_arm: dict[str, dict] = {}
    timing: dict[str, float] = {}
    for arm in arms:
        arm_rows = [r for r in rows if r.method == arm]
        entry = {
            "mean_hpwl": float(np.mean([r.hpwl for r in arm_rows])),
            "mean_overlap_ratio": float(np.mean([r.overlap_ratio for r in arm_rows])),
            "legal_fraction": float(np.mean([r.legal for r in arm_rows])),
            "runs": len(arm_rows),
        }
        if shared:
            ratios = [g[arm] / min(g.values()) for g in shared if min(g.values()) > 0]
            entry["mean_hpwl_ratio"] = float(np.mean(ratios)) if ratios else float("nan")
        per_arm[arm] = entry
        timing[arm] = float(np.mean([r.wall_time_s for r in arm_rows]))

    paired = {}
    for a in arms:
        for b in arms:
            if a >= b:
                continue
            va = np.array([g[a] for g in shared])
            vb = np.array([g[b] for g in shared])
            if len(va):
                paired[f"{a}<{b}"] = _paired_pvalue(va, vb)
                paired[f"{b}<{a}"] = _paired_pvalue(vb, va)
    return {"arms": per_arm, "paired_pvalues_hpwl": paired, "timing": {"mean_wall_time_s": timing}}


def run_ablation(spec: BenchSpec, models: dict[str, VelocityModel] | None = None) -> BenchReport:
    """Run every (arm x instance x seed) cell and aggregate.

    Models come either from `models[arm.name]` or from the arm's checkpoint;
    arms whose checkpoint is missing are skipped and listed in the report.
    """
    report = BenchReport()
    loaded: dict[str, VelocityModel] = {}
    for arm in spec.arms:
        if models and arm.name in models:
            loaded[arm.name] = models[arm.name]
        elif arm.checkpoint and Path(arm.checkpoint).exists():
            loaded[arm.name] = VelocityModel.load(arm.checkpoint)
        else:
            report.skipped.append({"arm": arm.name, "reason": f"missing checkpoint {arm.checkpoint!r}"})

    cells = [
        (arm, idx, instance_id, instance, seed)
        for arm in spec.arms
        if arm.name in loaded
        for idx, (instance_id, instance) in enumerate(spec.instances)
        for seed in spec.seeds
    ]

    def run_cell(cell) -> BenchRow:
        arm, idx, instance_id, instance, seed = cell
        config = SamplerConfig(
            prior=arm.prior,
            steps=arm.steps,
            mode=arm.mode,
            grid_cols=spec.grid_cols,
            grid_rows=spec.grid_rows,
            boundary_weight=spec.boundary_weight,
        )
        rng = np.random.default_rng(np.random.SeedSequence((seed, idx)))
        start = time.perf_counter()
        positions = sample(loaded[arm.name], instance, config, rng)
        wall = time.perf_counter() - start
        return BenchRow(
            instance_id=instance_id,
            method=arm.name,
            prior=arm.prior,
            steps=arm.steps,
            seed=seed,
            hpwl=hpwl(instance, positions),
            overlap_ratio=overlap_ratio(instance, positions),
            legal=is_legal(instance, positions),
            wall_time_s=wall,
        )

    workers = spec.threads or default_threads()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        report.rows = list(pool.map(run_cell, cells))
    report.aggregates = compute_aggregates(report.rows)
    return report


_REPORT_COLUMNS = ("instance_id", "method", "prior", "steps", "seed", "hpwl", "overlap_ratio", "legal")


def report_csv(report: BenchReport) -> str:
    """Deterministic per-instance table (timing excluded; see timing_csv)."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_REPORT_COLUMNS)
    for r in report.rows:
        writer.writerow([r.instance_id, r.method, r.prior, r.steps, r.seed,
                         repr(r.hpwl), repr(r.overlap_ratio), int(r.legal)])
    return buf.getvalue()


def timing_csv(report: BenchReport) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("instance_id", "method", "seed", "wall_time_s"))
    for r in report.rows:
        writer.writerow([r.instance_id, r.method, r.seed, f"{r.wall_time_s:.6f}"])
    return buf.getvalue()


def write_report(report: BenchReport, out_dir) -> None:
    """report.csv / aggregates.json are bitwise reproducible for fixed seeds;
    wall-clock data lives only in report_timing.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report_csv(report))
    (out / "report_timing.csv").write_text(timing_csv(report))
    deterministic = {k: v for k, v in report.aggregates.items() if k != "timing"}
    payload = {"aggregates": deterministic, "skipped": report.skipped}
    (out / "aggregates.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
