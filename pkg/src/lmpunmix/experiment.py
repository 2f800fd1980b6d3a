"""Batch experiment harness behind the CLI.

An experiment is described by a JSON document (see :class:`ExperimentSpec`).
Every (snr, run) cell gets its own seed so cells can run in any order and
on any number of worker processes with identical results::

    sub_seed = int.from_bytes(sha256(f"{seed}:{snr}:{run}").digest()[:8], "little") >> 1

where ``snr`` is rendered with ``repr(float(snr))`` (``'inf'`` for the
noiseless case).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import io
from .baselines import distributed_unmix, fcls, l_half_nmf, nmf, vca
from .metrics import evaluate
from .synth import bundled_library, make_scene
from .types import HyperCube, UnmixConfig
from .unmixer import initialize, unmix

log = logging.getLogger(__name__)

ALGORITHMS = ("proposed", "distributed", "nmf", "l12nmf", "vca-fcls")

# per-algorithm defaults layered over UnmixConfig's own defaults
ALGORITHM_DEFAULTS: Dict[str, dict] = {
    "proposed": {"p": 1.75, "q1": 2.0, "q2": 1.0},
    "distributed": {"p": 2.0, "q1": 2.0, "lam": 0.0},
    "nmf": {},
    "l12nmf": {},
    "vca-fcls": {},
}

DEFAULT_SCENE = {
    "library": None,
    "c": 6,
    "width": 64,
    "height": 64,
    "filter_size": 3,
    "snr_db": 25.0,
    "no_pure_pixels": True,
}

BUNDLED_LIBRARY = "bundled:mineral_library.csv"


def derive_seed(seed: int, snr, run: int) -> int:
    key = f"{int(seed)}:{float(snr)!r}:{int(run)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


@dataclass
class ExperimentSpec:
    scene: dict = field(default_factory=lambda: dict(DEFAULT_SCENE))
    cube: Optional[str] = None
    truth: Optional[str] = None
    algorithms: List[str] = field(default_factory=lambda: ["proposed", "distributed"])
    overrides: Dict[str, dict] = field(default_factory=dict)
    snr_list: Optional[List[float]] = None
    runs: int = 1
    seed: int = 0
    out: str = "out"
    workers: int = 1
    record_timings: bool = False
    report_pixels: bool = False

    def __post_init__(self):
        self.scene = {**DEFAULT_SCENE, **(self.scene or {})}
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}; choose from {list(ALGORITHMS)}")
        if int(self.runs) < 1:
            raise ValueError("runs must be >= 1")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        bad = [k for k in self.overrides if k not in ALGORITHMS and k != "all"]
        if bad:
            raise ValueError(f"overrides for unknown algorithms {bad}")

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            data = json.load(fh)
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown experiment fields {sorted(extra)}")
        return cls(**data)

    def config_for(self, algorithm: str, seed: int) -> UnmixConfig:
        opts = {"c": int(self.scene["c"]), "seed": seed}
        opts.update(ALGORITHM_DEFAULTS[algorithm])
        opts.update(self.overrides.get("all", {}))
        opts.update(self.overrides.get(algorithm, {}))
        return UnmixConfig(**opts)


def _library_provenance(scene: dict):
    path = scene.get("library")
    if path is None:
        from importlib.resources import as_file, files

        with as_file(files("lmpunmix") / "data" / "mineral_library.csv") as p:
            return bundled_library(), {"path": BUNDLED_LIBRARY, "sha256": io.file_hash(p)}
    return io.read_library_csv(path), {"path": str(path), "sha256": io.file_hash(path)}


def run_algorithm(name: str, cube: HyperCube, cfg: UnmixConfig, init=None):
    """Run one method; returns ``(A, S, info)`` with plain arrays."""
    if name == "proposed":
        r = unmix(cube, cfg, init=init)
    elif name == "distributed":
        r = distributed_unmix(cube, cfg, init=init)
    elif name == "nmf":
        r = nmf(cube, cfg.c, cfg.max_iter, cfg.epsilon, cfg.seed, init=init)
    elif name == "l12nmf":
        r = l_half_nmf(cube, cfg.c, cfg.max_iter, cfg.epsilon, cfg.seed, lam=cfg.lam, init=init)
    elif name == "vca-fcls":
        if init is None:
            A = vca(cube, cfg.c, cfg.seed).data
            S = fcls(cube, A).data
        else:
            A, S = init
        return np.asarray(A), np.asarray(S), {"cost_trace": [], "stop_reason": "max-iter", "iterations_run": 0}
    else:
        raise ValueError(f"unknown algorithm {name!r}")
    trace = list(getattr(r, "cost_trace", None) or getattr(r, "residual_trace", []))
    info = {"cost_trace": trace, "stop_reason": r.stop_reason, "iterations_run": r.iterations_run}
    if hasattr(r, "lam") and name in ("proposed", "distributed"):
        info["lambda"] = r.lam
    S = r.S.data if hasattr(r.S, "data") else r.S
    return np.asarray(r.A.data), np.asarray(S), info


def _needs_shared_init(spec: ExperimentSpec, algorithms, seed) -> bool:
    return any(spec.config_for(a, seed).init == "vca-fcls" for a in algorithms)


def _run_on_cube(spec: ExperimentSpec, cube, truth, seed, base_prov, extra_cfg):
    """All requested algorithms on one cube; returns list of (name, report, A, S)."""
    shared = None
    if _needs_shared_init(spec, spec.algorithms, seed):
        # one VCA-FCLS start shared by every method so comparisons are paired
        c0 = spec.config_for(spec.algorithms[0], seed).with_(init="vca-fcls")
        t0 = time.perf_counter()
        try:
            shared = initialize(cube, c0)
        except ValueError as exc:
            # each method retries and records the failure itself
            log.warning("shared initialization failed: %s", exc)
        t_init = time.perf_counter() - t0
    else:
        t_init = 0.0
    out = []
    for name in spec.algorithms:
        cfg = spec.config_for(name, seed)
        init = shared if cfg.init == "vca-fcls" else None
        t0 = time.perf_counter()
        try:
            A, S, info = run_algorithm(name, cube, cfg, init)
        except (ArithmeticError, ValueError) as exc:
            # a failed method is reported, the others still run
            log.warning("%s failed: %s", name, exc)
            report = io.RunReport(
                algorithm=name, config={"algorithm": name, **cfg.to_dict(), **extra_cfg},
                cost_trace=[], stop_reason="error", iterations_run=0,
                provenance=base_prov, extra={"error": f"{type(exc).__name__}: {exc}"},
            )
            out.append((name, report, None, None))
            continue
        elapsed = time.perf_counter() - t0
        ev = None
        if truth is not None:
            rep = evaluate(truth[0], truth[1], A, S)
            ev = rep.to_dict(include_pixels=spec.report_pixels)
        config = {"algorithm": name, **cfg.to_dict(), **extra_cfg}
        report = io.RunReport(
            algorithm=name,
            config=config,
            cost_trace=info["cost_trace"],
            stop_reason=info["stop_reason"],
            iterations_run=info["iterations_run"],
            eval=ev,
            provenance=base_prov,
            timings={"init_s": t_init, "run_s": elapsed} if spec.record_timings else None,
            extra={"lambda": info["lambda"]} if "lambda" in info else {},
        )
        out.append((name, report, A, S))
    return out


def _cell_task(args):
    spec_dict, snr, run = args
    spec = ExperimentSpec(**spec_dict)
    sub = derive_seed(spec.seed, snr, run)
    sc = spec.scene
    library, lib_prov = _library_provenance(sc)
    scene = make_scene(
        library, int(sc["c"]), int(sc["width"]), int(sc["height"]), int(sc["filter_size"]),
        float(snr), seed=sub, no_pure_pixels=bool(sc["no_pure_pixels"]),
    )
    prov = {"library": lib_prov, "scene_names": list(scene.names)}
    extra = {"snr_db": float(snr), "run": int(run), "scene_seed": sub, "experiment_seed": spec.seed}
    results = _run_on_cube(spec, scene.cube, (scene.true_A, scene.true_S), sub, prov, extra)
    return [(snr, run, name, report.to_dict()) for name, report, _, _ in results]


def _snr_label(snr) -> str:
    snr = float(snr)
    return "inf" if np.isinf(snr) else f"{snr:g}"


def run_sweep(spec: ExperimentSpec) -> int:
    """Synthetic SNR x run sweep; writes per-run reports and CSV summaries.

    Returns the number of failed algorithm runs.
    """
    out = Path(spec.out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    snrs = spec.snr_list if spec.snr_list is not None else [spec.scene["snr_db"]]
    tasks = [(asdict(spec), float(s), r) for s in snrs for r in range(int(spec.runs))]
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=int(spec.workers)) as pool:
            cells = list(pool.map(_cell_task, tasks))
    else:
        cells = [_cell_task(t) for t in tasks]
    rows, failures = [], 0
    for cell in cells:
        for snr, run, name, rep in cell:
            path = out / "reports" / f"snr{_snr_label(snr)}_run{run:02d}_{name}.json"
            io.write_json(rep, path)
            ev = rep["eval"]
            if rep["stop_reason"] == "error":
                failures += 1
                continue
            rows.append({
                "snr": _snr_label(snr), "algorithm": name, "run": run,
                "rms_sad": ev["rms_sad"], "rms_aad": ev["rms_aad"],
                "mean_aad": ev["mean_aad"], "mean_sad": ev["mean_sad"],
            })
    write_sweep_csv(rows, out / "sweep.csv")
    write_summary_csv(summarize(rows), out / "sweep_summary.csv")
    return failures


SWEEP_FIELDS = ["snr", "algorithm", "run", "rms_sad", "rms_aad", "mean_aad", "mean_sad"]
METRICS = ["rms_sad", "rms_aad", "mean_aad", "mean_sad"]


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(r[k])) if k in METRICS else r[k]) for k in SWEEP_FIELDS})


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["run"] = int(r["run"])
        for k in METRICS:
            r[k] = float(r[k])
    return rows


def summarize(rows):
    """Mean and sample std per (snr, algorithm) cell, in first-seen order."""
    cells: Dict[tuple, list] = {}
    for r in rows:
        cells.setdefault((r["snr"], r["algorithm"]), []).append(r)
    out = []
    for (snr, alg), rs in cells.items():
        row = {"snr": snr, "algorithm": alg, "n": len(rs)}
        for m in METRICS:
            v = np.array([r[m] for r in rs])
            row[f"{m}_mean"] = float(v.mean())
            row[f"{m}_std"] = float(v.std(ddof=1)) if v.size > 1 else 0.0
        out.append(row)
    return out


def write_summary_csv(summary, path) -> None:
    fields = ["snr", "algorithm", "n"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in summary:
            w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in fields})


def run_on_files(spec: ExperimentSpec) -> int:
    """Run every algorithm on a cube file, evaluating when a truth bundle is given.

    Returns the number of failed algorithms.
    """
    out = Path(spec.out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    cube = io.read_cube_csv(spec.cube)
    prov = {"cube": {"path": str(spec.cube), "sha256": io.file_hash(spec.cube)}}
    truth = None
    if spec.truth is not None:
        A, S, _ = io.read_truth(spec.truth)
        tdir = Path(spec.truth)
        tdir = tdir.parent if tdir.is_file() else tdir
        prov["truth"] = {
            name: {"path": str(tdir / name), "sha256": io.file_hash(tdir / name)}
            for name in ("truth.json", "A.csv", "S.csv")
        }
        truth = (A, S)
    failures = 0
    for name, report, A, S in _run_on_cube(spec, cube, truth, spec.seed, prov, {}):
        io.write_report(report, out / "reports" / f"{name}.json")
        if A is None:
            failures += 1
            continue
        io.write_matrix_csv(A, out / f"A_{name}.csv")
        io.write_matrix_csv(S, out / f"S_{name}.csv")
    return failures
