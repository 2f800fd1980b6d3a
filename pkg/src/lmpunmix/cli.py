"""Command-line frontend: ``lmpunmix {generate,unmix,bound,evaluate}``.

Every command accepts ``--spec FILE`` (a JSON experiment document, see
:class:`lmpunmix.experiment.ExperimentSpec`); flags override spec fields.
``--seed`` defaults to 0 and ``--out`` to ``out``.

Exit codes
----------
0  success, every requested algorithm completed
1  one or more algorithms failed (their reports carry ``stop_reason: error``)
2  usage error or missing input file
3  malformed input file
4  invalid configuration value
5  numerical failure (e.g. non-positive step-size bound denominator)
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .analysis import BoundError, convergence_probe, stability_report
from .experiment import ALGORITHMS, ExperimentSpec, _library_provenance, run_on_files, run_sweep
from .metrics import evaluate
from .synth import make_scene
from .unmixer import NumericalError
from .weights import compute_weights

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_FORMAT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5

log = logging.getLogger("lmpunmix")


class UsageError(Exception):
    pass


def _floats(text: str):
    return [float(t) for t in text.split(",") if t.strip()]


def _load_spec(args) -> ExperimentSpec:
    """Spec file (if any) with command-line flags layered on top."""
    data = {}
    if args.spec is not None:
        if not Path(args.spec).is_file():
            raise FileNotFoundError(args.spec)
        with open(args.spec) as fh:
            data = json.load(fh)
        extra = set(data) - set(ExperimentSpec.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown experiment fields {sorted(extra)}")
    scene = dict(data.get("scene", {}))
    for flag, key in (("c", "c"), ("width", "width"), ("height", "height"),
                      ("filter_size", "filter_size"), ("snr", "snr_db"), ("library", "library")):
        v = getattr(args, flag, None)
        if v is not None:
            scene[key] = v
    if getattr(args, "allow_pure_pixels", False):
        scene["no_pure_pixels"] = False
    data["scene"] = scene
    for flag in ("seed", "out", "cube", "truth", "runs", "workers"):
        v = getattr(args, flag, None)
        if v is not None:
            data[flag] = v
    if getattr(args, "algorithms", None):
        data["algorithms"] = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    if getattr(args, "snr_list", None):
        data["snr_list"] = _floats(args.snr_list)
    if getattr(args, "max_iter", None) is not None:
        data.setdefault("overrides", {}).setdefault("all", {})["max_iter"] = args.max_iter
    if getattr(args, "record_timings", False):
        data["record_timings"] = True
    return ExperimentSpec(**data)


def _check_inputs(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(p)


def _scene_from_spec(spec: ExperimentSpec):
    sc = spec.scene
    library, lib_prov = _library_provenance(sc)
    scene = make_scene(
        library, int(sc["c"]), int(sc["width"]), int(sc["height"]), int(sc["filter_size"]),
        float(sc["snr_db"]), seed=int(spec.seed), no_pure_pixels=bool(sc["no_pure_pixels"]),
    )
    return scene, lib_prov


def cmd_generate(args) -> int:
    spec = _load_spec(args)
    if spec.scene.get("library") is not None:
        _check_inputs(spec.scene["library"])
    scene, lib_prov = _scene_from_spec(spec)
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_cube_csv(scene.cube, out / "cube.csv")
    io.write_truth(scene, out / "truth")
    io.write_json({"schema_version": io.SCHEMA_VERSION, "scene": spec.scene, "seed": spec.seed,
                   "library": lib_prov, "names": list(scene.names)}, out / "scene.json")
    print(out / "cube.csv")
    return EXIT_OK


def cmd_unmix(args) -> int:
    spec = _load_spec(args)
    if spec.cube is not None:
        _check_inputs(spec.cube, spec.truth)
        failures = run_on_files(spec)
    else:
        if spec.truth is not None:
            raise UsageError("--truth requires --cube")
        if spec.scene.get("library") is not None:
            _check_inputs(spec.scene["library"])
        failures = run_sweep(spec)
    print(spec.out)
    return EXIT_FAILED if failures else EXIT_OK


def cmd_bound(args) -> int:
    spec = _load_spec(args)
    cfg = spec.config_for("proposed", int(spec.seed))
    if spec.cube is not None:
        _check_inputs(spec.cube, args.signatures)
        if args.signatures is None:
            raise UsageError("--cube requires --signatures (an A matrix CSV)")
        cube = io.read_cube_csv(spec.cube)
        A = io.read_matrix_csv(args.signatures)
        w = compute_weights(cube, cfg.adjacency, cfg.lam)
        report = stability_report(A, w.graph, cfg.eta, w.lam)
        prov = {"cube": {"path": str(spec.cube), "sha256": io.file_hash(spec.cube)},
                "signatures": {"path": str(args.signatures), "sha256": io.file_hash(args.signatures)}}
        if args.probe:
            raise UsageError("--probe needs a synthetic scene (omit --cube)")
    else:
        scene, lib_prov = _scene_from_spec(spec)
        prov = {"library": lib_prov, "scene": spec.scene, "seed": spec.seed}
        if args.probe:
            w = compute_weights(scene.cube, cfg.adjacency, cfg.lam)
            base = stability_report(scene.true_A, w.graph, cfg.eta, w.lam).mu_bound
            mus = [f * base for f in _floats(args.probe)]
            report = convergence_probe(scene, cfg, mus, n_iter=args.n_iter)
        else:
            w = compute_weights(scene.cube, cfg.adjacency, cfg.lam)
            report = stability_report(scene.true_A, w.graph, cfg.eta, w.lam)
    out = Path(spec.out)
    path = out if out.suffix == ".json" else out / "bound.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    io.write_json({"schema_version": io.SCHEMA_VERSION, **report.to_dict(), "provenance": prov}, path)
    print(f"mu_bound = {report.mu_bound:.6g}  (single-node reading {report.mu_bound_single_node:.6g})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _check_inputs(args.truth, args.A, args.S)
    A_true, S_true, _ = io.read_truth(args.truth)
    A = io.read_matrix_csv(args.A)
    S = io.read_matrix_csv(args.S)
    rep = evaluate(A_true, S_true, A, S)
    tdir = Path(args.truth)
    tdir = tdir.parent if tdir.is_file() else tdir
    prov = {name: {"path": str(p), "sha256": io.file_hash(p)}
            for name, p in (("truth", tdir / "truth.json"), ("A", Path(args.A)), ("S", Path(args.S)))}
    doc = {"schema_version": io.SCHEMA_VERSION, "eval": rep.to_dict(include_pixels=args.pixels),
           "provenance": prov}
    out = Path(args.out)
    path = out if out.suffix == ".json" else out / "eval.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    io.write_json(doc, path)
    print(f"rms_sad = {rep.rms_sad:.6g}  rms_aad = {rep.rms_aad:.6g}")
    return EXIT_OK


def _common(p, out_default=True):
    p.add_argument("--spec", help="JSON experiment document")
    p.add_argument("--seed", type=int, help="experiment seed (default 0)")
    p.add_argument("--out", help="output directory (default 'out')")
    p.add_argument("-v", "--verbose", action="store_true")


def _scene_flags(p):
    g = p.add_argument_group("scene")
    g.add_argument("--c", type=int, help="number of endmembers")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--filter-size", type=int, help="low-pass window width")
    g.add_argument("--snr", type=float, help="SNR in dB (inf for noiseless)")
    g.add_argument("--library", help="spectral library CSV (default: bundled)")
    g.add_argument("--allow-pure-pixels", action="store_true",
                   help="do not resample scenes that contain pure pixels")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lmpunmix", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic cube and truth bundle")
    _common(g)
    _scene_flags(g)
    g.set_defaults(func=cmd_generate)

    u = sub.add_parser("unmix", help="run algorithms on a cube or a synthetic sweep")
    _common(u)
    _scene_flags(u)
    u.add_argument("--cube", help="input cube CSV (omit for a synthetic sweep)")
    u.add_argument("--truth", help="truth bundle directory for evaluation")
    u.add_argument("--algorithms", help=f"comma list from {','.join(ALGORITHMS)}")
    u.add_argument("--snr-list", help="comma list of SNRs in dB for a sweep")
    u.add_argument("--runs", type=int, help="Monte-Carlo runs per SNR")
    u.add_argument("--workers", type=int, help="worker processes")
    u.add_argument("--max-iter", type=int, help="iteration cap for every algorithm")
    u.add_argument("--record-timings", action="store_true", help="store wall times in reports")
    u.set_defaults(func=cmd_unmix)

    b = sub.add_parser("bound", help="step-size stability bound")
    _common(b)
    _scene_flags(b)
    b.add_argument("--cube", help="cube CSV (with --signatures) instead of a synthetic scene")
    b.add_argument("--signatures", help="A matrix CSV used for the bound")
    b.add_argument("--probe", help="comma list of bound multiples to test empirically, e.g. 0.5,10")
    b.add_argument("--n-iter", type=int, default=100, help="iterations per probe")
    b.set_defaults(func=cmd_bound)

    e = sub.add_parser("evaluate", help="score result matrices against a truth bundle")
    e.add_argument("--truth", required=True, help="truth bundle directory")
    e.add_argument("--A", required=True, help="estimated signature matrix CSV")
    e.add_argument("--S", required=True, help="estimated abundance matrix CSV")
    e.add_argument("--out", default="out", help="output directory or .json path")
    e.add_argument("--pixels", action="store_true", help="include per-pixel AAD")
    e.add_argument("-v", "--verbose", action="store_true")
    e.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc.filename or exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (BoundError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, RuntimeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
