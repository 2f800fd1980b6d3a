"""File formats.

Matrix / cube CSV
    A single header line followed by one comma-separated row per matrix row::

        # bands=L pixels=N width=W height=H     (cube)
        # rows=R cols=C                          (plain matrix)

    Values are written with 17 significant digits.

Spectral library CSV
    Header ``wavelength,<name1>,<name2>,...`` then one row per band holding
    the wavelength (micrometers) and one reflectance per material.

Truth bundle
    A directory with ``truth.json`` (metadata) plus ``A.csv`` and ``S.csv``.

ENVI
    Read-only import of ``.hdr`` + binary image (BSQ/BIL/BIP, int16,
    uint16 or float32), with optional 1-based band exclusion.

Run report
    JSON with sorted keys and ``schema_version``.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .types import HyperCube

SCHEMA_VERSION = 1


class FormatError(ValueError):
    """Malformed input file; the message carries the path and line number."""

    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_rows(fh, M: np.ndarray) -> None:
    for row in M:
        fh.write(",".join(_fmt(v) for v in row))
        fh.write("\n")


def _parse_header(path, line: str, keys: Sequence[str]) -> dict:
    if not line.startswith("#"):
        raise FormatError(path, 1, "missing '#' header line")
    fields = dict(re.findall(r"(\w+)=(\S+)", line))
    out = {}
    for k in keys:
        if k not in fields:
            raise FormatError(path, 1, f"header lacks '{k}='")
        try:
            out[k] = int(fields[k])
        except ValueError:
            raise FormatError(path, 1, f"header field {k}={fields[k]!r} is not an integer") from None
    return out


def _parse_rows(path, lines: Iterable[str], first_line: int, ncols: Optional[int]):
    rows = []
    for lineno, raw in enumerate(lines, start=first_line):
        text = raw.strip()
        if not text:
            continue
        cells = text.split(",")
        if ncols is not None and len(cells) != ncols:
            raise FormatError(path, lineno, f"expected {ncols} values, found {len(cells)}")
        ncols = len(cells)
        vals = []
        for j, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise FormatError(path, lineno, f"column {j + 1}: non-numeric value {cell.strip()!r}") from None
            if not math.isfinite(v):
                raise FormatError(path, lineno, f"column {j + 1}: non-finite value {cell.strip()!r}")
            vals.append(v)
        rows.append(vals)
    return rows


def write_matrix_csv(M, path) -> None:
    M = np.asarray(getattr(M, "data", M), dtype=float)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# rows={M.shape[0]} cols={M.shape[1]}\n")
        _write_rows(fh, M)


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(path, None, "empty file")
    hdr = _parse_header(path, lines[0], ("rows", "cols"))
    rows = _parse_rows(path, lines[1:], 2, hdr["cols"])
    if len(rows) != hdr["rows"]:
        raise FormatError(path, None, f"header says {hdr['rows']} rows, found {len(rows)}")
    return np.array(rows, dtype=float).reshape(hdr["rows"], hdr["cols"])


def write_cube_csv(cube: HyperCube, path) -> None:
    L, N = cube.data.shape
    W = cube.width if cube.has_grid else N
    H = cube.height if cube.has_grid else 1
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# bands={L} pixels={N} width={W} height={H}\n")
        _write_rows(fh, cube.data)


def read_cube_csv(path) -> HyperCube:
    """Parse a cube CSV; raises :class:`FormatError` with line numbers."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(path, None, "empty file")
    hdr = _parse_header(path, lines[0], ("bands", "pixels", "width", "height"))
    L, N, W, H = hdr["bands"], hdr["pixels"], hdr["width"], hdr["height"]
    if W * H != N:
        raise FormatError(path, 1, f"width*height = {W * H} does not equal pixels = {N}")
    rows = _parse_rows(path, lines[1:], 2, N)
    if len(rows) != L:
        raise FormatError(path, None, f"header says {L} bands, found {len(rows)} rows")
    return HyperCube(np.array(rows, dtype=float), W, H)


def read_library_csv(path):
    """Load a spectral library (wavelength column plus one column per material)."""
    from .synth import SpectralLibrary

    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(path, None, "empty file")
    names = [c.strip() for c in lines[0].split(",")]
    if len(names) < 2 or names[0].lower() != "wavelength":
        raise FormatError(path, 1, "header must be 'wavelength,<name>,...'")
    try:
        [float(n) for n in names[1:]]
    except ValueError:
        pass
    else:
        raise FormatError(path, 1, "header row holds numbers, expected material names")
    rows = np.array(_parse_rows(path, lines[1:], 2, len(names)), dtype=float)
    if rows.size == 0:
        raise FormatError(path, None, "no spectral rows")
    return SpectralLibrary(tuple(names[1:]), rows[:, 1:], tuple(rows[:, 0]))


def write_library_csv(library, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("wavelength," + ",".join(library.names) + "\n")
        _write_rows(fh, np.column_stack([library.wavelengths, library.spectra]))


# --- truth bundles -----------------------------------------------------------

def write_truth(scene, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(scene.true_A, d / "A.csv")
    write_matrix_csv(scene.true_S, d / "S.csv")
    meta = {
        "schema_version": SCHEMA_VERSION,
        "A": "A.csv",
        "S": "S.csv",
        "names": list(scene.names),
        "snr_db": _json_float(scene.snr_db),
        "filter_size": scene.filter_size,
        "width": scene.cube.width,
        "height": scene.cube.height,
    }
    with open(d / "truth.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return d


def read_truth(directory):
    """Return ``(A, S, meta)`` from a truth bundle directory."""
    d = Path(directory)
    if d.is_file():
        d = d.parent
    with open(d / "truth.json") as fh:
        meta = json.load(fh)
    A = read_matrix_csv(d / meta.get("A", "A.csv"))
    S = read_matrix_csv(d / meta.get("S", "S.csv"))
    return A, S, meta


# --- ENVI ----------------------------------------------------------------------

ENVI_DTYPES = {2: np.int16, 4: np.float32, 12: np.uint16}


def read_envi_header(path) -> dict:
    text = Path(path).read_text()
    if not text.lstrip().upper().startswith("ENVI"):
        raise FormatError(path, 1, "not an ENVI header (missing 'ENVI' magic)")
    hdr = {}
    for m in re.finditer(r"^\s*([^=\n]+?)\s*=\s*(\{[^}]*\}|[^\n]*)", text, re.M):
        key = m.group(1).strip().lower()
        val = m.group(2).strip()
        if val.startswith("{"):
            inner = val[1:-1]
            val = [v.strip() for v in inner.split(",") if v.strip()]
        hdr[key] = val
    for key in ("samples", "lines", "bands", "interleave", "data type"):
        if key not in hdr:
            raise FormatError(path, None, f"header lacks '{key}'")
    return hdr


def read_envi(path_hdr, path_img=None, exclude_bands: Sequence[int] = ()):
    """Read an ENVI image as a :class:`HyperCube`.

    ``exclude_bands`` lists 1-based band numbers to drop (e.g. water
    absorption bands).  Returns ``(cube, provenance)`` where provenance
    echoes the files, their hashes and the exclusion list.
    """
    hdr = read_envi_header(path_hdr)
    if path_img is None:
        base = os.path.splitext(str(path_hdr))[0]
        cands = [base, base + ".img", base + ".dat", base + ".raw"]
        path_img = next((p for p in cands if os.path.isfile(p)), None)
        if path_img is None:
            raise FormatError(path_hdr, None, "no image file found next to header")
    samples, lines, bands = (int(hdr[k]) for k in ("samples", "lines", "bands"))
    dt = int(hdr["data type"])
    if dt not in ENVI_DTYPES:
        raise FormatError(path_hdr, None, f"unsupported data type {dt}")
    order = ">" if int(hdr.get("byte order", 0)) == 1 else "<"
    dtype = np.dtype(ENVI_DTYPES[dt]).newbyteorder(order)
    offset = int(hdr.get("header offset", 0))
    expected = samples * lines * bands * dtype.itemsize
    size = os.path.getsize(path_img) - offset
    if size != expected:
        raise FormatError(path_img, None, f"file holds {size} bytes, header implies {expected}")
    raw = np.fromfile(path_img, dtype=dtype, offset=offset).astype(float)
    inter = str(hdr["interleave"]).lower()
    if inter == "bsq":
        cube = raw.reshape(bands, lines, samples)
    elif inter == "bil":
        cube = raw.reshape(lines, bands, samples).transpose(1, 0, 2)
    elif inter == "bip":
        cube = raw.reshape(lines, samples, bands).transpose(2, 0, 1)
    else:
        raise FormatError(path_hdr, None, f"unknown interleave {inter!r}")
    excl = sorted({int(b) for b in exclude_bands})
    bad = [b for b in excl if not 1 <= b <= bands]
    if bad:
        raise FormatError(path_hdr, None, f"excluded bands out of range 1..{bands}: {bad}")
    keep = [b for b in range(bands) if b + 1 not in excl]
    data = cube[keep].reshape(len(keep), lines * samples)
    wl = None
    if isinstance(hdr.get("wavelength"), list) and len(hdr["wavelength"]) == bands:
        wl = [float(hdr["wavelength"][b]) for b in keep]
    provenance = {
        "header": {"path": str(path_hdr), "sha256": file_hash(path_hdr)},
        "image": {"path": str(path_img), "sha256": file_hash(path_img)},
        "excluded_bands": excl,
        "interleave": inter,
    }
    return HyperCube(data, samples, lines, wl), provenance


def write_envi(data3d, path_base, interleave="bsq", dtype=np.float32) -> tuple:
    """Write a ``bands x lines x samples`` array as ENVI (used for fixtures)."""
    arr = np.asarray(data3d)
    B, Ln, S = arr.shape
    code = {np.dtype(v): k for k, v in ENVI_DTYPES.items()}[np.dtype(dtype)]
    if interleave == "bsq":
        out = arr
    elif interleave == "bil":
        out = arr.transpose(1, 0, 2)
    elif interleave == "bip":
        out = arr.transpose(1, 2, 0)
    else:
        raise ValueError(interleave)
    img = str(path_base) + ".img"
    hdr = str(path_base) + ".hdr"
    np.ascontiguousarray(out, dtype=np.dtype(dtype).newbyteorder("<")).tofile(img)
    with open(hdr, "w") as fh:
        fh.write("ENVI\n")
        fh.write(f"samples = {S}\nlines = {Ln}\nbands = {B}\nheader offset = 0\n")
        fh.write(f"data type = {code}\ninterleave = {interleave}\nbyte order = 0\n")
    return hdr, img


# --- JSON reports ----------------------------------------------------------------

def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return _json_float(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float):
        return _json_float(obj)
    return obj


@dataclass
class RunReport:
    algorithm: str
    config: dict
    cost_trace: list
    stop_reason: str
    iterations_run: int
    eval: Optional[dict] = None
    provenance: dict = field(default_factory=dict)
    timings: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "algorithm": self.algorithm,
            "config": self.config,
            "cost_trace": self.cost_trace,
            "stop_reason": self.stop_reason,
            "iterations_run": self.iterations_run,
            "eval": self.eval,
            "provenance": self.provenance,
        }
        if self.timings is not None:
            d["timings"] = self.timings
        if self.extra:
            d["extra"] = self.extra
        return _jsonable(d)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(
            algorithm=d["algorithm"],
            config=d["config"],
            cost_trace=list(d["cost_trace"]),
            stop_reason=d["stop_reason"],
            iterations_run=d["iterations_run"],
            eval=d.get("eval"),
            provenance=d.get("provenance", {}),
            timings=d.get("timings"),
            extra=d.get("extra", {}),
        )


def dumps_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats via ``repr`` (17 digits max)."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    text = dumps_json(obj.to_dict() if hasattr(obj, "to_dict") else obj)
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def write_report(report: RunReport, path) -> None:
    write_json(report, path)


def read_report(path) -> RunReport:
    with open(path) as fh:
        return RunReport.from_dict(json.load(fh))
