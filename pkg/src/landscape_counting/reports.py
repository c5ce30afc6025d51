"""Deterministic CSV / JSON / binary / SVG output.

Every file carries the SHA-256 of the canonical configuration that produced
it: CSV files as a leading ``# config_sha256=<hex>`` comment, JSON reports in
the ``config_sha256`` field, SVGs in their metadata, binary fields through
the run manifest.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
FIELD_MAGIC = b"LCFIELD1"
# magic, dimension, nodes per side, half width; little endian
FIELD_HEADER = struct.Struct("<8sIId")


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def jsonable(obj):
    """Plain-JSON view of dataclasses, numpy values, tuples and non-finite floats."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isfinite(x):
            return x
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return obj


def write_json(path, payload: dict, config: dict, kind: str) -> Path:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "config_sha256": config_hash(config),
           "config": config, **payload}
    path = Path(path)
    path.write_text(json.dumps(jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_csv(path, header, rows, config: dict) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_sha256={config_hash(config)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """``(config_hash, header, rows as strings)``."""
    with Path(path).open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_sha256="):
            raise ValueError("missing config hash line")
        r = list(csv.reader(fh))
    return first.split("=", 1)[1], r[0], r[1:]


def write_field(path, field) -> Path:
    """Binary field: header (magic, d, n, half_width) then float64 values in node order."""
    g = field.grid
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(FIELD_HEADER.pack(FIELD_MAGIC, g.dimension, g.nodes_per_side, g.half_width))
        fh.write(np.asarray(field.values, dtype="<f8").tobytes())
    return path


def read_field(path):
    """``(dimension, nodes_per_side, half_width, values)``."""
    data = Path(path).read_bytes()
    magic, d, n, L = FIELD_HEADER.unpack_from(data)
    if magic != FIELD_MAGIC:
        raise ValueError("not a field file")
    values = np.frombuffer(data, dtype="<f8", offset=FIELD_HEADER.size)
    if values.size != n ** d:
        raise ValueError(f"expected {n ** d} values, found {values.size}")
    return d, n, L, values.copy()


def write_svg(path, x, y, config: dict, xlabel: str, ylabel: str, title: str = "",
              logx: bool = False, step: bool = False) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "landscape-counting", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        if step:
            ax.step(x, y, where="post")
        else:
            ax.plot(x, y)
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg",
                    metadata={"Date": None, "Creator": None,
                              "Description": f"config_sha256={config_hash(config)}"})
        plt.close(fig)
    return path


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, files, config: dict, subcommand: str) -> Path:
    out_dir = Path(out_dir)
    entries = sorted({Path(f).name: file_sha256(f) for f in files}.items())
    doc = {"schema_version": SCHEMA_VERSION, "subcommand": subcommand,
           "config_sha256": config_hash(config),
           "files": [{"name": k, "sha256": v} for k, v in entries]}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path
