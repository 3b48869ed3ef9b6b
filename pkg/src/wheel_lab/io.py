"""File formats.

Every array export is a pair: a data file plus ``<name>.json`` header.

* field CSV: one row per grid row (bottom row first), values written with
  17 significant digits so they parse back bit-identically.
* field / distance binary: raw little-endian float64, row-major, no padding.
* header: ``{"n", "seed", "mode", "spacing", "shape", "dtype", "order"}``.
* geodesic: JSON list of ``[row, col]`` pairs.
* tree: JSON ``{root, parents, children_cw, dist}`` (``null`` for infinite distances).
* curve: JSON corner word, cell sequence and times; the compact binary form is
  an ``.npz`` with int64 ``corners`` ``(k, 4)`` = vertex, arrive, leave, side,
  int64 ``cells`` and float64 ``times``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .field import FieldMode, GridField
from .metric import GeodesicPath, MetricGrid
from .tree import PlanarTree
from .wheel import WheelCurve

_LE = np.dtype("<f8")


def fmt_float(x: float) -> str:
    s = format(float(x), ".17g")
    if s in ("nan", "inf", "-inf"):
        raise ValueError(f"non-finite float {s} has no JSON form")
    if "." not in s and "e" not in s:
        s += ".0"
    return s


def _header(field: GridField, shape) -> dict:
    return {
        "n": field.n,
        "seed": field.seed,
        "mode": FieldMode(field.mode).value,
        "spacing": field.spacing,
        "shape": list(shape),
        "dtype": "float64-le",
        "order": "row-major",
    }


def _write_header(path: Path, header: dict) -> None:
    Path(str(path) + ".json").write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")


def read_header(path) -> dict:
    return json.loads(Path(str(path) + ".json").read_text())


def save_field(field: GridField, path, fmt: str = "csv") -> Path:
    path = Path(path)
    vals = np.asarray(field.values, dtype=np.float64)
    if fmt == "csv":
        lines = [",".join(fmt_float(x) for x in row) for row in vals]
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "bin":
        path.write_bytes(vals.astype(_LE).tobytes())
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    _write_header(path, _header(field, vals.shape) | {"format": fmt})
    return path


def load_field(path) -> GridField:
    path = Path(path)
    h = read_header(path)
    if h["format"] == "csv":
        vals = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    else:
        vals = np.frombuffer(path.read_bytes(), dtype=_LE).reshape(h["shape"]).astype(np.float64)
    return GridField(n=h["n"], spacing=h["spacing"], seed=h["seed"], mode=FieldMode(h["mode"]), values=vals)


def save_distances(m: MetricGrid, dist: np.ndarray, path, source: int | None = None) -> Path:
    path = Path(path)
    d = np.asarray(dist, dtype=np.float64)[: m.n_vertices].reshape(m.side, m.side)
    path.write_bytes(d.astype(_LE).tobytes())
    _write_header(path, _header(m.field, d.shape) | {"format": "bin", "source": source, "xi": m.xi})
    return path


def load_distances(path) -> np.ndarray:
    h = read_header(path)
    return np.frombuffer(Path(path).read_bytes(), dtype=_LE).reshape(h["shape"]).astype(np.float64)


def geodesic_to_json(path: GeodesicPath, side: int) -> list:
    return [list(divmod(int(v), side)) for v in path.vertices]


def tree_to_json(tree: PlanarTree) -> dict:
    return {
        "root": int(tree.root),
        "parents": [int(p) for p in tree.parent],
        "children_cw": [[int(c) for c in ks] for ks in tree.children],
        "dist": [float(d) if math.isfinite(d) else None for d in tree.dist],
    }


def curve_to_json(curve: WheelCurve) -> dict:
    return curve.to_dict()


def save_curve_npz(curve: WheelCurve, path) -> Path:
    corners = np.array([[c.vertex, c.arrive, c.leave, c.side] for c in curve.corners], dtype=np.int64)
    np.savez(path, corners=corners, cells=np.asarray(curve.cells, dtype=np.int64), times=curve.times)
    return Path(path)
