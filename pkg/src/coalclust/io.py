"""File formats shared by the command-line tools.

* ``data.csv``: no header, comma separated, one observation per row,
  17 significant digits so values round-trip exactly.
* ``labels.csv``: one integer per line.
* ``coords.json``: ``{"grid": [h, w]}`` or ``{"positions": [...]}``.
* Newick: branch lengths are parent time minus child time, leaves are
  zero-based row indices.
"""

import json
from pathlib import Path

import numpy as np

from .coalescent import Dendrogram, from_newick
from .errors import CoalclustError, DataError
from .kernels import grid_coords


def _fail(path, exc):
    raise DataError(f"{path}: {exc}") from exc


def write_matrix(path, matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join("%.17g" % x for x in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(path, exc)
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise DataError(f"{path}: no data rows")
    out = []
    for i, line in enumerate(rows, 1):
        try:
            out.append([float(x) for x in line.split(",")])
        except ValueError as exc:
            raise DataError(f"{path}:{i}: {exc}") from exc
        if len(out[-1]) != len(out[0]):
            raise DataError(f"{path}:{i}: expected {len(out[0])} columns, found {len(out[-1])}")
    data = np.array(out)
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    return data


def write_labels(path, labels):
    Path(path).write_text("".join(f"{int(x)}\n" for x in labels))


def read_labels(path):
    try:
        lines = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
        return np.array([int(x) for x in lines], dtype=np.int64)
    except (OSError, ValueError) as exc:
        _fail(path, exc)


def read_coords(path):
    """Per-dimension coordinates from ``coords.json``."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        _fail(path, exc)
    if "grid" in obj:
        h, w = obj["grid"]
        return grid_coords(int(h), int(w))
    if "positions" in obj:
        return np.asarray(obj["positions"], dtype=float)
    raise DataError(f"{path}: expected a 'grid' or 'positions' key")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        _fail(path, exc)


def write_tree(directory, stem, tree):
    directory = Path(directory)
    (directory / f"{stem}.newick").write_text(tree.to_newick() + "\n")
    write_json(directory / f"{stem}.json", tree.to_dict())


def read_tree(path):
    path = Path(path)
    try:
        if path.suffix == ".json":
            return Dendrogram.from_dict(read_json(path))
        return from_newick(path.read_text())
    except CoalclustError:
        raise
    except (OSError, ValueError, KeyError, IndexError) as exc:
        _fail(path, exc)
