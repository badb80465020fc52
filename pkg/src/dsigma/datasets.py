"""Dataset container, CSV and edge-list I/O, and the synthetic Syn generator."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .groups import AuxInfo


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` records with a sensitive category ``x``, public ``aux`` and an
    optional privileged scalar used only by the attack harness.
    """

    x: np.ndarray
    aux: AuxInfo
    k: int
    ids: np.ndarray | None = None
    privileged: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        n = x.size
        if n == 0:
            raise DatasetError("dataset is empty")
        if self.aux.n != n:
            raise DatasetError(f"aux covers {self.aux.n} records, x has {n}")
        if x.min() < 0 or x.max() >= self.k:
            raise DatasetError(f"x values must lie in [0, {self.k})")
        ids = np.arange(n) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.size != n:
            raise DatasetError("ids and x differ in length")
        if np.unique(ids).size != n:
            raise DatasetError("duplicate ids")
        if self.privileged is not None:
            tp = np.asarray(self.privileged, dtype=float)
            if tp.size != n:
                raise DatasetError("privileged column and x differ in length")
            object.__setattr__(self, "privileged", tp)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return int(self.x.size)


def _open_rows(path):
    text = Path(path).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    return header, rows[1:]


def _parse_int(value: str, path, lineno: int, column: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: column {column!r} is not an integer: {value!r}") from None


def _parse_float(value: str, path, lineno: int, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: column {column!r} is not a number: {value!r}") from None


def read_edge_list(path, n: int) -> AuxInfo:
    """Undirected graph from lines of two 0-based node ids; ``#`` starts a comment."""
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise DatasetError(f"{path}:{lineno}: expected two node ids, got {body!r}")
        u, v = (_parse_int(p, path, lineno, "node") for p in parts)
        if not (0 <= u < n and 0 <= v < n):
            raise DatasetError(f"{path}:{lineno}: node id out of range [0, {n})")
        if u == v:
            raise DatasetError(f"{path}:{lineno}: self-loop on node {u}")
        edges.append((u, v))
    return AuxInfo.from_edges(n, edges)


def write_edge_list(path, aux: AuxInfo) -> None:
    lines = [f"{u} {v}" for u, nbrs in enumerate(aux.adjacency) for v in nbrs if u < v]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_csv(path, k: int | None = None, edge_list=None, aux: AuxInfo | None = None) -> Dataset:
    """Read ``id, x, t_1..t_d[, t_p]``.

    With ``edge_list`` (or a ready ``aux``) the CSV may hold only
    ``id, x[, t_p]``; the graph file supplies the auxiliary information,
    node ``j`` being the ``j``-th row.
    ``k`` defaults to ``max(x) + 1`` (at least 2).
    """
    header, rows = _open_rows(path)
    if header[:2] != ["id", "x"]:
        raise DatasetError(f"{path}:1: header must start with 'id,x', got {header[:2]}")
    coord_cols = [i for i, h in enumerate(header) if h.startswith("t_") and h != "t_p"]
    tp_col = header.index("t_p") if "t_p" in header else None
    known = {0, 1, *coord_cols} | ({tp_col} if tp_col is not None else set())
    extra = [header[i] for i in range(len(header)) if i not in known]
    if extra:
        raise DatasetError(f"{path}:1: unknown columns {extra}")
    if edge_list is None and aux is None and not coord_cols:
        raise DatasetError(f"{path}:1: no coordinate columns t_1..t_d and no edge list")
    ids, xs, coords, tps = [], [], [], []
    seen: dict[int, int] = {}
    for lineno, row in enumerate(rows, 2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        rid = _parse_int(row[0], path, lineno, "id")
        if rid in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate id {rid} (first on line {seen[rid]})")
        seen[rid] = lineno
        x = _parse_int(row[1], path, lineno, "x")
        if x < 0 or (k is not None and x >= k):
            raise DatasetError(f"{path}:{lineno}: x={x} outside [0, {k})")
        ids.append(rid)
        xs.append(x)
        coords.append([_parse_float(row[i], path, lineno, header[i]) for i in coord_cols])
        if tp_col is not None:
            tps.append(_parse_float(row[tp_col], path, lineno, "t_p"))
    if not ids:
        raise DatasetError(f"{path}: no records")
    arity = k if k is not None else max(2, max(xs) + 1)
    if edge_list is not None:
        aux = read_edge_list(edge_list, len(ids))
    elif aux is None:
        aux = AuxInfo.from_points(np.array(coords, dtype=float))
    elif aux.n != len(ids):
        raise DatasetError(f"{path}: {len(ids)} records but auxiliary data covers {aux.n}")
    return Dataset(np.array(xs), aux, arity, np.array(ids), np.array(tps) if tp_col is not None else None)


def write_csv(ds: Dataset, path) -> None:
    """Write ``id, x, t_1..t_d[, t_p]`` (graph datasets write ``id, x[, t_p]`` only)."""
    header = ["id", "x"]
    coords = ds.aux.points
    if coords is not None:
        header += [f"t_{j + 1}" for j in range(coords.shape[1])]
    if ds.privileged is not None:
        header.append("t_p")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in range(ds.n):
        row = [str(int(ds.ids[r])), str(int(ds.x[r]))]
        if coords is not None:
            row += [repr(float(v)) for v in coords[r]]
        if ds.privileged is not None:
            row.append(repr(float(ds.privileged[r])))
        w.writerow(row)
    Path(path).write_text(buf.getvalue())


def read_values_csv(path, column: str) -> tuple[np.ndarray, np.ndarray]:
    """Read an ``id,<column>`` integer CSV (extra columns are ignored)."""
    header, rows = _open_rows(path)
    if "id" not in header or column not in header:
        raise DatasetError(f"{path}:1: header needs 'id' and {column!r}, got {header}")
    ci, cv = header.index("id"), header.index(column)
    ids, vals = [], []
    seen: dict[int, int] = {}
    for lineno, row in enumerate(rows, 2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        rid = _parse_int(row[ci], path, lineno, "id")
        if rid in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate id {rid} (first on line {seen[rid]})")
        seen[rid] = lineno
        ids.append(rid)
        vals.append(_parse_int(row[cv], path, lineno, column))
    return np.array(ids, dtype=np.int64), np.array(vals, dtype=np.int64)


def write_values_csv(path, ids, values, column: str) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", column])
    for i, v in zip(ids, values):
        w.writerow([int(i), int(v)])
    Path(path).write_text(buf.getvalue())


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


@dataclass(frozen=True)
class SynConfig:
    """Geometry of the Syn family.

    Each of two clusters holds an interleaved pair of crescents (unit
    radius, the second shifted by ``(radius, -offset)``); each crescent is
    split into two shades along its arc.
    """

    radius: float = 1.0
    offset: float = 0.5
    noise: float = 0.08
    cluster_gap: float = 5.0
    labels: int = 8


def generate_syn(n: int, seed: int, config: SynConfig | None = None) -> Dataset:
    """Syn dataset: 8 labels with a cluster / crescent / shade hierarchy.

    ``label = 4 * cluster + 2 * crescent + shade``; labels are assigned in
    equal strata and shuffled, so each appears ``n // 8`` or ``n // 8 + 1`` times.
    """
    cfg = config or SynConfig()
    if n < cfg.labels:
        raise DatasetError(f"need n >= {cfg.labels}, got {n}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x53594E]))
    labels = rng.permutation(np.arange(n) % cfg.labels)
    cluster, crescent, shade = labels // 4, (labels // 2) % 2, labels % 2
    # shade 0 covers the first half of the arc, shade 1 the second
    angle = (shade + rng.random(n)) * (math.pi / 2)
    xs = cfg.radius * np.cos(angle)
    ys = cfg.radius * np.sin(angle)
    lower = crescent == 1
    xs = np.where(lower, cfg.radius - xs, xs)
    ys = np.where(lower, cfg.offset - ys, ys)
    xs = xs + cluster * cfg.cluster_gap
    pts = np.column_stack([xs, ys]) + rng.normal(0.0, cfg.noise, size=(n, 2))
    return Dataset(labels, AuxInfo.from_points(pts), cfg.labels)
