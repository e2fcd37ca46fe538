"""Geographic and ensemble data model.

A :class:`PrecinctMap` is the fixed substrate: precincts with numeric
attribute columns plus an adjacency graph whose edges carry shared boundary
lengths. A :class:`Plan` assigns every precinct a district label in
``1..d``; an :class:`Ensemble` stores ``n`` plans over one map in plan-major
(row per plan) order so a full scan of the ensemble for one statistic walks
memory sequentially. A :class:`PrecinctField` is one real value (NaN =
missing) per precinct and is the output form of projections, contrasts and
p-values.

All model types are immutable after construction (arrays are marked
read-only) and safe for concurrent read access.

File formats
------------
* attributes CSV: header row with required columns
  ``id,population,area,exterior_boundary_length``; optional
  ``votes_dem,votes_rep,region`` and any further numeric columns.
* edges CSV: ``id_a,id_b,shared_boundary_length``.
* assignment matrix CSV: first column ``id`` (rows in map order), then one
  integer-label column per plan; a column named ``enacted`` marks the
  comparison plan and is kept out of the ensemble itself.
* field CSV: ``id,value`` with missing values written as empty cells.

Floats are written with ``repr`` so a write/load round trip reproduces
values bit-for-bit.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

REQUIRED_ATTRIBUTES = ("population", "area", "exterior_boundary_length")

#: column name whose values are stored as integer region labels, not floats
REGION_COLUMN = "region"

#: assignment-matrix column treated as the comparison plan
ENACTED_COLUMN = "enacted"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PrecinctMap:
    """Precincts, their attribute columns, and the adjacency graph.

    ``edges`` is an ``(E, 2)`` int array of precinct indices with
    ``edges[:, 0] < edges[:, 1]``; ``shared_boundary_length`` aligns with it.
    ``regions`` is an optional integer label per precinct used by field
    aggregation.
    """

    ids: tuple[str, ...]
    attributes: dict[str, np.ndarray]
    edges: np.ndarray
    shared_boundary_length: np.ndarray
    regions: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.ids)
        if n == 0:
            raise ValidationError("map must contain at least one precinct")
        if len(set(self.ids)) != n:
            seen: set[str] = set()
            dup = next(i for i in self.ids if i in seen or seen.add(i))
            raise ValidationError(f"duplicate precinct id {dup!r}")

        attrs = {}
        for name, col in self.attributes.items():
            col = np.asarray(col, dtype=np.float64)
            if col.shape != (n,):
                raise ValidationError(
                    f"attribute {name!r} has length {col.size}, expected {n}"
                )
            if not np.all(np.isfinite(col)):
                raise ValidationError(f"attribute {name!r} contains non-finite values")
            if np.any(col < 0):
                raise ValidationError(f"attribute {name!r} contains negative values")
            attrs[name] = _freeze(col)
        object.__setattr__(self, "attributes", attrs)

        for name in REQUIRED_ATTRIBUTES:
            if name not in attrs:
                raise ValidationError(f"required attribute column {name!r} missing")
        if np.any(attrs["area"] <= 0):
            bad = int(np.argmax(attrs["area"] <= 0))
            raise ValidationError(f"precinct {self.ids[bad]!r} has non-positive area")

        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValidationError("edge references a precinct index out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            bad = int(np.argmax(edges[:, 0] == edges[:, 1]))
            raise ValidationError(f"self-loop edge on precinct {self.ids[edges[bad, 0]]!r}")
        edges = np.sort(edges, axis=1)
        key = edges[:, 0] * n + edges[:, 1]
        if len(np.unique(key)) != len(key):
            order = np.argsort(key, kind="stable")
            dup_at = order[np.flatnonzero(np.diff(key[order]) == 0)[0] + 1]
            a, b = edges[dup_at]
            raise ValidationError(
                f"duplicate edge between {self.ids[a]!r} and {self.ids[b]!r}"
            )
        object.__setattr__(self, "edges", _freeze(edges))

        shared = np.asarray(self.shared_boundary_length, dtype=np.float64).ravel()
        if shared.shape != (len(edges),):
            raise ValidationError("shared_boundary_length must align with edges")
        if shared.size and (not np.all(np.isfinite(shared)) or shared.min() < 0):
            raise ValidationError("shared boundary lengths must be finite and >= 0")
        object.__setattr__(self, "shared_boundary_length", _freeze(shared))

        if self.regions is not None:
            regions = np.asarray(self.regions, dtype=np.int64).ravel()
            if regions.shape != (n,):
                raise ValidationError("regions must provide one label per precinct")
            object.__setattr__(self, "regions", _freeze(regions))

        self._check_connected()

    @property
    def size(self) -> int:
        return len(self.ids)

    @cached_property
    def index(self) -> dict[str, int]:
        return {pid: i for i, pid in enumerate(self.ids)}

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        """Adjacency lists, one sorted index array per precinct."""
        lists: list[list[int]] = [[] for _ in range(self.size)]
        for a, b in self.edges:
            lists[a].append(int(b))
            lists[b].append(int(a))
        return tuple(np.array(sorted(l), dtype=np.int64) for l in lists)

    def _check_connected(self) -> None:
        comps = connected_components(self.size, self.edges)
        if len(comps) > 1:
            desc = ", ".join(
                "{%s}" % ", ".join(self.ids[i] for i in comp[:4])
                + ("..." if len(comp) > 4 else "")
                for comp in comps
            )
            raise ValidationError(
                f"adjacency graph is disconnected: {len(comps)} components: {desc}"
            )


def connected_components(n: int, edges: np.ndarray) -> list[list[int]]:
    """Connected components of an undirected graph, as sorted index lists."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in np.asarray(edges).reshape(-1, 2):
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    seen = np.zeros(n, dtype=bool)
    out = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        comp = [start]
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        out.append(sorted(comp))
    return out


@dataclass(frozen=True, eq=False)
class Plan:
    """One assignment of precincts to district labels ``1..d``.

    ``contiguity_verified`` is informational: generators that guarantee
    contiguity by construction set it; :func:`validate_plan` is the source
    of truth otherwise.
    """

    assignment: np.ndarray
    d: int
    contiguity_verified: bool = False

    def __post_init__(self) -> None:
        a = np.asarray(self.assignment, dtype=np.int32).ravel()
        if self.d < 1:
            raise ValidationError("plan must have d >= 1 districts")
        if a.size == 0:
            raise ValidationError("plan assignment is empty")
        if a.min() < 1 or a.max() > self.d:
            raise ValidationError(
                f"district labels must lie in 1..{self.d}; found {int(a.min())}..{int(a.max())}"
            )
        counts = np.bincount(a, minlength=self.d + 1)[1:]
        if np.any(counts == 0):
            missing = int(np.argmax(counts == 0)) + 1
            raise ValidationError(f"district {missing} empty")
        object.__setattr__(self, "assignment", _freeze(a))

    @property
    def size(self) -> int:
        return self.assignment.size


@dataclass(frozen=True, eq=False)
class Ensemble:
    """``n`` plans over one map, stored plan-major: row ``i`` is plan ``i``.

    ``enacted`` is the optional comparison plan pulled from an ``enacted``
    column during ingestion; it is not part of the ensemble sample.
    """

    map: PrecinctMap
    assignments: np.ndarray
    d: int
    enacted: Plan | None = None
    plan_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        a = np.asarray(self.assignments, dtype=np.int32)
        if a.ndim != 2 or a.shape[1] != self.map.size:
            raise ValidationError(
                f"assignment matrix shape {a.shape} does not match |V|={self.map.size}"
            )
        if a.shape[0] < 1:
            raise ValidationError("ensemble must contain at least one plan")
        if self.d < 1:
            raise ValidationError("ensemble must have d >= 1")
        names = self.plan_names or tuple(f"plan_{i + 1}" for i in range(a.shape[0]))
        if len(names) != a.shape[0]:
            raise ValidationError("plan_names must match the number of plans")
        if a.min() < 1 or a.max() > self.d:
            raise ValidationError(
                f"district labels must lie in 1..{self.d}; found {int(a.min())}..{int(a.max())}"
            )
        for i in range(a.shape[0]):
            counts = np.bincount(a[i], minlength=self.d + 1)[1:]
            if np.any(counts == 0):
                missing = int(np.argmax(counts == 0)) + 1
                raise ValidationError(f"plan {i + 1}: district {missing} empty")
        if self.enacted is not None and self.enacted.size != self.map.size:
            raise ValidationError("enacted plan does not match the map")
        object.__setattr__(self, "assignments", _freeze(np.ascontiguousarray(a)))
        object.__setattr__(self, "plan_names", names)

    @property
    def n(self) -> int:
        return self.assignments.shape[0]

    def plan(self, i: int) -> Plan:
        return Plan(self.assignments[i], self.d)

    def drop(self, i: int) -> "Ensemble":
        """A new ensemble with plan ``i`` removed (for leave-one-out runs)."""
        keep = np.ones(self.n, dtype=bool)
        keep[i] = False
        names = tuple(nm for j, nm in enumerate(self.plan_names) if keep[j])
        return Ensemble(self.map, self.assignments[keep], self.d, self.enacted, names)

    def take(self, indices) -> "Ensemble":
        idx = np.asarray(indices, dtype=np.int64)
        names = tuple(self.plan_names[int(j)] for j in idx)
        return Ensemble(self.map, self.assignments[idx], self.d, self.enacted, names)


@dataclass(frozen=True, eq=False)
class PrecinctField:
    """One real value per precinct; NaN marks a missing value."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", _freeze(v))

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.values).sum())


# ---------------------------------------------------------------------------
# ingestion


def _parse_float(text: str, path, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"{path}:{line}: column {column!r}: cannot parse {text!r} as a number"
        ) from None
    if not np.isfinite(value):
        raise ParseError(f"{path}:{line}: column {column!r}: non-finite value {text!r}")
    return value


def _parse_int(text: str, path, line: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(
            f"{path}:{line}: column {column!r}: cannot parse {text!r} as an integer"
        ) from None


def load_map(attributes_file, edges_file) -> PrecinctMap:
    """Load and validate a precinct map from attribute and edge CSVs."""
    attributes_file = Path(attributes_file)
    edges_file = Path(edges_file)

    ids: list[str] = []
    with open(attributes_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "id":
            raise ParseError(f"{attributes_file}:1: expected header starting with 'id'")
        columns = header[1:]
        for name in REQUIRED_ATTRIBUTES:
            if name not in columns:
                raise ParseError(
                    f"{attributes_file}:1: required column {name!r} missing"
                )
        data: dict[str, list[float]] = {name: [] for name in columns}
        seen: set[str] = set()
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{attributes_file}:{line}: expected {len(header)} fields, got {len(row)}"
                )
            pid = row[0]
            if pid in seen:
                raise ParseError(f"{attributes_file}:{line}: duplicate precinct id {pid!r}")
            seen.add(pid)
            ids.append(pid)
            for name, cell in zip(columns, row[1:]):
                if name == REGION_COLUMN:
                    data[name].append(_parse_int(cell, attributes_file, line, name))
                else:
                    data[name].append(_parse_float(cell, attributes_file, line, name))
    if not ids:
        raise ParseError(f"{attributes_file}: no precinct rows")

    regions = None
    attrs = {}
    for name, col in data.items():
        if name == REGION_COLUMN:
            regions = np.array(col, dtype=np.int64)
        else:
            attrs[name] = np.array(col, dtype=np.float64)

    index = {pid: i for i, pid in enumerate(ids)}
    edge_rows: list[tuple[int, int]] = []
    lengths: list[float] = []
    with open(edges_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["id_a", "id_b", "shared_boundary_length"]:
            raise ParseError(
                f"{edges_file}:1: expected header 'id_a,id_b,shared_boundary_length'"
            )
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(f"{edges_file}:{line}: expected 3 fields, got {len(row)}")
            for pid in row[:2]:
                if pid not in index:
                    raise ParseError(f"{edges_file}:{line}: unknown precinct id {pid!r}")
            edge_rows.append((index[row[0]], index[row[1]]))
            lengths.append(_parse_float(row[2], edges_file, line, "shared_boundary_length"))

    return PrecinctMap(
        ids=tuple(ids),
        attributes=attrs,
        edges=np.array(edge_rows, dtype=np.int64).reshape(-1, 2),
        shared_boundary_length=np.array(lengths, dtype=np.float64),
        regions=regions,
    )


def write_map(pmap: PrecinctMap, attributes_file, edges_file) -> None:
    """Write a map back to the attribute/edge CSV schema (round-trip exact)."""
    with open(attributes_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        columns = list(pmap.attributes)
        header = ["id"] + columns + ([REGION_COLUMN] if pmap.regions is not None else [])
        writer.writerow(header)
        for i, pid in enumerate(pmap.ids):
            row = [pid] + [repr(float(pmap.attributes[c][i])) for c in columns]
            if pmap.regions is not None:
                row.append(str(int(pmap.regions[i])))
            writer.writerow(row)
    with open(edges_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id_a", "id_b", "shared_boundary_length"])
        for (a, b), w in zip(pmap.edges, pmap.shared_boundary_length):
            writer.writerow([pmap.ids[a], pmap.ids[b], repr(float(w))])


def load_ensemble(pmap: PrecinctMap, matrix_file) -> Ensemble:
    """Load an assignment matrix whose rows follow the map's precinct order.

    Every non-``enacted`` column becomes an ensemble plan; an ``enacted``
    column, when present, is attached as the comparison plan. Each plan must
    use every district label ``1..d`` where ``d`` is the largest label in
    the file.
    """
    matrix_file = Path(matrix_file)
    with open(matrix_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "id":
            raise ParseError(f"{matrix_file}:1: expected header starting with 'id'")
        columns = header[1:]
        if not columns:
            raise ParseError(f"{matrix_file}:1: no plan columns")
        rows: list[list[int]] = []
        row_ids: list[str] = []
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{matrix_file}:{line}: expected {len(header)} fields, got {len(row)}"
                )
            row_ids.append(row[0])
            rows.append(
                [_parse_int(cell, matrix_file, line, col) for col, cell in zip(columns, row[1:])]
            )
    if len(row_ids) != pmap.size:
        raise ValidationError(
            f"{matrix_file}: {len(row_ids)} rows but the map has {pmap.size} precincts"
        )
    if list(pmap.ids) != row_ids:
        for i, (want, got) in enumerate(zip(pmap.ids, row_ids)):
            if want != got:
                raise ValidationError(
                    f"{matrix_file}: row {i + 1} id {got!r} out of map order (expected {want!r})"
                )

    matrix = np.array(rows, dtype=np.int32).T  # (n_columns, |V|)
    if matrix.min() < 1:
        raise ValidationError(f"{matrix_file}: district labels must be >= 1")
    d = int(matrix.max())

    enacted = None
    plan_rows = []
    plan_names = []
    for k, name in enumerate(columns):
        if name == ENACTED_COLUMN:
            if enacted is not None:
                raise ValidationError(f"{matrix_file}: multiple 'enacted' columns")
            enacted = Plan(matrix[k], d)
        else:
            plan_rows.append(matrix[k])
            plan_names.append(name)
    if not plan_rows:
        raise ValidationError(f"{matrix_file}: no ensemble plan columns besides 'enacted'")

    for j, row in enumerate(plan_rows):
        counts = np.bincount(row, minlength=d + 1)[1:]
        if np.any(counts == 0):
            missing = int(np.argmax(counts == 0)) + 1
            raise ValidationError(f"plan {j + 1}: district {missing} empty")

    return Ensemble(pmap, np.array(plan_rows), d, enacted, tuple(plan_names))


def write_ensemble(ensemble: Ensemble, matrix_file) -> None:
    """Write the assignment matrix CSV (enacted column last, when present)."""
    with open(matrix_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["id", *ensemble.plan_names]
        if ensemble.enacted is not None:
            header.append(ENACTED_COLUMN)
        writer.writerow(header)
        for v, pid in enumerate(ensemble.map.ids):
            row = [pid] + [str(int(x)) for x in ensemble.assignments[:, v]]
            if ensemble.enacted is not None:
                row.append(str(int(ensemble.enacted.assignment[v])))
            writer.writerow(row)


def write_field_csv(path, pmap: PrecinctMap, field: PrecinctField) -> None:
    """Write ``id,value`` rows; missing values become empty cells."""
    if field.size != pmap.size:
        raise ValidationError("field length does not match the map")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "value"])
        for pid, val in zip(pmap.ids, field.values):
            writer.writerow([pid, "" if np.isnan(val) else repr(float(val))])


def read_field_csv(path, pmap: PrecinctMap) -> PrecinctField:
    path = Path(path)
    values = np.full(pmap.size, np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "value"]:
            raise ParseError(f"{path}:1: expected header 'id,value'")
        count = 0
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            pid = row[0]
            if pid not in pmap.index:
                raise ParseError(f"{path}:{line}: unknown precinct id {pid!r}")
            if row[1] != "":
                values[pmap.index[pid]] = _parse_float(row[1], path, line, "value")
            count += 1
    if count != pmap.size:
        raise ValidationError(f"{path}: {count} rows but the map has {pmap.size} precincts")
    return PrecinctField(values)


def with_regions(pmap: PrecinctMap, regions) -> PrecinctMap:
    """A copy of the map with its region labels replaced."""
    return replace(pmap, regions=np.asarray(regions, dtype=np.int64))


# ---------------------------------------------------------------------------
# plan validity


@dataclass(frozen=True)
class PlanValidationReport:
    """Per-district populations, balance deviations and contiguity flags."""

    sizes: np.ndarray
    populations: np.ndarray
    deviations: np.ndarray
    contiguous: np.ndarray
    pop_tol: float

    @property
    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.deviations)))

    @property
    def population_ok(self) -> bool:
        return bool(self.max_abs_deviation <= self.pop_tol)

    @property
    def all_contiguous(self) -> bool:
        return bool(self.contiguous.all())

    @property
    def ok(self) -> bool:
        return self.population_ok and self.all_contiguous


def validate_plan(pmap: PrecinctMap, plan: Plan, pop_tol: float) -> PlanValidationReport:
    """Population balance and contiguity report for a plan over a map.

    Deviations are ``pop_j / (total / d) - 1``. The report carries failures
    instead of raising.
    """
    if plan.size != pmap.size:
        raise ValidationError("plan length does not match the map")
    a = plan.assignment
    d = plan.d
    sizes = np.bincount(a - 1, minlength=d)
    pops = np.bincount(a - 1, weights=pmap.attributes["population"], minlength=d)
    target = pops.sum() / d
    deviations = pops / target - 1.0

    contiguous = np.zeros(d, dtype=bool)
    neighbors = pmap.neighbors
    for j in range(1, d + 1):
        members = np.flatnonzero(a == j)
        inside = np.zeros(pmap.size, dtype=bool)
        inside[members] = True
        seen = np.zeros(pmap.size, dtype=bool)
        start = int(members[0])
        seen[start] = True
        queue = deque([start])
        reached = 1
        while queue:
            v = queue.popleft()
            for w in neighbors[v]:
                w = int(w)
                if inside[w] and not seen[w]:
                    seen[w] = True
                    reached += 1
                    queue.append(w)
        contiguous[j - 1] = reached == members.size

    return PlanValidationReport(
        sizes=_freeze(sizes),
        populations=_freeze(pops),
        deviations=_freeze(deviations),
        contiguous=_freeze(contiguous),
        pop_tol=float(pop_tol),
    )
