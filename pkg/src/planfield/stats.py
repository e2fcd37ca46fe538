"""District-level summary statistics.

A :class:`StatisticSpec` names a per-district-set summary; binding it to a
map yields an evaluator whose ``district_values(assignment, d)`` returns one
value per district. Supported kinds:

* ``ratio_of_sums``: sum of the first column over the sum of *all* listed
  columns (Democratic share of the two-party vote is
  ``ratio_of_sums:dem_share:votes_dem:votes_rep``; third-party columns may
  be appended to widen the denominator).
* ``weighted_share``: sum of a numerator column over the sum of a separate
  denominator column (e.g. a demographic count over voting-age population).
* ``sum``: plain column total per district.
* ``polsby_popper``: ``4*pi*A / P**2`` per district, with ``A`` the summed
  member areas and ``P`` the summed exterior boundary of members plus the
  shared boundary of edges crossing the district border. Boundary lengths
  come from the edge file, not polygon geometry, which is an approximation
  for real maps but exact on the grid fixtures.

Evaluators are pure functions of immutable inputs; summation order within a
district is fixed (map index order) so results do not depend on evaluation
order across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ValidationError
from .model import Plan, PrecinctMap

KINDS = ("ratio_of_sums", "weighted_share", "sum", "polsby_popper")

_COLUMN_ARITY = {
    "ratio_of_sums": (2, None),
    "weighted_share": (2, 2),
    "sum": (1, 1),
    "polsby_popper": (0, 0),
}


@dataclass(frozen=True)
class StatisticSpec:
    """Declarative description of a district summary statistic."""

    kind: str
    name: str
    columns: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(
                f"unknown statistic kind {self.kind!r}; expected one of {', '.join(KINDS)}"
            )
        if not self.name:
            raise ValidationError("statistic needs a display name")
        lo, hi = _COLUMN_ARITY[self.kind]
        k = len(self.columns)
        if k < lo or (hi is not None and k > hi):
            want = f"exactly {lo}" if lo == hi else f"at least {lo}"
            raise ValidationError(
                f"statistic kind {self.kind!r} takes {want} column(s), got {k}"
            )


@dataclass(frozen=True)
class AffineSpec:
    """Affine combination ``a*first + b*second + offset`` of two statistics.

    Test-only surface: it is accepted everywhere a StatisticSpec is, but is
    deliberately not exposed on the CLI.
    """

    a: float
    first: StatisticSpec
    b: float
    second: StatisticSpec
    offset: float = 0.0
    name: str = "affine"


def parse_stat_spec(text: str) -> StatisticSpec:
    """Parse the CLI form ``kind:name[:col1[:col2...]]``."""
    parts = text.split(":")
    if len(parts) < 2:
        raise ValidationError(
            f"bad statistic spec {text!r}; expected kind:name[:col1[:col2...]]"
        )
    return StatisticSpec(kind=parts[0], name=parts[1], columns=tuple(parts[2:]))


class _Ratio:
    """Sum(num)/Sum(den) per district, over precinct-level columns."""

    def __init__(self, name: str, numerator: np.ndarray, denominator: np.ndarray):
        self.name = name
        self._num = numerator
        self._den = denominator

    def district_values(self, assignment: np.ndarray, d: int) -> np.ndarray:
        num = np.bincount(assignment - 1, weights=self._num, minlength=d)
        den = np.bincount(assignment - 1, weights=self._den, minlength=d)
        if np.any(den <= 0):
            j = int(np.argmax(den <= 0)) + 1
            raise EvaluationError(
                f"statistic {self.name!r}: zero denominator in district {j}"
            )
        return num / den


class _Sum:
    def __init__(self, name: str, column: np.ndarray):
        self.name = name
        self._col = column

    def district_values(self, assignment: np.ndarray, d: int) -> np.ndarray:
        return np.bincount(assignment - 1, weights=self._col, minlength=d)


class _PolsbyPopper:
    """Discrete isoperimetric score from edge-list boundary lengths."""

    def __init__(self, name: str, pmap: PrecinctMap):
        self.name = name
        self._area = pmap.attributes["area"]
        self._exterior = pmap.attributes["exterior_boundary_length"]
        self._edge_a = pmap.edges[:, 0]
        self._edge_b = pmap.edges[:, 1]
        self._shared = pmap.shared_boundary_length

    def district_values(self, assignment: np.ndarray, d: int) -> np.ndarray:
        area = np.bincount(assignment - 1, weights=self._area, minlength=d)
        perim = np.bincount(assignment - 1, weights=self._exterior, minlength=d)
        la = assignment[self._edge_a]
        lb = assignment[self._edge_b]
        crossing = la != lb
        if crossing.any():
            w = self._shared[crossing]
            perim += np.bincount(la[crossing] - 1, weights=w, minlength=d)
            perim += np.bincount(lb[crossing] - 1, weights=w, minlength=d)
        if np.any(perim <= 0):
            j = int(np.argmax(perim <= 0)) + 1
            raise EvaluationError(
                f"statistic {self.name!r}: district {j} has zero perimeter"
            )
        return 4.0 * math.pi * area / (perim * perim)


class _Affine:
    def __init__(self, name, a, first, b, second, offset):
        self.name = name
        self._a = a
        self._first = first
        self._b = b
        self._second = second
        self._offset = offset

    def district_values(self, assignment: np.ndarray, d: int) -> np.ndarray:
        return (
            self._a * self._first.district_values(assignment, d)
            + self._b * self._second.district_values(assignment, d)
            + self._offset
        )


def bind_statistic(pmap: PrecinctMap, spec):
    """Bind a spec to a map, checking columns now rather than mid-scan.

    Objects that already expose ``district_values`` (pre-bound evaluators,
    test doubles) pass through unchanged.
    """
    if hasattr(spec, "district_values"):
        return spec
    if isinstance(spec, AffineSpec):
        return _Affine(
            spec.name,
            spec.a,
            bind_statistic(pmap, spec.first),
            spec.b,
            bind_statistic(pmap, spec.second),
            spec.offset,
        )
    for column in spec.columns:
        if column not in pmap.attributes:
            raise ValidationError(
                f"statistic {spec.name!r} needs column {column!r}, "
                f"which the map does not provide"
            )
    if spec.kind == "ratio_of_sums":
        num = pmap.attributes[spec.columns[0]]
        den = np.sum([pmap.attributes[c] for c in spec.columns], axis=0)
        return _Ratio(spec.name, num, den)
    if spec.kind == "weighted_share":
        return _Ratio(
            spec.name, pmap.attributes[spec.columns[0]], pmap.attributes[spec.columns[1]]
        )
    if spec.kind == "sum":
        return _Sum(spec.name, pmap.attributes[spec.columns[0]])
    return _PolsbyPopper(spec.name, pmap)


def district_summary(pmap: PrecinctMap, plan: Plan, spec) -> np.ndarray:
    """Evaluate a statistic for every district of one plan."""
    if plan.size != pmap.size:
        raise ValidationError("plan length does not match the map")
    return bind_statistic(pmap, spec).district_values(plan.assignment, plan.d)


def order_statistics(values) -> np.ndarray:
    """Ascending sort of a district-value vector (ties kept adjacent)."""
    return np.sort(np.asarray(values, dtype=np.float64), kind="stable")
