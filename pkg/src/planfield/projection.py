"""Projection of district values to precincts; averages and contrasts.

The projective distribution at a precinct is the ensemble distribution of
the summary value of whichever district contains that precinct. This module
computes its per-precinct mean and standard deviation in one streaming pass
(Welford update, fixed plan order), the projective contrast of a comparison
plan against that mean, the precinct-wise z-score form of the contrast, and
weighted re-aggregation of any precinct field to region labels.

The standard deviation uses the population convention (divide by ``n``):
the projective distribution is the ensemble itself, not a sample from a
larger one, for normalization purposes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ValidationError
from .model import Ensemble, Plan, PrecinctField, PrecinctMap
from .stats import bind_statistic


@dataclass(frozen=True)
class ProjectionSummary:
    """Per-precinct mean and spread of the projective distribution."""

    mean: PrecinctField
    sd: PrecinctField
    n: int


def project(pmap: PrecinctMap, plan: Plan, district_values) -> PrecinctField:
    """Map each precinct to the value of its district under one plan."""
    values = np.asarray(district_values, dtype=np.float64)
    if values.shape != (plan.d,):
        raise ValidationError(
            f"expected {plan.d} district values, got shape {values.shape}"
        )
    if plan.size != pmap.size:
        raise ValidationError("plan length does not match the map")
    return PrecinctField(values[plan.assignment - 1])


def _check_shared_map(pmap: PrecinctMap, ensemble: Ensemble) -> None:
    if ensemble.map is not pmap and ensemble.map.ids != pmap.ids:
        raise ValidationError("plan and ensemble must share one map")


def projective_average(ensemble: Ensemble, spec) -> ProjectionSummary:
    """Streaming per-precinct mean and sd of the projective distribution.

    One pass over the plans in index order; the online moment update keeps
    the result stable for long streams without materializing the projected
    matrix.
    """
    stat = bind_statistic(ensemble.map, spec)
    d = ensemble.d
    mean = np.zeros(ensemble.map.size)
    m2 = np.zeros(ensemble.map.size)
    for i in range(ensemble.n):
        assignment = ensemble.assignments[i]
        try:
            values = stat.district_values(assignment, d)
        except EvaluationError as exc:
            raise EvaluationError(f"plan {i + 1}: {exc}") from exc
        x = values[assignment - 1]
        delta = x - mean
        mean += delta / (i + 1)
        m2 += delta * (x - mean)
    sd = np.sqrt(np.maximum(m2, 0.0) / ensemble.n)
    return ProjectionSummary(PrecinctField(mean), PrecinctField(sd), ensemble.n)


def contrast_from_summary(
    pmap: PrecinctMap, plan: Plan, spec, summary: ProjectionSummary
) -> PrecinctField:
    """Contrast of one plan against an already-computed projective average."""
    stat = bind_statistic(pmap, spec)
    projected = project(pmap, plan, stat.district_values(plan.assignment, plan.d))
    return PrecinctField(projected.values - summary.mean.values)


def projective_contrast(
    pmap: PrecinctMap, plan0: Plan, ensemble: Ensemble, spec
) -> PrecinctField:
    """How much higher or lower the statistic sits in ``plan0`` than in the
    average ensemble plan, per precinct."""
    _check_shared_map(pmap, ensemble)
    summary = projective_average(ensemble, spec)
    return contrast_from_summary(pmap, plan0, spec, summary)


def normalized_contrast(
    pmap: PrecinctMap, plan0: Plan, ensemble: Ensemble, spec
) -> PrecinctField:
    """Contrast divided precinct-wise by the projective sd (z-scores).

    Degenerate spread: 0/0 maps to 0; nonzero/0 maps to missing (NaN) so a
    few frozen precincts cannot poison downstream aggregation. Callers
    report the missing count (``field.n_missing``).
    """
    _check_shared_map(pmap, ensemble)
    summary = projective_average(ensemble, spec)
    contrast = contrast_from_summary(pmap, plan0, spec, summary)
    sd = summary.sd.values
    c = contrast.values
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(sd > 0, c / np.where(sd > 0, sd, 1.0), np.where(c == 0, 0.0, np.nan))
    return PrecinctField(z)


def aggregate_field(pmap: PrecinctMap, field: PrecinctField, weights_column: str) -> dict[int, float]:
    """Weighted mean of a field per region label, keyed by label.

    Regions come from the map's ``region`` attribute; weights from any
    attribute column with positive total per region.
    """
    if pmap.regions is None:
        raise ValidationError("map has no region labels to aggregate over")
    if weights_column not in pmap.attributes:
        raise ValidationError(f"weights column {weights_column!r} not in the map")
    if field.size != pmap.size:
        raise ValidationError("field length does not match the map")
    weights = pmap.attributes[weights_column]
    out: dict[int, float] = {}
    for label in np.unique(pmap.regions):
        mask = pmap.regions == label
        total = float(weights[mask].sum())
        if total <= 0:
            raise ValidationError(f"region {int(label)} has zero total weight")
        out[int(label)] = float(np.dot(weights[mask], field.values[mask]) / total)
    return out
