"""Exception hierarchy shared across the package.

Every error raised deliberately by planfield derives from PlanfieldError and
carries a short machine-readable ``code`` used by the CLI's ``ERROR[code]:``
prefix. I/O failures are left to the builtin OSError family.
"""


class PlanfieldError(Exception):
    """Base class for all planfield errors."""

    code = "error"


class ParseError(PlanfieldError):
    """A file's content could not be parsed (bad header, bad cell, bad row)."""

    code = "parse"


class ValidationError(PlanfieldError):
    """Structurally parseable input violated a model invariant."""

    code = "validation"


class EvaluationError(PlanfieldError):
    """A statistic could not be evaluated (e.g. zero denominator)."""

    code = "evaluation"


class FixtureError(PlanfieldError):
    """Synthetic fixture generation failed (infeasible spec, retry budget)."""

    code = "fixture"
