"""Pass/fail records for verified inequalities, with margins and provenance.

A report is either theorem-grade (parameter-free, or depending only on
exactly computed constants) or constant-grade (depends on a user-supplied
or estimated constant).  The distinction drives the exit-code policy:
a theorem-grade failure is a bug, a constant-grade failure with an
estimated constant merely suggests the estimate was too small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .serialize import write_csv

_REL_TOL = 1e-9

# provenance tags, in decreasing order of trust
PROVENANCE_EXACT = "exact"
PROVENANCE_USER = "user-supplied"
PROVENANCE_ESTIMATE = "estimated lower bound"
PROVENANCE_PROBED = "probed"

_PROVENANCES = (PROVENANCE_EXACT, PROVENANCE_USER, PROVENANCE_ESTIMATE, PROVENANCE_PROBED)


@dataclass(frozen=True)
class Constant:
    """A named constant together with how it was obtained."""

    name: str
    value: float
    provenance: str

    def __post_init__(self):
        if self.provenance not in _PROVENANCES:
            raise ValueError(
                f"unknown provenance {self.provenance!r}; expected one of {_PROVENANCES}"
            )


@dataclass(frozen=True)
class InequalityReport:
    """One verified inequality lhs <= rhs.

    ``margin`` is rhs - lhs; the report passes iff
    margin >= -1e-9 * (1 + |rhs|), with an infinite rhs passing
    unconditionally (the bound is vacuous there).
    """

    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    kind: str  # "theorem" | "constant"
    constants_used: tuple[Constant, ...] = ()
    inputs_digest: str = ""
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "pass": self.passed,
            "kind": self.kind,
            "constants_used": [
                {"name": c.name, "value": c.value, "provenance": c.provenance}
                for c in self.constants_used
            ],
            "inputs_digest": self.inputs_digest,
            "note": self.note,
        }

    def summary_line(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"[{verdict}] {self.name}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} "
            f"margin={self.margin:.3g} ({self.kind})"
        )


def make_report(
    name: str,
    lhs: float,
    rhs: float,
    *,
    constants: tuple[Constant, ...] = (),
    inputs_digest: str = "",
    note: str = "",
) -> InequalityReport:
    lhs = float(lhs)
    rhs = float(rhs)
    if math.isinf(rhs) and rhs > 0:
        margin, passed = math.inf, True
    elif math.isinf(lhs) and lhs > 0:
        margin, passed = -math.inf, False
    else:
        margin = rhs - lhs
        passed = margin >= -_REL_TOL * (1.0 + abs(rhs))
    # exactly computed constants keep theorem-level trust
    kind = "theorem" if all(c.provenance == PROVENANCE_EXACT for c in constants) else "constant"
    return InequalityReport(
        name=name,
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        passed=passed,
        kind=kind,
        constants_used=tuple(constants),
        inputs_digest=inputs_digest,
        note=note,
    )


def failure_severity(report: InequalityReport) -> str:
    """Classify a report for the exit-code policy.

    Returns one of "ok", "theorem_failure", "constant_failure" (a
    user-supplied constant did not hold) or "estimate_warning" (an
    estimated or probed constant fell short, expected occasionally).
    """
    if report.passed:
        return "ok"
    if report.kind == "theorem":
        return "theorem_failure"
    if any(c.provenance == PROVENANCE_USER for c in report.constants_used):
        return "constant_failure"
    return "estimate_warning"


def reports_to_jsonl(path, reports, *, header: dict | None = None) -> None:
    from .serialize import canonical_json

    lines = []
    if header is not None:
        lines.append(canonical_json({"header": header}))
    lines.extend(canonical_json(r.to_dict()) for r in reports)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def reports_to_csv(path, reports, *, preamble: str | None = None) -> None:
    rows = [(r.name, r.lhs, r.rhs, r.margin, r.passed) for r in reports]
    write_csv(path, ("name", "lhs", "rhs", "margin", "pass"), rows, preamble=preamble)
