"""Deterministic rule-based verifier used as ground truth and offline backend."""

from __future__ import annotations

from typing import Iterable, Sequence

from .compliance import (COLLET_VIOLATION, REFX_VIOLATION, REFZ_VIOLATION,
                         check_compliance, derive_requirements)
from .gcode import GcodeIssue, IssueCategory, ValidationLimits, lint, tokenize_lenient
from .report import ComplianceVerdict, GcodeValidity, Slots, VerificationReport
from .vision import IndicatorStates

HMI_PHRASES = {
    "collet_clamped": "COLLET CLAMPED indicator is not active",
    "refx": "REF X indicator is not active",
    "refz": "REF Z indicator is not active",
}

CLAMP_COLLET = "Clamp the collet before running this program."
REFERENCE_X = "Reference the X axis before running this program."
REFERENCE_Z = "Reference the Z axis before running this program."

_HMI_FIXES = {"collet_clamped": CLAMP_COLLET, "refx": REFERENCE_X, "refz": REFERENCE_Z}
_COMPLIANCE_FIXES = {COLLET_VIOLATION: CLAMP_COLLET, REFX_VIOLATION: REFERENCE_X,
                     REFZ_VIOLATION: REFERENCE_Z}

_GCODE_FIXES = {
    IssueCategory.MODAL_CONFLICT: "Line {line}: keep only one motion command (G0, G1, G2 or G3) in '{word}'.",
    IssueCategory.INVALID_COMMAND: "Line {line}: replace the invalid word '{word}' with a valid command.",
    IssueCategory.NON_NUMERIC_COORDINATE: "Line {line}: use a numeric value for the coordinate '{word}'.",
    IssueCategory.MISSING_FEED_VALUE: "Line {line}: provide a numeric value for F.",
    IssueCategory.UNKNOWN_CODE: "Line {line}: replace the unknown code '{word}' with a supported G or M code.",
    IssueCategory.EMPTY_MOTION_BLOCK: "Line {line}: add an X or Z target to the motion command '{word}'.",
    IssueCategory.UNSAFE_FEED: "Line {line}: reduce the feed rate '{word}' to the machine limit.",
    IssueCategory.OTHER: "Line {line}: rewrite the malformed line so it parses as G-code.",
}


def hmi_issues(indicators: IndicatorStates) -> list[str]:
    return [HMI_PHRASES[name] for name in HMI_PHRASES if not getattr(indicators, name)]


def generate_corrections(slots: Slots, issues: Sequence[GcodeIssue],
                         compliance_errors: Iterable[str]) -> list[str]:
    """One suggestion per root cause: HMI first, then G-code, then compliance."""
    candidates = [_HMI_FIXES[name] for name in _HMI_FIXES if not getattr(slots, name)]
    candidates += [_GCODE_FIXES[i.category].format(line=i.line_no, word=i.word) for i in issues]
    candidates += [_COMPLIANCE_FIXES[e] for e in compliance_errors]
    return list(dict.fromkeys(candidates))


def verify_oracle(gcode_text: str, indicators: IndicatorStates,
                  limits: ValidationLimits = ValidationLimits()) -> VerificationReport:
    issues = lint(gcode_text, limits)
    program, _ = tokenize_lenient(gcode_text)
    consistent, compliance_errors = check_compliance(derive_requirements(program), indicators)
    slots = Slots(indicators.collet_clamped, indicators.refx, indicators.refz,
                  tuple(hmi_issues(indicators)))
    return VerificationReport(
        slots=slots,
        gcode_validity=GcodeValidity(not issues, tuple(i.message for i in issues)),
        compliance=ComplianceVerdict(consistent, tuple(compliance_errors)),
        corrections=tuple(generate_corrections(slots, issues, compliance_errors)),
    )
