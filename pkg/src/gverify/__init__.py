"""Joint verification of lathe G-code programs and HMI screenshots."""

__version__ = "0.1.0"

from .compliance import RequiredStates, check_compliance, derive_requirements
from .gcode import GcodeIssue, IssueCategory, Program, ValidationLimits, lint, tokenize, validate
from .report import VerificationReport, parse_report, serialize_report, validate_schema
from .verifier import verify_oracle
from .vision import BBoxPct, IndicatorStates, classify_indicators, crop_pct, load_image, render_synthetic

__all__ = [
    "BBoxPct", "GcodeIssue", "IndicatorStates", "IssueCategory", "Program", "RequiredStates",
    "ValidationLimits", "VerificationReport", "check_compliance", "classify_indicators",
    "crop_pct", "derive_requirements", "lint", "load_image", "parse_report", "render_synthetic",
    "serialize_report", "tokenize", "validate", "validate_schema", "verify_oracle",
]
