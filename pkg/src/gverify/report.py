"""The verification report document and its closed JSON schema.

Wire keys keep the exact spelling of the published output structure,
spaces and hyphens included; Python attributes use snake_case.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any

from jsonschema import Draft202012Validator

from .errors import ParseError, SchemaError
from .vision import IndicatorStates

SLOTS = "slots"
HMI_ISSUES = "HMI issues"
VALIDITY = "gcode_validity"
GCODE_ERRORS = "g-code errors"
COMPLIANCE = "HMI and G-code compliance"
COMPLIANCE_ERRORS = "HMI and G-code errors"
CORRECTIONS = "corrections"


@dataclass(frozen=True)
class Slots:
    collet_clamped: bool
    refx: bool
    refz: bool
    hmi_issues: tuple[str, ...] = ()

    @property
    def indicators(self) -> IndicatorStates:
        return IndicatorStates(self.collet_clamped, self.refx, self.refz)


@dataclass(frozen=True)
class GcodeValidity:
    valid: bool
    errors: tuple[str, ...] = ()


@dataclass(frozen=True)
class ComplianceVerdict:
    consistent: bool
    errors: tuple[str, ...] = ()


@dataclass(frozen=True)
class VerificationReport:
    slots: Slots
    gcode_validity: GcodeValidity
    compliance: ComplianceVerdict
    corrections: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            SLOTS: {
                "collet_clamped": self.slots.collet_clamped,
                "refx": self.slots.refx,
                "refz": self.slots.refz,
                HMI_ISSUES: list(self.slots.hmi_issues),
            },
            VALIDITY: {
                "valid": self.gcode_validity.valid,
                GCODE_ERRORS: list(self.gcode_validity.errors),
            },
            COMPLIANCE: {
                "consistent": self.compliance.consistent,
                COMPLIANCE_ERRORS: list(self.compliance.errors),
            },
            CORRECTIONS: list(self.corrections),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "VerificationReport":
        """Build from an already schema-checked dict."""
        s, v, c = doc[SLOTS], doc[VALIDITY], doc[COMPLIANCE]
        return cls(
            Slots(s["collet_clamped"], s["refx"], s["refz"], tuple(s[HMI_ISSUES])),
            GcodeValidity(v["valid"], tuple(v[GCODE_ERRORS])),
            ComplianceVerdict(c["consistent"], tuple(c[COMPLIANCE_ERRORS])),
            tuple(doc[CORRECTIONS]),
        )


@dataclass(frozen=True)
class SchemaVerdict:
    valid: bool
    violations: tuple[str, ...] = ()


def schema_text() -> str:
    return resources.files("gverify").joinpath("assets/report.schema.json").read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def _validator() -> Draft202012Validator:
    return Draft202012Validator(json.loads(schema_text()))


def serialize_report(report: VerificationReport, indent: int | None = 2) -> str:
    """JSON text with the fixed key order; ``indent=None`` gives one line."""
    return json.dumps(report.to_dict(), indent=indent, ensure_ascii=False)


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_FENCE = re.compile(r"\A```[A-Za-z0-9_-]*[ \t]*\r?\n(.*?)\r?\n?```\Z", re.DOTALL)


def format_path(parts) -> str:
    out = ""
    for part in parts:
        if isinstance(part, int):
            out += f"[{part}]"
            continue
        key = part if _IDENT.fullmatch(part) else json.dumps(part, ensure_ascii=False)
        out = f"{out}.{key}" if out else key
    return out or "<root>"


def _schema_violations(doc: Any) -> list[str]:
    found = set()
    for err in _validator().iter_errors(doc):
        path = list(err.absolute_path)
        if err.validator == "required":
            for key in err.validator_value:
                if isinstance(err.instance, dict) and key not in err.instance:
                    found.add(f"{format_path(path + [key])}: required key is missing")
        elif err.validator == "additionalProperties":
            allowed = set(err.schema.get("properties", {}))
            for key in err.instance:
                if key not in allowed:
                    found.add(f"{format_path(path + [key])}: unexpected key")
        elif err.validator == "type":
            found.add(f"{format_path(path)}: expected {err.validator_value}, "
                      f"got {type(err.instance).__name__}")
        else:
            found.add(f"{format_path(path)}: {err.message}")
    return sorted(found)


def unwrap_fence(text: str) -> str:
    stripped = text.strip()
    match = _FENCE.match(stripped)
    return match.group(1) if match else stripped


def parse_report(text: str) -> VerificationReport:
    """Parse model output into a report.

    A single markdown code fence around the object is accepted. Raises
    ParseError for anything that is not exactly one JSON object and
    SchemaError for structural mismatches.
    """
    body = unwrap_fence(text)
    try:
        doc = json.loads(body)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise ParseError(f"not a JSON object: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"expected a JSON object, got {type(doc).__name__}")
    violations = _schema_violations(doc)
    if violations:
        raise SchemaError(SchemaVerdict(False, tuple(violations)))
    return VerificationReport.from_dict(doc)


def validate_schema(text: str) -> SchemaVerdict:
    try:
        parse_report(text)
    except SchemaError as exc:
        return exc.verdict
    except ParseError as exc:
        return SchemaVerdict(False, (f"<root>: {exc}",))
    return SchemaVerdict(True)
