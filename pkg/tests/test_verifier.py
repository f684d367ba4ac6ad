import pytest

from gverify.compliance import COLLET_VIOLATION, REFX_VIOLATION, REFZ_VIOLATION
from gverify.dataset import SCENARIOS
from gverify.gcode import IssueCategory, lint
from gverify.report import Slots, validate_schema, serialize_report
from gverify.verifier import (CLAMP_COLLET, HMI_PHRASES, REFERENCE_X, REFERENCE_Z,
                              generate_corrections, verify_oracle)
from gverify.vision import IndicatorStates

BY_ID = {s.id: s for s in SCENARIOS}


def test_clean_instance():
    spec = BY_ID["S7-i2"]
    report = verify_oracle(spec.gcode, IndicatorStates.parse(spec.indicators))
    assert report.gcode_validity.valid and report.compliance.consistent
    assert report.slots.hmi_issues == ()
    assert report.gcode_validity.errors == ()
    assert report.compliance.errors == ()
    assert report.corrections == ()


def test_modal_conflict_instance():
    spec = BY_ID["S1-i1"]
    report = verify_oracle(spec.gcode, IndicatorStates.parse(spec.indicators))
    assert not report.gcode_validity.valid
    assert any("Modal conflict" in e for e in report.gcode_validity.errors)


def test_missing_feed_correction():
    report = verify_oracle("G0 X1 Z1\nG1 X8.0 F", IndicatorStates(True, True, True))
    assert any("provide a numeric value for F" in c for c in report.corrections)


def test_hmi_issues_follow_indicators():
    report = verify_oracle("G0 X1", IndicatorStates(False, True, False))
    assert report.slots.hmi_issues == (HMI_PHRASES["collet_clamped"], HMI_PHRASES["refz"])


def test_corrections_deduplicated():
    slots = Slots(False, False, False, ())
    fixes = generate_corrections(slots, [], [COLLET_VIOLATION, REFX_VIOLATION, REFZ_VIOLATION])
    assert fixes == [CLAMP_COLLET, REFERENCE_X, REFERENCE_Z]


def test_correction_per_gcode_issue():
    issues = lint("G0 G1 X1\nG1 Z1 F\nG999 X1")
    fixes = generate_corrections(Slots(True, True, True, ()), issues, [])
    assert len(fixes) == 3
    assert fixes[0].startswith("Line 1:") and fixes[2].startswith("Line 3:")


def test_every_category_has_a_fix():
    for cat in IssueCategory:
        assert cat.label


@pytest.mark.parametrize("spec", SCENARIOS, ids=lambda s: s.id)
def test_corrections_empty_iff_no_findings(spec):
    report = verify_oracle(spec.gcode, IndicatorStates.parse(spec.indicators))
    findings = report.slots.hmi_issues + report.gcode_validity.errors + report.compliance.errors
    assert (report.corrections == ()) == (findings == ())
    assert validate_schema(serialize_report(report)).valid
