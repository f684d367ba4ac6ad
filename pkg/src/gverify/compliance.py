"""Cross-modal rules tying G-code requirements to HMI indicator states."""

from __future__ import annotations

from dataclasses import dataclass

from .gcode import SPINDLE_CODES, Program
from .vision import IndicatorStates

COLLET_VIOLATION = "Spindle command issued but COLLET CLAMPED is not active"
REFX_VIOLATION = "X-axis motion commanded but REF X is not referenced"
REFZ_VIOLATION = "Z-axis motion commanded but REF Z is not referenced"


@dataclass(frozen=True)
class RequiredStates:
    needs_collet: bool = False
    needs_refx: bool = False
    needs_refz: bool = False


def derive_requirements(program: Program, spindle_codes=SPINDLE_CODES) -> RequiredStates:
    """Which indicators the program needs lit.

    Any M3/M4/M5 needs the collet; X or Z words only count inside blocks
    that carry a G0-G3 motion word.
    """
    needs_collet = needs_refx = needs_refz = False
    for block in program.blocks:
        if any(w.letter == "M" and w.code in spindle_codes for w in block.words):
            needs_collet = True
        if block.motion_words():
            needs_refx = needs_refx or block.has_letter("X")
            needs_refz = needs_refz or block.has_letter("Z")
    return RequiredStates(needs_collet, needs_refx, needs_refz)


def check_compliance(required: RequiredStates, indicators: IndicatorStates) -> tuple[bool, list[str]]:
    errors = []
    if required.needs_collet and not indicators.collet_clamped:
        errors.append(COLLET_VIOLATION)
    if required.needs_refx and not indicators.refx:
        errors.append(REFX_VIOLATION)
    if required.needs_refz and not indicators.refz:
        errors.append(REFZ_VIOLATION)
    return not errors, errors
