import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gverify.compliance import (COLLET_VIOLATION, REFX_VIOLATION, REFZ_VIOLATION, RequiredStates,
                                check_compliance, derive_requirements)
from gverify.gcode import tokenize
from gverify.vision import IndicatorStates

BOOLS = [False, True]


def req(text):
    return derive_requirements(tokenize(text))


@pytest.mark.parametrize("text, expected", [
    ("M3 S1200", RequiredStates(True, False, False)),
    ("M04", RequiredStates(True, False, False)),
    ("M5", RequiredStates(True, False, False)),
    ("G0 X10", RequiredStates(False, True, False)),
    ("G1 Z-2 F50", RequiredStates(False, False, True)),
    ("G2 X1 Z1", RequiredStates(False, True, True)),
    ("G54 X1 Z1", RequiredStates()),  # no motion word in the block
    ("M8\nM9", RequiredStates()),
    ("", RequiredStates()),
])
def test_requirements(text, expected):
    assert req(text) == expected


def test_examples():
    ok, errors = check_compliance(req("M3 S1200\nG0 X10 Z2"), IndicatorStates(False, True, False))
    assert not ok
    assert errors == [COLLET_VIOLATION, REFZ_VIOLATION]
    assert check_compliance(req("G0 X1"), IndicatorStates(False, True, False)) == (True, [])


def test_brute_force_implication():
    # consistent iff every needed indicator is lit
    for needs in itertools.product(BOOLS, repeat=3):
        for lit in itertools.product(BOOLS, repeat=3):
            ok, errors = check_compliance(RequiredStates(*needs), IndicatorStates(*lit))
            expected = all(l or not n for n, l in zip(needs, lit))
            assert ok == expected
            assert ok == (errors == [])
            phrases = [COLLET_VIOLATION, REFX_VIOLATION, REFZ_VIOLATION]
            assert errors == [p for p, n, l in zip(phrases, needs, lit) if n and not l]


@given(st.tuples(*[st.booleans()] * 3), st.tuples(*[st.booleans()] * 3), st.integers(0, 2))
def test_lighting_an_indicator_never_hurts(needs, lit, k):
    brighter = list(lit)
    brighter[k] = True
    ok_before, errs_before = check_compliance(RequiredStates(*needs), IndicatorStates(*lit))
    ok_after, errs_after = check_compliance(RequiredStates(*needs), IndicatorStates(*brighter))
    assert ok_after >= ok_before
    assert set(errs_after) <= set(errs_before)
