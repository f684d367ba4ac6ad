from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gverify.dataset import SCENARIOS
from gverify.errors import LexError
from gverify.gcode import (IssueCategory, ValidationLimits, Word, lint, tokenize,
                           tokenize_lenient, validate)

C = IssueCategory


def words(program):
    return [(w.letter, w.numeric_value) for b in program.blocks for w in b.words]


def categories(text, limits=ValidationLimits()):
    return [i.category for i in validate(tokenize(text), limits)]


class TestTokenize:
    def test_simple_block(self):
        prog = tokenize("G00 X1.0 Z-0.5")
        assert len(prog.blocks) == 1
        assert words(prog) == [("G", 0), ("X", Decimal("1.0")), ("Z", Decimal("-0.5"))]

    def test_spacing_is_ignored(self):
        prog = tokenize("G 00X1.0")
        assert words(prog) == [("G", 0), ("X", Decimal("1.0"))]
        assert prog.blocks[0].words[0].raw_value == "00"

    def test_empty_input(self):
        assert tokenize("").blocks == ()

    def test_blank_and_comment_lines_yield_no_block(self):
        prog = tokenize("\n(setup)\n   \n; note\nG0 X1\n%\n")
        assert [b.line_no for b in prog.blocks] == [5]

    def test_comments_are_stripped(self):
        prog = tokenize("G1 (feed move) X2.0 ; finish pass")
        block = prog.blocks[0]
        assert [w.text for w in block.words] == ["G1", "X2.0"]
        assert block.comment == "feed move finish pass"

    def test_comment_text_never_contributes_words(self):
        prog = tokenize("(G0 X9 M3)")
        assert prog.blocks == ()

    def test_crlf(self):
        prog = tokenize("G0 X1\r\nG1 Z-1 F50\r\n")
        assert [b.line_no for b in prog.blocks] == [1, 2]
        assert prog.blocks[1].words[-1].raw_value == "50"

    def test_lowercase_stays_in_value(self):
        block = tokenize("G1 Xabc F100").blocks[0]
        assert [w.text for w in block.words] == ["G1", "Xabc", "F100"]
        assert block.words[1].numeric_value is None

    def test_line_numbers_are_source_lines(self):
        prog = tokenize("\n\nN10 G0 X1\n")
        assert prog.blocks[0].line_no == 3

    @pytest.mark.parametrize("text, col", [("#1=5", 1), ("  5 G1", 3), ("g1 X1", 1)])
    def test_lex_error_position(self, text, col):
        with pytest.raises(LexError) as info:
            tokenize(text)
        assert (info.value.line_no, info.value.column) == (1, col)

    def test_unterminated_comment(self):
        with pytest.raises(LexError):
            tokenize("G0 X1 (open")

    @settings(max_examples=300)
    @given(st.text())
    def test_never_raises_anything_but_lex_error(self, text):
        try:
            tokenize(text)
        except LexError:
            pass
        lint(text)

    def test_word_numeric_value(self):
        assert Word.from_raw("X", "-.5").numeric_value == Decimal("-0.5")
        assert Word.from_raw("X", "1.2.3").numeric_value is None
        assert Word.from_raw("F", "").numeric_value is None
        assert Word.from_raw("G", "28.1").code is None


# Words drawn from a vocabulary that tokenizes cleanly
_word = st.sampled_from(["G0", "G1", "G01", "G2", "G3", "G999", "M3", "M5", "M77", "X1.0", "Z-2",
                         "Xabc", "F", "F100", "F900", "S1,2", "N10", "T0101"])
_line = st.lists(_word, min_size=1, max_size=5)
_program = st.lists(_line, min_size=0, max_size=6)


def _render(lines, gaps):
    out = []
    for k, line in enumerate(lines):
        text = ""
        for i, w in enumerate(line):
            gap = gaps[(k * 7 + i) % len(gaps)]
            text += (gap if i else "") + w
        out.append(text)
    return "\n".join(out)


class TestValidate:
    @pytest.mark.parametrize("text, expected", [
        ("N10 G00 G01 X5.0", [C.MODAL_CONFLICT]),
        ("G1 Xabc F100", [C.NON_NUMERIC_COORDINATE]),
        ("G1 X2.0 F", [C.MISSING_FEED_VALUE]),
        ("G999 X1.0", [C.UNKNOWN_CODE]),
        ("G01", [C.EMPTY_MOTION_BLOCK]),
        ("G0 X1.0\nG1 Z-2.0 F100", []),
        ("M3 S1,200", [C.INVALID_COMMAND]),
        ("M63", [C.UNKNOWN_CODE]),
        ("G28.1", [C.UNKNOWN_CODE]),
        ("G1 X1 Fabc", [C.INVALID_COMMAND]),
    ])
    def test_examples(self, text, expected):
        assert categories(text) == expected

    def test_unsafe_feed_uses_configured_limit(self):
        assert categories("G1 X1.0 F9999", ValidationLimits(max_feed=500)) == [C.UNSAFE_FEED]
        assert categories("G1 X1.0 F9999", ValidationLimits(max_feed=10000)) == []

    def test_default_feed_limit_is_500(self):
        assert categories("G1 X1 F500") == []
        assert categories("G1 X1 F500.01") == [C.UNSAFE_FEED]

    def test_modal_conflict_reported_at_line(self):
        [issue] = validate(tokenize("N10 G00 G01 X5.0"))
        assert issue.line_no == 1
        assert "G00 G01" in issue.message
        assert "N10 G00 G01 X5.0" in issue.message

    def test_message_contains_word(self):
        for issue in validate(tokenize("G999 X1.0\nG1 Xabc F")):
            assert issue.word in issue.message

    def test_multiple_issues_in_one_program(self):
        text = "G0 G1 X1\nG1 Z-1 F\nG1 X2 F2000"
        assert categories(text) == [C.MODAL_CONFLICT, C.MISSING_FEED_VALUE, C.UNSAFE_FEED]

    def test_limits_require_minimum_vocabulary(self):
        with pytest.raises(ValueError):
            ValidationLimits(known_g_codes={0, 1})
        with pytest.raises(ValueError):
            ValidationLimits(known_m_codes={3})
        with pytest.raises(ValueError):
            ValidationLimits(max_feed=0)

    def test_lint_reports_unscannable_lines(self):
        issues = lint("G0 X1\n#5 = 3\nG1 Z-1 F")
        assert [(i.line_no, i.category) for i in issues] == [(2, C.OTHER), (3, C.MISSING_FEED_VALUE)]

    @given(_program)
    def test_deterministic(self, lines):
        text = _render(lines, [" "])
        a = validate(tokenize(text), ValidationLimits())
        b = validate(tokenize(text), ValidationLimits())
        assert a == b

    @given(_program, st.lists(st.sampled_from([" ", "  ", "\t", " \t "]), min_size=1, max_size=5))
    def test_whitespace_invariance(self, lines, gaps):
        plain = validate(tokenize(_render(lines, [" "])))
        spaced = validate(tokenize(_render(lines, gaps)))
        assert plain == spaced

    @given(_program)
    def test_reserialization_round_trip(self, lines):
        prog = tokenize(_render(lines, [" "]))
        again = tokenize(prog.to_text())
        assert [b.words for b in again.blocks] == [b.words for b in prog.blocks]

    def test_comment_reserialization(self):
        prog = tokenize("G0 X1 (rapid)\n(only)\nG1 Z-1 F20 ; cut")
        again = tokenize(prog.to_text())
        assert [(b.words, b.comment) for b in again.blocks] == [(b.words, b.comment) for b in prog.blocks]

    @pytest.mark.parametrize("a, b", [
        ("G00 G01 X5.0", "G1 X2.0 F"),
        ("G999 X1.0", "G01"),
        ("G1 Xabc F100", "G1 X1 F9999"),
        ("M3 S1,200", "G0 G2 Z1"),
    ])
    def test_concatenation_keeps_both_categories(self, a, b):
        cats_a, cats_b = set(categories(a)), set(categories(b))
        assert len(cats_a) == len(cats_b) == 1
        assert set(categories(a + "\n" + b)) == cats_a | cats_b


@pytest.mark.parametrize("spec", SCENARIOS, ids=lambda s: s.id)
def test_scenario_catalog_soundness(spec):
    found = {i.category for i in lint(spec.gcode)}
    if spec.id.endswith("i1"):
        assert found == set(spec.categories)
    else:
        assert found == set()


def test_tokenize_lenient_collects_errors():
    prog, errors = tokenize_lenient("G0 X1\n$$\nG1 Z2 F1")
    assert len(prog.blocks) == 2
    assert [e.line_no for e in errors] == [2]
