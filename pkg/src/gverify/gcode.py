"""Lexing, parsing and syntactic validation of lathe G-code programs.

A program is scanned line by line. Comments in ``( ... )`` or ``; ...`` form
are stripped first, then every uppercase letter opens a word whose value runs
up to the next uppercase letter. Whitespace inside a word is ignored, so
``G 00X1.0`` reads the same as ``G00 X1.0``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Optional

from .errors import LexError

_DECIMAL_RE = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)")

MOTION_CODES = frozenset({0, 1, 2, 3})
SPINDLE_CODES = frozenset({3, 4, 5})
AXIS_LETTERS = frozenset("XZ")

DEFAULT_G_CODES = frozenset({0, 1, 2, 3, 4, 18, 20, 21, 28, 40, 54, 90, 91, 94, 95, 96, 97})
DEFAULT_M_CODES = frozenset({3, 4, 5, 8, 9, 30})
DEFAULT_MAX_FEED = Decimal("500")


def _is_word_letter(ch: str) -> bool:
    return "A" <= ch <= "Z"


def parse_decimal(raw: str) -> Optional[Decimal]:
    if _DECIMAL_RE.fullmatch(raw):
        return Decimal(raw)
    return None


@dataclass(frozen=True)
class Word:
    letter: str
    raw_value: str
    numeric_value: Optional[Decimal] = None

    @classmethod
    def from_raw(cls, letter: str, raw_value: str) -> "Word":
        return cls(letter, raw_value, parse_decimal(raw_value))

    @property
    def text(self) -> str:
        return self.letter + self.raw_value

    @property
    def code(self) -> Optional[int]:
        """Integral command number, or None for fractional/malformed values."""
        value = self.numeric_value
        if value is None or value != value.to_integral_value():
            return None
        return int(value)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Block:
    line_no: int
    words: tuple[Word, ...]
    comment: Optional[str] = None

    def code_text(self) -> str:
        return " ".join(w.text for w in self.words)

    def to_text(self) -> str:
        text = self.code_text()
        if self.comment is not None:
            text = f"{text} ; {self.comment}" if text else f"; {self.comment}"
        return text

    def motion_words(self) -> list[Word]:
        return [w for w in self.words if w.letter == "G" and w.code in MOTION_CODES]

    def has_letter(self, letter: str) -> bool:
        return any(w.letter == letter for w in self.words)


@dataclass(frozen=True)
class Program:
    blocks: tuple[Block, ...]
    source: str

    def to_text(self) -> str:
        return "\n".join(b.to_text() for b in self.blocks)


class IssueCategory(str, enum.Enum):
    MODAL_CONFLICT = "ModalConflict"
    INVALID_COMMAND = "InvalidCommand"
    NON_NUMERIC_COORDINATE = "NonNumericCoordinate"
    MISSING_FEED_VALUE = "MissingFeedValue"
    UNKNOWN_CODE = "UnknownCode"
    EMPTY_MOTION_BLOCK = "EmptyMotionBlock"
    UNSAFE_FEED = "UnsafeFeed"
    OTHER = "Other"

    @property
    def label(self) -> str:
        return _LABELS[self]


# Error-class wording used in issue messages.
_LABELS = {
    IssueCategory.MODAL_CONFLICT: "Modal conflict",
    IssueCategory.INVALID_COMMAND: "Invalid command",
    IssueCategory.NON_NUMERIC_COORDINATE: "Non-numeric coordinate",
    IssueCategory.MISSING_FEED_VALUE: "Feed F missing value",
    IssueCategory.UNKNOWN_CODE: "Unknown code",
    IssueCategory.EMPTY_MOTION_BLOCK: "Empty motion block",
    IssueCategory.UNSAFE_FEED: "Unsafe feed",
    IssueCategory.OTHER: "Malformed line",
}


@dataclass(frozen=True)
class GcodeIssue:
    line_no: int
    category: IssueCategory
    message: str
    word: str = ""


@dataclass(frozen=True)
class ValidationLimits:
    max_feed: Decimal = DEFAULT_MAX_FEED
    known_g_codes: frozenset = DEFAULT_G_CODES
    known_m_codes: frozenset = DEFAULT_M_CODES

    def __post_init__(self):
        object.__setattr__(self, "max_feed", Decimal(str(self.max_feed)))
        object.__setattr__(self, "known_g_codes", frozenset(self.known_g_codes))
        object.__setattr__(self, "known_m_codes", frozenset(self.known_m_codes))
        if self.max_feed <= 0:
            raise ValueError("max_feed must be positive")
        if not MOTION_CODES <= self.known_g_codes:
            raise ValueError("known_g_codes must include 0, 1, 2 and 3")
        if not {3, 4, 5, 30} <= self.known_m_codes:
            raise ValueError("known_m_codes must include 3, 4, 5 and 30")


def _strip_comments(line: str, line_no: int) -> tuple[str, list[str]]:
    """Blank out comments, keeping column positions of the remaining code."""
    code = []
    comments = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "(":
            end = line.find(")", i + 1)
            if end < 0:
                raise LexError("unterminated comment", line_no, i + 1)
            comments.append(line[i + 1:end].strip())
            code.append(" " * (end - i + 1))
            i = end + 1
        elif ch == ";":
            comments.append(line[i + 1:].strip())
            break
        else:
            code.append(ch)
            i += 1
    return "".join(code), comments


def _scan_line(line: str, line_no: int) -> Optional[Block]:
    code, comments = _strip_comments(line, line_no)
    stripped = code.strip()
    # '%' delimits the program on many controls and carries no words.
    if not stripped or stripped == "%":
        return None

    words = []
    i, n = 0, len(code)
    while i < n:
        ch = code[i]
        if ch.isspace():
            i += 1
            continue
        if not _is_word_letter(ch):
            raise LexError(f"unexpected character {ch!r} at start of word", line_no, i + 1)
        j = i + 1
        while j < n and not _is_word_letter(code[j]):
            j += 1
        raw = "".join(c for c in code[i + 1:j] if not c.isspace())
        words.append(Word.from_raw(ch, raw))
        i = j

    comment = " ".join(c for c in comments if c) or None
    return Block(line_no, tuple(words), comment)


def _source_lines(text: str) -> Iterable[tuple[int, str]]:
    for idx, line in enumerate(text.split("\n"), start=1):
        yield idx, line[:-1] if line.endswith("\r") else line


def tokenize(text: str) -> Program:
    """Parse G-code text into blocks.

    Raises LexError on the first line whose word scan cannot start.
    """
    blocks = []
    for line_no, line in _source_lines(text):
        block = _scan_line(line, line_no)
        if block is not None:
            blocks.append(block)
    return Program(tuple(blocks), text)


def tokenize_lenient(text: str) -> tuple[Program, list[LexError]]:
    """Like tokenize, but collects lex failures and skips the offending lines."""
    blocks = []
    errors = []
    for line_no, line in _source_lines(text):
        try:
            block = _scan_line(line, line_no)
        except LexError as exc:
            errors.append(exc)
            continue
        if block is not None:
            blocks.append(block)
    return Program(tuple(blocks), text), errors


def _issue(block: Block, category: IssueCategory, word: str) -> GcodeIssue:
    message = f"Line {block.line_no}: {category.label}: '{word}' in '{block.code_text()}'"
    return GcodeIssue(block.line_no, category, message, word)


def _validate_block(block: Block, limits: ValidationLimits) -> list[GcodeIssue]:
    issues = []
    motion = block.motion_words()
    if len(motion) > 1:
        issues.append(_issue(block, IssueCategory.MODAL_CONFLICT, " ".join(w.text for w in motion)))

    for word in block.words:
        if word.numeric_value is None:
            if word.letter == "F" and word.raw_value == "":
                issues.append(_issue(block, IssueCategory.MISSING_FEED_VALUE, word.text))
            elif word.letter in AXIS_LETTERS:
                issues.append(_issue(block, IssueCategory.NON_NUMERIC_COORDINATE, word.text))
            else:
                issues.append(_issue(block, IssueCategory.INVALID_COMMAND, word.text))
            continue
        if word.letter == "G" and word.code not in limits.known_g_codes:
            issues.append(_issue(block, IssueCategory.UNKNOWN_CODE, word.text))
        elif word.letter == "M" and word.code not in limits.known_m_codes:
            issues.append(_issue(block, IssueCategory.UNKNOWN_CODE, word.text))
        elif word.letter == "F" and word.numeric_value > limits.max_feed:
            issues.append(_issue(block, IssueCategory.UNSAFE_FEED, word.text))

    if motion and not (block.has_letter("X") or block.has_letter("Z")):
        issues.append(_issue(block, IssueCategory.EMPTY_MOTION_BLOCK, motion[0].text))
    return issues


def validate(program: Program, limits: ValidationLimits = ValidationLimits()) -> list[GcodeIssue]:
    """Return every issue in the program; an empty list means it is valid."""
    issues = []
    for block in program.blocks:
        issues.extend(_validate_block(block, limits))
    return issues


def lint(text: str, limits: ValidationLimits = ValidationLimits()) -> list[GcodeIssue]:
    """Validate raw text, reporting unscannable lines as ``Other`` issues.

    Never raises; issues are ordered by line number.
    """
    program, lex_errors = tokenize_lenient(text)
    issues = validate(program, limits)
    lines = text.split("\n")
    for err in lex_errors:
        source = lines[err.line_no - 1].rstrip("\r").strip()
        message = f"Line {err.line_no}: {IssueCategory.OTHER.label}: '{source}' ({err})"
        issues.append(GcodeIssue(err.line_no, IssueCategory.OTHER, message, source))
    issues.sort(key=lambda i: i.line_no)
    return issues
