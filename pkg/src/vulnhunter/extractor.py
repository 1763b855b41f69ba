"""Lexical C/C++ function extraction and comment stripping.

A deliberately non-AST scanner: functions are found as an identifier plus
parameter list followed by a balanced top-level brace block.  String and
character literals, raw strings, and preprocessor lines are opaque to
brace counting.  Comment removal records a position delta so model output
on cleaned text can be mapped back to original file coordinates.

Known out-of-scope constructs (documented limitations): K&R definitions,
macros that expand to braces, template metaprogramming corner cases,
trigraphs, and methods defined inside class bodies.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field

_ID_CHARS = re.compile(r"[A-Za-z0-9_]")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
# qualifiers that may sit between ')' and '{' in a definition header
_TRAILING_OK = {"const", "noexcept", "override", "final", "volatile", "restrict",
                "__restrict", "throw", "try"}
_NON_FUNCTION_INTRO = {"struct", "class", "union", "enum", "typedef"}


class ExtractorError(ValueError):
    pass


@dataclass
class PositionDelta:
    """Monotone map from cleaned text offsets back to original offsets.

    anchors are (cleaned_offset, original_offset) pairs, strictly increasing
    in both coordinates; between anchors the mapping advances one-for-one.
    Offsets in `synthetic` are replacement spaces with no original character.
    """

    anchors: list[tuple[int, int]]
    synthetic: frozenset[int]
    cleaned_length: int
    cleaned_newlines: tuple[int, ...] = ()

    def to_original(self, cleaned_offset: int) -> int:
        if not (0 <= cleaned_offset <= self.cleaned_length):
            raise ExtractorError(f"cleaned offset {cleaned_offset} out of range")
        keys = [a[0] for a in self.anchors]
        i = bisect.bisect_right(keys, cleaned_offset) - 1
        c, o = self.anchors[i]
        return o + (cleaned_offset - c)

    def line_start(self, cleaned_line: int) -> int:
        if not (1 <= cleaned_line <= len(self.cleaned_newlines) + 1):
            raise ExtractorError(f"cleaned line {cleaned_line} out of range")
        if cleaned_line == 1:
            return 0
        return self.cleaned_newlines[cleaned_line - 2] + 1

    def rebase(self, start: int, end: int, cleaned_text: str) -> "PositionDelta":
        """Delta for cleaned[start:end] with local cleaned offsets but
        original offsets still absolute in the source file."""
        local: list[tuple[int, int]] = [(0, self.to_original(start))]
        for c, o in self.anchors:
            if start < c < end:
                local.append((c - start, o))
        sub = cleaned_text[start:end]
        return PositionDelta(
            anchors=local,
            synthetic=frozenset(s - start for s in self.synthetic if start <= s < end),
            cleaned_length=end - start,
            cleaned_newlines=tuple(m.start() for m in re.finditer("\n", sub)),
        )


def newline_offsets(text: str) -> tuple[int, ...]:
    return tuple(m.start() for m in re.finditer("\n", text))


def line_of_offset(newlines: tuple[int, ...], offset: int) -> int:
    """1-based line containing the character at offset."""
    return bisect.bisect_right(newlines, offset - 1) + 1


def map_line(delta: PositionDelta, original_newlines: tuple[int, ...], cleaned_line: int) -> int:
    """Map a 1-based cleaned line number to its original line number.

    Uses the first non-synthetic character of the line so that a collapsed
    block comment at the start of a line does not drag the mapping backwards.
    """
    start = delta.line_start(cleaned_line)
    if cleaned_line <= len(delta.cleaned_newlines):
        end = delta.cleaned_newlines[cleaned_line - 1]
    else:
        end = delta.cleaned_length
    for o in range(start, end):
        if o not in delta.synthetic:
            return line_of_offset(original_newlines, delta.to_original(o))
    return line_of_offset(original_newlines, delta.to_original(start))


# ---------------------------------------------------------------------------
# Comment stripping


def _is_raw_string(text: str, quote: int) -> bool:
    # matches R"..., uR"..., u8R"..., UR"..., LR"... at an identifier boundary
    if quote == 0 or text[quote - 1] != "R":
        return False
    j = quote - 1
    before = text[:j]
    for prefix in ("u8", "u", "U", "L", ""):
        if before.endswith(prefix):
            k = j - len(prefix)
            if k == 0 or not _ID_CHARS.match(text[k - 1]):
                return True
    return False


def _scan_string(text: str, i: int, quote_char: str) -> int:
    """Return index just past the literal starting at text[i] (which is the
    opening quote).  An unescaped newline terminates a malformed literal."""
    n = len(text)
    i += 1
    while i < n:
        c = text[i]
        if c == "\\" and i + 1 < n:
            i += 2
            continue
        if c == quote_char:
            return i + 1
        if c == "\n":
            return i  # malformed; let the newline back into normal scanning
        i += 1
    return n


def _scan_raw_string(text: str, quote: int) -> int:
    m = re.compile(r'([^ ()\\\t\n]{0,16})\(').match(text, quote + 1)
    if not m:
        return _scan_string(text, quote, '"')
    closer = ")" + m.group(1) + '"'
    end = text.find(closer, m.end())
    return len(text) if end == -1 else end + len(closer)


def _char_is_digit_separator(text: str, i: int) -> bool:
    # C++14 numeric literals like 1'000'000
    return (
        0 < i < len(text) - 1
        and text[i - 1].isalnum()
        and text[i + 1].isalnum()
        and not (text[i - 1] in "uUL" and (i < 2 or not _ID_CHARS.match(text[i - 2])))
    )


def strip_comments(text: str) -> tuple[str, PositionDelta, list[str]]:
    """Remove // and non-nesting block comments outside literals.

    Line comments are deleted up to (not including) the newline; block
    comments become a single space.  Returns the cleaned text, the position
    delta, and a warning list (unterminated block comments).
    """
    out: list[str] = []
    anchors: list[tuple[int, int]] = [(0, 0)]
    synthetic: set[int] = set()
    warnings: list[str] = []
    newlines_seen = 0

    def add_anchor(original_pos: int) -> None:
        cleaned_pos = len(out)
        if anchors[-1][0] == cleaned_pos:
            anchors[-1] = (cleaned_pos, original_pos)
        else:
            anchors.append((cleaned_pos, original_pos))

    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            i = n if j == -1 else j
            add_anchor(i)
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "*":
            j = text.find("*/", i + 2)
            if j == -1:
                warnings.append(
                    f"unterminated block comment at line {newlines_seen + 1}"
                )
                i = n
            else:
                i = j + 2
            synthetic.add(len(out))
            out.append(" ")
            add_anchor(i)
            continue
        if c == '"':
            end = _scan_raw_string(text, i) if _is_raw_string(text, i) else _scan_string(text, i, '"')
            out.extend(text[i:end])
            i = end
            continue
        if c == "'" and not _char_is_digit_separator(text, i):
            end = _scan_string(text, i, "'")
            out.extend(text[i:end])
            i = end
            continue
        if c == "\n":
            newlines_seen += 1
        out.append(c)
        i += 1

    cleaned = "".join(out)
    delta = PositionDelta(
        anchors=anchors,
        synthetic=frozenset(synthetic),
        cleaned_length=len(cleaned),
        cleaned_newlines=newline_offsets(cleaned),
    )
    return cleaned, delta, warnings


# ---------------------------------------------------------------------------
# Function extraction


@dataclass
class SourceFunction:
    """One extracted function with both coordinate systems."""

    name: str
    original_span: tuple[int, int]  # (start line, end line), 1-based inclusive
    byte_span: tuple[int, int]  # byte offsets into the original UTF-8 text
    cleaned_text: str
    delta: PositionDelta  # cleaned_text offsets -> absolute original offsets

    def original_line_of(self, cleaned_line: int, original_newlines: tuple[int, ...]) -> int:
        return map_line(self.delta, original_newlines, cleaned_line)


@dataclass
class ExtractionResult:
    functions: list[SourceFunction]
    warnings: list[str] = field(default_factory=list)


def _skip_preprocessor(cleaned: str, i: int) -> int:
    """Consume a preprocessor line including backslash continuations."""
    n = len(cleaned)
    while i < n:
        j = cleaned.find("\n", i)
        if j == -1:
            return n
        k = j - 1
        while k >= 0 and cleaned[k] in " \t":
            k -= 1
        if k >= 0 and cleaned[k] == "\\":
            i = j + 1
            continue
        return j  # leave the newline to the caller
    return n


def _header_tokens(header: str) -> list[str]:
    return re.findall(r"[A-Za-z_][A-Za-z0-9_]*|[^\sA-Za-z0-9_]", header)


def _looks_like_function_header(header: str) -> tuple[bool, str]:
    """Decide whether the text before a top-level '{' is a definition header;
    returns (is_function, name)."""
    toks = _header_tokens(header)
    if not toks or "(" not in toks:
        return False, ""
    # tail after the last ')' may hold qualifiers or a ctor initializer list
    last_close = len(toks) - 1 - toks[::-1].index(")") if ")" in toks else -1
    if last_close == -1:
        return False, ""
    tail = toks[last_close + 1 :]
    depth = 0
    for t in tail:
        if t == "(":
            depth += 1
        elif t == ")":
            depth -= 1
        elif depth == 0 and t == "=":
            return False, ""  # e.g. array initializer after a call-like macro
        elif depth == 0 and t not in _TRAILING_OK and t != ":" and t != "," and not _IDENT_RE.fullmatch(t):
            if t not in ("&", "-", ">", "*"):
                return False, ""
    first_open = toks.index("(")
    if first_open == 0:
        return False, ""
    name = toks[first_open - 1]
    if not _IDENT_RE.fullmatch(name):
        return False, ""
    if name in _NON_FUNCTION_INTRO or toks[0] in _NON_FUNCTION_INTRO:
        return False, ""
    # control statements parenthesize too, but only appear inside bodies;
    # still, guard against stray top-level `if (...) {`
    if name in ("if", "for", "while", "switch", "sizeof", "return", "catch", "do", "else"):
        return False, ""
    return True, name


def _byte_offsets(text: str) -> list[int]:
    """offsets[i] = byte offset of character i in the UTF-8 encoding."""
    offsets = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        offsets[i] = pos
        pos += len(ch.encode("utf-8"))
    offsets[len(text)] = pos
    return offsets


def extract_functions(source: str | bytes) -> ExtractionResult:
    """Find function definitions in C/C++ source text.

    Scans the comment-stripped text; literals and preprocessor lines are
    opaque to brace counting.  Never raises on malformed code: unbalanced
    braces yield a partial result plus warnings.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    cleaned, delta, warnings = strip_comments(source)
    original_newlines = newline_offsets(source)
    byte_offsets = _byte_offsets(source)

    functions: list[SourceFunction] = []
    n = len(cleaned)
    i = 0
    header_start = 0
    at_line_start = True

    while i < n:
        c = cleaned[i]
        if at_line_start and c in " \t":
            i += 1
            continue
        if at_line_start and c == "#":
            i = _skip_preprocessor(cleaned, i)
            header_start = i
            continue
        at_line_start = c == "\n"
        if c == '"':
            i = _scan_raw_string(cleaned, i) if _is_raw_string(cleaned, i) else _scan_string(cleaned, i, '"')
            continue
        if c == "'" and not _char_is_digit_separator(cleaned, i):
            i = _scan_string(cleaned, i, "'")
            continue
        if c in ";}":
            header_start = i + 1
            i += 1
            continue
        if c == "{":
            header = cleaned[header_start:i]
            toks = _header_tokens(header)
            if toks and (toks[0] in ("namespace", "extern") and "(" not in toks):
                # transparent scope: scan its interior as top level
                header_start = i + 1
                i += 1
                continue
            is_fn, name = _looks_like_function_header(header)
            end, balanced = _match_brace(cleaned, i)
            if not balanced:
                warnings.append(
                    f"unbalanced braces after line "
                    f"{line_of_offset(delta.cleaned_newlines, i)}; partial result"
                )
                if not is_fn:
                    break
            if is_fn:
                start = header_start
                while start < i and cleaned[start] in " \t\n":
                    start += 1
                functions.append(
                    _make_function(name, cleaned, delta, start, end, original_newlines, byte_offsets)
                )
            i = end
            header_start = i
            continue
        i += 1

    return ExtractionResult(functions=functions, warnings=warnings)


def _match_brace(cleaned: str, open_i: int) -> tuple[int, bool]:
    """Index just past the brace matching cleaned[open_i]; literals and
    preprocessor lines inside are opaque."""
    depth = 0
    i = open_i
    n = len(cleaned)
    at_line_start = False
    while i < n:
        c = cleaned[i]
        if at_line_start:
            j = i
            while j < n and cleaned[j] in " \t":
                j += 1
            if j < n and cleaned[j] == "#":
                i = _skip_preprocessor(cleaned, j)
                continue
        at_line_start = c == "\n"
        if c == '"':
            i = _scan_raw_string(cleaned, i) if _is_raw_string(cleaned, i) else _scan_string(cleaned, i, '"')
            continue
        if c == "'" and not _char_is_digit_separator(cleaned, i):
            i = _scan_string(cleaned, i, "'")
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1, True
        i += 1
    return n, False


def _first_real_offset(delta: PositionDelta, start: int, end: int) -> int:
    for o in range(start, end):
        if o not in delta.synthetic:
            return o
    return start


def _make_function(
    name: str,
    cleaned: str,
    delta: PositionDelta,
    start: int,
    end: int,
    original_newlines: tuple[int, ...],
    byte_offsets: list[int],
) -> SourceFunction:
    first = _first_real_offset(delta, start, end)
    o_start = delta.to_original(first)
    o_end = delta.to_original(end - 1) + 1
    return SourceFunction(
        name=name or "<anonymous>",
        original_span=(
            line_of_offset(original_newlines, o_start),
            line_of_offset(original_newlines, o_end - 1),
        ),
        byte_span=(byte_offsets[o_start], byte_offsets[o_end]),
        cleaned_text=cleaned[start:end],
        delta=delta.rebase(start, end, cleaned),
    )
