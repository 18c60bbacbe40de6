"""Lexer for Python source producing normalized token streams.

The scanner never rejects input: malformed regions degrade to ERR tokens so
arbitrary user uploads can always be processed. String literals collapse to
"STR" and numbers to "NUM" to bound the embedding vocabulary while keeping
identifiers (API names carry the vulnerability signal) verbatim.
"""

from __future__ import annotations

import hashlib
import keyword
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

TAB_SIZE = 8

# Texts used for structural tokens. Angle brackets cannot occur inside any
# identifier/operator lexeme, so these never collide with real code tokens.
NEWLINE_TEXT = "<NL>"
INDENT_TEXT = "<INDENT>"
DEDENT_TEXT = "<DEDENT>"
ERROR_TEXT = "ERR"
STRING_TEXT = "STR"
NUMBER_TEXT = "NUM"

UNK = "UNK"
PAD = "PAD"


class TokenKind(str, Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    OPERATOR = "operator"
    DELIMITER = "delimiter"
    STRING_LIT = "string_lit"
    NUMBER_LIT = "number_lit"
    INDENT = "indent"
    DEDENT = "dedent"
    NEWLINE = "newline"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    byte_start: int
    byte_end: int
    line: int


@dataclass(frozen=True)
class TokenStream:
    file_path: str
    tokens: tuple[Token, ...]
    source_hash: str

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


# '=' and '->' are treated as operators (assignment reads as an operation on
# the embedding level); brackets and separators are delimiters.
_DELIMITERS = {"(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "..."}
_OPERATORS = {
    "+", "-", "*", "/", "%", "@", "**", "//", "<<", ">>", "&", "|", "^", "~",
    "<", ">", "<=", ">=", "==", "!=", "=", "->", ":=",
    "+=", "-=", "*=", "/=", "%=", "@=", "&=", "|=", "^=", "**=", "//=",
    "<<=", ">>=",
}
_PUNCT = sorted(_DELIMITERS | _OPERATORS, key=len, reverse=True)

_STRING_PREFIXES = {
    "r", "b", "u", "f", "rb", "br", "rf", "fr",
}


def _is_string_prefix(word: str) -> bool:
    return word.lower() in _STRING_PREFIXES


class _Lexer:
    def __init__(self, source: str):
        self.src = source
        self.n = len(source)
        self.pos = 0          # char offset
        self.byte_pos = 0     # byte offset of self.pos in the UTF-8 encoding
        self.line = 1
        self.paren_depth = 0
        self.indents = [0]
        self.tokens: list[Token] = []
        self.line_has_tokens = False

    # -- low-level cursor ---------------------------------------------------

    def _advance(self, count: int = 1) -> None:
        for _ in range(count):
            ch = self.src[self.pos]
            self.byte_pos += len(ch.encode("utf-8", "surrogateescape"))
            if ch == "\n":
                self.line += 1
            self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.src[i] if i < self.n else ""

    def _emit(self, text: str, kind: TokenKind, byte_start: int, byte_end: int,
              line: int) -> None:
        self.tokens.append(Token(text, kind, byte_start, byte_end, line))
        if kind not in (TokenKind.INDENT, TokenKind.DEDENT):
            self.line_has_tokens = True

    # -- line structure -----------------------------------------------------

    def _handle_line_start(self) -> None:
        """Measure indentation and emit indent/dedent tokens as needed.

        Blank and comment-only lines produce nothing and leave the indent
        stack untouched, matching logical-line semantics.
        """
        col = 0
        scan = self.pos
        while scan < self.n and self.src[scan] in " \t\f":
            ch = self.src[scan]
            if ch == "\t":
                col = (col // TAB_SIZE + 1) * TAB_SIZE
            elif ch == "\f":
                col = 0
            else:
                col += 1
            scan += 1
        if scan >= self.n or self.src[scan] in "#\r\n":
            # Blank or comment-only line: consume the whitespace, let the
            # main loop deal with the comment/newline (both emit nothing).
            self._advance(scan - self.pos)
            return
        self._advance(scan - self.pos)
        here = self.byte_pos
        if col > self.indents[-1]:
            self.indents.append(col)
            self._emit(INDENT_TEXT, TokenKind.INDENT, here, here, self.line)
            return
        while col < self.indents[-1]:
            self.indents.pop()
            self._emit(DEDENT_TEXT, TokenKind.DEDENT, here, here, self.line)
        if col > self.indents[-1]:
            # Inconsistent dedent: recover by opening a fresh level.
            self.indents.append(col)
            self._emit(INDENT_TEXT, TokenKind.INDENT, here, here, self.line)

    def _end_logical_line(self, byte_start: int, byte_end: int, line: int) -> None:
        if self.line_has_tokens:
            self._emit(NEWLINE_TEXT, TokenKind.NEWLINE, byte_start, byte_end, line)
        self.line_has_tokens = False

    # -- token scanners -----------------------------------------------------

    def _scan_string(self) -> None:
        start_pos = self.pos
        start_byte = self.byte_pos
        start_line = self.line
        # Optional 1-2 letter prefix already validated by the caller.
        while self._peek().isalpha():
            self._advance()
        quote = self._peek()
        if self._peek(1) == quote and self._peek(2) == quote:
            closer = quote * 3
            self._advance(3)
        else:
            closer = quote
            self._advance()
        triple = len(closer) == 3
        while self.pos < self.n:
            ch = self._peek()
            if ch == "\\" and self.pos + 1 < self.n:
                self._advance(2)
                continue
            if not triple and ch in "\r\n":
                break  # unterminated single-line string
            if ch == quote:
                if triple:
                    if self._peek(1) == quote and self._peek(2) == quote:
                        self._advance(3)
                        self._emit(STRING_TEXT, TokenKind.STRING_LIT,
                                   start_byte, self.byte_pos, start_line)
                        return
                    self._advance()
                    continue
                self._advance()
                self._emit(STRING_TEXT, TokenKind.STRING_LIT,
                           start_byte, self.byte_pos, start_line)
                return
            self._advance()
        # Ran off the line (or file): degrade instead of failing.
        if self.pos == start_pos:
            self._advance()
        self._emit(ERROR_TEXT, TokenKind.IDENTIFIER, start_byte, self.byte_pos,
                   start_line)

    def _scan_number(self) -> None:
        start_pos = self.pos
        start_byte = self.byte_pos
        start_line = self.line
        digits = "0123456789"

        def isdig(ch: str) -> bool:
            return ch != "" and ch in digits

        if self._peek() == "0" and self._peek(1) in ("x", "X", "o", "O", "b", "B"):
            self._advance(2)
            while self._peek().isalnum() or self._peek() == "_":
                self._advance()
        else:
            seen_dot = False
            seen_exp = False
            while True:
                ch = self._peek()
                if isdig(ch) or ch == "_":
                    self._advance()
                elif ch == "." and not seen_dot and not seen_exp:
                    # ``1.`` and ``.5`` are floats; ``1.x`` keeps the dot.
                    nxt = self._peek(1)
                    if isdig(nxt) or nxt == "_" or not (nxt.isalpha() or nxt == "."):
                        seen_dot = True
                        self._advance()
                    else:
                        break
                elif ch in ("e", "E") and not seen_exp:
                    nxt = self._peek(1)
                    if isdig(nxt) or (nxt in ("+", "-") and isdig(self._peek(2))):
                        seen_exp = True
                        self._advance(2)
                    else:
                        break
                elif ch in ("j", "J"):
                    self._advance()
                    break
                else:
                    break
        if self.pos == start_pos:
            # Not actually a number lexeme (defensive); never stall.
            self._advance()
            self._emit(ERROR_TEXT, TokenKind.IDENTIFIER, start_byte,
                       self.byte_pos, start_line)
            return
        self._emit(NUMBER_TEXT, TokenKind.NUMBER_LIT, start_byte, self.byte_pos,
                   start_line)

    def _scan_identifier(self) -> None:
        start_pos = self.pos
        start_byte = self.byte_pos
        start_line = self.line
        self._advance()
        while self.pos < self.n and (self._peek().isalnum() or self._peek() == "_"):
            self._advance()
        word = self.src[start_pos:self.pos]
        if _is_string_prefix(word) and self._peek() in ("'", '"'):
            # Prefixed string literal: rewind and lex the whole literal.
            self.pos = start_pos
            self.byte_pos = start_byte
            self.line = start_line
            self._scan_string()
            return
        kind = TokenKind.KEYWORD if keyword.iskeyword(word) else TokenKind.IDENTIFIER
        self._emit(word, kind, start_byte, self.byte_pos, start_line)

    def _scan_punct(self) -> bool:
        for lexeme in _PUNCT:
            if self.src.startswith(lexeme, self.pos):
                start_byte = self.byte_pos
                start_line = self.line
                self._advance(len(lexeme))
                kind = (TokenKind.DELIMITER if lexeme in _DELIMITERS
                        else TokenKind.OPERATOR)
                if lexeme in "([{":
                    self.paren_depth += 1
                elif lexeme in ")]}":
                    self.paren_depth = max(0, self.paren_depth - 1)
                self._emit(lexeme, kind, start_byte, self.byte_pos, start_line)
                return True
        return False

    # -- main loop ----------------------------------------------------------

    def run(self) -> list[Token]:
        at_line_start = True
        while self.pos < self.n:
            if at_line_start and self.paren_depth == 0:
                self._handle_line_start()
                at_line_start = False
                if self.pos >= self.n:
                    break
            ch = self._peek()
            if ch in " \t\f":
                self._advance()
            elif ch == "\r" or ch == "\n":
                start_byte = self.byte_pos
                start_line = self.line
                if ch == "\r" and self._peek(1) == "\n":
                    self._advance(2)
                else:
                    self._advance()
                if self.paren_depth == 0:
                    self._end_logical_line(start_byte, self.byte_pos, start_line)
                    at_line_start = True
            elif ch == "#":
                while self.pos < self.n and self._peek() not in "\r\n":
                    self._advance()
            elif ch == "\\":
                nxt = self._peek(1)
                if nxt == "\r" and self._peek(2) == "\n":
                    self._advance(3)
                elif nxt in ("\r", "\n"):
                    self._advance(2)
                else:
                    start_byte = self.byte_pos
                    start_line = self.line
                    self._advance()
                    self._emit(ERROR_TEXT, TokenKind.IDENTIFIER, start_byte,
                               self.byte_pos, start_line)
            elif ch in "'\"":
                self._scan_string()
            elif ch in "0123456789" or (ch == "." and
                                        self._peek(1) in tuple("0123456789")):
                self._scan_number()
            elif ch.isalpha() or ch == "_" or (ch.isidentifier() and not ch.isdigit()):
                self._scan_identifier()
            elif self._scan_punct():
                pass
            else:
                start_byte = self.byte_pos
                start_line = self.line
                self._advance()
                self._emit(ERROR_TEXT, TokenKind.IDENTIFIER, start_byte,
                           self.byte_pos, start_line)
        # Synthesized end-of-file structure: a zero-width newline closes an
        # unterminated final logical line, then open indents unwind.
        if self.line_has_tokens:
            self._emit(NEWLINE_TEXT, TokenKind.NEWLINE, self.byte_pos,
                       self.byte_pos, self.line)
            self.line_has_tokens = False
        while len(self.indents) > 1:
            self.indents.pop()
            self._emit(DEDENT_TEXT, TokenKind.DEDENT, self.byte_pos,
                       self.byte_pos, self.line)
        return self.tokens


def tokenize(source: str | bytes, file_path: str = "<memory>") -> TokenStream:
    """Lex Python source into a normalized TokenStream. Never raises."""
    if isinstance(source, bytes):
        raw = source
        text = source.decode("utf-8", "surrogateescape")
    else:
        raw = source.encode("utf-8", "surrogateescape")
        text = source
    digest = hashlib.sha256(raw).hexdigest()
    tokens = _Lexer(text).run()
    return TokenStream(file_path=file_path, tokens=tuple(tokens),
                       source_hash=digest)


def vocabulary_of(corpus: Iterable[TokenStream], min_count: int = 1) -> list[str]:
    """Distinct token texts with frequency >= min_count.

    Sorted by (descending frequency, ascending text); "UNK" and "PAD" are
    always present at indices 0 and 1.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for stream in corpus:
        counts.update(t.text for t in stream.tokens)
    entries = [(text, c) for text, c in counts.items()
               if c >= min_count and text not in (UNK, PAD)]
    entries.sort(key=lambda item: (-item[1], item[0]))
    return [UNK, PAD] + [text for text, _ in entries]


def normalized_text(tokens: Sequence[Token]) -> str:
    """Render a token sequence back into equivalent normalized source.

    Structural tokens become real line breaks and indentation, so the result
    re-tokenizes to the same token texts (STR and NUM included).
    """
    lines: list[str] = []
    current: list[str] = []
    level = 0
    for tok in tokens:
        if tok.kind is TokenKind.NEWLINE:
            lines.append("    " * level + " ".join(current))
            current = []
        elif tok.kind is TokenKind.INDENT:
            level += 1
        elif tok.kind is TokenKind.DEDENT:
            level = max(0, level - 1)
        else:
            current.append(tok.text)
    if current:
        lines.append("    " * level + " ".join(current))
    return "\n".join(lines) + ("\n" if lines else "")
