# lexer.py
"""Token-level Java lexer.

The lexer never parses: it only cuts the file into lexemes, keeping
whitespace and comments as tokens so the stream can be glued back into the
original text. Malformed literals and comments are reported and lexing
resumes on the next line.
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Optional

logger = logging.getLogger(__name__)


class TokenKind(str, Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    LITERAL = "literal"
    OPERATOR = "operator"
    PUNCTUATION = "punctuation"
    COMMENT = "comment"
    WHITESPACE = "whitespace"


@dataclass(frozen=True)
class SourceToken:
    """One lexeme with its 1-based position."""
    text: str
    kind: TokenKind
    line: int
    column: int

    @property
    def is_significant(self) -> bool:
        return self.kind not in (TokenKind.WHITESPACE, TokenKind.COMMENT)

    @property
    def end_line(self) -> int:
        return self.line + _count_breaks(self.text)


@dataclass(frozen=True)
class LexIssue:
    """A recoverable lexing problem (UnterminatedLiteral / UnterminatedComment)."""
    kind: str
    line: int
    column: int


JAVA_KEYWORDS = frozenset("""
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
""".split())

LITERAL_WORDS = frozenset(["true", "false", "null"])

# Longest first so the alternation picks the maximal munch.
OPERATORS = sorted([
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||",
    "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=",
    "<<", ">>", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&",
    "|", "^", "%",
], key=len, reverse=True)

_NUMBER = (
    r"0[xX][0-9a-fA-F_]*\.?[0-9a-fA-F_]*(?:[pP][+-]?\d+)?[lLfFdD]?"
    r"|0[bB][01_]+[lL]?"
    r"|(?:\d[\d_]*(?:\.(?![.\w])|\.[\d_]+)?|\.\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?[lLfFdD]?"
)


def make_groups(**expressions: str) -> str:
    return "|".join(f"(?P<{name}>{pattern})" for name, pattern in expressions.items())


TOKEN_RE = re.compile(make_groups(
    whitespace=r"\s+",
    block_comment=r"/\*[\s\S]*?\*/",
    line_comment=r"//[^\r\n]*",
    text_block=r'"""(?:[^\\]|\\[\s\S])*?"""',
    string=r'"(?:[^"\\\r\n]|\\[^\r\n])*"',
    char=r"'(?:[^'\\\r\n]|\\[^\r\n])+'",
    number=_NUMBER,
    word=r"(?:[^\W\d]|\$)[\w$]*",
    operator="|".join(re.escape(op) for op in OPERATORS),
    punctuation=r"[(){}\[\];,.@]",
))

_GROUP_KINDS = {
    "whitespace": TokenKind.WHITESPACE,
    "block_comment": TokenKind.COMMENT,
    "line_comment": TokenKind.COMMENT,
    "text_block": TokenKind.LITERAL,
    "string": TokenKind.LITERAL,
    "char": TokenKind.LITERAL,
    "number": TokenKind.LITERAL,
    "operator": TokenKind.OPERATOR,
    "punctuation": TokenKind.PUNCTUATION,
}

_LINE_END_RE = re.compile(r"[^\r\n]*")


def _count_breaks(text: str) -> int:
    return text.count("\n") + text.count("\r") - text.count("\r\n")


def _advance(line: int, column: int, text: str) -> tuple:
    breaks = _count_breaks(text)
    if breaks == 0:
        return line, column + len(text)
    tail = re.split(r"\r\n|\r|\n", text)[-1]
    return line + breaks, len(tail) + 1


class JavaLexer:
    """Cuts one Java source text into SourceTokens."""

    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.line = 1
        self.column = 1
        self.tokens: List[SourceToken] = []
        self.issues: List[LexIssue] = []

    def tokenize(self) -> List[SourceToken]:
        while self.pos < len(self.source):
            match = TOKEN_RE.match(self.source, self.pos)
            if match is not None and match.lastgroup == "operator" and self.source.startswith("/*", self.pos):
                match = None  # unclosed block comment
            if match is not None and match.lastgroup is not None:
                self._emit(match.group(), self._kind_of(match.lastgroup, match.group()))
            else:
                self._recover()
        return self.tokens

    @staticmethod
    def _kind_of(group: str, text: str) -> TokenKind:
        if group == "word":
            if text in JAVA_KEYWORDS:
                return TokenKind.KEYWORD
            if text in LITERAL_WORDS:
                return TokenKind.LITERAL
            return TokenKind.IDENTIFIER
        return _GROUP_KINDS[group]

    def _emit(self, text: str, kind: TokenKind):
        self.tokens.append(SourceToken(text, kind, self.line, self.column))
        self.pos += len(text)
        self.line, self.column = _advance(self.line, self.column, text)

    def _recover(self):
        """Swallow the rest of the line as one token after a malformed lexeme."""
        rest = self.source[self.pos:]
        if rest.startswith("/*"):
            issue, kind = "UnterminatedComment", TokenKind.COMMENT
        elif rest[0] in "\"'":
            issue, kind = "UnterminatedLiteral", TokenKind.LITERAL
        else:
            self._emit(rest[0], TokenKind.PUNCTUATION)
            return

        self.issues.append(LexIssue(issue, self.line, self.column))
        logger.warning("%s at line %d, column %d", issue, self.line, self.column)
        text = _LINE_END_RE.match(self.source, self.pos).group()
        self._emit(text, kind)


def lex_java(source: str, issues: Optional[List[LexIssue]] = None) -> List[SourceToken]:
    """Lex a Java source text; recoverable problems are appended to ``issues``."""
    lexer = JavaLexer(source)
    tokens = lexer.tokenize()
    if issues is not None:
        issues.extend(lexer.issues)
    return tokens


@lru_cache(maxsize=65536)
def classify_lexeme(text: str) -> TokenKind:
    """Kind of a single stored lexeme (records keep only token strings)."""
    tokens = JavaLexer(text).tokenize()
    return tokens[0].kind if tokens else TokenKind.WHITESPACE
