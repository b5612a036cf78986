# compress.py
"""Bounded-length method representations fed to the sequence model."""

import sys
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set

from lexer import TokenKind, classify_lexeme
from textprep import MethodCommentPair, code_subtokens, subtokenize

DEFAULT_MAX_TOKENS = 50
UNBOUNDED = sys.maxsize

PRIMITIVE_TYPES = frozenset(["boolean", "byte", "char", "short", "int", "long", "float", "double", "void"])
PRIMITIVE_WRAPPERS = frozenset([
    "Boolean", "Byte", "Character", "Short", "Integer", "Long", "Float", "Double", "Void",
])
DECLARATION_FOLLOWERS = frozenset(["=", ";", ",", ":", ")"])


class Scheme(str, Enum):
    SIGNATURE = "signature"
    BEGIN_END = "begin-end"
    IDENTIFIER = "identifier"


class Category(str, Enum):
    BRACE = "brace"
    LOCAL = "local"
    GLOBAL = "global"
    USER_TYPE = "user_type"
    EXTERNAL_METHOD = "external_method"
    LOCAL_METHOD = "local_method"
    FORMAL = "formal"


# salience order: earlier categories are exhausted first
PRECEDENCE = [
    Category.BRACE, Category.LOCAL, Category.GLOBAL, Category.USER_TYPE,
    Category.EXTERNAL_METHOD, Category.LOCAL_METHOD, Category.FORMAL,
]


@dataclass
class CompressedMethod:
    tokens: List[str]
    scheme: Scheme
    truncated: bool


@dataclass(frozen=True)
class IdentifierCategory:
    """Category of one brace or identifier occurrence in a method body."""
    name: str
    category: Category
    position: int


def compress_signature(signature_tokens: Sequence[str], max_tokens: int = DEFAULT_MAX_TOKENS) -> CompressedMethod:
    return CompressedMethod(
        tokens=list(signature_tokens[:max_tokens]),
        scheme=Scheme.SIGNATURE,
        truncated=len(signature_tokens) > max_tokens,
    )


def compress_begin_end(method_tokens: Sequence[str], max_tokens: int = DEFAULT_MAX_TOKENS) -> CompressedMethod:
    """First ceil(L/2) tokens followed by the last floor(L/2)."""
    if len(method_tokens) <= max_tokens:
        return CompressedMethod(list(method_tokens), Scheme.BEGIN_END, truncated=False)
    head = (max_tokens + 1) // 2
    tail = max_tokens - head
    tokens = list(method_tokens[:head]) + (list(method_tokens[-tail:]) if tail else [])
    return CompressedMethod(tokens, Scheme.BEGIN_END, truncated=True)


def truncate_comment(sentence_tokens: Sequence[str], max_tokens: int = DEFAULT_MAX_TOKENS) -> List[str]:
    return list(sentence_tokens[:max_tokens])


def _kind(token: str) -> TokenKind:
    return classify_lexeme(token)


def _matching(tokens: Sequence[str], start: int, opening: str, closing: str) -> Optional[int]:
    depth = 0
    for k in range(start, len(tokens)):
        if tokens[k] == opening:
            depth += 1
        elif tokens[k] == closing:
            depth -= 1
            if depth == 0:
                return k
    return None


def parameter_names(signature: Sequence[str]) -> List[str]:
    """Names declared in the parameter list of a raw signature."""
    i = 0
    while i + 1 < len(signature) and signature[i] == "@" and _kind(signature[i + 1]) == TokenKind.IDENTIFIER:
        i += 2
        while i + 1 < len(signature) and signature[i] == ".":
            i += 2
        if i < len(signature) and signature[i] == "(":
            close = _matching(signature, i, "(", ")")
            if close is None:
                return []
            i = close + 1
    try:
        open_paren = signature.index("(", i)
    except ValueError:
        return []
    close = _matching(signature, open_paren, "(", ")")
    if close is None:
        return []

    names: List[str] = []
    group: List[str] = []
    depth = 0
    for token in list(signature[open_paren + 1:close]) + [","]:
        if token in ("<", "("):
            depth += 1
        elif token in (">", ")"):
            depth -= 1
        elif token in (">>", ">>>"):
            depth -= len(token)
        if token == "," and depth <= 0:
            identifiers = [t for t in group if _kind(t) == TokenKind.IDENTIFIER]
            if identifiers:
                names.append(identifiers[-1])
            group = []
        else:
            group.append(token)
    return names


def _is_type_position(body: Sequence[str], k: int) -> bool:
    prev = body[k - 1] if k > 0 else ""
    nxt = body[k + 1] if k + 1 < len(body) else ""
    after = body[k + 2] if k + 2 < len(body) else ""
    if prev == "new":
        return True
    if nxt and _kind(nxt) == TokenKind.IDENTIFIER and prev != ".":
        return True
    if nxt == "<" or (nxt == "[" and after == "]"):
        return True
    if prev in ("<", ",") and nxt in (">", ">>", ">>>", ","):
        return True
    # cast: ( Type ) operand
    return prev == "(" and nxt == ")" and bool(after) and (
        after == "(" or _kind(after) in (TokenKind.IDENTIFIER, TokenKind.LITERAL))


def _is_declaration(body: Sequence[str], k: int) -> bool:
    prev = body[k - 1] if k > 0 else ""
    nxt = body[k + 1] if k + 1 < len(body) else ""
    if nxt not in DECLARATION_FOLLOWERS or not prev:
        return False
    return (_kind(prev) == TokenKind.IDENTIFIER or prev in PRIMITIVE_TYPES
            or prev in (">", ">>", ">>>", "]"))


def classify_identifiers(signature: Sequence[str], body: Sequence[str],
                         file_methods: Iterable[str] = ()) -> List[IdentifierCategory]:
    """Resolution-free categories for every brace and identifier in a body."""
    formals = set(parameter_names(signature))
    defined: Set[str] = set(file_methods)

    first_is_declaration: Dict[str, bool] = {}
    for k, token in enumerate(body):
        if _kind(token) != TokenKind.IDENTIFIER or (k > 0 and body[k - 1] == "."):
            continue
        if token not in first_is_declaration:
            first_is_declaration[token] = _is_declaration(body, k)
    locals_ = {name for name, declared in first_is_declaration.items() if declared}

    result: List[IdentifierCategory] = []
    for k, token in enumerate(body):
        if token in ("{", "}"):
            result.append(IdentifierCategory(token, Category.BRACE, k))
            continue
        if _kind(token) != TokenKind.IDENTIFIER:
            continue
        member = k > 0 and body[k - 1] == "."
        nxt = body[k + 1] if k + 1 < len(body) else ""
        if not member and token in formals:
            category = Category.FORMAL
        elif not member and token in locals_:
            category = Category.LOCAL
        elif _is_type_position(body, k) and token[0].isupper() and token not in PRIMITIVE_WRAPPERS:
            category = Category.USER_TYPE
        elif nxt == "(":
            category = Category.LOCAL_METHOD if token in defined else Category.EXTERNAL_METHOD
        else:
            category = Category.GLOBAL
        result.append(IdentifierCategory(token, category, k))
    return result


def _brace_structure(body: Sequence[str]):
    partner: Dict[int, int] = {}
    enclosing: Dict[int, List[int]] = {}
    stack: List[int] = []
    for k, token in enumerate(body):
        if token == "{":
            stack.append(k)
        elif token == "}":
            if stack:
                opening = stack.pop()
                partner[opening] = k
                partner[k] = opening
        else:
            enclosing[k] = list(stack)
    return partner, enclosing


def compress_identifier(signature: Sequence[str], body: Sequence[str], file_methods: Iterable[str] = (),
                        max_tokens: int = DEFAULT_MAX_TOKENS,
                        split_underscore_digit: bool = True) -> CompressedMethod:
    """Signature, then salient body identifiers chosen greedily by category.

    Selection follows PRECEDENCE and order of appearance; emission follows
    source order. A brace pair is charged together with the first selected
    identifier it encloses; the outermost pair is taken first.
    """
    signature_tokens = code_subtokens(signature, split_underscore_digit)
    tokens = signature_tokens[:max_tokens]
    truncated = len(signature_tokens) > max_tokens
    budget = max_tokens - len(tokens)

    partner, enclosing = _brace_structure(body)
    selected: Set[int] = set()
    if body and body[0] == "{" and 0 in partner and budget >= 2:
        selected.update((0, partner[0]))
        budget -= 2

    occurrences = [occ for occ in classify_identifiers(signature, body, file_methods)
                   if occ.category != Category.BRACE]
    occurrences.sort(key=lambda occ: (PRECEDENCE.index(occ.category), occ.position))
    for occ in occurrences:
        pending = [b for b in enclosing.get(occ.position, []) if b not in selected]
        cost = len(subtokenize(occ.name, split_underscore_digit))
        cost += sum(2 if b in partner else 1 for b in pending)
        if cost > budget:
            truncated = True
            break
        selected.add(occ.position)
        for b in pending:
            selected.add(b)
            if b in partner:
                selected.add(partner[b])
        budget -= cost

    for k in sorted(selected):
        if body[k] in ("{", "}"):
            tokens.append(body[k])
        else:
            tokens.extend(subtokenize(body[k], split_underscore_digit))
    return CompressedMethod(tokens, Scheme.IDENTIFIER, truncated)


def compress_pair(pair: MethodCommentPair, scheme: Scheme, max_tokens: int = DEFAULT_MAX_TOKENS,
                  split_underscore_digit: bool = True) -> CompressedMethod:
    scheme = Scheme(scheme)
    if scheme == Scheme.SIGNATURE:
        return compress_signature(pair.signature_tokens, max_tokens)
    if scheme == Scheme.BEGIN_END:
        return compress_begin_end(pair.method_tokens, max_tokens)
    return compress_identifier(pair.signature_raw, pair.body_raw, pair.file_methods,
                               max_tokens, split_underscore_digit)
