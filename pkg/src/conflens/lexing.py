"""Comment stripping, tokenization, and token/file classification.

Each supported language has a small hand-rolled line-oriented lexer. The
keyword/operator/separator sets live in plain-text data files under
``conflens/tokensets/`` so the lists can be audited or adjusted without a
rebuild. Sources the lexers cannot handle (unterminated strings or block
comments) raise :class:`LexError`; callers that prefer robustness over
precision can fall back to generic whitespace/punctuation tokenization via
:func:`tokenize_with_fallback`.

Known simplifications, chosen to keep the grammars line-stable:

* javascript regex literals are not detected; a slash lexes as division.
* template-literal ``${...}`` interpolations are scanned as raw text.
* shell ``{``/``}``/``[[``/``]]`` classify as keywords wherever they occur,
  mirroring bash's reserved-word list rather than positional parsing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

PYTHON = "python"
JAVASCRIPT = "javascript"
SHELL = "shell"
GENERIC = "generic"
LANGUAGES = frozenset({PYTHON, JAVASCRIPT, SHELL, GENERIC})

SEPARATOR = "separator"
OPERATOR = "operator"
KEYWORD = "keyword"
IDENTIFIER = "identifier"
LITERAL = "literal"
WORD = "word"
OTHER = "other"
TOKEN_CLASSES = (SEPARATOR, OPERATOR, KEYWORD, IDENTIFIER, LITERAL, WORD, OTHER)

PROGRAMMING = "programming"
CONFIGURATION = "configuration"
DOCUMENTATION = "documentation"
OTHER_KIND = "other"
FILE_KINDS = (PROGRAMMING, CONFIGURATION, DOCUMENTATION, OTHER_KIND)

_KIND_BY_EXTENSION = {
    ".yml": CONFIGURATION,
    ".json": CONFIGURATION,
    ".xml": CONFIGURATION,
    ".pp": CONFIGURATION,
    ".yaml": CONFIGURATION,
    ".sh": PROGRAMMING,
    ".py": PROGRAMMING,
    ".js": PROGRAMMING,
    ".rst": DOCUMENTATION,
    ".php": DOCUMENTATION,
    ".html": DOCUMENTATION,
    ".txt": DOCUMENTATION,
}

_LANGUAGE_BY_EXTENSION = {".py": PYTHON, ".js": JAVASCRIPT, ".sh": SHELL}

PROGRAMMING_EXTENSIONS = (".py", ".js", ".sh")


class LexError(Exception):
    """Source text the lexer cannot scan. Carries a 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass(frozen=True)
class Token:
    text: str
    token_class: str


@dataclass
class TokenStream:
    """Ordered tokens of one file version, plus provenance metadata."""

    path: str
    side: str
    tokens: list[Token]
    language: str
    review_id: str | None = None
    revision_number: int | None = None
    fell_back: bool = field(default=False, compare=False)

    @property
    def extension(self) -> str:
        return file_extension(self.path)


def file_extension(path: str) -> str:
    name = path.rsplit("/", 1)[-1]
    dot = name.rfind(".")
    return name[dot:].lower() if dot > 0 else ""


def classify_file(path: str) -> str:
    """Map a path to configuration/programming/documentation/other by its
    lower-cased extension."""
    if not path:
        raise ValueError("path must be non-empty")
    return _KIND_BY_EXTENSION.get(file_extension(path), OTHER_KIND)


def language_for_path(path: str) -> str:
    return _LANGUAGE_BY_EXTENSION.get(file_extension(path), GENERIC)


@dataclass(frozen=True)
class TokenSets:
    keywords: frozenset[str]
    operators: frozenset[str]
    separators: frozenset[str]

    @property
    def punct_tokens(self) -> tuple[str, ...]:
        # Non-wordlike entries from every class, longest first, so the
        # scanner can longest-match multi-char tokens like "**=" or "[[".
        puncts = [
            tok
            for tok in (self.keywords | self.operators | self.separators)
            if not _WORDLIKE_RE.fullmatch(tok)
        ]
        return tuple(sorted(puncts, key=len, reverse=True))


_WORDLIKE_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _parse_tokenset_text(text: str) -> TokenSets:
    sections: dict[str, list[str]] = {"keywords": [], "operators": [], "separators": []}
    current: list[str] | None = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]") and line[1:-1] in sections:
            current = sections[line[1:-1]]
        elif current is not None:
            current.append(line)
    return TokenSets(
        frozenset(sections["keywords"]),
        frozenset(sections["operators"]),
        frozenset(sections["separators"]),
    )


@lru_cache(maxsize=None)
def token_sets(language: str) -> TokenSets:
    """Load the keyword/operator/separator sets for a language."""
    if language == GENERIC:
        return TokenSets(frozenset(), frozenset(), frozenset())
    if language not in LANGUAGES:
        raise ValueError(f"unknown language {language!r}")
    text = resources.files("conflens.tokensets").joinpath(f"{language}.txt").read_text("utf-8")
    return _parse_tokenset_text(text)


def _pop_trailing_blanks(out: list[str]) -> None:
    while out and out[-1] in (" ", "\t"):
        out.pop()


def _scan_string(
    source: str,
    i: int,
    line: int,
    quote: str,
    *,
    triple_quotes: bool = False,
    multiline: bool = False,
    escapes: bool = True,
) -> tuple[int, int]:
    """Scan a quoted literal starting at ``i``; return (end index, line)."""
    start_line = line
    n = len(source)
    is_triple = triple_quotes and source.startswith(quote * 3, i)
    delim = quote * 3 if is_triple else quote
    j = i + len(delim)
    while j < n:
        c = source[j]
        if escapes and c == "\\" and j + 1 < n:
            if source[j + 1] == "\n":
                line += 1
            j += 2
            continue
        if source.startswith(delim, j):
            return j + len(delim), line
        if c == "\n":
            if not is_triple and not multiline:
                raise LexError("unterminated string literal", start_line)
            line += 1
        j += 1
    raise LexError("unterminated string literal", start_line)


def _strip_python(source: str) -> str:
    out: list[str] = []
    i, line, n = 0, 1, len(source)
    while i < n:
        c = source[i]
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            _pop_trailing_blanks(out)
        elif c in "'\"":
            end, line = _scan_string(source, i, line, c, triple_quotes=True)
            out.append(source[i:end])
            i = end
        else:
            if c == "\n":
                line += 1
            out.append(c)
            i += 1
    return "".join(out)


def _strip_javascript(source: str) -> str:
    out: list[str] = []
    i, line, n = 0, 1, len(source)
    while i < n:
        c = source[i]
        if c == "/" and source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            _pop_trailing_blanks(out)
        elif c == "/" and source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise LexError("unterminated block comment", line)
            span = source[i : end + 2]
            line += span.count("\n")
            out.extend("\n" * span.count("\n"))  # keep line structure
            i = end + 2
            if i >= n or source[i] == "\n":
                _pop_trailing_blanks(out)
        elif c in "'\"":
            end, line = _scan_string(source, i, line, c)
            out.append(source[i:end])
            i = end
        elif c == "`":
            end, line = _scan_string(source, i, line, c, multiline=True)
            out.append(source[i:end])
            i = end
        else:
            if c == "\n":
                line += 1
            out.append(c)
            i += 1
    return "".join(out)


_SHELL_COMMENT_PRECEDERS = frozenset(" \t\n;|&(")


def _strip_shell(source: str) -> str:
    out: list[str] = []
    i, line, n = 0, 1, len(source)
    while i < n:
        c = source[i]
        if c == "\\" and i + 1 < n:
            if source[i + 1] == "\n":
                line += 1
            out.append(source[i : i + 2])
            i += 2
        elif c == "'":
            end, line = _scan_string(source, i, line, c, multiline=True, escapes=False)
            out.append(source[i:end])
            i = end
        elif c == '"':
            end, line = _scan_string(source, i, line, c, multiline=True)
            out.append(source[i:end])
            i = end
        elif c == "#" and (not out or out[-1] in _SHELL_COMMENT_PRECEDERS):
            while i < n and source[i] != "\n":
                i += 1
            _pop_trailing_blanks(out)
        else:
            if c == "\n":
                line += 1
            out.append(c)
            i += 1
    return "".join(out)


def strip_comments(source: str, language: str) -> str:
    """Remove comment spans; string contents and line structure survive.

    Whitespace immediately before a comment that runs to the end of its
    line is trimmed with it. Generic is the identity. Idempotent.
    """
    if language == PYTHON:
        return _strip_python(source)
    if language == JAVASCRIPT:
        return _strip_javascript(source)
    if language == SHELL:
        return _strip_shell(source)
    if language == GENERIC:
        return source
    raise ValueError(f"unknown language {language!r}")


_NUMBER_RES = {
    PYTHON: re.compile(
        r"0[xX][0-9a-fA-F_]+|0[oO][0-7_]+|0[bB][01_]+"
        r"|(?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d[\d_]*)?[jJ]?"
    ),
    JAVASCRIPT: re.compile(
        r"0[xX][0-9a-fA-F]+|0[oO][0-7]+|0[bB][01]+"
        r"|(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
    ),
    SHELL: re.compile(r"\d+"),
}

_NAME_RE = re.compile(r"[A-Za-z_]\w*", re.UNICODE)
_STRING_PREFIX_RE = re.compile(r"[rRbBuUfF]{1,3}")
_WORDCHAR_RE = re.compile(r"\w+", re.UNICODE)


def classify_token(text: str, language: str) -> str:
    """Classify a token produced by :func:`tokenize` for that language."""
    if not text:
        raise ValueError("token text must be non-empty")
    if language == GENERIC:
        return WORD
    sets = token_sets(language)
    if text in sets.keywords:
        return KEYWORD
    if text in sets.operators:
        return OPERATOR
    if text in sets.separators:
        return SEPARATOR
    first = text[0]
    if first in "'\"`":
        return LITERAL
    if language == PYTHON:
        prefix = _STRING_PREFIX_RE.match(text)
        if prefix and prefix.end() < len(text) and text[prefix.end()] in "'\"":
            return LITERAL
    number_re = _NUMBER_RES.get(language)
    if number_re and number_re.fullmatch(text):
        return LITERAL
    if first.isdigit() or (first == "." and len(text) > 1 and text[1].isdigit()):
        return LITERAL
    if _NAME_RE.fullmatch(text) or _WORDCHAR_RE.fullmatch(text):
        return IDENTIFIER
    return OTHER


def _lex_generic(source: str) -> list[str]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        m = _WORDCHAR_RE.match(source, i)
        if m:
            tokens.append(m.group())
            i = m.end()
        else:
            tokens.append(c)
            i += 1
    return tokens


def _lex_code(source: str, language: str) -> list[str]:
    sets = token_sets(language)
    puncts = sets.punct_tokens
    number_re = _NUMBER_RES[language]
    tokens: list[str] = []
    i, line, n = 0, 1, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            if c == "\n":
                line += 1
            i += 1
            continue
        if language == SHELL and c == "\\" and i + 1 < n:
            tokens.append(source[i : i + 2])
            i += 2
            continue
        if c in "'\"" or (language == JAVASCRIPT and c == "`"):
            end, line = _scan_string(
                source, i, line, c,
                triple_quotes=language == PYTHON,
                multiline=language == SHELL or c == "`",
                escapes=not (language == SHELL and c == "'"),
            )
            tokens.append(source[i:end])
            i = end
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit() and language != SHELL):
            m = number_re.match(source, i)
            if m:
                tokens.append(m.group())
                i = m.end()
                continue
        m = _NAME_RE.match(source, i)
        if m:
            name = m.group()
            # A python string prefix glues to the literal that follows it.
            if (
                language == PYTHON
                and len(name) <= 3
                and _STRING_PREFIX_RE.fullmatch(name)
                and m.end() < n
                and source[m.end()] in "'\""
            ):
                end, line = _scan_string(source, m.end(), line, source[m.end()], triple_quotes=True)
                tokens.append(source[i:end])
                i = end
            else:
                tokens.append(name)
                i = m.end()
            continue
        for punct in puncts:
            if source.startswith(punct, i):
                tokens.append(punct)
                i += len(punct)
                break
        else:
            tokens.append(c)
            i += 1
    return tokens


def tokenize(
    source: str,
    language: str,
    *,
    path: str = "",
    side: str = "",
    review_id: str | None = None,
    revision_number: int | None = None,
) -> TokenStream:
    """Tokenize source text; comments are stripped first, whitespace is
    never emitted."""
    if language not in LANGUAGES:
        raise ValueError(f"unknown language {language!r}")
    stripped = strip_comments(source, language)
    if language == GENERIC:
        texts = _lex_generic(stripped)
    else:
        texts = _lex_code(stripped, language)
    tokens = [Token(text, classify_token(text, language)) for text in texts]
    return TokenStream(path, side, tokens, language, review_id, revision_number)


def tokenize_with_fallback(
    source: str,
    language: str,
    *,
    path: str = "",
    side: str = "",
    review_id: str | None = None,
    revision_number: int | None = None,
) -> TokenStream:
    """Tokenize, falling back to generic lexing on a LexError.

    Fallback streams are flagged via ``fell_back`` rather than dropped.
    """
    try:
        return tokenize(
            source, language, path=path, side=side,
            review_id=review_id, revision_number=revision_number,
        )
    except LexError:
        stream = tokenize(
            source, GENERIC, path=path, side=side,
            review_id=review_id, revision_number=revision_number,
        )
        stream.fell_back = True
        return stream
