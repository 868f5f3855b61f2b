"""N-Triples terms, parsing and serialization.

Only the line-oriented N-Triples syntax is supported.  Every statement sits
on its own line; ``#`` starts a comment.
"""
from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator

logger = logging.getLogger(__name__)


class TermKind(Enum):
    IRI = "iri"
    LITERAL = "literal"
    BLANK = "blank"


@dataclass(frozen=True, slots=True)
class Term:
    kind: TermKind
    lexical: str
    datatype: str | None = None
    language: str | None = None

    def __post_init__(self):
        if self.kind is TermKind.IRI:
            if not self.lexical or any(ch.isspace() for ch in self.lexical):
                raise ValueError(f"invalid IRI {self.lexical!r}")
        elif self.kind is TermKind.BLANK:
            if not self.lexical:
                raise ValueError("blank node label must be non-empty")
        if self.kind is not TermKind.LITERAL and (self.datatype or self.language):
            raise ValueError("only literals carry a datatype or language tag")
        if self.datatype is not None and self.language is not None:
            raise ValueError("a literal has either a datatype or a language tag")
        if self.language is not None:
            # language tags compare case-insensitively
            object.__setattr__(self, "language", self.language.lower())

    @property
    def is_iri(self) -> bool:
        return self.kind is TermKind.IRI

    @property
    def is_literal(self) -> bool:
        return self.kind is TermKind.LITERAL

    @property
    def is_blank(self) -> bool:
        return self.kind is TermKind.BLANK

    def n3(self) -> str:
        return term_to_nt(self)

    def __str__(self) -> str:
        return term_to_nt(self)


def IRI(value: str) -> Term:
    return Term(TermKind.IRI, value)


def Literal(value: str, datatype: str | None = None, language: str | None = None) -> Term:
    return Term(TermKind.LITERAL, value, datatype, language)


def BNode(label: str) -> Term:
    return Term(TermKind.BLANK, label)


RawTriple = tuple[Term, Term, Term]


class NTriplesError(ValueError):
    def __init__(self, lineno: int, text: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {text!r}")
        self.lineno = lineno
        self.text = text
        self.reason = reason


_UCHAR = r"\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8}"
_IRI_RE = re.compile(r"<((?:[^<>\"{}|^`\\\x00-\x20]|" + _UCHAR + r")*)>")
_BNODE_RE = re.compile(r"_:([A-Za-z0-9_\u00b7-\uffff](?:[A-Za-z0-9_\-.\u00b7-\uffff]*[A-Za-z0-9_\-\u00b7-\uffff])?)")
_LITERAL_RE = re.compile(r'"((?:[^"\\\n\r]|\\.)*)"')
_LANG_RE = re.compile(r"@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)")
_WS_RE = re.compile(r"[ \t]*")
_ESCAPE_RE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))", re.DOTALL)
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _unescape(text: str, allow_echar: bool) -> str:
    if "\\" not in text:
        return text

    def sub(m: re.Match) -> str:
        if m.group(1) or m.group(2):
            return chr(int(m.group(1) or m.group(2), 16))
        ch = m.group(3)
        if allow_echar and ch in _ECHAR:
            return _ECHAR[ch]
        raise ValueError(f"bad escape \\{ch}")

    return _ESCAPE_RE.sub(sub, text)


def _read_term(line: str, pos: int) -> tuple[Term, int]:
    m = _IRI_RE.match(line, pos)
    if m:
        return IRI(_unescape(m.group(1), allow_echar=False)), m.end()
    m = _BNODE_RE.match(line, pos)
    if m:
        return BNode(m.group(1)), m.end()
    m = _LITERAL_RE.match(line, pos)
    if m:
        lexical = _unescape(m.group(1), allow_echar=True)
        end = m.end()
        if line.startswith("^^", end):
            dt = _IRI_RE.match(line, end + 2)
            if not dt:
                raise ValueError("bad datatype IRI")
            return Literal(lexical, datatype=_unescape(dt.group(1), False)), dt.end()
        lang = _LANG_RE.match(line, end)
        if lang:
            return Literal(lexical, language=lang.group(1)), lang.end()
        return Literal(lexical), end
    raise ValueError(f"unexpected token at column {pos + 1}")


def parse_term(text: str) -> Term:
    """Parse a single term written in N-Triples syntax."""
    text = text.strip()
    term, end = _read_term(text, 0)
    if end != len(text):
        raise ValueError(f"trailing characters after term: {text!r}")
    return term


def parse_line(line: str) -> RawTriple | None:
    """Parse one line; ``None`` for blank and comment lines."""
    pos = _WS_RE.match(line).end()
    if pos >= len(line) or line[pos] == "#":
        return None
    s, pos = _read_term(line, pos)
    pos = _WS_RE.match(line, pos).end()
    p, pos = _read_term(line, pos)
    pos = _WS_RE.match(line, pos).end()
    o, pos = _read_term(line, pos)
    pos = _WS_RE.match(line, pos).end()
    if not line.startswith(".", pos):
        raise ValueError("missing terminating '.'")
    pos = _WS_RE.match(line, pos + 1).end()
    if pos < len(line) and line[pos] != "#":
        raise ValueError("trailing characters after '.'")
    if s.is_literal:
        raise ValueError("literal in subject position")
    if not p.is_iri:
        raise ValueError("predicate must be an IRI")
    return s, p, o


class NTriplesParser:
    """Line parser with an optional lenient mode.

    In strict mode the first malformed line raises :class:`NTriplesError`.
    In lenient mode such lines are skipped; ``skipped`` counts them and
    ``errors`` keeps the first ``max_errors`` of them for diagnostics.
    """

    def __init__(self, lenient: bool = False, blank_scope: str | None = None, max_errors: int = 100):
        self.lenient = lenient
        self.blank_scope = blank_scope
        self.max_errors = max_errors
        self.skipped = 0
        self.errors: list[NTriplesError] = []

    def _scoped(self, term: Term) -> Term:
        if self.blank_scope and term.is_blank:
            return BNode(f"{self.blank_scope}x{term.lexical}")
        return term

    def iter_parse(self, source: IO | Iterable) -> Iterator[RawTriple]:
        for lineno, line in enumerate(source, start=1):
            if isinstance(line, bytes):
                line = line.decode("utf-8")
            line = line.rstrip("\r\n")
            try:
                triple = parse_line(line)
            except ValueError as exc:
                err = NTriplesError(lineno, line, str(exc))
                if not self.lenient:
                    raise err from None
                self.skipped += 1
                if len(self.errors) < self.max_errors:
                    self.errors.append(err)
                continue
            if triple is None:
                continue
            if self.blank_scope:
                triple = tuple(self._scoped(t) for t in triple)
            yield triple

    def parse(self, source: IO | Iterable) -> list[RawTriple]:
        triples = list(self.iter_parse(source))
        if self.skipped:
            logger.warning("skipped %d malformed N-Triples lines", self.skipped)
        return triples


def parse_ntriples(source: IO | Iterable | bytes | str, lenient: bool = False,
                   blank_scope: str | None = None) -> list[RawTriple]:
    """Parse N-Triples from a stream, an iterable of lines, or a bytes/str blob."""
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)
    return NTriplesParser(lenient=lenient, blank_scope=blank_scope).parse(source)


def _scope_for(path: Path) -> str:
    return re.sub(r"[^A-Za-z0-9]", "", path.stem) or "f"


def load_ntriples(path: str | Path, lenient: bool = False, scope_blanks: bool = True) -> list[RawTriple]:
    path = Path(path)
    with open(path, "rb") as fh:
        parser = NTriplesParser(lenient=lenient, blank_scope=_scope_for(path) if scope_blanks else None)
        return parser.parse(fh)


def _escape_literal(text: str) -> str:
    return (text.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))


def _escape_iri(text: str) -> str:
    out = []
    for ch in text:
        if ch in '<>"{}|^`\\' or ord(ch) <= 0x20:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def term_to_nt(term: Term) -> str:
    if term.kind is TermKind.IRI:
        return f"<{_escape_iri(term.lexical)}>"
    if term.kind is TermKind.BLANK:
        return f"_:{term.lexical}"
    lit = f'"{_escape_literal(term.lexical)}"'
    if term.datatype is not None:
        return f"{lit}^^<{_escape_iri(term.datatype)}>"
    if term.language is not None:
        return f"{lit}@{term.language}"
    return lit


def triple_to_nt(triple: RawTriple) -> str:
    s, p, o = triple
    return f"{term_to_nt(s)} {term_to_nt(p)} {term_to_nt(o)} ."


def write_ntriples(triples: Iterable[RawTriple], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            fh.write(triple_to_nt(t))
            fh.write("\n")
            n += 1
    return n
