"""N-Triples parsing, serialization and an in-memory predicate-indexed store."""
from __future__ import annotations

import enum
import io
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD + "string"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
RDF_LANGSTRING = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString"


class TermKind(str, enum.Enum):
    IRI = "IRI"
    BLANK = "BlankNode"
    LITERAL = "Literal"


class PredicateClass(str, enum.Enum):
    OBJECT = "ObjectProperty"
    DATATYPE = "DatatypeProperty"
    MIXED = "Mixed"


@dataclass(frozen=True, slots=True)
class TermValue:
    kind: TermKind
    lexical: str
    datatype: str | None = None
    language_tag: str | None = None

    @classmethod
    def iri(cls, value: str) -> "TermValue":
        return cls(TermKind.IRI, value)

    @classmethod
    def blank(cls, label: str) -> "TermValue":
        return cls(TermKind.BLANK, label)

    @classmethod
    def literal(cls, lexical: str, datatype: str | None = None,
                language_tag: str | None = None) -> "TermValue":
        if language_tag is not None:
            if datatype not in (None, RDF_LANGSTRING):
                raise ValueError("literal cannot carry both datatype and language tag")
            return cls(TermKind.LITERAL, lexical, None, language_tag)
        return cls(TermKind.LITERAL, lexical, datatype or XSD_STRING, None)

    @property
    def is_resource(self) -> bool:
        return self.kind is not TermKind.LITERAL

    @property
    def key(self) -> str:
        """Store-scoped node identity: the IRI, or ``_:label`` for blank nodes."""
        return self.lexical if self.kind is TermKind.IRI else "_:" + self.lexical


@dataclass(frozen=True, slots=True)
class Triple:
    subject: TermValue
    predicate: TermValue
    object: TermValue


class NTriplesParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class PredicateStats:
    object_count: dict[str, int]
    literal_count: dict[str, int]

    def total(self, predicate: str) -> int:
        return self.object_count.get(predicate, 0) + self.literal_count.get(predicate, 0)


@dataclass(frozen=True)
class TripleStore:
    triples: tuple[Triple, ...]
    by_predicate: dict[str, tuple[int, ...]]
    stats: PredicateStats
    skipped: tuple[NTriplesParseError, ...] = ()
    ignorable_lines: int = 0
    total_lines: int = 0

    @classmethod
    def from_triples(cls, triples: Iterable[Triple], *, skipped=(), ignorable_lines: int = 0,
                     total_lines: int = 0) -> "TripleStore":
        triples = tuple(triples)
        index: dict[str, list[int]] = defaultdict(list)
        objects: Counter = Counter()
        literals: Counter = Counter()
        for pos, t in enumerate(triples):
            p = t.predicate.lexical
            index[p].append(pos)
            if t.object.is_resource:
                objects[p] += 1
            else:
                literals[p] += 1
        return cls(
            triples=triples,
            by_predicate={p: tuple(v) for p, v in index.items()},
            stats=PredicateStats(dict(objects), dict(literals)),
            skipped=tuple(skipped),
            ignorable_lines=ignorable_lines,
            total_lines=total_lines,
        )

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def with_predicate(self, predicate: str) -> list[Triple]:
        return [self.triples[i] for i in self.by_predicate.get(predicate, ())]


# ------------------------------------------------------------------- parsing

_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
            '"': '"', "'": "'", "\\": "\\"}


class _LineParser:
    def __init__(self, text: str, lineno: int):
        self.s = text
        self.i = 0
        self.lineno = lineno

    def error(self, msg: str, at: int | None = None) -> NTriplesParseError:
        return NTriplesParseError(msg, self.lineno, (self.i if at is None else at) + 1)

    def ws(self) -> None:
        while self.i < len(self.s) and self.s[self.i] in " \t":
            self.i += 1

    def peek(self) -> str:
        return self.s[self.i] if self.i < len(self.s) else ""

    def _uchar(self, width: int) -> str:
        start = self.i
        hexdigits = self.s[self.i:self.i + width]
        if len(hexdigits) != width or any(c not in "0123456789abcdefABCDEF" for c in hexdigits):
            raise self.error(f"bad \\{'u' if width == 4 else 'U'} escape", start)
        self.i += width
        code = int(hexdigits, 16)
        if code > 0x10FFFF:
            raise self.error("escape outside the Unicode range", start)
        return chr(code)

    def iri(self) -> str:
        start = self.i
        assert self.s[self.i] == "<"
        self.i += 1
        out = []
        while True:
            if self.i >= len(self.s):
                raise self.error("unterminated IRI", start)
            c = self.s[self.i]
            if c == ">":
                self.i += 1
                break
            if c == "\\":
                kind = self.s[self.i + 1:self.i + 2]
                self.i += 2
                if kind == "u":
                    out.append(self._uchar(4))
                elif kind == "U":
                    out.append(self._uchar(8))
                else:
                    raise self.error("invalid escape in IRI", self.i - 2)
                continue
            if c in ' <"{}|^`' or ord(c) <= 0x20:
                raise self.error(f"illegal character {c!r} in IRI")
            out.append(c)
            self.i += 1
        value = "".join(out)
        if not value or ":" not in value:
            raise self.error("IRI is not absolute", start)
        return value

    def blank(self) -> str:
        start = self.i
        if not self.s.startswith("_:", self.i):
            raise self.error("expected blank node", start)
        self.i += 2
        j = self.i
        while j < len(self.s) and (self.s[j].isalnum() or self.s[j] in "_-.:"):
            j += 1
        # a label may not end with '.'
        while j > self.i and self.s[j - 1] == ".":
            j -= 1
        if j == self.i:
            raise self.error("empty blank node label", start)
        label = self.s[self.i:j]
        self.i = j
        return label

    def literal(self) -> TermValue:
        start = self.i
        self.i += 1
        out = []
        while True:
            if self.i >= len(self.s):
                raise self.error("unterminated string literal", start)
            c = self.s[self.i]
            if c == '"':
                self.i += 1
                break
            if c == "\\":
                kind = self.s[self.i + 1:self.i + 2]
                self.i += 2
                if kind in _ESCAPES:
                    out.append(_ESCAPES[kind])
                elif kind == "u":
                    out.append(self._uchar(4))
                elif kind == "U":
                    out.append(self._uchar(8))
                else:
                    raise self.error(f"invalid escape \\{kind}", self.i - 2)
                continue
            if c in "\n\r":
                raise self.error("raw line break in literal")
            out.append(c)
            self.i += 1
        lexical = "".join(out)
        if self.s.startswith("^^", self.i):
            self.i += 2
            if self.peek() != "<":
                raise self.error("expected datatype IRI after ^^")
            return TermValue.literal(lexical, datatype=self.iri())
        if self.peek() == "@":
            self.i += 1
            j = self.i
            while j < len(self.s) and (self.s[j].isalnum() or self.s[j] == "-"):
                j += 1
            tag = self.s[self.i:j]
            if not tag or not tag[0].isalpha():
                raise self.error("bad language tag")
            self.i = j
            return TermValue.literal(lexical, language_tag=tag)
        return TermValue.literal(lexical)

    def term(self, role: str) -> TermValue:
        c = self.peek()
        if c == "<":
            return TermValue.iri(self.iri())
        if c == "_" and role != "predicate":
            return TermValue.blank(self.blank())
        if c == '"' and role == "object":
            return self.literal()
        if not c or c == ".":
            raise self.error(f"missing {role}")
        raise self.error(f"unexpected {c!r} where {role} expected")

    def statement(self) -> Triple | None:
        self.ws()
        if self.i >= len(self.s) or self.peek() == "#":
            return None
        s = self.term("subject")
        self.ws()
        p = self.term("predicate")
        self.ws()
        o = self.term("object")
        self.ws()
        if self.peek() != ".":
            raise self.error("expected '.' terminating the statement")
        self.i += 1
        self.ws()
        if self.i < len(self.s) and self.peek() != "#":
            raise self.error("trailing content after statement")
        return Triple(s, p, o)


def parse_line(line: str, lineno: int = 1) -> Triple | None:
    """Parse one N-Triples line; ``None`` for blank and comment lines."""
    return _LineParser(line.rstrip("\r\n"), lineno).statement()


def parse_ntriples(source: str | TextIO | Iterable[str], strict: bool = True) -> TripleStore:
    """Parse N-Triples text (a string, file object or iterable of lines).

    In strict mode the first malformed line raises ``NTriplesParseError``;
    otherwise malformed lines are skipped and recorded in ``store.skipped``.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    triples: list[Triple] = []
    skipped: list[NTriplesParseError] = []
    ignorable = 0
    lineno = 0
    for lineno, line in enumerate(source, start=1):
        try:
            t = parse_line(line, lineno)
        except NTriplesParseError as err:
            if strict:
                raise
            skipped.append(err)
            continue
        if t is None:
            ignorable += 1
        else:
            triples.append(t)
    return TripleStore.from_triples(triples, skipped=skipped, ignorable_lines=ignorable,
                                    total_lines=lineno)


def classify_predicates(store: TripleStore) -> dict[str, PredicateClass]:
    out = {}
    for p in store.by_predicate:
        obj = store.stats.object_count.get(p, 0)
        lit = store.stats.literal_count.get(p, 0)
        if obj and lit:
            out[p] = PredicateClass.MIXED
        elif obj:
            out[p] = PredicateClass.OBJECT
        else:
            out[p] = PredicateClass.DATATYPE
    return out


# ------------------------------------------------------------- serialization

def _escape_literal(text: str) -> str:
    return (text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
            .replace("\r", "\\r").replace("\t", "\\t").replace("\b", "\\b")
            .replace("\f", "\\f"))


def _escape_iri(text: str) -> str:
    out = []
    for c in text:
        if c in ' <>"{}|^`\\' or ord(c) <= 0x20:
            out.append(f"\\u{ord(c):04X}")
        else:
            out.append(c)
    return "".join(out)


def format_term(term: TermValue) -> str:
    if term.kind is TermKind.IRI:
        return f"<{_escape_iri(term.lexical)}>"
    if term.kind is TermKind.BLANK:
        return "_:" + term.lexical
    body = f'"{_escape_literal(term.lexical)}"'
    if term.language_tag is not None:
        return f"{body}@{term.language_tag}"
    if term.datatype and term.datatype != XSD_STRING:
        return f"{body}^^<{_escape_iri(term.datatype)}>"
    return body


def format_triple(t: Triple) -> str:
    return f"{format_term(t.subject)} {format_term(t.predicate)} {format_term(t.object)} ."


def serialize_ntriples(store: TripleStore | Iterable[Triple]) -> str:
    return "".join(format_triple(t) + "\n" for t in store)


def write_ntriples(store: TripleStore | Iterable[Triple], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in store:
            fh.write(format_triple(t) + "\n")


def read_ntriples(path, strict: bool = True) -> TripleStore:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_ntriples(fh, strict=strict)
