"""Subject-predicate-object interpretation graphs with deterministic
N-Triples-compatible serialization.

The vocabulary is small and fixed, everything under one namespace
(urn:x-ink:). Numeric literals carry explicit unit tags as datatype IRIs
(e.g. ^^<urn:x-ink:unit/mm>) so feature semantics stay machine-checkable.
Serialized graphs are UTF-8, LF line endings, one triple per line,
lexicographically sorted; insertion order never affects the bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import quote

from . import ENGINE_VERSION
from .battery import SummativeStats
from .features import FeatureVector, feature_catalog
from .model import InkSession
from .recognize import ShapeLabel, StrokeGroup

NS = "urn:x-ink:"
XSD = "http://www.w3.org/2001/XMLSchema#"

DEFAULT_PREFIXES = {"ink": NS, "xsd": XSD}

# vocabulary terms
T_TEST = NS + "testId"
T_SUBJECT = NS + "subjectPseudonym"
T_SOURCE = NS + "source"
T_SPAN = NS + "spanMicroseconds"
T_ENGINE = NS + "engineVersion"
T_HAS_GROUP = NS + "hasGroup"
T_LABEL = NS + "hasLabel"
T_CONFIDENCE = NS + "confidence"
T_STROKE_COUNT = NS + "strokeCount"
T_FLAG = NS + "hasFlag"
T_SCORE = NS + "score/"
T_FEATURE = NS + "feature/"


class DanglingReference(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class IRI:
    value: str


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str | None = None  # full datatype IRI; None = plain string


Triple = tuple[str, str, "IRI | Literal"]


def lit_str(v: str) -> Literal:
    return Literal(v)


def lit_bool(v: bool) -> Literal:
    return Literal("true" if v else "false", XSD + "boolean")


def lit_int(v: int) -> Literal:
    return Literal(str(int(v)), XSD + "integer")


def _unit_slug(unit: str) -> str:
    return (unit.replace("/", "_per_").replace("^", "").replace(" ", "_"))


def lit_float(v: float, unit: str | None = None) -> Literal:
    datatype = NS + "unit/" + _unit_slug(unit) if unit else XSD + "double"
    return Literal(repr(float(v)), datatype)


@dataclass(frozen=True)
class InterpretationGraph:
    triples: frozenset[Triple]
    prefixes: tuple[tuple[str, str], ...] = tuple(sorted(DEFAULT_PREFIXES.items()))

    def __len__(self) -> int:
        return len(self.triples)


def session_iri(session_id: str) -> str:
    return NS + "session/" + quote(session_id, safe="")


def group_iri(session_id: str, group_id: int) -> str:
    return f"{session_iri(session_id)}/group/{group_id}"


def to_triples(session: InkSession,
               groups: list[StrokeGroup],
               labels: list[ShapeLabel],
               score: dict | None = None,
               document_features: FeatureVector | None = None,
               summary: SummativeStats | None = None) -> InterpretationGraph:
    """Content-based interpretation of a session as a triple graph."""
    if len(groups) != len(labels):
        raise DanglingReference("labels do not match groups one-to-one")
    n_strokes = len(session.strokes)
    for g in groups:
        if any(i >= n_strokes or i < 0 for i in g.stroke_indices):
            raise DanglingReference(f"group {g.group_id} references missing strokes")

    s = session_iri(session.session_id)
    triples: list[Triple] = [
        (s, T_TEST, lit_str(session.test_id)),
        (s, T_SUBJECT, lit_str(session.subject_pseudonym)),
        (s, T_SOURCE, lit_str(session.source)),
        (s, T_SPAN, lit_int(session.span_us)),
        (s, T_ENGINE, lit_str(ENGINE_VERSION)),
    ]
    for g, lab in zip(groups, labels):
        gi = group_iri(session.session_id, g.group_id)
        triples.append((s, T_HAS_GROUP, IRI(gi)))
        triples.append((gi, T_LABEL, lit_str(lab.label)))
        triples.append((gi, T_CONFIDENCE, lit_float(lab.confidence)))
        triples.append((gi, T_STROKE_COUNT, lit_int(len(g.stroke_indices))))

    if score:
        for key, value in score.items():
            pred = T_SCORE + key
            if isinstance(value, bool):
                triples.append((s, pred, lit_bool(value)))
            elif isinstance(value, int):
                triples.append((s, pred, lit_int(value)))
            elif isinstance(value, float):
                triples.append((s, pred, lit_float(value)))
            elif isinstance(value, str):
                triples.append((s, pred, lit_str(value)))
            # non-scalar components (id lists, nested maps) stay in the
            # JSON result export

    if document_features is not None:
        units = {d.id: d.unit for d in feature_catalog()}
        for fid, value in document_features.values.items():
            triples.append((s, T_FEATURE + fid, lit_float(value, units[fid])))

    if summary is not None:
        for flag in summary.flags:
            triples.append((s, T_FLAG, lit_str(flag)))

    return InterpretationGraph(frozenset(triples))


# ---------------------------------------------------------------------------
# serialization

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _unescape(text: str, line: int) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                raise ParseError("dangling escape", line)
            nxt = text[i + 1]
            mapping = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}
            if nxt not in mapping:
                raise ParseError(f"bad escape \\{nxt}", line)
            out.append(mapping[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _term_to_text(term: IRI | Literal) -> str:
    if isinstance(term, IRI):
        return f"<{term.value}>"
    quoted = f'"{_escape(term.lexical)}"'
    if term.datatype is None:
        return quoted
    return f"{quoted}^^<{term.datatype}>"


def serialize(graph: InterpretationGraph) -> bytes:
    lines = []
    for s, p, o in graph.triples:
        lines.append(f"<{s}> <{p}> {_term_to_text(o)} .")
    lines.sort()
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_iri(text: str, pos: int, line: int) -> tuple[str, int]:
    if pos >= len(text) or text[pos] != "<":
        raise ParseError("expected '<'", line)
    end = text.find(">", pos)
    if end < 0:
        raise ParseError("unterminated IRI", line)
    return text[pos + 1:end], end + 1


def _skip_space(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] == " ":
        pos += 1
    return pos


def _parse_object(text: str, pos: int, line: int) -> tuple[IRI | Literal, int]:
    if pos >= len(text):
        raise ParseError("missing object", line)
    if text[pos] == "<":
        iri, pos = _parse_iri(text, pos, line)
        return IRI(iri), pos
    if text[pos] != '"':
        raise ParseError("expected IRI or literal", line)
    i = pos + 1
    while i < len(text):
        if text[i] == "\\":
            i += 2
            continue
        if text[i] == '"':
            break
        i += 1
    else:
        raise ParseError("unterminated literal", line)
    lexical = _unescape(text[pos + 1:i], line)
    pos = i + 1
    if text[pos:pos + 2] == "^^":
        datatype, pos = _parse_iri(text, pos + 2, line)
        return Literal(lexical, datatype), pos
    return Literal(lexical), pos


def parse(data: bytes) -> InterpretationGraph:
    triples: set[Triple] = set()
    text = data.decode("utf-8")
    for lineno, raw in enumerate(text.split("\n"), start=1):
        if not raw:
            continue
        pos = 0
        s, pos = _parse_iri(raw, pos, lineno)
        pos = _skip_space(raw, pos)
        p, pos = _parse_iri(raw, pos, lineno)
        pos = _skip_space(raw, pos)
        o, pos = _parse_object(raw, pos, lineno)
        pos = _skip_space(raw, pos)
        if raw[pos:] != ".":
            raise ParseError("expected terminating '.'", lineno)
        triples.add((s, p, o))
    return InterpretationGraph(frozenset(triples))
