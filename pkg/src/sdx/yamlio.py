"""Strict YAML subset loading shared by the fabric config and topology parsers.

Only plain scalars, mappings, and sequences are accepted; anchors, aliases,
explicit tags, and multi-document streams are rejected so that a document has
exactly one deterministic interpretation.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml


class YamlSourceError(Exception):
    """Syntax-level rejection of a YAML document."""

    def __init__(self, code: str, message: str, line: int | None = None, col: int | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line is None:
            return f"{self.code}: {self.message}"
        return f"{self.code}: {self.message} (line {self.line}, column {self.col})"


@dataclass
class Scalar:
    raw: str
    quoted: bool
    line: int
    col: int


@dataclass
class Sequence:
    items: list
    line: int
    col: int


@dataclass
class Mapping:
    pairs: list  # list of (Scalar, node) in document order
    line: int
    col: int

    def keys(self) -> list[str]:
        return [k.raw for k, _ in self.pairs]

    def get(self, key: str):
        for k, v in self.pairs:
            if k.raw == key:
                return v
        return None

    def key_scalar(self, key: str) -> Scalar | None:
        for k, _ in self.pairs:
            if k.raw == key:
                return k
        return None


def _mark(node) -> tuple[int, int]:
    m = node.start_mark
    return m.line + 1, m.column + 1


def _screen_events(text: str) -> None:
    docs = 0
    try:
        for event in yaml.parse(text, Loader=yaml.SafeLoader):
            if isinstance(event, yaml.DocumentStartEvent):
                docs += 1
                if docs > 1:
                    raise YamlSourceError("multi_document", "multiple YAML documents not accepted")
            if isinstance(event, yaml.AliasEvent):
                raise YamlSourceError(
                    "alias", "YAML aliases are not accepted",
                    event.start_mark.line + 1, event.start_mark.column + 1)
            if getattr(event, "anchor", None):
                raise YamlSourceError(
                    "anchor", "YAML anchors are not accepted",
                    event.start_mark.line + 1, event.start_mark.column + 1)
            if getattr(event, "tag", None):
                raise YamlSourceError(
                    "tag", f"explicit YAML tags are not accepted: {event.tag}",
                    event.start_mark.line + 1, event.start_mark.column + 1)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise YamlSourceError(
            "yaml_syntax", exc.problem or "YAML syntax error",
            mark.line + 1 if mark else None, mark.column + 1 if mark else None) from exc
    except yaml.YAMLError as exc:
        raise YamlSourceError("yaml_syntax", str(exc)) from exc


def _convert(node):
    if isinstance(node, yaml.ScalarNode):
        line, col = _mark(node)
        return Scalar(raw=node.value, quoted=node.style in ("'", '"'), line=line, col=col)
    if isinstance(node, yaml.SequenceNode):
        line, col = _mark(node)
        return Sequence(items=[_convert(i) for i in node.value], line=line, col=col)
    if isinstance(node, yaml.MappingNode):
        line, col = _mark(node)
        pairs = []
        seen = set()
        for key_node, value_node in node.value:
            key = _convert(key_node)
            if not isinstance(key, Scalar):
                raise YamlSourceError("bad_key", "mapping keys must be scalars", key.line, key.col)
            if key.raw in seen:
                raise YamlSourceError(
                    "duplicate_key", f"duplicate key '{key.raw}'", key.line, key.col)
            seen.add(key.raw)
            pairs.append((key, _convert(value_node)))
        return Mapping(pairs=pairs, line=line, col=col)
    raise YamlSourceError("unsupported_node", f"unsupported YAML node {type(node).__name__}")


def load_document(text: str):
    """Parse one document into Scalar/Sequence/Mapping nodes with positions."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise YamlSourceError("encoding", "document is not valid UTF-8") from exc
    _screen_events(text)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise YamlSourceError(
            "yaml_syntax", exc.problem or "YAML syntax error",
            mark.line + 1 if mark else None, mark.column + 1 if mark else None) from exc
    if root is None:
        raise YamlSourceError("empty", "document is empty")
    return _convert(root)


def quote(text: str) -> str:
    """Render a string in YAML double-quote style (canonical emit form)."""
    out = ['"']
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append(f"\\x{ord(ch):02x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)
