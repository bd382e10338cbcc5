"""Parsers that turn taxonomy source files into edge lists.

Three inputs are understood: the canonical edge-list CSV, hierarchical coding
schemes (NAICS-style digit prefixes or Omniclass-style delimited segments) and
nested JSON trees.  Every parser returns ``(edges, IngestReport)``; defects that
can be worked around are reported, not silently fixed.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Union

from .model import Edge, Taxonomy

__all__ = [
    "CSV_HEADER",
    "IngestError",
    "IngestReport",
    "CodeSchemeSpec",
    "parse_edge_csv",
    "parse_code_rows",
    "parse_code_scheme",
    "parse_json_tree",
    "serialize_canonical",
]

CSV_HEADER = ("dimension", "code", "parent_code", "label")

Stream = Union[IO[str], IO[bytes], str, bytes]


class IngestError(ValueError):
    """Unrecoverable input defect.  ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class IngestReport:
    warnings: list[tuple[int, str, str]] = field(default_factory=list)
    repaired: list[tuple[int, str, str]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.warnings or self.repaired)

    def warn(self, row: int, code: str, message: str) -> None:
        self.warnings.append((row, code, message))

    def raise_if_strict(self, strict: bool) -> None:
        if not (strict and self):
            return
        n = len(self.warnings) + len(self.repaired)
        if self.warnings:
            row, code, msg = self.warnings[0]
            first = f"{code}: {msg}"
        else:
            row, orig, new = self.repaired[0]
            first = f"code {orig!r} normalized to {new!r}"
        raise IngestError(f"strict mode: {n} defect(s); first: {first}", row or None)

    def to_dict(self) -> dict:
        return {
            "warnings": [{"row": r, "code": c, "message": m} for r, c, m in self.warnings],
            "repaired": [{"row": r, "original_code": o, "repaired_code": n} for r, o, n in self.repaired],
        }


def _read_text(stream: Stream) -> str:
    if isinstance(stream, (bytes, bytearray)):
        data = bytes(stream)
    elif isinstance(stream, str):
        return stream
    else:
        data = stream.read()
        if isinstance(data, str):
            return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise IngestError(f"input is not valid UTF-8 (byte offset {exc.start})") from None


def parse_edge_csv(stream: Stream, strict: bool = False) -> tuple[list[Edge], IngestReport]:
    """Parse the canonical ``dimension,code,parent_code,label`` CSV.

    Exact duplicate rows are dropped with a warning.  A blank label is replaced
    by the node's code, also with a warning.
    """
    text = _read_text(stream)
    reader = csv.reader(io.StringIO(text, newline=""))
    report = IngestReport()
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty file; expected header " + ",".join(CSV_HEADER), 1) from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise IngestError(f"bad header {header!r}; expected {','.join(CSV_HEADER)}", 1)

    edges: list[Edge] = []
    seen: set[tuple] = set()
    try:
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 4:
                raise IngestError(f"expected 4 columns, got {len(row)}", line)
            dim, code, parent, label = (v.strip() for v in row)
            if not code:
                raise IngestError("empty code", line)
            if not dim:
                raise IngestError(f"empty dimension for code {code!r}", line)
            key = (dim, code, parent, label)
            if key in seen:
                report.warn(line, code, "duplicate row dropped")
                continue
            seen.add(key)
            if not label:
                report.warn(line, code, "blank label; using code as label")
                label = code
            edges.append(Edge(dim, code, parent or None, label))
    except csv.Error as exc:
        raise IngestError(f"malformed CSV: {exc}", reader.line_num) from None
    report.raise_if_strict(strict)
    return edges, report


@dataclass(frozen=True)
class CodeSchemeSpec:
    """How to derive a hierarchy from codes.

    ``segment_rule="prefix"``: a code's hierarchy level is its length, all
    lengths must appear in ``widths`` (strictly increasing).  Characters in
    ``ignore_chars`` are removed before measuring (``"01.11"`` -> ``"0111"``).

    ``segment_rule="delimited"``: the code is split on ``dimension_delimiter``
    into a dimension segment and a rest, and the rest on whitespace.  Trailing
    segments equal to ``pad_segment`` are dropped, so ``"23-13 00 00"`` and
    ``"23-13"`` denote the same node.

    ``dimension_rule="single"`` puts every code in one dimension whose root is
    ``dimension_id``; ``"first_segment"`` uses the leading segment (the text
    before the delimiter, or the first ``widths[0]`` characters for prefix
    codes) as dimension id.  ``dimension_labels`` names the synthesized roots.
    """

    segment_rule: str = "prefix"
    widths: tuple[int, ...] = ()
    dimension_rule: str = "single"
    dimension_id: str = "D"
    dimension_label: Optional[str] = None
    dimension_labels: dict = field(default_factory=dict, hash=False)
    dimension_delimiter: str = "-"
    pad_segment: Optional[str] = None
    ignore_chars: str = ""

    def __post_init__(self):
        if self.segment_rule not in ("prefix", "delimited"):
            raise ValueError(f"unknown segment_rule {self.segment_rule!r}")
        if self.dimension_rule not in ("single", "first_segment"):
            raise ValueError(f"unknown dimension_rule {self.dimension_rule!r}")
        if self.segment_rule == "prefix":
            w = tuple(int(x) for x in self.widths)
            if not w or any(b <= a for a, b in zip(w, w[1:])) or w[0] <= 0:
                raise ValueError(f"prefix widths must be positive and strictly increasing, got {self.widths!r}")
            object.__setattr__(self, "widths", w)

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSchemeSpec":
        d = dict(d)
        if "widths" in d:
            d["widths"] = tuple(d["widths"])
        if "dimension_labels" in d:
            d["dimension_labels"] = {str(k): v for k, v in d["dimension_labels"].items()}
        return cls(**d)

    def root_label(self, dim: str) -> str:
        if self.dimension_rule == "single":
            return self.dimension_label or dim
        return self.dimension_labels.get(dim, dim)


_WS = re.compile(r"\s+")


def _normalize_code(code: str) -> str:
    return _WS.sub(" ", code.strip())


def _tokenize(code: str, spec: CodeSchemeSpec, line: int) -> tuple[str, tuple[str, ...], Optional[tuple[int, int]]]:
    """Return (dimension, path segments, range) for one code.

    ``range`` is set for first-level range codes such as ``"31-33"``; the
    path then holds the literal code as its single segment.
    """
    if spec.segment_rule == "prefix":
        raw = code
        for ch in spec.ignore_chars:
            raw = raw.replace(ch, "")
        w0 = spec.widths[0]
        m = re.fullmatch(rf"(\d{{{w0}}})-(\d{{{w0}}})", raw)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if lo > hi:
                raise IngestError(f"range code {code!r} has lower bound above upper bound", line)
            dim = spec.dimension_id if spec.dimension_rule == "single" else raw[:w0]
            return dim, (raw,), (lo, hi)
        if len(raw) not in spec.widths or " " in raw:
            raise IngestError(f"code {code!r} does not match prefix widths {list(spec.widths)}", line)
        path = tuple(raw[:w] for w in spec.widths if w <= len(raw))
        if spec.dimension_rule == "single":
            return spec.dimension_id, path, None
        if len(raw) == w0:
            raise IngestError(f"code {code!r} names a dimension only; first_segment rule needs longer codes", line)
        return raw[:w0], path[1:], None

    delim = spec.dimension_delimiter
    if spec.dimension_rule == "first_segment":
        head, sep, rest = code.partition(delim)
        if not sep or not head.strip() or not rest.strip():
            raise IngestError(f"code {code!r} lacks '{delim}'-separated dimension segment", line)
        dim = head.strip()
    else:
        dim, rest = spec.dimension_id, code
    segs = [s for s in _WS.split(rest.strip()) if s]
    if spec.pad_segment is not None:
        while len(segs) > 1 and segs[-1] == spec.pad_segment:
            segs.pop()
    if not segs:
        raise IngestError(f"code {code!r} has no segments", line)
    cumulative = tuple(tuple(segs[: i + 1]) for i in range(len(segs)))
    return dim, tuple(" ".join(c) for c in cumulative), None


def _format_code(dim: str, path_part: str, spec: CodeSchemeSpec) -> str:
    if spec.segment_rule == "delimited" and spec.dimension_rule == "first_segment":
        return f"{dim}{spec.dimension_delimiter}{path_part}"
    return path_part


def parse_code_rows(stream: Stream) -> list[tuple[int, str, str]]:
    """Read a two-column ``code,label`` CSV into (line, code, label) triples."""
    text = _read_text(stream)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty file; expected header code,label", 1) from None
    if [h.strip().lower() for h in header] != ["code", "label"]:
        raise IngestError(f"bad header {header!r}; expected code,label", 1)
    rows = []
    for row in reader:
        if not row:
            continue
        if len(row) != 2:
            raise IngestError(f"expected 2 columns, got {len(row)}", reader.line_num)
        rows.append((reader.line_num, row[0], row[1].strip()))
    return rows


def parse_code_scheme(
    rows: Iterable, spec: CodeSchemeSpec, strict: bool = False
) -> tuple[list[Edge], IngestReport]:
    """Build edges from ``(code, label)`` rows using longest-prefix parenthood.

    Rows may also be ``(line, code, label)`` triples (as returned by
    :func:`parse_code_rows`) so that warnings refer to file lines.

    Every dimension gets a synthesized root.  Missing intermediate ancestors are
    synthesized with their code as label and reported.  A first-level range code
    like ``"31-33"`` becomes one node and adopts every code whose first segment
    falls in the range.
    """
    report = IngestReport()
    rows = [r if len(r) == 3 else (i, r[0], r[1]) for i, r in enumerate(rows, start=1)]

    # key = (dim, path segment string at this level) -> (code, label, line)
    nodes: dict[tuple[str, str], tuple[str, str, int]] = {}
    paths: dict[tuple[str, str], tuple[str, ...]] = {}
    ranges: dict[str, list[tuple[int, int, str]]] = {}
    dims: list[str] = []

    for line, code, label in rows:
        original = code
        code = _normalize_code(code)
        if code != original:
            report.repaired.append((line, original, code))
        if not code:
            raise IngestError("empty code", line)
        dim, path, rng = _tokenize(code, spec, line)
        key = (dim, path[-1])
        if key in nodes:
            prev_code, prev_label, prev_line = nodes[key]
            if prev_label != label:
                raise IngestError(
                    f"code {code!r} repeats line {prev_line} with a different label ({prev_label!r} vs {label!r})",
                    line,
                )
            report.warn(line, code, f"duplicate of line {prev_line} dropped")
            continue
        if not label:
            report.warn(line, code, "blank label; using code as label")
            label = code
        if dim not in dims:
            dims.append(dim)
        nodes[key] = (code, label, line)
        paths[key] = path
        if rng is not None:
            ranges.setdefault(dim, []).append((rng[0], rng[1], path[-1]))

    def range_parent(dim: str, first: str) -> Optional[str]:
        if spec.segment_rule != "prefix" or not first.isdigit():
            return None
        v = int(first)
        for lo, hi, seg in ranges.get(dim, ()):
            if lo <= v <= hi:
                return seg
        return None

    for dim, spans in ranges.items():
        spans.sort()
        for (lo1, hi1, s1), (lo2, hi2, s2) in zip(spans, spans[1:]):
            if lo2 <= hi1:
                raise IngestError(f"range codes {s1!r} and {s2!r} overlap in dimension {dim!r}")

    edges: list[Edge] = []
    root_code = {}
    for dim in dims:
        rc = dim
        if (dim, rc) in nodes and spec.dimension_rule == "single":
            raise IngestError(f"dimension id {dim!r} collides with a code in the scheme; choose another dimension_id")
        root_code[dim] = rc
        edges.append(Edge(dim, rc, None, spec.root_label(dim)))

    synthesized: dict[tuple[str, str], str] = {}

    def resolve(dim: str, path: tuple[str, ...], line: int, child_code: str) -> str:
        """Code of the parent of ``path[-1]``, synthesizing missing ancestors."""
        parent = root_code[dim]
        for i, seg in enumerate(path[:-1]):
            if i == 0:
                r = range_parent(dim, seg)
                if r is not None and (dim, seg) not in nodes:
                    parent = nodes[(dim, r)][0]
                    continue
            key = (dim, seg)
            if key in nodes:
                parent = nodes[key][0]
                continue
            if key not in synthesized:
                code = _format_code(dim, seg, spec)
                synthesized[key] = code
                edges.append(Edge(dim, code, parent, code))
                report.warn(line, code, f"synthesized missing ancestor of {child_code!r}")
            parent = synthesized[key]
        if len(path) == 1 and spec.segment_rule == "prefix":
            r = range_parent(dim, path[0])
            if r is not None and r != path[0]:
                return nodes[(dim, r)][0]
        return parent

    for key, (code, label, line) in nodes.items():
        dim = key[0]
        parent = resolve(dim, paths[key], line, code)
        edges.append(Edge(dim, code, parent, label))

    report.raise_if_strict(strict)
    return edges, report


def parse_json_tree(stream: Stream, strict: bool = False) -> tuple[list[Edge], IngestReport]:
    """Parse nested ``{"code", "name", "children"}`` objects depth-first.

    The document is a single root object (one dimension), a list of root
    objects, or ``{"dimensions": [...]}``.  Each root's code is its
    dimension id.  A missing name falls back to the code with a warning.
    """
    text = _read_text(stream)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed JSON: {exc.msg}", exc.lineno) from None
    if isinstance(doc, dict) and "dimensions" in doc and "code" not in doc:
        roots, base = doc["dimensions"], "$.dimensions"
    elif isinstance(doc, list):
        roots, base = doc, "$"
    else:
        roots, base = [doc], None
    if not isinstance(roots, list) or not roots:
        raise IngestError("JSON document holds no tree")

    report = IngestReport()
    edges: list[Edge] = []
    for i, root in enumerate(roots):
        root_path = f"{base}[{i}]" if base else "$"
        dim = None
        stack = [(root, None, root_path)]
        while stack:
            obj, parent, path = stack.pop()
            if not isinstance(obj, dict):
                raise IngestError(f"{path}: expected an object")
            code = obj.get("code")
            if not isinstance(code, (str, int)) or str(code).strip() == "":
                raise IngestError(f"{path}: missing \"code\"")
            code = str(code).strip()
            if dim is None:
                dim = code
            name = obj.get("name")
            if name is None or str(name).strip() == "":
                report.warn(0, code, f"{path}: missing name; using code as label")
                name = code
            edges.append(Edge(dim, code, parent, str(name).strip()))
            kids = obj.get("children", [])
            if kids is None:
                kids = []
            if not isinstance(kids, list):
                raise IngestError(f"{path}.children: expected an array")
            for j in range(len(kids) - 1, -1, -1):
                stack.append((kids[j], code, f"{path}.children[{j}]"))
    report.raise_if_strict(strict)
    return edges, report


def serialize_canonical(taxonomy: Taxonomy, stream: Optional[IO[str]] = None) -> str:
    """Write the taxonomy as canonical edge CSV, rows sorted by (dimension, code).

    Returns the CSV text; also writes it to ``stream`` when given.
    """
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for e in taxonomy.edges():
        writer.writerow([e.dimension, e.code, e.parent or "", e.label])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
