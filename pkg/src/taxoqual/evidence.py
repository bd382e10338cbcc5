"""External measurements over classification records.

A record is one rater's classification of one object in one session.  From a
set of records we count unclassified and misclassified objects, unused
constructs and ambiguous classifications, and compute Cohen's and Fleiss'
kappa.
"""

from __future__ import annotations

import csv
import io
import itertools
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence, Union

from .model import Taxonomy

__all__ = [
    "RECORDS_HEADER",
    "RecordsError",
    "AgreementError",
    "EvidenceWarning",
    "ClassificationRecord",
    "AgreementResult",
    "Ambiguity",
    "load_records",
    "validate_records",
    "count_unclassified",
    "count_misclassified",
    "count_unused_constructs",
    "detect_ambiguous",
    "cohen_kappa",
    "fleiss_kappa",
    "intra_rater",
]

RECORDS_HEADER = ("object_id", "rater_id", "session", "dimension", "node_code", "gold_code")


class RecordsError(ValueError):
    """Invalid records; ``rows`` lists (line, message) pairs."""

    def __init__(self, rows: list[tuple[int, str]]):
        self.rows = rows
        super().__init__("; ".join(f"line {ln}: {msg}" if ln else msg for ln, msg in rows))


class AgreementError(ValueError):
    pass


class EvidenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ClassificationRecord:
    object_id: str
    rater_id: str
    session: str = ""
    assignments: tuple[tuple[str, str], ...] = ()
    gold_code: Optional[str] = None
    lines: tuple[int, ...] = ()

    def codes(self, dimension: Optional[str] = None) -> set[str]:
        return {c for d, c in self.assignments if dimension is None or d == dimension}


@dataclass(frozen=True)
class AgreementResult:
    statistic_name: str
    value: float
    observed_agreement: float
    expected_agreement: float
    n_objects: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic_name,
            "value": self.value,
            "observed_agreement": self.observed_agreement,
            "expected_agreement": self.expected_agreement,
            "n_objects": self.n_objects,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class Ambiguity:
    object_id: str
    rater_id: str
    session: str
    dimension: str
    codes: tuple[str, ...]


def load_records(stream: Union[IO[str], str], taxonomy: Optional[Taxonomy] = None) -> list[ClassificationRecord]:
    """Read the records CSV, one row per assignment, grouped into records.

    An empty ``node_code`` row states that the rater could not classify the
    object.  With a taxonomy, every code (and its dimension) is checked and all
    bad rows are reported together.
    """
    text = stream if isinstance(stream, str) else stream.read()
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != RECORDS_HEADER:
        raise RecordsError([(1, f"expected header {','.join(RECORDS_HEADER)}")])
    errors: list[tuple[int, str]] = []
    grouped: dict[tuple[str, str, str], dict] = {}
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(RECORDS_HEADER):
            errors.append((line, f"expected {len(RECORDS_HEADER)} columns, got {len(row)}"))
            continue
        obj, rater, session, dim, code, gold = (v.strip() for v in row)
        if not obj or not rater:
            errors.append((line, "object_id and rater_id are required"))
            continue
        if code and not dim:
            errors.append((line, f"node_code {code!r} given without a dimension"))
            continue
        entry = grouped.setdefault((obj, rater, session), {"assign": [], "gold": None, "lines": []})
        entry["lines"].append(line)
        if code:
            entry["assign"].append((dim, code))
        if gold:
            if entry["gold"] not in (None, gold):
                errors.append((line, f"conflicting gold codes {entry['gold']!r} and {gold!r} for object {obj!r}"))
            entry["gold"] = gold
    if errors:
        raise RecordsError(errors)
    records = [
        ClassificationRecord(obj, rater, session, tuple(dict.fromkeys(e["assign"])), e["gold"], tuple(e["lines"]))
        for (obj, rater, session), e in grouped.items()
    ]
    if taxonomy is not None:
        validate_records(records, taxonomy)
    return records


def validate_records(records: Iterable[ClassificationRecord], taxonomy: Taxonomy) -> None:
    errors = []
    for rec in records:
        line = rec.lines[0] if rec.lines else 0
        for dim, code in rec.assignments:
            if code not in taxonomy:
                errors.append((line, f"unknown node code {code!r} (object {rec.object_id!r})"))
            elif taxonomy.node(code).dimension != dim:
                errors.append((line, f"code {code!r} is not in dimension {dim!r}"))
        if rec.gold_code is not None and rec.gold_code not in taxonomy:
            errors.append((line, f"unknown gold code {rec.gold_code!r} (object {rec.object_id!r})"))
    if errors:
        raise RecordsError(sorted(errors))


def count_unclassified(records: Iterable[ClassificationRecord]) -> int:
    """Objects for which no record carries any assignment."""
    classified: dict[str, bool] = {}
    for rec in records:
        classified[rec.object_id] = classified.get(rec.object_id, False) or bool(rec.assignments)
    return sum(1 for ok in classified.values() if not ok)


def count_misclassified(records: Iterable[ClassificationRecord], strict: bool = False) -> int:
    """Records whose assignments do not include their gold code.

    Records without a gold code are skipped with a warning, or rejected in
    strict mode.
    """
    missing = 0
    wrong = 0
    for rec in records:
        if rec.gold_code is None:
            if strict:
                raise RecordsError([(rec.lines[0] if rec.lines else 0, f"record for object {rec.object_id!r} has no gold code")])
            missing += 1
            continue
        if rec.gold_code not in rec.codes():
            wrong += 1
    if missing:
        warnings.warn(f"{missing} record(s) without gold code skipped", EvidenceWarning, stacklevel=2)
    return wrong


def count_unused_constructs(taxonomy: Taxonomy, records: Iterable[ClassificationRecord]):
    """Return ``(unused categories, unused characteristics, listing)``.

    A characteristic is used when some record assigns it; a category is used
    when any characteristic below it is used.  ``listing`` holds the unused
    codes under ``"categories"`` and ``"characteristics"``.
    """
    assigned = set()
    for rec in records:
        assigned |= rec.codes()
    used = set()
    for node in taxonomy.characteristics():
        if node.code in assigned:
            code = node.code
            while code is not None and code not in used:
                used.add(code)
                code = taxonomy.node(code).parent_code
    cats = [n.code for n in taxonomy.categories() if n.code not in used]
    chars = [n.code for n in taxonomy.characteristics() if n.code not in used]
    return len(cats), len(chars), {"categories": cats, "characteristics": chars}


def detect_ambiguous(records: Iterable[ClassificationRecord]) -> list[Ambiguity]:
    """Objects placed under two or more nodes of one dimension by one rater in one session."""
    out = []
    for rec in records:
        per_dim: dict[str, set] = defaultdict(set)
        for dim, code in rec.assignments:
            per_dim[dim].add(code)
        for dim, codes in per_dim.items():
            if len(codes) > 1:
                out.append(Ambiguity(rec.object_id, rec.rater_id, rec.session, dim, tuple(sorted(codes))))
    out.sort(key=lambda a: (a.object_id, a.dimension, a.rater_id, a.session))
    return out


def _labels(records, rater: str, dimension: str, session: Optional[str]) -> dict[str, str]:
    """object_id -> the single code ``rater`` gave it in ``dimension``."""
    found: dict[str, set] = defaultdict(set)
    for rec in records:
        if rec.rater_id != rater or (session is not None and rec.session != session):
            continue
        codes = rec.codes(dimension)
        if codes:
            found[rec.object_id] |= codes
    multi = sorted(o for o, c in found.items() if len(c) > 1)
    if multi:
        raise AgreementError(
            f"rater {rater!r} gave several codes in dimension {dimension!r} to: {', '.join(multi[:5])}"
            + (" ..." if len(multi) > 5 else "")
        )
    return {o: next(iter(c)) for o, c in found.items()}


def _kappa(observed: float, expected: float, name: str, n: int) -> AgreementResult:
    if expected >= 1.0:
        warnings.warn(f"{name}: expected agreement is 1 (single label); kappa defined as 1", EvidenceWarning, stacklevel=3)
        return AgreementResult(name, 1.0, observed, expected, n, degenerate=True)
    return AgreementResult(name, (observed - expected) / (1.0 - expected), observed, expected, n)


def _cohen(a: dict[str, str], b: dict[str, str], name: str) -> AgreementResult:
    if set(a) != set(b):
        only_a = sorted(set(a) - set(b))
        only_b = sorted(set(b) - set(a))
        raise AgreementError(f"object sets differ (only first: {only_a[:5]}, only second: {only_b[:5]})")
    n = len(a)
    if n == 0:
        raise AgreementError("no objects to compare")
    objects = sorted(a)
    agree = sum(1 for o in objects if a[o] == b[o])
    ca, cb = Counter(a.values()), Counter(b.values())
    expected = sum(ca[k] * cb[k] for k in ca) / (n * n)
    return _kappa(agree / n, expected, name, n)


def cohen_kappa(
    records: Sequence[ClassificationRecord],
    rater_a: str,
    rater_b: str,
    dimension: str,
    session_a: Optional[str] = None,
    session_b: Optional[str] = None,
) -> AgreementResult:
    """Cohen's kappa between two raters over the objects both classified in ``dimension``."""
    a = _labels(records, rater_a, dimension, session_a)
    b = _labels(records, rater_b, dimension, session_b)
    return _cohen(a, b, "cohen_kappa")


def intra_rater(
    records: Sequence[ClassificationRecord], rater: str, session_a: str, session_b: str, dimension: str
) -> AgreementResult:
    """Cohen's kappa between two sessions of the same rater."""
    a = _labels(records, rater, dimension, session_a)
    b = _labels(records, rater, dimension, session_b)
    if not a or not b:
        raise AgreementError(f"rater {rater!r} has no classifications in one of the sessions")
    return _cohen(a, b, "intra_rater_kappa")


def fleiss_kappa(
    records: Sequence[ClassificationRecord], dimension: str, session: Optional[str] = None
) -> AgreementResult:
    """Fleiss' kappa over the object x code count matrix.

    Every object must be rated by the same number (at least two) of raters.
    """
    raters = sorted({r.rater_id for r in records})
    per_rater = {r: _labels(records, r, dimension, session) for r in raters}
    ratings: dict[str, list[str]] = defaultdict(list)
    for r in raters:
        for obj, code in per_rater[r].items():
            ratings[obj].append(code)
    if not ratings:
        raise AgreementError(f"no classifications in dimension {dimension!r}")
    sizes = {len(v) for v in ratings.values()}
    if len(sizes) != 1:
        raise AgreementError(f"objects have unequal rater counts {sorted(sizes)}")
    r = sizes.pop()
    if r < 2:
        raise AgreementError("Fleiss' kappa needs at least two raters per object")
    n = len(ratings)
    totals: Counter = Counter()
    p_sum = 0.0
    for obj in sorted(ratings):
        counts = Counter(ratings[obj])
        totals.update(counts)
        p_sum += (sum(c * c for c in counts.values()) - r) / (r * (r - 1))
    observed = p_sum / n
    expected = sum((c / (n * r)) ** 2 for c in totals.values())
    return _kappa(observed, expected, "fleiss_kappa", n)


def all_rater_pairs(records: Sequence[ClassificationRecord]) -> list[tuple[str, str]]:
    return list(itertools.combinations(sorted({r.rater_id for r in records}), 2))
