"""Checklist questions for the documentation-based (subjective) measurements.

Answers are ``yes``/``no`` or enumerated sets, always with an evidence text;
``no_data`` means the information could not be found, which is not the same
as a negative answer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Union

__all__ = [
    "NO_DATA",
    "Question",
    "Assessment",
    "AssessmentError",
    "QUESTION_BANK",
    "question_bank",
    "load_assessments",
    "assessment_matrix",
    "render_answer",
    "parse_answer",
]

NO_DATA = "no_data"

CONSTRUCT_CODES = ("di", "ca", "ch")
CHANGE_TYPE_CODES = ("a", "m", "d")
MANDATE_VALUES = ("owners", "owners/ext")


class AssessmentError(ValueError):
    pass


@dataclass(frozen=True)
class Question:
    id: str
    attribute: str
    prompt: str
    answer_kind: str  # yes_no | construct_set | change_type_set | mandate | free_text


QUESTION_BANK: tuple[Question, ...] = (
    Question("COMP-1", "comprehensiveness",
             "Does the taxonomy originate from a diverse set of data sources?", "yes_no"),
    Question("COMP-2", "comprehensiveness",
             "Do the taxonomy creators have a diverse cultural and educational background?", "yes_no"),
    Question("COMP-3", "comprehensiveness",
             "Were diverse data analysis methods used to create the taxonomy?", "yes_no"),
    Question("COMP-4", "comprehensiveness",
             "Has the taxonomy been evaluated by external experts?", "yes_no"),
    Question("EXT-1", "extensibility",
             "Which constructs does the change process cover (dimensions, categories, characteristics)?",
             "construct_set"),
    Question("EXT-2", "extensibility",
             "Which change types does the change process cover (addition, modification, deletion)?",
             "change_type_set"),
    Question("EXT-3", "extensibility", "Who has the mandate to change the taxonomy?", "mandate"),
    Question("EXT-4", "extensibility",
             "How can the taxonomy be customized for use in a particular context?", "free_text"),
    Question("EXP-1", "explanatory",
             "Has the taxonomy any other structuring elements besides dimensions?", "yes_no"),
    Question("EXP-2", "explanatory",
             "Does the taxonomy provide any support for choosing a particular dimension or category?",
             "construct_set"),
    Question("MEX-1", "mutual_exclusiveness",
             "Does a mutual exclusiveness classification constraint exist?", "yes_no"),
)


def question_bank() -> tuple[Question, ...]:
    return QUESTION_BANK


_BANK_INDEX = {q.id: q for q in QUESTION_BANK}


@dataclass(frozen=True)
class Assessment:
    taxonomy_name: str
    question_id: str
    answer: Union[str, tuple[str, ...]]
    evidence: str = ""
    source: str = ""


def _normalize(question: Question, answer):
    """Canonical form of an answer, or AssessmentError."""
    if isinstance(answer, str) and answer.strip().lower().replace(" ", "_") == NO_DATA:
        return NO_DATA
    kind = question.answer_kind
    if kind == "yes_no":
        if isinstance(answer, bool):
            return "yes" if answer else "no"
        if isinstance(answer, str) and answer.strip().lower() in ("yes", "no"):
            return answer.strip().lower()
        raise AssessmentError(f"{question.id}: answer {answer!r} is not yes, no or no_data")
    if kind in ("construct_set", "change_type_set"):
        allowed = CONSTRUCT_CODES if kind == "construct_set" else CHANGE_TYPE_CODES
        items = answer.replace(",", " ").split() if isinstance(answer, str) else answer
        if not isinstance(items, (list, tuple)):
            raise AssessmentError(f"{question.id}: answer {answer!r} is not a set of {'/'.join(allowed)}")
        items = [str(x).strip().lower() for x in items]
        bad = [x for x in items if x not in allowed]
        if bad:
            raise AssessmentError(f"{question.id}: unknown codes {bad}; allowed {', '.join(allowed)}")
        return tuple(c for c in allowed if c in items)
    if kind == "mandate":
        if isinstance(answer, str) and answer.strip().lower() in MANDATE_VALUES:
            return answer.strip().lower()
        raise AssessmentError(f"{question.id}: mandate {answer!r} is not one of {', '.join(MANDATE_VALUES)}")
    if isinstance(answer, str) and answer.strip():
        return answer.strip()
    raise AssessmentError(f"{question.id}: free-text answer must be a non-empty string")


def load_assessments(stream: Union[IO[str], str, dict], bank: Iterable[Question] = QUESTION_BANK) -> list[Assessment]:
    """Validate ``{taxonomy: {question_id: {answer, evidence, source}}}``."""
    if isinstance(stream, dict):
        doc = stream
    else:
        text = stream if isinstance(stream, str) else stream.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise AssessmentError(f"malformed assessment JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise AssessmentError("assessment document must map taxonomy names to answers")
    index = {q.id: q for q in bank}
    out = []
    for tax in sorted(doc):
        answers = doc[tax]
        if not isinstance(answers, dict):
            raise AssessmentError(f"{tax}: expected a mapping of question ids")
        for qid in sorted(answers):
            if qid not in index:
                raise AssessmentError(f"{tax}: unknown question id {qid!r}")
            entry = answers[qid]
            if not isinstance(entry, dict) or "answer" not in entry:
                raise AssessmentError(f"{tax}/{qid}: entry needs an 'answer' field")
            answer = _normalize(index[qid], entry["answer"])
            evidence = str(entry.get("evidence") or "").strip()
            if answer != NO_DATA and not evidence:
                raise AssessmentError(f"{tax}/{qid}: evidence is required unless the answer is no_data")
            out.append(Assessment(tax, qid, answer, evidence, str(entry.get("source") or "").strip()))
    return out


def assessment_matrix(assessments: Iterable[Assessment], taxonomies: Iterable[str]) -> dict[str, dict[str, object]]:
    """``{question_id: {taxonomy: answer}}`` in bank order; gaps are no_data."""
    taxonomies = list(taxonomies)
    given = {(a.question_id, a.taxonomy_name): a.answer for a in assessments}
    return {
        q.id: {t: given.get((q.id, t), NO_DATA) for t in taxonomies}
        for q in QUESTION_BANK
    }


def render_answer(answer) -> str:
    if answer == NO_DATA:
        return "No data"
    if isinstance(answer, tuple):
        return ", ".join(answer) if answer else "none"
    if answer in ("yes", "no"):
        return answer.capitalize()
    if answer in MANDATE_VALUES:
        return answer.capitalize()
    return answer


def parse_answer(question_id: str, text: str):
    """Inverse of :func:`render_answer` for the question's answer kind."""
    q = _BANK_INDEX[question_id]
    if text == "No data":
        return NO_DATA
    if q.answer_kind in ("construct_set", "change_type_set") and text == "none":
        return ()
    return _normalize(q, text)
