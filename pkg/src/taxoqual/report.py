"""Evaluation and comparison documents, and their text/CSV/JSON renderings."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

from . import __version__
from . import _core
from .checklist import QUESTION_BANK, assessment_matrix, load_assessments, render_answer
from .config import ConfigError, RunConfig, TaxonomyConfig
from .evidence import (
    AgreementError,
    ClassificationRecord,
    EvidenceWarning,
    count_misclassified,
    count_unclassified,
    count_unused_constructs,
    detect_ambiguous,
    fleiss_kappa,
    load_records,
)
from .ingest import IngestReport, parse_code_rows, parse_code_scheme, parse_edge_csv, parse_json_tree
from .metrics import (
    MetricError,
    conciseness,
    dimension_robustness_summary,
    memory_heuristic,
    rate_of_change,
    robustness,
    robustness_detail,
)
from .model import Taxonomy, build_forest, counts
from .similarity import (
    SimilarityBackend,
    TrigramBackend,
    WordVectorBackend,
    load_lookup_table,
    load_word_vectors,
)

__all__ = [
    "LoadedTaxonomy",
    "load_taxonomy",
    "load_backend",
    "evaluate",
    "evidence_summary",
    "compare",
    "to_json",
    "render_table",
    "render_csv",
]


@dataclass
class LoadedTaxonomy:
    config: TaxonomyConfig
    taxonomy: Taxonomy
    report: IngestReport


def load_taxonomy(cfg: TaxonomyConfig, strict: bool = False) -> LoadedTaxonomy:
    """Parse, validate and dimension-filter one configured taxonomy.

    Raises IngestError (parse) or InvalidTaxonomyError (tree invariants).
    """
    data = cfg.path.read_bytes()
    if cfg.format == "edge-csv":
        edges, rep = parse_edge_csv(data, strict=strict)
    elif cfg.format == "json-tree":
        edges, rep = parse_json_tree(data, strict=strict)
    else:
        edges, rep = parse_code_scheme(parse_code_rows(data), cfg.code_scheme, strict=strict)
    tax = build_forest(edges, name=cfg.name, version=cfg.version)
    if cfg.include_dimensions is not None or cfg.exclude_dimensions:
        try:
            tax = tax.select_dimensions(cfg.include_dimensions, cfg.exclude_dimensions)
        except KeyError as exc:
            raise ConfigError(f"{cfg.name}: {exc.args[0]}") from None
    return LoadedTaxonomy(cfg, tax, rep)


def load_backend(config: RunConfig, override: Optional[str] = None) -> SimilarityBackend:
    name = override or config.similarity.backend
    path = config.similarity.path
    if name == "trigram":
        return TrigramBackend()
    if path is None:
        raise ConfigError(f"similarity backend {name!r} needs similarity.path")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read similarity file {path}: {exc.strerror}") from None
    if name == "word-vectors":
        return WordVectorBackend(load_word_vectors(text), source=path.name)
    if name == "lookup":
        return load_lookup_table(text, default=config.similarity.default, source=path.name)
    raise ConfigError(f"unknown similarity backend {name!r}")


def _not_applicable(reason: str) -> dict:
    return {"applicable": False, "reason": reason}


def evaluate(
    loaded: LoadedTaxonomy,
    config: RunConfig,
    backend: Optional[SimilarityBackend],
    k: int = 5,
    threads: int = 1,
) -> dict:
    """Full metric set for one taxonomy as a JSON-ready document."""
    tax = loaded.taxonomy
    c = counts(tax)
    doc: dict = {
        "taxonomy": tax.name,
        "version": tax.version,
        "dimensions": [d.id for d in sorted(tax.dimensions, key=lambda d: d.id)],
        "counts": {
            "dimensions": c.n_dimensions,
            "categories": c.n_categories,
            "characteristics": c.n_characteristics,
            "max_depth": c.max_depth,
        },
    }
    if backend is None:
        doc["robustness"] = _not_applicable("no similarity backend")
    else:
        try:
            rep = robustness(tax, backend, scope=config.robustness_scope, threads=threads)
        except MetricError as exc:
            doc["robustness"] = _not_applicable(str(exc))
        else:
            top, bottom = robustness_detail(rep, k)
            doc["robustness"] = {"applicable": True, **rep.to_dict(), "backend": rep.backend,
                                 "kernel": _core.IMPLEMENTATION}
            doc["robustness_detail"] = {
                "k": k,
                "top": [g.to_dict() for g in top],
                "bottom": [g.to_dict() for g in bottom],
            }
            doc["dimension_summary"] = [
                {"dimension": r.dimension, "group_count": r.group_count,
                 "bottom_third_count": r.bottom_third_count, "percentage": r.percentage}
                for r in dimension_robustness_summary(rep, tax)
            ]
    try:
        doc["conciseness"] = {"applicable": True, "value": conciseness(tax)}
    except MetricError as exc:
        doc["conciseness"] = _not_applicable(str(exc))
    doc["memory_heuristic"] = memory_heuristic(tax, config.memory_threshold).to_dict()
    hist = loaded.config.release_history
    if hist is None:
        doc["rate_of_change"] = _not_applicable("no release history configured")
    else:
        doc["rate_of_change"] = {
            "applicable": True,
            "value": rate_of_change(hist),
            "initial_release": hist.initial_release.isoformat(),
            "releases_after_initial": hist.releases_after_initial,
            "as_of": hist.as_of.isoformat(),
        }
    doc["ingest_report"] = loaded.report.to_dict()
    return doc


def evidence_summary(
    tax: Taxonomy,
    records: Sequence[ClassificationRecord],
    agreements: Sequence = (),
) -> dict:
    """Counts plus agreement statistics.

    Without explicit ``agreements`` a Fleiss' kappa is attempted for each
    dimension; dimensions where it is not defined are listed with the reason.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EvidenceWarning)
        mis = count_misclassified(records)
        n_cat, n_char, listing = count_unused_constructs(tax, records)
        amb = detect_ambiguous(records)
        stats = []
        if agreements:
            for fn, label in agreements:
                try:
                    stats.append({"request": label, **fn(records).to_dict()})
                except AgreementError as exc:
                    stats.append({"request": label, "error": str(exc)})
        else:
            for dim in sorted(d.id for d in tax.dimensions):
                try:
                    stats.append({"request": f"fleiss:{dim}", "dimension": dim, **fleiss_kappa(records, dim).to_dict()})
                except AgreementError as exc:
                    stats.append({"request": f"fleiss:{dim}", "dimension": dim, "error": str(exc)})
    return {
        "taxonomy": tax.name,
        "n_records": len(records),
        "n_objects": len({r.object_id for r in records}),
        "unclassified": count_unclassified(records),
        "misclassified": mis,
        "unused_categories": n_cat,
        "unused_characteristics": n_char,
        "unused": listing,
        "ambiguous": [
            {"object_id": a.object_id, "rater_id": a.rater_id, "session": a.session,
             "dimension": a.dimension, "codes": list(a.codes)}
            for a in amb
        ],
        "agreement": stats,
        "warnings": sorted({str(w.message) for w in caught}),
    }


# Paper table order: attribute, measurement, metric key
_TABLE_ROWS: list[tuple[str, str, str]] = [
    ("Comprehensiveness", q.prompt, f"q:{q.id}") for q in QUESTION_BANK if q.attribute == "comprehensiveness"
] + [
    ("Comprehensiveness", "Unclassified objects", "ev:unclassified"),
    ("Robustness", "R(T)", "m:robustness"),
    ("Robustness", "Misclassified objects", "ev:misclassified"),
    ("Conciseness", "Dimensions", "c:dimensions"),
    ("Conciseness", "Categories", "c:categories"),
    ("Conciseness", "Characteristics", "c:characteristics"),
    ("Conciseness", "Maximum depth", "c:max_depth"),
    ("Conciseness", "C(T)", "m:conciseness"),
    ("Conciseness", "M_t", "m:memory"),
    ("Conciseness", "Unused constructs", "ev:unused"),
] + [
    ("Extensibility", q.prompt, f"q:{q.id}") for q in QUESTION_BANK if q.attribute == "extensibility"
] + [
    ("Extensibility", "RoC", "m:roc"),
] + [
    ("Explanatory", q.prompt, f"q:{q.id}") for q in QUESTION_BANK if q.attribute == "explanatory"
] + [
    ("Mutual exclusiveness", q.prompt, f"q:{q.id}") for q in QUESTION_BANK if q.attribute == "mutual_exclusiveness"
] + [
    ("Mutual exclusiveness", "Ambiguous classifications", "ev:ambiguous"),
    ("Reliability", "Fleiss' kappa", "ev:kappa"),
]


def _value(key: str, ev: dict, evid: Optional[dict], matrix: dict, name: str):
    kind, _, what = key.partition(":")
    if kind == "q":
        return matrix[what][name]
    if kind == "c":
        return ev["counts"][what]
    if kind == "m":
        if what == "memory":
            return ev["memory_heuristic"]["m_t"]
        block = {"robustness": "robustness", "conciseness": "conciseness", "roc": "rate_of_change"}[what]
        d = ev[block]
        if not d.get("applicable"):
            return None
        return d["r"] if what == "robustness" else d["value"]
    if evid is None:
        return None
    if what == "unused":
        return evid["unused_categories"] + evid["unused_characteristics"]
    if what == "ambiguous":
        return len(evid["ambiguous"])
    if what == "kappa":
        values = [s["value"] for s in evid["agreement"] if "value" in s]
        return values[0] if len(values) == 1 else (None if not values else values)
    return evid[what]


def compare(
    loaded: Sequence[LoadedTaxonomy],
    config: RunConfig,
    backend: Optional[SimilarityBackend],
    threads: int = 1,
) -> dict:
    """One column per taxonomy, rows grouped by quality attribute."""
    if len(loaded) < 2:
        raise ConfigError("compare needs at least two taxonomies")
    names = [lt.taxonomy.name for lt in loaded]
    evals = {lt.taxonomy.name: evaluate(lt, config, backend, threads=threads) for lt in loaded}
    evids = {}
    for lt in loaded:
        if lt.config.records is not None:
            recs = load_records(lt.config.records.read_text(encoding="utf-8"), lt.taxonomy)
            evids[lt.taxonomy.name] = evidence_summary(lt.taxonomy, recs)
    assessments = []
    if config.assessments is not None:
        assessments = load_assessments(config.assessments.read_text(encoding="utf-8"))
    matrix = assessment_matrix(assessments, names)
    rows = []
    for attribute, measurement, key in _TABLE_ROWS:
        if key.startswith("ev:") and not evids:
            if key != "ev:kappa":
                continue
        rows.append({
            "attribute": attribute,
            "measurement": measurement,
            "key": key,
            "values": {n: _value(key, evals[n], evids.get(n), matrix, n) for n in names},
        })
    return {
        "taxonomies": names,
        "rows": rows,
        "metadata": {
            "tool_version": __version__,
            "backend": backend.identity() if backend else None,
            "kernel": _core.IMPLEMENTATION,
            "memory_threshold": config.memory_threshold,
            "robustness_scope": config.robustness_scope,
            "embedding_coverage": {
                n: (evals[n]["robustness"].get("embedding_coverage") if evals[n]["robustness"].get("applicable") else None)
                for n in names
            },
            "config_digest": config.digest,
        },
        "evaluations": evals,
        "evidence": evids,
    }


def to_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def fmt_cell(key: str, value) -> str:
    """Text rendering: metrics to 2 decimals, rate of change to 5, counts as integers."""
    if value is None:
        return "-"
    if key.startswith("q:"):
        return render_answer(value)
    if isinstance(value, list):
        return "/".join(fmt_cell(key, v) for v in value)
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return f"{value:,}"
    if isinstance(value, float):
        if key == "m:roc":
            return "0" if value == 0 else f"{value:.5f}"
        if math.isfinite(value):
            return f"{value:.2f}"
    return str(value)


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]], title: Optional[str] = None) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    out = []
    if title:
        out.append(title)
    out.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    out.append("  ".join("-" * w for w in widths))
    for row in rows:
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"


def render_csv(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    w.writerows(rows)
    return buf.getvalue()


def _group_rows(groups: list[dict]) -> list[list[str]]:
    return [
        [g["parent_code"], str(g["n_gc"]), f"{g['n_ic']:,}", f"{g['outside_proportion']:.3f}"]
        for g in groups
    ]


GROUP_HEADERS = ["Group", "# nodes", "# outside nodes", "Outside proportion"]
DIMENSION_HEADERS = ["Dimension", "Count", "Bottom-third Count", "Percentage"]


def render_detail_text(ev: dict) -> str:
    if not ev["robustness"].get("applicable"):
        return f"robustness: not applicable ({ev['robustness']['reason']})\n"
    det = ev["robustness_detail"]
    parts = [
        render_table(GROUP_HEADERS, _group_rows(det["top"]), f"Top {det['k']} leaf groups"),
        render_table(GROUP_HEADERS, _group_rows(det["bottom"]), f"Bottom {det['k']} leaf groups"),
        render_table(
            DIMENSION_HEADERS,
            [[r["dimension"], str(r["group_count"]), str(r["bottom_third_count"]), str(r["percentage"])]
             for r in ev["dimension_summary"]],
            "Bottom-third share per dimension",
        ),
    ]
    return "\n".join(parts)


def render_evaluation_text(ev: dict) -> str:
    rb = ev["robustness"]
    rows = [
        ["Dimensions", str(ev["counts"]["dimensions"])],
        ["Categories", f"{ev['counts']['categories']:,}"],
        ["Characteristics", f"{ev['counts']['characteristics']:,}"],
        ["Maximum depth", str(ev["counts"]["max_depth"])],
        ["R(T)", fmt_cell("m:robustness", rb["r"]) if rb.get("applicable") else "n/a"],
        ["C(T)", fmt_cell("m:conciseness", ev["conciseness"]["value"]) if ev["conciseness"].get("applicable") else "n/a"],
        [f"M_{ev['memory_heuristic']['t']}", str(ev["memory_heuristic"]["m_t"])],
        ["RoC", fmt_cell("m:roc", ev["rate_of_change"]["value"]) if ev["rate_of_change"].get("applicable") else "n/a"],
    ]
    if rb.get("applicable"):
        rows.append(["Leaf groups scored", str(rb["ngroups"])])
        rows.append(["Embedding coverage", f"{rb['embedding_coverage']:.2f}"])
    title = f"{ev['taxonomy']}" + (f" ({ev['version']})" if ev.get("version") else "")
    out = render_table(["Measurement", "Value"], rows, title)
    if rb.get("applicable"):
        out += "\n" + render_detail_text(ev)
    return out


def evaluation_csv(ev: dict) -> str:
    rb, cc, roc = ev["robustness"], ev["conciseness"], ev["rate_of_change"]
    rows = [
        ["dimensions", ev["counts"]["dimensions"]],
        ["categories", ev["counts"]["categories"]],
        ["characteristics", ev["counts"]["characteristics"]],
        ["max_depth", ev["counts"]["max_depth"]],
        ["robustness", repr(rb["r"]) if rb.get("applicable") else ""],
        ["conciseness", repr(cc["value"]) if cc.get("applicable") else ""],
        ["memory_heuristic", ev["memory_heuristic"]["m_t"]],
        ["rate_of_change", repr(roc["value"]) if roc.get("applicable") else ""],
    ]
    return render_csv(["measurement", "value"], rows)


def render_compare_text(doc: dict) -> str:
    names = doc["taxonomies"]
    rows = []
    last = None
    for row in doc["rows"]:
        attr = row["attribute"] if row["attribute"] != last else ""
        last = row["attribute"]
        rows.append([attr, row["measurement"]] + [fmt_cell(row["key"], row["values"][n]) for n in names])
    md = doc["metadata"]
    backend = md["backend"]["name"] if md["backend"] else "none"
    footer = [f"similarity backend: {backend}; kernel: {md['kernel']}; config digest: {md['config_digest'][:16]}"]
    cov = ", ".join(f"{n}={v:.2f}" if v is not None else f"{n}=-" for n, v in md["embedding_coverage"].items())
    footer.append(f"embedding coverage: {cov}")
    footer.append("construct codes: di = dimension, ca = category, ch = characteristic; change types: a = addition, m = modification, d = deletion")
    return render_table(["Quality attribute", "Measurement"] + names, rows, "Comparison of taxonomies") + "\n".join(footer) + "\n"


def compare_csv(doc: dict) -> str:
    names = doc["taxonomies"]
    out = []
    for row in doc["rows"]:
        cells = []
        for n in names:
            v = row["values"][n]
            if row["key"].startswith("q:"):
                cells.append(render_answer(v))
            elif v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        out.append([row["attribute"], row["measurement"]] + cells)
    return render_csv(["attribute", "measurement"] + names, out)
