"""Run configuration: which taxonomies to load and how to evaluate them.

The configuration is a YAML document.  Relative paths resolve against the
directory of the configuration file.  Example::

    as_of: 2021-05-04
    memory_threshold: 5
    robustness_scope: global        # or per_dimension
    assessments: assessments.json   # optional
    similarity:
      backend: trigram              # trigram | word-vectors | lookup
      path: vectors.txt             # word-vectors / lookup only
      default: 0.0                  # lookup only: score of unlisted pairs
    taxonomies:
      - name: NAICS
        path: naics_codes.csv
        format: code-scheme         # edge-csv | code-scheme | json-tree
        code_scheme: {segment_rule: prefix, widths: [2, 3, 4, 5, 6], dimension_id: NAICS}
        exclude_dimensions: []
        release_history: {initial_release: 1997-01-01, releases_after_initial: 4}
        records: records.csv        # optional classification records
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .ingest import CodeSchemeSpec
from .metrics import ReleaseHistory

__all__ = ["ConfigError", "TaxonomyConfig", "SimilarityConfig", "RunConfig", "load_config"]

FORMATS = ("edge-csv", "code-scheme", "json-tree")
BACKENDS = ("trigram", "word-vectors", "lookup")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityConfig:
    backend: str = "trigram"
    path: Optional[Path] = None
    default: float = 0.0


@dataclass(frozen=True)
class TaxonomyConfig:
    name: str
    path: Path
    format: str = "edge-csv"
    version: Optional[str] = None
    code_scheme: Optional[CodeSchemeSpec] = None
    include_dimensions: Optional[tuple[str, ...]] = None
    exclude_dimensions: tuple[str, ...] = ()
    release_history: Optional[ReleaseHistory] = None
    records: Optional[Path] = None


@dataclass(frozen=True)
class RunConfig:
    taxonomies: tuple[TaxonomyConfig, ...]
    similarity: SimilarityConfig = SimilarityConfig()
    memory_threshold: int = 5
    robustness_scope: str = "global"
    as_of: Optional[_dt.date] = None
    assessments: Optional[Path] = None
    strict: bool = False
    base_dir: Path = Path(".")
    digest: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def taxonomy(self, name: str) -> TaxonomyConfig:
        for t in self.taxonomies:
            if t.name == name:
                return t
        known = ", ".join(t.name for t in self.taxonomies)
        raise ConfigError(f"no taxonomy named {name!r} in configuration (known: {known})")


def _date(value, what: str) -> _dt.date:
    if isinstance(value, _dt.datetime):
        return value.date()
    if isinstance(value, _dt.date):
        return value
    try:
        return _dt.date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{what}: {value!r} is not an ISO-8601 date") from None


def _json_default(o):
    if isinstance(o, (_dt.date, _dt.datetime)):
        return o.isoformat()
    return str(o)


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_config(path, require_files: bool = True) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"configuration {path} is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    return config_from_dict(raw, path.parent, require_files=require_files)


def config_from_dict(raw: dict, base_dir: Path, require_files: bool = True) -> RunConfig:
    base_dir = Path(base_dir)
    known = {"taxonomies", "similarity", "memory_threshold", "robustness_scope", "as_of", "assessments", "strict"}
    extra = sorted(set(raw) - known)
    if extra:
        raise ConfigError(f"unknown configuration keys: {', '.join(extra)}")

    files: list[Path] = []

    def resolve(p, what: str) -> Path:
        full = (base_dir / str(p)).resolve() if not Path(str(p)).is_absolute() else Path(str(p))
        if require_files and not full.is_file():
            raise ConfigError(f"{what}: file not found: {full}")
        files.append(full)
        return full

    as_of = _date(raw["as_of"], "as_of") if raw.get("as_of") is not None else None

    t_threshold = raw.get("memory_threshold", 5)
    if not isinstance(t_threshold, int) or isinstance(t_threshold, bool) or t_threshold < 1:
        raise ConfigError(f"memory_threshold must be an integer >= 1, got {t_threshold!r}")
    scope = raw.get("robustness_scope", "global")
    if scope not in ("global", "per_dimension"):
        raise ConfigError(f"robustness_scope must be global or per_dimension, got {scope!r}")

    sim_raw = raw.get("similarity") or {}
    if not isinstance(sim_raw, dict):
        raise ConfigError("similarity must be a mapping")
    backend = sim_raw.get("backend", "trigram")
    if backend not in BACKENDS:
        raise ConfigError(f"similarity.backend must be one of {', '.join(BACKENDS)}, got {backend!r}")
    sim_path = sim_raw.get("path")
    similarity = SimilarityConfig(
        backend,
        resolve(sim_path, "similarity.path") if sim_path else None,
        float(sim_raw.get("default", 0.0)),
    )

    entries = raw.get("taxonomies")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("taxonomies must be a non-empty list")
    taxonomies = []
    names = set()
    for i, t in enumerate(entries):
        where = f"taxonomies[{i}]"
        if not isinstance(t, dict) or "name" not in t or "path" not in t:
            raise ConfigError(f"{where}: needs at least name and path")
        name = str(t["name"])
        if name in names:
            raise ConfigError(f"{where}: duplicate taxonomy name {name!r}")
        names.add(name)
        fmt = t.get("format", "edge-csv")
        if fmt not in FORMATS:
            raise ConfigError(f"{where}: format must be one of {', '.join(FORMATS)}, got {fmt!r}")
        scheme = None
        if fmt == "code-scheme":
            if not isinstance(t.get("code_scheme"), dict):
                raise ConfigError(f"{where}: code-scheme format needs a code_scheme mapping")
            try:
                scheme = CodeSchemeSpec.from_dict(t["code_scheme"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}.code_scheme: {exc}") from None
        history = None
        if t.get("release_history") is not None:
            h = t["release_history"]
            if not isinstance(h, dict) or "initial_release" not in h:
                raise ConfigError(f"{where}.release_history needs initial_release")
            h_as_of = h.get("as_of", as_of)
            if h_as_of is None:
                raise ConfigError(f"{where}.release_history needs as_of (here or at top level)")
            try:
                history = ReleaseHistory(
                    _date(h["initial_release"], f"{where}.release_history.initial_release"),
                    int(h.get("releases_after_initial", 0)),
                    _date(h_as_of, f"{where}.release_history.as_of"),
                )
            except ValueError as exc:
                raise ConfigError(f"{where}.release_history: {exc}") from None
        include = t.get("include_dimensions")
        taxonomies.append(
            TaxonomyConfig(
                name=name,
                path=resolve(t["path"], f"{where}.path"),
                format=fmt,
                version=str(t["version"]) if t.get("version") is not None else None,
                code_scheme=scheme,
                include_dimensions=tuple(str(d) for d in include) if include is not None else None,
                exclude_dimensions=tuple(str(d) for d in t.get("exclude_dimensions") or ()),
                release_history=history,
                records=resolve(t["records"], f"{where}.records") if t.get("records") else None,
            )
        )

    assessments = resolve(raw["assessments"], "assessments") if raw.get("assessments") else None

    # digest covers the parsed document and the bytes of every referenced file
    h = hashlib.sha256(json.dumps(raw, sort_keys=True, default=_json_default).encode())
    for f in files:
        h.update(f.name.encode())
        if f.is_file():
            h.update(_file_digest(f).encode())
    return RunConfig(
        taxonomies=tuple(taxonomies),
        similarity=similarity,
        memory_threshold=t_threshold,
        robustness_scope=scope,
        as_of=as_of,
        assessments=assessments,
        strict=bool(raw.get("strict", False)),
        base_dir=base_dir,
        digest=h.hexdigest(),
        raw=raw,
    )
