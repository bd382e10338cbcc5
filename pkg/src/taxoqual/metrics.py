"""Internal objective measurements of a taxonomy.

Robustness counts *intruder* pairs: a (group member, outside characteristic)
pair whose similarity is strictly above the group's weakest internal pair.
Conciseness is the depth-weighted inverse-log formula, the memory heuristic
counts decision points with too many choices, and rate of change divides
releases by elapsed days.
"""

from __future__ import annotations

import datetime as _dt
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _core
from .model import Taxonomy, leaf_groups
from .similarity import PairCache, SimilarityBackend

__all__ = [
    "MetricError",
    "GroupRobustness",
    "RobustnessReport",
    "MemoryHeuristicResult",
    "ReleaseHistory",
    "DimensionRobustness",
    "DIMENSION_CHOICE",
    "robustness",
    "robustness_detail",
    "dimension_robustness_summary",
    "conciseness",
    "memory_heuristic",
    "rate_of_change",
]

DIMENSION_CHOICE = "<dimension>"


class MetricError(ValueError):
    """A metric's precondition does not hold for the given input."""


@dataclass(frozen=True)
class GroupRobustness:
    parent_code: str
    dimension: str
    n_gc: int
    min_within_similarity: Optional[float]
    n_ic: int
    n_outside: int
    member_codes: tuple[str, ...] = ()

    @property
    def applicable(self) -> bool:
        """Singleton groups have no internal pair and stay out of the mean."""
        return self.min_within_similarity is not None

    @property
    def outside_proportion(self) -> Optional[float]:
        if not self.applicable:
            return None
        return self.n_ic / self.n_outside if self.n_outside else 0.0

    @property
    def score(self) -> Optional[float]:
        p = self.outside_proportion
        return None if p is None else 1.0 - p

    def to_dict(self) -> dict:
        return {
            "parent_code": self.parent_code,
            "dimension": self.dimension,
            "n_gc": self.n_gc,
            "min_within_similarity": self.min_within_similarity,
            "n_ic": self.n_ic,
            "n_outside": self.n_outside,
            "outside_proportion": self.outside_proportion,
            "score": self.score,
        }


@dataclass(frozen=True)
class RobustnessReport:
    r: float
    n_ac: int
    ngroups: int
    groups: tuple[GroupRobustness, ...]
    embedding_coverage: float
    scope: str = "global"
    excluded_codes: tuple[str, ...] = ()
    backend: dict = field(default_factory=dict)

    @property
    def scored_groups(self) -> list[GroupRobustness]:
        return [g for g in self.groups if g.applicable]

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "scope": self.scope,
            "n_ac": self.n_ac,
            "ngroups": self.ngroups,
            "embedding_coverage": self.embedding_coverage,
            "excluded_codes": list(self.excluded_codes),
            "groups": [g.to_dict() for g in self.groups],
        }


def robustness(
    taxonomy: Taxonomy,
    backend: SimilarityBackend,
    scope: str = "global",
    threads: int = 1,
) -> RobustnessReport:
    """Mean over multi-member leaf groups of ``1 - n_ic / (n_gc * (n_ac - n_gc))``.

    Characteristics the backend cannot embed are dropped before anything is
    counted; ``embedding_coverage`` reports the kept fraction.  With
    ``scope="per_dimension"`` a group's outside characteristics are limited
    to its own dimension.
    """
    if scope not in ("global", "per_dimension"):
        raise ValueError(f"unknown robustness scope {scope!r}")
    chars = taxonomy.characteristics()
    if not chars:
        raise MetricError("taxonomy has no characteristics")
    kept, dropped = [], []
    for node in chars:
        (kept if backend.embeddable(node.label) else dropped).append(node)
    kept_codes = {n.code for n in kept}

    universes: dict[Optional[str], list] = {}
    if scope == "global":
        universes[None] = kept
    else:
        for node in kept:
            universes.setdefault(node.dimension, []).append(node)
    col_of = {
        key: {n.code: i for i, n in enumerate(nodes)} for key, nodes in universes.items()
    }
    labels_of = {key: [n.label for n in nodes] for key, nodes in universes.items()}

    jobs = []
    singles = []
    for group in leaf_groups(taxonomy):
        members = [m for m in group.members if m.code in kept_codes]
        if not members:
            continue
        key = None if scope == "global" else group.dimension
        n_scope = len(universes[key])
        if len(members) < 2:
            singles.append(
                GroupRobustness(group.parent_code, group.dimension, len(members), None, 0,
                                len(members) * (n_scope - len(members)), tuple(m.code for m in members))
            )
        else:
            jobs.append((group, members, key))
    if not jobs:
        raise MetricError("no leaf group has two or more embeddable characteristics")

    def run(batch):
        cache = PairCache()
        out = []
        for group, members, key in batch:
            cols = np.array([col_of[key][m.code] for m in members], dtype=np.intp)
            rows = backend.block([m.label for m in members], labels_of[key], cache)
            lo, n_ic = _core.group_stats(rows, cols)
            n_gc = len(members)
            out.append(
                GroupRobustness(group.parent_code, group.dimension, n_gc, lo, n_ic,
                                n_gc * (len(universes[key]) - n_gc), tuple(m.code for m in members))
            )
        return out

    threads = max(1, int(threads))
    if threads == 1 or len(jobs) == 1:
        scored = run(jobs)
    else:
        batches = [jobs[i::threads] for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scored = [g for part in pool.map(run, batches) for g in part]

    groups = tuple(sorted(scored + singles, key=lambda g: g.parent_code))
    applicable = [g for g in groups if g.applicable]
    r = math.fsum(g.score for g in applicable) / len(applicable)
    return RobustnessReport(
        r=r,
        n_ac=len(kept),
        ngroups=len(applicable),
        groups=groups,
        embedding_coverage=len(kept) / len(chars),
        scope=scope,
        excluded_codes=tuple(n.code for n in dropped),
        backend=backend.identity(),
    )


def _ranked(report: RobustnessReport) -> list[GroupRobustness]:
    return sorted(report.scored_groups, key=lambda g: (g.outside_proportion, g.parent_code))


def robustness_detail(report: RobustnessReport, k: int) -> tuple[list[GroupRobustness], list[GroupRobustness]]:
    """The k most and k least robust groups, both in ascending outside proportion."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = _ranked(report)
    return ranked[:k], ranked[-k:]


@dataclass(frozen=True)
class DimensionRobustness:
    dimension: str
    group_count: int
    bottom_third_count: int
    percentage: int


def dimension_robustness_summary(report: RobustnessReport, taxonomy: Taxonomy) -> list[DimensionRobustness]:
    """Share of each dimension's groups that fall in the least robust third.

    The bottom third is the ``ngroups // 3`` groups with the highest outside
    proportion.  Rows are ordered by percentage, highest first.
    """
    ranked = _ranked(report)
    n_bottom = len(ranked) // 3
    bottom = ranked[len(ranked) - n_bottom:] if n_bottom else []
    total: dict[str, int] = {d.id: 0 for d in taxonomy.dimensions}
    low: dict[str, int] = {d.id: 0 for d in taxonomy.dimensions}
    for g in ranked:
        total[g.dimension] += 1
    for g in bottom:
        low[g.dimension] += 1
    rows = []
    for dim, count in total.items():
        if count == 0:
            continue
        # round half up on integers: floor(100*b/c + 1/2)
        pct = (200 * low[dim] + count) // (2 * count)
        rows.append(DimensionRobustness(dim, count, low[dim], pct))
    rows.sort(key=lambda r: (-r.percentage, -r.group_count, r.dimension))
    return rows


def conciseness(taxonomy: Taxonomy) -> float:
    """``1 / (1 + ln(sum of 1/depth over categories and characteristics - 1))``."""
    weight = []
    n_cat = n_char = 0
    for node in taxonomy.iter_nodes():
        if node.is_root:
            continue
        if node.depth <= 0:
            raise MetricError(f"non-root node {node.code!r} at depth {node.depth}")
        if node.is_leaf:
            n_char += 1
        else:
            n_cat += 1
        weight.append(1.0 / node.depth)
    if n_cat < 1 or n_char < 2:
        raise MetricError(
            f"conciseness needs at least 1 category and 2 characteristics (have {n_cat} and {n_char})"
        )
    arg = math.fsum(weight) - 1.0
    if arg < 1.0:
        raise MetricError(f"depth-weighted construct sum {arg + 1.0} below 2; structure yields C > 1")
    return 1.0 / (1.0 + math.log(arg))


@dataclass(frozen=True)
class MemoryHeuristicResult:
    t: int
    m_t: int
    decision_points: tuple[tuple[str, int], ...]

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "m_t": self.m_t,
            "decision_points": [{"node_code": c, "choice_count": n} for c, n in self.decision_points],
        }


def memory_heuristic(taxonomy: Taxonomy, t: int = 5) -> MemoryHeuristicResult:
    """Count decision points that offer more than ``t`` choices.

    The first decision picks a dimension; after that every non-leaf node asks
    the user to choose among its children.
    """
    if t < 1:
        raise ValueError("threshold t must be at least 1")
    points = [(DIMENSION_CHOICE, len(taxonomy.dimensions))]
    points.extend(
        sorted((n.code, len(n.children)) for n in taxonomy.iter_nodes() if n.children)
    )
    return MemoryHeuristicResult(t, sum(1 for _, c in points if c > t), tuple(points))


@dataclass(frozen=True)
class ReleaseHistory:
    initial_release: _dt.date
    releases_after_initial: int
    as_of: _dt.date

    def __post_init__(self):
        if self.releases_after_initial < 0:
            raise MetricError("release count cannot be negative")
        if self.as_of < self.initial_release:
            raise MetricError(f"as_of {self.as_of} precedes initial release {self.initial_release}")

    @classmethod
    def from_dict(cls, d: dict, as_of=None) -> "ReleaseHistory":
        def day(v):
            return v if isinstance(v, _dt.date) else _dt.date.fromisoformat(str(v))

        return cls(day(d["initial_release"]), int(d.get("releases_after_initial", 0)), day(d.get("as_of", as_of)))


def rate_of_change(history: ReleaseHistory) -> float:
    """Releases after the initial one per elapsed day."""
    if history.releases_after_initial == 0:
        return 0.0
    days = (history.as_of - history.initial_release).days
    if days == 0:
        raise MetricError("releases after the initial release but zero elapsed days")
    return history.releases_after_initial / days
