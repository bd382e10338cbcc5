"""Immutable forest representation of a taxonomy.

A taxonomy is a list of dimensions; each dimension is a single-parent tree.
Roots sit at depth 0, intermediate nodes are *categories* and leaves are
*characteristics*.  Node kinds are derived from structure, never stored.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional

__all__ = [
    "Edge",
    "Node",
    "Dimension",
    "Taxonomy",
    "ConstructCounts",
    "LeafGroup",
    "Problem",
    "InvalidTaxonomyError",
    "build_forest",
    "counts",
    "leaf_groups",
]


class Edge(NamedTuple):
    dimension: str
    code: str
    parent: Optional[str]
    label: str


class Problem(NamedTuple):
    kind: str
    codes: tuple[str, ...]
    message: str


class InvalidTaxonomyError(ValueError):
    """Raised when an edge list violates a tree invariant.

    ``problems`` lists every violation found, not just the first one.
    """

    def __init__(self, problems: list[Problem]):
        self.problems = problems
        super().__init__("; ".join(p.message for p in problems))


@dataclass(frozen=True, eq=False, repr=False)
class Node:
    code: str
    label: str
    depth: int
    dimension: str
    parent_code: Optional[str]
    children: tuple["Node", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def is_root(self) -> bool:
        return self.parent_code is None

    @property
    def kind(self) -> str:
        if self.is_root:
            return "root"
        return "characteristic" if self.is_leaf else "category"

    def iter_subtree(self) -> Iterator["Node"]:
        """Pre-order traversal, iterative so deep chains do not hit the recursion limit."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __repr__(self) -> str:
        return f"Node({self.code!r}, depth={self.depth}, children={len(self.children)})"


@dataclass(frozen=True, eq=False)
class Dimension:
    id: str
    root: Node

    @property
    def label(self) -> str:
        return self.root.label

    def iter_nodes(self) -> Iterator[Node]:
        return self.root.iter_subtree()


@dataclass(frozen=True, eq=False)
class Taxonomy:
    """Validated forest.  Build one with :func:`build_forest`.

    Equality is structural: two taxonomies are equal when they carry the same
    name, version and the same set of (dimension, code, parent, label) edges,
    regardless of input order.
    """

    name: str
    dimensions: tuple[Dimension, ...]
    version: Optional[str] = None
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.dimensions:
            raise InvalidTaxonomyError([Problem("empty", (), "taxonomy has no dimensions")])
        ids = [d.id for d in self.dimensions]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise InvalidTaxonomyError(
                [Problem("duplicate_dimension", tuple(dup), f"duplicate dimension ids: {', '.join(dup)}")]
            )
        index = {}
        for dim in self.dimensions:
            for node in dim.iter_nodes():
                index[node.code] = node
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, code: str) -> bool:
        return code in self._index

    def node(self, code: str) -> Node:
        return self._index[code]

    def dimension(self, dimension_id: str) -> Dimension:
        for dim in self.dimensions:
            if dim.id == dimension_id:
                return dim
        raise KeyError(dimension_id)

    def iter_nodes(self) -> Iterator[Node]:
        for dim in self.dimensions:
            yield from dim.iter_nodes()

    def characteristics(self) -> list[Node]:
        return sorted((n for n in self.iter_nodes() if n.kind == "characteristic"), key=lambda n: n.code)

    def categories(self) -> list[Node]:
        return sorted((n for n in self.iter_nodes() if n.kind == "category"), key=lambda n: n.code)

    def edges(self) -> list[Edge]:
        """All edges sorted by (dimension, code)."""
        return sorted(
            (Edge(n.dimension, n.code, n.parent_code, n.label) for n in self.iter_nodes()),
            key=lambda e: (e.dimension, e.code),
        )

    def select_dimensions(self, include=None, exclude=None) -> "Taxonomy":
        """Return a taxonomy restricted to the given dimension ids."""
        known = {d.id for d in self.dimensions}
        unknown = sorted((set(include or ()) | set(exclude or ())) - known)
        if unknown:
            raise KeyError(f"unknown dimensions: {', '.join(unknown)}")
        dims = tuple(
            d for d in self.dimensions
            if (include is None or d.id in include) and d.id not in (exclude or ())
        )
        return Taxonomy(self.name, dims, self.version)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Taxonomy):
            return NotImplemented
        return (
            self.name == other.name
            and self.version == other.version
            and self.edges() == other.edges()
        )

    def __hash__(self) -> int:
        return hash((self.name, self.version, tuple(self.edges())))


@dataclass(frozen=True)
class ConstructCounts:
    n_dimensions: int
    n_categories: int
    n_characteristics: int
    max_depth: int


@dataclass(frozen=True)
class LeafGroup:
    parent_code: str
    dimension: str
    members: tuple[Node, ...]

    @property
    def size(self) -> int:
        return len(self.members)


def build_forest(edges: Iterable, name: str = "taxonomy", version: Optional[str] = None) -> Taxonomy:
    """Validate an edge list and assemble the forest.

    Each edge is ``(dimension_id, code, parent_code or None, label)``.  A node
    whose parent is ``None`` (or the empty string) is the root of its
    dimension.  All violations are collected and raised together as an
    :class:`InvalidTaxonomyError`.
    """
    edges = [Edge(d, c, p if p not in ("", None) else None, lab) for d, c, p, lab in edges]
    if not edges:
        raise InvalidTaxonomyError([Problem("empty", (), "edge list is empty")])

    problems: list[Problem] = []
    by_code: dict[str, Edge] = {}
    dim_order: list[str] = []
    for e in edges:
        if e.dimension not in dim_order:
            dim_order.append(e.dimension)
        if e.code in by_code:
            problems.append(Problem("duplicate_code", (e.code,), f"duplicate code {e.code!r}"))
            continue
        by_code[e.code] = e
        if not (e.label or "").strip():
            problems.append(Problem("empty_label", (e.code,), f"empty label for code {e.code!r}"))

    for e in by_code.values():
        if e.parent is None:
            continue
        parent = by_code.get(e.parent)
        if parent is None:
            problems.append(
                Problem("orphan", (e.code, e.parent), f"code {e.code!r} has unknown parent {e.parent!r}")
            )
        elif parent.dimension != e.dimension:
            problems.append(
                Problem(
                    "dimension_mismatch",
                    (e.code, e.parent),
                    f"code {e.code!r} in dimension {e.dimension!r} has parent in dimension {parent.dimension!r}",
                )
            )

    roots: dict[str, list[str]] = defaultdict(list)
    for e in by_code.values():
        if e.parent is None:
            roots[e.dimension].append(e.code)
    for dim in dim_order:
        if len(roots[dim]) > 1:
            codes = tuple(sorted(roots[dim]))
            problems.append(
                Problem("multiple_roots", codes, f"dimension {dim!r} has multiple roots: {', '.join(codes)}")
            )

    problems.extend(_find_cycles(by_code))

    for dim in dim_order:
        if not roots[dim] and not any(p.kind == "cycle" for p in problems):
            problems.append(Problem("no_root", (dim,), f"dimension {dim!r} has no root"))

    if problems:
        raise InvalidTaxonomyError(problems)

    children: dict[str, list[str]] = defaultdict(list)
    for e in by_code.values():
        if e.parent is not None:
            children[e.parent].append(e.code)

    dims = tuple(
        Dimension(dim, _assemble(roots[dim][0], by_code, children)) for dim in dim_order
    )
    return Taxonomy(name, dims, version)


def _find_cycles(by_code: dict[str, Edge]) -> list[Problem]:
    # 0 = unvisited, 1 = on current path, 2 = settled
    state: dict[str, int] = {}
    problems = []
    for start in by_code:
        if state.get(start):
            continue
        path = []
        code = start
        while code is not None and code in by_code and not state.get(code):
            state[code] = 1
            path.append(code)
            code = by_code[code].parent
        if code is not None and state.get(code) == 1:
            cycle = tuple(sorted(path[path.index(code):]))
            problems.append(Problem("cycle", cycle, f"cycle among codes: {', '.join(cycle)}"))
        for c in path:
            state[c] = 2
    return problems


def _assemble(root_code: str, by_code: dict[str, Edge], children: dict[str, list[str]]) -> Node:
    # depths top-down, then nodes bottom-up so each frozen Node gets finished children
    depth = {root_code: 0}
    order = [root_code]
    i = 0
    while i < len(order):
        code = order[i]
        for child in children.get(code, ()):
            depth[child] = depth[code] + 1
            order.append(child)
        i += 1
    built: dict[str, Node] = {}
    for code in reversed(order):
        e = by_code[code]
        built[code] = Node(
            code=code,
            label=e.label,
            depth=depth[code],
            dimension=e.dimension,
            parent_code=e.parent,
            children=tuple(built[c] for c in children.get(code, ())),
        )
    return built[root_code]


def counts(taxonomy: Taxonomy) -> ConstructCounts:
    n_cat = n_char = max_depth = 0
    for node in taxonomy.iter_nodes():
        max_depth = max(max_depth, node.depth)
        if node.kind == "category":
            n_cat += 1
        elif node.kind == "characteristic":
            n_char += 1
    return ConstructCounts(len(taxonomy.dimensions), n_cat, n_char, max_depth)


def leaf_groups(taxonomy: Taxonomy) -> list[LeafGroup]:
    """One group per parent with at least one leaf child, sorted by parent code."""
    groups = []
    for node in taxonomy.iter_nodes():
        leaves = tuple(sorted((c for c in node.children if c.is_leaf), key=lambda n: n.code))
        if leaves:
            groups.append(LeafGroup(node.code, node.dimension, leaves))
    groups.sort(key=lambda g: g.parent_code)
    return groups
