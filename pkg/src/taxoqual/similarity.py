"""Label similarity backends used by the robustness metric.

Every backend scores two labels with a real in [-1, 1], symmetric, with
``score(a, a) == 1`` for any label it can embed.  Backends may also score a
whole block of label pairs at once (:meth:`SimilarityBackend.block`); the
robustness engine asks for one block per leaf group.
"""

from __future__ import annotations

import csv
import io
import math
import re
import threading
from collections import Counter
from dataclasses import dataclass
from typing import IO, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import sparse

__all__ = [
    "EmbeddingError",
    "EmbeddingTable",
    "SimilarityBackend",
    "WordVectorBackend",
    "TrigramBackend",
    "LookupBackend",
    "PairCache",
    "load_word_vectors",
    "load_lookup_table",
    "embed_label",
    "tokenize",
    "cosine",
    "trigrams",
    "fallback_similarity",
]


class EmbeddingError(ValueError):
    pass


_TOKEN = re.compile(r"[^0-9a-z]+")


def tokenize(label: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return [t for t in _TOKEN.split(label.lower()) if t]


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    vectors: np.ndarray  # (n_tokens, dimension), read-only
    index: Mapping[str, int]

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __getitem__(self, token: str) -> np.ndarray:
        return self.vectors[self.index[token]]

    @classmethod
    def from_dict(cls, entries: Mapping[str, Sequence[float]]) -> "EmbeddingTable":
        tokens = list(entries)
        if not tokens:
            raise EmbeddingError("embedding table is empty")
        mat = np.array([entries[t] for t in tokens], dtype=np.float64)
        if mat.ndim != 2:
            raise EmbeddingError("vectors have inconsistent dimensions")
        index = {}
        for i, t in enumerate(tokens):
            if t != t.lower():
                raise EmbeddingError(f"token {t!r} is not lowercase")
            if t in index:
                raise EmbeddingError(f"duplicate token {t!r}")
            index[t] = i
        mat.setflags(write=False)
        return cls(mat.shape[1], mat, index)


def load_word_vectors(stream: Union[IO[str], str]) -> EmbeddingTable:
    """Load vectors in the text format with a ``<count> <dim>`` header line.

    Tokens are lowercased on load; two tokens colliding after lowercasing are
    a duplicate.
    """
    lines = (stream if isinstance(stream, str) else stream.read()).splitlines()
    if not lines:
        raise EmbeddingError("line 1: missing '<count> <dim>' header")
    head = lines[0].split()
    try:
        count, dim = int(head[0]), int(head[1])
        if len(head) != 2 or count < 1 or dim < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise EmbeddingError(f"line 1: bad header {lines[0]!r}; expected '<count> <dim>'") from None

    mat = np.empty((count, dim), dtype=np.float64)
    index: dict[str, int] = {}
    row = 0
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.rstrip().split(" ")
        if parts == [""]:
            continue
        if row >= count:
            raise EmbeddingError(f"line {lineno}: more rows than the declared count {count}")
        token, comps = parts[0].lower(), parts[1:]
        if len(comps) != dim:
            raise EmbeddingError(f"line {lineno}: token {parts[0]!r} has {len(comps)} components, expected {dim}")
        try:
            mat[row] = [float(c) for c in comps]
        except ValueError:
            raise EmbeddingError(f"line {lineno}: non-numeric component for token {parts[0]!r}") from None
        if token in index:
            raise EmbeddingError(f"line {lineno}: duplicate token {token!r}")
        index[token] = row
        row += 1
    if row != count:
        raise EmbeddingError(f"header declares {count} rows, file has {row}")
    mat.setflags(write=False)
    return EmbeddingTable(dim, mat, index)


def embed_label(label: str, table: EmbeddingTable) -> Optional[np.ndarray]:
    """Mean of the in-vocabulary token vectors, or None if no token is known."""
    rows = [table.index[t] for t in tokenize(label) if t in table.index]
    if not rows:
        return None
    if len(rows) == 1:
        return table.vectors[rows[0]].copy()
    return table.vectors[rows].mean(axis=0)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for a zero-norm vector")
    if np.array_equal(u, v):
        return 1.0
    return min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv)))


def trigrams(label: str) -> Counter:
    """Character trigram counts of the lowercased label.

    Labels shorter than three characters count as one gram of themselves.
    """
    s = label.lower()
    if len(s) < 3:
        return Counter([s]) if s else Counter()
    return Counter(s[i : i + 3] for i in range(len(s) - 2))


def fallback_similarity(label_a: str, label_b: str) -> float:
    """Cosine of character-trigram count vectors; in [0, 1]."""
    if not label_a or not label_b:
        raise ValueError("labels must be non-empty")
    a, b = trigrams(label_a), trigrams(label_b)
    dot = sum(n * b[g] for g, n in a.items() if g in b)
    na = sum(n * n for n in a.values())
    nb = sum(n * n for n in b.values())
    # integer dot/norms keep this bit-identical to the vectorized block route
    return dot / math.sqrt(na * nb)


class PairCache:
    """Thread-safe memo of scores keyed by unordered label pair."""

    def __init__(self):
        self._data: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, a: str, b: str, compute) -> float:
        key = (a, b) if a <= b else (b, a)
        value = self._data.get(key)
        if value is not None:
            self.hits += 1
            return value
        value = compute(key[0], key[1])
        with self._lock:
            self.misses += 1
            self._data.setdefault(key, value)
        return value

    def __len__(self) -> int:
        return len(self._data)


class SimilarityBackend:
    """Base contract.  Subclasses implement :meth:`score` and :meth:`embeddable`."""

    name = "abstract"

    def score(self, label_a: str, label_b: str) -> float:
        raise NotImplementedError

    def embeddable(self, label: str) -> bool:
        return True

    def identity(self) -> dict:
        return {"name": self.name}

    def block(self, rows: Sequence[str], cols: Sequence[str], cache: Optional[PairCache] = None) -> np.ndarray:
        """Scores for every (row label, column label) pair as a float64 array."""
        out = np.empty((len(rows), len(cols)), dtype=np.float64)
        score = self.score
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                out[i, j] = cache.get(a, b, score) if cache is not None else score(a, b)
        return out


class TrigramBackend(SimilarityBackend):
    """Deterministic embedding-free backend built on :func:`fallback_similarity`."""

    name = "trigram"

    def score(self, label_a: str, label_b: str) -> float:
        return fallback_similarity(label_a, label_b)

    def embeddable(self, label: str) -> bool:
        return bool(label)

    def _matrix(self, labels: Sequence[str], vocab: dict) -> sparse.csr_matrix:
        indptr, indices, data = [0], [], []
        for lab in labels:
            for g, n in trigrams(lab).items():
                indices.append(vocab.setdefault(g, len(vocab)))
                data.append(n)
            indptr.append(len(indices))
        return indptr, indices, data

    def block(self, rows, cols, cache=None) -> np.ndarray:
        vocab: dict[str, int] = {}
        r = self._matrix(rows, vocab)
        c = self._matrix(cols, vocab)
        shape = len(vocab)
        R = sparse.csr_matrix((np.array(r[2], np.int64), r[1], r[0]), shape=(len(rows), shape))
        C = sparse.csr_matrix((np.array(c[2], np.int64), c[1], c[0]), shape=(len(cols), shape))
        dots = np.asarray((R @ C.T).todense(), dtype=np.float64)
        nr = np.asarray(R.multiply(R).sum(axis=1), dtype=np.float64).ravel()
        nc = np.asarray(C.multiply(C).sum(axis=1), dtype=np.float64).ravel()
        return dots / np.sqrt(nr[:, None] * nc[None, :])


class WordVectorBackend(SimilarityBackend):
    """Cosine between averaged word vectors of the two labels."""

    name = "word-vectors"

    def __init__(self, table: EmbeddingTable, source: Optional[str] = None):
        self.table = table
        self.source = source
        self._memo: dict[str, Optional[np.ndarray]] = {}

    def identity(self) -> dict:
        ident = {"name": self.name, "dimension": self.table.dimension, "tokens": len(self.table)}
        if self.source:
            ident["source"] = self.source
        return ident

    def vector(self, label: str) -> Optional[np.ndarray]:
        if label not in self._memo:
            v = embed_label(label, self.table)
            if v is not None and not np.any(v):
                v = None
            self._memo[label] = v
        return self._memo[label]

    def embeddable(self, label: str) -> bool:
        return self.vector(label) is not None

    def score(self, label_a: str, label_b: str) -> float:
        u, v = self.vector(label_a), self.vector(label_b)
        if u is None or v is None:
            missing = label_a if u is None else label_b
            raise EmbeddingError(f"label {missing!r} has no in-vocabulary token")
        return cosine(u, v)

    def _unit(self, labels) -> np.ndarray:
        mat = np.array([self.vector(lab) for lab in labels], dtype=np.float64)
        return mat / np.linalg.norm(mat, axis=1, keepdims=True)

    def block(self, rows, cols, cache=None) -> np.ndarray:
        for lab in list(rows) + list(cols):
            if self.vector(lab) is None:
                raise EmbeddingError(f"label {lab!r} has no in-vocabulary token")
        out = self._unit(rows) @ self._unit(cols).T
        np.clip(out, -1.0, 1.0, out=out)
        return out


class LookupBackend(SimilarityBackend):
    """Explicit table of pair scores; unlisted pairs score ``default``."""

    name = "lookup"

    def __init__(self, pairs: Mapping[tuple[str, str], float], default: float = 0.0, source: Optional[str] = None):
        table = {}
        for (a, b), s in pairs.items():
            s = float(s)
            if not -1.0 <= s <= 1.0:
                raise ValueError(f"similarity {s} for ({a!r}, {b!r}) outside [-1, 1]")
            key = (a, b) if a <= b else (b, a)
            if key in table and table[key] != s:
                raise ValueError(f"conflicting similarities for ({a!r}, {b!r})")
            table[key] = s
        self.pairs = table
        self.default = float(default)
        self.source = source

    def identity(self) -> dict:
        ident = {"name": self.name, "pairs": len(self.pairs), "default": self.default}
        if self.source:
            ident["source"] = self.source
        return ident

    def score(self, label_a: str, label_b: str) -> float:
        if label_a == label_b:
            return 1.0
        key = (label_a, label_b) if label_a <= label_b else (label_b, label_a)
        return self.pairs.get(key, self.default)


def load_lookup_table(stream: Union[IO[str], str], default: float = 0.0, source: Optional[str] = None) -> LookupBackend:
    """Read a ``label_a,label_b,similarity`` CSV into a :class:`LookupBackend`."""
    text = stream if isinstance(stream, str) else stream.read()
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["label_a", "label_b", "similarity"]:
        raise EmbeddingError("line 1: expected header label_a,label_b,similarity")
    pairs = {}
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise EmbeddingError(f"line {reader.line_num}: expected 3 columns, got {len(row)}")
        try:
            pairs[(row[0].strip(), row[1].strip())] = float(row[2])
        except ValueError:
            raise EmbeddingError(f"line {reader.line_num}: non-numeric similarity {row[2]!r}") from None
    return LookupBackend(pairs, default=default, source=source)
