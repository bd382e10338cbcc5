import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from taxoqual.similarity import (
    EmbeddingError,
    EmbeddingTable,
    LookupBackend,
    PairCache,
    TrigramBackend,
    WordVectorBackend,
    cosine,
    embed_label,
    fallback_similarity,
    load_lookup_table,
    load_word_vectors,
    tokenize,
)

words = st.text(alphabet="abcdefghij", min_size=1, max_size=6)
phrases = st.lists(words, min_size=1, max_size=4).map(" ".join)


def test_load_single_vector():
    t = load_word_vectors("1 2\nroad 1.0 0.0")
    assert t.dimension == 2 and len(t) == 1


def test_load_orthogonal_pair():
    t = load_word_vectors("2 2\na 1 0\nb 0 1\n")
    assert cosine(t.vectors[t.index["a"]], t.vectors[t.index["b"]]) == 0.0


@pytest.mark.parametrize(
    "text, line",
    [
        ("1 2\nroad 1.0 0.0 3.0", 2),
        ("1 2\nroad 1.0 x", 2),
        ("2 2\na 1 0\na 0 1", 3),
        ("2 2\na 1 0", None),
        ("two 2\na 1 0", 1),
    ],
)
def test_load_errors(text, line):
    with pytest.raises(EmbeddingError) as exc:
        load_word_vectors(text)
    if line is not None:
        assert f"line {line}" in str(exc.value)


def test_embed_label_mean():
    t = EmbeddingTable.from_dict({"road": [1.0, 0.0], "bridge": [0.0, 1.0]})
    assert np.array_equal(embed_label("Road", t), [1.0, 0.0])
    assert np.allclose(embed_label("road bridge", t), [0.5, 0.5])
    assert embed_label("zzzz", t) is None


def test_cosine_values():
    v = np.array([0.3, -1.2, 4.0])
    assert cosine(v, v) == 1.0
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    with pytest.raises(ValueError):
        cosine([0, 0], [1, 0])
    with pytest.raises(ValueError):
        cosine([1, 0], [1, 0, 0])


def test_trigram_values():
    assert fallback_similarity("road", "road") == 1.0
    assert fallback_similarity("abc", "xyz") == 0.0
    # {roa, oad, ads} vs {roa, oad}: dot 2, norms sqrt(3) and sqrt(2)
    assert fallback_similarity("roads", "road") == pytest.approx(2 / math.sqrt(6), abs=1e-15)
    assert fallback_similarity("Road", "rOAD") == 1.0


def test_trigram_short_labels():
    assert fallback_similarity("ab", "ab") == 1.0
    assert fallback_similarity("ab", "abc") == 0.0


def test_lookup_backend():
    b = LookupBackend({("x", "y"): 0.4}, default=0.05)
    assert b.score("y", "x") == 0.4
    assert b.score("x", "x") == 1.0
    assert b.score("x", "q") == 0.05
    with pytest.raises(ValueError):
        LookupBackend({("x", "y"): 0.4, ("y", "x"): 0.5})
    with pytest.raises(ValueError):
        LookupBackend({("x", "y"): 1.5})


def test_load_lookup_table():
    b = load_lookup_table("label_a,label_b,similarity\nA,B,0.8\n", default=0.1)
    assert b.score("B", "A") == 0.8
    with pytest.raises(EmbeddingError):
        load_lookup_table("a,b,c\n")


def test_tokenize():
    assert tokenize("Road-Bridge, (Steel)") == ["road", "bridge", "steel"]


@settings(max_examples=200, deadline=None)
@given(phrases, phrases)
def test_trigram_symmetric_and_bounded(a, b):
    s = fallback_similarity(a, b)
    assert s == fallback_similarity(b, a)
    assert 0.0 <= s <= 1.0 + 1e-15
    assert fallback_similarity(a, a) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(phrases, min_size=1, max_size=8), st.lists(phrases, min_size=1, max_size=8))
def test_trigram_block_matches_scalar(rows, cols):
    blk = TrigramBackend().block(rows, cols)
    expect = np.array([[fallback_similarity(a, b) for b in cols] for a in rows])
    assert np.array_equal(blk, expect)


def _random_table(seed, vocab="abcdefghij"):
    rng = np.random.default_rng(seed)
    return EmbeddingTable.from_dict({w: rng.normal(size=5) for w in vocab})


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 1000), st.lists(st.sampled_from("abcdefghij"), min_size=1, max_size=3),
       st.lists(st.sampled_from("abcdefghij"), min_size=1, max_size=3))
def test_word_vector_symmetry(seed, ta, tb):
    b = WordVectorBackend(_random_table(seed))
    x, y = " ".join(ta), " ".join(tb)
    assert b.score(x, y) == b.score(y, x)
    assert b.score(x, x) == 1.0
    assert -1.0 <= b.score(x, y) <= 1.0
    blk = b.block([x], [y])
    assert blk[0, 0] == pytest.approx(b.score(x, y), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from("abcdefghij"), min_size=1, max_size=4), st.sampled_from([", ", " - ", "/", "  "]))
def test_embed_invariant_to_case_and_punctuation(tokens, sep):
    t = _random_table(0)
    plain = embed_label(" ".join(tokens), t)
    varied = embed_label(sep.join(w.upper() for w in tokens) + "!", t)
    assert np.array_equal(plain, varied)


def test_single_token_returns_stored_vector():
    t = _random_table(3)
    for w, i in t.index.items():
        assert np.array_equal(embed_label(w, t), t.vectors[i])


def test_word_vector_unembeddable():
    b = WordVectorBackend(_random_table(1))
    assert not b.embeddable("zzz")
    with pytest.raises(EmbeddingError):
        b.score("a", "zzz")


def test_pair_cache_unordered_and_threadsafe():
    cache = PairCache()
    calls = []

    def compute(a, b):
        calls.append((a, b))
        return fallback_similarity(a, b)

    assert cache.get("road", "roads", compute) == cache.get("roads", "road", compute)
    assert len(cache) == 1 and cache.hits == 1

    labels = [f"label {i}" for i in range(30)]

    def worker():
        for a in labels:
            for b in labels:
                cache.get(a, b, fallback_similarity)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(cache) == 1 + 30 * 31 // 2
