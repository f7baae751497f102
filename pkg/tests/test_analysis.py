import math

import numpy as np
import pytest

from semplaus.analysis import FrequencyTable, WordVectors, label_similarity, top_words
from semplaus.corpus import EventTriple, LabeledEvent
from semplaus.errors import DataError


def ev(s, v, o, label):
    return LabeledEvent(EventTriple(s, v, o), label)


EVENTS = [ev("man", "eat", "apple", 1), ev("man", "eat", "stone", 1), ev("Stone", "eat", "man", 0)]


def test_top_words_tie_rule():
    assert top_words(EVENTS, 1, 2).entries == (("eat", 2), ("man", 2))


def test_top_words_empty_and_large_k():
    assert top_words(EVENTS[:2], 0, 5).entries == ()
    assert top_words(EVENTS, 0, 100).entries == (("eat", 1), ("man", 1), ("stone", 1))


def test_top_words_stop_list_and_multiword():
    events = [ev("the man", "eats", "credit card", 1)]
    assert top_words(events, 1, 10, {"the"}).words == ["card", "credit", "eats", "man"]


def test_similarity_hand_computed():
    vecs = WordVectors({
        "a": [1, 0, 0], "b": [0, 1, 0], "c": [1, 1, 0], "d": [0, 0, 1], "e": [1, 0, 1],
    })
    rows = FrequencyTable(1, (("a", 3), ("b", 2), ("c", 1)))
    cols = FrequencyTable(0, (("a", 3), ("d", 2), ("e", 1)))
    m = label_similarity(rows, cols, vecs)
    r2 = 1 / math.sqrt(2)
    expected = [[1.0, 0.0, r2], [0.0, 0.0, 0.0], [r2, 0.0, 0.5]]
    np.testing.assert_allclose(m.values, expected, atol=1e-12)
    assert m.values[0, 0] == pytest.approx(1.0)
    off = [0.0, r2, 0.0, 0.0, 0.0, r2, 0.0, 0.5]  # every cell except (a, a)
    assert m.mean_off_diagonal() == pytest.approx(sum(off) / len(off))


def test_similarity_skips_and_transposes():
    vecs = WordVectors({"a": [1, 2], "b": [2, -1]})
    rows = FrequencyTable(1, (("a", 1), ("zzz", 1)))
    cols = FrequencyTable(0, (("b", 1), ("a", 1)))
    m = label_similarity(rows, cols, vecs)
    assert m.values.shape == (1, 2) and m.skipped_rows == ("zzz",)
    swapped = label_similarity(cols, rows, vecs)
    np.testing.assert_allclose(swapped.values, m.values.T)
    assert np.all(np.abs(m.values) <= 1.0)
    with pytest.raises(DataError):
        label_similarity(FrequencyTable(1, (("zzz", 1),)), cols, vecs)


def test_load_word2vec_text(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 3\nman 1 0 0\napple 0 1 0.5\n")
    vecs = WordVectors.load(p)
    np.testing.assert_array_equal(vecs.get("apple"), [0, 1, 0.5])
    assert vecs.get("Man") is not None and vecs.get("pear") is None
    assert WordVectors.bundled().get("chef") is not None
