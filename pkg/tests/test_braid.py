import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import POINTS
from nhknots.braid import (
    BraidWord,
    Crossing,
    KnotClass,
    braid_summary_json,
    classify_knot,
    classify_summary,
    closure_components,
    extract_braid,
    linking_invariants,
)
from nhknots.lattice import ModelParams
from nhknots.spectral import track_bands

# frozen from the extractor at n_k = 512 (identical at 1024 and 2048)
EXPECTED = {
    "a": ("", "Unlink(4)"),
    "b": ("s2", "Unknots(3)"),
    "c": ("s2 s2", "HopfLinkPlus(4)"),
    "d": ("s2 s1 s3 s2 s1^-1 s3^-1 s2", "HopfLinkPlus(3)"),
    "e": ("s1^-1 s3^-1 s2 s1 s3 s2 s1^-1 s3^-1 s2 s1 s3 s2", "Catenane(4)"),
}

words = st.lists(st.sampled_from([1, 2, 3, -1, -2, -3]), max_size=12)


def _classify(word):
    return classify_knot(linking_invariants(word))


def test_tokens_roundtrip():
    w = BraidWord.from_ints([1, -2, 3])
    assert w.tokens() == "s1 s2^-1 s3"
    assert BraidWord.from_tokens(w.tokens()).as_ints() == [1, -2, 3]
    with pytest.raises(ValueError):
        BraidWord.from_tokens("x1")
    with pytest.raises(ValueError):
        BraidWord.from_ints([4])


def test_empty_word():
    w = BraidWord()
    assert len(closure_components(w)) == 4
    inv = linking_invariants(w)
    assert not inv.lk.any()
    assert _classify(w) == KnotClass("Unlink", 4)


def test_two_cycles():
    comps = closure_components(BraidWord.from_ints([1, 3]))
    assert sorted(len(c) for c in comps) == [2, 2]


def test_hopf_link():
    inv = linking_invariants(BraidWord.from_ints([1, 1], strand_count=2))
    assert inv.n_components == 2
    assert abs(inv.lk[0, 1]) == 1
    assert classify_knot(inv).tag == "HopfLinkPlus"
    assert linking_invariants(BraidWord.from_ints([-1, -1], strand_count=2)).lk[0, 1] == -1


def test_classify_summaries():
    assert classify_summary((4, ((1, 0),) * 4, (0,) * 6, 0)).label == "Unlink(4)"
    single_pair = (4, ((1, 0),) * 4, (0, 0, 0, 0, 0, 1), 2)
    assert classify_summary(single_pair).tag == "HopfLinkPlus"
    assert classify_summary((1, ((2, 0),), (), 0)).tag == "Other"
    assert classify_summary((2, ((1, 0), (1, 0)), (2,), 4)).tag == "Other"


def test_free_reduce():
    w = BraidWord.from_ints([1, 2, -2, -1, 3])
    assert w.free_reduce().as_ints() == [3]


def test_permutation_matches_band_permutation_identity_order():
    w = BraidWord.from_ints([1, 2])
    assert w.band_permutation() != tuple(range(4))
    assert sorted(w.permutation()) == [0, 1, 2, 3]


@settings(max_examples=60, deadline=None)
@given(words, st.integers(0, 11), st.sampled_from([1, 2, 3]))
def test_insertion_invariance(word, pos, gen):
    pos = min(pos, len(word))
    padded = word[:pos] + [gen, -gen] + word[pos:]
    a, b = _classify(BraidWord.from_ints(word)), _classify(BraidWord.from_ints(padded))
    assert a == b
    assert a.summary == b.summary


@settings(max_examples=60, deadline=None)
@given(words, st.sampled_from([1, 2, 3, -1, -2, -3]))
def test_conjugation_invariance(word, g):
    a = linking_invariants(BraidWord.from_ints(word))
    b = linking_invariants(BraidWord.from_ints([g] + word + [-g]))
    sa, sb = a.invariant_summary(), b.invariant_summary()
    assert sa[0] == sb[0]
    assert sa[2] == sb[2]
    assert sa[3] == sb[3]


def _word(lam, n_k):
    return extract_braid(track_bands(ModelParams(lam=lam), n_k))


@pytest.mark.parametrize("name", list(POINTS))
def test_points_frozen(name):
    tokens, label = EXPECTED[name]
    w = _word(POINTS[name], 512)
    assert w.tokens() == tokens
    assert _classify(w).label == label


def test_points_distinct_classes():
    assert len({label for _, label in EXPECTED.values()}) == 5


def test_hermitian_empty_braid():
    w = _word(0.0, 512)
    assert len(w) == 0
    assert _classify(w).label == "Unlink(4)"


def test_resolution_stability_point_c():
    a, b = _word(POINTS["c"], 512), _word(POINTS["c"], 2048)
    assert a.free_reduce().tokens() == b.free_reduce().tokens()
    assert linking_invariants(a).invariant_summary() == linking_invariants(b).invariant_summary()


def test_point_c_nontrivial_permutation():
    # stated expectation; the extracted word s2 s2 closes to a Hopf link with
    # identity permutation, see the decisions ledger
    w = _word(POINTS["c"], 512)
    assert len(w) > 0
    assert w.permutation() != (0, 1, 2, 3)


def test_point_e_components():
    inv = linking_invariants(_word(POINTS["e"], 512))
    assert inv.n_components == 4
    # every pair of the four rings is linked once
    off = inv.lk[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) == 1)


def test_crossings_ordered_in_k():
    w = _word(POINTS["d"], 512)
    ks = [g.k for g in w.generators]
    assert all(x <= y for x, y in zip(ks, ks[1:]))


def test_summary_json():
    w = BraidWord((Crossing(2, 1, 0.1), Crossing(2, 1, 0.2)))
    inv = linking_invariants(w)
    payload = json.loads(braid_summary_json(w, inv, classify_knot(inv)))
    assert payload["n_components"] == 4
    assert payload["knot_class"] == "HopfLinkPlus(4)"
    assert len(payload["linking_matrix"]) == 4
