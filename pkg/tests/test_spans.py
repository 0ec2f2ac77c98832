import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st
from oracles import brute_force_neighbors, brute_force_spans

from sbn_aste.data import parse_dataset
from sbn_aste.spans import Span, build_lattice, enumerate_spans, pool_span, span_count


def test_small_enumerations():
    assert enumerate_spans(3, 8) == [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    assert enumerate_spans(1, 8) == [(0, 0)]
    assert len(enumerate_spans(10, 3)) == len(brute_force_spans(10, 3)) == 27


def test_strict_eq2_admits_one_more_token():
    spans = enumerate_spans(10, 3, "strict_eq2")
    assert max(s.length for s in spans) == 4
    assert spans == [Span(*s) for s in brute_force_spans(10, 4)]


@pytest.mark.parametrize("n", [1, 2, 7, 13])
@pytest.mark.parametrize("cap", [1, 3, 8])
def test_enumeration_matches_brute_force(n, cap):
    assert enumerate_spans(n, cap) == brute_force_spans(n, cap)
    assert span_count(n, cap) == len(brute_force_spans(n, cap))


def test_pooling():
    enc = torch.tensor([[1.0, 4.0], [3.0, 2.0]])
    assert pool_span(enc, Span(0, 1), "max").tolist() == [3.0, 4.0]
    assert pool_span(enc, Span(0, 1), "mean").tolist() == [2.0, 3.0]
    assert pool_span(enc, Span(0, 1), "endpoint_concat").tolist() == [1.0, 4.0, 3.0, 2.0]
    for method in ("max", "mean"):
        assert pool_span(enc, Span(1, 1), method).tolist() == [3.0, 2.0]
    with pytest.raises(ValueError):
        pool_span(enc, Span(0, 0), "sum")


@pytest.mark.parametrize("method", ["max", "mean", "endpoint_concat"])
def test_lattice_reps_match_pool_span(method, gen):
    enc = torch.randn(7, 5, generator=gen)
    lat = build_lattice(enc, 4, method)
    expected = torch.stack([pool_span(enc, s, method) for s in lat.spans])
    assert torch.equal(lat.reps, expected)


@given(st.integers(1, 6), st.data())
def test_max_pool_permutation_invariant_and_idempotent(n, data):
    torch.manual_seed(data.draw(st.integers(0, 1000)))
    rows = torch.randn(n, 3)
    perm = torch.randperm(n)
    full = Span(0, n - 1)
    pooled = pool_span(rows, full, "max")
    assert torch.equal(pooled, pool_span(rows[perm], full, "max"))
    doubled = torch.cat([rows, rows])
    assert torch.equal(pooled, pool_span(doubled, Span(0, 2 * n - 1), "max"))


def test_neighbors_hot_dogs():
    lat = build_lattice(torch.zeros(3, 2), 8)
    i, j = lat.index((0, 1)), lat.index((1, 2))
    assert j in lat.neighbors[i] and i in lat.neighbors[j]
    assert lat.index((2, 2)) not in lat.neighbors[lat.index((0, 0))]


def test_neighbors_match_brute_force():
    lat = build_lattice(torch.zeros(6, 2), 3)
    assert list(lat.neighbors) == brute_force_neighbors(list(lat.spans))
    edges = {tuple(e) for e in lat.edges.tolist()}
    assert edges == {(i, j) for i, nb in enumerate(lat.neighbors) for j in nb if i < j}


@given(st.integers(1, 14), st.integers(1, 6))
def test_neighbor_relation_symmetric_irreflexive(n, cap):
    lat = build_lattice(torch.zeros(n, 1), cap)
    for i, nb in enumerate(lat.neighbors):
        assert i not in nb
        assert all(i in lat.neighbors[j] for j in nb)


def test_gold_terms_appear_once(laptop20_path):
    for s in parse_dataset(laptop20_path):
        lat = build_lattice(torch.zeros(len(s), 1), 8)
        for t in s.gold:
            for span in (t.aspect_span, t.opinion_span):
                assert sum(1 for x in lat.spans if tuple(x) == span) == 1
