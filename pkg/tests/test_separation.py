import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import separation_loss_oracle

from sbn_aste.separation import NumericError, SeparationConfig, separation_grad_check, separation_loss, span_divergences
from sbn_aste.spans import Span, SpanLattice, build_lattice, overlap_structure


def pair_lattice(reps):
    spans = (Span(0, 0), Span(0, 1))
    neighbors, edges = overlap_structure(spans)
    return SpanLattice(spans, reps, neighbors, edges, 2)


def test_identical_pair():
    lat = pair_lattice(torch.ones(2, 3, dtype=torch.float64))
    eps = 1e-8
    assert separation_loss(lat, SeparationConfig("kl", eps)).item() == pytest.approx(2 * math.log(1 + 2 / eps))


def test_two_point_distributions():
    p, q = (0.9, 0.1), (0.1, 0.9)
    sym = sum(a * math.log(a / b) for a, b in zip(p, q)) + sum(b * math.log(b / a) for a, b in zip(p, q))
    assert sym == pytest.approx(1.6 * math.log(9))
    term = math.log(1 + 2 / sym)
    assert term == pytest.approx(0.4503, abs=1e-4)
    lat = pair_lattice(torch.log(torch.tensor([p, q], dtype=torch.float64)))
    with_eps = math.log(1 + 2 / (sym + 1e-8))
    assert separation_loss(lat).item() == pytest.approx(2 * with_eps, rel=1e-12)


def test_disjoint_spans_give_zero():
    lat = build_lattice(torch.randn(5, 4), 1)
    for variant in ("kl", "js", "euclidean", "cosine", "none"):
        assert separation_loss(lat, SeparationConfig(variant)).item() == 0.0


def test_matches_loop_oracle(gen):
    enc = torch.randn(6, 5, generator=gen, dtype=torch.float64)
    lat = build_lattice(enc, 3)
    expected = separation_loss_oracle(lat.reps.numpy(), lat.neighbors)
    assert separation_loss(lat).item() == pytest.approx(expected, rel=1e-12)


def test_non_finite_raises():
    lat = build_lattice(torch.tensor([[float("nan"), 0.0], [1.0, 2.0]]), 2)
    with pytest.raises(NumericError):
        separation_loss(lat)


@pytest.mark.parametrize("variant", ["kl", "js", "euclidean", "cosine"])
def test_grad_check(variant, gen):
    lat = build_lattice(torch.randn(4, 6, generator=gen, dtype=torch.float64), 3, "mean")
    assert separation_grad_check(lat, SeparationConfig(variant)) <= 1e-4


def test_none_variant_has_zero_gradient(gen):
    reps = torch.randn(6, 3, generator=gen, dtype=torch.float64, requires_grad=True)
    lat = build_lattice(torch.zeros(3, 3), 3).with_reps(reps)
    loss = separation_loss(lat, SeparationConfig("none"))
    loss.backward()
    assert loss.item() == 0.0 and torch.count_nonzero(reps.grad) == 0


def test_euclidean_equal_reps_finite_gradient():
    reps = torch.ones(2, 3, dtype=torch.float64, requires_grad=True)
    loss = separation_loss(pair_lattice(reps), SeparationConfig("euclidean"))
    loss.backward()
    assert torch.isfinite(loss) and torch.isfinite(reps.grad).all()


@pytest.mark.parametrize("variant", ["kl", "js"])
def test_softmax_shift_invariance(variant, gen):
    lat = build_lattice(torch.randn(5, 4, generator=gen, dtype=torch.float64), 3)
    shift = torch.arange(len(lat), dtype=torch.float64)[:, None] * 3.7
    base = separation_loss(lat, SeparationConfig(variant))
    shifted = separation_loss(lat.with_reps(lat.reps + shift), SeparationConfig(variant))
    assert shifted.item() == pytest.approx(base.item(), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 20.0), st.floats(0.01, 20.0))
def test_monotone_in_divergence(a, b):
    # Two-point distributions p=(s, -s) and q=(-s, s); larger s means larger divergence.
    lo, hi = sorted((a, b))
    if hi - lo < 1e-3:
        return

    def loss_at(s):
        reps = torch.tensor([[s, -s], [-s, s]], dtype=torch.float64)
        lat = pair_lattice(reps)
        return span_divergences(lat)[0].item(), separation_loss(lat).item()

    d_lo, l_lo = loss_at(lo)
    d_hi, l_hi = loss_at(hi)
    assert d_hi > d_lo and l_hi < l_lo


@pytest.mark.parametrize("variant", ["kl", "js", "euclidean", "cosine"])
def test_non_negative_and_positive_with_neighbors(variant, gen):
    lat = build_lattice(torch.randn(5, 4, generator=gen), 2)
    assert separation_loss(lat, SeparationConfig(variant)).item() > 0


def test_config_validation():
    with pytest.raises(ValueError):
        SeparationConfig("mahalanobis")
    with pytest.raises(ValueError):
        SeparationConfig("kl", 0.0)



def test_coincident_reps_have_zero_gradient():
    # Nested spans under max pooling often share a representation exactly.
    # The divergence is stationary there, so the exact gradient is zero while
    # the loss stays finite through epsilon (with curvature of order 1/epsilon).
    lat = build_lattice(torch.tensor([[5.0, 5.0, 1.0], [0.0, 1.0, 0.0]], dtype=torch.float64), 2)
    i, j = lat.index((0, 0)), lat.index((0, 1))
    assert torch.equal(lat.reps[i], lat.reps[j])
    reps = pair_lattice(lat.reps[[i, j]]).reps.clone().requires_grad_(True)
    loss = separation_loss(pair_lattice(reps))
    loss.backward()
    assert loss.item() == pytest.approx(2 * math.log(1 + 2 / 1e-8))
    assert torch.count_nonzero(reps.grad) == 0
