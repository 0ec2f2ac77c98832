import math

import numpy as np
import pytest
import torch
from oracles import decode_oracle

from sbn_aste.data import GoldTriplet
from sbn_aste.decoder import (
    A2O,
    O2A,
    BidirectionalDecoder,
    ConfigurationError,
    DirectionLabels,
    LabelAlignmentError,
    decode_direction,
    direction_labels,
    direction_loss,
    total_loss,
)
from sbn_aste.gradcheck import module_grad_check
from sbn_aste.spans import build_lattice


def make(dim=4, seed=0, n=4, cap=3):
    torch.manual_seed(seed)
    dec = BidirectionalDecoder(dim, dropout=0.0).double().eval()
    lat = build_lattice(torch.randn(n, dim, dtype=torch.float64), cap)
    return dec, lat


def numpy_params(dec):
    return {k: v.detach().numpy() for k, v in dec.state_dict().items()}


@pytest.mark.parametrize("direction", [A2O, O2A])
def test_probability_rows_sum_to_one(direction):
    dec, lat = make()
    out = decode_direction(lat, dec, direction, trigger_set_override=range(len(lat)))
    assert torch.allclose(out.trigger_probs.sum(-1), torch.ones(len(lat), dtype=torch.float64), atol=1e-6)
    assert torch.allclose(out.partner_probs.sum(-1), torch.ones(len(lat), len(lat), dtype=torch.float64), atol=1e-6)
    assert ((out.partner_probs > 0) & (out.partner_probs < 1)).all()


def test_zero_heads_give_uniform():
    dec, lat = make()
    with torch.no_grad():
        for head in (dec.ao_trigger, dec.ao_partner, dec.oa_trigger, dec.oa_partner):
            head.weight.zero_()
    for direction in (A2O, O2A):
        out = decode_direction(lat, dec, direction, trigger_set_override=[0, 2])
        assert torch.allclose(out.trigger_probs, torch.full_like(out.trigger_probs, 0.5))
        assert torch.allclose(out.partner_probs, torch.full_like(out.partner_probs, 0.25))
        # Equal logits are a tie and ties resolve to Invalid.
        assert decode_direction(lat, dec, direction).trigger_set == ()


@pytest.mark.parametrize("direction", [A2O, O2A])
@pytest.mark.parametrize("seed", range(3))
def test_matches_transliteration(direction, seed):
    dec, lat = make(seed=seed, n=2, cap=2)  # m = 3
    params = numpy_params(dec)
    reps = lat.reps.numpy()
    for override in (None, [0, 2], [1]):
        out = decode_direction(lat, dec, direction, override)
        trig, triggers, partner = decode_oracle(params, reps, direction, override)
        assert list(out.trigger_set) == triggers
        np.testing.assert_allclose(out.trigger_logits.detach().numpy(), trig, rtol=0, atol=1e-10)
        np.testing.assert_allclose(out.partner_logits.detach().numpy(), partner, rtol=0, atol=1e-10)


def test_shared_ffnn():
    dec, lat = make()
    ffnns = [m for m in dec.modules() if type(m).__name__ == "FFNN"]
    assert len(ffnns) == 2
    ao = decode_direction(lat, dec, A2O, [0])
    oa = decode_direction(lat, dec, O2A, [0])
    with torch.no_grad():
        dec.aspect_ffnn.out.bias.add_(1.0)
    ao2 = decode_direction(lat, dec, A2O, [0])
    oa2 = decode_direction(lat, dec, O2A, [0])
    # Aspect features feed the a2o trigger head and the o2a partner head.
    assert not torch.allclose(ao.trigger_logits, ao2.trigger_logits)
    assert not torch.allclose(oa.partner_logits, oa2.partner_logits)
    assert torch.equal(ao.partner_logits, ao2.partner_logits)
    assert torch.equal(oa.trigger_logits, oa2.trigger_logits)


def test_trigger_argmax_shift_invariant():
    dec, lat = make(seed=3)
    out = decode_direction(lat, dec, A2O)
    shifted = out.trigger_logits + 5.0
    valid = shifted[:, 0] > shifted[:, 1]
    assert tuple(torch.nonzero(valid).flatten().tolist()) == out.trigger_set


def test_dimension_mismatch_is_configuration_error():
    with pytest.raises(ConfigurationError):
        BidirectionalDecoder(4, ffnn_dim=5)
    dec = BidirectionalDecoder(4)
    with pytest.raises(ConfigurationError):
        dec.decode(torch.zeros(3, 5), A2O)


def test_gate_clamp_keeps_outputs_finite():
    dec, lat = make()
    big = lat.with_reps(lat.reps * 0 - 1e3)
    out = decode_direction(big, dec, A2O, [0, 1])
    assert torch.isfinite(out.partner_logits).all()


def gold_for(lat):
    return [
        GoldTriplet((0,), (1, 2), "POS"),
        GoldTriplet((0,), (3,), "NEG"),
        GoldTriplet((2,), (3,), "NEU"),
    ]


def test_labels_layout():
    _, lat = make(n=4, cap=3)
    labels = direction_labels(lat, gold_for(lat), A2O)
    assert labels.trigger_set == (lat.index((0, 0)), lat.index((2, 2)))
    assert int((labels.trigger_labels == 0).sum()) == 2
    row = labels.partner_labels[0]
    assert row[lat.index((1, 2))] == 0 and row[lat.index((3, 3))] == 2
    assert int((row != 3).sum()) == 2
    o2a = direction_labels(lat, gold_for(lat), O2A)
    assert o2a.trigger_set == (lat.index((1, 2)), lat.index((3, 3)))


def test_perfect_predictions_zero_loss():
    dec, lat = make()
    labels = direction_labels(lat, gold_for(lat), A2O)
    out = decode_direction(lat, dec, A2O, labels.trigger_set)
    out.trigger_logits = torch.nn.functional.one_hot(labels.trigger_labels, 2).double() * 1e4
    out.partner_logits = torch.nn.functional.one_hot(labels.partner_labels, 4).double() * 1e4
    assert direction_loss(out, labels).item() == 0.0


def test_uniform_predictions_closed_form():
    dec, lat = make()
    with torch.no_grad():
        for head in (dec.ao_trigger, dec.ao_partner):
            head.weight.zero_()
    labels = direction_labels(lat, gold_for(lat), A2O)
    out = decode_direction(lat, dec, A2O, labels.trigger_set)
    m, k = len(lat), len(labels.trigger_set)
    assert direction_loss(out, labels).item() == pytest.approx(m * math.log(2) + m * k * math.log(4), rel=1e-12)


def test_misaligned_labels():
    dec, lat = make()
    labels = direction_labels(lat, gold_for(lat), A2O)
    out = decode_direction(lat, dec, A2O, labels.trigger_set[:1])
    with pytest.raises(LabelAlignmentError):
        direction_loss(out, labels)
    out = decode_direction(lat, dec, A2O, labels.trigger_set)
    short = DirectionLabels(labels.trigger_labels[:-1], labels.trigger_set, labels.partner_labels)
    with pytest.raises(LabelAlignmentError):
        direction_loss(out, short)


@pytest.mark.parametrize("direction", [A2O, O2A])
def test_direction_loss_gradient(direction):
    dec, lat = make(seed=5)
    labels = direction_labels(lat, gold_for(lat), direction)
    errs = module_grad_check(dec, lambda: direction_loss(decode_direction(lat, dec, direction, labels.trigger_set), labels))
    assert max(errs.values()) <= 1e-4


def test_total_loss():
    assert total_loss(0, 0, 0) == 0
    assert total_loss(0.45, 1.2, 0.8) == pytest.approx(2.45)


def test_teacher_forced_loss_deterministic():
    dec, lat = make(seed=9)
    labels = direction_labels(lat, gold_for(lat), O2A)
    a = direction_loss(decode_direction(lat, dec, O2A, labels.trigger_set), labels)
    b = direction_loss(decode_direction(lat, dec, O2A, labels.trigger_set), labels)
    assert a.item() == b.item()
