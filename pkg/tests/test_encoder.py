import pytest
import torch

from sbn_aste.encoder import (
    EncoderConfig,
    PretrainedEncoder,
    SequenceTooLongError,
    ToyEncoder,
    Vocabulary,
    aggregate_subwords,
)
from sbn_aste.gradcheck import module_grad_check

TOKENS = "the hot dogs are top notch .".split()


def toy(d=64, **kw):
    torch.manual_seed(0)
    return ToyEncoder(EncoderConfig(d=d, **kw), Vocabulary.build([TOKENS]))


def test_shape_and_finite():
    out = toy().encode(TOKENS, "eval")
    assert out.shape == (7, 64) and torch.isfinite(out).all()


def test_eval_deterministic_train_stochastic():
    enc = toy(dropout=0.5)
    assert torch.equal(enc.encode(TOKENS, "eval"), enc.encode(TOKENS, "eval"))
    assert not torch.equal(enc.encode(TOKENS, "train"), enc.encode(TOKENS, "train"))


def test_too_long_is_an_error():
    with pytest.raises(SequenceTooLongError):
        toy(max_length=5).encode(TOKENS)


def test_unknown_tokens_map_to_unk():
    vocab = Vocabulary.build([["a", "b", "a"]])
    assert vocab.lookup(["a", "zzz"]) == [2, 1]
    assert Vocabulary.build([["b", "a"]], max_size=3).itos == ["<pad>", "<unk>", "a"]


def test_gradient_matches_finite_differences():
    enc = toy(d=6, dropout=0.0, depth=2).double()
    weights = torch.randn(7, 6, dtype=torch.float64)
    errs = module_grad_check(enc, lambda: (enc.encode(TOKENS, "eval") * weights).sum() + (enc.encode(TOKENS) ** 2).sum())
    assert set(errs) == {"embedding.weight", "convs.0.weight", "convs.0.bias", "convs.1.weight", "convs.1.bias"}
    assert max(errs.values()) <= 1e-4


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(d=0)
    with pytest.raises(ValueError):
        EncoderConfig(dropout=1.0)
    with pytest.raises(ValueError):
        EncoderConfig(kind="lstm")


def test_aggregate_subwords_rules():
    hidden = torch.arange(12.0).reshape(6, 2)
    word_ids = [None, 0, 0, 1, 2, None]
    assert aggregate_subwords(hidden, word_ids, 3, "first").tolist() == [[2, 3], [6, 7], [8, 9]]
    assert aggregate_subwords(hidden, word_ids, 3, "mean").tolist() == [[3, 4], [6, 7], [8, 9]]


@pytest.fixture
def tiny_bert(tmp_path):
    transformers = pytest.importorskip("transformers")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "the", "hot", "dog", "##s", "are", "top", "not", "##ch", "."]
    (tmp_path / "vocab.txt").write_text("\n".join(vocab))
    tok = transformers.BertTokenizerFast(str(tmp_path / "vocab.txt"), do_lower_case=False, model_max_length=16)
    cfg = transformers.BertConfig(
        vocab_size=len(vocab), hidden_size=8, num_hidden_layers=1, num_attention_heads=2,
        intermediate_size=16, max_position_embeddings=16,
    )
    torch.manual_seed(0)
    return transformers.BertModel(cfg), tok


@pytest.mark.parametrize("rule", ["first", "mean"])
def test_pretrained_adapter_preserves_token_count(tiny_bert, rule):
    model, tok = tiny_bert
    enc = PretrainedEncoder(EncoderConfig(kind="pretrained_adapter", d=8, aggregation=rule), model, tok)
    out = enc.encode(TOKENS, "eval")
    assert out.shape == (7, 8)
    assert torch.equal(out, enc.encode(TOKENS, "eval"))


def test_pretrained_adapter_projection_and_length(tiny_bert):
    model, tok = tiny_bert
    enc = PretrainedEncoder(EncoderConfig(kind="pretrained_adapter", d=5), model, tok)
    assert enc.encode(TOKENS).shape == (7, 5)
    with pytest.raises(SequenceTooLongError):
        enc.encode(TOKENS * 3)
