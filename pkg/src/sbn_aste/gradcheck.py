"""Central finite-difference gradient checking.

The relative error of one coordinate is ``|a - n| / max(|a|, |n|, floor)``
where ``a`` is the autograd value and ``n`` the central difference. The floor
keeps coordinates whose true gradient is (numerically) zero from dividing
round-off by round-off.
"""

from __future__ import annotations

from typing import Callable, Sequence

import torch

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-8


def relative_error(analytic: float, numeric: float, floor: float = DEFAULT_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


@torch.no_grad()
def _central_difference(loss_fn, param: torch.Tensor, flat_index: int, step: float) -> float:
    flat = param.view(-1)
    orig = flat[flat_index].item()
    flat[flat_index] = orig + step
    plus = float(loss_fn())
    flat[flat_index] = orig - step
    minus = float(loss_fn())
    flat[flat_index] = orig
    return (plus - minus) / (2 * step)


def _check(loss_fn, named, step, max_coords, generator, floor) -> dict[str, float]:
    for _, p in named:
        if p.dtype != torch.float64:
            raise TypeError("gradient checks require float64 parameters")
    loss = loss_fn()
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    report = {}
    for (name, p), g in zip(named, grads):
        g_flat = (torch.zeros_like(p) if g is None else g).reshape(-1)
        n = p.numel()
        if max_coords is None or max_coords >= n:
            coords = range(n)
        else:
            coords = torch.randperm(n, generator=generator)[:max_coords].tolist()
        worst = 0.0
        for k in coords:
            numeric = _central_difference(loss_fn, p.data, k, step)
            worst = max(worst, relative_error(g_flat[k].item(), numeric, floor))
        report[name] = worst
    return report


def max_relative_error(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    step: float = DEFAULT_STEP,
    max_coords: int | None = None,
    generator: torch.Generator | None = None,
    floor: float = DEFAULT_FLOOR,
) -> float:
    """Compare autograd against central differences on (a sample of) coordinates.

    ``params`` must be float64 leaf tensors that ``loss_fn`` reads. When
    ``max_coords`` is given, that many coordinates per tensor are sampled
    uniformly with ``generator``; otherwise every coordinate is checked.
    """
    named = [(str(i), p) for i, p in enumerate(params)]
    report = _check(loss_fn, named, step, max_coords, generator, floor)
    return max(report.values(), default=0.0)


def module_grad_check(
    module: torch.nn.Module,
    loss_fn: Callable[[], torch.Tensor],
    step: float = DEFAULT_STEP,
    max_coords: int | None = None,
    generator: torch.Generator | None = None,
    floor: float = DEFAULT_FLOOR,
) -> dict[str, float]:
    """Per-parameter max relative error for every trainable tensor of ``module``."""
    named = [(n, p) for n, p in module.named_parameters() if p.requires_grad]
    return _check(loss_fn, named, step, max_coords, generator, floor)


def random_sentence(n_tokens: int, generator: torch.Generator, vocab_size: int = 12, n_triplets: int = 2):
    """A random token sequence with random short gold triplets, for checks and tests."""
    from .data import SENTIMENTS, GoldTriplet, Sentence

    def rand(hi: int) -> int:
        return int(torch.randint(hi, (1,), generator=generator))

    tokens = tuple(f"w{rand(vocab_size)}" for _ in range(n_tokens))
    gold = {}
    for _ in range(n_triplets):
        a0, o0 = rand(n_tokens), rand(n_tokens)
        a1 = min(n_tokens - 1, a0 + rand(2))
        o1 = min(n_tokens - 1, o0 + rand(2))
        t = GoldTriplet(tuple(range(a0, a1 + 1)), tuple(range(o0, o1 + 1)), SENTIMENTS[rand(3)])
        gold[t.key()] = t
    return Sentence("gradcheck", tokens, tuple(gold.values()))


def run_suite(seed: int = 0, max_coords: int = 40) -> dict[str, float]:
    """Max relative gradient error for every differentiable loss in the model.

    Covers each separation-loss variant w.r.t. span representations, each
    direction loss and the combined objective w.r.t. every model parameter
    (toy encoder included). Runs in float64 with dropout disabled.
    """
    from .config import from_dict
    from .decoder import A2O, O2A, direction_labels, direction_loss
    from .encoder import Vocabulary
    from .model import SpanBidirectionalNetwork
    from .separation import VARIANTS, SeparationConfig, separation_loss
    from .spans import build_lattice

    gen = torch.Generator().manual_seed(seed)
    report: dict[str, float] = {}

    enc = torch.randn(6, 8, generator=gen, dtype=torch.float64)
    lattice = build_lattice(enc, 3, "mean")
    for variant in VARIANTS[:-1]:
        reps = lattice.reps.detach().clone().requires_grad_(True)
        cfg = SeparationConfig(variant)
        report[f"separation.{variant}"] = max_relative_error(
            lambda: separation_loss(lattice.with_reps(reps), cfg), [reps]
        )

    sentence = random_sentence(6, gen)
    config = from_dict({"encoder.d": 8, "encoder.dropout": 0.0, "dropout": 0.0, "max_span_length": 3, "seed": seed})
    torch.manual_seed(seed)
    model = SpanBidirectionalNetwork(config, Vocabulary.build([sentence.tokens])).double().eval()

    def direction_fn(direction):
        def fn():
            lat = model.lattice(sentence)
            labels = direction_labels(lat, sentence.gold, direction)
            out = model.decoder.decode(lat.reps, direction, labels.trigger_set)
            return direction_loss(out, labels)

        return fn

    for direction in (A2O, O2A):
        errs = module_grad_check(model, direction_fn(direction), max_coords=max_coords, generator=gen)
        report[f"direction_loss.{direction}"] = max(errs.values())
    errs = module_grad_check(model, lambda: model.losses(sentence).total, max_coords=max_coords, generator=gen)
    report["total_loss"] = max(errs.values())
    return report
