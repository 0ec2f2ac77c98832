"""Similar-span separation loss.

For every span ``i`` with a non-empty overlap set ``G_i`` the loss adds
``log(1 + 2 / (D_i + eps))`` where ``D_i`` aggregates a divergence between
span ``i`` and each of its neighbours. Small divergence gives a large
penalty, so minimising the loss pushes overlapping spans apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .spans import SpanLattice

VARIANTS = ("kl", "js", "euclidean", "cosine", "none")


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SeparationConfig:
    variant: str = "kl"
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"loss variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def _edge_divergence(reps: torch.Tensor, edges: torch.Tensor, variant: str) -> torch.Tensor:
    """Symmetric divergence for each neighbouring pair ``(i, j)``.

    For ``kl`` this is ``KL(p_i||p_j) + KL(p_j||p_i)`` over feature-softmaxed
    representations; ``js`` is doubled to sit on the same scale.
    """
    a, b = reps[edges[:, 0]], reps[edges[:, 1]]
    if variant == "kl":
        la, lb = F.log_softmax(a, dim=-1), F.log_softmax(b, dim=-1)
        return ((la.exp() - lb.exp()) * (la - lb)).sum(-1)
    if variant == "js":
        la, lb = F.log_softmax(a, dim=-1), F.log_softmax(b, dim=-1)
        pa, pb = la.exp(), lb.exp()
        lm = torch.log((pa + pb) / 2)
        js = 0.5 * (pa * (la - lm)).sum(-1) + 0.5 * (pb * (lb - lm)).sum(-1)
        return 2.0 * js
    if variant == "euclidean":
        sq = ((a - b) ** 2).sum(-1)
        positive = sq > 0
        # sqrt has an infinite derivative at 0; identical pairs get a zero subgradient.
        safe = torch.where(positive, sq, torch.ones_like(sq))
        return torch.where(positive, safe.sqrt(), torch.zeros_like(sq))
    if variant == "cosine":
        return 1.0 - F.cosine_similarity(a, b, dim=-1, eps=1e-12)
    raise ValueError(f"no divergence for variant {variant!r}")


def span_divergences(lattice: SpanLattice, variant: str = "kl") -> torch.Tensor:
    """``D_i`` for every span (zero for spans without neighbours)."""
    reps = lattice.reps
    m = reps.shape[0]
    if lattice.edges.numel() == 0:
        return reps.new_zeros(m)
    per_edge = _edge_divergence(reps, lattice.edges, variant)
    out = reps.new_zeros(m)
    out = out.index_add(0, lattice.edges[:, 0], per_edge)
    return out.index_add(0, lattice.edges[:, 1], per_edge)


def separation_loss(lattice: SpanLattice, config: SeparationConfig = SeparationConfig()) -> torch.Tensor:
    reps = lattice.reps
    if not torch.isfinite(reps).all():
        raise NumericError("span representations contain non-finite entries")
    if config.variant == "none" or lattice.edges.numel() == 0:
        # Keep the graph connected so callers can always backpropagate.
        return (reps * 0.0).sum()
    div = span_divergences(lattice, config.variant)
    has_neighbors = torch.zeros(reps.shape[0], dtype=torch.bool, device=reps.device)
    has_neighbors[lattice.edges.flatten()] = True
    terms = torch.log1p(2.0 / (div[has_neighbors] + config.epsilon))
    return terms.sum()


def separation_grad_check(
    lattice: SpanLattice,
    config: SeparationConfig = SeparationConfig(),
    step: float = 1e-5,
    max_coords: int | None = None,
    generator: torch.Generator | None = None,
) -> float:
    """Max relative error between autograd and central differences w.r.t. ``reps``."""
    from .gradcheck import max_relative_error

    reps = lattice.reps.detach().to(torch.float64).clone().requires_grad_(True)

    def loss_fn():
        return separation_loss(lattice.with_reps(reps), config)

    return max_relative_error(loss_fn, [reps], step=step, max_coords=max_coords, generator=generator)
