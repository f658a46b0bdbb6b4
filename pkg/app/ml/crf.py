"""
Linear-chain conditional random field over room emissions.
Log-domain forward/backward, negative log-likelihood, Viterbi decoding and marginals.
Tensors are batched (B, T, m); unbatched (T, m) inputs are accepted too.
"""

from typing import Dict, Optional, Sequence, Tuple

import torch
from torch import nn

from app.models.schemas import ROOMS


def _batched(emissions: torch.Tensor, tags: Optional[torch.Tensor] = None):
    single = emissions.dim() == 2
    if single:
        emissions = emissions.unsqueeze(0)
        if tags is not None:
            tags = tags.unsqueeze(0)
    if emissions.dim() != 3 or emissions.shape[1] < 1:
        raise ValueError(f"emissions must be (B, T, m) with T >= 1, got {tuple(emissions.shape)}")
    return emissions, tags, single


def _check_tags(tags: torch.Tensor, n_tags: int) -> None:
    if tags.numel() and (int(tags.min()) < 0 or int(tags.max()) >= n_tags):
        raise ValueError(f"gold labels must lie in [0, {n_tags}), got range [{int(tags.min())}, {int(tags.max())}]")


def forward_log_alphas(emissions: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor) -> torch.Tensor:
    """alpha[b, t, j] = log sum over paths ending in j at t."""
    alphas = [start + emissions[:, 0]]
    for t in range(1, emissions.shape[1]):
        prev = alphas[-1].unsqueeze(2) + transitions.unsqueeze(0)
        alphas.append(torch.logsumexp(prev, dim=1) + emissions[:, t])
    return torch.stack(alphas, dim=1)


def backward_log_betas(emissions: torch.Tensor, transitions: torch.Tensor) -> torch.Tensor:
    """beta[b, t, i] = log sum over continuations from i at t (no end scores)."""
    T = emissions.shape[1]
    betas = [torch.zeros_like(emissions[:, 0])]
    for t in range(T - 2, -1, -1):
        nxt = transitions.unsqueeze(0) + (emissions[:, t + 1] + betas[-1]).unsqueeze(1)
        betas.append(torch.logsumexp(nxt, dim=2))
    return torch.stack(betas[::-1], dim=1)


def log_partition(emissions: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor) -> torch.Tensor:
    """log Z per sequence by the forward algorithm."""
    emissions, _, single = _batched(emissions)
    log_z = torch.logsumexp(forward_log_alphas(emissions, transitions, start)[:, -1], dim=1)
    return log_z[0] if single else log_z


def log_partition_backward(emissions: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor) -> torch.Tensor:
    """log Z per sequence by the backward algorithm."""
    emissions, _, single = _batched(emissions)
    betas = backward_log_betas(emissions, transitions)
    log_z = torch.logsumexp(start + emissions[:, 0] + betas[:, 0], dim=1)
    return log_z[0] if single else log_z


def path_score(
    emissions: torch.Tensor, tags: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor
) -> torch.Tensor:
    """start[y1] + sum_t e_t[y_t] + sum_{t>=2} trans[y_{t-1}, y_t]."""
    emissions, tags, single = _batched(emissions, tags)
    tags = tags.long()
    emit = emissions.gather(2, tags.unsqueeze(2)).squeeze(2).sum(dim=1)
    trans = transitions[tags[:, :-1], tags[:, 1:]].sum(dim=1)
    score = start[tags[:, 0]] + emit + trans
    return score[0] if single else score


def crf_negative_log_likelihood(
    emissions: torch.Tensor, tags: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor
) -> torch.Tensor:
    """
    log Z minus the gold path score, one value per sequence.

    Raises:
        ValueError: A gold label lies outside the room range
    """
    _check_tags(tags, emissions.shape[-1])
    return log_partition(emissions, transitions, start) - path_score(emissions, tags, transitions, start)


def viterbi_decode(
    emissions: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Highest-scoring path per sequence; ties resolve to the lowest room index.

    Returns:
        (paths, scores): (B, T) long tensor and (B,) best scores
    """
    emissions, _, single = _batched(emissions)
    B, T, m = emissions.shape
    score = start + emissions[:, 0]
    backpointers = []
    for t in range(1, T):
        cand = score.unsqueeze(2) + transitions.unsqueeze(0)
        best_prev = cand.argmax(dim=1)
        score = cand.gather(1, best_prev.unsqueeze(1)).squeeze(1) + emissions[:, t]
        backpointers.append(best_prev)
    last = score.argmax(dim=1)
    best = score.gather(1, last.unsqueeze(1)).squeeze(1)
    path = [last]
    for bp in reversed(backpointers):
        last = bp.gather(1, last.unsqueeze(1)).squeeze(1)
        path.append(last)
    paths = torch.stack(path[::-1], dim=1)
    if single:
        return paths[0], best[0]
    return paths, best


def crf_marginals(
    emissions: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Forward-backward posteriors.

    Returns:
        (unary, pairwise): (B, T, m) step marginals and (B, T-1, m, m) transition marginals
    """
    emissions, _, single = _batched(emissions)
    alphas = forward_log_alphas(emissions, transitions, start)
    betas = backward_log_betas(emissions, transitions)
    log_z = torch.logsumexp(alphas[:, -1], dim=1)
    unary = torch.exp(alphas + betas - log_z[:, None, None])
    pair_log = (
        alphas[:, :-1].unsqueeze(3)
        + transitions[None, None]
        + (emissions[:, 1:] + betas[:, 1:]).unsqueeze(2)
        - log_z[:, None, None, None]
    )
    pairwise = torch.exp(pair_log)
    if single:
        return unary[0], pairwise[0]
    return unary, pairwise


def crf_gradients(
    emissions: torch.Tensor, tags: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor
) -> Dict[str, torch.Tensor]:
    """
    Closed-form gradients of the summed NLL: expected minus gold feature counts.

    Returns:
        dict: "emissions" (same shape as input), "transitions" (m, m), "start" (m,)
    """
    _check_tags(tags, emissions.shape[-1])
    batched, btags, single = _batched(emissions, tags)
    btags = btags.long()
    m = batched.shape[-1]
    unary, pairwise = crf_marginals(batched, transitions, start)
    gold = torch.nn.functional.one_hot(btags, m).to(batched.dtype)
    gold_pairs = gold[:, :-1].unsqueeze(3) * gold[:, 1:].unsqueeze(2)
    d_emissions = unary - gold
    return {
        "emissions": d_emissions[0] if single else d_emissions,
        "transitions": (pairwise - gold_pairs).sum(dim=(0, 1)),
        "start": (unary[:, 0] - gold[:, 0]).sum(dim=0),
    }


def format_transitions(transitions: torch.Tensor, labels: Sequence[str] = tuple(r.value for r in ROOMS)) -> str:
    """Room-by-room transition scores as an aligned text table (rows: from, columns: to)."""
    scores = transitions.detach().cpu().double()
    width = max(9, max(len(label) for label in labels) + 1)
    lines = ["from\\to".ljust(width) + "".join(label.rjust(width) for label in labels)]
    for i, label in enumerate(labels):
        lines.append(label.ljust(width) + "".join(f"{float(scores[i, j]):{width}.3f}" for j in range(len(labels))))
    return "\n".join(lines) + "\n"


class LinearChainCRF(nn.Module):
    """Learnable transition and start scores, zero-initialised, no end scores."""

    def __init__(self, n_tags: int):
        super().__init__()
        self.n_tags = n_tags
        self.transitions = nn.Parameter(torch.zeros(n_tags, n_tags))
        self.start = nn.Parameter(torch.zeros(n_tags))

    def extra_repr(self) -> str:
        return f"n_tags={self.n_tags}"

    def forward(self, emissions: torch.Tensor, tags: torch.Tensor) -> torch.Tensor:
        """Per-sequence negative log-likelihood."""
        return crf_negative_log_likelihood(emissions, tags, self.transitions, self.start)

    def decode(self, emissions: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return viterbi_decode(emissions, self.transitions, self.start)

    def marginals(self, emissions: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return crf_marginals(emissions, self.transitions, self.start)
