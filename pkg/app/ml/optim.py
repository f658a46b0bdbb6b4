"""
Look-Ahead wrapper around any torch optimiser (used over RAdam).
"""

from typing import Iterable, List

import torch
from torch import nn


class Lookahead:
    """
    Every `k` inner steps the slow weights move `alpha` of the way towards the
    fast weights, and the fast weights are reset to the slow ones.
    """

    def __init__(self, optimizer: torch.optim.Optimizer, k: int = 5, alpha: float = 0.5):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        self.optimizer = optimizer
        self.k = k
        self.alpha = alpha
        self.step_count = 0
        self.slow_weights: List[List[torch.Tensor]] = [
            [p.detach().clone() for p in group["params"]] for group in optimizer.param_groups
        ]

    @property
    def param_groups(self):
        return self.optimizer.param_groups

    def zero_grad(self, set_to_none: bool = True) -> None:
        self.optimizer.zero_grad(set_to_none=set_to_none)

    @torch.no_grad()
    def _sync(self) -> None:
        for group, slow_group in zip(self.optimizer.param_groups, self.slow_weights):
            for fast, slow in zip(group["params"], slow_group):
                slow.add_(fast.detach() - slow, alpha=self.alpha)
                fast.copy_(slow)

    def step(self, closure=None):
        loss = self.optimizer.step(closure)
        self.step_count += 1
        if self.step_count % self.k == 0:
            self._sync()
        return loss

    def state_dict(self) -> dict:
        return {
            "optimizer": self.optimizer.state_dict(),
            "slow_weights": self.slow_weights,
            "step_count": self.step_count,
        }

    def load_state_dict(self, state: dict) -> None:
        self.optimizer.load_state_dict(state["optimizer"])
        self.slow_weights = state["slow_weights"]
        self.step_count = state["step_count"]


def build_optimizer(params: Iterable[nn.Parameter], lr: float, k: int = 5, alpha: float = 0.5) -> Lookahead:
    """RAdam wrapped in Look-Ahead."""
    return Lookahead(torch.optim.RAdam(params, lr=lr), k=k, alpha=alpha)
