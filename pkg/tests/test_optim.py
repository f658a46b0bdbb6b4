"""
Look-Ahead optimiser tests.
Run with: pytest tests/test_optim.py -v
"""

import pytest
import torch

from app.ml.optim import Lookahead, build_optimizer


def unit_gradient_steps(optimizer, param, n):
    for _ in range(n):
        optimizer.zero_grad()
        param.grad = torch.ones_like(param)
        optimizer.step()


class TestLookahead:
    """Test slow/fast weight synchronisation."""

    def test_sync_every_k_steps(self):
        """After k inner steps the weights move alpha of the way from the slow copy."""
        param = torch.nn.Parameter(torch.zeros(1))
        optimizer = Lookahead(torch.optim.SGD([param], lr=1.0), k=2, alpha=0.5)
        unit_gradient_steps(optimizer, param, 1)
        assert float(param) == pytest.approx(-1.0)
        unit_gradient_steps(optimizer, param, 1)
        assert float(param) == pytest.approx(-1.0)
        unit_gradient_steps(optimizer, param, 2)
        assert float(param) == pytest.approx(-2.0)

    def test_alpha_one_is_plain_optimizer(self):
        """alpha = 1 leaves the inner trajectory untouched."""
        param = torch.nn.Parameter(torch.zeros(1))
        optimizer = Lookahead(torch.optim.SGD([param], lr=1.0), k=3, alpha=1.0)
        unit_gradient_steps(optimizer, param, 6)
        assert float(param) == pytest.approx(-6.0)

    def test_state_dict_round_trip(self):
        """Step count and slow weights survive a state round trip."""
        param = torch.nn.Parameter(torch.zeros(2))
        optimizer = build_optimizer([param], lr=0.01)
        unit_gradient_steps(optimizer, param, 3)
        state = optimizer.state_dict()
        other = build_optimizer([param], lr=0.01)
        other.load_state_dict(state)
        assert other.step_count == 3
        assert isinstance(other.optimizer, torch.optim.RAdam)

    @pytest.mark.parametrize("k,alpha", [(0, 0.5), (5, 0.0), (5, 1.5)])
    def test_rejects_invalid_parameters(self, k, alpha):
        """k must be positive and alpha in (0, 1]."""
        with pytest.raises(ValueError):
            Lookahead(torch.optim.SGD([torch.nn.Parameter(torch.zeros(1))], lr=1.0), k=k, alpha=alpha)
