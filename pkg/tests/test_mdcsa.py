"""
MDCSA network tests.
Run with: pytest tests/test_mdcsa.py -v
"""

import pytest
import torch
import torch.nn.functional as F

from app.ml.mdcsa import (
    CausalConv1d,
    GatedResidualNetwork,
    MdcsaNetwork,
    ModalityEmbedding,
    MultiheadDCSA,
    self_attention,
    sinusoidal_encoding,
    temporal_interleave,
)
from app.models.schemas import MdcsaConfig


@pytest.fixture
def small_config():
    return MdcsaConfig(d=8, kernels=[1, 2], dropout=0.0)


class TestEmbedding:
    """Test modality positional embeddings."""

    def test_zero_weights_give_position_encoding(self):
        """With zero weights and input the output is the position encoding."""
        embed = ModalityEmbedding(3, 8, 10)
        torch.nn.init.zeros_(embed.proj.weight)
        torch.nn.init.zeros_(embed.proj.bias)
        out = embed(torch.zeros(1, 10, 3))
        torch.testing.assert_close(out[0], sinusoidal_encoding(10, 8))

    def test_identical_rows_differ_by_position(self):
        """Equal inputs at two steps differ exactly by their encodings."""
        embed = ModalityEmbedding(3, 8, 10)
        x = torch.ones(1, 10, 3)
        out = embed(x)[0]
        pe = sinusoidal_encoding(10, 8)
        torch.testing.assert_close(out[2] - out[7], pe[2] - pe[7])

    def test_matches_affine_oracle(self):
        """Row t equals W x_t + b + p_t."""
        torch.manual_seed(0)
        embed = ModalityEmbedding(4, 6, 5)
        x = torch.randn(2, 5, 4)
        expected = x @ embed.proj.weight.T + embed.proj.bias + sinusoidal_encoding(5, 6)
        torch.testing.assert_close(embed(x), expected)

    def test_rejects_wrong_channel_count(self):
        """Inputs must have the configured channel count."""
        with pytest.raises(ValueError):
            ModalityEmbedding(3, 8, 10)(torch.zeros(1, 10, 4))


class TestCausalConv:
    """Test left-padded causal convolution."""

    def test_identity_kernel(self):
        """k = 1 with identity weights returns the input."""
        conv = CausalConv1d(4, 1)
        with torch.no_grad():
            conv.conv.weight.copy_(torch.eye(4).unsqueeze(2))
            conv.conv.bias.zero_()
        x = torch.randn(2, 9, 4)
        torch.testing.assert_close(conv(x), x)

    def test_impulse_response_is_causal(self):
        """An impulse at t=5 with k=4 reaches only t in 5..8."""
        conv = CausalConv1d(3, 4)
        with torch.no_grad():
            conv.conv.weight.fill_(1.0)
            conv.conv.bias.zero_()
        x = torch.zeros(1, 12, 3)
        x[0, 5] = 1.0
        nonzero = (conv(x)[0].abs().sum(dim=1) > 0).nonzero().flatten().tolist()
        assert nonzero == [5, 6, 7, 8]

    def test_matches_sliding_window_sum(self):
        """Output t is the kernel applied to steps t-k+1..t, zero-padded on the left."""
        torch.manual_seed(1)
        conv = CausalConv1d(2, 4)
        x = torch.randn(1, 7, 2)
        padded = torch.cat([torch.zeros(1, 3, 2), x], dim=1)
        w, b = conv.conv.weight, conv.conv.bias
        expected = torch.stack([
            torch.einsum("oik,ki->o", w, padded[0, t:t + 4]) + b for t in range(7)
        ])
        torch.testing.assert_close(conv(x)[0], expected)


class TestAttention:
    """Test unmasked scaled dot-product attention."""

    def test_single_step_returns_values(self):
        """With one row the output is V."""
        q, k, v = torch.randn(1, 1, 3), torch.randn(1, 1, 3), torch.randn(1, 1, 3)
        torch.testing.assert_close(self_attention(q, k, v), v)

    def test_identical_keys_average_values(self):
        """Identical keys give uniform weights."""
        q = torch.randn(1, 4, 3)
        k = torch.ones(1, 4, 3)
        v = torch.randn(1, 4, 3)
        out = self_attention(q, k, v)
        torch.testing.assert_close(out[0], v[0].mean(dim=0).expand(4, 3))

    def test_matches_softmax_oracle(self):
        """Matches softmax(QK^T / sqrt(d)) V computed directly."""
        torch.manual_seed(2)
        q, k, v = torch.randn(1, 4, 3), torch.randn(1, 4, 3), torch.randn(1, 4, 3)
        weights = torch.softmax(q @ k.transpose(1, 2) / 3 ** 0.5, dim=-1)
        torch.testing.assert_close(self_attention(q, k, v), weights @ v)


class TestGatedResidualNetwork:
    """Test gated fusion of the two streams."""

    def test_closed_gate_suppresses_context(self):
        """A saturated closed gate reduces the block to LayerNorm of the primary stream."""
        grn = GatedResidualNetwork(6)
        with torch.no_grad():
            grn.glu.gate.weight.zero_()
            grn.glu.gate.bias.fill_(-1e4)
        a, c = torch.randn(2, 5, 6), torch.randn(2, 5, 6)
        torch.testing.assert_close(grn(a, c), F.layer_norm(a, (6,)))

    def test_matches_formula(self):
        """Output equals LayerNorm(a + GLU(W2 ELU(W1 a + W3 c + b1) + b2))."""
        torch.manual_seed(3)
        grn = GatedResidualNetwork(4)
        a, c = torch.randn(1, 3, 4), torch.randn(1, 3, 4)
        eta = F.elu(a @ grn.primary.weight.T + grn.primary.bias + c @ grn.context.weight.T)
        h = eta @ grn.hidden.weight.T + grn.hidden.bias
        glu = torch.sigmoid(h @ grn.glu.gate.weight.T + grn.glu.gate.bias) * (h @ grn.glu.linear.weight.T + grn.glu.linear.bias)
        torch.testing.assert_close(grn(a, c), F.layer_norm(a + glu, (4,)))


class TestInterleave:
    """Test temporal interleaving of block outputs."""

    def test_single_block_is_identity(self):
        """n = 1 returns its block."""
        x = torch.randn(2, 5, 3)
        torch.testing.assert_close(temporal_interleave([x]), x)

    def test_row_order(self):
        """Three constant blocks over two steps give rows A, B, C, A, B, C."""
        blocks = [torch.full((1, 2, 1), float(v)) for v in (1, 2, 3)]
        assert temporal_interleave(blocks)[0, :, 0].tolist() == [1.0, 2.0, 3.0, 1.0, 2.0, 3.0]

    def test_rejects_empty(self):
        """At least one block is needed."""
        with pytest.raises(ValueError):
            temporal_interleave([])


class TestMdcsaNetwork:
    """Test the assembled network."""

    def test_default_shapes(self):
        """A default window gives 25 x 6 emissions and 25 hallway logits."""
        model = MdcsaNetwork(MdcsaConfig(d=16)).eval()
        emissions, logits = model(torch.randn(2, 25, 20), torch.randn(2, 25, 6))
        assert emissions.shape == (2, 25, 6)
        assert logits.shape == (2, 25)

    def test_rssi_only_configuration(self, small_config):
        """Without accelerometer channels the network consumes RSSI alone."""
        config = small_config.model_copy(update={"accel_channels": 0, "rssi_channels": 8})
        model = MdcsaNetwork(config).eval()
        paths = model.decode(torch.randn(3, 25, 8))
        assert paths.shape == (3, 25)
        assert int(paths.min()) >= 0 and int(paths.max()) < 6

    def test_missing_accel_rejected(self, small_config):
        """An accelerometer configuration needs accelerometer input."""
        with pytest.raises(ValueError):
            MdcsaNetwork(small_config)(torch.randn(1, 25, 20))

    def test_wrong_window_length_rejected(self, small_config):
        """Windows must have the configured length."""
        with pytest.raises(ValueError):
            MdcsaNetwork(small_config)(torch.randn(1, 24, 20), torch.randn(1, 24, 6))

    def test_eval_is_deterministic(self):
        """Eval mode gives identical outputs for identical input."""
        torch.manual_seed(4)
        model = MdcsaNetwork(MdcsaConfig(d=8, kernels=[1, 4, 7])).eval()
        rssi, accel = torch.randn(2, 25, 20), torch.randn(2, 25, 6)
        first, _ = model(rssi, accel)
        second, _ = model(rssi, accel)
        torch.testing.assert_close(first, second, rtol=0, atol=0)

    def test_every_parameter_receives_gradient(self, small_config):
        """The combined loss reaches every weight, CRF included."""
        model = MdcsaNetwork(small_config)
        emissions, logits = model(torch.randn(2, 25, 20), torch.randn(2, 25, 6))
        tags = torch.randint(0, 6, (2, 25))
        (model.crf(emissions, tags).sum() + logits.sum()).backward()
        missing = [name for name, p in model.named_parameters() if p.grad is None]
        assert missing == []

    def test_gradcheck_small_instance(self):
        """Analytic and numeric input gradients agree in double precision."""
        torch.manual_seed(5)
        config = MdcsaConfig(d=8, kernels=[1, 2], dropout=0.0, n_rooms=3, rssi_channels=4, accel_channels=2, window_len=6)
        model = MdcsaNetwork(config).double().eval()
        accel = torch.randn(1, 6, 2, dtype=torch.float64)
        rssi = torch.randn(1, 6, 4, dtype=torch.float64, requires_grad=True)
        assert torch.autograd.gradcheck(lambda r: model(r, accel)[0], (rssi,), eps=1e-6, atol=1e-4)

    def test_single_kernel_composition(self):
        """With one kernel the multihead block is one DCSA, attention, 1x1 conv and norm."""
        torch.manual_seed(6)
        block = MultiheadDCSA(4, [1], dropout=0.0).eval()
        x1, x2 = torch.randn(1, 5, 4), torch.randn(1, 5, 4)
        xi = block.blocks[0](x1, x2)
        z = self_attention(block.query(xi), block.key(xi), block.value(xi))
        y = block.aggregate(z.transpose(1, 2)).transpose(1, 2)
        torch.testing.assert_close(block(x1, x2), block.norm(y))
