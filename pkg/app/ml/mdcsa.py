"""
Multihead Dual Convolutional Self-Attention network.

Two modality embeddings (RSSI, accelerometer) feed parallel dual-stream blocks,
one per causal-convolution kernel size. Block outputs are interleaved in time,
re-attended, reduced by a stride-n convolution and mapped to room emissions for
the CRF plus a per-step reference-room (hallway) logit.
"""

import math
from typing import List, Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from app.ml.crf import LinearChainCRF
from app.models.schemas import MdcsaConfig


def sinusoidal_encoding(length: int, d: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Fixed transformer position encoding, (length, d)."""
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d, 2, dtype=torch.float64) * (-math.log(10000.0) / d))
    pe = torch.zeros(length, d, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div[: d // 2])
    return pe.to(dtype)


def self_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """Unmasked scaled dot-product attention, softmax(QK^T / sqrt(d)) V."""
    return F.scaled_dot_product_attention(q, k, v)


def temporal_interleave(blocks: List[torch.Tensor]) -> torch.Tensor:
    """(B, T, d) x n -> (B, n*T, d) with rows [b1_t1, ..., bn_t1, b1_t2, ...]."""
    if not blocks:
        raise ValueError("need at least one block to interleave")
    B, T, d = blocks[0].shape
    return torch.stack(blocks, dim=2).reshape(B, T * len(blocks), d)


class ModalityEmbedding(nn.Module):
    """h_t = W x_t + b + p_t."""

    def __init__(self, in_channels: int, d: int, max_len: int):
        super().__init__()
        self.in_channels = in_channels
        self.proj = nn.Linear(in_channels, d)
        self.register_buffer("pe", sinusoidal_encoding(max_len, d), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {x.shape[-1]}")
        return self.proj(x) + self.pe[: x.shape[-2]].to(x.dtype)


class ConstantEmbedding(nn.Module):
    """Learned constant vector broadcast over time, standing in for an absent modality."""

    def __init__(self, d: int, max_len: int):
        super().__init__()
        self.value = nn.Parameter(torch.zeros(d))
        self.register_buffer("pe", sinusoidal_encoding(max_len, d), persistent=False)

    def forward(self, batch: int, length: int) -> torch.Tensor:
        out = self.value + self.pe[:length].to(self.value.dtype)
        return out.unsqueeze(0).expand(batch, length, -1)


class CausalConv1d(nn.Module):
    """Length-preserving 1D convolution over time with left zero-padding k-1."""

    def __init__(self, d: int, kernel_size: int):
        super().__init__()
        if kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        self.kernel_size = kernel_size
        self.conv = nn.Conv1d(d, d, kernel_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = F.pad(x.transpose(1, 2), (self.kernel_size - 1, 0))
        return self.conv(y).transpose(1, 2)


class ConvSelfAttention(nn.Module):
    """SA(Phi_k(x) W_Q, Phi_k(x) W_K, x W_V)."""

    def __init__(self, d: int, kernel_size: int):
        super().__init__()
        self.conv = CausalConv1d(d, kernel_size)
        self.query = nn.Linear(d, d, bias=False)
        self.key = nn.Linear(d, d, bias=False)
        self.value = nn.Linear(d, d, bias=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        features = self.conv(x)
        return self_attention(self.query(features), self.key(features), self.value(x))


class GatedLinearUnit(nn.Module):
    """sigmoid(W4 x + b4) * (W5 x + b5)."""

    def __init__(self, d: int):
        super().__init__()
        self.gate = nn.Linear(d, d)
        self.linear = nn.Linear(d, d)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.gate(x)) * self.linear(x)


class GatedResidualNetwork(nn.Module):
    """LayerNorm(a + GLU(W2 ELU(W1 a + W3 c + b1) + b2)), weights shared over time."""

    def __init__(self, d: int):
        super().__init__()
        self.primary = nn.Linear(d, d)
        self.context = nn.Linear(d, d, bias=False)
        self.hidden = nn.Linear(d, d)
        self.glu = GatedLinearUnit(d)
        self.norm = nn.LayerNorm(d)

    def forward(self, a: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        eta = F.elu(self.primary(a) + self.context(c))
        return self.norm(a + self.glu(self.hidden(eta)))


class DualConvSelfAttention(nn.Module):
    """GRN(Norm(SA_k(x1) + x1), Norm(SA_k(x2) + x2)); each stream owns its weights."""

    def __init__(self, d: int, kernel_size: int):
        super().__init__()
        self.kernel_size = kernel_size
        self.attend_primary = ConvSelfAttention(d, kernel_size)
        self.attend_secondary = ConvSelfAttention(d, kernel_size)
        self.norm_primary = nn.LayerNorm(d)
        self.norm_secondary = nn.LayerNorm(d)
        self.grn = GatedResidualNetwork(d)

    def forward(self, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
        a = self.norm_primary(self.attend_primary(x1) + x1)
        c = self.norm_secondary(self.attend_secondary(x2) + x2)
        return self.grn(a, c)


class MultiheadDCSA(nn.Module):
    """
    n parallel DCSA blocks, interleaved, re-attended over n*T rows and reduced
    back to T rows by a kernel-n stride-n convolution, then LayerNorm and dropout.
    """

    def __init__(self, d: int, kernels: List[int], dropout: float):
        super().__init__()
        self.blocks = nn.ModuleList([DualConvSelfAttention(d, k) for k in kernels])
        self.query = nn.Linear(d, d, bias=False)
        self.key = nn.Linear(d, d, bias=False)
        self.value = nn.Linear(d, d, bias=False)
        n = len(kernels)
        self.aggregate = nn.Conv1d(d, d, kernel_size=n, stride=n)
        self.norm = nn.LayerNorm(d)
        self.dropout = nn.Dropout(dropout)

    def forward(self, h_r: torch.Tensor, h_a: torch.Tensor) -> torch.Tensor:
        xi = temporal_interleave([block(h_r, h_a) for block in self.blocks])
        z = self_attention(self.query(xi), self.key(xi), self.value(xi))
        y = self.aggregate(z.transpose(1, 2)).transpose(1, 2)
        return self.dropout(self.norm(y))


class MdcsaNetwork(nn.Module):
    """
    Full localisation network with CRF head.

    forward() returns (emissions (B, T, m), hallway_logits (B, T)); decode() runs Viterbi.
    """

    def __init__(self, config: MdcsaConfig):
        super().__init__()
        self.config = config
        d, T = config.d, config.window_len
        self.embed_rssi = ModalityEmbedding(config.rssi_channels, d, T)
        if config.uses_accel:
            self.embed_accel = ModalityEmbedding(config.accel_channels, d, T)
        else:
            self.embed_accel = ConstantEmbedding(d, T)
        self.mdcsa = MultiheadDCSA(d, list(config.kernels), config.dropout)
        self.room_head = nn.Linear(d, config.n_rooms)
        self.hallway_head = nn.Linear(d, 1)
        self.crf = LinearChainCRF(config.n_rooms)

    def embed(self, rssi: torch.Tensor, accel: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        if rssi.dim() != 3 or rssi.shape[1] != self.config.window_len:
            raise ValueError(
                f"rssi must be (B, {self.config.window_len}, {self.config.rssi_channels}), got {tuple(rssi.shape)}"
            )
        h_r = self.embed_rssi(rssi)
        if self.config.uses_accel:
            if accel is None:
                raise ValueError("this configuration needs accelerometer input")
            if accel.shape[:2] != rssi.shape[:2]:
                raise ValueError("rssi and accel windows must share batch and time axes")
            h_a = self.embed_accel(accel)
        else:
            h_a = self.embed_accel(rssi.shape[0], rssi.shape[1])
        return h_r, h_a

    def forward(self, rssi: torch.Tensor, accel: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.mdcsa(*self.embed(rssi, accel))
        return self.room_head(h), self.hallway_head(h).squeeze(-1)

    @torch.no_grad()
    def decode(self, rssi: torch.Tensor, accel: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Viterbi room path per window, (B, T)."""
        emissions, _ = self.forward(rssi, accel)
        paths, _ = self.crf.decode(emissions)
        return paths
