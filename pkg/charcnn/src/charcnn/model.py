"""Network definition: char embedding, three conv blocks, optional SE gating.

Architecture (seven blocks): embedding -> 3 x [conv -> thresholded ReLU ->
(SE) -> maxpool] -> 2 x [dense -> thresholded ReLU -> dropout] -> dense ->
softmax. Convolutions are valid (no padding); pooling is width 3, stride 3
with floor division. All conv layers carry 128 filters; the first two use
width 7, the third width 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import torch
from torch import nn

RELU_THRESHOLD = 1e-6


@dataclass(frozen=True)
class CnnConfig:
    classes: int
    input_length: int = 5000
    alphabet_size: int = 105
    embed_dim: int = 128
    conv_channels: int = 128
    conv_widths: tuple[int, int, int] = (7, 7, 3)
    pool_width: int = 3
    pool_stride: int = 3
    relu_threshold: float = RELU_THRESHOLD
    hidden_units: int = 256
    dropout: float = 0.5
    se_enabled: bool = False
    se_reduction: int = 64
    se_position: str = "after_activation"  # or "after_pool"
    lr: float = 5e-4
    batch_size: int = 128
    epochs: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.se_enabled and self.conv_channels // self.se_reduction < 1:
            raise ValueError("SE bottleneck would be empty: need channels/reduction >= 1")
        if self.se_position not in ("after_activation", "after_pool"):
            raise ValueError(f"unknown se_position {self.se_position!r}")

    @property
    def se_bottleneck(self) -> int:
        return self.conv_channels // self.se_reduction

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_widths"] = list(self.conv_widths)
        return d


def layer_lengths(config: CnnConfig) -> list[int]:
    """Sequence lengths after each conv and pool stage (valid conv, floor pool)."""
    lengths = []
    length = config.input_length
    for width in config.conv_widths:
        length = length - width + 1  # valid convolution
        if length <= 0:
            raise ValueError(f"non-positive length {length} after conv of width {width}")
        lengths.append(length)
        length = (length - config.pool_width) // config.pool_stride + 1
        if length <= 0:
            raise ValueError("non-positive length after pooling")
        lengths.append(length)
    return lengths


def flatten_size(config: CnnConfig) -> int:
    return layer_lengths(config)[-1] * config.conv_channels


class ThresholdedReLU(nn.Module):
    """Passes x only where x > threshold; zero elsewhere."""

    def __init__(self, threshold: float = RELU_THRESHOLD):
        super().__init__()
        self.threshold = threshold

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * (x > self.threshold)

    def extra_repr(self) -> str:
        return f"threshold={self.threshold}"


class SEBlock(nn.Module):
    """Channel recalibration: global average squeeze, two-layer gating excitation.

    Input and output are (batch, channels, length); the sigmoid gate s lies
    strictly inside (0, 1) for finite inputs and rescales each channel.
    """

    def __init__(self, channels: int, reduction: int):
        super().__init__()
        bottleneck = channels // reduction
        if bottleneck < 1:
            raise ValueError("channels/reduction must be >= 1")
        self.squeeze_excite = nn.Sequential(
            nn.Linear(channels, bottleneck),
            nn.ReLU(),
            nn.Linear(bottleneck, channels),
            nn.Sigmoid(),
        )

    def gates(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3:
            raise ValueError(f"expected (batch, channels, length), got shape {tuple(x.shape)}")
        return self.squeeze_excite(x.mean(dim=2))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.gates(x).unsqueeze(-1)


class CharCnn(nn.Module):
    def __init__(self, config: CnnConfig):
        super().__init__()
        self.config = config
        c = config.conv_channels
        # index 0 (blank/pad) embeds to a learned vector like any other symbol
        self.embedding = nn.Embedding(config.alphabet_size + 1, config.embed_dim)
        self.conv_blocks = nn.ModuleList()
        in_channels = config.embed_dim
        for width in config.conv_widths:
            block = nn.ModuleDict(
                {
                    "conv": nn.Conv1d(in_channels, c, kernel_size=width),
                    "act": ThresholdedReLU(config.relu_threshold),
                    "se": SEBlock(c, config.se_reduction) if config.se_enabled else None,
                    "pool": nn.MaxPool1d(config.pool_width, stride=config.pool_stride),
                }
            )
            self.conv_blocks.append(block)
            in_channels = c
        self.classifier = nn.Sequential(
            nn.Linear(flatten_size(config), config.hidden_units),
            ThresholdedReLU(config.relu_threshold),
            nn.Dropout(config.dropout),
            nn.Linear(config.hidden_units, config.hidden_units),
            ThresholdedReLU(config.relu_threshold),
            nn.Dropout(config.dropout),
            nn.Linear(config.hidden_units, config.classes),
        )

    def forward(self, indices: torch.Tensor) -> torch.Tensor:
        """Logits for a batch of index sequences (batch, length)."""
        x = self.embedding(indices).transpose(1, 2)  # (batch, embed, length)
        for block in self.conv_blocks:
            x = block["act"](block["conv"](x))
            if block["se"] is not None and self.config.se_position == "after_activation":
                x = block["se"](x)
            x = block["pool"](x)
            if block["se"] is not None and self.config.se_position == "after_pool":
                x = block["se"](x)
        return self.classifier(x.flatten(1))

    def probabilities(self, indices: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(indices), dim=1)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def se_parameter_delta(config: CnnConfig) -> int:
    """Exact parameter increase from enabling SE blocks."""
    d, b = config.conv_channels, config.se_bottleneck
    per_block = d * b + b + b * d + d
    return len(config.conv_widths) * per_block


def force_unit_gates(model: CharCnn) -> None:
    """Saturate every SE gate to exactly 1.0 so SE becomes the identity."""
    for block in model.conv_blocks:
        se = block["se"]
        if se is None:
            continue
        out_layer = se.squeeze_excite[2]
        with torch.no_grad():
            out_layer.weight.zero_()
            out_layer.bias.fill_(100.0)  # sigmoid(100) rounds to 1.0 in float32
