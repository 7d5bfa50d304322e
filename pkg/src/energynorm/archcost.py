"""Architecture configurations and closed-form cost counting.

Counting conventions (per-sample forward pass, integer arithmetic):

* one multiply-accumulate is 2 FLOPs; biases are folded into the MAC count
* Linear(in, out): params = in*out + out, flops = 2*in*out
* Conv2d: 3x3 kernel, stride 1, padding 1, followed by ReLU and a 2x2 max-pool;
  flops = 2*k*k*C_in*C_out*H*W at the conv resolution; ReLU/pool are free
* GRU layer: params = 3*((in + hidden)*hidden + 2*hidden),
  flops per timestep = 2*3*hidden*(in + hidden); gate arithmetic is free
* classifier head: one Linear to ``num_classes``; the sigmoid is free

The input is a mel spectrogram of 128 bands by 64 frames.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

MEL_BANDS = 128
FRAMES = 64
NUM_CLASSES = 10
KERNEL = 3
POOL = 2

# Number of models the experiment text claims; row expansion gives 45.
STATED_MODEL_COUNT = 43

KINDS = ("MLP", "CNN", "RNN", "CRNN")


class ConfigError(ValueError):
    """Invalid architecture configuration."""


class SpatialCollapseError(ConfigError):
    """Repeated pooling shrank a spatial dimension below 1."""


@dataclass(frozen=True)
class ArchitectureConfig:
    kind: str
    linear_layers: int = 0
    linear_hidden: int = 0
    conv_layers: int = 0
    conv_channels: int = 0
    recurrent_layers: int = 0
    recurrent_hidden: int = 0
    input_shape: tuple[int, int] = (MEL_BANDS, FRAMES)
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).upper())
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown architecture kind {self.kind!r}")
        groups = {
            "MLP": [("linear_layers", "linear_hidden")],
            "CNN": [("conv_layers", "conv_channels")],
            "RNN": [("recurrent_layers", "recurrent_hidden")],
            "CRNN": [("conv_layers", "conv_channels"), ("recurrent_layers", "recurrent_hidden")],
        }[self.kind]
        used = {name for pair in groups for name in pair}
        for count_name, width_name in groups:
            for name in (count_name, width_name):
                value = getattr(self, name)
                if not isinstance(value, int) or value < 1:
                    raise ConfigError(f"{self.kind} config needs {name} >= 1, got {value!r}")
        for name in ("linear_layers", "linear_hidden", "conv_layers", "conv_channels",
                     "recurrent_layers", "recurrent_hidden"):
            if name not in used and getattr(self, name) != 0:
                raise ConfigError(f"{self.kind} config must not set {name}")
        if len(self.input_shape) != 2 or min(self.input_shape) < 1:
            raise ConfigError(f"input_shape must be two positive ints, got {self.input_shape}")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")

    @property
    def model_id(self) -> str:
        if self.kind == "MLP":
            return f"mlp_l{self.linear_layers}_h{self.linear_hidden}"
        if self.kind == "CNN":
            return f"cnn_l{self.conv_layers}_h{self.conv_channels}"
        if self.kind == "RNN":
            return f"rnn_l{self.recurrent_layers}_h{self.recurrent_hidden}"
        return (f"crnn_c{self.conv_layers}_r{self.recurrent_layers}"
                f"_h{self.conv_channels}_{self.recurrent_hidden}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "input_shape" in known:
            known["input_shape"] = tuple(known["input_shape"])
        return cls(**known)


@dataclass(frozen=True)
class LayerCost:
    layer: str
    params: int
    flops: int


@dataclass
class CostReport:
    model_id: str
    params: int
    flops_forward: int
    per_layer: list[LayerCost] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "params": self.params,
            "flops_forward": self.flops_forward,
            "per_layer": [asdict(layer) for layer in self.per_layer],
        }


def linear_cost(n_in: int, n_out: int) -> tuple[int, int]:
    return n_in * n_out + n_out, 2 * n_in * n_out


def conv_cost(c_in: int, c_out: int, height: int, width: int) -> tuple[int, int]:
    """Params and FLOPs of a same-padded 3x3 conv at ``height`` x ``width``."""
    k2 = KERNEL * KERNEL
    return k2 * c_in * c_out + c_out, 2 * k2 * c_in * c_out * height * width


def gru_cost(n_in: int, hidden: int, steps: int) -> tuple[int, int]:
    params = 3 * ((n_in + hidden) * hidden + 2 * hidden)
    flops = 2 * 3 * hidden * (n_in + hidden) * steps
    return params, flops


def conv_stack(layers: int, channels: int, shape: tuple[int, int]) -> tuple[list[LayerCost], tuple[int, int, int]]:
    """Cost of ``layers`` conv/ReLU/pool blocks; returns layers and (C, H, W) out."""
    height, width = shape
    c_in = 1
    out = []
    for i in range(layers):
        p, f = conv_cost(c_in, channels, height, width)
        out.append(LayerCost(f"conv{i + 1}[{c_in}->{channels}@{height}x{width}]", p, f))
        height //= POOL
        width //= POOL
        if height < 1 or width < 1:
            raise SpatialCollapseError(
                f"{layers} pooled conv layers collapse input {shape} at layer {i + 1}")
        c_in = channels
    return out, (channels, height, width)


def gru_stack(layers: int, hidden: int, n_in: int, steps: int) -> list[LayerCost]:
    out = []
    for i in range(layers):
        p, f = gru_cost(n_in, hidden, steps)
        out.append(LayerCost(f"gru{i + 1}[{n_in}->{hidden}x{steps}]", p, f))
        n_in = hidden
    return out


def head(n_in: int, num_classes: int) -> LayerCost:
    p, f = linear_cost(n_in, num_classes)
    return LayerCost(f"head[{n_in}->{num_classes}]", p, f)


def count_cost(config: ArchitectureConfig) -> CostReport:
    config.validate()
    mel, frames = config.input_shape
    layers: list[LayerCost] = []
    if config.kind == "MLP":
        n_in = mel * frames
        for i in range(config.linear_layers):
            p, f = linear_cost(n_in, config.linear_hidden)
            layers.append(LayerCost(f"linear{i + 1}[{n_in}->{config.linear_hidden}]", p, f))
            n_in = config.linear_hidden
        layers.append(head(n_in, config.num_classes))
    elif config.kind == "CNN":
        convs, (c, h, w) = conv_stack(config.conv_layers, config.conv_channels, (mel, frames))
        layers += convs
        layers.append(head(c * h * w, config.num_classes))
    elif config.kind == "RNN":
        layers += gru_stack(config.recurrent_layers, config.recurrent_hidden, mel, frames)
        layers.append(head(config.recurrent_hidden, config.num_classes))
    else:
        convs, (c, h, w) = conv_stack(config.conv_layers, config.conv_channels, (mel, frames))
        layers += convs
        # time axis is the surviving frame dimension; features are channels x mel
        layers += gru_stack(config.recurrent_layers, config.recurrent_hidden, c * h, w)
        layers.append(head(config.recurrent_hidden, config.num_classes))
    return CostReport(
        model_id=config.model_id,
        params=sum(layer.params for layer in layers),
        flops_forward=sum(layer.flops for layer in layers),
        per_layer=layers,
    )


def training_flops(flops_forward: int, samples: int, epochs: int) -> int:
    """Rough training cost (forward + backward ~ 3x forward). Never a regression feature."""
    return 3 * flops_forward * samples * epochs


# (layer counts, widths) rows of the tested-configuration table
_MLP_ROWS = [([1], [512, 1024, 2048]), ([4], [1024, 2048, 4096]), ([6, 10, 16, 32], [4096])]
_CNN_ROWS = [([1], [128, 256, 512, 1024]), ([2], [128, 256, 384, 512, 768, 1024]), ([6], [384, 768])]
_RNN_ROWS = [([1], [128, 512, 1024, 2048]), ([4, 6], [1024, 2048]), ([2, 10, 14], [2048])]
# [conv, recurrent] layer counts x [conv channels, recurrent hidden]; 728 kept as printed
_CRNN_ROWS = [
    ([(1, 1), (2, 1), (1, 2)], [(64, 64), (256, 64), (512, 256)]),
    ([(2, 2)], [(728, 256)]),
    ([(1, 2), (2, 2)], [(1024, 256)]),
]


def enumerate_study_configs() -> list[tuple[str, ArchitectureConfig]]:
    configs = []
    for depths, widths in _MLP_ROWS:
        configs += [ArchitectureConfig("MLP", linear_layers=d, linear_hidden=w) for d in depths for w in widths]
    for depths, widths in _CNN_ROWS:
        configs += [ArchitectureConfig("CNN", conv_layers=d, conv_channels=w) for d in depths for w in widths]
    for depths, widths in _RNN_ROWS:
        configs += [ArchitectureConfig("RNN", recurrent_layers=d, recurrent_hidden=w)
                    for d in depths for w in widths]
    for depths, widths in _CRNN_ROWS:
        configs += [
            ArchitectureConfig("CRNN", conv_layers=c, recurrent_layers=r, conv_channels=ch, recurrent_hidden=hid)
            for c, r in depths for ch, hid in widths
        ]
    return [(c.model_id, c) for c in configs]


def enumeration_report() -> dict:
    configs = enumerate_study_configs()
    ids = [mid for mid, _ in configs]
    return {
        "expanded_count": len(configs),
        "stated_count": STATED_MODEL_COUNT,
        "unique_ids": len(set(ids)),
        "note": (f"table rows expand to {len(configs)} configurations but the text states "
                 f"{STATED_MODEL_COUNT} models; which rows collapse is not recoverable"),
    }


def load_configs(path: str | Path) -> list[ArchitectureConfig]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("configs", [])
    if not isinstance(data, list):
        raise ConfigError("config file must hold a JSON list of architecture configs")
    return [ArchitectureConfig.from_dict(d) for d in data]


def cost_table(configs: Iterable[ArchitectureConfig]) -> list[CostReport]:
    return [count_cost(c) for c in configs]
