"""Q-network with separate convolutional branches for the local and global maps."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..dynamics import NUM_ACTIONS
from ..obsmap import NUM_CHANNELS, global_size

MODEL_MAGIC = b"AHNET\x00\x00\x01"


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture descriptor; serialized into model files."""

    local_size: int = 17
    global_size: int = 21
    channels: int = NUM_CHANNELS
    conv_layers: int = 2
    conv_filters: int = 16
    kernel_size: int = 5
    hidden: tuple[int, ...] = (256, 256, 256)
    num_actions: int = NUM_ACTIONS
    flying_time_scale: float = 1.0
    data_scale: float = 1.0
    dtype: str = "float32"

    @classmethod
    def for_map(cls, map_size: int, local_size: int, pool: int, **kw) -> "NetworkSpec":
        return cls(local_size=local_size, global_size=global_size(map_size, pool), **kw)

    def to_json(self) -> str:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", cls.hidden))
        return cls(**d)

    @property
    def torch_dtype(self) -> torch.dtype:
        return getattr(torch, self.dtype)

    def branch_output(self, size: int) -> int:
        out = size - self.conv_layers * (self.kernel_size - 1)
        if out < 1:
            raise ValueError(f"input of size {size} too small for {self.conv_layers} convs of kernel {self.kernel_size}")
        return self.conv_filters * out * out


def _branch(spec: NetworkSpec) -> nn.Sequential:
    layers: list[nn.Module] = []
    in_ch = spec.channels
    for _ in range(spec.conv_layers):
        layers += [nn.Conv2d(in_ch, spec.conv_filters, spec.kernel_size), nn.ReLU()]
        in_ch = spec.conv_filters
    layers.append(nn.Flatten())
    return nn.Sequential(*layers)


class QNetwork(nn.Module):
    """Maps (local map, global map, remaining flying time) to one value per action.

    Map inputs are channels-last ``(B, H, W, 6)`` arrays as produced by
    :func:`aerharvest.obsmap.observe`; per-channel scaling of the data and
    flying-time channels (and of the scalar) happens inside ``forward``.
    """

    def __init__(self, spec: NetworkSpec, seed: int | None = None):
        super().__init__()
        self.spec = spec
        self.local_branch = _branch(spec)
        self.global_branch = _branch(spec)
        width = spec.branch_output(spec.local_size) + spec.branch_output(spec.global_size) + 1
        head: list[nn.Module] = []
        for h in spec.hidden:
            head += [nn.Linear(width, h), nn.ReLU()]
            width = h
        head.append(nn.Linear(width, spec.num_actions))
        self.head = nn.Sequential(*head)
        scale = torch.ones(spec.channels)
        scale[3] = 1.0 / spec.data_scale
        scale[4] = 1.0 / spec.flying_time_scale
        self.register_buffer("channel_scale", scale, persistent=False)
        self.to(spec.torch_dtype)
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int | None = None) -> None:
        """Fan-in scaled uniform initialization of every weight and bias."""
        gen = torch.Generator().manual_seed(0 if seed is None else int(seed))
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, (nn.Conv2d, nn.Linear)):
                    fan_in = module.weight[0].numel()
                    bound = 1.0 / math.sqrt(fan_in)
                    module.weight.uniform_(-bound, bound, generator=gen)
                    module.bias.uniform_(-bound, bound, generator=gen)

    def forward(self, local: torch.Tensor, global_: torch.Tensor, scalar: torch.Tensor) -> torch.Tensor:
        scale = self.channel_scale
        x_local = (local * scale).permute(0, 3, 1, 2)
        x_global = (global_ * scale).permute(0, 3, 1, 2)
        features = torch.cat(
            [
                self.local_branch(x_local),
                self.global_branch(x_global),
                (scalar / self.spec.flying_time_scale).unsqueeze(1),
            ],
            dim=1,
        )
        return self.head(features)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.detach().cpu().numpy().ravel() for p in self.parameters()])


def save_model(net: QNetwork, path: str | Path) -> None:
    """Magic, u32 descriptor length, JSON descriptor, then float32 LE parameters."""
    descriptor = json.dumps(
        {
            "spec": json.loads(net.spec.to_json()),
            "parameters": [[name, list(p.shape)] for name, p in net.named_parameters()],
        },
        sort_keys=True,
    ).encode("utf-8")
    flat = net.flat_parameters().astype("<f4")
    with open(path, "wb") as handle:
        handle.write(MODEL_MAGIC)
        handle.write(struct.pack("<I", len(descriptor)))
        handle.write(descriptor)
        handle.write(flat.tobytes())


def load_model(path: str | Path) -> QNetwork:
    raw = Path(path).read_bytes()
    if raw[:8] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    (length,) = struct.unpack_from("<I", raw, 8)
    descriptor = json.loads(raw[12 : 12 + length].decode("utf-8"))
    net = QNetwork(NetworkSpec.from_dict(descriptor["spec"]))
    flat = np.frombuffer(raw, dtype="<f4", offset=12 + length)
    expected = sum(int(np.prod(shape)) for _, shape in descriptor["parameters"])
    if flat.size != expected:
        raise ModelFormatError(f"{path}: expected {expected} parameters, found {flat.size}")
    params = dict(net.named_parameters())
    offset = 0
    with torch.no_grad():
        for name, shape in descriptor["parameters"]:
            n = int(np.prod(shape))
            values = torch.from_numpy(flat[offset : offset + n].astype(np.float64)).reshape(shape)
            params[name].copy_(values)
            offset += n
    return net
