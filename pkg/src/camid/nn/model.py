"""Miniature densely connected CNN.

Stem 3x3 conv, then dense blocks where layer i consumes the concatenation
of the block input and all previous layer outputs (each layer: ReLU then
3x3 conv adding growth_rate channels). A transition (1x1 conv halving
channels, then 2x2 average pool) follows every non-final block. Global
average pooling makes the head independent of input height/width; a final
linear layer produces one logit per class.

The public batch contract is NCHW; compute runs channels-last internally
(one transpose at the input boundary).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatchError
from .layers import AvgPool2, Conv2d, GlobalAvgPool, Linear, _Workspace
from .loss import cross_entropy, cross_entropy_grad, softmax, softmax_backward

DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass(frozen=True)
class DenseBlockConfig:
    num_layers: int = 4
    growth_rate: int = 12

    def out_channels(self, in_channels: int) -> int:
        return in_channels + self.num_layers * self.growth_rate


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int
    stem_channels: int = 16
    blocks: tuple[DenseBlockConfig, ...] = (
        DenseBlockConfig(4, 12),
        DenseBlockConfig(4, 12),
        DenseBlockConfig(4, 12),
    )

    @property
    def min_input_size(self) -> int:
        # each transition halves H and W with floor; every stage needs >= 1
        return 2 ** (len(self.blocks) - 1)

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "stem_channels": self.stem_channels,
            "blocks": [[b.num_layers, b.growth_rate] for b in self.blocks],
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(
            num_classes=int(d["num_classes"]),
            stem_channels=int(d["stem_channels"]),
            blocks=tuple(DenseBlockConfig(int(l), int(k)) for l, k in d["blocks"]),
        )


class DenseBlock:
    def __init__(self, name: str, in_channels: int, cfg: DenseBlockConfig,
                 dtype, rng: np.random.Generator):
        self.name = name
        self.cfg = cfg
        self.in_channels = in_channels
        self.out_channels = cfg.out_channels(in_channels)
        self.convs: list[Conv2d] = []
        ch = in_channels
        for i in range(cfg.num_layers):
            # each layer is ReLU then conv; the ReLU is fused into the conv
            self.convs.append(
                Conv2d(f"{name}.layer{i}", ch, cfg.growth_rate, 3, pad=1,
                       dtype=dtype, rng=rng)
            )
            ch += cfg.growth_rate
        self._ws = _Workspace()

    def forward_nhwc(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.shape[3] != self.in_channels:
            raise ShapeMismatchError(
                f"{self.name}: expected {self.in_channels} channels, got {x.shape[3]}"
            )
        feats = x
        for i, conv in enumerate(self.convs):
            new = conv.forward_nhwc(feats, cache=train, relu_input=True)
            n, h, w, _ = feats.shape
            cat = self._ws.take(f"cat{i}", (n, h, w, feats.shape[3] + new.shape[3]),
                                feats.dtype)
            np.concatenate([feats, new], axis=3, out=cat)
            feats = cat
        return feats

    def backward_nhwc(self, dy: np.ndarray) -> np.ndarray:
        # walk layers in reverse, splitting the concatenated gradient: the
        # trailing growth_rate channels feed layer i's conv, whose input
        # gradient (already through the fused ReLU) folds back onto
        # everything before it; dy is consumed as scratch
        g = dy
        for conv in reversed(self.convs):
            width = conv.out_ch
            g_new = np.ascontiguousarray(g[..., -width:])
            g = g[..., :-width]
            g += conv.backward_nhwc(g_new)
        return g

    def params(self):
        return [p for conv in self.convs for p in conv.params()]

    def grads(self):
        return [g for conv in self.convs for g in conv.grads()]


class Transition:
    """1x1 conv halving channels followed by 2x2 average pooling."""

    def __init__(self, name: str, in_channels: int, dtype, rng: np.random.Generator):
        self.name = name
        self.out_channels = in_channels // 2
        self.conv = Conv2d(f"{name}.conv", in_channels, self.out_channels, 1,
                           dtype=dtype, rng=rng)
        self.pool = AvgPool2()

    def forward_nhwc(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        return self.pool.forward_nhwc(self.conv.forward_nhwc(x, cache=train))

    def backward_nhwc(self, dy: np.ndarray) -> np.ndarray:
        return self.conv.backward_nhwc(self.pool.backward_nhwc(dy))

    def params(self):
        return self.conv.params()

    def grads(self):
        return self.conv.grads()


class MicroDenseNet:
    """End-to-end classifier over (N, 3, H, W) inputs normalized to [0, 1]."""

    def __init__(self, config: ModelConfig, precision: str = "f32", seed: int = 0):
        if precision not in DTYPES:
            raise ValueError(f"precision must be one of {sorted(DTYPES)}")
        self.config = config
        self.precision = precision
        self.dtype = DTYPES[precision]
        rng = np.random.default_rng([seed, 7])
        self.stem = Conv2d("stem", 3, config.stem_channels, 3, pad=1,
                           dtype=self.dtype, rng=rng)
        self.blocks: list[DenseBlock] = []
        self.transitions: list[Transition] = []
        ch = config.stem_channels
        for i, bcfg in enumerate(config.blocks):
            block = DenseBlock(f"block{i}", ch, bcfg, self.dtype, rng)
            self.blocks.append(block)
            ch = block.out_channels
            if i < len(config.blocks) - 1:
                trans = Transition(f"trans{i}", ch, self.dtype, rng)
                self.transitions.append(trans)
                ch = trans.out_channels
        self.gap = GlobalAvgPool()
        self.fc = Linear("fc", ch, config.num_classes, dtype=self.dtype, rng=rng)
        self.num_classes = config.num_classes
        self._ws = _Workspace()
        # instrumented counter: rows seen by forward (one per view/example)
        self.views_seen = 0

    def _modules(self):
        mods = [self.stem]
        for i, block in enumerate(self.blocks):
            mods.append(block)
            if i < len(self.transitions):
                mods.append(self.transitions[i])
        mods.append(self.fc)
        return mods

    def forward_logits(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeMismatchError(f"expected (N,3,H,W) input, got {x.shape}")
        m = self.config.min_input_size
        if x.shape[2] < m or x.shape[3] < m:
            raise ShapeMismatchError(
                f"input {x.shape[2]}x{x.shape[3]} below network minimum {m}x{m}"
            )
        self.views_seen += x.shape[0]
        n, _, hh, ww = x.shape
        h = self._ws.take("input", (n, hh, ww, 3), self.dtype)
        h[...] = x.astype(self.dtype, copy=False).transpose(0, 2, 3, 1)
        h = self.stem.forward_nhwc(h, cache=train)
        for i, block in enumerate(self.blocks):
            h = block.forward_nhwc(h, train=train)
            if i < len(self.transitions):
                h = self.transitions[i].forward_nhwc(h, train=train)
        return self.fc.forward(self.gap.forward_nhwc(h))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities, shape (N, num_classes); no gradient caches."""
        return softmax(self.forward_logits(x, train=False))

    def backward_from_logits(self, dlogits: np.ndarray) -> None:
        g = self.gap.backward_nhwc(self.fc.backward(dlogits))
        for i in range(len(self.blocks) - 1, -1, -1):
            if i < len(self.transitions):
                g = self.transitions[i].backward_nhwc(g)
            g = self.blocks[i].backward_nhwc(g)
        self.stem.backward_nhwc(g, need_dx=False)

    def loss_and_grads(self, x: np.ndarray, onehot: np.ndarray,
                       loss_kind: str = "binary_sum"):
        """One forward/backward pass: (loss, probs, gradient dict)."""
        probs = softmax(self.forward_logits(x, train=True))
        loss = cross_entropy(probs, onehot.astype(probs.dtype), loss_kind)
        dprobs = cross_entropy_grad(probs, onehot.astype(probs.dtype), loss_kind)
        dlogits = softmax_backward(probs, dprobs)
        self.backward_from_logits(dlogits)
        return loss, probs, dict(self.grads())

    def params(self) -> list[tuple[str, np.ndarray]]:
        return [p for m in self._modules() for p in m.params()]

    def grads(self) -> list[tuple[str, np.ndarray]]:
        return [g for m in self._modules() for g in m.grads()]

    def param_dict(self) -> dict[str, np.ndarray]:
        return dict(self.params())

    def set_params(self, values: dict[str, np.ndarray]) -> None:
        own = self.param_dict()
        if set(values) != set(own):
            missing = set(own) ^ set(values)
            raise ShapeMismatchError(f"parameter names differ: {sorted(missing)}")
        for name, arr in own.items():
            src = np.asarray(values[name], dtype=arr.dtype)
            if src.shape != arr.shape:
                raise ShapeMismatchError(
                    f"parameter {name}: expected {arr.shape}, got {src.shape}"
                )
            arr[...] = src

    def param_count(self) -> int:
        return sum(int(a.size) for _, a in self.params())
