"""The seven sequence-model architectures and their presets.

Every model maps a (batch, window, n_features) activity image to 4 logits,
one per horizon week. ``paper`` presets carry the full-size widths; ``desk``
presets quarter the linear widths so the same topology trains on one core.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from churnforge.errors import ConfigError
from churnforge.tensor import (
    Tensor,
    add,
    broadcast_to,
    concat,
    gelu,
    narrow,
    relu,
    reshape,
)
from churnforge.deep.layers import (
    BatchNorm,
    Conv,
    ConvNeXtBlock,
    Dense,
    Dropout,
    Flatten,
    ForwardContext,
    GlobalAvgPool,
    InceptionBlock,
    Layer,
    LayerNorm,
    LSTMStack,
    MaxPool,
    TransformerBlock,
    TwoDenseHead,
)

ARCHITECTURES = (
    "vgg_cnn",
    "cnn_full_width",
    "cnn_full_height",
    "lstm",
    "transformer",
    "inception_resnet",
    "convnext",
)
PRESETS = ("desk", "paper")

# Width tables. The desk preset quarters the "paper" preset widths
# (~1/16th the parameters).
_HPARAMS = {
    "vgg_cnn": {
        "paper": dict(channels=(32, 64, 128), head_hidden=160),
        "desk": dict(channels=(8, 16, 32), head_hidden=40),
    },
    "cnn_full_width": {
        "paper": dict(channels=(64, 128, 256), head_hidden=480),
        "desk": dict(channels=(16, 32, 64), head_hidden=120),
    },
    "cnn_full_height": {
        "paper": dict(channels=(64, 128, 256), head_hidden=300),
        "desk": dict(channels=(16, 32, 64), head_hidden=75),
    },
    "lstm": {
        "paper": dict(hidden=160, n_layers=5, head_hidden=64),
        "desk": dict(hidden=40, n_layers=5, head_hidden=16),
    },
    "transformer": {
        "paper": dict(d_model=128, n_heads=4, d_ff=512, n_blocks=8),
        "desk": dict(d_model=32, n_heads=4, d_ff=128, n_blocks=8),
    },
    "inception_resnet": {
        "paper": dict(channels=80, branch=40, n_blocks=9, head_hidden=128),
        "desk": dict(channels=20, branch=10, n_blocks=9, head_hidden=32),
    },
    "convnext": {
        "paper": dict(channels=176, n_blocks=3),
        "desk": dict(channels=44, n_blocks=3),
    },
}

_DEFAULT_DROPOUT = {"paper": 0.2, "desk": 0.1}


@dataclass
class ArchitectureConfig:
    kind: str
    preset: str = "desk"
    window: int = 30
    n_features: int = 11
    n_outputs: int = 4
    dropout: float = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ARCHITECTURES:
            raise ConfigError(
                f"unknown architecture {self.kind!r}; expected one of {ARCHITECTURES}"
            )
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; expected one of {PRESETS}")
        if self.dropout is None:
            self.dropout = _DEFAULT_DROPOUT[self.preset]
        if self.preset == "paper" and not 0.1 <= self.dropout <= 0.4:
            raise ConfigError(
                f"paper presets use dropout in [0.1, 0.4], got {self.dropout}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.window < 8:
            raise ConfigError(f"window must be at least 8 days, got {self.window}")
        if self.n_features < 1 or self.n_outputs < 1:
            raise ConfigError("n_features and n_outputs must be positive")
        unknown = set(self.overrides) - set(_HPARAMS[self.kind]["paper"])
        if unknown:
            raise ConfigError(f"unknown hyperparameter overrides {sorted(unknown)}")

    def hyperparams(self):
        hp = dict(_HPARAMS[self.kind][self.preset])
        hp.update(self.overrides)
        return hp

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class _AsImage(Layer):
    """(B, T, F) -> (B, 1, T, F) single-channel activity image."""

    def forward(self, x, ctx):
        B, T, F = x.shape
        return reshape(x, (B, 1, T, F))


class _ConvBNRelu(Layer):
    def __init__(self, cin, cout, kh, kw, rng, padding=(0, 0)):
        self.conv = Conv(cin, cout, kh, kw, rng, padding=padding)
        self.bn = BatchNorm(cout)

    def forward(self, x, ctx):
        return relu(self.bn(self.conv(x, ctx), ctx))


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x, ctx):
        for layer in self.layers:
            x = layer(x, ctx)
        return x


def _pooled(size, n_pools):
    for _ in range(n_pools):
        size //= 2
    return size


def _build_vgg(cfg, hp, rng):
    c1, c2, c3 = hp["channels"]
    layers = [_AsImage()]
    cin = 1
    for cout in (c1, c2, c3):
        layers.append(_ConvBNRelu(cin, cout, 3, 3, rng, padding=(1, 1)))
        layers.append(_ConvBNRelu(cout, cout, 3, 3, rng, padding=(1, 1)))
        layers.append(MaxPool((2, 1)))
        cin = cout
    flat = c3 * _pooled(cfg.window, 3) * cfg.n_features
    layers.append(Flatten())
    layers.append(TwoDenseHead(flat, hp["head_hidden"], cfg.n_outputs, cfg.dropout, rng))
    return Sequential(layers)


def _build_cnn_full_width(cfg, hp, rng):
    c1, c2, c3 = hp["channels"]
    layers = [
        _AsImage(),
        # the first kernel spans every feature column; width collapses to 1
        _ConvBNRelu(1, c1, 1, cfg.n_features, rng),
        _ConvBNRelu(c1, c2, 3, 1, rng, padding=(1, 0)),
        MaxPool((2, 1)),
        _ConvBNRelu(c2, c3, 3, 1, rng, padding=(1, 0)),
        MaxPool((2, 1)),
        Flatten(),
    ]
    flat = c3 * _pooled(cfg.window, 2)
    layers.append(TwoDenseHead(flat, hp["head_hidden"], cfg.n_outputs, cfg.dropout, rng))
    return Sequential(layers)


def _build_cnn_full_height(cfg, hp, rng):
    c1, c2, c3 = hp["channels"]
    layers = [
        _AsImage(),
        # the first kernel spans the full window; height collapses to 1
        _ConvBNRelu(1, c1, cfg.window, 1, rng),
        _ConvBNRelu(c1, c2, 1, 3, rng, padding=(0, 1)),
        _ConvBNRelu(c2, c3, 1, 3, rng, padding=(0, 1)),
        Flatten(),
    ]
    flat = c3 * cfg.n_features
    layers.append(TwoDenseHead(flat, hp["head_hidden"], cfg.n_outputs, cfg.dropout, rng))
    return Sequential(layers)


class _LSTMModel(Layer):
    def __init__(self, cfg, hp, rng):
        self.stack = LSTMStack(cfg.n_features, hp["hidden"], hp["n_layers"], rng)
        self.head = TwoDenseHead(
            hp["hidden"], hp["head_hidden"], cfg.n_outputs, cfg.dropout, rng
        )

    def forward(self, x, ctx):
        return self.head(self.stack(x, ctx), ctx)


class _TransformerModel(Layer):
    """Encoder-only transformer over day tokens with a class token readout."""

    def __init__(self, cfg, hp, rng):
        d = hp["d_model"]
        self.embed = Dense(cfg.n_features, d, rng)
        self.cls = Tensor(rng.normal(0.0, 0.02, (1, 1, d)), requires_grad=True)
        self.pos = Tensor(rng.normal(0.0, 0.02, (1, cfg.window + 1, d)), requires_grad=True)
        self.drop = Dropout(cfg.dropout)
        self.blocks = [
            TransformerBlock(d, hp["n_heads"], hp["d_ff"], cfg.dropout, rng)
            for _ in range(hp["n_blocks"])
        ]
        self.final_norm = LayerNorm(d)
        self.head = Dense(d, cfg.n_outputs, rng)

    def forward(self, x, ctx):
        B = x.shape[0]
        tokens = self.embed(x, ctx)  # (B, T, d)
        cls = broadcast_to(self.cls, (B, 1, self.cls.shape[2]))
        seq = add(concat([cls, tokens], axis=1), self.pos)
        seq = self.drop(seq, ctx)
        for block in self.blocks:
            seq = block(seq, ctx)
        seq = self.final_norm(seq, ctx)
        cls_out = reshape(narrow(seq, 1, 0, 1), (B, -1))
        return self.head(cls_out, ctx)


class _InceptionModel(Layer):
    def __init__(self, cfg, hp, rng):
        c = hp["channels"]
        self.as_image = _AsImage()
        self.stem = _ConvBNRelu(1, c, 3, 3, rng, padding=(1, 1))
        self.blocks = [
            InceptionBlock(c, hp["branch"], rng) for _ in range(hp["n_blocks"])
        ]
        self.pool = GlobalAvgPool()
        self.head = TwoDenseHead(c, hp["head_hidden"], cfg.n_outputs, cfg.dropout, rng)

    def forward(self, x, ctx):
        h = self.stem(self.as_image(x, ctx), ctx)
        for block in self.blocks:
            h = block(h, ctx)
        return self.head(self.pool(h, ctx), ctx)


class _ConvNeXtModel(Layer):
    def __init__(self, cfg, hp, rng):
        c = hp["channels"]
        self.as_image = _AsImage()
        self.stem = Conv(1, c, 3, 3, rng, padding=(1, 1))
        self.stem_norm = LayerNorm(c, axis=1)
        self.blocks = [ConvNeXtBlock(c, rng) for _ in range(hp["n_blocks"])]
        self.pool = GlobalAvgPool()
        self.norm = LayerNorm(c)
        self.drop = Dropout(cfg.dropout)
        self.head = Dense(c, cfg.n_outputs, rng)

    def forward(self, x, ctx):
        h = self.stem_norm(self.stem(self.as_image(x, ctx), ctx), ctx)
        for block in self.blocks:
            h = block(h, ctx)
        h = self.drop(self.norm(self.pool(h, ctx), ctx), ctx)
        return self.head(h, ctx)


_BUILDERS = {
    "vgg_cnn": _build_vgg,
    "cnn_full_width": _build_cnn_full_width,
    "cnn_full_height": _build_cnn_full_height,
    "lstm": lambda cfg, hp, rng: _LSTMModel(cfg, hp, rng),
    "transformer": lambda cfg, hp, rng: _TransformerModel(cfg, hp, rng),
    "inception_resnet": lambda cfg, hp, rng: _InceptionModel(cfg, hp, rng),
    "convnext": lambda cfg, hp, rng: _ConvNeXtModel(cfg, hp, rng),
}


class DeepModel(Layer):
    """A built architecture plus the config that produced it."""

    def __init__(self, config, net):
        self.config = config
        self.net = net

    def forward(self, x, ctx=None):
        if ctx is None:
            ctx = ForwardContext(mode="infer")
        if x.ndim != 3 or x.shape[1:] != (self.config.window, self.config.n_features):
            raise ConfigError(
                f"expected input (batch, {self.config.window}, "
                f"{self.config.n_features}), got {x.shape}"
            )
        return self.net(x, ctx)


def build_model(config, seed=0):
    rng = np.random.default_rng(seed)
    net = _BUILDERS[config.kind](config, config.hyperparams(), rng)
    return DeepModel(config, net)


def count_parameters(model):
    return sum(p.size for p in model.parameters())
