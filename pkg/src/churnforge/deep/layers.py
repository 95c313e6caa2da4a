"""Layer building blocks for the sequence models.

Layers hold their parameter Tensors and expose them in declaration order;
``ForwardContext`` carries the train/infer mode, the dropout RNG and the
frozen-batch-stats switch through a forward pass.
"""

from dataclasses import dataclass

import numpy as np

from churnforge.errors import ConfigError, ShapeError
from churnforge.tensor import (
    Tensor,
    attention,
    concat,
    conv2d,
    dropout,
    gelu,
    matmul,
    maxpool2d,
    mean,
    narrow,
    normalize,
    relu,
    reshape,
    sigmoid,
    tanh,
    transpose,
)
from churnforge.tensor import add as t_add
from churnforge.tensor import mul as t_mul


@dataclass
class ForwardContext:
    mode: str = "infer"  # "train" | "infer"
    rng: np.random.Generator = None
    bn_frozen: bool = False  # normalize with running stats even in train mode

    @property
    def training(self):
        return self.mode == "train"


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base: recursive parameter/buffer collection in declaration order."""

    def parameters(self):
        out = []
        for v in vars(self).values():
            out.extend(_collect_params(v))
        return out

    def buffers(self):
        out = []
        for v in vars(self).values():
            out.extend(_collect_buffers(v))
        return out

    def __call__(self, x, ctx):
        return self.forward(x, ctx)


def _collect_params(v):
    if isinstance(v, Tensor) and v.requires_grad:
        return [v]
    if isinstance(v, Layer):
        return v.parameters()
    if isinstance(v, (list, tuple)):
        out = []
        for item in v:
            out.extend(_collect_params(item))
        return out
    return []


def _collect_buffers(v):
    if isinstance(v, Layer):
        return v.buffers()
    if isinstance(v, (list, tuple)):
        out = []
        for item in v:
            out.extend(_collect_buffers(item))
        return out
    return []


class Dense(Layer):
    def __init__(self, nin, nout, rng):
        self.w = Tensor(glorot_uniform(rng, (nin, nout), nin, nout), requires_grad=True)
        self.b = Tensor(np.zeros(nout), requires_grad=True)

    def forward(self, x, ctx):
        return t_add(matmul(x, self.w), self.b)


class Conv(Layer):
    def __init__(self, cin, cout, kh, kw, rng, stride=(1, 1), padding=(0, 0), groups=1):
        fan_in = (cin // groups) * kh * kw
        fan_out = (cout // groups) * kh * kw
        self.w = Tensor(
            glorot_uniform(rng, (cout, cin // groups, kh, kw), fan_in, fan_out),
            requires_grad=True,
        )
        self.b = Tensor(np.zeros(cout), requires_grad=True)
        self.stride = stride
        self.padding = padding
        self.groups = groups

    def forward(self, x, ctx):
        out = conv2d(x, self.w, self.stride, self.padding, self.groups)
        return t_add(out, reshape(self.b, (1, -1, 1, 1)))


class BatchNorm(Layer):
    """Batch normalization over the batch (and spatial axes for 4-D input).

    Training mode uses batch moments (eps inside the square root) and updates
    the running stats with momentum 0.1; inference and frozen mode normalize
    with the running stats as constants.
    """

    MOMENTUM = 0.1
    EPS = 1e-5

    def __init__(self, channels):
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def buffers(self):
        return [("running_mean", self), ("running_var", self)]

    def forward(self, x, ctx):
        if x.ndim == 4:
            axes, pshape = (0, 2, 3), (1, -1, 1, 1)
        elif x.ndim == 2:
            axes, pshape = (0,), (1, -1)
        else:
            raise ShapeError(f"batch norm expects 2-D or 4-D input, got {x.shape}")
        gamma = reshape(self.gamma, pshape)
        beta = reshape(self.beta, pshape)
        if ctx.training and not ctx.bn_frozen:
            if x.shape[0] < 2:
                raise ShapeError("batch norm needs batch size >= 2 in training mode")
            out, mu, var = normalize(x, gamma, beta, axes, eps=self.EPS)
            m = self.MOMENTUM
            self.running_mean = (1 - m) * self.running_mean + m * mu.reshape(-1)
            self.running_var = (1 - m) * self.running_var + m * var.reshape(-1)
            return out
        stats = (
            self.running_mean.reshape(pshape),
            self.running_var.reshape(pshape),
        )
        out, _, _ = normalize(x, gamma, beta, axes, eps=self.EPS, ext_stats=stats)
        return out


class LayerNorm(Layer):
    """Normalizes over one axis per slice; no running state."""

    EPS = 1e-5

    def __init__(self, dim, axis=-1):
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.axis = axis

    def forward(self, x, ctx):
        axis = self.axis if self.axis >= 0 else x.ndim + self.axis
        pshape = [1] * x.ndim
        pshape[axis] = -1
        gamma = reshape(self.gamma, tuple(pshape))
        beta = reshape(self.beta, tuple(pshape))
        out, _, _ = normalize(x, gamma, beta, (axis,), eps=self.EPS)
        return out


class Dropout(Layer):
    def __init__(self, p):
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p

    def forward(self, x, ctx):
        if not ctx.training or self.p == 0.0:
            return x
        return dropout(x, self.p, "train", ctx.rng)


class MultiHeadAttention(Layer):
    def __init__(self, d_model, n_heads, rng):
        if d_model % n_heads:
            raise ConfigError(f"d_model {d_model} not divisible by {n_heads} heads")
        self.n_heads = n_heads

        def proj():
            return (
                Tensor(glorot_uniform(rng, (d_model, d_model), d_model, d_model), requires_grad=True),
                Tensor(np.zeros(d_model), requires_grad=True),
            )

        self.wq, self.bq = proj()
        self.wk, self.bk = proj()
        self.wv, self.bv = proj()
        self.wo, self.bo = proj()

    def forward(self, x, ctx):
        return attention(
            x, x, x, self.n_heads,
            self.wq, self.wk, self.wv, self.wo,
            self.bq, self.bk, self.bv, self.bo,
        )


class FeedForward(Layer):
    def __init__(self, d_model, d_hidden, rng):
        self.fc1 = Dense(d_model, d_hidden, rng)
        self.fc2 = Dense(d_hidden, d_model, rng)

    def forward(self, x, ctx):
        return self.fc2(gelu(self.fc1(x, ctx)), ctx)


class TransformerBlock(Layer):
    """Pre-norm encoder block: attention and feed-forward residual branches."""

    def __init__(self, d_model, n_heads, d_ff, p_drop, rng):
        self.ln1 = LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, n_heads, rng)
        self.drop1 = Dropout(p_drop)
        self.ln2 = LayerNorm(d_model)
        self.ff = FeedForward(d_model, d_ff, rng)
        self.drop2 = Dropout(p_drop)

    def forward(self, x, ctx):
        x = t_add(x, self.drop1(self.attn(self.ln1(x, ctx), ctx), ctx))
        return t_add(x, self.drop2(self.ff(self.ln2(x, ctx), ctx), ctx))


class LSTMStack(Layer):
    """Stacked LSTM; returns the top layer's final hidden state.

    Each layer holds one combined weight over [x; h] producing the four
    gates (input, forget, cell, output) as contiguous chunks.
    """

    def __init__(self, nin, hidden, n_layers, rng):
        self.hidden = hidden
        self.n_layers = n_layers
        self.weights = []
        self.biases = []
        for layer in range(n_layers):
            d_in = nin if layer == 0 else hidden
            w = Tensor(
                glorot_uniform(rng, (d_in + hidden, 4 * hidden), d_in + hidden, 4 * hidden),
                requires_grad=True,
            )
            b = Tensor(np.zeros(4 * hidden), requires_grad=True)
            self.weights.append(w)
            self.biases.append(b)

    def forward(self, x, ctx):
        B, T, _ = x.shape
        nh = self.hidden
        h = [Tensor(np.zeros((B, nh))) for _ in range(self.n_layers)]
        c = [Tensor(np.zeros((B, nh))) for _ in range(self.n_layers)]
        for t in range(T):
            inp = reshape(narrow(x, 1, t, 1), (B, -1))
            for layer in range(self.n_layers):
                gates = t_add(
                    matmul(concat([inp, h[layer]], axis=1), self.weights[layer]),
                    self.biases[layer],
                )
                i_g = sigmoid(narrow(gates, 1, 0, nh))
                f_g = sigmoid(narrow(gates, 1, nh, nh))
                g_g = tanh(narrow(gates, 1, 2 * nh, nh))
                o_g = sigmoid(narrow(gates, 1, 3 * nh, nh))
                c[layer] = t_add(t_mul(f_g, c[layer]), t_mul(i_g, g_g))
                h[layer] = t_mul(o_g, tanh(c[layer]))
                inp = h[layer]
        return h[-1]


class InceptionBlock(Layer):
    """Parallel 3x3/5x5/7x7 branches, concatenated, projected, residual."""

    def __init__(self, channels, branch_width, rng):
        self.branches = []
        for k in (3, 5, 7):
            conv = Conv(channels, branch_width, k, k, rng, padding=(k // 2, k // 2))
            bn = BatchNorm(branch_width)
            self.branches.append((conv, bn))
        self.project = Conv(3 * branch_width, channels, 1, 1, rng)
        self.bn_out = BatchNorm(channels)

    def forward(self, x, ctx):
        outs = [relu(bn(conv(x, ctx), ctx)) for conv, bn in self.branches]
        merged = self.project(concat(outs, axis=1), ctx)
        return relu(t_add(self.bn_out(merged, ctx), x))


class ConvNeXtBlock(Layer):
    """Depthwise 7x7 -> channel layer-norm -> 1x1 expand -> GELU -> 1x1 project,
    with a residual connection."""

    def __init__(self, channels, rng):
        self.depthwise = Conv(channels, channels, 7, 7, rng, padding=(3, 3), groups=channels)
        self.norm = LayerNorm(channels, axis=1)
        self.expand = Conv(channels, 4 * channels, 1, 1, rng)
        self.project = Conv(4 * channels, channels, 1, 1, rng)

    def forward(self, x, ctx):
        h = self.norm(self.depthwise(x, ctx), ctx)
        h = self.project(gelu(self.expand(h, ctx)), ctx)
        return t_add(x, h)


class MaxPool(Layer):
    def __init__(self, pool):
        self.pool = pool

    def forward(self, x, ctx):
        return maxpool2d(x, self.pool)


class GlobalAvgPool(Layer):
    def forward(self, x, ctx):
        return mean(x, axis=(2, 3))


class Flatten(Layer):
    def forward(self, x, ctx):
        return reshape(x, (x.shape[0], -1))


class TwoDenseHead(Layer):
    """dense -> batch-norm -> relu -> dropout -> dense classification head."""

    def __init__(self, nin, hidden, nout, p_drop, rng):
        self.fc1 = Dense(nin, hidden, rng)
        self.bn = BatchNorm(hidden)
        self.drop = Dropout(p_drop)
        self.fc2 = Dense(hidden, nout, rng)

    def forward(self, x, ctx):
        h = self.drop(relu(self.bn(self.fc1(x, ctx), ctx)), ctx)
        return self.fc2(h, ctx)
