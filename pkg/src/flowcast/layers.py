"""Neural building blocks: LSTM layers, station-axis conv stacks, dense heads.

Every block maps a station-by-time array to another array of the same shape,
so blocks compose freely in series or in parallel.  Inputs may carry an extra
trailing batch axis; all blocks treat it uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .autodiff import (
    Tensor,
    add,
    add_bias,
    concat,
    conv1d_same,
    matmul,
    mul,
    relu,
    reshape,
    sigmoid,
    slice_axis,
    tanh,
)

GATES = ("f", "i", "c", "o")


@dataclass
class LstmParams:
    """Gate parameters for one LSTM layer; hidden size equals input size."""

    W_f: Tensor
    U_f: Tensor
    b_f: Tensor
    W_i: Tensor
    U_i: Tensor
    b_i: Tensor
    W_c: Tensor
    U_c: Tensor
    b_c: Tensor
    W_o: Tensor
    U_o: Tensor
    b_o: Tensor

    def __post_init__(self) -> None:
        size = self.size
        for name, tensor in self.named():
            expect = (size,) if name.startswith("b") else (size, size)
            if tensor.data.shape != expect:
                raise ValueError(
                    f"{name} has shape {tensor.data.shape}, expected {expect}"
                )

    @property
    def size(self) -> int:
        return self.W_f.data.shape[0]

    def named(self) -> Iterator[tuple[str, Tensor]]:
        for gate in GATES:
            for kind in ("W", "U", "b"):
                name = f"{kind}_{gate}"
                yield name, getattr(self, name)


@dataclass
class LstmState:
    """Hidden and cell vectors carried between timesteps."""

    h: Tensor
    c: Tensor


@dataclass(frozen=True)
class ConvStackSpec:
    """Ordered 1D kernel sizes; ReLU follows every conv layer."""

    kernel_sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.kernel_sizes:
            raise ValueError("conv stack needs at least one kernel size")
        if any(k < 1 for k in self.kernel_sizes):
            raise ValueError(f"kernel sizes must be positive: {self.kernel_sizes}")


@dataclass
class ConvLayerParams:
    """One conv layer: kernels [out_ch, in_ch, k] and per-channel bias."""

    kernel: Tensor
    bias: Tensor

    def named(self) -> Iterator[tuple[str, Tensor]]:
        yield "kernel", self.kernel
        yield "bias", self.bias


@dataclass
class DenseParams:
    """Affine map weights [out, in] and bias [out]."""

    W: Tensor
    b: Tensor

    def named(self) -> Iterator[tuple[str, Tensor]]:
        yield "W", self.W
        yield "b", self.b


def zero_state(size: int, width: int = 1) -> LstmState:
    """Fresh all-zero state; width is the trailing batch extent."""
    return LstmState(
        h=Tensor(np.zeros((size, width))), c=Tensor(np.zeros((size, width)))
    )


def _gate(W: Tensor, U: Tensor, b: Tensor, x: Tensor, h: Tensor) -> Tensor:
    return add_bias(add(matmul(W, x), matmul(U, h)), b)


def _step_2d(params: LstmParams, x: Tensor, h: Tensor, c: Tensor) -> LstmState:
    f = sigmoid(_gate(params.W_f, params.U_f, params.b_f, x, h))
    i = sigmoid(_gate(params.W_i, params.U_i, params.b_i, x, h))
    z = tanh(_gate(params.W_c, params.U_c, params.b_c, x, h))
    c_new = add(mul(f, c), mul(i, z))
    o = sigmoid(_gate(params.W_o, params.U_o, params.b_o, x, h))
    return LstmState(h=mul(o, tanh(c_new)), c=c_new)


def lstm_step(params: LstmParams, x: Tensor, prev: LstmState) -> LstmState:
    """One timestep: gate activations, cell update, gated tanh output.

    Accepts a vector (one sample) or a matrix whose trailing axis is a batch.
    """
    if x.data.ndim == 1:
        size = x.data.shape[0]
        state = _step_2d(
            params,
            reshape(x, (size, 1)),
            reshape(prev.h, (size, 1)),
            reshape(prev.c, (size, 1)),
        )
        return LstmState(reshape(state.h, (size,)), reshape(state.c, (size,)))
    if x.data.ndim != 2:
        raise ValueError(f"lstm_step input must be 1-D or 2-D, got {x.data.shape}")
    return _step_2d(params, x, prev.h, prev.c)


def lstm_layer(params: LstmParams, seq: Tensor) -> Tensor:
    """Run the cell over columns oldest to newest; column t of the output is h_t.

    seq is [p, n] or [p, n, batch]; the output shape matches the input.
    """
    shape = seq.data.shape
    if seq.data.ndim not in (2, 3):
        raise ValueError(f"lstm_layer input must be 2-D or 3-D, got {shape}")
    p, n = shape[0], shape[1]
    if n == 0:
        raise ValueError("lstm_layer needs at least one time column")
    width = 1 if seq.data.ndim == 2 else shape[2]
    state = zero_state(p, width)
    columns = []
    for t in range(n):
        x = reshape(slice_axis(seq, 1, t, t + 1), (p, width))
        state = _step_2d(params, x, state.h, state.c)
        columns.append(state.h)
    stacked = concat([reshape(col, (p, 1, width)) for col in columns], axis=1)
    return reshape(stacked, shape)


def conv_stack(spec: ConvStackSpec, params: list[ConvLayerParams], seq: Tensor) -> Tensor:
    """Convolve each time column along the station axis, ReLU after each layer.

    Kernels are shared across time columns (and the batch axis, if present).
    """
    if len(params) != len(spec.kernel_sizes):
        raise ValueError(
            f"{len(params)} parameter sets for {len(spec.kernel_sizes)} kernel sizes"
        )
    shape = seq.data.shape
    p = shape[0]
    widest = max(spec.kernel_sizes)
    if p < widest:
        raise ValueError(f"station axis length {p} is shorter than kernel {widest}")
    x = reshape(seq, (1,) + shape)
    for layer, k in zip(params, spec.kernel_sizes):
        if layer.kernel.data.shape[2] != k:
            raise ValueError(
                f"kernel width {layer.kernel.data.shape[2]} does not match spec {k}"
            )
        x = relu(conv1d_same(x, layer.kernel, layer.bias))
    if x.data.shape[0] != 1:
        raise ValueError("conv stack must end with a single channel")
    return reshape(x, shape)


def dense(weights: Tensor, bias: Tensor, x: Tensor) -> Tensor:
    """Affine regression head, no activation."""
    if x.data.ndim == 1:
        out = add_bias(matmul(weights, reshape(x, (x.data.shape[0], 1))), bias)
        return reshape(out, (weights.data.shape[0],))
    return add_bias(matmul(weights, x), bias)


def glorot_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int
) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


def init_lstm(rng: np.random.Generator, size: int) -> LstmParams:
    """Glorot weights; zero biases except the forget gate, which starts at 1."""
    fields = {}
    for gate in GATES:
        fields[f"W_{gate}"] = glorot_uniform(rng, (size, size), size, size)
        fields[f"U_{gate}"] = glorot_uniform(rng, (size, size), size, size)
        start = np.ones(size) if gate == "f" else np.zeros(size)
        fields[f"b_{gate}"] = Tensor(start, requires_grad=True)
    return LstmParams(**fields)


def init_conv_stack(
    rng: np.random.Generator, spec: ConvStackSpec
) -> list[ConvLayerParams]:
    layers = []
    for k in spec.kernel_sizes:
        layers.append(
            ConvLayerParams(
                kernel=glorot_uniform(rng, (1, 1, k), k, k),
                bias=Tensor(np.zeros(1), requires_grad=True),
            )
        )
    return layers


def init_dense(rng: np.random.Generator, out_size: int, in_size: int) -> DenseParams:
    return DenseParams(
        W=glorot_uniform(rng, (out_size, in_size), in_size, out_size),
        b=Tensor(np.zeros(out_size), requires_grad=True),
    )
