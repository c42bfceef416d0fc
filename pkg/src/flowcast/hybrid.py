"""Hybrid LSTM / CNN forecasters: twelve named architectures, one forward rule.

Each model runs three input streams (near-term, daily, weekly) through the
same block topology, concatenates the flattened stream outputs, and applies a
dense regression head producing an h-step forecast for every station.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .autodiff import Tensor, concat, reshape
from .layers import (
    ConvLayerParams,
    ConvStackSpec,
    DenseParams,
    LstmParams,
    conv_stack,
    dense,
    init_conv_stack,
    init_dense,
    init_lstm,
    lstm_layer,
)

LSTM_ONLY = "lstm-only"
SERIES_LSTM_CNN = "series-lstm-cnn"
SERIES_CNN_LSTM = "series-cnn-lstm"
PARALLEL = "parallel"
SERIES_PARALLEL_D = "series-parallel-d"
SERIES_PARALLEL_E = "series-parallel-e"

KINDS = (
    LSTM_ONLY,
    SERIES_LSTM_CNN,
    SERIES_CNN_LSTM,
    PARALLEL,
    SERIES_PARALLEL_D,
    SERIES_PARALLEL_E,
)

# kernel cascade per CNN depth; the single-layer variant uses the widest kernel
KERNEL_CASCADES = {1: (4,), 3: (4, 3, 2)}


@dataclass(frozen=True)
class Topology:
    """Block arrangement plus LSTM and CNN depths."""

    kind: str
    lstm_depth: int
    cnn_depth: int

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown topology kind {self.kind!r}")
        allowed = {(1, 0), (2, 0)} if self.kind == LSTM_ONLY else {(1, 1), (2, 3)}
        if (self.lstm_depth, self.cnn_depth) not in allowed:
            raise ValueError(
                f"depths (lstm={self.lstm_depth}, cnn={self.cnn_depth}) "
                f"not available for kind {self.kind!r}"
            )

    @property
    def conv_spec(self) -> ConvStackSpec | None:
        if self.cnn_depth == 0:
            return None
        return ConvStackSpec(KERNEL_CASCADES[self.cnn_depth])

    @property
    def concat_width_factor(self) -> int:
        """Station-axis width of one stream's output, in multiples of p."""
        return 2 if self.kind in (PARALLEL, SERIES_PARALLEL_D, SERIES_PARALLEL_E) else 1


ARCHITECTURES: dict[str, Topology] = {
    "LSTM1": Topology(LSTM_ONLY, 1, 0),
    "LSTM2": Topology(LSTM_ONLY, 2, 0),
    "LSTM1-S-CNN1": Topology(SERIES_LSTM_CNN, 1, 1),
    "LSTM2-S-CNN3": Topology(SERIES_LSTM_CNN, 2, 3),
    "CNN1-S-LSTM1": Topology(SERIES_CNN_LSTM, 1, 1),
    "CNN3-S-LSTM2": Topology(SERIES_CNN_LSTM, 2, 3),
    "LSTM1-P-CNN1": Topology(PARALLEL, 1, 1),
    "LSTM2-P-CNN3": Topology(PARALLEL, 2, 3),
    "LSTM1-SP-CNN1": Topology(SERIES_PARALLEL_D, 1, 1),
    "LSTM2-SP-CNN3": Topology(SERIES_PARALLEL_D, 2, 3),
    "CNN1-SP-LSTM1": Topology(SERIES_PARALLEL_E, 1, 1),
    "CNN3-SP-LSTM2": Topology(SERIES_PARALLEL_E, 2, 3),
}


@dataclass(frozen=True)
class ModelSpec:
    topology: Topology
    p: int
    n: int
    h: int
    streams: int = 3
    share_weights: bool = False

    def __post_init__(self) -> None:
        if self.streams != 3:
            raise ValueError("models take exactly three input streams")
        if min(self.p, self.n, self.h) < 1:
            raise ValueError(f"p, n, h must be positive: {(self.p, self.n, self.h)}")

    @property
    def head_in_width(self) -> int:
        return self.streams * self.topology.concat_width_factor * self.p * self.n

    @property
    def head_out_width(self) -> int:
        return self.p * self.h


@dataclass
class StreamBlocks:
    """Parameters for one input stream: stacked LSTMs plus a conv cascade."""

    lstms: list[LstmParams]
    convs: list[ConvLayerParams]


@dataclass
class Model:
    spec: ModelSpec
    blocks: list[StreamBlocks]
    head: DenseParams

    def blocks_for_stream(self, index: int) -> StreamBlocks:
        return self.blocks[0] if self.spec.share_weights else self.blocks[index]


def build(spec: ModelSpec, seed: int) -> Model:
    """Initialize a model deterministically from the seed."""
    rng = np.random.default_rng(seed)
    copies = 1 if spec.share_weights else spec.streams
    blocks = []
    for _ in range(copies):
        lstms = [init_lstm(rng, spec.p) for _ in range(spec.topology.lstm_depth)]
        conv_spec = spec.topology.conv_spec
        convs = init_conv_stack(rng, conv_spec) if conv_spec else []
        blocks.append(StreamBlocks(lstms=lstms, convs=convs))
    head = init_dense(rng, spec.head_out_width, spec.head_in_width)
    return Model(spec=spec, blocks=blocks, head=head)


def apply_topology(topology: Topology, blocks: StreamBlocks, x: Tensor) -> Tensor:
    """Run one stream's blocks over a [p, n] or [p, n, batch] input."""

    def lstm_chain(t: Tensor) -> Tensor:
        for params in blocks.lstms:
            t = lstm_layer(params, t)
        return t

    def conv_chain(t: Tensor) -> Tensor:
        return conv_stack(topology.conv_spec, blocks.convs, t)

    kind = topology.kind
    if kind == LSTM_ONLY:
        return lstm_chain(x)
    if kind == SERIES_LSTM_CNN:
        return conv_chain(lstm_chain(x))
    if kind == SERIES_CNN_LSTM:
        return lstm_chain(conv_chain(x))
    if kind == PARALLEL:
        return concat([lstm_chain(x), conv_chain(x)], axis=0)
    if kind == SERIES_PARALLEL_D:
        mid = lstm_chain(x)
        return concat([mid, conv_chain(mid)], axis=0)
    mid = conv_chain(x)
    return concat([mid, lstm_chain(mid)], axis=0)


def forward_streams(model: Model, xs: Sequence[Tensor]) -> Tensor:
    """Core forward pass over already-wrapped stream tensors."""
    spec = model.spec
    if len(xs) != spec.streams:
        raise ValueError(f"expected {spec.streams} streams, got {len(xs)}")
    batched = xs[0].data.ndim == 3
    flats = []
    for index, x in enumerate(xs):
        if x.data.shape[:2] != (spec.p, spec.n):
            raise ValueError(
                f"stream {index} has shape {x.data.shape}, "
                f"expected leading dims ({spec.p}, {spec.n})"
            )
        out = apply_topology(spec.topology, model.blocks_for_stream(index), x)
        width = out.data.shape[0] * out.data.shape[1]
        tail = out.data.shape[2] if batched else 1
        flats.append(reshape(out, (width, tail)))
    pooled = concat(flats, axis=0)
    predictions = dense(model.head.W, model.head.b, pooled)
    if batched:
        return reshape(predictions, (spec.p, spec.h, predictions.data.shape[1]))
    return reshape(predictions, (spec.p, spec.h))


def forward(model: Model, sample) -> Tensor:
    """Forecast one window sample; returns a [p, h] tensor."""
    xs = [Tensor(sample.s), Tensor(sample.s_d), Tensor(sample.s_w)]
    return forward_streams(model, xs)


def forward_batch(model: Model, s, s_d, s_w) -> Tensor:
    """Forecast a batch stacked on a trailing axis; returns [p, h, batch]."""
    xs = [t if isinstance(t, Tensor) else Tensor(t) for t in (s, s_d, s_w)]
    return forward_streams(model, xs)


def named_parameters(model: Model) -> Iterator[tuple[str, Tensor]]:
    """Deterministically ordered (name, tensor) pairs, no duplicates."""
    for index, blocks in enumerate(model.blocks):
        prefix = "shared" if model.spec.share_weights else f"stream{index}"
        for depth, lstm in enumerate(blocks.lstms):
            for name, tensor in lstm.named():
                yield f"{prefix}.lstm{depth}.{name}", tensor
        for depth, conv in enumerate(blocks.convs):
            for name, tensor in conv.named():
                yield f"{prefix}.conv{depth}.{name}", tensor
    for name, tensor in model.head.named():
        yield f"head.{name}", tensor


def parameters(model: Model) -> list[Tensor]:
    return [tensor for _, tensor in named_parameters(model)]


def parameter_count(model: Model) -> int:
    return sum(tensor.data.size for tensor in parameters(model))
