"""Layers built on the tensor engine: linear maps, embeddings, transformer blocks, char CNN."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from . import tensor as T
from .tensor import Parameter, Tensor


class Module:
    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def assign_names(self):
        for name, p in self.named_parameters():
            p.name = name

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise T.ShapeError(f"{name}: checkpoint shape {state[name].shape} != model shape {p.shape}")
            p.data = np.array(state[name], dtype=p.data.dtype)

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape if shape is not None else (fan_in, fan_out))


class Linear(Module):
    def __init__(self, rng, n_in: int, n_out: int, bias: bool = True):
        self.weight = Parameter("", xavier(rng, n_in, n_out))
        self.bias = Parameter("", np.zeros(n_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class Embedding(Module):
    def __init__(self, rng, num: int, dim: int):
        self.weight = Parameter("", rng.normal(0.0, dim**-0.5, size=(num, dim)))

    def __call__(self, indices) -> Tensor:
        return T.embedding_lookup(self.weight, indices)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = Parameter("", np.ones(dim))
        self.beta = Parameter("", np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta)


class FeedForward(Module):
    def __init__(self, rng, dim: int, hidden: int):
        self.inner = Linear(rng, dim, hidden)
        self.outer = Linear(rng, hidden, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.outer(T.gelu(self.inner(x)))


class SelfAttention(Module):
    """Standard multi-head self-attention; heads split the hidden size."""

    def __init__(self, rng, dim: int, heads: int):
        if dim % heads:
            raise ValueError(f"hidden size {dim} is not divisible by {heads} heads")
        self.heads = heads
        self.query = Linear(rng, dim, dim)
        # a key bias shifts every score of a query equally, so softmax ignores it
        self.key = Linear(rng, dim, dim, bias=False)
        self.value = Linear(rng, dim, dim)
        self.output = Linear(rng, dim, dim)
        self.last_weights: np.ndarray | None = None

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        length, dim = x.shape
        h, dh = self.heads, dim // self.heads

        def split(t: Tensor) -> Tensor:
            return T.transpose(t.reshape(length, h, dh), (1, 0, 2))

        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        scores = (q @ T.transpose(k, (0, 2, 1))) * (1.0 / np.sqrt(dh))
        weights = T.softmax(scores, axis=-1, mask=None if mask is None else mask[None])
        self.last_weights = weights.data
        context = T.transpose(weights @ v, (1, 0, 2)).reshape(length, dim)
        return self.output(context)


class TransformerLayer(Module):
    def __init__(self, rng, dim: int, heads: int, ffn: int):
        self.attention = SelfAttention(rng, dim, heads)
        self.norm1 = LayerNorm(dim)
        self.ffn = FeedForward(rng, dim, ffn)
        self.norm2 = LayerNorm(dim)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        x = self.norm1(x + self.attention(x, mask))
        return self.norm2(x + self.ffn(x))


class CharCNN(Module):
    """Character n-gram convolution, max-pooled over time and projected."""

    def __init__(self, rng, num_chars: int, char_dim: int, filters: int, width: int, output: int):
        self.width = width
        self.embedding = Embedding(rng, num_chars, char_dim)
        self.conv_weight = Parameter("", xavier(rng, width * char_dim, filters))
        self.conv_bias = Parameter("", np.zeros(filters))
        self.projection = Linear(rng, filters, output)

    def __call__(self, words: Sequence[Sequence[int]], pad: int = 0) -> Tensor:
        longest = max(max(len(w) for w in words), self.width)
        index = np.full((len(words), longest), pad, dtype=np.int64)
        lengths = np.array([len(w) for w in words])
        for i, w in enumerate(words):
            index[i, : len(w)] = w
        chars = self.embedding(index)
        conv = T.conv1d(chars, self.conv_weight, self.conv_bias, self.width)
        starts = np.arange(conv.shape[1])
        valid = starts[None, :] <= np.maximum(lengths - self.width, 0)[:, None]
        return self.projection(T.maxpool_over_time(conv, valid))


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    position = np.arange(length)[:, None]
    rate = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(position * rate)
    table[:, 1::2] = np.cos(position * rate[: dim // 2])
    return table
