"""Small MLPs over a flat parameter vector, usable traced or untraced."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError

ACTIVATIONS = ("sigmoid", "linear")


@dataclass(frozen=True)
class MlpLayout:
    """Architecture descriptor: layer sizes plus one activation tag per layer."""

    sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.sizes) < 2:
            raise ConfigError("an MLP needs at least input and output sizes")
        if any(s < 1 for s in self.sizes):
            raise ConfigError("layer sizes must be positive")
        if len(self.activations) != len(self.sizes) - 1:
            raise ConfigError("need one activation tag per layer")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation: {act!r}")

    @property
    def layer_pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.sizes[:-1], self.sizes[1:]))

    @property
    def n_params(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in self.layer_pairs)

    @classmethod
    def one_hidden(cls, n_in: int, hidden: int, n_out: int) -> "MlpLayout":
        """Sigmoid hidden layer, linear output."""
        return cls((n_in, hidden, n_out), ("sigmoid", "linear"))


def glorot_init(layout: MlpLayout, rng: np.random.Generator) -> np.ndarray:
    """Uniform Glorot weights, zero biases, flattened in layer order."""
    parts = []
    for n_in, n_out in layout.layer_pairs:
        limit = np.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-limit, limit, n_in * n_out))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts)


def mlp_forward(params, layout: MlpLayout, x):
    """Composed affine + activation layers; params is a flat vector (Var or ndarray).

    x may be a single (n_in,) vector or a (batch, n_in) matrix.
    """
    n_in_expected = layout.sizes[0]
    xv = ad.value_of(x)
    if xv.shape[-1] != n_in_expected:
        raise ShapeError(
            f"input has {xv.shape[-1]} features, layout expects {n_in_expected}"
        )
    pv = ad.value_of(params)
    if pv.shape != (layout.n_params,):
        raise ShapeError(
            f"parameter vector has shape {pv.shape}, layout needs ({layout.n_params},)"
        )
    offset = 0
    for (n_in, n_out), act in zip(layout.layer_pairs, layout.activations):
        w = params[offset : offset + n_in * n_out].reshape(n_in, n_out)
        offset += n_in * n_out
        b = params[offset : offset + n_out]
        offset += n_out
        x = ad.matmul(x, w) + b
        if act == "sigmoid":
            x = ad.sigmoid(x)
    return x
