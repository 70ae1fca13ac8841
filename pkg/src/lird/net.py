"""Minimal dense feed-forward networks with exact reverse-mode gradients.

Just enough substrate for the actor and critic: matrix layers with
tanh/relu/identity activations, plain SGD, soft (Polyak) target updates,
and versioned checkpoints.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")

CHECKPOINT_VERSION = 1


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, a):
    # derivative wrt pre-activation z, given activation output a
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (n_in, n_out)
    bias: np.ndarray    # (n_out,)
    activation: str

    def copy(self) -> "Layer":
        return Layer(self.weight.copy(), self.bias.copy(), self.activation)


class DenseNet:
    """A stack of dense layers; value-semantic via copy()."""

    def __init__(self, layers: list[Layer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise ValueError("layer dimensions do not chain")
        self.layers = layers

    @classmethod
    def create(cls, sizes, activations, rng) -> "DenseNet":
        """Uniform +-1/sqrt(fan_in) initialization, seeded via rng."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for n_in, n_out, act in zip(sizes, sizes[1:], activations):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
            bound = 1.0 / np.sqrt(n_in)
            layers.append(
                Layer(rng.uniform(-bound, bound, size=(n_in, n_out)),
                      rng.uniform(-bound, bound, size=(n_out,)),
                      act)
            )
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def n_out(self) -> int:
        return self.layers[-1].weight.shape[1]

    @property
    def sizes(self) -> list[int]:
        return [self.n_in] + [l.weight.shape[1] for l in self.layers]

    @property
    def activations(self) -> list[str]:
        return [l.activation for l in self.layers]

    def copy(self) -> "DenseNet":
        return DenseNet([l.copy() for l in self.layers])

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"input width {x.shape[-1]} != {self.n_in}")
        a = x
        for layer in self.layers:
            a = _act(layer.activation, a @ layer.weight + layer.bias)
        return a

    def backward(self, x: np.ndarray, upstream: np.ndarray):
        """Exact gradients of sum(upstream * forward(x)).

        Returns (grads, input_grad) where grads is a list of (dW, db)
        congruent with the layers. Batched inputs accumulate over the batch.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
            upstream = np.asarray(upstream, dtype=float)[None, :]
        acts = [x]
        zs = []
        a = x
        for layer in self.layers:
            z = a @ layer.weight + layer.bias
            a = _act(layer.activation, z)
            zs.append(z)
            acts.append(a)
        if upstream.shape != a.shape:
            raise ValueError(f"upstream shape {upstream.shape} != output {a.shape}")

        grads = [None] * len(self.layers)
        delta = np.asarray(upstream, dtype=float)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            delta = delta * _act_grad(layer.activation, zs[i], acts[i + 1])
            grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
            delta = delta @ layer.weight.T
        return grads, (delta[0] if single else delta)

    def apply_update(self, grads, lr: float) -> None:
        """params <- params - lr * grads (plain SGD)."""
        for layer, (d_w, d_b) in zip(self.layers, grads):
            if not (np.all(np.isfinite(d_w)) and np.all(np.isfinite(d_b))):
                raise FloatingPointError("non-finite gradient: training diverged")
            layer.weight -= lr * d_w
            layer.bias -= lr * d_b

    def flat_params(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([l.weight.ravel(), l.bias.ravel()]) for l in self.layers]
        )

    def set_flat_params(self, flat: np.ndarray) -> None:
        pos = 0
        for layer in self.layers:
            n = layer.weight.size
            layer.weight[...] = flat[pos : pos + n].reshape(layer.weight.shape)
            pos += n
            n = layer.bias.size
            layer.bias[...] = flat[pos : pos + n]
            pos += n
        if pos != len(flat):
            raise ValueError("flat parameter vector has wrong length")

    def checksum(self) -> int:
        return zlib.crc32(np.ascontiguousarray(self.flat_params()).tobytes())


def soft_update(target: DenseNet, source: DenseNet, tau: float) -> None:
    """target <- tau * source + (1 - tau) * target, elementwise."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0,1], got {tau}")
    for t, s in zip(target.layers, source.layers):
        t.weight *= 1.0 - tau
        t.weight += tau * s.weight
        t.bias *= 1.0 - tau
        t.bias += tau * s.bias


def save_checkpoint(path, nets: dict[str, DenseNet], meta: dict | None = None) -> None:
    arrays = {}
    descr = {"version": CHECKPOINT_VERSION, "nets": {}, "meta": meta or {}}
    for tag, net in nets.items():
        descr["nets"][tag] = {"sizes": net.sizes, "activations": net.activations}
        for i, layer in enumerate(net.layers):
            arrays[f"{tag}__w{i}"] = layer.weight
            arrays[f"{tag}__b{i}"] = layer.bias
    arrays["__descr__"] = np.frombuffer(
        json.dumps(descr, sort_keys=True).encode(), dtype=np.uint8
    )
    np.savez(path, **arrays)


def load_checkpoint(path, expect: dict[str, list[int]] | None = None):
    """Load nets from a checkpoint; returns (nets, meta).

    `expect` maps tag -> sizes and makes the load fail on architecture
    mismatch.
    """
    with np.load(path) as data:
        descr = json.loads(bytes(data["__descr__"]).decode())
        if descr["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {descr['version']}")
        nets = {}
        for tag, info in descr["nets"].items():
            layers = [
                Layer(data[f"{tag}__w{i}"].copy(), data[f"{tag}__b{i}"].copy(), act)
                for i, act in enumerate(info["activations"])
            ]
            nets[tag] = DenseNet(layers)
            if expect is not None and tag in expect and nets[tag].sizes != list(expect[tag]):
                raise ValueError(
                    f"checkpoint {tag} architecture {nets[tag].sizes} != expected {expect[tag]}"
                )
    return nets, descr["meta"]
