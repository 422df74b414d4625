"""Sequential networks, the three architectures used by the pipeline, and
checkpoint files."""

from __future__ import annotations

import json

import numpy as np

from .layers import (ConvTranspose2d, Conv2d, Flatten, Layer, Linear, ReLU, ShapeError,
                     Tanh, layer_from_spec)

LATENT_SIZE = 2048
IMAGE_SIZE = 220
CHECKPOINT_MAGIC = "ffdrecon-checkpoint-v1"


class CheckpointError(ValueError):
    pass


class Network:
    """Ordered layers with shape checking at construction.

    ``latent_index`` (optional) marks the layer count of an encoder prefix;
    :meth:`encode` runs that prefix and flattens the result.
    """

    def __init__(self, layers, input_shape, seed=0, dtype=np.float64, latent_index=None,
                 name="network"):
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.dtype = np.dtype(dtype)
        self.seed = int(seed)
        self.latent_index = latent_index
        self.name = name
        self.step_count = 0
        self.shapes = [self.input_shape]
        for layer in self.layers:
            self.shapes.append(tuple(layer.output_shape(self.shapes[-1])))
        rng = np.random.default_rng(self.seed)
        for layer in self.layers:
            layer.init_params(rng, self.dtype)

    @property
    def output_shape(self):
        return self.shapes[-1]

    def parameters(self) -> dict:
        """``{"<layer>.<name>": array}`` in declaration order (arrays are live)."""
        out = {}
        for i, layer in enumerate(self.layers):
            for k, p in layer.params.items():
                out[f"{i}.{k}"] = p
        return out

    def gradients(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for k, g in layer.grads.items():
                out[f"{i}.{k}"] = g
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            if x.shape == self.input_shape:
                x = x[None]
            else:
                raise ShapeError(f"{self.name}: input {x.shape} does not match {self.input_shape}")
        return x

    def forward(self, x, stop=None):
        x = self._check_input(x)
        for layer in self.layers[:stop]:
            x = layer.forward(x)
        return x

    __call__ = forward

    def backward(self, grad, stop=None):
        for layer in reversed(self.layers[:stop]):
            grad = layer.backward(grad)
        return grad

    def trace(self):
        """Per-layer output shapes, input first."""
        return list(self.shapes)

    def encode(self, x):
        if self.latent_index is None:
            raise ValueError(f"{self.name} has no encoder prefix")
        x = self._check_input(x)
        return self.forward(x, stop=self.latent_index).reshape(len(x), -1)

    def specs(self):
        return [layer.spec() for layer in self.layers]


def build_cae(seed=0, dtype=np.float64) -> Network:
    """Three stride-3 convolutions down to 32x8x8, mirrored back up to
    1x220x220; ReLU everywhere except the final Tanh."""
    layers = [
        Conv2d(1, 8, 5, 3), ReLU(),
        Conv2d(8, 16, 3, 3), ReLU(),
        Conv2d(16, 32, 3, 3), ReLU(),
        ConvTranspose2d(32, 16, 3, 3), ReLU(),
        ConvTranspose2d(16, 8, 3, 3), ReLU(),
        # (72 - 1) * 3 + 5 = 218; two rows of output padding reach 220.
        ConvTranspose2d(8, 1, 5, 3, output_padding=2), Tanh(),
    ]
    return Network(layers, (1, IMAGE_SIZE, IMAGE_SIZE), seed, dtype, latent_index=6, name="cae")


def build_classifier(num_labels, seed=0, dtype=np.float64) -> Network:
    if num_labels < 2:
        raise ValueError("classifier needs at least 2 labels")
    layers = [Linear(LATENT_SIZE, 1050), ReLU(), Linear(1050, num_labels)]
    return Network(layers, (LATENT_SIZE,), seed, dtype, name="classifier")


def build_regressor(out_dim, seed=0, dtype=np.float64) -> Network:
    if out_dim < 1:
        raise ValueError("out_dim must be >= 1")
    layers = [Linear(LATENT_SIZE, 1500), ReLU(), Linear(1500, out_dim)]
    return Network(layers, (LATENT_SIZE,), seed, dtype, name="regressor")


def predict(network: Network, x):
    return network.forward(x)


def save_checkpoint(network: Network, path) -> None:
    """One JSON header line, then every parameter as little-endian float64 in
    declaration order."""
    params = network.parameters()
    header = {
        "magic": CHECKPOINT_MAGIC,
        "name": network.name,
        "input_shape": list(network.input_shape),
        "layers": network.specs(),
        "latent_index": network.latent_index,
        "seed": network.seed,
        "dtype": network.dtype.name,
        "step_count": network.step_count,
        "params": [[k, list(p.shape)] for k, p in params.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for p in params.values():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> Network:
    with open(path, "rb") as fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable header ({exc})") from None
        if header.get("magic") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint")
        body = fh.read()
    layers = [layer_from_spec(s) for s in header["layers"]]
    net = Network(layers, header["input_shape"], header["seed"], header["dtype"],
                  header["latent_index"], header["name"])
    net.step_count = header["step_count"]
    params = net.parameters()
    expected = sum(int(np.prod(s)) for _, s in header["params"])
    if len(body) != 8 * expected or [k for k, _ in header["params"]] != list(params):
        raise CheckpointError(f"{path}: parameter block does not match header")
    flat = np.frombuffer(body, dtype="<f8")
    off = 0
    for key, p in params.items():
        p[...] = flat[off:off + p.size].reshape(p.shape)
        off += p.size
    return net


__all__ = [
    "CheckpointError", "Layer", "Network", "build_cae", "build_classifier", "build_regressor",
    "load_checkpoint", "predict", "save_checkpoint",
]
