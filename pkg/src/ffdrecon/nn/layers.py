"""Layers with hand-written backward passes. Activations are batched
``(B, C, H, W)`` for spatial layers and ``(B, F)`` for dense ones."""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class StateError(RuntimeError):
    pass


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def spec(self) -> dict:
        return {"kind": self.kind}

    def output_shape(self, in_shape):
        return in_shape

    def init_params(self, rng, dtype):
        pass

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def _cached(self):
        if self._cache is None:
            raise StateError(f"{self.kind}: backward called before forward")
        return self._cache

    def zero_grad(self):
        for k, p in self.params.items():
            self.grads[k] = np.zeros_like(p)


def _uniform(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def conv_out_size(size, kernel, stride, padding):
    out = (size + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ShapeError(f"conv output size {out} < 1 for input {size}")
    return out


def tconv_out_size(size, kernel, stride, padding, output_padding):
    out = (size - 1) * stride - 2 * padding + kernel + output_padding
    if out < 1:
        raise ShapeError(f"transposed conv output size {out} < 1 for input {size}")
    return out


class Conv2d(Layer):
    """Cross-correlation with bias. Weight ``(out, in, k, k)``."""

    kind = "conv"

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0):
        super().__init__()
        self.cin, self.cout = int(in_channels), int(out_channels)
        self.k, self.s, self.p = int(kernel), int(stride), int(padding)

    def spec(self):
        return {"kind": self.kind, "in_channels": self.cin, "out_channels": self.cout,
                "kernel": self.k, "stride": self.s, "padding": self.p}

    def output_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.cin:
            raise ShapeError(f"conv expects {self.cin} channels, got {c}")
        return (self.cout, conv_out_size(h, self.k, self.s, self.p),
                conv_out_size(w, self.k, self.s, self.p))

    def init_params(self, rng, dtype):
        fan_in = self.cin * self.k * self.k
        self.params["weight"] = _uniform(rng, fan_in, (self.cout, self.cin, self.k, self.k), dtype)
        self.params["bias"] = _uniform(rng, fan_in, (self.cout,), dtype)
        self.zero_grad()

    def _cols(self, xp, ho, wo):
        # (B, C, k, k, Ho, Wo) gathered with strided slices.
        k, s = self.k, self.s
        b, c = xp.shape[:2]
        cols = np.empty((b, c, k, k, ho, wo), dtype=xp.dtype)
        for di in range(k):
            for dj in range(k):
                cols[:, :, di, dj] = xp[:, :, di:di + s * ho:s, dj:dj + s * wo:s]
        return cols

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"conv expects (B, C, H, W), got {x.shape}")
        _, ho, wo = self.output_shape(x.shape[1:])
        p = self.p
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = self._cols(xp, ho, wo)
        w = self.params["weight"].reshape(self.cout, -1)
        b = x.shape[0]
        flat = cols.reshape(b, -1, ho * wo)
        out = np.matmul(w, flat).reshape(b, self.cout, ho, wo)
        out += self.params["bias"][None, :, None, None]
        self._cache = (x.shape, xp.shape, flat)
        return out

    def backward(self, grad):
        x_shape, xp_shape, flat = self._cached()
        b, _, ho, wo = grad.shape
        g = grad.reshape(b, self.cout, ho * wo)
        w = self.params["weight"].reshape(self.cout, -1)
        self.grads["weight"] = np.einsum("bol,bcl->oc", g, flat).reshape(self.params["weight"].shape)
        self.grads["bias"] = g.sum(axis=(0, 2))
        dcols = np.matmul(w.T, g).reshape(b, self.cin, self.k, self.k, ho, wo)
        dxp = np.zeros(xp_shape, dtype=grad.dtype)
        k, s = self.k, self.s
        for di in range(k):
            for dj in range(k):
                dxp[:, :, di:di + s * ho:s, dj:dj + s * wo:s] += dcols[:, :, di, dj]
        p = self.p
        if p:
            dxp = dxp[:, :, p:p + x_shape[2], p:p + x_shape[3]]
        return dxp


class ConvTranspose2d(Layer):
    """Adjoint of :class:`Conv2d` plus bias. Weight ``(in, out, k, k)``."""

    kind = "tconv"

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0, output_padding=0):
        super().__init__()
        self.cin, self.cout = int(in_channels), int(out_channels)
        self.k, self.s, self.p = int(kernel), int(stride), int(padding)
        self.op = int(output_padding)

    def spec(self):
        return {"kind": self.kind, "in_channels": self.cin, "out_channels": self.cout,
                "kernel": self.k, "stride": self.s, "padding": self.p,
                "output_padding": self.op}

    def output_shape(self, in_shape):
        c, h, w = in_shape
        if c != self.cin:
            raise ShapeError(f"tconv expects {self.cin} channels, got {c}")
        return (self.cout, tconv_out_size(h, self.k, self.s, self.p, self.op),
                tconv_out_size(w, self.k, self.s, self.p, self.op))

    def init_params(self, rng, dtype):
        fan_in = self.cout * self.k * self.k
        self.params["weight"] = _uniform(rng, fan_in, (self.cin, self.cout, self.k, self.k), dtype)
        self.params["bias"] = _uniform(rng, fan_in, (self.cout,), dtype)
        self.zero_grad()

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"tconv expects (B, C, H, W), got {x.shape}")
        _, ho, wo = self.output_shape(x.shape[1:])
        b, _, h, w = x.shape
        k, s, p = self.k, self.s, self.p
        wt = self.params["weight"].reshape(self.cin, -1)
        # (B, out*k*k, H*W)
        cols = np.matmul(wt.T, x.reshape(b, self.cin, h * w))
        cols = cols.reshape(b, self.cout, k, k, h, w)
        full_h = (h - 1) * s + k + self.op
        full_w = (w - 1) * s + k + self.op
        full = np.zeros((b, self.cout, max(full_h, p + ho), max(full_w, p + wo)), dtype=x.dtype)
        for di in range(k):
            for dj in range(k):
                full[:, :, di:di + s * h:s, dj:dj + s * w:s] += cols[:, :, di, dj]
        out = full[:, :, p:p + ho, p:p + wo] + self.params["bias"][None, :, None, None]
        self._cache = (x, full.shape)
        return np.ascontiguousarray(out)

    def backward(self, grad):
        x, full_shape = self._cached()
        b, _, h, w = x.shape
        k, s, p = self.k, self.s, self.p
        ho, wo = grad.shape[2:]
        self.grads["bias"] = grad.sum(axis=(0, 2, 3))
        gfull = np.zeros(full_shape, dtype=grad.dtype)
        gfull[:, :, p:p + ho, p:p + wo] = grad
        dcols = np.empty((b, self.cout, k, k, h, w), dtype=grad.dtype)
        for di in range(k):
            for dj in range(k):
                dcols[:, :, di, dj] = gfull[:, :, di:di + s * h:s, dj:dj + s * w:s]
        dcols = dcols.reshape(b, -1, h * w)
        xf = x.reshape(b, self.cin, h * w)
        self.grads["weight"] = np.einsum("bil,bjl->ij", xf, dcols).reshape(self.params["weight"].shape)
        wt = self.params["weight"].reshape(self.cin, -1)
        return np.matmul(wt, dcols).reshape(x.shape)


class Linear(Layer):
    kind = "fc"

    def __init__(self, in_features, out_features):
        super().__init__()
        self.fin, self.fout = int(in_features), int(out_features)

    def spec(self):
        return {"kind": self.kind, "in_features": self.fin, "out_features": self.fout}

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.fin,):
            raise ShapeError(f"fc expects ({self.fin},), got {tuple(in_shape)}")
        return (self.fout,)

    def init_params(self, rng, dtype):
        self.params["weight"] = _uniform(rng, self.fin, (self.fout, self.fin), dtype)
        self.params["bias"] = _uniform(rng, self.fin, (self.fout,), dtype)
        self.zero_grad()

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.fin:
            raise ShapeError(f"fc expects (B, {self.fin}), got {x.shape}")
        self._cache = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, grad):
        x = self._cached()
        self.grads["weight"] = grad.T @ x
        self.grads["bias"] = grad.sum(axis=0)
        return grad @ self.params["weight"]


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        self._cache = x > 0
        return np.where(self._cache, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return grad * self._cached()


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._cached()
        return grad * (1.0 - y * y)


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cached())


LAYER_TYPES = {cls.kind: cls for cls in (Conv2d, ConvTranspose2d, Linear, ReLU, Tanh, Flatten)}


def layer_from_spec(spec: dict) -> Layer:
    spec = dict(spec)
    cls = LAYER_TYPES[spec.pop("kind")]
    return cls(**spec)
