"""Minimal convolutional network primitives with hand-written backprop.

Everything operates on batched NCHW numpy arrays.  Convolutions are 3x3,
stride 1, zero-padded; parameters live in a single flat vector owned by the
model so checkpoints and finite-difference checks can address them by
offset.  Compute dtype is configurable (float32 for speed, float64 for
gradient checks).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """3x3 same-size convolution.  Returns (out, padded input for backward)."""
    n, c, h, wd = x.shape
    co = w.shape[0]
    xp = np.zeros((n, c, h + 2, wd + 2), dtype=x.dtype)
    xp[:, :, 1:-1, 1:-1] = x
    cols = _im2col(xp, h, wd)
    w2 = w.reshape(co, c * 9)
    out = np.matmul(w2, cols)
    out += b[:, None]
    return out.reshape(n, co, h, wd), xp


def _im2col(xp: np.ndarray, h: int, wd: int) -> np.ndarray:
    n, c = xp.shape[:2]
    cols = np.empty((n, c, 9, h * wd), dtype=xp.dtype)
    k = 0
    for u in range(3):
        for v in range(3):
            cols[:, :, k, :] = xp[:, :, u : u + h, v : v + wd].reshape(n, c, h * wd)
            k += 1
    return cols.reshape(n, c * 9, h * wd)


def conv3x3_backward(dout: np.ndarray, xp: np.ndarray, w: np.ndarray):
    """Gradients of conv3x3_forward; returns (dx, dw, db)."""
    n, co, h, wd = dout.shape
    c = xp.shape[1]
    cols = _im2col(xp, h, wd)
    dout2 = dout.reshape(n, co, h * wd)
    dw2 = np.tensordot(dout2, cols, axes=([0, 2], [0, 2]))
    db = dout2.sum(axis=(0, 2))
    w2 = w.reshape(co, c * 9)
    dcols = np.matmul(w2.T, dout2).reshape(n, c, 9, h, wd)
    dxp = np.zeros_like(xp)
    k = 0
    for u in range(3):
        for v in range(3):
            dxp[:, :, u : u + h, v : v + wd] += dcols[:, :, k]
            k += 1
    return dxp[:, :, 1:-1, 1:-1], dw2.reshape(w.shape), db


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def avgpool2_forward(x: np.ndarray) -> np.ndarray:
    n, c, h, wd = x.shape
    return x.reshape(n, c, h // 2, 2, wd // 2, 2).mean(axis=(3, 5))


def avgpool2_backward(dout: np.ndarray) -> np.ndarray:
    up = np.repeat(np.repeat(dout, 2, axis=2), 2, axis=3)
    return up * np.asarray(0.25, dtype=dout.dtype)


def upsample2_forward(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def upsample2_backward(dout: np.ndarray) -> np.ndarray:
    n, c, h, wd = dout.shape
    return dout.reshape(n, c, h // 2, 2, wd // 2, 2).sum(axis=(3, 5))


class ParamVector:
    """Flat parameter vector with a named layer map.

    Each entry maps a layer name to (weight view, bias view) into the flat
    array, so updates through the views mutate the vector in place.
    """

    def __init__(self, layer_shapes: dict[str, tuple[tuple[int, ...], tuple[int, ...]]],
                 dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.layout: dict[str, tuple[slice, tuple[int, ...], slice, tuple[int, ...]]] = {}
        offset = 0
        for name, (w_shape, b_shape) in layer_shapes.items():
            w_size = int(np.prod(w_shape))
            b_size = int(np.prod(b_shape))
            self.layout[name] = (
                slice(offset, offset + w_size),
                w_shape,
                slice(offset + w_size, offset + w_size + b_size),
                b_shape,
            )
            offset += w_size + b_size
        self.data = np.zeros(offset, dtype=self.dtype)

    @property
    def size(self) -> int:
        return self.data.size

    def weight(self, name: str, data: np.ndarray | None = None) -> np.ndarray:
        sl, shape, _, _ = self.layout[name]
        return (self.data if data is None else data)[sl].reshape(shape)

    def bias(self, name: str, data: np.ndarray | None = None) -> np.ndarray:
        _, _, sl, shape = self.layout[name]
        return (self.data if data is None else data)[sl].reshape(shape)

    def new_grad(self) -> np.ndarray:
        return np.zeros_like(self.data)

    def he_init(self, rng: np.random.Generator, skip: tuple[str, ...] = ()) -> None:
        """Kaiming-normal weights, zero biases; layers in ``skip`` stay zero."""
        for name, (sl, w_shape, _, _) in self.layout.items():
            if name in skip:
                continue
            fan_in = int(np.prod(w_shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            self.data[sl] = (rng.standard_normal(sl.stop - sl.start) * std).astype(
                self.dtype
            )


def check_finite(name: str, x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite activations after layer '{name}'")
    return x
