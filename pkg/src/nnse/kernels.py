"""Numerical layer kernels shared by concrete and symbolic execution.

All kernels accept arrays with optional leading batch axes; the trailing
axes are the layer's input shape. Symbolic execution exploits this by
stacking the constant part and one coefficient plane per symbolic variable
along a leading axis and pushing the whole stack through each linear layer.
"""

from __future__ import annotations

import numpy as np


def conv2d(x: np.ndarray, kernel: np.ndarray, strides: tuple[int, int]) -> np.ndarray:
    """Valid-padding 2-D convolution, channels-last.

    x: (..., h, w, in_ch); kernel: (kh, kw, in_ch, filters) -> (..., oh, ow, filters).
    """
    kh, kw, _, filters = kernel.shape
    sh, sw = strides
    h, w = x.shape[-3], x.shape[-2]
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    out = np.zeros(x.shape[:-3] + (oh, ow, filters), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            window = x[..., i:i + (oh - 1) * sh + 1:sh, j:j + (ow - 1) * sw + 1:sw, :]
            out += window @ kernel[i, j]
    return out


def dense(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """x: (..., in) times weights (in, out) -> (..., out)."""
    return x @ weights


def pool_windows(shape: tuple[int, int, int], pool: tuple[int, int],
                 strides: tuple[int, int]) -> tuple[tuple[int, int, int], np.ndarray]:
    """Flat-offset table for maxpool windows.

    Returns (output shape, offsets) where offsets has shape
    (oh*ow*c, ph*pw): row n lists the flat input offsets of window n.
    Windows are ordered row-major over (oh, ow, channel); elements within a
    window are ordered row-major over the (i, j) kernel position, so the
    window-local flat index of element (i, j) is i*pw + j.
    """
    h, w, c = shape
    ph, pw = pool
    sh, sw = strides
    oh = (h - ph) // sh + 1
    ow = (w - pw) // sw + 1
    flat = np.arange(h * w * c).reshape(h, w, c)
    rows = np.empty((oh, ow, c, ph * pw), dtype=np.intp)
    for i in range(ph):
        for j in range(pw):
            rows[..., i * pw + j] = flat[i:i + (oh - 1) * sh + 1:sh,
                                         j:j + (ow - 1) * sw + 1:sw, :]
    return (oh, ow, c), rows.reshape(oh * ow * c, ph * pw)


def maxpool(x: np.ndarray, pool: tuple[int, int],
            strides: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Concrete maxpool over the trailing (h, w, c) axes of a single tensor.

    Returns (pooled output of shape (oh, ow, c), choices of shape (oh*ow*c,))
    where choices[n] is the window-local flat index of the selected element;
    ties take the lowest index.
    """
    out_shape, windows = pool_windows(x.shape, pool, strides)
    vals = x.reshape(-1)[windows]                     # (n_windows, ph*pw)
    choices = np.argmax(vals, axis=1)                 # first max = lowest flat index
    pooled = vals[np.arange(vals.shape[0]), choices].reshape(out_shape)
    return pooled, choices


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis (max subtraction)."""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)
