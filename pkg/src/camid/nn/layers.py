"""Layers with explicit forward/backward passes.

Public tensor contract is NCHW. Internally the convolution, pooling and
activation cores run channels-last (NHWC); the NCHW entry points transpose
at the boundary, and the model composes the NHWC cores directly with one
conversion per batch.

The convolution evaluates Z = x_padded @ W_cat in a single GEMM, where
W_cat stacks the per-tap kernel matrices side by side, then accumulates the
k*k shifted slices of Z into the output. Nothing is gathered into an
im2col matrix and the GEMM has a wide enough output panel to stay
compute-bound.

Large intermediates live in per-layer thread-local workspaces: glibc
returns big freed blocks to the OS, so allocating them fresh every call
costs more in page faults than the arithmetic itself. Buffers returned by
backward are scratch, valid until the producing layer's next call; training
composes layers serially, and concurrent inference gets per-thread buffers.
"""

from __future__ import annotations

import threading

import numpy as np

from ..errors import ShapeMismatchError


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int,
                   rng: np.random.Generator, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class _Workspace(threading.local):
    """Per-thread reusable buffers, keyed by slot name."""

    def __init__(self):
        self.slots: dict[str, np.ndarray] = {}

    def take(self, key: str, shape: tuple[int, ...], dtype,
             zero_on_alloc: bool = False) -> np.ndarray:
        buf = self.slots.get(key)
        if buf is None or buf.shape != shape or buf.dtype != dtype:
            buf = np.zeros(shape, dtype=dtype) if zero_on_alloc else np.empty(shape, dtype=dtype)
            self.slots[key] = buf
        return buf


class Conv2d:
    """2d convolution (cross-correlation) with zero padding.

    Weights are stored (out_ch, in_ch, kh, kw):
    out[n,o,y,x] = b[o] + sum_{c,dy,dx} in[n,c,y*s+dy-pad,x*s+dx-pad] * w[o,c,dy,dx].

    With relu_input=True the layer computes conv(max(x, 0)) and its backward
    returns the gradient w.r.t. x (the pre-activation); the mask is recovered
    from the cached padded buffer.
    """

    def __init__(self, name: str, in_ch: int, out_ch: int, ksize: int,
                 stride: int = 1, pad: int = 0, dtype=np.float32,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.name = name
        self.in_ch, self.out_ch = in_ch, out_ch
        self.ksize, self.stride, self.pad = ksize, stride, pad
        fan_in = in_ch * ksize * ksize
        fan_out = out_ch * ksize * ksize
        self.w = glorot_uniform((out_ch, in_ch, ksize, ksize), fan_in, fan_out, rng, dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._ws = _Workspace()
        self._cache = None

    def _w_cat(self) -> np.ndarray:
        # (c, k*k*o): tap-major columns, output channel fastest
        return np.ascontiguousarray(self.w.transpose(1, 2, 3, 0)).reshape(
            self.in_ch, self.ksize * self.ksize * self.out_ch
        )

    def _taps(self):
        k = self.ksize
        return [(di, dj) for di in range(k) for dj in range(k)]

    def forward_nhwc(self, x: np.ndarray, cache: bool = True,
                     relu_input: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[3] != self.in_ch:
            raise ShapeMismatchError(
                f"{self.name}: expected (N,H,W,{self.in_ch}), got {x.shape}"
            )
        k, s, p = self.ksize, self.stride, self.pad
        n, h, w, c = x.shape
        o = self.out_ch
        if p:
            # border stays zero across calls: only the interior is rewritten
            xp = self._ws.take("xp", (n, h + 2 * p, w + 2 * p, c), x.dtype,
                               zero_on_alloc=True)
            dst = xp[:, p : p + h, p : p + w, :]
            if relu_input:
                np.maximum(x, 0, out=dst)
            else:
                dst[...] = x
        elif relu_input:
            xp = self._ws.take("xp", x.shape, x.dtype)
            np.maximum(x, 0, out=xp)
        else:
            xp = x if x.flags.c_contiguous else np.ascontiguousarray(x)
        hp, wp = xp.shape[1], xp.shape[2]
        oh = (hp - k) // s + 1
        ow = (wp - k) // s + 1
        if oh < 1 or ow < 1:
            raise ShapeMismatchError(f"{self.name}: input {x.shape} too small for k={k}")
        z = self._ws.take("z", (n * hp * wp, k * k * o), x.dtype)
        np.matmul(xp.reshape(-1, c), self._w_cat(), out=z)
        if k == 1 and s == 1:
            y = z
            y += self.b
        else:
            z4 = z.reshape(n, hp, wp, k * k * o)
            y = self._ws.take("y", (n, oh, ow, o), x.dtype)
            y[...] = self.b
            for t, (di, dj) in enumerate(self._taps()):
                y += z4[:, di : di + oh * s : s, dj : dj + ow * s : s, t * o : (t + 1) * o]
        if cache:
            self._cache = (xp, relu_input, (n, h, w, c), (hp, wp, oh, ow))
        return y.reshape(n, oh, ow, o)

    def backward_nhwc(self, dy: np.ndarray, need_dx: bool = True) -> np.ndarray | None:
        xp, relu_input, (n, h, w, c), (hp, wp, oh, ow) = self._cache
        k, s, p = self.ksize, self.stride, self.pad
        o = self.out_ch
        if k == 1 and s == 1:
            dz = dy.reshape(-1, o)
            if not dz.flags.c_contiguous:
                dz = np.ascontiguousarray(dz)
        else:
            dz = self._ws.take("dz", (n * hp * wp, k * k * o), dy.dtype)
            dz4 = dz.reshape(n, hp, wp, k * k * o)
            dz4.fill(0)
            for t, (di, dj) in enumerate(self._taps()):
                dz4[:, di : di + oh * s : s, dj : dj + ow * s : s, t * o : (t + 1) * o] = dy
        xpf = xp.reshape(-1, c)
        dw_cat = xpf.T @ dz
        self.grad_w = np.ascontiguousarray(
            dw_cat.reshape(c, k, k, o).transpose(3, 0, 1, 2)
        )
        self.grad_b = dy.reshape(-1, o).sum(axis=0)
        if not need_dx:
            return None
        dxp = self._ws.take("dxp", (n, hp, wp, c), dy.dtype)
        np.matmul(dz, self._w_cat().T, out=dxp.reshape(-1, c))
        dx = dxp[:, p : p + h, p : p + w, :] if p else dxp
        if relu_input:
            src = xp[:, p : p + h, p : p + w, :] if p else xp
            dx *= src > 0
        return dx

    def forward(self, x: np.ndarray) -> np.ndarray:
        """NCHW entry point."""
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ShapeMismatchError(
                f"{self.name}: expected (N,{self.in_ch},H,W), got {x.shape}"
            )
        y = self.forward_nhwc(np.ascontiguousarray(x.transpose(0, 2, 3, 1)))
        return np.ascontiguousarray(y.transpose(0, 3, 1, 2))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = self.backward_nhwc(np.ascontiguousarray(dy.transpose(0, 2, 3, 1)))
        return np.ascontiguousarray(dx.transpose(0, 3, 1, 2))

    def params(self):
        return [(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)]

    def grads(self):
        return [(f"{self.name}.w", self.grad_w), (f"{self.name}.b", self.grad_b)]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class AvgPool2:
    """2x2 average pooling, stride 2; a trailing odd row/col is dropped."""

    def __init__(self):
        self._ws = _Workspace()
        self._in_shape = None

    def forward_nhwc(self, x: np.ndarray) -> np.ndarray:
        n, h, w, c = x.shape
        oh, ow = h // 2, w // 2
        if oh < 1 or ow < 1:
            raise ShapeMismatchError(f"cannot 2x2-pool spatial size {h}x{w}")
        self._in_shape = x.shape
        y = self._ws.take("y", (n, oh, ow, c), x.dtype)
        t = x[:, : oh * 2, : ow * 2, :]
        np.add(t[:, 0::2, 0::2, :], t[:, 0::2, 1::2, :], out=y)
        y += t[:, 1::2, 0::2, :]
        y += t[:, 1::2, 1::2, :]
        y *= 0.25
        return y

    def backward_nhwc(self, dy: np.ndarray) -> np.ndarray:
        n, h, w, c = self._in_shape
        dx = self._ws.take("dx", self._in_shape, dy.dtype)
        if h % 2 or w % 2:
            dx.fill(0)
        oh, ow = dy.shape[1], dy.shape[2]
        g = 0.25 * dy
        dx[:, 0 : oh * 2 : 2, 0 : ow * 2 : 2, :] = g
        dx[:, 0 : oh * 2 : 2, 1 : ow * 2 : 2, :] = g
        dx[:, 1 : oh * 2 : 2, 0 : ow * 2 : 2, :] = g
        dx[:, 1 : oh * 2 : 2, 1 : ow * 2 : 2, :] = g
        return dx

    def forward(self, x: np.ndarray) -> np.ndarray:
        y = self.forward_nhwc(np.ascontiguousarray(x.transpose(0, 2, 3, 1)))
        return np.ascontiguousarray(y.transpose(0, 3, 1, 2))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = self.backward_nhwc(np.ascontiguousarray(dy.transpose(0, 2, 3, 1)))
        return np.ascontiguousarray(dx.transpose(0, 3, 1, 2))


class GlobalAvgPool:
    """Per-channel mean over all spatial positions: (N,C,H,W) -> (N,C)."""

    def __init__(self):
        self._ws = _Workspace()
        self._in_shape = None

    def forward_nhwc(self, x: np.ndarray) -> np.ndarray:
        self._in_shape = x.shape
        return x.mean(axis=(1, 2))

    def backward_nhwc(self, dy: np.ndarray) -> np.ndarray:
        n, h, w, c = self._in_shape
        out = self._ws.take("dx", self._in_shape, dy.dtype)
        out[...] = dy[:, None, None, :] / (h * w)
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_nhwc(x.transpose(0, 2, 3, 1))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = self.backward_nhwc(dy)
        return np.ascontiguousarray(dx.transpose(0, 3, 1, 2))


class Linear:
    def __init__(self, name: str, in_features: int, out_features: int,
                 dtype=np.float32, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.name = name
        self.in_features, self.out_features = in_features, out_features
        self.w = glorot_uniform((out_features, in_features), in_features, out_features,
                                rng, dtype)
        self.b = np.zeros(out_features, dtype=dtype)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatchError(
                f"{self.name}: expected (N,{self.in_features}), got {x.shape}"
            )
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.grad_w = dy.T @ self._x
        self.grad_b = dy.sum(axis=0)
        return dy @ self.w

    def params(self):
        return [(f"{self.name}.w", self.w), (f"{self.name}.b", self.b)]

    def grads(self):
        return [(f"{self.name}.w", self.grad_w), (f"{self.name}.b", self.grad_b)]
