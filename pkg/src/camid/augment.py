"""Training-time augmentations and the eval-only contrast manipulation.

Four training ops: a dihedral transform (always applied, element uniform
over the 8), plus gamma, JPEG recompression and rescaling, each included
with a per-op probability and a parameter drawn uniformly from its range.
Application order is fixed: dihedral, scale, gamma, jpeg.

Float-to-uint8 conversions round half to even (np.rint), everywhere.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import InvalidParamError
from .imagecore import as_image_u8, d4_apply, D4_ELEMENTS


@dataclass(frozen=True)
class AugmentOp:
    """One parameterized manipulation.

    kind is one of "dihedral", "gamma", "jpeg", "scale", "contrast";
    param holds the D4 element name, gamma, quality, or factor.
    """

    kind: str
    param: str | float | int

    def describe(self) -> str:
        return f"{self.kind}:{self.param}"

    @staticmethod
    def parse(text: str) -> "AugmentOp":
        kind, _, raw = text.partition(":")
        if kind == "dihedral":
            return AugmentOp(kind, raw)
        if kind == "jpeg":
            return AugmentOp(kind, int(raw))
        if kind in ("gamma", "scale", "contrast"):
            return AugmentOp(kind, float(raw))
        raise ValueError(f"unknown augment op {text!r}")


@dataclass(frozen=True)
class AugmentPolicy:
    """Ranges and per-op inclusion probability for training augmentation."""

    gamma_range: tuple[float, float] = (0.8, 1.2)
    jpeg_range: tuple[int, int] = (70, 90)
    scale_range: tuple[float, float] = (0.5, 2.0)
    prob: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise InvalidParamError(f"probability {self.prob} outside [0, 1]")
        if not 0 < self.gamma_range[0] < self.gamma_range[1]:
            raise InvalidParamError(f"bad gamma range {self.gamma_range}")
        if not 1 <= self.jpeg_range[0] < self.jpeg_range[1] <= 100:
            raise InvalidParamError(f"bad jpeg range {self.jpeg_range}")
        if not 0 < self.scale_range[0] < self.scale_range[1]:
            raise InvalidParamError(f"bad scale range {self.scale_range}")


def _round_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def apply_gamma(img: np.ndarray, gamma: float) -> np.ndarray:
    """Per-sample power curve: 255 * (p/255) ** gamma."""
    if gamma <= 0:
        raise InvalidParamError(f"gamma must be > 0, got {gamma}")
    img = as_image_u8(img)
    lut = _round_u8(255.0 * (np.arange(256, dtype=np.float64) / 255.0) ** gamma)
    return lut[img]


def apply_jpeg(img: np.ndarray, quality: int) -> np.ndarray:
    """Round-trip through a baseline 4:2:0 JPEG at the given quality.

    The codec contract: baseline sequential DCT, 4:2:0 chroma subsampling,
    standard base tables under the quality scaling of `jpegtables`. Pillow's
    encoder satisfies it exactly (verified by the test suite against our own
    table computation).
    """
    if not 1 <= quality <= 100:
        raise InvalidParamError(f"jpeg quality must be in [1, 100], got {quality}")
    img = as_image_u8(img)
    return decode_jpeg_bytes(encode_jpeg_bytes(img, quality))


def encode_jpeg_bytes(img: np.ndarray, quality: int) -> bytes:
    """Baseline 4:2:0 JPEG bytes for an image (never persisted by training)."""
    if not 1 <= quality <= 100:
        raise InvalidParamError(f"jpeg quality must be in [1, 100], got {quality}")
    buf = io.BytesIO()
    Image.fromarray(as_image_u8(img), "RGB").save(
        buf, "JPEG", quality=int(quality), subsampling=2
    )
    return buf.getvalue()


def decode_jpeg_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def apply_scale(img: np.ndarray, factor: float) -> np.ndarray:
    """Bilinear rescale by a factor; output dims = round(factor * dims).

    Sampling is half-pixel centered with edge clamping, so constant images
    stay constant for every factor.
    """
    if factor <= 0:
        raise InvalidParamError(f"scale factor must be > 0, got {factor}")
    img = as_image_u8(img)
    h, w = img.shape[:2]
    out_h = int(np.rint(factor * h))
    out_w = int(np.rint(factor * w))
    if out_h < 1 or out_w < 1:
        raise InvalidParamError(f"scale {factor} collapses {h}x{w} to zero size")
    if out_h == h and out_w == w and factor == 1.0:
        return img.copy()
    return _bilinear_resize(img, out_h, out_w)


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = img.shape[:2]
    # half-pixel centers: output pixel i samples input coordinate
    # (i + 0.5) * in/out - 0.5, clamped to the valid range
    src_r = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    src_c = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    r0 = np.floor(src_r).astype(np.int64)
    c0 = np.floor(src_c).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (src_r - r0)[:, None, None]
    fc = (src_c - c0)[None, :, None]
    p = img.astype(np.float64)
    # lerp form a + (b - a) * t keeps constants exact
    top = p[r0[:, None], c0] + (p[r0[:, None], c1] - p[r0[:, None], c0]) * fc
    bot = p[r1[:, None], c0] + (p[r1[:, None], c1] - p[r1[:, None], c0]) * fc
    return _round_u8(top + (bot - top) * fr)


def apply_contrast(img: np.ndarray, factor: float) -> np.ndarray:
    """Linear contrast around mid-gray: (p - 127.5) * c + 127.5, clamped."""
    if factor <= 0:
        raise InvalidParamError(f"contrast factor must be > 0, got {factor}")
    img = as_image_u8(img)
    lut = _round_u8((np.arange(256, dtype=np.float64) - 127.5) * factor + 127.5)
    return lut[img]


def apply_op(img: np.ndarray, op: AugmentOp) -> np.ndarray:
    if op.kind == "dihedral":
        return d4_apply(img, str(op.param))
    if op.kind == "gamma":
        return apply_gamma(img, float(op.param))
    if op.kind == "jpeg":
        return apply_jpeg(img, int(op.param))
    if op.kind == "scale":
        return apply_scale(img, float(op.param))
    if op.kind == "contrast":
        return apply_contrast(img, float(op.param))
    raise InvalidParamError(f"unknown augment kind {op.kind!r}")


def apply_ops(img: np.ndarray, ops: list[AugmentOp]) -> np.ndarray:
    """Apply ops left to right."""
    out = as_image_u8(img)
    for op in ops:
        out = apply_op(out, op)
    return out


def sample_train_augs(policy: AugmentPolicy, rng: np.random.Generator) -> list[AugmentOp]:
    """Draw one training augmentation chain.

    Always one dihedral op (element uniform over the 8); scale, gamma and
    jpeg each included with policy.prob, parameters uniform over their
    ranges. Returned in application order: dihedral, scale, gamma, jpeg.
    """
    ops = [AugmentOp("dihedral", D4_ELEMENTS[int(rng.integers(0, 8))])]
    if rng.random() < policy.prob:
        lo, hi = policy.scale_range
        ops.append(AugmentOp("scale", float(rng.uniform(lo, hi))))
    if rng.random() < policy.prob:
        lo, hi = policy.gamma_range
        ops.append(AugmentOp("gamma", float(rng.uniform(lo, hi))))
    if rng.random() < policy.prob:
        lo, hi = policy.jpeg_range
        ops.append(AugmentOp("jpeg", int(rng.integers(lo, hi + 1))))
    return ops
