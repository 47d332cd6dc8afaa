"""Reference JPEG quantization tables and the de-facto quality scaling.

The base luminance/chrominance tables are the classic example tables from
the JPEG standard; virtually every baseline encoder ships them. A quality
setting q maps to a percentage scale

    scale = 5000 // q        for q < 50
    scale = 200 - 2 * q      for q >= 50

and each table entry becomes clamp((base * scale + 50) // 100, 1, 255).
This is the mapping our own recompression uses, and the reference a file's
tables are matched against when estimating its encoding quality.
"""

from __future__ import annotations

import numpy as np

# Base tables in natural (row-major) order.
BASE_LUMA = np.array(
    [
        16, 11, 10, 16, 24, 40, 51, 61,
        12, 12, 14, 19, 26, 58, 60, 55,
        14, 13, 16, 24, 40, 57, 69, 56,
        14, 17, 22, 29, 51, 87, 80, 62,
        18, 22, 37, 56, 68, 109, 103, 77,
        24, 35, 55, 64, 81, 104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101,
        72, 92, 95, 98, 112, 100, 103, 99,
    ],
    dtype=np.int64,
)

BASE_CHROMA = np.array(
    [
        17, 18, 24, 47, 99, 99, 99, 99,
        18, 21, 26, 66, 99, 99, 99, 99,
        24, 26, 56, 99, 99, 99, 99, 99,
        47, 66, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99,
    ],
    dtype=np.int64,
)

# Zigzag scan: ZIGZAG[i] is the natural-order index of the i-th coefficient
# in a JPEG file's transmission order.
ZIGZAG = np.array(
    [
        0, 1, 8, 16, 9, 2, 3, 10,
        17, 24, 32, 25, 18, 11, 4, 5,
        12, 19, 26, 33, 40, 48, 41, 34,
        27, 20, 13, 6, 7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36,
        29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46,
        53, 60, 61, 54, 47, 55, 62, 63,
    ],
    dtype=np.int64,
)


def quality_to_scale(quality: int) -> int:
    """Percentage scale applied to the base tables for a given quality."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    if quality < 50:
        return 5000 // quality
    return 200 - 2 * quality


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    """Base table scaled to a quality, entries clamped to [1, 255]."""
    scale = quality_to_scale(quality)
    return np.clip((base * scale + 50) // 100, 1, 255)


def luma_table(quality: int) -> np.ndarray:
    return scaled_table(BASE_LUMA, quality)


def chroma_table(quality: int) -> np.ndarray:
    return scaled_table(BASE_CHROMA, quality)


def dezigzag(coeffs: np.ndarray) -> np.ndarray:
    """Reorder 64 zigzag-transmitted coefficients into natural order."""
    out = np.empty(64, dtype=np.int64)
    out[ZIGZAG] = coeffs
    return out
