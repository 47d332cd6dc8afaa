"""Image raster primitives: 8-bit RGB rasters, dihedral transforms, crops.

Images are numpy arrays of shape (height, width, 3), dtype uint8, row-major
interleaved RGB. All functions here are pure; none mutates its input.

Conventions fixed once and used everywhere:
  - R90 rotates 90 degrees clockwise.
  - d4_compose(a, b) is "apply b first, then a".
  - Center-crop origins use floor division on odd remainders.
  - The five TTA crops come in the order TL, TR, BL, BR, C.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import OutOfBoundsError, TooSmallError

# The eight symmetries of the square: identity, clockwise rotations,
# horizontal flip (left-right), vertical flip (top-bottom), main-diagonal
# flip (transpose), anti-diagonal flip.
D4_ELEMENTS = ("E", "R90", "R180", "R270", "FH", "FV", "D1", "D2")

_D4_ACTIONS = {
    "E": lambda a: a.copy(),
    "R90": lambda a: np.rot90(a, -1).copy(),
    "R180": lambda a: np.rot90(a, 2).copy(),
    "R270": lambda a: np.rot90(a, 1).copy(),
    "FH": lambda a: a[:, ::-1].copy(),
    "FV": lambda a: a[::-1, :].copy(),
    "D1": lambda a: np.swapaxes(a, 0, 1).copy(),
    "D2": lambda a: np.swapaxes(a[::-1, ::-1], 0, 1).copy(),
}


def as_image_u8(img: np.ndarray) -> np.ndarray:
    """Validate an (H, W, 3) uint8 raster and return it unchanged."""
    a = np.asarray(img)
    if a.dtype != np.uint8:
        raise ValueError(f"image dtype must be uint8, got {a.dtype}")
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"image shape must be (H, W, 3), got {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got {a.shape}")
    return a


def d4_apply(img: np.ndarray, g: str) -> np.ndarray:
    """Apply one D4 element to an image (lossless sample permutation)."""
    if g not in _D4_ACTIONS:
        raise ValueError(f"unknown D4 element {g!r}")
    return _D4_ACTIONS[g](img)


def _build_compose_table() -> dict[tuple[str, str], str]:
    # Derive the 8x8 composition table from the actions themselves: applied
    # to a square array of distinct values, every element acts distinctly,
    # so (apply b, then a) matches exactly one element.
    marker = np.arange(16).reshape(4, 4)
    results = {g: _D4_ACTIONS[g](marker) for g in D4_ELEMENTS}
    table = {}
    for a in D4_ELEMENTS:
        for b in D4_ELEMENTS:
            combined = _D4_ACTIONS[a](_D4_ACTIONS[b](marker))
            for g, res in results.items():
                if np.array_equal(combined, res):
                    table[(a, b)] = g
                    break
    return table


_D4_COMPOSE = _build_compose_table()


def d4_compose(a: str, b: str) -> str:
    """Element g such that applying g equals applying b first, then a."""
    return _D4_COMPOSE[(a, b)]


def d4_inverse(g: str) -> str:
    """The element that undoes g."""
    for h in D4_ELEMENTS:
        if d4_compose(h, g) == "E":
            return h
    raise ValueError(f"unknown D4 element {g!r}")


def crop(img: np.ndarray, origin_row: int, origin_col: int, size: int) -> np.ndarray:
    """Copy the size x size window at (origin_row, origin_col)."""
    h, w = img.shape[:2]
    if origin_row < 0 or origin_col < 0 or origin_row + size > h or origin_col + size > w:
        raise OutOfBoundsError(
            f"crop ({origin_row},{origin_col}) size {size} exceeds {h}x{w} image"
        )
    return img[origin_row : origin_row + size, origin_col : origin_col + size].copy()


def center_crop(img: np.ndarray, size: int) -> np.ndarray:
    """Central size x size window; origins floor-divide odd remainders."""
    h, w = img.shape[:2]
    if h < size or w < size:
        raise TooSmallError(f"image {h}x{w} smaller than center crop {size}")
    return crop(img, (h - size) // 2, (w - size) // 2, size)


def tta_crop_origins(height: int, width: int, size: int) -> list[tuple[int, int]]:
    """Origins of the five TTA crops in the fixed order TL, TR, BL, BR, C."""
    if height < size or width < size:
        raise TooSmallError(f"image {height}x{width} smaller than crop {size}")
    dr, dc = height - size, width - size
    return [(0, 0), (0, dc), (dr, 0), (dr, dc), (dr // 2, dc // 2)]


def tta_crops(img: np.ndarray, size: int) -> list[np.ndarray]:
    """The four corner crops plus the center crop, in fixed order."""
    h, w = img.shape[:2]
    return [crop(img, r, c, size) for r, c in tta_crop_origins(h, w, size)]


def random_crop(img: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Crop at an origin drawn uniformly from the valid range."""
    h, w = img.shape[:2]
    if h < size or w < size:
        raise TooSmallError(f"image {h}x{w} smaller than random crop {size}")
    r = int(rng.integers(0, h - size + 1))
    c = int(rng.integers(0, w - size + 1))
    return crop(img, r, c, size)


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG file to (H, W, 3) uint8; grayscale becomes 3 channels."""
    with Image.open(path) as im:
        return _from_pil(im)


def decode_image(data: bytes) -> np.ndarray:
    """Decode encoded PNG/JPEG bytes to (H, W, 3) uint8."""
    with Image.open(io.BytesIO(data)) as im:
        return _from_pil(im)


def _from_pil(im: Image.Image) -> np.ndarray:
    if im.mode != "RGB":
        im = im.convert("RGB")
    return np.asarray(im, dtype=np.uint8)


def save_png(img: np.ndarray, path: str | Path) -> None:
    """Encode an image losslessly as PNG."""
    Image.fromarray(as_image_u8(img), "RGB").save(path, "PNG")


def image_size(path: str | Path) -> tuple[int, int]:
    """(width, height) from the file header, without decoding pixels."""
    with Image.open(path) as im:
        return im.size
