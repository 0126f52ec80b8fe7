"""Image and mask I/O, network-input preprocessing and visual renders."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._validation import check_gray, check_mask, check_same_shape

# render colors
DIFF_A_ONLY = (255, 0, 255)
DIFF_B_ONLY = (0, 255, 0)
DIFF_BOTH = (255, 255, 255)


class ImageReadError(IOError):
    pass


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8- or 16-bit intensity image.

    ``original_shape`` is set by :func:`pad_to_multiple` so that masks
    predicted on the padded image can be cropped back.
    """

    pixels: np.ndarray
    bit_depth: int = 8
    pixel_size_um: float = 1.0
    original_shape: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        pixels = check_gray(self.pixels, "pixels")
        if self.bit_depth not in (8, 16):
            raise ValueError(f"bit_depth must be 8 or 16, got {self.bit_depth}")
        if not self.pixel_size_um > 0:
            raise ValueError("pixel_size_um must be > 0")
        if pixels.size and (pixels.min() < 0 or pixels.max() >= 2**self.bit_depth):
            raise ValueError(f"intensities out of range for {self.bit_depth}-bit image")
        dtype = np.uint8 if self.bit_depth == 8 else np.uint16
        object.__setattr__(self, "pixels", pixels.astype(dtype, copy=False))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple:
        return self.pixels.shape


def load_image(path, kind: str = "gray", pixel_size_um: float = 1.0):
    """Read a PGM, PNG or single-page TIFF file.

    Returns a :class:`GrayImage` for ``kind="gray"`` and a boolean array
    (nonzero is foreground) for ``kind="mask"``.
    """
    if kind not in ("gray", "mask"):
        raise ValueError(f"kind must be 'gray' or 'mask', got {kind!r}")
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            if getattr(im, "n_frames", 1) > 1:
                raise ImageReadError(f"{path}: multi-page images are not supported")
            im.load()
            mode = im.mode
            arr = np.array(im)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, ImageReadError):
            raise
        raise ImageReadError(f"{path}: unreadable image ({exc})") from exc

    if arr.ndim != 2:
        raise ImageReadError(f"{path}: expected a single-channel image, got mode {mode}")
    if mode in ("1", "L", "P"):
        bit_depth = 8
    elif mode in ("I;16", "I;16B", "I;16L", "I"):
        bit_depth = 16
    else:
        raise ImageReadError(f"{path}: unsupported bit depth / mode {mode}")
    if arr.size and (arr.min() < 0 or arr.max() >= 2**bit_depth):
        raise ImageReadError(f"{path}: intensities exceed {bit_depth} bits")

    if kind == "mask":
        return arr != 0
    return GrayImage(arr, bit_depth=bit_depth, pixel_size_um=pixel_size_um)


def save_mask(mask, path) -> None:
    """Write a mask as 8-bit PNG with 0 for background and 255 for foreground."""
    mask = check_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path)


def save_image(img, path) -> None:
    """Write a GrayImage or an (H, W, 3) uint8 array."""
    arr = img.pixels if isinstance(img, GrayImage) else np.asarray(img)
    Image.fromarray(arr).save(path)


def to_8bit(img: GrayImage) -> GrayImage:
    """Min-max stretch a 16-bit image to 8 bits, rounding half up.

    A constant image maps to all zeros.
    """
    if img.bit_depth != 16:
        raise ValueError("to_8bit expects a 16-bit image")
    v = img.pixels.astype(np.int64)
    lo, hi = (int(v.min()), int(v.max())) if v.size else (0, 0)
    span = hi - lo
    if span == 0:
        out = np.zeros_like(v)
    else:
        # floor(x / span + 1/2) in exact integer arithmetic
        out = ((v - lo) * 510 + span) // (2 * span)
    return GrayImage(out.astype(np.uint8), bit_depth=8, pixel_size_um=img.pixel_size_um)


def pad_to_multiple(img, m: int = 32):
    """Zero-pad the bottom and right edges up to the next multiple of ``m``.

    Accepts a :class:`GrayImage` (the original shape is recorded on the
    result) or a 2D/3D array.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    arr = img.pixels if isinstance(img, GrayImage) else np.asarray(img)
    h, w = arr.shape[:2]
    ph, pw = -(-h // m) * m - h, -(-w // m) * m - w
    pad = [(0, ph), (0, pw)] + [(0, 0)] * (arr.ndim - 2)
    out = np.pad(arr, pad, mode="constant", constant_values=0)
    if isinstance(img, GrayImage):
        return GrayImage(out, img.bit_depth, img.pixel_size_um, original_shape=(h, w))
    return out


def crop_to(img, shape):
    """Undo :func:`pad_to_multiple` by cropping to ``shape`` from the top-left."""
    h, w = shape
    if isinstance(img, GrayImage):
        return GrayImage(img.pixels[:h, :w], img.bit_depth, img.pixel_size_um)
    return np.asarray(img)[:h, :w]


def compose_fluor_input(cells: GrayImage, fluor: GrayImage) -> np.ndarray:
    """Stack an 8-bit cell image and fluorescence image as (R, G, B) = (cells, fluor, fluor)."""
    if cells.bit_depth != 8 or fluor.bit_depth != 8:
        raise ValueError("compose_fluor_input expects 8-bit images")
    check_same_shape(cells.pixels, fluor.pixels, ("cells", "fluor"))
    return np.stack([cells.pixels, fluor.pixels, fluor.pixels], axis=-1).astype(np.uint8)


def label_palette(n: int, seed: int = 42) -> np.ndarray:
    """``n`` pairwise distinct, non-dark RGB colors drawn from a seeded generator."""
    rng = np.random.default_rng(seed)
    levels = 216  # channel values 40..255
    codes = rng.choice(levels**3, size=n, replace=False) if n else np.empty(0, dtype=np.int64)
    rgb = np.stack([codes // levels**2, (codes // levels) % levels, codes % levels], axis=-1)
    return (rgb + 40).astype(np.uint8)


def render_labels(components, seed: int = 42) -> np.ndarray:
    """Color every component of a ComponentSet with its own palette entry on black."""
    h, w = components.dims
    out = np.zeros((h, w, 3), dtype=np.uint8)
    colors = label_palette(len(components), seed)
    for color, comp in zip(colors, components):
        rows, cols = comp.coords[:, 0], comp.coords[:, 1]
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= h or cols.max() >= w):
            raise ValueError(f"component {comp.id} lies outside {h}x{w}")
        out[rows, cols] = color
    return out


def render_diff(a, b) -> np.ndarray:
    """Color pixels by membership: a only, b only, both (white), neither (black)."""
    a, b = check_mask(a, "a"), check_mask(b, "b")
    check_same_shape(a, b)
    out = np.zeros(a.shape + (3,), dtype=np.uint8)
    out[a & ~b] = DIFF_A_ONLY
    out[b & ~a] = DIFF_B_ONLY
    out[a & b] = DIFF_BOTH
    return out
