"""Image I/O (PPM/PGM/PNG) and conversion to the spatial+CIELAB feature space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ImageError",
    "RasterImage",
    "FeatureImage",
    "load_image",
    "save_image",
    "to_feature_image",
    "rgb_to_lab",
    "boundary_mask",
    "save_label_overlay",
    "save_label_map",
    "load_label_map",
]

# D65 reference white, 2 degree observer.
_WHITE_X = 95.047
_WHITE_Y = 100.0
_WHITE_Z = 108.883

_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageError(Exception):
    """Raised for unreadable, malformed, or unsupported image files."""


@dataclass
class RasterImage:
    """8-bit raster; data has shape (height, width, channels), channels 1 or 3."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError("data shape does not match declared dimensions")
        if self.data.dtype != np.uint8:
            raise ValueError("data must be uint8")


@dataclass
class FeatureImage:
    """Per-pixel feature vectors, row-major.

    features has shape (width*height, dim); columns are (x, y, L, a, b)
    for color input or (x, y, intensity) for grayscale.
    """

    width: int
    height: int
    dim: int
    features: np.ndarray

    @property
    def num_pixels(self) -> int:
        return self.width * self.height

    @property
    def is_color(self) -> bool:
        return self.dim == 5


def _read_pnm_token(f) -> bytes:
    """Next whitespace-delimited token, skipping '#' comments."""
    tok = b""
    while True:
        ch = f.read(1)
        if ch == b"":
            raise ImageError("malformed image: truncated header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = f.read(1)
            continue
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def _load_pnm(f, magic: bytes) -> RasterImage:
    channels = 3 if magic == b"P6" else 1
    try:
        width = int(_read_pnm_token(f))
        height = int(_read_pnm_token(f))
        maxval = int(_read_pnm_token(f))
    except ValueError as exc:
        raise ImageError("malformed image: bad header field") from exc
    if width < 1 or height < 1:
        raise ImageError("malformed image: non-positive dimensions")
    if maxval != 255:
        raise ImageError(f"unsupported bit depth: maxval {maxval} (only 255)")
    n = width * height * channels
    raw = f.read(n)
    if len(raw) != n:
        raise ImageError("malformed image: truncated pixel data")
    data = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return RasterImage(width, height, channels, data.copy())


def _load_png(path) -> RasterImage:
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageError("PNG support requires Pillow") from exc
    try:
        with Image.open(path) as im:
            if im.mode in ("I;16", "I;16B", "I", "F"):
                raise ImageError("unsupported bit depth: only 8-bit PNG accepted")
            if im.mode in ("L",):
                arr = np.asarray(im, dtype=np.uint8)[:, :, None]
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except ImageError:
        raise
    except Exception as exc:
        raise ImageError(f"malformed image: {exc}") from exc
    h, w, c = arr.shape
    return RasterImage(w, h, c, arr)


def load_image(path) -> RasterImage:
    """Decode a binary PPM (P6), PGM (P5), or 8-bit PNG file."""
    try:
        f = open(path, "rb")
    except OSError as exc:
        raise ImageError(f"cannot open {path}: {exc}") from exc
    with f:
        head = f.read(2)
        if head in (b"P6", b"P5"):
            return _load_pnm(f, head)
        if (head + f.read(6)).startswith(PNG_SIGNATURE):
            pass
        else:
            raise ImageError(f"unsupported image format in {path}")
    return _load_png(path)


def save_image(img: RasterImage, path) -> None:
    """Write a raster as PPM/PGM or PNG, chosen by file extension."""
    suffix = str(path).lower().rsplit(".", 1)[-1]
    if suffix == "png":
        from PIL import Image
        arr = img.data[:, :, 0] if img.channels == 1 else img.data
        Image.fromarray(arr).save(path)
        return
    magic = b"P6" if img.channels == 3 else b"P5"
    header = b"%s\n%d %d\n255\n" % (magic, img.width, img.height)
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(img.data.tobytes())
    except OSError as exc:
        raise ImageError(f"cannot write {path}: {exc}") from exc


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB (uint8, shape (..., 3)) to CIELAB under D65."""
    srgb = np.asarray(rgb, dtype=np.float64) / 255.0
    linear = np.where(srgb <= 0.04045,
                      srgb / 12.92,
                      ((srgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T * 100.0
    ratios = xyz / np.array([_WHITE_X, _WHITE_Y, _WHITE_Z])
    delta = 6.0 / 29.0
    fxyz = np.where(ratios > delta ** 3,
                    np.cbrt(ratios),
                    ratios / (3 * delta ** 2) + 4.0 / 29.0)
    lab = np.empty_like(fxyz)
    lab[..., 0] = 116.0 * fxyz[..., 1] - 16.0
    lab[..., 1] = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    lab[..., 2] = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return lab


def to_feature_image(img: RasterImage) -> FeatureImage:
    """Attach pixel coordinates and convert color to CIELAB.

    Grayscale intensity passes through unscaled in [0, 255]; default
    tuning constants assume CIELAB units, so grayscale may need retuning.
    """
    w, h = img.width, img.height
    ys, xs = np.mgrid[0:h, 0:w]
    if img.channels == 3:
        color = rgb_to_lab(img.data)
        dim = 5
    else:
        color = img.data.astype(np.float64)
        dim = 3
    features = np.concatenate(
        [xs[:, :, None].astype(np.float64), ys[:, :, None].astype(np.float64),
         color], axis=2)
    return FeatureImage(w, h, dim, np.ascontiguousarray(features.reshape(w * h, dim)))


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """True where a pixel's 4-neighborhood contains a different label."""
    labels = np.asarray(labels)
    mask = np.zeros(labels.shape, dtype=bool)
    mask[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    mask[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    mask[:-1, :] |= labels[:-1, :] != labels[1:, :]
    mask[1:, :] |= labels[1:, :] != labels[:-1, :]
    return mask


def save_label_overlay(img: RasterImage, labels: np.ndarray, path,
                       color: tuple[int, int, int] = (255, 0, 0)) -> None:
    """Write the image with label boundary pixels painted a fixed color."""
    labels = np.asarray(labels)
    if labels.shape != (img.height, img.width):
        raise ValueError("label map dimensions do not match image")
    mask = boundary_mask(labels)
    if img.channels == 3:
        out = img.data.copy()
        out[mask] = np.asarray(color, dtype=np.uint8)
        save_image(RasterImage(img.width, img.height, 3, out), path)
    else:
        out = np.repeat(img.data, 3, axis=2).copy()
        out[mask] = np.asarray(color, dtype=np.uint8)
        save_image(RasterImage(img.width, img.height, 3, out), path)


def save_label_map(labels: np.ndarray, path) -> None:
    """Serialize a label map as 16-bit big-endian PGM (P5, maxval 65535)."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise ValueError("labels must fit in uint16")
    h, w = labels.shape
    header = b"P5\n%d %d\n65535\n" % (w, h)
    with open(path, "wb") as f:
        f.write(header)
        f.write(labels.astype(">u2").tobytes())


def load_label_map(path) -> np.ndarray:
    """Read a label map stored in the 16-bit PGM convention."""
    try:
        f = open(path, "rb")
    except OSError as exc:
        raise ImageError(f"cannot open {path}: {exc}") from exc
    with f:
        if f.read(2) != b"P5":
            raise ImageError("label maps must be PGM (P5)")
        width = int(_read_pnm_token(f))
        height = int(_read_pnm_token(f))
        maxval = int(_read_pnm_token(f))
        if maxval != 65535:
            raise ImageError("label maps must use maxval 65535")
        n = width * height * 2
        raw = f.read(n)
        if len(raw) != n:
            raise ImageError("malformed label map: truncated data")
    return np.frombuffer(raw, dtype=">u2").reshape(height, width).astype(np.int32)
