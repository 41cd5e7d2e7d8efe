"""Scientific image rendering for agent inspection.

Float-valued arrays are windowed to a percentile range (nearest-rank, so the
bounds are always actual pixel values), optionally log-scaled for high
dynamic range, and written as 8-bit PNG. TIFF inputs are decoded without
premature quantization so the agent can inspect quantitative values.
"""

from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

RAW_MAGIC = b"RAWF"
_RAW_HEADER = struct.Struct("<4sIII8s")


class RenderError(ValueError):
    pass


class UnrenderableError(RenderError):
    """The image has no finite pixels to build display statistics from."""


class UnsupportedImageError(RenderError):
    pass


@dataclass
class ImageBuffer:
    """Real-valued pixels, (H, W) or (H, W, 3); NaN/inf allowed."""

    pixels: np.ndarray
    note: str = ""

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim == 2:
            pass
        elif arr.ndim == 3 and arr.shape[2] == 3:
            pass
        else:
            raise UnsupportedImageError(
                f"expected (H, W) or (H, W, 3) pixels, got shape {arr.shape}"
            )
        if arr.size == 0:
            raise UnsupportedImageError("empty image")
        self.pixels = arr.astype(np.float64, copy=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass(frozen=True)
class RenderSpec:
    p_low: float = 1.0
    p_high: float = 99.0
    log_scale: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.p_low < self.p_high <= 100):
            raise RenderError(
                f"need 0 <= p_low < p_high <= 100, got ({self.p_low}, {self.p_high})"
            )


@dataclass(frozen=True)
class DisplayBounds:
    v_low: float
    v_high: float
    degenerate: bool


def nearest_rank(sorted_values: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile over pre-sorted values: idx = ceil(p/100 * n)."""
    n = len(sorted_values)
    index = max(1, math.ceil(percentile / 100.0 * n))
    return float(sorted_values[index - 1])


def display_bounds(
    img: ImageBuffer, p_low: float = 1.0, p_high: float = 99.0
) -> DisplayBounds:
    """Percentile display window over the finite pixel values."""
    RenderSpec(p_low=p_low, p_high=p_high)  # bounds validation
    values = img.pixels[np.isfinite(img.pixels)]
    if values.size == 0:
        raise UnrenderableError("image has no finite pixels")
    ordered = np.sort(values, kind="stable")
    v_low = nearest_rank(ordered, p_low)
    v_high = nearest_rank(ordered, p_high)
    return DisplayBounds(v_low=v_low, v_high=v_high, degenerate=not (v_low < v_high))


def render_bytes(img: ImageBuffer, spec: RenderSpec = RenderSpec()) -> bytes:
    """Render to PNG bytes: clip, optional log(1 + (x - v_low)), map to 0-255.

    Non-finite pixels render as 0; a degenerate window renders mid-gray so
    constant images stay visually distinguishable from black.
    """
    from PIL import Image

    bounds = display_bounds(img, spec.p_low, spec.p_high)
    pixels = img.pixels
    finite = np.isfinite(pixels)
    if bounds.degenerate:
        out = np.full(pixels.shape, 128, dtype=np.uint8)
    else:
        clipped = np.clip(pixels, bounds.v_low, bounds.v_high)
        if spec.log_scale:
            transformed = np.log1p(clipped - bounds.v_low)
            span = math.log1p(bounds.v_high - bounds.v_low)
        else:
            transformed = clipped - bounds.v_low
            span = bounds.v_high - bounds.v_low
        with np.errstate(invalid="ignore"):
            scaled = np.rint(transformed / span * 255.0)
        scaled = np.where(finite, scaled, 0.0)
        out = np.clip(scaled, 0, 255).astype(np.uint8)
    out = np.where(finite, out, np.uint8(0))
    mode = "L" if img.channels == 1 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(out, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def render_to(
    img: ImageBuffer, out_path: Path | str, spec: RenderSpec = RenderSpec()
) -> Path:
    out_path = Path(out_path)
    data = render_bytes(img, spec)
    try:
        out_path.write_bytes(data)
    except OSError as exc:
        raise RenderError(f"cannot write PNG to {out_path}: {exc}") from exc
    return out_path


def convert_tiff(path: Path | str) -> ImageBuffer:
    """Decode a TIFF preserving quantitative values (no 8-bit quantization)."""
    import tifffile

    path = Path(path)
    try:
        with tifffile.TiffFile(path) as tif:
            pages = len(tif.pages)
            array = tif.pages[0].asarray()
    except (tifffile.TiffFileError, ValueError, OSError, IndexError, KeyError) as exc:
        raise RenderError(f"cannot decode TIFF {path}: {exc}") from exc
    note = ""
    if pages > 1:
        note = f"multi-page TIFF: rendered page 1 of {pages}"
        logger.warning("%s: %s", path, note)
    if array.ndim == 3 and array.shape[2] not in (3,):
        raise UnsupportedImageError(
            f"unsupported TIFF layout {array.shape}; expected grayscale or RGB"
        )
    if array.ndim not in (2, 3):
        raise UnsupportedImageError(
            f"unsupported TIFF dimensionality {array.ndim}; expected 2-D image"
        )
    if array.dtype == np.bool_ or array.dtype.kind not in "uif":
        raise UnsupportedImageError(f"unsupported TIFF sample type {array.dtype}")
    return ImageBuffer(pixels=array, note=note)


def write_raw(path: Path | str, pixels: np.ndarray) -> Path:
    """Binary sidecar: magic, height, width, channels, dtype, row-major data."""
    path = Path(path)
    arr = np.ascontiguousarray(pixels)
    if arr.ndim == 2:
        channels = 1
    elif arr.ndim == 3 and arr.shape[2] == 3:
        channels = 3
    else:
        raise UnsupportedImageError(f"cannot serialize shape {arr.shape}")
    dtype_tag = arr.dtype.str.encode("ascii").ljust(8, b"\0")
    header = _RAW_HEADER.pack(RAW_MAGIC, arr.shape[0], arr.shape[1], channels, dtype_tag)
    path.write_bytes(header + arr.tobytes())
    return path


def read_raw(path: Path | str) -> ImageBuffer:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _RAW_HEADER.size:
        raise RenderError(f"{path} is too short to be a raw image")
    magic, height, width, channels, dtype_tag = _RAW_HEADER.unpack_from(blob)
    if magic != RAW_MAGIC:
        raise RenderError(f"{path} lacks the raw-image magic")
    dtype = np.dtype(dtype_tag.rstrip(b"\0").decode("ascii"))
    shape = (height, width) if channels == 1 else (height, width, channels)
    expected = int(np.prod(shape)) * dtype.itemsize
    body = blob[_RAW_HEADER.size :]
    if len(body) != expected:
        raise RenderError(
            f"{path}: payload is {len(body)} bytes, header implies {expected}"
        )
    pixels = np.frombuffer(body, dtype=dtype).reshape(shape)
    return ImageBuffer(pixels=pixels.copy())


def load_image(path: Path | str) -> ImageBuffer:
    """Load TIFF / PNG / raw-sidecar files into a real-valued buffer."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".tif", ".tiff"):
        return convert_tiff(path)
    if suffix in (".raw", ".bin"):
        return read_raw(path)
    if suffix in (".png", ".jpg", ".jpeg", ".bmp"):
        from PIL import Image

        with Image.open(path) as img:
            if img.mode not in ("L", "I", "I;16", "F", "RGB"):
                img = img.convert("RGB")
            return ImageBuffer(pixels=np.asarray(img))
    raise UnsupportedImageError(f"unsupported image format: {path.suffix!r}")


def render_file(
    in_path: Path | str,
    out_path: Optional[Path | str] = None,
    spec: RenderSpec = RenderSpec(),
) -> tuple[Path, ImageBuffer]:
    """Load, render, and write the PNG next to the source by default."""
    in_path = Path(in_path)
    buffer = load_image(in_path)
    if out_path is None:
        out_path = in_path.with_suffix(".render.png")
    return render_to(buffer, out_path, spec), buffer
