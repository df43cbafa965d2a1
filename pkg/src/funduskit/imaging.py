"""Deterministic raster transforms for retinal fundus photographs.

The pipeline stages live here: foreground (circular mask) detection,
square cropping with black padding, resizing, weighted Gaussian-blur
contrast enhancement, byte-to-unit normalization, and seeded train-time
augmentation.

Every function is pure: identical inputs (plus the seed, where sampling
is involved) produce bit-identical outputs, so batch drivers are free to
parallelize over images without changing results.

Conventions: rasters are ``(height, width, 3)`` numpy arrays; ``x``
indexes columns and ``y`` rows. Byte-range images hold values in
``[0, 255]``, unit-range images in ``[-1, 1]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import cv2
import numpy as np

from .exceptions import NoMaskFound

__all__ = [
    "RangeTag",
    "ImageBuffer",
    "MaskBounds",
    "EnhanceParams",
    "AugmentSpec",
    "AugmentDraw",
    "PreprocessConfig",
    "gaussian_kernel1d",
    "gaussian_blur",
    "detect_mask",
    "crop_resize",
    "graham_enhance",
    "normalize",
    "sample_augment",
    "apply_augment",
    "augment",
    "preprocess",
    "preprocess_to_bytes",
]


class RangeTag(enum.Enum):
    """Value range a raster is tagged with."""

    BYTE255 = "byte255"  # [0, 255]
    UNIT = "unit"        # [-1, 1]


_RANGE_LIMITS = {RangeTag.BYTE255: (0.0, 255.0), RangeTag.UNIT: (-1.0, 1.0)}
_BLACK_LEVEL = {RangeTag.BYTE255: 0.0, RangeTag.UNIT: -1.0}


@dataclass(frozen=True)
class ImageBuffer:
    """A three-channel raster plus the value range it is tagged with.

    The tag is checked at construction so that byte-range and unit-range
    stages cannot be mixed up silently.
    """

    data: np.ndarray
    range_tag: RangeTag = RangeTag.BYTE255

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) raster, got shape {self.data.shape}")
        lo, hi = _RANGE_LIMITS[self.range_tag]
        dmin = float(self.data.min())
        dmax = float(self.data.max())
        if dmin < lo or dmax > hi:
            raise ValueError(
                f"{self.range_tag.value} image has values in [{dmin}, {dmax}], "
                f"outside [{lo}, {hi}]"
            )

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_bytes(cls, data: np.ndarray) -> "ImageBuffer":
        """Wrap a byte-range array, converting dtype to uint8."""
        return cls(np.ascontiguousarray(data, dtype=np.uint8), RangeTag.BYTE255)

    @classmethod
    def from_unit(cls, data: np.ndarray) -> "ImageBuffer":
        """Wrap a unit-range array, converting dtype to float32."""
        return cls(np.ascontiguousarray(data, dtype=np.float32), RangeTag.UNIT)


@dataclass(frozen=True)
class MaskBounds:
    """Tight bounding box (inclusive pixel indices) of detected foreground."""

    x_min: int
    x_max: int
    y_min: int
    y_max: int

    def __post_init__(self):
        if not (0 <= self.x_min <= self.x_max and 0 <= self.y_min <= self.y_max):
            raise ValueError(f"invalid bounds {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


@dataclass(frozen=True)
class EnhanceParams:
    """Weights for blur-subtraction contrast enhancement.

    ``out = clip(alpha * img + beta * blur(img, sigma) + gamma, 0, 255)``
    with ``sigma = sigma_fraction * width``. The defaults are the widely
    used fundus recipe: amplify local contrast by subtracting a heavily
    blurred copy and re-center on mid-gray.
    """

    alpha: float = 4.0
    beta: float = -4.0
    gamma: float = 128.0
    sigma_fraction: float = 1.0 / 30.0

    def __post_init__(self):
        if self.sigma_fraction <= 0:
            raise ValueError("sigma_fraction must be positive")


@dataclass(frozen=True)
class AugmentSpec:
    """Sampling ranges for train-time augmentation.

    ``rotation_degrees`` bounds a uniform draw in ``[-r, +r]``;
    ``flip_horizontal`` / ``flip_vertical`` enable independent coin flips.
    The same (spec, seed) always produces the same transform.
    """

    rotation_degrees: float = 15.0
    flip_horizontal: bool = True
    flip_vertical: bool = True
    seed: int = 0


@dataclass(frozen=True)
class AugmentDraw:
    """A concrete sampled transform (useful for forcing specific draws)."""

    angle_degrees: float = 0.0
    flip_horizontal: bool = False
    flip_vertical: bool = False


@dataclass(frozen=True)
class PreprocessConfig:
    """End-to-end preprocessing settings.

    ``enhance_enabled=False`` gives the crop-only ablation path.
    """

    mask_threshold: float = 10.0
    target_size: int = 587
    enhance: EnhanceParams = field(default_factory=EnhanceParams)
    enhance_enabled: bool = True

    def __post_init__(self):
        if self.target_size < 1:
            raise ValueError("target_size must be >= 1")


# --- Gaussian blur ----------------------------------------------------------

def gaussian_kernel1d(sigma: float, truncate: float = 4.0) -> np.ndarray:
    """Discretized, sum-normalized 1-D Gaussian kernel.

    The kernel is sampled at integer offsets out to ``truncate * sigma``
    (radius at least 1) and normalized so it sums to 1, which makes the
    blur of a constant image exactly that constant.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = max(1, int(truncate * sigma + 0.5))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_blur(data: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflected (edge-repeating) borders.

    Accepts a 2-D plane or an (H, W, C) stack; channels are filtered
    independently. Returns float64 regardless of input dtype.
    """
    kernel = gaussian_kernel1d(sigma)
    src = np.ascontiguousarray(data, dtype=np.float64)
    return cv2.sepFilter2D(src, -1, kernel, kernel, borderType=cv2.BORDER_REFLECT)


# --- pipeline stages --------------------------------------------------------

def detect_mask(img: ImageBuffer, threshold: float = 10.0) -> MaskBounds:
    """Tight bounding box of pixels whose channel-mean exceeds ``threshold``.

    Raises:
        NoMaskFound: if no pixel is brighter than the threshold.
    """
    if img.range_tag is not RangeTag.BYTE255:
        raise ValueError("detect_mask expects a byte-range image")
    gray = img.data.astype(np.float64).mean(axis=2)
    fg = gray > threshold
    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    if rows.size == 0:
        raise NoMaskFound(f"no pixel brighter than {threshold}")
    return MaskBounds(
        x_min=int(cols[0]), x_max=int(cols[-1]),
        y_min=int(rows[0]), y_max=int(rows[-1]),
    )


def crop_resize(img: ImageBuffer, bounds: MaskBounds, target: int) -> ImageBuffer:
    """Square crop around ``bounds``, then bilinear resize to target x target.

    The crop is the smallest square containing the bounds, centered on
    them; where the square extends past the frame it is padded with
    black. A crop already at the target size is returned untouched, so
    the identity case is pixel-exact.
    """
    if img.range_tag is not RangeTag.BYTE255:
        raise ValueError("crop_resize expects a byte-range image")
    if bounds.x_max >= img.width or bounds.y_max >= img.height:
        raise ValueError(f"bounds {bounds} exceed image {img.width}x{img.height}")
    side = max(bounds.width, bounds.height)
    x0 = bounds.x_min - (side - bounds.width) // 2
    y0 = bounds.y_min - (side - bounds.height) // 2

    square = np.zeros((side, side, 3), dtype=np.uint8)
    src_x0, src_y0 = max(x0, 0), max(y0, 0)
    src_x1, src_y1 = min(x0 + side, img.width), min(y0 + side, img.height)
    square[src_y0 - y0:src_y1 - y0, src_x0 - x0:src_x1 - x0] = (
        img.data[src_y0:src_y1, src_x0:src_x1]
    )
    if side != target:
        square = cv2.resize(square, (target, target), interpolation=cv2.INTER_LINEAR)
    return ImageBuffer(square, RangeTag.BYTE255)


def graham_enhance(
    img: ImageBuffer,
    params: EnhanceParams = EnhanceParams(),
    circle: tuple[float, float, float] | None = None,
) -> ImageBuffer:
    """Blur-subtraction contrast enhancement on a byte-range image.

    Computes ``clip(alpha*img + beta*blur + gamma, 0, 255)`` per channel
    with ``sigma = sigma_fraction * width``. When ``circle`` is given as
    ``(cx, cy, radius)`` in pixel coordinates, pixels outside it are set
    to the uniform ``gamma`` background; pass the circle of the detected
    fundus disk to flatten residual border noise. With ``circle=None``
    only the weighted formula is applied.
    """
    if img.range_tag is not RangeTag.BYTE255:
        raise ValueError("graham_enhance expects a byte-range image")
    src = img.data.astype(np.float64)
    out = params.alpha * src + params.gamma
    if params.beta != 0.0:
        out += params.beta * gaussian_blur(src, params.sigma_fraction * img.width)
    np.clip(out, 0.0, 255.0, out=out)
    result = np.rint(out).astype(np.uint8)
    if circle is not None:
        cx, cy, radius = circle
        yy, xx = np.ogrid[: img.height, : img.width]
        outside = (xx - cx) ** 2 + (yy - cy) ** 2 > radius**2
        result[outside] = np.uint8(np.clip(round(params.gamma), 0, 255))
    return ImageBuffer(result, RangeTag.BYTE255)


def normalize(img: ImageBuffer) -> ImageBuffer:
    """Map byte values to the unit range: ``v' = v / 127.5 - 1``."""
    if img.range_tag is not RangeTag.BYTE255:
        raise ValueError("normalize expects a byte-range image")
    return ImageBuffer(img.data.astype(np.float32) / np.float32(127.5) - np.float32(1.0),
                       RangeTag.UNIT)


# --- augmentation -----------------------------------------------------------

def sample_augment(spec: AugmentSpec) -> AugmentDraw:
    """Sample one concrete transform from ``spec``, deterministically."""
    rng = np.random.default_rng(spec.seed)
    angle = float(rng.uniform(-spec.rotation_degrees, spec.rotation_degrees))
    flip_h = bool(rng.integers(0, 2)) if spec.flip_horizontal else False
    flip_v = bool(rng.integers(0, 2)) if spec.flip_vertical else False
    return AugmentDraw(angle_degrees=angle, flip_horizontal=flip_h, flip_vertical=flip_v)


def apply_augment(img: ImageBuffer, draw: AugmentDraw) -> ImageBuffer:
    """Apply rotation then flips; shape and range tag are preserved.

    Corners uncovered by the rotation are filled with the range's black
    level (0 for byte images, -1 for unit images).
    """
    data = img.data
    if draw.angle_degrees != 0.0:
        h, w = data.shape[:2]
        fill = _BLACK_LEVEL[img.range_tag]
        matrix = cv2.getRotationMatrix2D(((w - 1) / 2.0, (h - 1) / 2.0),
                                         draw.angle_degrees, 1.0)
        data = cv2.warpAffine(
            data, matrix, (w, h),
            flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_CONSTANT,
            borderValue=(fill, fill, fill),
        )
    if draw.flip_horizontal:
        data = data[:, ::-1]
    if draw.flip_vertical:
        data = data[::-1]
    return ImageBuffer(np.ascontiguousarray(data), img.range_tag)


def augment(img: ImageBuffer, spec: AugmentSpec) -> ImageBuffer:
    """Seeded random rotation and flips; identical (spec, seed) -> identical output."""
    return apply_augment(img, sample_augment(spec))


# --- composition ------------------------------------------------------------

def preprocess_to_bytes(img: ImageBuffer, cfg: PreprocessConfig = PreprocessConfig()) -> ImageBuffer:
    """Detect mask, crop/resize, optionally enhance; stay in byte range."""
    bounds = detect_mask(img, cfg.mask_threshold)
    out = crop_resize(img, bounds, cfg.target_size)
    if cfg.enhance_enabled:
        # After the square crop the fundus disk inscribes the frame, so the
        # disk is the circle centered in the frame with radius target/2.
        t = cfg.target_size
        circle = ((t - 1) / 2.0, (t - 1) / 2.0, t / 2.0)
        out = graham_enhance(out, cfg.enhance, circle=circle)
    return out


def preprocess(img: ImageBuffer, cfg: PreprocessConfig = PreprocessConfig()) -> ImageBuffer:
    """Full pipeline: detect -> crop/resize -> (enhance) -> normalize."""
    return normalize(preprocess_to_bytes(img, cfg))
