"""Flow containers, image pyramids, resampling, and accuracy metrics."""

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, PyramidError
from ..geometry import Rect, check_inside
from ..imaging import Frame

MIN_LEVEL_SIDE = 16

_BINOMIAL5 = (1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0)


@dataclass(eq=False)
class FlowField:
    """Dense per-pixel displacement field, components in pixels.

    `u` has shape (height, width, 2) with (dx, dy) per cell; dtype is any
    float (the flow engine emits float32, analytic fields are float64).
    """

    width: int
    height: int
    u: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.u)
        if arr.shape != (self.height, self.width, 2):
            raise DimensionError(
                f"flow shape {arr.shape} does not match "
                f"({self.height}, {self.width}, 2)"
            )
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("flow contains non-finite components")
        self.u = arr

    @classmethod
    def zeros(cls, width: int, height: int, dtype=np.float32) -> "FlowField":
        return cls(width, height, np.zeros((height, width, 2), dtype=dtype))

    @property
    def dx(self) -> np.ndarray:
        return self.u[..., 0]

    @property
    def dy(self) -> np.ndarray:
        return self.u[..., 1]


@dataclass(frozen=True)
class FlowParams:
    """Dense inverse-search configuration.

    patch_size / patch_stride set the translation-patch grid, the pyramid
    runs coarse to fine from `pyramid_levels - 1` down to `finest_level`,
    and each patch gets at most `max_iterations_per_patch` Gauss-Newton
    steps. Variational refinement runs `refinement_iterations` fixed-point
    updates of a brightness + gradient constancy energy with TV smoothness.
    With `border_fill` (the default) cells within patch_size of the border
    take the nearest interior densified value; disabling it keeps the raw
    densified estimates there, which consumers measuring divergence up to
    the frame edge rely on.
    """

    patch_size: int = 8
    patch_stride: int = 4
    pyramid_levels: int = 4
    finest_level: int = 0
    max_iterations_per_patch: int = 12
    variational_refinement: bool = True
    refinement_iterations: int = 5
    border_fill: bool = True

    def __post_init__(self):
        if self.patch_size < 2:
            raise ValueError(f"patch_size {self.patch_size} too small")
        if not 0 < self.patch_stride <= self.patch_size:
            raise ValueError(
                f"patch_stride {self.patch_stride} must be in (0, patch_size]"
            )
        if self.pyramid_levels < 1:
            raise ValueError(f"pyramid_levels {self.pyramid_levels} must be >= 1")
        if not 0 <= self.finest_level < self.pyramid_levels:
            raise ValueError(
                f"finest_level {self.finest_level} must be in "
                f"[0, {self.pyramid_levels})"
            )
        if self.max_iterations_per_patch < 1:
            raise ValueError("max_iterations_per_patch must be >= 1")
        if self.refinement_iterations < 0:
            raise ValueError("refinement_iterations must be >= 0")


def _as_float_image(frame) -> np.ndarray:
    if isinstance(frame, Frame):
        return frame.pixels.astype(np.float32)
    arr = np.asarray(frame)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D image, got shape {arr.shape}")
    return np.ascontiguousarray(arr, dtype=np.float32)


def _binomial_axis(img: np.ndarray, axis: int) -> np.ndarray:
    pad = [(0, 0), (0, 0)]
    pad[axis] = (2, 2)
    p = np.pad(img, pad, mode="reflect")
    n = img.shape[axis]
    sl = [slice(None), slice(None)]
    out = np.zeros_like(img)
    for k, w in enumerate(_BINOMIAL5):
        sl[axis] = slice(k, k + n)
        out += w * p[tuple(sl)]
    return out


def binomial_downsample(img: np.ndarray) -> np.ndarray:
    """5-tap binomial low-pass followed by factor-2 decimation."""
    smooth = _binomial_axis(_binomial_axis(img.astype(np.float32), 1), 0)
    return np.ascontiguousarray(smooth[::2, ::2])


def build_pyramid(frame, levels: int) -> list[np.ndarray]:
    """Coarse-to-fine image stack; level 0 is the input as float32.

    Each coarser level is binomial-filtered and decimated by two; intensities stay
    real-valued to avoid quantization drift. Raises PyramidError when the
    coarsest level would drop below 16x16.
    """
    if levels < 1:
        raise PyramidError(f"levels {levels} must be >= 1")
    img = _as_float_image(frame)
    pyramid = [img]
    for _ in range(1, levels):
        img = binomial_downsample(img)
        pyramid.append(img)
    h, w = pyramid[-1].shape
    if min(h, w) < MIN_LEVEL_SIDE:
        raise PyramidError(
            f"too many levels: coarsest level is {w}x{h}, "
            f"minimum is {MIN_LEVEL_SIDE}x{MIN_LEVEL_SIDE}"
        )
    return pyramid


def max_pyramid_levels(width: int, height: int) -> int:
    """Deepest pyramid whose coarsest level stays at least 16x16."""
    levels = 1
    w, h = width, height
    while True:
        w = (w + 1) // 2
        h = (h + 1) // 2
        if min(w, h) < MIN_LEVEL_SIDE:
            return levels
        levels += 1


def grad2d(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient, one-sided on the border."""
    img = np.asarray(img)
    gx = np.empty_like(img)
    gy = np.empty_like(img)
    gx[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
    gx[:, 0] = img[:, 1] - img[:, 0]
    gx[:, -1] = img[:, -1] - img[:, -2]
    gy[1:-1, :] = 0.5 * (img[2:, :] - img[:-2, :])
    gy[0, :] = img[1, :] - img[0, :]
    gy[-1, :] = img[-1, :] - img[-2, :]
    return gx, gy


def bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Samples `img` at real coordinates, clamping to the nearest edge pixel."""
    h, w = img.shape
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x), w - 2).astype(np.intp) if w > 1 else np.zeros_like(x, np.intp)
    y0 = np.minimum(np.floor(y), h - 2).astype(np.intp) if h > 1 else np.zeros_like(y, np.intp)
    fx = x - x0
    fy = y - y0
    flat = img.reshape(-1)
    idx = y0 * w + x0
    v00 = flat[idx]
    v01 = flat[idx + (1 if w > 1 else 0)]
    v10 = flat[idx + (w if h > 1 else 0)]
    v11 = flat[idx + ((w + 1) if (w > 1 and h > 1) else 0)]
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    return top + fy * (bot - top)


def resize_flow(u: np.ndarray, v: np.ndarray, out_h: int, out_w: int
                ) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear flow resize with component rescaling to the new pixel units."""
    in_h, in_w = u.shape
    if (in_h, in_w) == (out_h, out_w):
        return u.copy(), v.copy()
    sx = in_w / out_w
    sy = in_h / out_h
    xt = (np.arange(out_w, dtype=np.float64) + 0.5) * sx - 0.5
    yt = (np.arange(out_h, dtype=np.float64) + 0.5) * sy - 0.5
    gx, gy = np.meshgrid(xt, yt)
    u2 = bilinear_sample(u.astype(np.float64), gx, gy) * (out_w / in_w)
    v2 = bilinear_sample(v.astype(np.float64), gx, gy) * (out_h / in_h)
    return u2.astype(np.float32), v2.astype(np.float32)


def patch_grid(width: int, height: int, patch_size: int, stride: int
               ) -> tuple[np.ndarray, np.ndarray]:
    """Top-left patch coordinates covering the image, flush with the far edge."""
    xs = list(range(0, width - patch_size + 1, stride))
    if xs[-1] != width - patch_size:
        xs.append(width - patch_size)
    ys = list(range(0, height - patch_size + 1, stride))
    if ys[-1] != height - patch_size:
        ys.append(height - patch_size)
    return np.asarray(xs, dtype=np.int32), np.asarray(ys, dtype=np.int32)


def fill_border(u: np.ndarray, v: np.ndarray, band: int) -> None:
    """Overwrites a border band with the nearest interior value, in place."""
    h, w = u.shape
    band = min(band, (h - 1) // 2, (w - 1) // 2)
    if band <= 0:
        return
    for a in (u, v):
        a[:band, :] = a[band:band + 1, :]
        a[h - band:, :] = a[h - band - 1:h - band, :]
        a[:, :band] = a[:, band:band + 1]
        a[:, w - band:] = a[:, w - band - 1:w - band]


def endpoint_error(estimate: FlowField, truth: FlowField,
                   roi: Rect | None = None) -> tuple[float, float]:
    """Mean and 95th-percentile Euclidean flow error over the ROI."""
    if (estimate.width, estimate.height) != (truth.width, truth.height):
        raise DimensionError(
            f"flow dimensions differ: {estimate.width}x{estimate.height} vs "
            f"{truth.width}x{truth.height}"
        )
    diff = estimate.u.astype(np.float64) - truth.u.astype(np.float64)
    err = np.hypot(diff[..., 0], diff[..., 1])
    if roi is not None:
        check_inside(roi, estimate.width, estimate.height)
        err = err[roi.slices]
    return float(err.mean()), float(np.percentile(err, 95))
