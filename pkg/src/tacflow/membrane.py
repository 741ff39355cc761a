"""Synthetic deformable-membrane simulator with analytic ground truth.

Parametric displacement fields are imposed on a marker frame, the deformed
image is rendered by backward warping, and the analytic field, contact mask,
and forward force model supply ground truth for the estimation pipeline.
"""

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .calibration import CalibrationModel, DEFAULT_SHEAR_MODEL, force_from_displacement
from .errors import ScheduleError, SchemaError
from .flow.core import FlowField, bilinear_sample
from .geometry import centered_square
from .imaging import Frame

KINDS = ("uniform_shear", "indentation", "tilt_ramp", "composite")

DEFAULT_ROI_SIDE = 220

TRUTH_CSV_HEADER = "frame,time_s,area_fraction,mean_dx_px,mean_dy_px,force_x_N,force_y_N"


@dataclass(frozen=True)
class DeformationSpec:
    """Parametric membrane deformation with an analytic displacement field.

    kind selects the family: uniform_shear (rigid translation by `shear`),
    indentation (radial expansion of strength `amplitude` within `radius` of
    `center`), tilt_ramp (shear ramping linearly across a contact band that
    covers `ramp_fraction` of the extent along `ramp_axis`), or composite
    (sum of non-composite children).
    """

    kind: str
    shear: tuple[float, float] = (0.0, 0.0)
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    amplitude: float = 0.0
    ramp_axis: tuple[float, float] = (0.0, 1.0)
    ramp_fraction: float = 0.0
    children: tuple["DeformationSpec", ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown deformation kind {self.kind!r}")
        if self.kind == "indentation" and not self.radius > 0:
            raise ValueError(f"indentation radius must be positive, got {self.radius}")
        if self.kind == "tilt_ramp":
            if not 0.0 <= self.ramp_fraction <= 1.0:
                raise ValueError(f"ramp_fraction {self.ramp_fraction} outside [0, 1]")
            ax, ay = self.ramp_axis
            norm = float(np.hypot(ax, ay))
            if norm < 1e-12:
                raise ValueError("ramp_axis must be a nonzero vector")
            object.__setattr__(self, "ramp_axis", (ax / norm, ay / norm))
        if self.kind == "composite":
            if any(c.kind == "composite" for c in self.children):
                raise ValueError("composite children must not be composites")
            object.__setattr__(self, "children", tuple(self.children))
        elif self.children:
            raise ValueError(f"{self.kind} takes no children")


def uniform_shear(dx: float, dy: float) -> DeformationSpec:
    return DeformationSpec("uniform_shear", shear=(float(dx), float(dy)))


def indentation(center: tuple[float, float], radius: float,
                amplitude: float) -> DeformationSpec:
    return DeformationSpec("indentation", center=(float(center[0]), float(center[1])),
                           radius=float(radius), amplitude=float(amplitude))


def tilt_ramp(shear: tuple[float, float], axis: tuple[float, float],
              fraction: float) -> DeformationSpec:
    return DeformationSpec("tilt_ramp", shear=(float(shear[0]), float(shear[1])),
                           ramp_axis=(float(axis[0]), float(axis[1])),
                           ramp_fraction=float(fraction))


def composite(*children: DeformationSpec) -> DeformationSpec:
    return DeformationSpec("composite", children=tuple(children))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Analytic truth for one rendered deformation."""

    flow: FlowField
    contact_mask: np.ndarray        # full-grid bool
    area_fraction: float            # over the central ROI
    shear_force: np.ndarray         # (2,) newtons
    mean_displacement: np.ndarray   # (2,) pixels, over the central ROI


def _tilt_band(spec: DeformationSpec, width: int, height: int):
    """Signed coordinate along the ramp axis and the band threshold."""
    ax, ay = spec.ramp_axis
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    extent = abs(ax) * width + abs(ay) * height
    s0 = (spec.ramp_fraction - 0.5) * extent
    return ax, ay, cx, cy, extent, s0


def _accumulate_field(spec: DeformationSpec, xg, yg, width, height, out):
    if spec.kind == "uniform_shear":
        out[..., 0] += spec.shear[0]
        out[..., 1] += spec.shear[1]
    elif spec.kind == "indentation":
        dx = xg - spec.center[0]
        dy = yg - spec.center[1]
        r2 = (dx * dx + dy * dy) / (spec.radius * spec.radius)
        m = spec.amplitude * np.maximum(0.0, 1.0 - r2)
        out[..., 0] += m * dx
        out[..., 1] += m * dy
    elif spec.kind == "tilt_ramp":
        ax, ay, cx, cy, extent, s0 = _tilt_band(spec, width, height)
        denom = spec.ramp_fraction * extent
        if denom > 1e-12:
            s = (xg - cx) * ax + (yg - cy) * ay
            lam = np.clip((s0 - s) / denom, 0.0, 1.0)
            out[..., 0] += spec.shear[0] * lam
            out[..., 1] += spec.shear[1] * lam
    else:
        for child in spec.children:
            _accumulate_field(child, xg, yg, width, height, out)


def analytic_field(spec: DeformationSpec, width: int, height: int) -> FlowField:
    """Closed-form displacement field of `spec` on a width x height grid."""
    yg, xg = np.mgrid[0:height, 0:width].astype(np.float64)
    out = np.zeros((height, width, 2), dtype=np.float64)
    _accumulate_field(spec, xg, yg, width, height, out)
    return FlowField(width, height, out)


def _support(spec: DeformationSpec, xg, yg, width, height, *, top_level: bool,
             shear_contact: str) -> np.ndarray:
    if spec.kind == "uniform_shear":
        full = top_level and shear_contact == "full"
        return np.full((height, width), full, dtype=bool)
    if spec.kind == "indentation":
        dx = xg - spec.center[0]
        dy = yg - spec.center[1]
        return (dx * dx + dy * dy) < spec.radius * spec.radius
    if spec.kind == "tilt_ramp":
        if spec.ramp_fraction <= 0.0:
            return np.zeros((height, width), dtype=bool)
        ax, ay, cx, cy, _, s0 = _tilt_band(spec, width, height)
        s = (xg - cx) * ax + (yg - cy) * ay
        return s < s0
    mask = np.zeros((height, width), dtype=bool)
    for child in spec.children:
        mask |= _support(child, xg, yg, width, height, top_level=False,
                         shear_contact=shear_contact)
    return mask


def contact_support(spec: DeformationSpec, width: int, height: int, *,
                    shear_contact: str = "full") -> np.ndarray:
    """Boolean grid of cells the deformation treats as in contact.

    `shear_contact` selects the convention for a pure top-level uniform
    shear: "full" (whole membrane stuck, the default) or "empty". Uniform
    shear children inside composites are contact-neutral translations and
    never contribute cells.
    """
    if shear_contact not in ("full", "empty"):
        raise ValueError(f"shear_contact must be 'full' or 'empty', got {shear_contact!r}")
    yg, xg = np.mgrid[0:height, 0:width].astype(np.float64)
    return _support(spec, xg, yg, width, height, top_level=True,
                    shear_contact=shear_contact)


def ground_truth(spec: DeformationSpec, model: CalibrationModel,
                 dims: tuple[int, int], *, roi_side: int = DEFAULT_ROI_SIDE,
                 shear_contact: str = "full") -> GroundTruth:
    """Analytic flow, contact mask, ROI area fraction, and forward force."""
    width, height = dims
    flow = analytic_field(spec, width, height)
    mask = contact_support(spec, width, height, shear_contact=shear_contact)
    roi = centered_square(width, height, roi_side)
    area = float(mask[roi.slices].mean())
    mean_disp = flow.u[roi.slices].reshape(-1, 2).mean(axis=0)
    force = force_from_displacement(model, mean_disp)
    return GroundTruth(flow, mask, area, force, mean_disp)


def render(base: Frame, spec: DeformationSpec, *, noise_sigma: float = 0.0,
           noise_seed: int = 0, timestamp: float | None = None) -> Frame:
    """Backward-warps the marker frame by the spec's field.

    I1(p) = I0(p - u(p)) with bilinear interpolation, edge clamping, optional
    additive Gaussian intensity noise, and rounding to the nearest intensity.
    """
    flow = analytic_field(spec, base.width, base.height)
    yg, xg = np.mgrid[0:base.height, 0:base.width].astype(np.float64)
    sampled = bilinear_sample(base.pixels.astype(np.float64),
                              xg - flow.u[..., 0], yg - flow.u[..., 1])
    if noise_sigma > 0.0:
        noise = rng.normals(noise_seed, sampled.size).reshape(sampled.shape)
        sampled = sampled + noise_sigma * noise
    pixels = np.clip(np.rint(sampled), 0, 255).astype(np.uint8)
    return Frame(base.width, base.height, pixels, base.scale,
                 base.timestamp if timestamp is None else timestamp)


def simulate_sequence(base: Frame, schedule: Sequence[tuple[float, DeformationSpec]],
                      *, model: CalibrationModel = DEFAULT_SHEAR_MODEL,
                      roi_side: int = DEFAULT_ROI_SIDE,
                      shear_contact: str = "full", noise_sigma: float = 0.0,
                      noise_seed: int = 0) -> list[tuple[Frame, GroundTruth]]:
    """Renders one frame plus ground truth per schedule entry.

    Schedule times must be strictly increasing; they become the frame
    timestamps.
    """
    times = [t for t, _ in schedule]
    if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
        raise ScheduleError(f"schedule times must be strictly increasing: {times}")
    if times and times[0] < 0:
        raise ScheduleError(f"schedule times must be non-negative: {times[0]}")
    out = []
    for k, (t, spec) in enumerate(schedule):
        frame = render(base, spec, noise_sigma=noise_sigma,
                       noise_seed=noise_seed + k, timestamp=t)
        truth = ground_truth(spec, model, (base.width, base.height),
                             roi_side=roi_side, shear_contact=shear_contact)
        out.append((frame, truth))
    return out


def format_truth_row(index: int, time_s: float, truth: GroundTruth) -> str:
    return (f"{index},{time_s},{truth.area_fraction},"
            f"{truth.mean_displacement[0]},{truth.mean_displacement[1]},"
            f"{truth.shear_force[0]},{truth.shear_force[1]}")


# ---------------------------------------------------------------------------
# JSON (de)serialization for specs and schedules


def spec_to_dict(spec: DeformationSpec) -> dict:
    if spec.kind == "uniform_shear":
        return {"kind": spec.kind, "shear": list(spec.shear)}
    if spec.kind == "indentation":
        return {"kind": spec.kind, "center": list(spec.center),
                "radius": spec.radius, "amplitude": spec.amplitude}
    if spec.kind == "tilt_ramp":
        return {"kind": spec.kind, "shear": list(spec.shear),
                "ramp_axis": list(spec.ramp_axis),
                "ramp_fraction": spec.ramp_fraction}
    return {"kind": spec.kind,
            "children": [spec_to_dict(c) for c in spec.children]}


def _pair(obj, key, default=None) -> tuple[float, float]:
    val = obj.get(key, default)
    if (not isinstance(val, (list, tuple)) or len(val) != 2):
        raise SchemaError(f"{key} must be a 2-element list, got {val!r}")
    return float(val[0]), float(val[1])


def spec_from_dict(obj) -> DeformationSpec:
    if not isinstance(obj, dict):
        raise SchemaError(f"deformation spec must be an object, got {type(obj).__name__}")
    kind = obj.get("kind")
    try:
        if kind == "uniform_shear":
            return DeformationSpec(kind, shear=_pair(obj, "shear", (0.0, 0.0)))
        if kind == "indentation":
            return DeformationSpec(kind, center=_pair(obj, "center", (0.0, 0.0)),
                                   radius=float(obj.get("radius", 0.0)),
                                   amplitude=float(obj.get("amplitude", 0.0)))
        if kind == "tilt_ramp":
            return DeformationSpec(kind, shear=_pair(obj, "shear", (0.0, 0.0)),
                                   ramp_axis=_pair(obj, "ramp_axis", (0.0, 1.0)),
                                   ramp_fraction=float(obj.get("ramp_fraction", 0.0)))
        if kind == "composite":
            children = obj.get("children", [])
            if not isinstance(children, list):
                raise SchemaError("children must be a list")
            return DeformationSpec(kind, children=tuple(
                spec_from_dict(c) for c in children))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad deformation spec: {exc}") from exc
    raise SchemaError(f"unknown deformation kind {kind!r}")


def parse_schedule(obj) -> list[tuple[float, DeformationSpec]]:
    """Parses the `schedule` array of a simulation JSON document."""
    if not isinstance(obj, list):
        raise SchemaError("schedule must be a list")
    entries = []
    for item in obj:
        if not isinstance(item, dict) or "time_s" not in item or "spec" not in item:
            raise SchemaError(f"schedule entry needs time_s and spec: {item!r}")
        try:
            t = float(item["time_s"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad time_s {item['time_s']!r}") from exc
        entries.append((t, spec_from_dict(item["spec"])))
    return entries


def schedule_to_json(schedule: Iterable[tuple[float, DeformationSpec]]) -> str:
    return json.dumps({"schedule": [
        {"time_s": t, "spec": spec_to_dict(s)} for t, s in schedule
    ]}, indent=2)
