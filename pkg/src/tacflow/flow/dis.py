"""Dense inverse-search optical flow between marker frames.

Coarse-to-fine over a binomial pyramid; each level runs translation-only
inverse-compositional Gauss-Newton on a stride grid of patches, densifies
patch flows with residual-weighted averaging, and optionally applies
variational refinement. Displacement convention: I0(p) corresponds to
I1(p + flow(p)).
"""

import numpy as np

from ..errors import DimensionError
from .backend import get_kernels
from .core import (
    FlowField,
    FlowParams,
    build_pyramid,
    fill_border,
    grad2d,
    patch_grid,
    resize_flow,
)

# Variational energy constants, tuned once on the synthetic deformation suite
# and frozen (images normalized to [0, 1]).
VARIATIONAL_ALPHA = 4.0
VARIATIONAL_GAMMA = 0.6
VARIATIONAL_EPS_DATA = 0.005
VARIATIONAL_EPS_SMOOTH = 0.01
VARIATIONAL_SWEEPS = 4

DEFAULT_PARAMS = FlowParams()


def _dims_of(frame) -> tuple[int, int]:
    if hasattr(frame, "pixels"):
        return frame.pixels.shape
    return np.asarray(frame).shape


def dis_flow(prev, next_frame, params: FlowParams | None = None,
             init: FlowField | None = None, *, threads: int = 1,
             backend: str | None = None) -> FlowField:
    """Dense flow from `prev` to `next_frame`.

    `init` seeds the coarsest level (pass the previous result when tracking a
    stream against a fixed reference frame). `threads` bounds the compiled
    backend's parallelism; the NumPy backend ignores it.
    """
    params = params or DEFAULT_PARAMS
    shape0 = _dims_of(prev)
    shape1 = _dims_of(next_frame)
    if shape0 != shape1:
        raise DimensionError(f"frame dimensions differ: {shape0} vs {shape1}")
    height, width = shape0
    if init is not None and (init.width, init.height) != (width, height):
        raise DimensionError(
            f"init flow is {init.width}x{init.height}, frames are {width}x{height}"
        )
    kernels = get_kernels(backend)
    ps = params.patch_size

    pyr0 = build_pyramid(prev, params.pyramid_levels)
    pyr1 = build_pyramid(next_frame, params.pyramid_levels)

    u = v = None
    for level in range(params.pyramid_levels - 1, params.finest_level - 1, -1):
        i0 = pyr0[level]
        i1 = pyr1[level]
        lh, lw = i0.shape
        if u is None:
            if init is not None:
                u, v = resize_flow(
                    init.u[..., 0].astype(np.float32),
                    init.u[..., 1].astype(np.float32), lh, lw)
            else:
                u = np.zeros((lh, lw), dtype=np.float32)
                v = np.zeros((lh, lw), dtype=np.float32)
        else:
            u, v = resize_flow(u, v, lh, lw)

        xs, ys = patch_grid(lw, lh, ps, params.patch_stride)
        cx = np.clip(xs + ps // 2, 0, lw - 1)
        cy = np.clip(ys + ps // 2, 0, lh - 1)
        seed_u = u[cy][:, cx].reshape(-1)
        seed_v = v[cy][:, cx].reshape(-1)

        gx, gy = grad2d(i0)
        pu, pv, ssd = kernels.patch_solve(
            i0, i1, gx, gy, xs, ys, seed_u, seed_v, ps,
            params.max_iterations_per_patch, threads)
        u, v = kernels.densify(pu, pv, ssd, xs, ys, lw, lh, ps, threads)
        if params.border_fill:
            fill_border(u, v, ps)

        if params.variational_refinement and params.refinement_iterations > 0:
            u, v = kernels.variational_refine(
                i0 * np.float32(1.0 / 255.0), i1 * np.float32(1.0 / 255.0),
                u, v, params.refinement_iterations, VARIATIONAL_SWEEPS,
                VARIATIONAL_ALPHA, VARIATIONAL_GAMMA,
                VARIATIONAL_EPS_DATA, VARIATIONAL_EPS_SMOOTH, threads)

    if params.finest_level > 0:
        u, v = resize_flow(u, v, height, width)
    return FlowField(width, height, np.stack([u, v], axis=-1))
