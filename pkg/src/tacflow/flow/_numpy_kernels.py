"""Pure-NumPy flow kernels, the fallback when the compiled module is absent.

The three entry points (patch_solve, densify, variational_refine) mirror the
signatures of tacflow._native; `threads` is accepted for interface parity but
NumPy's own threading applies.
"""

import numpy as np

from .core import bilinear_sample, grad2d

_MIN_HESSIAN_DET = 1e-6
_STEP_EPS = 0.01   # px; Gauss-Newton stops below this accepted step
_MAX_HALVINGS = 4
_SSD_FLOOR = 1.0   # densification weight floor


def _windows(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, ps: int) -> np.ndarray:
    """Gathers (n_patches, ps*ps) windows at top-left grid positions."""
    view = np.lib.stride_tricks.sliding_window_view(img, (ps, ps))
    w = view[np.repeat(ys, len(xs)), np.tile(xs, len(ys))]
    return w.reshape(-1, ps * ps)


def patch_solve(i0, i1, gx, gy, xs, ys, seed_u, seed_v, ps, max_iters, threads=1):
    """Inverse-compositional translation estimate per patch.

    Gauss-Newton with a halving line search (max 4 halvings) on the SSD;
    patches with a near-singular Hessian keep their seed flow. Returns the
    per-patch flow components and the final SSD residual.
    """
    h, w = i0.shape
    n = len(xs) * len(ys)
    t = _windows(i0, xs, ys, ps)
    tgx = _windows(gx, xs, ys, ps)
    tgy = _windows(gy, xs, ys, ps)

    h11 = np.einsum("ij,ij->i", tgx, tgx)
    h12 = np.einsum("ij,ij->i", tgx, tgy)
    h22 = np.einsum("ij,ij->i", tgy, tgy)
    det = h11 * h22 - h12 * h12
    solvable = det >= _MIN_HESSIAN_DET

    off = np.arange(ps, dtype=np.float32)
    bx = (xs[None, :, None, None] + off[None, None, None, :]).astype(np.float32)
    by = (ys[:, None, None, None] + off[None, None, :, None]).astype(np.float32)
    bx = np.broadcast_to(bx, (len(ys), len(xs), ps, ps)).reshape(n, ps * ps)
    by = np.broadcast_to(by, (len(ys), len(xs), ps, ps)).reshape(n, ps * ps)

    u = seed_u.astype(np.float32).copy()
    v = seed_v.astype(np.float32).copy()

    def residuals(idx, uu, vv):
        s = bilinear_sample(i1, bx[idx] + uu[:, None], by[idx] + vv[:, None])
        r = s - t[idx]
        ssd = np.einsum("ij,ij->i", r, r)
        b1 = np.einsum("ij,ij->i", tgx[idx], r)
        b2 = np.einsum("ij,ij->i", tgy[idx], r)
        return ssd, b1, b2

    all_idx = np.arange(n)
    ssd = np.empty(n, dtype=np.float64)
    b1 = np.empty(n, dtype=np.float64)
    b2 = np.empty(n, dtype=np.float64)
    ssd[:], b1[:], b2[:] = residuals(all_idx, u, v)

    active = solvable.copy()
    for _ in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        inv_det = 1.0 / det[idx]
        du = (h22[idx] * b1[idx] - h12[idx] * b2[idx]) * inv_det
        dv = (h11[idx] * b2[idx] - h12[idx] * b1[idx]) * inv_det
        accepted = np.zeros(idx.size, dtype=bool)
        step_norm = np.zeros(idx.size)
        for _ in range(_MAX_HALVINGS + 1):
            trial = np.flatnonzero(~accepted)
            if trial.size == 0:
                break
            tid = idx[trial]
            tu = u[tid] - du[trial].astype(np.float32)
            tv = v[tid] - dv[trial].astype(np.float32)
            ts, tb1, tb2 = residuals(tid, tu, tv)
            better = ts < ssd[tid]
            good = tid[better]
            u[good] = tu[better]
            v[good] = tv[better]
            ssd[good] = ts[better]
            b1[good] = tb1[better]
            b2[good] = tb2[better]
            step_norm[trial[better]] = np.hypot(du[trial[better]], dv[trial[better]])
            accepted[trial[better]] = True
            du[trial[~better]] *= 0.5
            dv[trial[~better]] *= 0.5
        keep = accepted & (step_norm >= _STEP_EPS)
        active[idx] = keep
    return u, v, ssd.astype(np.float64)


def densify(pu, pv, ssd, xs, ys, width, height, ps, threads=1):
    """Weighted average of overlapping patch flows at every covered pixel.

    Weights are 1 / max(ssd, 1); the constant-over-rectangle sums are done
    with a 2-D difference array and cumulative sums.
    """
    nx = len(xs)
    weights = 1.0 / np.maximum(ssd, _SSD_FLOOR)
    acc = np.zeros((3, height + 1, width + 1), dtype=np.float64)
    px = np.tile(xs, len(ys)).astype(np.intp)
    py = np.repeat(ys, nx).astype(np.intp)
    vals = np.stack([weights, weights * pu, weights * pv])
    for c in range(3):
        np.add.at(acc[c], (py, px), vals[c])
        np.add.at(acc[c], (py, px + ps), -vals[c])
        np.add.at(acc[c], (py + ps, px), -vals[c])
        np.add.at(acc[c], (py + ps, px + ps), vals[c])
    acc = acc.cumsum(axis=1).cumsum(axis=2)[:, :height, :width]
    wsum = acc[0]
    u = (acc[1] / wsum).astype(np.float32)
    v = (acc[2] / wsum).astype(np.float32)
    return u, v


def _warp(img, u, v):
    h, w = img.shape
    gy, gx = np.mgrid[0:h, 0:w]
    return bilinear_sample(img, gx + u, gy + v).astype(np.float32)


def variational_refine(i0, i1, u, v, iters, sweeps, alpha, gamma, eps_d, eps_s,
                       threads=1):
    """Fixed-point refinement of a brightness + gradient constancy energy.

    Each outer iteration warps the second image by the current flow,
    linearizes the robustified data terms, and runs `sweeps` Jacobi updates
    of the coupled increment system under TV smoothness on the total flow.
    Images are expected normalized to [0, 1].
    """
    u = u.astype(np.float32).copy()
    v = v.astype(np.float32).copy()
    g0x, g0y = grad2d(i0)
    for _ in range(iters):
        i1w = _warp(i1, u, v)
        g1x, g1y = grad2d(i1w)
        ix = 0.5 * (g0x + g1x)
        iy = 0.5 * (g0y + g1y)
        iz = i1w - i0
        ixx, ixy_a = grad2d(g1x)
        ixy_b, iyy = grad2d(g1y)
        ixy = 0.5 * (ixy_a + ixy_b)
        gxz = g1x - g0x
        gyz = g1y - g0y

        du = np.zeros_like(u)
        dv = np.zeros_like(v)
        for _ in range(sweeps):
            wd = 1.0 / np.sqrt((iz + ix * du + iy * dv) ** 2 + eps_d**2)
            rg1 = gxz + ixx * du + ixy * dv
            rg2 = gyz + ixy * du + iyy * dv
            wg = gamma / np.sqrt(rg1**2 + rg2**2 + eps_d**2)
            a11 = wd * ix * ix + wg * (ixx * ixx + ixy * ixy)
            a12 = wd * ix * iy + wg * (ixx * ixy + ixy * iyy)
            a22 = wd * iy * iy + wg * (ixy * ixy + iyy * iyy)
            b1 = -(wd * ix * iz + wg * (ixx * gxz + ixy * gyz))
            b2 = -(wd * iy * iz + wg * (ixy * gxz + iyy * gyz))

            ut = u + du
            vt = v + dv
            gux, guy = grad2d(ut)
            gvx, gvy = grad2d(vt)
            ws = alpha / np.sqrt(gux**2 + guy**2 + gvx**2 + gvy**2 + eps_s**2)

            wsum = np.zeros_like(ws)
            su = np.zeros_like(ws)
            sv = np.zeros_like(ws)
            for (src, dst) in (
                (np.s_[1:, :], np.s_[:-1, :]),   # neighbor below
                (np.s_[:-1, :], np.s_[1:, :]),   # neighbor above
                (np.s_[:, 1:], np.s_[:, :-1]),   # neighbor right
                (np.s_[:, :-1], np.s_[:, 1:]),   # neighbor left
            ):
                we = 0.5 * (ws[src] + ws[dst])
                wsum[dst] += we
                su[dst] += we * ut[src]
                sv[dst] += we * vt[src]

            rhs1 = b1 + su - wsum * u
            rhs2 = b2 + sv - wsum * v
            m11 = a11 + wsum
            m22 = a22 + wsum
            det = m11 * m22 - a12 * a12
            du = ((m22 * rhs1 - a12 * rhs2) / det).astype(np.float32)
            dv = ((m11 * rhs2 - a12 * rhs1) / det).astype(np.float32)
        u += du
        v += dv
    return u, v
