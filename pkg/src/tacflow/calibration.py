"""Shear-force calibration: forward cubic map, log synchronization, fitting.

The force map is a zero-intercept cubic tau(x) = c1*x + c2*x^2 + c3*x^3
converting mean marker displacement (pixels) into tangential force (newtons).
The default coefficients reproduce the reference sensor calibration.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import FitError, SchemaError, SyncError


@dataclass(frozen=True)
class CalibrationModel:
    """Cubic displacement-to-force map with no constant term (tau(0) = 0)."""

    c1: float  # N / px
    c2: float  # N / px^2
    c3: float  # N / px^3

    def __post_init__(self):
        for name in ("c1", "c2", "c3"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite coefficient {name}")


#: Reference calibration of the physical sensor this pipeline models.
DEFAULT_SHEAR_MODEL = CalibrationModel(1.966, -0.1033, 0.005353)


def evaluate(model: CalibrationModel, x):
    """tau(x) = c1*x + c2*x^2 + c3*x^3, elementwise over arrays."""
    x = np.asarray(x, dtype=np.float64)
    out = x * (model.c1 + x * (model.c2 + x * model.c3))
    return float(out) if out.ndim == 0 else out


def force_from_displacement(model: CalibrationModel, mean_disp) -> np.ndarray:
    """Force vector: magnitude tau(|d|) along the unit displacement direction.

    Displacements below 1e-6 px map to a zero vector.
    """
    d = np.asarray(mean_disp, dtype=np.float64).reshape(2)
    m = float(np.hypot(d[0], d[1]))
    if m < 1e-6:
        return np.zeros(2)
    return evaluate(model, m) * (d / m)


@dataclass(frozen=True)
class TimedSeries:
    """Strictly time-ordered scalar samples with a nominal rate hint."""

    t: np.ndarray
    values: np.ndarray
    rate_hint: float | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError(f"t and values must be equal-length 1-D, got {t.shape} vs {v.shape}")
        if t.size == 0:
            raise ValueError("empty series")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("non-finite samples")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)


class SyncResult(NamedTuple):
    pairs: np.ndarray  # (n, 2) columns: displacement px, force N
    dropped: int       # displacement samples outside the force span


def resample_sync(force: TimedSeries, disp: TimedSeries) -> SyncResult:
    """Pairs each displacement sample with force linearly interpolated at its time.

    Intended for a high-rate force log (e.g. 125 Hz) against a low-rate
    displacement log (e.g. 25 Hz). Displacement samples outside the force
    span are dropped and counted.
    """
    lo, hi = force.t[0], force.t[-1]
    keep = (disp.t >= lo) & (disp.t <= hi)
    if not keep.any():
        raise SyncError(
            f"no overlap: displacement span [{disp.t[0]}, {disp.t[-1]}] vs "
            f"force span [{lo}, {hi}]"
        )
    f_at = np.interp(disp.t[keep], force.t, force.values)
    pairs = np.column_stack([disp.values[keep], f_at])
    return SyncResult(pairs, int((~keep).sum()))


def fit_cubic_origin(pairs) -> tuple[CalibrationModel, float]:
    """Least-squares fit of tau over the basis {x, x^2, x^3} and its R^2.

    Columns are norm-scaled before solving to keep the normal equations well
    conditioned across the wide x dynamic range. R^2 is 1 - SS_res / SS_tot
    with SS_tot about the mean force; when SS_tot is zero the fit reports 1.0
    for a zero residual and 0.0 otherwise.
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"pairs must be (n, 2), got {arr.shape}")
    x, f = arr[:, 0], arr[:, 1]
    if arr.shape[0] < 3 or np.unique(x).size < 3:
        raise FitError(
            f"rank deficient: need at least 3 distinct displacements, "
            f"got {np.unique(x).size}"
        )
    basis = np.stack([x, x**2, x**3], axis=1)
    norms = np.linalg.norm(basis, axis=0)
    norms[norms == 0.0] = 1.0
    coef, _, rank, _ = np.linalg.lstsq(basis / norms, f, rcond=None)
    if rank < 3:
        raise FitError("rank deficient: displacement basis is singular")
    coef = np.asarray(coef / norms, dtype=float)
    resid = f - basis @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((f - f.mean()) ** 2))
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-12 * max(1.0, float(f @ f)) else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return CalibrationModel(float(coef[0]), float(coef[1]), float(coef[2])), r2


def read_series_csv(path, *, rate_hint: float | None = None) -> TimedSeries:
    """Loads a `t_s,value` CSV (header optional) into a TimedSeries."""
    rows = []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SchemaError(f"{path}:{i + 1}: expected two columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if i == 0:  # header row
                continue
            raise SchemaError(f"{path}:{i + 1}: non-numeric row {line!r}") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    arr = np.asarray(rows)
    try:
        return TimedSeries(arr[:, 0], arr[:, 1], rate_hint)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def model_to_json(model: CalibrationModel, *, r_squared: float | None = None,
                  n_pairs: int | None = None) -> str:
    out: dict = {"c1": model.c1, "c2": model.c2, "c3": model.c3}
    if r_squared is not None:
        out["r_squared"] = r_squared
    if n_pairs is not None:
        out["n_pairs"] = n_pairs
    return json.dumps(out)


def model_from_json(text: str) -> CalibrationModel:
    try:
        obj = json.loads(text)
        return CalibrationModel(float(obj["c1"]), float(obj["c2"]), float(obj["c3"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad calibration model JSON: {exc}") from exc
