"""Closed-loop fingertip alignment driven by estimated contact states.

Two simulated fingertips press on a target whose surfaces sit at known
angles. Misalignment shrinks the contact band on the membrane; each
observation renders the deformation on a marker frame, runs dense flow plus
the contact estimator, and the controller hill-climbs fingertip pitch on the
measured area before preloading and lifting. Lift success combines the
pitch-dependent payload limit with a minimum-contact gate.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .calibration import DEFAULT_SHEAR_MODEL, CalibrationModel
from .contact import ContactState, EstimatorParams, estimate
from .errors import SchemaError
from .flow import FlowParams, dis_flow
from .imaging import Frame, MarkerPattern, generate_marker_pattern
from .membrane import DeformationSpec, composite, indentation, render, tilt_ramp

PHASES = ("approach", "align", "preload", "lift", "hold", "released", "failed")

_PITCH_KEY_DECIMALS = 6
_AREA_IMPROVE_EPS = 1e-6


@dataclass(frozen=True)
class GraspScenario:
    """One grasping setup: true surface angles, start pitches, object weight."""

    surface_angle_left: float
    surface_angle_right: float
    initial_pitch_left: float
    initial_pitch_right: float
    object_weight: float
    contact_falloff_delta0: float = 15.0  # deg of misalignment to zero contact
    max_area: float = 0.9                 # contact fraction at perfect alignment
    preload: float = 5.0                  # N

    def __post_init__(self):
        for name in ("surface_angle_left", "surface_angle_right",
                     "initial_pitch_left", "initial_pitch_right"):
            angle = getattr(self, name)
            if not 0.0 <= angle <= 90.0:
                raise ValueError(f"{name}={angle} outside [0, 90] degrees")
        if self.object_weight < 0:
            raise ValueError("object_weight must be non-negative")
        if not self.contact_falloff_delta0 > 0:
            raise ValueError("contact_falloff_delta0 must be positive")
        if not 0.0 < self.max_area <= 1.0:
            raise ValueError("max_area must be in (0, 1]")


@dataclass(frozen=True)
class PayloadModel:
    """Pitch-to-maximum-load anchors with piecewise-linear interpolation."""

    anchors: tuple[tuple[float, float], ...] = ((30.0, 8.0), (45.0, 11.0), (60.0, 18.0))

    def __post_init__(self):
        pitches = [p for p, _ in self.anchors]
        loads = [l for _, l in self.anchors]
        if len(self.anchors) < 1:
            raise ValueError("need at least one anchor")
        if any(b <= a for a, b in zip(pitches, pitches[1:])):
            raise ValueError(f"anchor pitches must increase: {pitches}")
        if any(b < a for a, b in zip(loads, loads[1:])):
            raise ValueError(f"anchor loads must be non-decreasing: {loads}")


DEFAULT_PAYLOAD_MODEL = PayloadModel()


def payload_limit(model: PayloadModel, pitch: float) -> float:
    """Maximum liftable load at a fingertip pitch, clamped to the end anchors."""
    pitches = [p for p, _ in model.anchors]
    loads = [l for _, l in model.anchors]
    return float(np.interp(pitch, pitches, loads))


@dataclass(frozen=True)
class GraspRunParams:
    """Simulation constants for closed-loop runs.

    Grasp observations render at a reduced frame size so each servo probe
    costs a fraction of a full-resolution flow solve; the estimator ROI
    covers the whole grasp frame so the measured area tracks the contact
    band fraction one-to-one. `shear_scale_px` is the mean marker shear at
    full preload and `approach_fraction` the preload fraction applied while
    aligning.
    """

    seed: int = 0
    frame_size: int = 160
    roi_side: int = 160
    shear_scale_px: float = 7.0
    approach_fraction: float = 0.6
    bulge_amplitude: float = 0.0
    bulge_radius_fraction: float = 0.35
    align_step0: float = 8.0
    align_step_min: float = 1.0
    area_stop_fraction: float = 0.95
    min_lift_area: float = 0.1
    max_observations: int = 40
    observation_dt: float = 0.2
    noise_sigma: float = 0.0
    threads: int = 1
    flow_backend: str | None = None


DEFAULT_RUN_PARAMS = GraspRunParams()


def _finger_spec(delta_deg: float, *, delta0: float, max_area: float,
                 preload_fraction: float, frame_size: int, shear_scale: float,
                 bulge_amplitude: float, bulge_radius_fraction: float
                 ) -> DeformationSpec:
    """Deformation seen by one fingertip at misalignment `delta_deg`.

    The contact is a band at the top of the membrane whose extent shrinks
    linearly with misalignment; shear ramps across it along the gripping
    direction (+y), scaled by the applied preload fraction, and a gentle
    pressure bulge sits inside the band so contact reads as positive
    divergence even at light loads.
    """
    ramp_fraction = max(0.0, 1.0 - abs(delta_deg) / delta0) * max_area
    if ramp_fraction <= 0.0:
        return composite()
    shear = (0.0, shear_scale * preload_fraction)
    children = [tilt_ramp(shear, (0.0, 1.0), ramp_fraction)]
    band_height = ramp_fraction * frame_size - 0.5
    bulge_radius = bulge_radius_fraction * band_height
    if bulge_radius >= 4.0:
        cx = (frame_size - 1) / 2.0
        children.append(indentation((cx, band_height / 2.0), bulge_radius,
                                    bulge_amplitude))
    return composite(*children)


def scenario_observe(scenario: GraspScenario, pitch_left: float,
                     pitch_right: float, rng_seed: int = 0, *,
                     preload_fraction: float = 1.0,
                     params: GraspRunParams = DEFAULT_RUN_PARAMS
                     ) -> tuple[DeformationSpec, DeformationSpec]:
    """Deformation specs both fingertips would see at the given pitches.

    `rng_seed` is reserved for the optional render noise downstream; the
    spec geometry itself is deterministic in the pitches.
    """
    del rng_seed
    specs = []
    for pitch, surface in ((pitch_left, scenario.surface_angle_left),
                           (pitch_right, scenario.surface_angle_right)):
        specs.append(_finger_spec(
            pitch - surface,
            delta0=scenario.contact_falloff_delta0,
            max_area=scenario.max_area,
            preload_fraction=preload_fraction,
            frame_size=params.frame_size,
            shear_scale=params.shear_scale_px,
            bulge_amplitude=params.bulge_amplitude,
            bulge_radius_fraction=params.bulge_radius_fraction,
        ))
    return specs[0], specs[1]


def _best_measurement(history) -> tuple[float, float]:
    """Strictly best (pitch, area); ties keep the earliest measurement.

    Anchoring ties to the oldest sample keeps the probe window stable on
    zero-contact plateaus instead of drifting after each probe.
    """
    best_pitch, best_area = history[0]
    for pitch, area in history[1:]:
        if area > best_area:
            best_pitch, best_area = pitch, area
    return best_pitch, best_area


def align_step(current_pitch: float, history, step: float) -> float:
    """Hill-climbing move given (pitch, area) measurements.

    Probes the two neighbors at +/- step around the best-seen pitch. Returns
    an unmeasured neighbor to probe next, a measured neighbor that improves
    on the best area, or the best pitch itself when neither neighbor helps
    (the caller halves the step on that signal). Ties break toward the
    smaller pitch change from `current_pitch`.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if not history:
        return current_pitch
    measured: dict[float, float] = {}
    for pitch, area in history:
        key = round(pitch, _PITCH_KEY_DECIMALS)
        measured[key] = max(area, measured.get(key, -1.0))

    def dist(p):
        return abs(p - current_pitch)

    best_pitch, best_area = _best_measurement(
        [(round(p, _PITCH_KEY_DECIMALS), a) for p, a in history])
    candidates = [round(best_pitch + step, _PITCH_KEY_DECIMALS),
                  round(best_pitch - step, _PITCH_KEY_DECIMALS)]
    for cand in candidates:
        if cand not in measured:
            return cand
    improving = [c for c in candidates
                 if measured[c] > best_area + _AREA_IMPROVE_EPS]
    if improving:
        return max(improving, key=lambda c: (measured[c], -dist(c)))
    return best_pitch


@dataclass(frozen=True, eq=False)
class TraceRecord:
    """One observation or transition in a grasp run."""

    t: float
    finger: str   # "left" | "right" | "gripper"
    phase: str
    pitch: float
    contact: ContactState | None


@dataclass(eq=False)
class GraspTrace:
    """Complete time-stamped record of one closed-loop grasp."""

    scenario: GraspScenario
    records: list[TraceRecord] = field(default_factory=list)
    outcome: str = "failed"
    reason: str | None = None
    final_pitch: dict[str, float] = field(default_factory=dict)
    final_area: dict[str, float] = field(default_factory=dict)
    observations: dict[str, int] = field(default_factory=dict)


class _Fingertip:
    """Per-finger controller state during a grasp run."""

    def __init__(self, name: str, surface_angle: float, pitch: float, step: float):
        self.name = name
        self.surface_angle = surface_angle
        self.pitch = pitch
        self.step = step
        self.history: list[tuple[float, float]] = []
        self.cache: dict[float, float] = {}
        self.observations = 0
        self.done = False

    def seen(self, pitch: float) -> bool:
        return round(pitch, _PITCH_KEY_DECIMALS) in self.cache

    def record(self, pitch: float, area: float) -> None:
        key = round(pitch, _PITCH_KEY_DECIMALS)
        self.cache[key] = area
        self.history.append((pitch, area))

    def best(self) -> tuple[float, float]:
        return _best_measurement(self.history)


def run_grasp(scenario: GraspScenario,
              params: GraspRunParams = DEFAULT_RUN_PARAMS,
              payload: PayloadModel = DEFAULT_PAYLOAD_MODEL,
              model: CalibrationModel = DEFAULT_SHEAR_MODEL,
              flow_params: FlowParams | None = None) -> GraspTrace:
    """Runs approach, alignment, preload, and lift; returns the full trace.

    Every contact state in the trace is produced by rendering the membrane
    deformation and running the actual flow and contact estimators; the
    controller sees only those measurements.
    """
    # Border fill stays off so the contact band is measurable to the frame
    # edge, where the estimator ROI reaches.
    flow_params = flow_params or FlowParams(border_fill=False)
    est = EstimatorParams(roi_side=params.roi_side)
    trace = GraspTrace(scenario)
    clock = 0.0

    bases = {
        "left": generate_marker_pattern(MarkerPattern(
            params.seed, params.frame_size, params.frame_size)),
        "right": generate_marker_pattern(MarkerPattern(
            params.seed + 1, params.frame_size, params.frame_size)),
    }
    fingers = {
        "left": _Fingertip("left", scenario.surface_angle_left,
                           scenario.initial_pitch_left, params.align_step0),
        "right": _Fingertip("right", scenario.surface_angle_right,
                            scenario.initial_pitch_right, params.align_step0),
    }

    def observe(finger: _Fingertip, pitch: float, phase: str,
                preload_fraction: float) -> ContactState:
        nonlocal clock
        spec = _finger_spec(
            pitch - finger.surface_angle,
            delta0=scenario.contact_falloff_delta0,
            max_area=scenario.max_area,
            preload_fraction=preload_fraction,
            frame_size=params.frame_size,
            shear_scale=params.shear_scale_px,
            bulge_amplitude=params.bulge_amplitude,
            bulge_radius_fraction=params.bulge_radius_fraction,
        )
        noise_seed = (params.seed * 1009 + finger.observations * 31
                      + (0 if finger.name == "left" else 7))
        deformed = render(bases[finger.name], spec,
                          noise_sigma=params.noise_sigma,
                          noise_seed=noise_seed, timestamp=clock)
        flow = dis_flow(bases[finger.name], deformed, flow_params,
                        threads=params.threads, backend=params.flow_backend)
        state = estimate(flow, est, model, timestamp=clock)
        finger.observations += 1
        finger.pitch = pitch
        finger.record(pitch, state.area_fraction)
        trace.records.append(TraceRecord(clock, finger.name, phase, pitch, state))
        clock += params.observation_dt
        return state

    # approach: first contact at the commanded initial pitches
    for finger in fingers.values():
        observe(finger, finger.pitch, "approach", params.approach_fraction)

    # align: independent hill climbing on measured contact area
    area_stop = params.area_stop_fraction * scenario.max_area
    while not all(f.done for f in fingers.values()):
        progressed = False
        for finger in fingers.values():
            if finger.done:
                continue
            best_pitch, best_area = finger.best()
            if (best_area >= area_stop
                    or finger.observations >= params.max_observations):
                finger.done = True
                finger.pitch = best_pitch
                continue
            nxt = align_step(finger.pitch, finger.history, finger.step)
            if abs(nxt - best_pitch) < 10.0**-_PITCH_KEY_DECIMALS:
                finger.pitch = best_pitch
                finger.step *= 0.5
                if finger.step < params.align_step_min:
                    finger.done = True
                progressed = True
            elif not finger.seen(nxt):
                observe(finger, nxt, "align", params.approach_fraction)
                progressed = True
            else:
                finger.pitch = nxt  # measured improving neighbor becomes current
                progressed = True
        if not progressed:
            break

    # preload: full grip force at the aligned pitches
    preload_states = {}
    for finger in fingers.values():
        finger.pitch = finger.best()[0]
        preload_states[finger.name] = observe(finger, finger.pitch, "preload", 1.0)

    # lift: payload anchors plus a minimum-contact gate
    limit = min(payload_limit(payload, fingers["left"].pitch),
                payload_limit(payload, fingers["right"].pitch))
    areas = {name: s.area_fraction for name, s in preload_states.items()}
    if limit < scenario.object_weight:
        trace.outcome, trace.reason = "failed", "payload_exceeded"
    elif min(areas.values()) < params.min_lift_area:
        trace.outcome, trace.reason = "failed", "insufficient_contact"
    else:
        trace.outcome, trace.reason = "hold", None
    final_phase = "hold" if trace.outcome == "hold" else "failed"
    trace.records.append(TraceRecord(clock, "gripper", "lift", 0.0, None))
    trace.records.append(TraceRecord(clock + params.observation_dt, "gripper",
                                     final_phase, 0.0, None))

    trace.final_pitch = {n: f.pitch for n, f in fingers.items()}
    trace.final_area = areas
    trace.observations = {n: f.observations for n, f in fingers.items()}
    return trace


# ---------------------------------------------------------------------------
# Trace export


def trace_to_jsonl(trace: GraspTrace) -> str:
    """One JSON object per line: every record, then a summary line."""
    lines = []
    for rec in trace.records:
        obj = {"t_s": rec.t, "finger": rec.finger, "phase": rec.phase,
               "pitch_deg": rec.pitch}
        if rec.contact is not None:
            obj.update({
                "area_fraction": rec.contact.area_fraction,
                "mean_dx_px": float(rec.contact.mean_displacement[0]),
                "mean_dy_px": float(rec.contact.mean_displacement[1]),
                "force_x_N": float(rec.contact.shear_force[0]),
                "force_y_N": float(rec.contact.shear_force[1]),
            })
        lines.append(json.dumps(obj))
    lines.append(json.dumps({
        "summary": True, "outcome": trace.outcome, "reason": trace.reason,
        "final_pitch": trace.final_pitch, "final_area": trace.final_area,
        "observations": trace.observations,
    }))
    return "\n".join(lines) + "\n"


TRACE_CSV_HEADER = ("event,t_s,pitch_left_deg,pitch_right_deg,"
                    "area_left,area_right,outcome")


def trace_summary_rows(trace: GraspTrace) -> list[str]:
    """Phase-transition rows plus a final outcome row."""
    rows = [TRACE_CSV_HEADER]
    latest = {"left": (float("nan"), float("nan")),
              "right": (float("nan"), float("nan"))}
    prev_phase = None
    for rec in trace.records:
        if rec.contact is not None:
            latest[rec.finger] = (rec.pitch, rec.contact.area_fraction)
        if rec.phase != prev_phase:
            rows.append(
                f"{rec.phase},{rec.t},{latest['left'][0]},{latest['right'][0]},"
                f"{latest['left'][1]},{latest['right'][1]},"
            )
            prev_phase = rec.phase
    rows.append(
        f"final,{trace.records[-1].t if trace.records else 0.0},"
        f"{trace.final_pitch.get('left', float('nan'))},"
        f"{trace.final_pitch.get('right', float('nan'))},"
        f"{trace.final_area.get('left', float('nan'))},"
        f"{trace.final_area.get('right', float('nan'))},{trace.outcome}"
    )
    return rows


def scenario_from_json(text: str) -> tuple[GraspScenario, GraspRunParams]:
    """Parses a scenario JSON document, with optional run-parameter overrides."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"bad scenario JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("scenario JSON must be an object")
    required = ("surface_angle_left", "surface_angle_right",
                "initial_pitch_left", "initial_pitch_right", "object_weight")
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"scenario missing fields: {missing}")
    try:
        scenario = GraspScenario(
            **{k: float(obj[k]) for k in required},
            **{k: float(obj[k]) for k in
               ("contact_falloff_delta0", "max_area", "preload") if k in obj},
        )
        run = obj.get("run", {})
        if not isinstance(run, dict):
            raise SchemaError("run must be an object")
        valid = {f for f in GraspRunParams.__dataclass_fields__}
        unknown = set(run) - valid
        if unknown:
            raise SchemaError(f"unknown run parameters: {sorted(unknown)}")
        params = GraspRunParams(**run)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad scenario: {exc}") from exc
    return scenario, params
