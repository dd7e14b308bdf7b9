"""Signal-level writing features over strokes, gaps and whole sessions.

The catalog is explicit and ordered: every feature has a stable id, a
level (stroke / gap / document) and a unit, so exported matrices are
fixed-width and machine-checkable. Degenerate strokes (single sample,
or too short for tremor analysis) report zeros rather than missing
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_ENGINE, EngineConfig
from .model import InAirGap, InkSession, ResampledPath, Stroke, resample_uniform

LEVEL_STROKE = "stroke"
LEVEL_GAP = "gap"
LEVEL_DOCUMENT = "document"


@dataclass(frozen=True)
class FeatureDescriptor:
    id: str
    level: str
    unit: str
    description: str


@dataclass(frozen=True)
class FeatureVector:
    session_id: str
    level: str
    index: int
    values: dict[str, float]


_STROKE_FEATURES: list[tuple[str, str, str]] = [
    ("duration_s", "s", "pen-down time of the stroke"),
    ("path_length_mm", "mm", "arc length of the drawn polyline"),
    ("displacement_mm", "mm", "distance between first and last sample"),
    ("straightness", "ratio", "displacement over path length, in [0, 1]"),
    ("mean_pressure", "norm", "mean normalized pen force"),
    ("max_pressure", "norm", "peak normalized pen force"),
    ("min_pressure", "norm", "minimum normalized pen force"),
    ("std_pressure", "norm", "population std of pen force"),
    ("mean_speed_mm_s", "mm/s", "mean point speed (central differences)"),
    ("max_speed_mm_s", "mm/s", "peak point speed"),
    ("mean_abs_accel_mm_s2", "mm/s^2", "mean acceleration magnitude"),
    ("max_abs_accel_mm_s2", "mm/s^2", "peak acceleration magnitude"),
    ("mean_abs_jerk_mm_s3", "mm/s^3", "mean jerk magnitude"),
    ("direction_change_count", "count", "sign flips of significant turning"),
    ("mean_curvature_per_mm", "1/mm", "mean |turning angle| per arc length"),
    ("max_curvature_per_mm", "1/mm", "peak |turning angle| per arc length"),
    ("tremor_index_mm", "mm", "RMS deviation from the smoothed path"),
    ("tremor_dominant_freq_hz", "Hz", "zero-crossing rate of the tremor residual"),
    ("sample_count", "count", "number of raw samples"),
    ("bbox_width_mm", "mm", "bounding-box width"),
    ("bbox_height_mm", "mm", "bounding-box height"),
]

_GAP_FEATURES: list[tuple[str, str, str]] = [
    ("gap_duration_s", "s", "in-air time between strokes"),
    ("is_pause", "flag", "1 when the gap exceeds the pause threshold"),
]

_DOCUMENT_FEATURES: list[tuple[str, str, str]] = [
    ("total_on_paper_s", "s", "sum of stroke durations"),
    ("total_in_air_s", "s", "sum of in-air gap durations"),
    ("pause_count", "count", "gaps longer than the pause threshold"),
    ("stroke_count", "count", "number of strokes"),
    ("total_path_mm", "mm", "sum of stroke path lengths"),
    ("session_span_s", "s", "first sample to last sample"),
]


def feature_catalog() -> list[FeatureDescriptor]:
    """The ordered, deterministic list of every registered feature."""
    catalog = [FeatureDescriptor(fid, LEVEL_STROKE, unit, desc)
               for fid, unit, desc in _STROKE_FEATURES]
    catalog += [FeatureDescriptor(fid, LEVEL_GAP, unit, desc)
                for fid, unit, desc in _GAP_FEATURES]
    catalog += [FeatureDescriptor(fid, LEVEL_DOCUMENT, unit, desc)
                for fid, unit, desc in _DOCUMENT_FEATURES]
    for fid, unit, _ in _STROKE_FEATURES:
        catalog.append(FeatureDescriptor(
            f"stroke_mean_{fid}", LEVEL_DOCUMENT, unit,
            f"mean of {fid} over strokes"))
        catalog.append(FeatureDescriptor(
            f"stroke_std_{fid}", LEVEL_DOCUMENT, unit,
            f"population std of {fid} over strokes"))
    return catalog


def catalog_ids(level: str | None = None) -> list[str]:
    return [d.id for d in feature_catalog() if level is None or d.level == level]


# ---------------------------------------------------------------------------
# kinematics helpers

def _derivative(values: np.ndarray, t_s: np.ndarray) -> np.ndarray:
    """Central finite differences with one-sided endpoints.

    values is (n,) or (n, d); t_s strictly increasing seconds.
    """
    n = len(t_s)
    out = np.zeros_like(values, dtype=np.float64)
    if n < 2:
        return out
    out[0] = (values[1] - values[0]) / (t_s[1] - t_s[0])
    out[-1] = (values[-1] - values[-2]) / (t_s[-1] - t_s[-2])
    if n > 2:
        dt = (t_s[2:] - t_s[:-2])
        if values.ndim == 2:
            dt = dt[:, None]
        out[1:-1] = (values[2:] - values[:-2]) / dt
    return out


def _turning_angles(xy: np.ndarray) -> np.ndarray:
    """Signed direction change at each interior vertex, radians."""
    if len(xy) < 3:
        return np.zeros(0)
    d = np.diff(xy, axis=0)
    ang = np.arctan2(d[:, 1], d[:, 0])
    turn = np.diff(ang)
    # wrap to (-pi, pi]
    turn = (turn + np.pi) % (2 * np.pi) - np.pi
    return turn


def _moving_average(xy: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with symmetrically shrunk end windows.

    The radius at index i is min(window // 2, i, n-1-i), which keeps the
    endpoints anchored to the raw path. Windows are summed directly
    (not via a running cumsum) so shrunk windows stay exact.
    """
    n = len(xy)
    half = window // 2
    out = np.empty_like(xy)
    if n > 2 * half:
        kernel = np.full(window, 1.0 / window)
        for axis in range(xy.shape[1]):
            out[half:n - half, axis] = np.convolve(xy[:, axis], kernel, "valid")
    for i in range(min(half, n)):
        r = min(i, n - 1 - i)
        out[i] = xy[i - r:i + r + 1].mean(axis=0)
    for i in range(max(n - half, 0), n):
        r = min(i, n - 1 - i)
        out[i] = xy[i - r:i + r + 1].mean(axis=0)
    return out


def tremor_index(stroke: Stroke,
                 config: EngineConfig = DEFAULT_ENGINE) -> tuple[float, float]:
    """(rms_mm, dominant_freq_hz) of the stroke's high-frequency wobble.

    RMS perpendicular deviation of the uniformly resampled path from its
    moving-average smoothed version; the dominant frequency is the
    zero-crossing count of the signed residual over twice the stroke
    duration. Strokes shorter than the guard path length return (0, 0).
    """
    if stroke.path_length() <= config.tremor_min_path_mm:
        return 0.0, 0.0
    rp = resample_uniform(stroke, config.resample_spacing_mm)
    residual = _signed_residual(rp, config.smooth_window)
    rms = float(np.sqrt(np.mean(residual ** 2)))
    duration_s = stroke.duration_us / 1e6
    if duration_s <= 0:
        return rms, 0.0
    crossings = _zero_crossings(residual)
    return rms, crossings / (2.0 * duration_s)


def _signed_residual(rp: ResampledPath, window: int) -> np.ndarray:
    smooth = _moving_average(rp.xy, window)
    tangent = np.empty_like(smooth)
    tangent[1:-1] = smooth[2:] - smooth[:-2]
    tangent[0] = smooth[min(1, len(smooth) - 1)] - smooth[0]
    tangent[-1] = smooth[-1] - smooth[max(len(smooth) - 2, 0)]
    norm = np.hypot(tangent[:, 0], tangent[:, 1])
    norm[norm == 0] = 1.0
    # left normal of the smoothed direction
    nx = -tangent[:, 1] / norm
    ny = tangent[:, 0] / norm
    dev = rp.xy - smooth
    return dev[:, 0] * nx + dev[:, 1] * ny


def _zero_crossings(signal: np.ndarray, dead_band: float = 1e-9) -> int:
    """Sign changes of the signal, ignoring sub-nanometer noise."""
    signs = np.where(signal > dead_band, 1, np.where(signal < -dead_band, -1, 0))
    nz = signs[signs != 0]
    if len(nz) < 2:
        return 0
    return int(np.sum(nz[1:] != nz[:-1]))


# ---------------------------------------------------------------------------
# per-scope feature vectors

def stroke_features(stroke: Stroke, session_id: str = "",
                    config: EngineConfig = DEFAULT_ENGINE) -> FeatureVector:
    xy = stroke.xy()
    t_s = stroke.t_us().astype(np.float64) / 1e6
    pressures = stroke.pressures()
    n = len(xy)

    path = stroke.path_length()
    disp = stroke.displacement()
    straightness = 1.0 if path == 0.0 else min(1.0, disp / path)

    if n >= 2:
        vel = _derivative(xy, t_s)
        speed = np.hypot(vel[:, 0], vel[:, 1])
        acc = _derivative(vel, t_s)
        acc_mag = np.hypot(acc[:, 0], acc[:, 1])
        jerk = _derivative(acc, t_s)
        jerk_mag = np.hypot(jerk[:, 0], jerk[:, 1])
        mean_speed, max_speed = float(np.mean(speed)), float(np.max(speed))
        mean_acc, max_acc = float(np.mean(acc_mag)), float(np.max(acc_mag))
        mean_jerk = float(np.mean(jerk_mag))
    else:
        mean_speed = max_speed = mean_acc = max_acc = mean_jerk = 0.0

    mean_curv = max_curv = 0.0
    dir_changes = 0
    if path > 0:
        rp = resample_uniform(stroke, config.resample_spacing_mm)
        turn = _turning_angles(rp.xy)
        if len(turn):
            arc = (rp.s[2:] - rp.s[:-2]) / 2.0
            arc[arc == 0] = 1.0
            curv = np.abs(turn) / arc
            mean_curv, max_curv = float(np.mean(curv)), float(np.max(curv))
            threshold = math.radians(config.direction_change_angle_deg)
            significant = [a for a in turn if abs(a) >= threshold]
            dir_changes = sum(
                1 for a, b in zip(significant, significant[1:])
                if (a > 0) != (b > 0))

    tremor_rms, tremor_freq = tremor_index(stroke, config)
    box = stroke.bbox()

    values = {
        "duration_s": stroke.duration_us / 1e6,
        "path_length_mm": path,
        "displacement_mm": disp,
        "straightness": straightness,
        "mean_pressure": float(np.mean(pressures)),
        "max_pressure": float(np.max(pressures)),
        "min_pressure": float(np.min(pressures)),
        "std_pressure": float(np.std(pressures)),
        "mean_speed_mm_s": mean_speed,
        "max_speed_mm_s": max_speed,
        "mean_abs_accel_mm_s2": mean_acc,
        "max_abs_accel_mm_s2": max_acc,
        "mean_abs_jerk_mm_s3": mean_jerk,
        "direction_change_count": float(dir_changes),
        "mean_curvature_per_mm": mean_curv,
        "max_curvature_per_mm": max_curv,
        "tremor_index_mm": tremor_rms,
        "tremor_dominant_freq_hz": tremor_freq,
        "sample_count": float(n),
        "bbox_width_mm": box.width,
        "bbox_height_mm": box.height,
    }
    return FeatureVector(session_id, LEVEL_STROKE, stroke.index, values)


def gap_features(gap: InAirGap, index: int, session_id: str = "",
                 config: EngineConfig = DEFAULT_ENGINE) -> FeatureVector:
    duration = gap.duration_us / 1e6
    values = {
        "gap_duration_s": duration,
        "is_pause": 1.0 if duration > config.pause_threshold_s else 0.0,
    }
    return FeatureVector(session_id, LEVEL_GAP, index, values)


def document_values(stroke_values: list[dict[str, float]],
                    gap_values: list[dict[str, float]],
                    on_paper_us: int, in_air_us: int,
                    span_us: int) -> dict[str, float]:
    """Document-level aggregates from already-computed scope vectors.

    Pure function of its arguments so the streaming pipeline and batch
    computation produce bit-identical results.
    """
    values = {
        "total_on_paper_s": on_paper_us / 1e6,
        "total_in_air_s": in_air_us / 1e6,
        "pause_count": float(sum(v["is_pause"] for v in gap_values)),
        "stroke_count": float(len(stroke_values)),
        "total_path_mm": float(sum(v["path_length_mm"] for v in stroke_values)),
        "session_span_s": span_us / 1e6,
    }
    for fid, _, _ in _STROKE_FEATURES:
        if stroke_values:
            col = np.array([v[fid] for v in stroke_values])
            values[f"stroke_mean_{fid}"] = float(np.mean(col))
            values[f"stroke_std_{fid}"] = float(np.std(col))
        else:
            values[f"stroke_mean_{fid}"] = 0.0
            values[f"stroke_std_{fid}"] = 0.0
    return values


def session_features(
    session: InkSession, config: EngineConfig = DEFAULT_ENGINE,
) -> tuple[FeatureVector, list[FeatureVector], list[FeatureVector]]:
    """(document vector, per-stroke vectors, per-gap vectors)."""
    stroke_vecs = [stroke_features(st, session.session_id, config)
                   for st in session.strokes]
    gap_vecs = [gap_features(g, i, session.session_id, config)
                for i, g in enumerate(session.gaps)]
    on_us = sum(st.duration_us for st in session.strokes)
    air_us = sum(g.duration_us for g in session.gaps)
    doc = FeatureVector(
        session.session_id, LEVEL_DOCUMENT, 0,
        document_values([v.values for v in stroke_vecs],
                        [v.values for v in gap_vecs],
                        on_us, air_us, session.span_us))
    return doc, stroke_vecs, gap_vecs


# ---------------------------------------------------------------------------
# feature matrix export

def vectors_to_csv(vectors: list[FeatureVector]) -> str:
    ids = catalog_ids()
    lines = [",".join(["session_id", "level", "index"] + ids)]
    for vec in vectors:
        cells = [vec.session_id, vec.level, str(vec.index)]
        cells += [repr(vec.values[fid]) if fid in vec.values else ""
                  for fid in ids]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def vectors_to_json(vectors: list[FeatureVector]) -> list[dict]:
    return [
        {"session_id": v.session_id, "level": v.level, "index": v.index,
         "values": v.values}
        for v in vectors
    ]
