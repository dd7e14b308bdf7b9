"""Stroke grouping and data-free geometric shape classification.

Every classification decision is driven by published thresholds from
EngineConfig and leaves an evidence map (fit residual, corner count,
closure gap, ...) so the decision can be audited in the dashboard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT_ENGINE, EngineConfig
from .features import _moving_average
from .model import BBox, InkSession, Stroke, resample_uniform

LABELS = (
    "line", "circle", "triangle", "rectangle", "diamond", "pentagon",
    "cross_out", "dot", "complex_figure", "unrecognized_text",
)


class CollinearPoints(ValueError):
    """Circle fit attempted on (near-)collinear points."""


@dataclass(frozen=True)
class StrokeGroup:
    group_id: int
    stroke_indices: tuple[int, ...]
    bbox: BBox


@dataclass(frozen=True)
class Corner:
    x: float
    y: float
    arc_mm: float
    angle_deg: float


@dataclass(frozen=True)
class CornerSet:
    corners: tuple[Corner, ...]
    closed: bool

    def __len__(self) -> int:
        return len(self.corners)


@dataclass(frozen=True)
class ShapeLabel:
    """Classifier output.

    evidence keys (all float): bbox_diagonal_mm, spread_ratio,
    corner_count, closure_gap_mm, path_length_mm, stroke_count, and for
    circle fits fit_residual_mm, fit_radius_mm, fit_center_x_mm,
    fit_center_y_mm.
    """

    label: str
    confidence: float
    evidence: dict[str, float]


# ---------------------------------------------------------------------------
# grouping

def group_strokes(session: InkSession,
                  gap_mm: float | None = None,
                  gap_s: float | None = None,
                  config: EngineConfig = DEFAULT_ENGINE) -> list[StrokeGroup]:
    """Merge consecutive strokes that are close in space and time.

    A stroke joins the current group when its bbox is within gap_mm of
    the group's combined bbox and it starts within gap_s of the previous
    stroke's end. The result is a partition of all strokes.
    """
    gap_mm = config.group_gap_mm if gap_mm is None else gap_mm
    gap_s = config.group_gap_s if gap_s is None else gap_s
    groups: list[StrokeGroup] = []
    current: list[int] = []
    current_bbox: BBox | None = None
    prev_end = 0
    for stroke in session.strokes:
        sb = stroke.bbox()
        if current and current_bbox is not None:
            dt_s = (stroke.start_t - prev_end) / 1e6
            if current_bbox.gap_to(sb) <= gap_mm and dt_s <= gap_s:
                current.append(stroke.index)
                current_bbox = current_bbox.union(sb)
                prev_end = stroke.end_t
                continue
            groups.append(StrokeGroup(len(groups), tuple(current), current_bbox))
        current = [stroke.index]
        current_bbox = sb
        prev_end = stroke.end_t
    if current and current_bbox is not None:
        groups.append(StrokeGroup(len(groups), tuple(current), current_bbox))
    return groups


# ---------------------------------------------------------------------------
# corners

def detect_corners(stroke: Stroke,
                   config: EngineConfig = DEFAULT_ENGINE) -> CornerSet:
    """Corners of one stroke; empty for paths shorter than 2 mm."""
    if stroke.path_length() < config.tremor_min_path_mm:
        return CornerSet((), False)
    rp = resample_uniform(stroke, config.resample_spacing_mm)
    return corners_of_points(rp.xy, config.resample_spacing_mm, config)


def _smooth_path(pts: np.ndarray, window: int, closed: bool) -> np.ndarray:
    if window <= 1 or len(pts) < 3:
        return pts
    if not closed:
        return _moving_average(pts, window)
    half = window // 2
    ext = np.vstack((pts[-half:], pts, pts[:half]))
    return _moving_average(ext, window)[half:half + len(pts)]


def corners_of_points(points: np.ndarray, spacing: float,
                      config: EngineConfig = DEFAULT_ENGINE) -> CornerSet:
    """Corner detection over a uniformly spaced point sequence.

    The turning at index i is aggregated over a +/- neighborhood of
    corner_neighborhood_mm (the angle between the incoming and outgoing
    chords of the lightly smoothed path). Candidates at or above
    corner_angle_deg are clustered; clusters closer than corner_merge_mm
    merge and each cluster reports its sharpest point. Closed paths
    (endpoint gap within the merge radius) wrap around so a corner at
    the seam is still found.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n < 3:
        return CornerSet((), False)
    seam = math.hypot(*(pts[0] - pts[-1]))
    closed = seam <= max(config.corner_merge_mm, 2 * spacing)
    if closed and seam < spacing:
        # blend near-coincident ring endpoints into one point so the
        # randomly oriented seam step cannot masquerade as a corner
        mid = (pts[0] + pts[-1]) / 2.0
        pts = np.vstack((mid[None, :], pts[1:-1]))
        n = len(pts)
    if n < 3:
        return CornerSet((), False)
    work = _smooth_path(pts, config.corner_smooth_window, closed)

    k = max(1, int(round(config.corner_neighborhood_mm / spacing)))
    angles = np.zeros(n)
    if closed:
        idx = np.arange(n)
        a = np.roll(work, k, axis=0)
        b = work
        c = np.roll(work, -k, axis=0)
    else:
        if n <= 2 * k:
            return CornerSet((), closed)
        idx = np.arange(k, n - k)
        a = work[:n - 2 * k]
        b = work[k:n - k]
        c = work[2 * k:]
    vin = b - a
    vout = c - b
    ang = np.arctan2(vout[:, 1], vout[:, 0]) - np.arctan2(vin[:, 1], vin[:, 0])
    ang = (ang + np.pi) % (2 * np.pi) - np.pi
    degenerate = (np.hypot(vin[:, 0], vin[:, 1]) == 0) | (np.hypot(vout[:, 0], vout[:, 1]) == 0)
    ang[degenerate] = 0.0
    angles[idx] = ang

    threshold = math.radians(config.corner_angle_deg)
    candidates = [int(i) for i in idx if abs(angles[i]) >= threshold]
    if not candidates:
        return CornerSet((), closed)

    merge_pts = max(1, int(round(config.corner_merge_mm / spacing)))
    clusters: list[list[int]] = [[candidates[0]]]
    for i in candidates[1:]:
        if i - clusters[-1][-1] <= merge_pts:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    if closed and len(clusters) > 1:
        wrap = (candidates[0] + n) - clusters[-1][-1]
        if wrap <= merge_pts:
            clusters[0] = clusters.pop() + clusters[0]

    corners = []
    for cluster in clusters:
        best = max(cluster, key=lambda i: abs(angles[i]))
        corners.append(Corner(float(work[best][0]), float(work[best][1]),
                              best * spacing, math.degrees(abs(angles[best]))))
    corners.sort(key=lambda c: c.arc_mm)
    return CornerSet(tuple(corners), closed)


# ---------------------------------------------------------------------------
# circle fit

def fit_circle(points: Sequence | np.ndarray) -> tuple[tuple[float, float], float, float]:
    """Algebraic least-squares circle: ((cx, cy), radius, rms_residual).

    Minimizes sum((x^2 + y^2 + Dx + Ey + F)^2) over the centroid-shifted
    points; raises CollinearPoints when the design matrix is singular
    (singular value ratio below 1e-12).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 3:
        raise ValueError("need at least 3 points")
    centroid = pts.mean(axis=0)
    q = pts - centroid
    a = np.column_stack((q[:, 0], q[:, 1], np.ones(len(q))))
    b = -(q[:, 0] ** 2 + q[:, 1] ** 2)
    sol, _, rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if rank < 3 or sv[-1] <= 1e-12 * sv[0]:
        raise CollinearPoints("points are collinear within tolerance")
    d, e, f = sol
    cx, cy = -d / 2.0, -e / 2.0
    r2 = cx * cx + cy * cy - f
    if r2 <= 0:
        raise CollinearPoints("degenerate circle fit")
    radius = math.sqrt(r2)
    dist = np.hypot(q[:, 0] - cx, q[:, 1] - cy)
    rms = float(np.sqrt(np.mean((dist - radius) ** 2)))
    return (float(cx + centroid[0]), float(cy + centroid[1])), radius, rms


# ---------------------------------------------------------------------------
# classification

TextRecognizer = Callable[[list[Stroke]], tuple[str, float]]


def stub_text_recognizer(strokes: list[Stroke]) -> tuple[str, float]:
    """Built-in handwriting recognizer placeholder: recognizes nothing."""
    return "", 0.0


def _spread_ratio(points: np.ndarray) -> float:
    """Minor/major principal std ratio; 0 for perfectly thin point sets."""
    if len(points) < 2:
        return 0.0
    cov = np.cov(points.T)
    eig = np.linalg.eigvalsh(cov)
    if eig[-1] <= 0:
        return 0.0
    return float(math.sqrt(max(eig[0], 0.0) / eig[-1]))


def _resampled_points(strokes: list[Stroke], spacing: float) -> np.ndarray:
    parts = [resample_uniform(st, spacing).xy for st in strokes]
    return np.vstack(parts)


def stroke_is_line(stroke: Stroke, config: EngineConfig = DEFAULT_ENGINE) -> bool:
    """Single-stroke line test: thin principal spread and no corners."""
    pts = resample_uniform(stroke, config.resample_spacing_mm).xy
    if _spread_ratio(pts) >= config.line_spread_ratio:
        return False
    return len(detect_corners(stroke, config)) == 0


def polylines_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    for i in range(len(a) - 1):
        for j in range(len(b) - 1):
            if _segments_cross(a[i], a[i + 1], b[j], b[j + 1]):
                return True
    return False


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(o, a, b):
        v = (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_seg(a, b, p):
        return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, p3):
        return True
    if o2 == 0 and on_seg(p1, p2, p4):
        return True
    if o3 == 0 and on_seg(p3, p4, p1):
        return True
    if o4 == 0 and on_seg(p3, p4, p2):
        return True
    return False


def classify_group(group: StrokeGroup, session: InkSession,
                   config: EngineConfig = DEFAULT_ENGINE,
                   text_recognizer: TextRecognizer | None = None) -> ShapeLabel:
    """First-match decision procedure over geometric measurements.

    Order: dot, line, cross_out, closed shapes (circle, then polygon by
    corner count), complex_figure for multi-stroke leftovers, and the
    handwriting-recognizer plugin for single-stroke leftovers.
    """
    strokes = [session.strokes[i] for i in group.stroke_indices]
    total_path = sum(st.path_length() for st in strokes)
    evidence: dict[str, float] = {
        "bbox_diagonal_mm": group.bbox.diagonal,
        "path_length_mm": total_path,
        "stroke_count": float(len(strokes)),
    }

    if group.bbox.diagonal < config.dot_diagonal_mm:
        conf = _margin(1.0 - group.bbox.diagonal / config.dot_diagonal_mm)
        return ShapeLabel("dot", conf, evidence)

    pts = _resampled_points(strokes, config.resample_spacing_mm)
    ratio = _spread_ratio(pts)
    evidence["spread_ratio"] = ratio

    strokes_are_lines = [stroke_is_line(st, config) for st in strokes]
    if ratio < config.line_spread_ratio and all(strokes_are_lines):
        conf = _margin(1.0 - ratio / config.line_spread_ratio)
        return ShapeLabel("line", conf, evidence)

    if len(strokes) >= 2 and all(strokes_are_lines):
        paths = [resample_uniform(st, 1.0).xy for st in strokes]
        crossing = all(
            polylines_intersect(paths[i], paths[j])
            for i in range(len(paths)) for j in range(i + 1, len(paths)))
        if crossing:
            worst = max(
                _spread_ratio(resample_uniform(st, config.resample_spacing_mm).xy)
                for st in strokes)
            conf = _margin(1.0 - worst / config.line_spread_ratio)
            return ShapeLabel("cross_out", conf, evidence)

    first = strokes[0].samples[0]
    last = strokes[-1].samples[-1]
    closure_gap = math.hypot(last.x - first.x, last.y - first.y)
    evidence["closure_gap_mm"] = closure_gap
    if total_path > 0 and closure_gap < config.closure_frac * total_path:
        cset = corners_of_points(pts, config.resample_spacing_mm, config)
        evidence["corner_count"] = float(len(cset))
        try:
            center, radius, rms = fit_circle(pts)
        except CollinearPoints:
            center, radius, rms = (0.0, 0.0), 0.0, math.inf
        if radius > 0:
            evidence["fit_residual_mm"] = rms
            evidence["fit_radius_mm"] = radius
            evidence["fit_center_x_mm"] = center[0]
            evidence["fit_center_y_mm"] = center[1]
        if radius > 0 and rms / radius < config.circle_residual_frac and len(cset) <= 1:
            conf = _margin(1.0 - (rms / radius) / config.circle_residual_frac)
            return ShapeLabel("circle", conf, evidence)
        corner_conf = _margin(
            min((c.angle_deg - config.corner_angle_deg) / config.corner_angle_deg
                for c in cset.corners) if cset.corners else 0.0)
        if len(cset) == 3:
            return ShapeLabel("triangle", corner_conf, evidence)
        if len(cset) == 4:
            poly = np.array([(c.x, c.y) for c in cset.corners])
            deviation = _median_axis_deviation(poly)
            evidence["axis_deviation_deg"] = deviation
            if deviation <= config.rect_axis_tol_deg:
                return ShapeLabel("rectangle", corner_conf, evidence)
            return ShapeLabel("diamond", corner_conf, evidence)
        if len(cset) == 5:
            return ShapeLabel("pentagon", corner_conf, evidence)

    if len(strokes) > 1:
        return ShapeLabel("complex_figure", 0.5, evidence)
    recognizer = text_recognizer or stub_text_recognizer
    _text, conf = recognizer(strokes)
    return ShapeLabel("unrecognized_text", _margin(conf), evidence)


def _margin(value: float) -> float:
    return max(0.0, min(1.0, value))


def _median_axis_deviation(poly: np.ndarray) -> float:
    """Median angular distance of polygon edges from the page axes."""
    deviations = []
    for i in range(len(poly)):
        d = poly[(i + 1) % len(poly)] - poly[i]
        ang = math.degrees(math.atan2(d[1], d[0])) % 90.0
        deviations.append(min(ang, 90.0 - ang))
    return float(np.median(deviations))


def group_corner_polygon(group: StrokeGroup, session: InkSession,
                         config: EngineConfig = DEFAULT_ENGINE) -> np.ndarray:
    """Corner points of a group's concatenated path, in traversal order."""
    strokes = [session.strokes[i] for i in group.stroke_indices]
    pts = _resampled_points(strokes, config.resample_spacing_mm)
    cset = corners_of_points(pts, config.resample_spacing_mm, config)
    return np.array([(c.x, c.y) for c in cset.corners], dtype=np.float64)


# ---------------------------------------------------------------------------
# convex polygon geometry (pentagon-copy support)

def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    return poly[::-1].copy() if polygon_area(poly) < 0 else poly


def convex_clip(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman intersection of two convex polygons."""
    clip = ensure_ccw(clip)
    output = list(ensure_ccw(subject))
    for i in range(len(clip)):
        a, b = clip[i], clip[(i + 1) % len(clip)]
        if not output:
            break
        edge = b - a
        inputs = output
        output = []
        for j in range(len(inputs)):
            p, q = inputs[j], inputs[(j + 1) % len(inputs)]
            p_in = edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= 0
            q_in = edge[0] * (q[1] - a[1]) - edge[1] * (q[0] - a[0]) >= 0
            if p_in:
                output.append(p)
                if not q_in:
                    output.append(_line_intersect(a, b, p, q))
            elif q_in:
                output.append(_line_intersect(a, b, p, q))
    return _dedup_ring(np.array(output)) if output else np.zeros((0, 2))


def _line_intersect(a, b, p, q) -> np.ndarray:
    r = b - a
    s = q - p
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0:
        return np.array(p, dtype=np.float64)
    t = ((p[0] - a[0]) * s[1] - (p[1] - a[1]) * s[0]) / denom
    return np.array([a[0] + t * r[0], a[1] + t * r[1]])


def _dedup_ring(poly: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    if len(poly) == 0:
        return poly
    kept = [poly[0]]
    for p in poly[1:]:
        if math.hypot(*(p - kept[-1])) > tol:
            kept.append(p)
    if len(kept) > 1 and math.hypot(*(kept[0] - kept[-1])) <= tol:
        kept.pop()
    return np.array(kept)


def polygons_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    inter = convex_clip(a, b)
    return len(inter) >= 3 and abs(polygon_area(inter)) > 1e-9
