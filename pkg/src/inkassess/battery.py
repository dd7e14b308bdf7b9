"""Assessment battery: test registry, page templates, and pen scoring.

The registry carries the eight standard screenings with their published
pen-input percentages. Scoring rubrics are deliberately minimal and
auditable; every threshold comes from EngineConfig. Clinically validated
scoring is explicitly not claimed; digit/word identity goes through the
pluggable text recognizer (the built-in stub recognizes nothing, which
each result surfaces as marks_identity_checked=False).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_ENGINE, EngineConfig
from .features import FeatureVector, session_features
from .model import BBox, InkSession, PageSize
from .recognize import (
    ShapeLabel,
    StrokeGroup,
    TextRecognizer,
    classify_group,
    convex_clip,
    group_corner_polygon,
    group_strokes,
    polygons_overlap,
    stroke_is_line,
    stub_text_recognizer,
)


class UnknownTest(KeyError):
    pass


class NoInk(ValueError):
    """Scoring was asked for a session without any strokes."""


@dataclass(frozen=True)
class TestDefinition:
    test_id: str
    name: str
    approx_time: str
    pen_input_pct: int
    symbols: tuple[str, ...]


# The eight standard assessments; shape terms are normalized to the
# recognizer's vocabulary (pentagon label, identifier-safe cross_out).
_REGISTRY: tuple[TestDefinition, ...] = (
    TestDefinition("AKT", "Age-Concentration", "15 min", 100, ("cross_out",)),
    TestDefinition("CDT", "Clock Drawing Test", "2-5 min", 100,
                   ("clock", "digits", "lines")),
    TestDefinition("CERAD", "Neuropsychological Battery", "30-45 min", 20,
                   ("pentagon", "circle", "diamond", "rectangles", "cubes")),
    TestDefinition("DemTect", "Dementia Detection", "6-8 min", 20,
                   ("numbers", "words")),
    TestDefinition("MMSE", "Mini-Mental State Examination", "5-10 min", 9,
                   ("pentagon",)),
    TestDefinition("MoCA", "Montreal Cognitive Assessment", "10 min", 17,
                   ("clock", "digits", "lines")),
    TestDefinition("ROCF", "Rey-Osterrieth", "15 min", 100,
                   ("circles", "rectangles", "triangles", "lines")),
    TestDefinition("TMT", "Trail Making Test", "3-5 min", 100, ("lines",)),
)


def registry() -> tuple[TestDefinition, ...]:
    return _REGISTRY


def registry_lookup(test_id: str) -> TestDefinition:
    for td in _REGISTRY:
        if td.test_id == test_id:
            return td
    raise UnknownTest(test_id)


# ---------------------------------------------------------------------------
# templates

REGION_KINDS = ("target", "distractor", "input_field", "node", "canvas")


@dataclass(frozen=True)
class Region:
    region_id: str
    kind: str
    bbox: BBox
    seq: int | None = None
    expect: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")


@dataclass(frozen=True)
class TestTemplate:
    test_id: str
    page: PageSize
    regions: tuple[Region, ...]
    pre_drawn_contour: bool = False

    def __post_init__(self) -> None:
        page_box = BBox(0.0, 0.0, self.page.w_mm, self.page.h_mm)
        seqs = []
        for r in self.regions:
            if not (page_box.contains(r.bbox.min_x, r.bbox.min_y)
                    and page_box.contains(r.bbox.max_x, r.bbox.max_y)):
                raise ValueError(f"region {r.region_id} outside page")
            if r.seq is not None:
                seqs.append(r.seq)
        if len(seqs) != len(set(seqs)):
            raise ValueError("duplicate node ordinals")

    def by_kind(self, kind: str) -> list[Region]:
        return [r for r in self.regions if r.kind == kind]


def template_to_json(template: TestTemplate) -> dict:
    regions = []
    for r in template.regions:
        obj: dict = {
            "id": r.region_id,
            "kind": r.kind,
            "bbox": [r.bbox.min_x, r.bbox.min_y, r.bbox.max_x, r.bbox.max_y],
        }
        if r.seq is not None:
            obj["seq"] = r.seq
        if r.expect is not None:
            obj["expect"] = r.expect
        regions.append(obj)
    out = {
        "test_id": template.test_id,
        "page": {"w_mm": template.page.w_mm, "h_mm": template.page.h_mm},
        "regions": regions,
    }
    if template.pre_drawn_contour:
        out["pre_drawn_contour"] = True
    return out


def template_from_json(obj: dict) -> TestTemplate:
    try:
        regions = tuple(
            Region(str(r["id"]), str(r["kind"]),
                   BBox(*[float(v) for v in r["bbox"]]),
                   seq=int(r["seq"]) if "seq" in r else None,
                   expect=str(r["expect"]) if "expect" in r else None)
            for r in obj["regions"])
        return TestTemplate(
            str(obj["test_id"]),
            PageSize(float(obj["page"]["w_mm"]), float(obj["page"]["h_mm"])),
            regions,
            pre_drawn_contour=bool(obj.get("pre_drawn_contour", False)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed template-json: {exc}") from exc


# ---------------------------------------------------------------------------
# results

@dataclass(frozen=True)
class CDTResult:
    contour_present: bool
    contour_closed: bool
    mark_count: int
    marks_well_placed: bool
    hands_present: bool
    hands_correct: bool
    total: int
    marks_identity_checked: bool = False
    center: tuple[float, float] = (0.0, 0.0)
    radius_mm: float = 0.0


@dataclass(frozen=True)
class TMTResult:
    completion_time_s: float
    sequencing_errors: int
    nodes_visited: int
    completed: bool
    visit_order: tuple[int, ...] = ()


@dataclass(frozen=True)
class AKTResult:
    hits: int
    misses: int
    false_alarms: int
    duration_s: float
    hit_ids: tuple[str, ...] = ()
    miss_ids: tuple[str, ...] = ()
    false_alarm_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class PentagonResult:
    two_pentagons: bool
    intersect: bool
    intersection_is_quadrilateral: bool
    pentagon_count: int = 0
    intersection_vertices: int = 0


@dataclass(frozen=True)
class ROCFResult:
    elements_expected: int
    elements_found: int
    found: dict[str, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class FieldResult:
    has_ink: bool
    ink_path_mm: float
    text: str
    text_confidence: float


@dataclass(frozen=True)
class SummativeStats:
    test_id: str
    session_id: str
    score: dict
    completion_time_s: float
    document_features: FeatureVector
    flags: tuple[str, ...]


def result_to_dict(result) -> dict:
    out = dataclasses.asdict(result)
    out["result_type"] = type(result).__name__
    return out


# ---------------------------------------------------------------------------
# clock geometry: angles are degrees clockwise from 12 o'clock in page
# coordinates (y grows downward)

def clock_angle_deg(hour: int, minute: int = 0) -> float:
    return ((hour % 12) * 30.0 + minute * 0.5) % 360.0


def minute_angle_deg(minute: int) -> float:
    return (minute * 6.0) % 360.0


def clock_direction(angle_deg: float) -> tuple[float, float]:
    rad = math.radians(angle_deg)
    return math.sin(rad), -math.cos(rad)


def angle_from_center(cx: float, cy: float, x: float, y: float) -> float:
    return math.degrees(math.atan2(x - cx, -(y - cy))) % 360.0


def _circular_diff(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def _classified_groups(
    session: InkSession, config: EngineConfig,
    text_recognizer: TextRecognizer | None = None,
) -> tuple[list[StrokeGroup], list[ShapeLabel]]:
    groups = group_strokes(session, config=config)
    labels = [classify_group(g, session, config, text_recognizer)
              for g in groups]
    return groups, labels


# ---------------------------------------------------------------------------
# scoring

def score_cdt(session: InkSession, template: TestTemplate,
              target_time: tuple[int, int] = (11, 10),
              config: EngineConfig = DEFAULT_ENGINE,
              groups: list[StrokeGroup] | None = None,
              labels: list[ShapeLabel] | None = None) -> CDTResult:
    """Six-criterion clock rubric: contour, closure, mark count and
    placement, hand presence and angles."""
    if not session.strokes:
        raise NoInk(session.session_id)
    if groups is None or labels is None:
        groups, labels = _classified_groups(session, config)

    contour_idx = None
    best_radius = 0.0
    for g, lab in zip(groups, labels):
        if lab.label != "circle":
            continue
        radius = lab.evidence.get("fit_radius_mm", 0.0)
        if radius > config.contour_min_radius_mm and radius > best_radius:
            contour_idx, best_radius = g.group_id, radius

    contour_present = contour_idx is not None
    contour_closed = False
    center = (0.0, 0.0)
    radius = 0.0
    if contour_present:
        lab = labels[contour_idx]
        radius = lab.evidence["fit_radius_mm"]
        center = (lab.evidence["fit_center_x_mm"], lab.evidence["fit_center_y_mm"])
        contour_closed = (lab.evidence.get("closure_gap_mm", math.inf)
                          < config.contour_closure_frac * radius)

    hand_strokes = []
    if contour_present:
        for st in session.strokes:
            start = st.samples[0]
            near = math.hypot(start.x - center[0], start.y - center[1])
            if near <= config.hand_center_frac * radius and stroke_is_line(st, config):
                hand_strokes.append(st)
    hands_present = len(hand_strokes) >= 2

    hands_correct = False
    if hands_present:
        hour_target = clock_angle_deg(*target_time)
        minute_target = minute_angle_deg(target_time[1])
        hand_angles = []
        for st in hand_strokes:
            ends = [st.samples[0], st.samples[-1]]
            far = max(ends, key=lambda s: math.hypot(s.x - center[0], s.y - center[1]))
            hand_angles.append(angle_from_center(center[0], center[1], far.x, far.y))
        tol = config.angle_tol_deg
        for i in range(len(hand_angles)):
            for j in range(len(hand_angles)):
                if i == j:
                    continue
                if (_circular_diff(hand_angles[i], hour_target) <= tol
                        and _circular_diff(hand_angles[j], minute_target) <= tol):
                    hands_correct = True

    mark_angles = []
    mark_count = 0
    if contour_present:
        hand_indices = {st.index for st in hand_strokes}
        for g in groups:
            if g.group_id == contour_idx:
                continue
            if any(i in hand_indices for i in g.stroke_indices):
                continue
            samples = [s for i in g.stroke_indices
                       for s in session.strokes[i].samples]
            if all(math.hypot(s.x - center[0], s.y - center[1]) < radius
                   for s in samples):
                mark_count += 1
                mx = sum(s.x for s in samples) / len(samples)
                my = sum(s.y for s in samples) / len(samples)
                mark_angles.append(angle_from_center(center[0], center[1], mx, my))

    marks_well_placed = False
    if mark_count == 12:
        assigned = set()
        ok = True
        for ang in mark_angles:
            nearest = round(ang / 30.0) % 12
            if _circular_diff(ang, nearest * 30.0) > config.angle_tol_deg:
                ok = False
                break
            if nearest in assigned:
                ok = False
                break
            assigned.add(nearest)
        marks_well_placed = ok

    parts = [contour_present, contour_closed, mark_count == 12,
             marks_well_placed, hands_present, hands_correct]
    return CDTResult(contour_present, contour_closed, mark_count,
                     marks_well_placed, hands_present, hands_correct,
                     total=sum(parts), center=center, radius_mm=radius)


def score_tmt(session: InkSession, template: TestTemplate,
              config: EngineConfig = DEFAULT_ENGINE) -> TMTResult:
    """Visit order = first entry of the pen path into each node circle."""
    if not session.strokes:
        raise NoInk(session.session_id)
    nodes = sorted(template.by_kind("node"), key=lambda r: r.seq or 0)
    circles = [(r.seq, r.bbox.center, min(r.bbox.width, r.bbox.height) / 2.0)
               for r in nodes]
    visited: list[int] = []
    seen = set()
    for stroke in session.strokes:
        for s in stroke.samples:
            for seq, (cx, cy), rad in circles:
                if seq in seen:
                    continue
                if math.hypot(s.x - cx, s.y - cy) <= rad:
                    visited.append(seq)
                    seen.add(seq)
    errors = sum(1 for a, b in zip(visited, visited[1:]) if b != a + 1)
    completion = (session.strokes[-1].end_t - session.strokes[0].start_t) / 1e6
    return TMTResult(completion, errors, len(visited),
                     completed=len(visited) == len(circles),
                     visit_order=tuple(visited))


def _ink_length_in_bbox(session: InkSession, box: BBox) -> float:
    total = 0.0
    for stroke in session.strokes:
        xy = stroke.xy()
        for i in range(len(xy) - 1):
            total += _clipped_segment_length(xy[i], xy[i + 1], box)
    return total


def _clipped_segment_length(p: np.ndarray, q: np.ndarray, box: BBox) -> float:
    # Liang-Barsky parametric clipping
    d = q - p
    t0, t1 = 0.0, 1.0
    for coord, lo, hi in ((0, box.min_x, box.max_x), (1, box.min_y, box.max_y)):
        if d[coord] == 0:
            if p[coord] < lo or p[coord] > hi:
                return 0.0
            continue
        ta = (lo - p[coord]) / d[coord]
        tb = (hi - p[coord]) / d[coord]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return 0.0
    return float(math.hypot(*d) * (t1 - t0))


def score_akt(session: InkSession, template: TestTemplate,
              config: EngineConfig = DEFAULT_ENGINE) -> AKTResult:
    """A region counts as crossed when enough ink path lies inside it."""
    if not session.strokes:
        raise NoInk(session.session_id)
    hit_ids, miss_ids, fa_ids = [], [], []
    for r in template.by_kind("target"):
        if _ink_length_in_bbox(session, r.bbox) >= config.crossing_ink_mm:
            hit_ids.append(r.region_id)
        else:
            miss_ids.append(r.region_id)
    for r in template.by_kind("distractor"):
        if _ink_length_in_bbox(session, r.bbox) >= config.crossing_ink_mm:
            fa_ids.append(r.region_id)
    duration = (session.strokes[-1].end_t - session.strokes[0].start_t) / 1e6
    return AKTResult(len(hit_ids), len(miss_ids), len(fa_ids), duration,
                     tuple(hit_ids), tuple(miss_ids), tuple(fa_ids))


def check_pentagon_copy(session: InkSession, template: TestTemplate,
                        config: EngineConfig = DEFAULT_ENGINE,
                        groups: list[StrokeGroup] | None = None,
                        labels: list[ShapeLabel] | None = None) -> PentagonResult:
    if not session.strokes:
        raise NoInk(session.session_id)
    if groups is None or labels is None:
        groups, labels = _classified_groups(session, config)
    canvases = template.by_kind("canvas")
    canvas = canvases[0].bbox if canvases else BBox(
        0.0, 0.0, template.page.w_mm, template.page.h_mm)

    pentagons = [g for g, lab in zip(groups, labels)
                 if lab.label == "pentagon"
                 and canvas.contains(*g.bbox.center)]
    two = len(pentagons) == 2
    intersect = False
    quad = False
    vertices = 0
    if two:
        poly_a = group_corner_polygon(pentagons[0], session, config)
        poly_b = group_corner_polygon(pentagons[1], session, config)
        if len(poly_a) >= 3 and len(poly_b) >= 3:
            inter = convex_clip(poly_a, poly_b)
            vertices = len(inter)
            intersect = polygons_overlap(poly_a, poly_b)
            quad = intersect and vertices == 4
    return PentagonResult(two, intersect, quad,
                          pentagon_count=len(pentagons),
                          intersection_vertices=vertices)


def score_rocf(session: InkSession, template: TestTemplate,
               config: EngineConfig = DEFAULT_ENGINE) -> ROCFResult:
    """Element-presence check: one recognized shape per expected element
    region. The full 36-point rubric is out of scope."""
    if not session.strokes:
        raise NoInk(session.session_id)
    groups, labels = _classified_groups(session, config)
    found: dict[str, bool] = {}
    for r in template.by_kind("target"):
        if r.expect is None:
            continue
        hit = any(
            lab.label == r.expect and g.bbox.gap_to(r.bbox) == 0.0
            for g, lab in zip(groups, labels))
        found[r.region_id] = hit
    return ROCFResult(len(found), sum(found.values()), found)


def field_completion(session: InkSession, template: TestTemplate,
                     config: EngineConfig = DEFAULT_ENGINE,
                     text_recognizer: TextRecognizer | None = None,
                     ) -> dict[str, FieldResult]:
    recognizer = text_recognizer or stub_text_recognizer
    out: dict[str, FieldResult] = {}
    for r in template.by_kind("input_field"):
        strokes_in = [st for st in session.strokes
                      if any(r.bbox.contains(s.x, s.y) for s in st.samples)]
        has_ink = bool(strokes_in)
        length = _ink_length_in_bbox(session, r.bbox)
        text, conf = recognizer(strokes_in) if strokes_in else ("", 0.0)
        out[r.region_id] = FieldResult(has_ink, length, text, conf)
    return out


def score_session(session: InkSession, template: TestTemplate,
                  target_time: tuple[int, int] = (11, 10),
                  config: EngineConfig = DEFAULT_ENGINE,
                  groups: list[StrokeGroup] | None = None,
                  labels: list[ShapeLabel] | None = None) -> dict:
    """Dispatch to the per-test scorer; returns a JSON-ready dict."""
    test_id = template.test_id
    if test_id in ("CDT", "MoCA"):
        return result_to_dict(score_cdt(session, template, target_time,
                                        config, groups, labels))
    if test_id == "TMT":
        return result_to_dict(score_tmt(session, template, config))
    if test_id == "AKT":
        return result_to_dict(score_akt(session, template, config))
    if test_id in ("MMSE", "CERAD"):
        return result_to_dict(check_pentagon_copy(session, template, config,
                                                  groups, labels))
    if test_id == "ROCF":
        return result_to_dict(score_rocf(session, template, config))
    if test_id == "DemTect":
        fields = field_completion(session, template, config)
        return {
            "result_type": "FieldCompletion",
            "fields": {rid: dataclasses.asdict(fr) for rid, fr in fields.items()},
        }
    raise UnknownTest(test_id)


def summarize(session: InkSession, score: dict,
              config: EngineConfig = DEFAULT_ENGINE,
              document_features: FeatureVector | None = None) -> SummativeStats:
    """One aggregate record per session for the dashboard and exports."""
    if document_features is None:
        document_features, _, _ = session_features(session, config)
    flags = []
    if any(g.duration_us / 1e6 > config.long_pause_s for g in session.gaps):
        flags.append("long-pause")
    completion = session.span_us / 1e6
    return SummativeStats(session.test_id, session.session_id, score,
                          completion, document_features, tuple(sorted(flags)))
