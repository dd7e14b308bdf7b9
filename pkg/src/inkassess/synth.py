"""Deterministic synthetic ink: strokes, shapes and whole test sessions.

Every generator is a pure function of its spec and seed, and each
session ships with a manifest recording the ground truth (labels, group
count, injected pauses/corrections/trail errors, per-stroke tremor
parameters) so analyzer outputs can be checked exactly.

The tremor model is a perpendicular sinusoid plus optional seeded
Gaussian jitter; with amplitude and jitter at zero, samples lie on the
base path exactly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .battery import (
    BBox,
    Region,
    TestTemplate,
    clock_angle_deg,
    clock_direction,
    minute_angle_deg,
    registry_lookup,
    template_to_json,
)
from .model import InkSession, PageSize, RawSample

A4 = PageSize(210.0, 297.0)


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class StrokeSpec:
    """One stroke: a base polyline traced at constant speed.

    jitter_mm is the RMS of a smooth, band-limited positional wobble
    (hand noise); jitter_corr_mm sets its correlation length along the
    path. White per-sample noise would be an unphysical digitizer model.
    """

    path: tuple[tuple[float, float], ...]
    speed_mm_s: float = 40.0
    rate_hz: float = 200.0
    tremor_amp_mm: float = 0.0
    tremor_freq_hz: float = 0.0
    tremor_phase_rad: float = 0.0
    jitter_mm: float = 0.0
    jitter_corr_mm: float = 2.5
    pressure: float = 0.6
    pressure_end: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rate_hz <= 0 or self.speed_mm_s <= 0:
            raise InvalidSpec("rate and speed must be positive")
        if self.tremor_amp_mm < 0 or self.jitter_mm < 0:
            raise InvalidSpec("amplitudes must be non-negative")
        if len(self.path) < 1:
            raise InvalidSpec("empty base path")


def gen_stroke(spec: StrokeSpec, start_t_us: int = 0) -> tuple[list[RawSample], dict]:
    """Sample the spec's path; returns (samples, per-stroke manifest)."""
    base = np.asarray(spec.path, dtype=np.float64)
    if base.ndim != 2:
        raise InvalidSpec("path must be a sequence of (x, y) points")
    seg = np.hypot(np.diff(base[:, 0]), np.diff(base[:, 1])) if len(base) > 1 else np.zeros(0)
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    total = float(cum[-1])
    rng = random.Random(spec.seed)

    if total == 0.0:
        samples = [RawSample(start_t_us, float(base[0, 0]), float(base[0, 1]),
                             spec.pressure, True)]
        return samples, {"length_mm": 0.0, "duration_s": 0.0}

    duration = total / spec.speed_mm_s
    n = int(math.floor(duration * spec.rate_hz + 1e-9))
    times = [i / spec.rate_hz for i in range(n + 1)]
    if duration - times[-1] > 1e-9:
        times.append(duration)

    jitter_x = jitter_y = None
    if spec.jitter_mm > 0:
        step_mm = spec.speed_mm_s / spec.rate_hz
        width = max(1, round(spec.jitter_corr_mm / step_mm))
        white = np.array([rng.gauss(0.0, 1.0)
                          for _ in range(len(times) + width)])
        kernel = np.full(width, 1.0 / width)
        smooth = np.convolve(white, kernel, "valid")[:len(times)]
        jitter_x = smooth * spec.jitter_mm * math.sqrt(width)
        white = np.array([rng.gauss(0.0, 1.0)
                          for _ in range(len(times) + width)])
        smooth = np.convolve(white, kernel, "valid")[:len(times)]
        jitter_y = smooth * spec.jitter_mm * math.sqrt(width)

    samples = []
    for j, t in enumerate(times):
        s = min(spec.speed_mm_s * t, total)
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(max(i, 0), len(seg) - 1)
        frac = (s - cum[i]) / seg[i] if seg[i] > 0 else 0.0
        px = base[i, 0] + (base[i + 1, 0] - base[i, 0]) * frac
        py = base[i, 1] + (base[i + 1, 1] - base[i, 1]) * frac
        dx, dy = base[i + 1] - base[i]
        norm = math.hypot(dx, dy) or 1.0
        nx, ny = -dy / norm, dx / norm
        if spec.tremor_amp_mm > 0:
            off = spec.tremor_amp_mm * math.sin(
                2 * math.pi * spec.tremor_freq_hz * t + spec.tremor_phase_rad)
            px += nx * off
            py += ny * off
        if jitter_x is not None:
            px += jitter_x[j]
            py += jitter_y[j]
        if spec.pressure_end is not None:
            p = spec.pressure + (spec.pressure_end - spec.pressure) * (t / duration)
        else:
            p = spec.pressure
        samples.append(RawSample(start_t_us + round(t * 1e6), px, py,
                                 min(max(p, 0.0), 1.0), True))
    manifest = {
        "length_mm": total,
        "duration_s": duration,
        "tremor_amp_mm": spec.tremor_amp_mm,
        "tremor_freq_hz": spec.tremor_freq_hz,
    }
    return samples, manifest


# ---------------------------------------------------------------------------
# base path builders

def line_path(a, b) -> tuple[tuple[float, float], ...]:
    return (tuple(a), tuple(b))


def circle_path(center, radius, start_deg=0.0, points=144,
                turns=1.0) -> tuple[tuple[float, float], ...]:
    cx, cy = center
    out = []
    for i in range(int(points * turns) + 1):
        ang = math.radians(start_deg + 360.0 * turns * i / (points * turns))
        out.append((cx + radius * math.cos(ang), cy + radius * math.sin(ang)))
    return tuple(out)


def polygon_path(vertices, start_mid_edge=True) -> tuple[tuple[float, float], ...]:
    """Closed loop over the vertices; starting mid-edge keeps every true
    corner in the interior of the stroke."""
    verts = [tuple(v) for v in vertices]
    if start_mid_edge:
        m = ((verts[0][0] + verts[1][0]) / 2.0, (verts[0][1] + verts[1][1]) / 2.0)
        return tuple([m] + verts[1:] + verts[:1] + [m])
    return tuple(verts + verts[:1])


def regular_polygon(center, circumradius, sides, rotation_deg=0.0):
    cx, cy = center
    return [
        (cx + circumradius * math.cos(math.radians(rotation_deg + 360.0 * i / sides)),
         cy + circumradius * math.sin(math.radians(rotation_deg + 360.0 * i / sides)))
        for i in range(sides)
    ]


def zigzag_path(box: BBox, peaks: int = 5, inset: float = 2.0):
    xs = np.linspace(box.min_x + inset, box.max_x - inset, peaks * 2 + 1)
    lo, hi = box.min_y + inset, box.max_y - inset
    return tuple((float(x), hi if i % 2 else lo) for i, x in enumerate(xs))


# ---------------------------------------------------------------------------
# session assembly

@dataclass(frozen=True)
class GenParams:
    """Difficulty and content knobs for whole-session generation."""

    speed_mm_s: float = 40.0
    rate_hz: float = 200.0
    tremor_amp_mm: float = 0.0
    tremor_freq_hz: float = 8.0
    jitter_mm: float = 0.0
    pressure: float = 0.6
    inter_symbol_pause_s: float = 1.5
    intra_symbol_pause_s: float = 0.3
    clock_radius_mm: float = 30.0
    target_time: tuple[int, int] = (11, 10)
    node_count: int = 8
    trail_errors: int = 0
    crossed_targets: tuple[int, ...] | None = None
    crossed_distractors: tuple[int, ...] = ()
    pentagon_radius_mm: float = 15.0
    pentagon_offset_mm: float = 24.0
    filled_fields: tuple[int, ...] | None = None
    inject_pause_s: float = 0.0
    inject_correction: bool = False


@dataclass
class SynthManifest:
    test_id: str
    seed: int
    group_count: int
    components: list[dict] = field(default_factory=list)
    expectations: dict = field(default_factory=dict)
    pauses: list[dict] = field(default_factory=list)
    corrections: list[dict] = field(default_factory=list)
    stroke_tremor: list[dict] = field(default_factory=list)
    template: TestTemplate | None = None


def manifest_to_json(manifest: SynthManifest) -> dict:
    return {
        "test_id": manifest.test_id,
        "seed": manifest.seed,
        "group_count": manifest.group_count,
        "components": manifest.components,
        "expectations": manifest.expectations,
        "pauses": manifest.pauses,
        "corrections": manifest.corrections,
        "stroke_tremor": manifest.stroke_tremor,
        "template": template_to_json(manifest.template) if manifest.template else None,
    }


class _Assembler:
    def __init__(self, params: GenParams, seed: int):
        self.params = params
        self.rng = random.Random(seed)
        self.samples: list[RawSample] = []
        self.cursor_us = 0
        self.stroke_count = 0
        self.tremor_log: list[dict] = []
        self.spans: list[tuple[int, int]] = []
        self._last_contact_t = 0

    def _lift_pen(self) -> None:
        """Emit one pen-up marker so segmentation sees the stroke end."""
        if self.samples and self.samples[-1].contact:
            last = self.samples[-1]
            self.samples.append(RawSample(last.t + 1000, last.x, last.y,
                                          0.0, False))
            self.cursor_us = max(self.cursor_us, last.t + 1000)

    def stroke(self, path, **overrides) -> int:
        p = self.params
        spec = StrokeSpec(
            path=tuple(path),
            speed_mm_s=overrides.get("speed_mm_s", p.speed_mm_s),
            rate_hz=p.rate_hz,
            tremor_amp_mm=overrides.get("tremor_amp_mm", p.tremor_amp_mm),
            tremor_freq_hz=overrides.get("tremor_freq_hz", p.tremor_freq_hz),
            tremor_phase_rad=self.rng.uniform(0, 2 * math.pi),
            jitter_mm=overrides.get("jitter_mm", p.jitter_mm),
            pressure=p.pressure,
            seed=self.rng.getrandbits(32),
        )
        self._lift_pen()
        if self.samples and self.cursor_us <= self.samples[-1].t:
            self.cursor_us = self.samples[-1].t + 1000
        samples, _ = gen_stroke(spec, self.cursor_us)
        self.samples.extend(samples)
        self.cursor_us = samples[-1].t
        self._last_contact_t = samples[-1].t
        index = self.stroke_count
        self.stroke_count += 1
        self.spans.append((samples[0].t, samples[-1].t))
        self.tremor_log.append({
            "index": index,
            "amp_mm": spec.tremor_amp_mm,
            "freq_hz": spec.tremor_freq_hz,
        })
        return index

    def pause(self, seconds: float) -> tuple[int, int]:
        """Set the in-air time since the last stroke ended.

        Consecutive calls re-anchor rather than accumulate, so the last
        call wins; returns the exact gap interval in microseconds.
        """
        if seconds <= 0.002:
            raise InvalidSpec("pause must exceed the pen-up marker offset")
        self._lift_pen()
        anchor = self._last_contact_t if self.samples else self.cursor_us
        self.cursor_us = anchor + round(seconds * 1e6)
        return anchor, self.cursor_us

    def build(self, session_id: str, test_id: str, page: PageSize) -> InkSession:
        return InkSession.from_samples(
            self.samples, session_id=session_id, test_id=test_id, page=page)


# ---------------------------------------------------------------------------
# templates

def make_clock_template(test_id: str = "CDT", page: PageSize = A4,
                        center=(105.0, 120.0), extent=50.0) -> TestTemplate:
    canvas = Region("canvas", "canvas",
                    BBox(center[0] - extent, center[1] - extent,
                         center[0] + extent, center[1] + extent))
    return TestTemplate(test_id, page, (canvas,))


def make_trail_template(node_count: int, seed: int, page: PageSize = A4,
                        node_radius: float = 5.0) -> TestTemplate:
    if node_count < 2:
        raise InvalidSpec("need at least 2 nodes")
    rng = random.Random(seed)
    center = (page.w_mm / 2.0, page.h_mm / 2.0)
    ring = max(55.0, node_count * 4.0 * node_radius / (2 * math.pi))
    slots = list(range(node_count))
    rng.shuffle(slots)
    regions = []
    for ordinal in range(1, node_count + 1):
        slot = slots[ordinal - 1]
        ang = math.radians(-90.0 + 360.0 * slot / node_count)
        cx = center[0] + ring * math.cos(ang)
        cy = center[1] + ring * math.sin(ang)
        regions.append(Region(
            f"node{ordinal:02d}", "node",
            BBox(cx - node_radius, cy - node_radius,
                 cx + node_radius, cy + node_radius),
            seq=ordinal))
    return TestTemplate("TMT", page, tuple(regions))


def make_akt_template(page: PageSize = A4, cols: int = 8, rows: int = 5,
                      box: float = 8.0) -> TestTemplate:
    regions = []
    for r in range(rows):
        for c in range(cols):
            x = 16.0 + c * 24.0
            y = 40.0 + r * 20.0
            kind = "target" if (r + c) % 2 == 0 else "distractor"
            regions.append(Region(f"box{r * cols + c:02d}", kind,
                                  BBox(x, y, x + box, y + box)))
    return TestTemplate("AKT", page, tuple(regions))


def make_canvas_template(test_id: str, page: PageSize = A4) -> TestTemplate:
    return TestTemplate(test_id, page, (
        Region("canvas", "canvas", BBox(10.0, 10.0, page.w_mm - 10.0, page.h_mm - 10.0)),
    ))


def make_fields_template(page: PageSize = A4, count: int = 4) -> TestTemplate:
    regions = [Region("canvas", "canvas", BBox(10.0, 10.0, 200.0, 287.0))]
    for i in range(count):
        y = 60.0 + i * 30.0
        regions.append(Region(f"field{i}", "input_field",
                              BBox(30.0, y, 180.0, y + 12.0)))
    return TestTemplate("DemTect", page, tuple(regions))


def make_rocf_template(page: PageSize = A4) -> TestTemplate:
    return TestTemplate("ROCF", page, (
        Region("canvas", "canvas", BBox(10.0, 10.0, 200.0, 287.0)),
        Region("el_rect", "target", BBox(50.0, 70.0, 140.0, 150.0), expect="rectangle"),
        Region("el_circle", "target", BBox(145.0, 80.0, 195.0, 130.0), expect="circle"),
        Region("el_triangle", "target", BBox(50.0, 160.0, 110.0, 220.0), expect="triangle"),
        Region("el_line", "target", BBox(115.0, 160.0, 195.0, 200.0), expect="line"),
    ))


# ---------------------------------------------------------------------------
# whole-session generators

def gen_test_session(test_id: str, params: GenParams = GenParams(),
                     seed: int = 0, session_id: str | None = None,
                     ) -> tuple[InkSession, SynthManifest]:
    registry_lookup(test_id)
    session_id = session_id or f"synth-{test_id}-{seed}"
    if test_id in ("CDT", "MoCA"):
        return _gen_clock(test_id, params, seed, session_id)
    if test_id == "TMT":
        return _gen_trail(params, seed, session_id)
    if test_id == "AKT":
        return _gen_akt(params, seed, session_id)
    if test_id in ("MMSE", "CERAD"):
        return _gen_pentagon_copy(test_id, params, seed, session_id)
    if test_id == "DemTect":
        return _gen_fields(params, seed, session_id)
    return _gen_rocf(params, seed, session_id)


def _gen_clock(test_id: str, params: GenParams, seed: int,
               session_id: str) -> tuple[InkSession, SynthManifest]:
    template = make_clock_template(test_id)
    center = (105.0, 120.0)
    r = params.clock_radius_mm
    asm = _Assembler(params, seed)
    manifest = SynthManifest(test_id, seed, 0, template=template)

    start_deg = asm.rng.uniform(0, 360)
    idx = asm.stroke(circle_path(center, r, start_deg))
    manifest.components.append(
        {"kind": "contour", "label": "circle", "stroke_indices": [idx]})
    if params.inject_pause_s > 0:
        start, end = asm.pause(max(params.inject_pause_s,
                                   params.inter_symbol_pause_s))
        manifest.pauses.append({"start_us": start, "end_us": end})
    else:
        asm.pause(params.inter_symbol_pause_s)

    mark_strokes = {}
    for hour in range(1, 13):
        d = clock_direction(clock_angle_deg(hour))
        p0 = (center[0] + 0.80 * r * d[0], center[1] + 0.80 * r * d[1])
        p1 = (center[0] + 0.92 * r * d[0], center[1] + 0.92 * r * d[1])
        idx = asm.stroke(line_path(p0, p1))
        mark_strokes[hour] = (p0, p1, idx)
        manifest.components.append(
            {"kind": "mark", "hour": hour, "label": "line", "stroke_indices": [idx]})
        asm.pause(params.inter_symbol_pause_s)

    hour_ang = clock_angle_deg(*params.target_time)
    minute_ang = minute_angle_deg(params.target_time[1])
    for ang, frac, kind in ((hour_ang, 0.50, "hour_hand"),
                            (minute_ang, 0.75, "minute_hand")):
        d = clock_direction(ang)
        tip = (center[0] + frac * r * d[0], center[1] + frac * r * d[1])
        idx = asm.stroke(line_path(center, tip))
        manifest.components.append(
            {"kind": kind, "label": "line", "stroke_indices": [idx]})
        asm.pause(params.inter_symbol_pause_s)

    if params.inject_correction:
        asm.pause(3.0)
        p0, p1, earlier = mark_strokes[12]
        idx = asm.stroke(line_path(p0, p1))
        manifest.components.append(
            {"kind": "correction", "label": "line", "stroke_indices": [idx]})
        manifest.corrections.append({
            "earlier_stroke": earlier, "stroke": idx,
            "start_us": asm.spans[idx][0], "end_us": asm.spans[idx][1],
        })

    manifest.group_count = len(manifest.components)
    manifest.expectations = {
        "center": list(center), "radius_mm": r,
        "target_time": list(params.target_time),
        "mark_count": 12,
        "cdt_total": 6,
    }
    manifest.stroke_tremor = asm.tremor_log
    return asm.build(session_id, test_id, template.page), manifest


def _trail_visit_order(n: int, errors: int, rng: random.Random) -> list[int]:
    """Permutation of 1..n whose non-successor transition count is
    exactly `errors`: consecutive blocks emitted in reverse order."""
    if errors < 0 or errors > n - 1:
        raise InvalidSpec(f"cannot inject {errors} errors over {n} nodes")
    if errors == 0:
        return list(range(1, n + 1))
    cuts = sorted(rng.sample(range(2, n + 1), errors))
    blocks = []
    start = 1
    for cut in cuts + [n + 1]:
        blocks.append(list(range(start, cut)))
        start = cut
    order = [v for block in reversed(blocks) for v in block]
    actual = sum(1 for a, b in zip(order, order[1:]) if b != a + 1)
    assert actual == errors, (order, errors)
    return order


def _route(a, b, obstacles, clearance: float):
    """Straight connector unless it clips an obstacle circle, in which
    case the midpoint is pushed sideways until the bend is clear."""
    def clear(path):
        pts = np.asarray(path)
        for i in range(len(pts) - 1):
            seg = pts[i + 1] - pts[i]
            steps = max(2, int(math.hypot(*seg) / 1.0))
            for k in range(steps + 1):
                p = pts[i] + seg * (k / steps)
                for (ox, oy, orad) in obstacles:
                    if math.hypot(p[0] - ox, p[1] - oy) < orad + clearance:
                        return False
        return True

    direct = [tuple(a), tuple(b)]
    if clear(direct):
        return direct
    mx, my = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    dx, dy = b[0] - a[0], b[1] - a[1]
    norm = math.hypot(dx, dy) or 1.0
    nx, ny = -dy / norm, dx / norm
    for off in (6, -6, 12, -12, 18, -18, 24, -24, 36, -36, 48, -48):
        path = [tuple(a), (mx + nx * off, my + ny * off), tuple(b)]
        if clear(path):
            return path
    return [tuple(a), (mx + nx * 48, my + ny * 48), tuple(b)]


def _gen_trail(params: GenParams, seed: int,
               session_id: str) -> tuple[InkSession, SynthManifest]:
    template = make_trail_template(params.node_count, seed)
    nodes = {r.seq: r.bbox.center for r in template.by_kind("node")}
    node_r = min(template.by_kind("node")[0].bbox.width,
                 template.by_kind("node")[0].bbox.height) / 2.0
    asm = _Assembler(params, seed)
    manifest = SynthManifest("TMT", seed, 0, template=template)

    order = _trail_visit_order(params.node_count, params.trail_errors, asm.rng)
    for a, b in zip(order, order[1:]):
        others = [(nodes[s][0], nodes[s][1], node_r)
                  for s in nodes if s not in (a, b)]
        path = _route(nodes[a], nodes[b], others, clearance=1.0)
        idx = asm.stroke(path)
        manifest.components.append(
            {"kind": "connection", "from": a, "to": b, "stroke_indices": [idx]})
        asm.pause(params.intra_symbol_pause_s)

    manifest.group_count = len(manifest.components)
    manifest.expectations = {
        "visit_order": order,
        "sequencing_errors": params.trail_errors,
        "completed": True,
    }
    manifest.stroke_tremor = asm.tremor_log
    return asm.build(session_id, "TMT", template.page), manifest


def _gen_akt(params: GenParams, seed: int,
             session_id: str) -> tuple[InkSession, SynthManifest]:
    template = make_akt_template()
    targets = template.by_kind("target")
    distractors = template.by_kind("distractor")
    crossed_t = (tuple(range(len(targets))) if params.crossed_targets is None
                 else params.crossed_targets)
    asm = _Assembler(params, seed)
    manifest = SynthManifest("AKT", seed, 0, template=template)

    def cross(region: Region, kind: str):
        b = region.bbox
        i1 = asm.stroke(line_path((b.min_x + 1, b.min_y + 1), (b.max_x - 1, b.max_y - 1)))
        asm.pause(params.intra_symbol_pause_s)
        i2 = asm.stroke(line_path((b.max_x - 1, b.min_y + 1), (b.min_x + 1, b.max_y - 1)))
        asm.pause(params.inter_symbol_pause_s)
        manifest.components.append(
            {"kind": kind, "region": region.region_id,
             "label": "cross_out", "stroke_indices": [i1, i2]})

    for i in crossed_t:
        cross(targets[i], "cross_target")
    for i in params.crossed_distractors:
        cross(distractors[i], "cross_distractor")

    manifest.group_count = len(manifest.components)
    manifest.expectations = {
        "hit_ids": sorted(targets[i].region_id for i in crossed_t),
        "miss_ids": sorted(t.region_id for j, t in enumerate(targets)
                           if j not in crossed_t),
        "false_alarm_ids": sorted(distractors[i].region_id
                                  for i in params.crossed_distractors),
    }
    manifest.stroke_tremor = asm.tremor_log
    return asm.build(session_id, "AKT", template.page), manifest


def _gen_pentagon_copy(test_id: str, params: GenParams, seed: int,
                       session_id: str) -> tuple[InkSession, SynthManifest]:
    template = make_canvas_template(test_id)
    r = params.pentagon_radius_mm
    off = params.pentagon_offset_mm
    center_a = (80.0, 120.0)
    center_b = (80.0 + off, 120.0)
    verts_a = regular_polygon(center_a, r, 5, rotation_deg=0.0)
    verts_b = regular_polygon(center_b, r, 5, rotation_deg=180.0)
    asm = _Assembler(params, seed)
    manifest = SynthManifest(test_id, seed, 0, template=template)

    for verts in (verts_a, verts_b):
        idx = asm.stroke(polygon_path(verts))
        manifest.components.append(
            {"kind": "pentagon", "label": "pentagon", "stroke_indices": [idx]})
        asm.pause(params.inter_symbol_pause_s)

    # tips interpenetrate below 2r; the intersection is a quadrilateral
    # while each tip vertex stays inside the other pentagon's apothem
    ratio = off / r
    intersect = ratio < 2.0
    quadrilateral = 1.0 < ratio < 1.8
    manifest.group_count = 2
    manifest.expectations = {
        "two_pentagons": True,
        "intersect": intersect,
        "intersection_is_quadrilateral": quadrilateral,
        "vertices_a": [list(v) for v in verts_a],
        "vertices_b": [list(v) for v in verts_b],
    }
    manifest.stroke_tremor = asm.tremor_log
    return asm.build(session_id, test_id, template.page), manifest


def _gen_fields(params: GenParams, seed: int,
                session_id: str) -> tuple[InkSession, SynthManifest]:
    template = make_fields_template()
    fields = template.by_kind("input_field")
    filled = (0, 2) if params.filled_fields is None else params.filled_fields
    asm = _Assembler(params, seed)
    manifest = SynthManifest("DemTect", seed, 0, template=template)

    for i in filled:
        idx = asm.stroke(zigzag_path(fields[i].bbox))
        manifest.components.append(
            {"kind": "field_fill", "region": fields[i].region_id,
             "label": None, "stroke_indices": [idx]})
        asm.pause(params.inter_symbol_pause_s)

    manifest.group_count = len(manifest.components)
    manifest.expectations = {
        "filled_ids": sorted(fields[i].region_id for i in filled),
        "empty_ids": sorted(f.region_id for j, f in enumerate(fields)
                            if j not in filled),
    }
    manifest.stroke_tremor = asm.tremor_log
    return asm.build(session_id, "DemTect", template.page), manifest


def _gen_rocf(params: GenParams, seed: int,
              session_id: str) -> tuple[InkSession, SynthManifest]:
    template = make_rocf_template()
    asm = _Assembler(params, seed)
    manifest = SynthManifest("ROCF", seed, 0, template=template)

    def element(region_id: str, label: str, path):
        idx = asm.stroke(path)
        manifest.components.append(
            {"kind": "element", "region": region_id, "label": label,
             "stroke_indices": [idx]})
        asm.pause(params.inter_symbol_pause_s)

    element("el_rect", "rectangle",
            polygon_path([(60, 80), (130, 80), (130, 140), (60, 140)]))
    element("el_circle", "circle", circle_path((170, 105), 12.0))
    element("el_triangle", "triangle",
            polygon_path(regular_polygon((80, 190), 18.0, 3, rotation_deg=-90.0)))
    element("el_line", "line", line_path((120, 165), (190, 195)))

    manifest.group_count = len(manifest.components)
    manifest.expectations = {
        "elements": {"el_rect": "rectangle", "el_circle": "circle",
                     "el_triangle": "triangle", "el_line": "line"},
        "score": 4,
    }
    manifest.stroke_tremor = asm.tremor_log
    return asm.build(session_id, "ROCF", template.page), manifest


# ---------------------------------------------------------------------------
# single labeled shapes (recognizer evaluation)

SHAPE_LABELS = ("line", "circle", "triangle", "rectangle", "diamond",
                "pentagon", "cross_out")


def gen_shape_session(label: str, seed: int, params: GenParams = GenParams(),
                      page: PageSize = A4) -> InkSession:
    """One labeled shape as a single-group session."""
    if label not in SHAPE_LABELS:
        raise InvalidSpec(f"unknown shape label {label!r}")
    rng = random.Random(seed ^ 0x5EED)
    cx = rng.uniform(60.0, page.w_mm - 60.0)
    cy = rng.uniform(60.0, page.h_mm - 60.0)
    asm = _Assembler(params, seed)

    if label == "line":
        length = rng.uniform(20.0, 40.0)
        ang = rng.uniform(0, math.pi)
        dx, dy = math.cos(ang) * length / 2, math.sin(ang) * length / 2
        asm.stroke(line_path((cx - dx, cy - dy), (cx + dx, cy + dy)))
    elif label == "circle":
        asm.stroke(circle_path((cx, cy), rng.uniform(8.0, 20.0),
                               start_deg=rng.uniform(0, 360)))
    elif label == "triangle":
        asm.stroke(polygon_path(regular_polygon(
            (cx, cy), rng.uniform(10.0, 20.0), 3, rng.uniform(0, 360))))
    elif label == "rectangle":
        w = rng.uniform(15.0, 35.0) / 2
        h = rng.uniform(10.0, 25.0) / 2
        rot = math.radians(rng.uniform(-8.0, 8.0))
        corners = [(-w, -h), (w, -h), (w, h), (-w, h)]
        verts = [(cx + x * math.cos(rot) - y * math.sin(rot),
                  cy + x * math.sin(rot) + y * math.cos(rot))
                 for x, y in corners]
        asm.stroke(polygon_path(verts))
    elif label == "diamond":
        half = rng.uniform(12.0, 25.0) / 2
        rot = math.radians(45.0 + rng.uniform(-8.0, 8.0))
        corners = [(-half, -half), (half, -half), (half, half), (-half, half)]
        verts = [(cx + x * math.cos(rot) - y * math.sin(rot),
                  cy + x * math.sin(rot) + y * math.cos(rot))
                 for x, y in corners]
        asm.stroke(polygon_path(verts))
    elif label == "pentagon":
        asm.stroke(polygon_path(regular_polygon(
            (cx, cy), rng.uniform(10.0, 20.0), 5, rng.uniform(0, 360))))
    else:  # cross_out
        length = rng.uniform(15.0, 30.0) / 2
        ang = rng.uniform(0, math.pi)
        for theta in (ang, ang + math.pi / 2 + math.radians(rng.uniform(-20, 20))):
            dx, dy = math.cos(theta) * length, math.sin(theta) * length
            asm.stroke(line_path((cx - dx, cy - dy), (cx + dx, cy + dy)))
            asm.pause(params.intra_symbol_pause_s)

    return asm.build(f"shape-{label}-{seed}", "SHAPE", page)
