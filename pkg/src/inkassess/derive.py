"""Batch derivation: session bytes in, canonical derived artifacts out.

Everything persisted for a session (derived.json, graph.nt) flows
through derive_session, so the live service, the offline rebuild
command and the tests share one code path and byte-identical output.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import ENGINE_VERSION
from .battery import SummativeStats, TestTemplate, score_session, summarize
from .config import DEFAULT_ENGINE, EngineConfig
from .features import FeatureVector, session_features
from .graph import InterpretationGraph, serialize, to_triples
from .model import InkSession, resample_uniform
from .recognize import ShapeLabel, StrokeGroup, classify_group, group_strokes


@dataclass(frozen=True)
class ReplaySuggestion:
    """An interval worth slow-motion review, with the triggering evidence."""

    start_us: int
    end_us: int
    reason: str  # long_pause | correction | high_tremor
    evidence: dict[str, float]


def _overlap_fraction(stroke, earlier, config: EngineConfig) -> float:
    """Fraction of the stroke's resampled points lying within the
    overdraw distance of the earlier stroke's polyline."""
    pts = resample_uniform(stroke, config.resample_spacing_mm).xy
    seg = earlier.xy()
    if len(seg) == 1:
        d = np.hypot(pts[:, 0] - seg[0, 0], pts[:, 1] - seg[0, 1])
        return float(np.mean(d <= config.correction_distance_mm))
    a = seg[:-1]
    b = seg[1:]
    ab = b - a
    ab_len2 = np.sum(ab ** 2, axis=1)
    ab_len2[ab_len2 == 0] = 1.0
    close = 0
    for p in pts:
        t = np.clip(np.sum((p - a) * ab, axis=1) / ab_len2, 0.0, 1.0)
        proj = a + ab * t[:, None]
        d2 = np.sum((proj - p) ** 2, axis=1)
        if d2.min() <= config.correction_distance_mm ** 2:
            close += 1
    return close / len(pts)


def suggest_replays(session: InkSession,
                    stroke_vectors: list[FeatureVector] | None = None,
                    config: EngineConfig = DEFAULT_ENGINE,
                    ) -> list[ReplaySuggestion]:
    """System-initiative intervals: long pauses, overdraw corrections,
    and strokes whose tremor stands out within the session."""
    out: list[ReplaySuggestion] = []
    if not session.strokes:
        return out
    first_ink = session.strokes[0].start_t
    last_ink = session.strokes[-1].end_t

    for gap in session.gaps:
        if gap.start_t < first_ink or gap.end_t > last_ink:
            continue
        duration_s = gap.duration_us / 1e6
        if duration_s > config.long_pause_s:
            out.append(ReplaySuggestion(gap.start_t, gap.end_t, "long_pause",
                                        {"duration_s": duration_s}))

    age_us = round(config.correction_age_s * 1e6)
    for j, stroke in enumerate(session.strokes):
        best = None
        sb = stroke.bbox()
        for i in range(j):
            earlier = session.strokes[i]
            if stroke.start_t - earlier.end_t < age_us:
                continue
            if sb.gap_to(earlier.bbox()) > config.correction_distance_mm:
                continue
            frac = _overlap_fraction(stroke, earlier, config)
            if frac >= config.correction_overlap_frac:
                if best is None or frac > best[0]:
                    best = (frac, i)
        if best is not None:
            out.append(ReplaySuggestion(
                stroke.start_t, stroke.end_t, "correction",
                {"overlap_fraction": best[0], "earlier_stroke": float(best[1]),
                 "stroke": float(j)}))

    if stroke_vectors is None:
        _, stroke_vectors, _ = session_features(session, config)
    tremors = [v.values["tremor_index_mm"] for v in stroke_vectors]
    if tremors:
        cutoff = max(float(np.percentile(tremors, config.tremor_percentile)),
                     config.tremor_floor_mm)
        for stroke, value in zip(session.strokes, tremors):
            if value > cutoff:
                out.append(ReplaySuggestion(
                    stroke.start_t, stroke.end_t, "high_tremor",
                    {"tremor_index_mm": value, "cutoff_mm": cutoff}))

    out.sort(key=lambda s: (s.start_us, s.end_us, s.reason))
    return out


@dataclass(frozen=True)
class DerivedSession:
    session: InkSession
    document: FeatureVector
    stroke_vectors: list[FeatureVector]
    gap_vectors: list[FeatureVector]
    groups: list[StrokeGroup]
    labels: list[ShapeLabel]
    score: dict | None
    summary: SummativeStats
    suggestions: list[ReplaySuggestion]
    graph: InterpretationGraph


def derive_session(session: InkSession,
                   template: TestTemplate | None = None,
                   target_time: tuple[int, int] = (11, 10),
                   config: EngineConfig = DEFAULT_ENGINE) -> DerivedSession:
    document, stroke_vecs, gap_vecs = session_features(session, config)
    groups = group_strokes(session, config=config)
    labels = [classify_group(g, session, config) for g in groups]
    score = None
    if template is not None and session.strokes:
        score = score_session(session, template, target_time, config)
    summary = summarize(session, score or {}, config, document_features=document)
    suggestions = suggest_replays(session, stroke_vecs, config)
    graph = to_triples(session, groups, labels, score, document, summary)
    return DerivedSession(session, document, stroke_vecs, gap_vecs,
                          groups, labels, score, summary, suggestions, graph)


def _round_trip_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return repr(value)
    return value


def derived_to_dict(d: DerivedSession) -> dict:
    session = d.session
    return {
        "engine_version": ENGINE_VERSION,
        "session": {
            "session_id": session.session_id,
            "test_id": session.test_id,
            "subject_pseudonym": session.subject_pseudonym,
            "page": {"w_mm": session.page.w_mm, "h_mm": session.page.h_mm},
            "source": session.source,
            "stroke_count": len(session.strokes),
            "gap_count": len(session.gaps),
            "span_us": session.span_us,
        },
        "features": {
            "document": d.document.values,
            "strokes": [v.values for v in d.stroke_vectors],
            "gaps": [v.values for v in d.gap_vectors],
        },
        "groups": [
            {
                "group_id": g.group_id,
                "stroke_indices": list(g.stroke_indices),
                "bbox": [g.bbox.min_x, g.bbox.min_y, g.bbox.max_x, g.bbox.max_y],
                "label": lab.label,
                "confidence": lab.confidence,
                "evidence": {k: _round_trip_safe(v)
                             for k, v in sorted(lab.evidence.items())},
            }
            for g, lab in zip(d.groups, d.labels)
        ],
        "score": d.score,
        "summary": {
            "test_id": d.summary.test_id,
            "session_id": d.summary.session_id,
            "score": d.summary.score,
            "completion_time_s": d.summary.completion_time_s,
            "flags": list(d.summary.flags),
        },
        "suggestions": [dataclasses.asdict(s) for s in d.suggestions],
    }


def derived_json_bytes(d: DerivedSession) -> bytes:
    return (json.dumps(derived_to_dict(d), sort_keys=True, indent=2,
                       ensure_ascii=False) + "\n").encode("utf-8")


def graph_bytes(d: DerivedSession) -> bytes:
    return serialize(d.graph)
