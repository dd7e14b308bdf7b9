"""Incremental per-session analysis driving the live protocol events.

The pipeline mirrors batch segmentation exactly (duplicate-timestamp
samples replace the previous one, so a sample only becomes final once a
strictly later one arrives) and reuses the same pure feature/recognizer
functions, which is what makes stream results equal batch results.
"""

from __future__ import annotations

from dataclasses import dataclass

from .battery import NoInk, TestTemplate, score_session
from .config import DEFAULT_ENGINE, EngineConfig
from .features import document_values, gap_features, stroke_features
from .model import (
    InAirGap,
    InkSession,
    PageSize,
    RawSample,
    Stroke,
    resample_uniform,
)
from .recognize import classify_group, group_strokes

RENDER_SPACING_MM = 0.5  # stroke polyline decimation for wire events


@dataclass
class PipelineEvent:
    type: str
    payload: dict


class IncrementalPipeline:
    def __init__(self, session_id: str, test_id: str,
                 subject_pseudonym: str = "anon",
                 page: PageSize = PageSize(210.0, 297.0),
                 source: str = "digital-paper",
                 template: TestTemplate | None = None,
                 target_time: tuple[int, int] = (11, 10),
                 config: EngineConfig = DEFAULT_ENGINE):
        self.session_id = session_id
        self.test_id = test_id
        self.subject_pseudonym = subject_pseudonym
        self.page = page
        self.source = source
        self.template = template
        self.target_time = target_time
        self.config = config

        self._deduped: list[RawSample] = []
        self._processed = 0            # deduped samples already segmented
        self._pending_contact: list[RawSample] = []
        self._pending_hover: list[RawSample] = []
        self.strokes: list[Stroke] = []
        self.gaps: list[InAirGap] = []
        self.stroke_vectors: list[dict] = []
        self.gap_vectors: list[dict] = []
        self._label_cache: dict[tuple[int, ...], object] = {}
        self._groups: list = []
        self._labels: list = []
        self._last_score: dict | None = None

    # -- sample intake ------------------------------------------------------

    def feed_batch(self, samples: list[RawSample]) -> list[PipelineEvent]:
        events: list[PipelineEvent] = []
        for s in samples:
            events.extend(self._feed(s))
        events.append(PipelineEvent("feature_update", self.rolling_document()))
        return events

    def _feed(self, s: RawSample) -> list[PipelineEvent]:
        from .model import DEDUP_TOLERANCE_US, NonMonotonicTimestamp
        if self._deduped:
            prev = self._deduped[-1]
            if s.t < prev.t - DEDUP_TOLERANCE_US:
                raise NonMonotonicTimestamp(
                    f"timestamp {s.t} decreases after {prev.t}")
            if s.t == prev.t:
                self._deduped[-1] = s
                return []
        self._deduped.append(s)
        events: list[PipelineEvent] = []
        # all but the newest sample are final (dedup can no longer touch them)
        while self._processed < len(self._deduped) - 1:
            events.extend(self._absorb(self._deduped[self._processed]))
            self._processed += 1
        return events

    def finish(self) -> list[PipelineEvent]:
        events: list[PipelineEvent] = []
        while self._processed < len(self._deduped):
            events.extend(self._absorb(self._deduped[self._processed]))
            self._processed += 1
        if self._pending_contact:
            events.extend(self._close_stroke())
        elif self._pending_hover:
            self._flush_trailing_hover()
        return events

    def _absorb(self, s: RawSample) -> list[PipelineEvent]:
        if s.contact:
            self._pending_contact.append(s)
            return []
        events: list[PipelineEvent] = []
        if self._pending_contact:
            events.extend(self._close_stroke())
        self._pending_hover.append(s)
        return events

    def _close_stroke(self) -> list[PipelineEvent]:
        stroke = Stroke(tuple(self._pending_contact), index=len(self.strokes))
        self._pending_contact = []
        hover = tuple(self._pending_hover)
        self._pending_hover = []
        if self.strokes:
            self.gaps.append(InAirGap(self.strokes[-1].end_t, stroke.start_t,
                                      hover))
        elif hover:
            self.gaps.append(InAirGap(hover[0].t, stroke.start_t, hover))
        if len(self.gaps) > len(self.gap_vectors):
            gap = self.gaps[-1]
            vec = gap_features(gap, len(self.gaps) - 1, self.session_id,
                               self.config)
            self.gap_vectors.append(vec.values)
        self.strokes.append(stroke)
        vec = stroke_features(stroke, self.session_id, self.config)
        self.stroke_vectors.append(vec.values)

        render = resample_uniform(stroke, RENDER_SPACING_MM)
        events = [PipelineEvent("stroke_completed", {
            "stroke_index": stroke.index,
            "points": [[float(x), float(y)] for x, y in render.xy],
            "features": vec.values,
            "document": self.rolling_document(),
        })]
        events.extend(self._reclassify())
        events.extend(self._rescore())
        return events

    def _flush_trailing_hover(self) -> None:
        hover = tuple(self._pending_hover)
        self._pending_hover = []
        if not hover:
            return
        if self.strokes:
            self.gaps.append(InAirGap(self.strokes[-1].end_t, hover[-1].t, hover))
        else:
            self.gaps.append(InAirGap(hover[0].t, hover[-1].t, hover))
        gap = self.gaps[-1]
        vec = gap_features(gap, len(self.gaps) - 1, self.session_id, self.config)
        self.gap_vectors.append(vec.values)

    # -- derived views ------------------------------------------------------

    def partial_session(self) -> InkSession:
        return InkSession(self.session_id, self.test_id,
                          self.subject_pseudonym, self.page, self.source,
                          tuple(self.strokes), tuple(self.gaps))

    def rolling_document(self) -> dict:
        on_us = sum(st.duration_us for st in self.strokes)
        air_us = sum(g.duration_us for g in self.gaps)
        if self._deduped:
            span_us = self._deduped[-1].t - self._deduped[0].t
        else:
            span_us = 0
        return document_values(self.stroke_vectors, self.gap_vectors,
                               on_us, air_us, span_us)

    def _reclassify(self) -> list[PipelineEvent]:
        session = self.partial_session()
        groups = group_strokes(session, config=self.config)
        if not groups:
            return []
        labels = []
        for g in groups:
            label = self._label_cache.get(g.stroke_indices)
            if label is None:
                label = classify_group(g, session, self.config)
                self._label_cache[g.stroke_indices] = label
            labels.append(label)
        self._groups = groups
        self._labels = labels
        group, label = groups[-1], labels[-1]
        return [PipelineEvent("classification", {
            "group_id": group.group_id,
            "label": label.label,
            "confidence": label.confidence,
            "stroke_indices": list(group.stroke_indices),
            "bbox": [group.bbox.min_x, group.bbox.min_y,
                     group.bbox.max_x, group.bbox.max_y],
            "evidence": dict(sorted(label.evidence.items())),
        })]

    def _rescore(self) -> list[PipelineEvent]:
        if self.template is None:
            return []
        try:
            score = score_session(self.partial_session(), self.template,
                                  self.target_time, self.config,
                                  self._groups, self._labels)
        except NoInk:
            return []
        if score == self._last_score:
            return []
        self._last_score = score
        return [PipelineEvent("score_update", {"score": score})]

    def all_samples(self) -> list[RawSample]:
        return list(self._deduped)
