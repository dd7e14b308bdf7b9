"""Core pen-input data model: samples, strokes, in-air gaps, sessions.

Units are millimeters and microseconds throughout; pressure is normalized
to [0, 1]. All types are immutable value objects and safe to share across
threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INK_JSON_FORMAT = "ink-json"
INK_JSON_VERSION = 1

SOURCES = ("digital-paper", "tablet-stylus")

#: consecutive samples closer in time than this are considered duplicates
DEDUP_TOLERANCE_US = 0


class NonMonotonicTimestamp(ValueError):
    """Raised when a sample stream's timestamps decrease."""


class EmptyInput(ValueError):
    """Raised when an operation requires at least one sample."""


class InkFormatError(ValueError):
    """Raised on malformed or unsupported ink-json input."""


@dataclass(frozen=True, slots=True)
class RawSample:
    """One time-stamped pen event.

    t is microseconds since session start; x/y are page millimeters;
    pressure is normalized force; contact tells whether the pen touches
    the surface (hover samples carry pressure 0).
    """

    t: int
    x: float
    y: float
    pressure: float
    contact: bool

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")
        if not 0.0 <= self.pressure <= 1.0:
            raise ValueError(f"pressure {self.pressure} outside [0, 1]")
        if not self.contact and self.pressure != 0.0:
            raise ValueError("hover sample with nonzero pressure")


@dataclass(frozen=True, slots=True)
class BBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if self.max_x < self.min_x or self.max_y < self.min_y:
            raise ValueError("bbox max < min")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)

    def union(self, other: "BBox") -> "BBox":
        return BBox(
            min(self.min_x, other.min_x),
            min(self.min_y, other.min_y),
            max(self.max_x, other.max_x),
            max(self.max_y, other.max_y),
        )

    def gap_to(self, other: "BBox") -> float:
        """Euclidean distance between two boxes (0 when they overlap)."""
        dx = max(0.0, max(self.min_x, other.min_x) - min(self.max_x, other.max_x))
        dy = max(0.0, max(self.min_y, other.min_y) - min(self.max_y, other.max_y))
        return math.hypot(dx, dy)

    def contains(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y


@dataclass(frozen=True)
class Stroke:
    """Maximal run of contact samples, pen-down to pen-up."""

    samples: tuple[RawSample, ...]
    index: int

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("stroke needs at least one sample")
        for s in self.samples:
            if not s.contact:
                raise ValueError("stroke contains a hover sample")
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("stroke timestamps not strictly increasing")

    @property
    def start_t(self) -> int:
        return self.samples[0].t

    @property
    def end_t(self) -> int:
        return self.samples[-1].t

    @property
    def duration_us(self) -> int:
        return self.end_t - self.start_t

    def xy(self) -> np.ndarray:
        """Coordinates as an (n, 2) float array."""
        return np.array([(s.x, s.y) for s in self.samples], dtype=np.float64)

    def t_us(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=np.int64)

    def pressures(self) -> np.ndarray:
        return np.array([s.pressure for s in self.samples], dtype=np.float64)

    def path_length(self) -> float:
        return polyline_length(self.xy())

    def displacement(self) -> float:
        a, b = self.samples[0], self.samples[-1]
        return math.hypot(b.x - a.x, b.y - a.y)

    def bbox(self) -> BBox:
        xy = self.xy()
        return BBox(
            float(xy[:, 0].min()), float(xy[:, 1].min()),
            float(xy[:, 0].max()), float(xy[:, 1].max()),
        )


@dataclass(frozen=True)
class InAirGap:
    """Pen-up interval between strokes or at a session boundary.

    Duration is defined by stroke boundary timestamps so that in-air
    statistics work even when the pen reports no hover samples.
    """

    start_t: int
    end_t: int
    hover_samples: tuple[RawSample, ...] = ()

    def __post_init__(self) -> None:
        if self.end_t < self.start_t:
            raise ValueError("gap end before start")

    @property
    def duration_us(self) -> int:
        return self.end_t - self.start_t


@dataclass(frozen=True)
class PageSize:
    w_mm: float
    h_mm: float


@dataclass(frozen=True)
class InkSession:
    """A complete recorded test run: strokes and gaps plus metadata."""

    session_id: str
    test_id: str
    subject_pseudonym: str
    page: PageSize
    source: str
    strokes: tuple[Stroke, ...] = ()
    gaps: tuple[InAirGap, ...] = ()

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    @classmethod
    def from_samples(
        cls,
        samples: Sequence[RawSample],
        *,
        session_id: str,
        test_id: str,
        subject_pseudonym: str = "anon",
        page: PageSize = PageSize(210.0, 297.0),
        source: str = "digital-paper",
    ) -> "InkSession":
        strokes, gaps = segment_strokes(samples)
        return cls(session_id, test_id, subject_pseudonym, page, source,
                   tuple(strokes), tuple(gaps))

    def all_samples(self) -> list[RawSample]:
        """Original sample stream, reconstructed from strokes and gaps."""
        return flatten_segments(self.strokes, self.gaps)

    @property
    def first_t(self) -> int:
        samples = self.all_samples()
        if not samples:
            return 0
        return samples[0].t

    @property
    def last_t(self) -> int:
        samples = self.all_samples()
        if not samples:
            return 0
        return samples[-1].t

    @property
    def span_us(self) -> int:
        samples = self.all_samples()
        if not samples:
            return 0
        return samples[-1].t - samples[0].t


def segment_strokes(
    samples: Sequence[RawSample],
) -> tuple[list[Stroke], list[InAirGap]]:
    """Partition a sample stream into strokes and in-air gaps.

    Consecutive samples with equal timestamps are merged keeping the
    last; a decreasing timestamp raises NonMonotonicTimestamp. Every
    input sample (after dedup) lands in exactly one stroke or one gap's
    hover list, and concatenating the segments in time order reproduces
    the stream.
    """
    deduped: list[RawSample] = []
    for s in samples:
        if deduped:
            prev_t = deduped[-1].t
            if s.t < prev_t - DEDUP_TOLERANCE_US:
                raise NonMonotonicTimestamp(
                    f"timestamp {s.t} decreases after {prev_t}")
            if s.t == prev_t:
                deduped[-1] = s
                continue
        deduped.append(s)

    runs: list[list[RawSample]] = []
    for s in deduped:
        if runs and runs[-1][0].contact == s.contact:
            runs[-1].append(s)
        else:
            runs.append([s])

    strokes: list[Stroke] = []
    gaps: list[InAirGap] = []
    pending_hover: list[RawSample] = []
    for run in runs:
        if run[0].contact:
            stroke = Stroke(tuple(run), index=len(strokes))
            if strokes:
                # interior gap, hover samples attached if any
                gaps.append(InAirGap(strokes[-1].end_t, stroke.start_t,
                                     tuple(pending_hover)))
            elif pending_hover:
                # leading gap: stream starts in the air
                gaps.append(InAirGap(pending_hover[0].t, stroke.start_t,
                                     tuple(pending_hover)))
            strokes.append(stroke)
            pending_hover = []
        else:
            pending_hover = run
    if pending_hover:
        if strokes:
            gaps.append(InAirGap(strokes[-1].end_t, pending_hover[-1].t,
                                 tuple(pending_hover)))
        else:
            gaps.append(InAirGap(pending_hover[0].t, pending_hover[-1].t,
                                 tuple(pending_hover)))
    return strokes, gaps


def flatten_segments(
    strokes: Iterable[Stroke], gaps: Iterable[InAirGap]
) -> list[RawSample]:
    """Inverse of segment_strokes: the original stream in time order."""
    keyed: list[tuple[int, int, tuple[RawSample, ...]]] = []
    for st in strokes:
        keyed.append((st.start_t, 0, st.samples))
    for g in gaps:
        if g.hover_samples:
            keyed.append((g.hover_samples[0].t, 1, g.hover_samples))
    keyed.sort(key=lambda k: (k[0], k[1]))
    out: list[RawSample] = []
    for _, _, chunk in keyed:
        out.extend(chunk)
    return out


def polyline_length(xy: np.ndarray) -> float:
    if len(xy) < 2:
        return 0.0
    return float(np.sum(np.hypot(np.diff(xy[:, 0]), np.diff(xy[:, 1]))))


@dataclass(frozen=True)
class ResampledPath:
    """Stroke geometry resampled at uniform arc-length spacing.

    xy is (n, 2); t is interpolated microseconds (float); s is the
    arc-length position of each point along the original polyline.
    """

    xy: np.ndarray
    t: np.ndarray
    s: np.ndarray
    spacing: float
    closed: bool = field(default=False)

    def __len__(self) -> int:
        return len(self.xy)


def resample_uniform(stroke: Stroke, spacing: float) -> ResampledPath:
    """Resample a stroke to points every `spacing` mm of arc length.

    First and last output points equal the stroke endpoints. A stroke
    whose samples all coincide yields its single point.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    xy = stroke.xy()
    t = stroke.t_us().astype(np.float64)
    seg = np.hypot(np.diff(xy[:, 0]), np.diff(xy[:, 1]))
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    total = float(cum[-1])
    if total == 0.0:
        return ResampledPath(xy[:1].copy(), t[:1].copy(),
                             np.zeros(1), spacing)

    n_whole = int(math.floor(total / spacing + 1e-12))
    targets = np.arange(n_whole + 1, dtype=np.float64) * spacing
    if total - targets[-1] > 1e-9:
        targets = np.concatenate((targets, [total]))
    else:
        targets[-1] = total

    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    seg_len = seg[idx]
    frac = np.where(seg_len > 0, (targets - cum[idx]) / np.where(seg_len > 0, seg_len, 1.0), 0.0)
    pts = xy[idx] + (xy[idx + 1] - xy[idx]) * frac[:, None]
    ts = t[idx] + (t[idx + 1] - t[idx]) * frac
    # pin the endpoints exactly
    pts[0] = xy[0]
    pts[-1] = xy[-1]
    ts[0] = t[0]
    ts[-1] = t[-1]
    return ResampledPath(pts, ts, targets, spacing)


def bbox_of(strokes: Iterable[Stroke]) -> BBox:
    """Tight axis-aligned bounds over every sample of the given strokes."""
    arrays = [st.xy() for st in strokes]
    if not arrays:
        raise EmptyInput("no samples")
    allxy = np.vstack(arrays)
    return BBox(
        float(allxy[:, 0].min()), float(allxy[:, 1].min()),
        float(allxy[:, 0].max()), float(allxy[:, 1].max()),
    )


# ---------------------------------------------------------------------------
# ink-json v1

def session_to_inkjson(session: InkSession) -> dict:
    return {
        "format": INK_JSON_FORMAT,
        "version": INK_JSON_VERSION,
        "session_id": session.session_id,
        "test_id": session.test_id,
        "subject_pseudonym": session.subject_pseudonym,
        "page": {"w_mm": session.page.w_mm, "h_mm": session.page.h_mm},
        "source": session.source,
        "samples": [
            {"t": s.t, "x": s.x, "y": s.y, "p": s.pressure, "c": s.contact}
            for s in session.all_samples()
        ],
    }


def session_from_inkjson(obj: dict) -> InkSession:
    if not isinstance(obj, dict):
        raise InkFormatError("ink-json document must be an object")
    if obj.get("format") != INK_JSON_FORMAT:
        raise InkFormatError(f"unknown format {obj.get('format')!r}")
    if obj.get("version") != INK_JSON_VERSION:
        raise InkFormatError(f"unsupported version {obj.get('version')!r}")
    try:
        page = PageSize(float(obj["page"]["w_mm"]), float(obj["page"]["h_mm"]))
        samples = [
            RawSample(int(s["t"]), float(s["x"]), float(s["y"]),
                      float(s["p"]), bool(s["c"]))
            for s in obj["samples"]
        ]
        return InkSession.from_samples(
            samples,
            session_id=str(obj["session_id"]),
            test_id=str(obj["test_id"]),
            subject_pseudonym=str(obj["subject_pseudonym"]),
            page=page,
            source=str(obj["source"]),
        )
    except NonMonotonicTimestamp:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InkFormatError(f"malformed ink-json: {exc}") from exc


def load_inkjson(path) -> InkSession:
    with open(path, "r", encoding="utf-8") as fh:
        return session_from_inkjson(json.load(fh))


def dump_inkjson(session: InkSession, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(session_to_inkjson(session), fh, sort_keys=True)
        fh.write("\n")
