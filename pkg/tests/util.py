"""Shared builders for hand-constructed ink in tests."""

from __future__ import annotations

import math

from inkassess.model import InkSession, RawSample, Stroke


def sample(t, x, y, p=0.5, c=True) -> RawSample:
    return RawSample(t, float(x), float(y), p if c else 0.0, c)


def stroke_from_xy(points, t0=0, dt=5000, pressure=0.5, index=0) -> Stroke:
    return Stroke(tuple(
        RawSample(t0 + i * dt, float(x), float(y), pressure, True)
        for i, (x, y) in enumerate(points)), index=index)


def line_samples(a, b, n=20, t0=0, dt=5000, pressure=0.5):
    return [
        RawSample(t0 + i * dt,
                  a[0] + (b[0] - a[0]) * i / (n - 1),
                  a[1] + (b[1] - a[1]) * i / (n - 1),
                  pressure, True)
        for i in range(n)
    ]


def session_of(samples, test_id="CDT", session_id="s") -> InkSession:
    return InkSession.from_samples(samples, session_id=session_id,
                                   test_id=test_id)


def sine_line_stroke(length_mm=100.0, speed=25.0, amp=0.3, freq=8.0,
                     rate=200.0, t0=0, index=0) -> Stroke:
    """Horizontal line with a perpendicular sinusoid, built by hand."""
    duration = length_mm / speed
    n = int(duration * rate) + 1
    samples = []
    for i in range(n):
        t = i / rate
        x = speed * t
        y = 50.0 + amp * math.sin(2 * math.pi * freq * t)
        samples.append(RawSample(t0 + round(t * 1e6), x, y, 0.5, True))
    return Stroke(tuple(samples), index=index)
