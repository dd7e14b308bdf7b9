#!/usr/bin/env python3
"""Recognizer accuracy sweep over tremor amplitudes.

Usage: python scripts/shape_accuracy.py [n_per_amplitude]
"""

import sys
from collections import Counter

from inkassess.recognize import classify_group, group_strokes
from inkassess.synth import SHAPE_LABELS, GenParams, gen_shape_session


def accuracy(params: GenParams, count: int, seed0: int):
    correct = 0
    confusions: Counter = Counter()
    for i in range(count):
        want = SHAPE_LABELS[i % len(SHAPE_LABELS)]
        session = gen_shape_session(want, seed=seed0 + i, params=params)
        groups = group_strokes(session)
        got = (classify_group(groups[0], session).label
               if len(groups) == 1 else "split")
        if got == want:
            correct += 1
        else:
            confusions[(want, got)] += 1
    return correct / count, confusions


def main() -> None:
    count = int(sys.argv[1]) if len(sys.argv) > 1 else 350
    for amp in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
        params = GenParams(speed_mm_s=60.0, jitter_mm=0.1,
                           tremor_amp_mm=amp, tremor_freq_hz=8.0)
        acc, confusions = accuracy(params, count, seed0=50_000)
        worst = ", ".join(f"{a}->{b}:{n}"
                          for (a, b), n in confusions.most_common(3))
        print(f"tremor {amp:.1f} mm: {acc:6.1%}   {worst}")


if __name__ == "__main__":
    main()
