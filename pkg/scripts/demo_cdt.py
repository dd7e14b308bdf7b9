#!/usr/bin/env python3
"""End-to-end demo: synthesize a clock drawing, analyze and score it.

Usage: python scripts/demo_cdt.py [seed] [tremor_amp_mm]
"""

import json
import sys

from inkassess.battery import score_cdt
from inkassess.derive import derive_session, suggest_replays
from inkassess.synth import GenParams, gen_test_session


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    tremor = float(sys.argv[2]) if len(sys.argv) > 2 else 0.0
    params = GenParams(tremor_amp_mm=tremor, tremor_freq_hz=8.0,
                       inject_correction=tremor > 0)
    session, manifest = gen_test_session("CDT", params, seed=seed)

    derived = derive_session(session, manifest.template)
    print(f"session {session.session_id}: {len(session.strokes)} strokes, "
          f"{session.span_us / 1e6:.1f}s span")
    print("groups:", [lab.label for lab in derived.labels])

    result = score_cdt(session, manifest.template)
    print("clock score:", json.dumps({
        "contour_present": result.contour_present,
        "contour_closed": result.contour_closed,
        "mark_count": result.mark_count,
        "marks_well_placed": result.marks_well_placed,
        "hands_present": result.hands_present,
        "hands_correct": result.hands_correct,
        "total": result.total,
    }, indent=2))

    doc = derived.document.values
    print(f"on paper {doc['total_on_paper_s']:.2f}s, "
          f"in air {doc['total_in_air_s']:.2f}s, "
          f"mean tremor {doc['stroke_mean_tremor_index_mm']:.3f}mm")

    for sug in suggest_replays(session):
        print(f"replay suggestion: {sug.reason} "
              f"[{sug.start_us / 1e6:.2f}s .. {sug.end_us / 1e6:.2f}s] "
              f"{sug.evidence}")


if __name__ == "__main__":
    main()
