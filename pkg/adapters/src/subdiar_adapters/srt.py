"""Minimal SRT cue reader.

The adapters only need cue timing, so this stays deliberately small; the
diarization pipeline has its own full parser. Cues are returned sorted by
start time with positional ids, matching the pipeline's line numbering.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

_TIMESTAMP_RE = re.compile(
    r"^\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*-->\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*$"
)


@dataclass(frozen=True)
class Cue:
    line_id: int
    start_ms: int
    end_ms: int
    text: str


def read_cues(path: str | Path) -> list[Cue]:
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("﻿"):
        text = text[1:]
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    raw: list[tuple[int, int, str]] = []
    for block in re.split(r"\n\s*\n", text):
        lines = [ln for ln in block.split("\n") if ln.strip() or ln == ""]
        lines = [ln for ln in lines if ln.strip()]
        if not lines:
            continue
        if _TIMESTAMP_RE.match(lines[0]):
            ts, body = lines[0], lines[1:]
        else:
            if len(lines) < 2:
                raise ValueError(f"cue block missing timestamp: {block!r}")
            ts, body = lines[1], lines[2:]
        m = _TIMESTAMP_RE.match(ts)
        if m is None:
            raise ValueError(f"malformed timestamp line: {ts!r}")
        h1, m1, s1, ms1, h2, m2, s2, ms2 = (int(g) for g in m.groups())
        start = ((h1 * 60 + m1) * 60 + s1) * 1000 + ms1
        end = ((h2 * 60 + m2) * 60 + s2) * 1000 + ms2
        if end <= start:
            raise ValueError(f"cue ends before it starts: {ts!r}")
        raw.append((start, end, "\n".join(body)))
    raw.sort(key=lambda c: c[0])
    return [Cue(i, start, end, body) for i, (start, end, body) in enumerate(raw)]
