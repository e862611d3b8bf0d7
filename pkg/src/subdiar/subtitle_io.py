"""Subtitle and result file I/O: SRT parsing, annotation CSV, and RTTM.

All writers are byte-stable: identical inputs produce identical output bytes,
so result files can be diffed and used as golden files.
"""

from __future__ import annotations

import csv
import io
import logging
import re
from dataclasses import dataclass
from typing import IO, Iterable, Sequence, Union

from .model import Assignment, Line, Origin, Program, SpeakerId, Stage

logger = logging.getLogger(__name__)

_TIMESTAMP_RE = re.compile(
    r"^\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*-->\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*$"
)

ANNOTATION_HEADER = [
    "line_id",
    "start_ms",
    "end_ms",
    "speaker_id",
    "origin",
    "stage",
    "confidence",
    "text",
]


class SubtitleParseError(ValueError):
    """Raised for malformed subtitle or result files."""


@dataclass(frozen=True)
class RttmRecord:
    """One RTTM SPEAKER record (times in seconds, 3-decimal precision)."""

    file_id: str
    onset: float
    duration: float
    speaker_label: str

    def __post_init__(self):
        if self.onset < 0:
            raise ValueError(f"onset must be non-negative, got {self.onset}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")


def _read_text(source: Union[str, IO[str]]) -> str:
    if hasattr(source, "read"):
        return source.read()
    return source


def _parse_timestamp_line(raw: str, block_no: int) -> tuple[int, int]:
    m = _TIMESTAMP_RE.match(raw)
    if m is None:
        raise SubtitleParseError(
            f"cue {block_no}: malformed timestamp line {raw!r} "
            "(expected 'HH:MM:SS,mmm --> HH:MM:SS,mmm')"
        )
    h1, m1, s1, ms1, h2, m2, s2, ms2 = (int(g) for g in m.groups())
    start = ((h1 * 60 + m1) * 60 + s1) * 1000 + ms1
    end = ((h2 * 60 + m2) * 60 + s2) * 1000 + ms2
    return start, end


def parse_srt(source: Union[str, IO[str]], program_id: str = "program") -> Program:
    """Parse SRT text into a Program.

    Cue blocks are separated by blank lines; each block is an optional numeric
    index, a timestamp line, and zero or more text lines (joined with '\\n').
    The source cue index is ignored for identity: line_ids are assigned
    positionally after sorting cues by start time (ties keep source order).
    Duplicate source indices are tolerated with a warning.
    """
    text = _read_text(source)
    if text.startswith("﻿"):
        text = text[1:]
    text = text.replace("\r\n", "\n").replace("\r", "\n")

    cues: list[tuple[int, int, str]] = []
    seen_indices: set[int] = set()
    block_no = 0
    for block in re.split(r"\n\s*\n", text):
        lines = [ln for ln in block.split("\n")]
        while lines and not lines[0].strip():
            lines.pop(0)
        while lines and not lines[-1].strip():
            lines.pop()
        if not lines:
            continue
        block_no += 1

        if _TIMESTAMP_RE.match(lines[0]):
            ts_line, text_lines = lines[0], lines[1:]
        else:
            index_raw = lines[0].strip()
            if not index_raw.isdigit():
                raise SubtitleParseError(
                    f"cue {block_no}: expected cue index or timestamp, got {index_raw!r}"
                )
            index = int(index_raw)
            if index in seen_indices:
                logger.warning(
                    "duplicate cue index %d in %s; keeping both cues", index, program_id
                )
            seen_indices.add(index)
            if len(lines) < 2:
                raise SubtitleParseError(f"cue {block_no}: missing timestamp line")
            ts_line, text_lines = lines[1], lines[2:]

        start, end = _parse_timestamp_line(ts_line, block_no)
        if end <= start:
            raise SubtitleParseError(
                f"cue {block_no}: end ({end} ms) is not after start ({start} ms)"
            )
        cues.append((start, end, "\n".join(text_lines)))

    cues.sort(key=lambda c: c[0])
    lines = tuple(
        Line(line_id=i, start=start, end=end, text=cue_text)
        for i, (start, end, cue_text) in enumerate(cues)
    )
    return Program(program_id=program_id, lines=lines)


def _format_timestamp(ms: int) -> str:
    h, rem = divmod(ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, milli = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{milli:03d}"


def write_srt(program: Program, sink: IO[str]) -> None:
    """Write a Program back out as SRT (1-based cue indices)."""
    for i, line in enumerate(program.lines, start=1):
        sink.write(f"{i}\n")
        sink.write(f"{_format_timestamp(line.start)} --> {_format_timestamp(line.end)}\n")
        sink.write(line.text + "\n\n")


def write_annotation(
    program: Program, assignments: dict[int, Assignment], sink: IO[str]
) -> None:
    """Write one CSV record per line: timing, speaker, provenance, text.

    Records are ordered by line_id. Raises ValueError if any program line
    lacks an assignment.
    """
    missing = [ln.line_id for ln in program.lines if ln.line_id not in assignments]
    if missing:
        raise ValueError(f"assignments missing for lines {missing[:5]}")
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(ANNOTATION_HEADER)
    for line in program.lines:
        a = assignments[line.line_id]
        writer.writerow(
            [
                line.line_id,
                line.start,
                line.end,
                a.speaker.id,
                a.speaker.origin.value,
                a.stage.value,
                repr(a.confidence),
                line.text,
            ]
        )


def read_annotation(source: Union[str, IO[str]]) -> tuple[Program, dict[int, Assignment]]:
    """Parse an annotation CSV back into a Program plus its assignments."""
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or rows[0] != ANNOTATION_HEADER:
        raise SubtitleParseError("annotation file missing the expected header")
    lines = []
    assignments: dict[int, Assignment] = {}
    for row in rows[1:]:
        if len(row) != len(ANNOTATION_HEADER):
            raise SubtitleParseError(f"annotation row has {len(row)} fields: {row!r}")
        line_id = int(row[0])
        lines.append(Line(line_id=line_id, start=int(row[1]), end=int(row[2]), text=row[7]))
        assignments[line_id] = Assignment(
            line_id=line_id,
            speaker=SpeakerId(id=int(row[3]), origin=Origin(row[4])),
            confidence=float(row[6]),
            stage=Stage(row[5]),
        )
    return Program(program_id="annotation", lines=tuple(lines)), assignments


def speaker_label(speaker_id: int) -> str:
    return f"spk{speaker_id}"


def write_rttm(
    program: Program, assignments: dict[int, Assignment], file_id: str
) -> str:
    """Render assignments as RTTM text, one SPEAKER record per line.

    Format: ``SPEAKER <file_id> 1 <onset> <dur> <NA> <NA> <spk> <NA> <NA>``
    with onset/duration in seconds at 3 decimals.
    """
    out: list[str] = []
    for line in program.lines:
        a = assignments[line.line_id]
        onset = line.start / 1000.0
        dur = (line.end - line.start) / 1000.0
        out.append(
            f"SPEAKER {file_id} 1 {onset:.3f} {dur:.3f} <NA> <NA> "
            f"{speaker_label(a.speaker.id)} <NA> <NA>"
        )
    return "\n".join(out) + ("\n" if out else "")


def parse_rttm(source: Union[str, IO[str]]) -> list[RttmRecord]:
    """Parse RTTM text into records; exact inverse of write_rttm output."""
    records: list[RttmRecord] = []
    for lineno, raw in enumerate(_read_text(source).splitlines(), start=1):
        if not raw.strip():
            continue
        fields = raw.split()
        if len(fields) != 10:
            raise SubtitleParseError(
                f"RTTM line {lineno}: expected 10 fields, got {len(fields)}"
            )
        if fields[0] != "SPEAKER":
            raise SubtitleParseError(f"RTTM line {lineno}: expected SPEAKER record")
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError as exc:
            raise SubtitleParseError(
                f"RTTM line {lineno}: non-numeric onset/duration"
            ) from exc
        records.append(
            RttmRecord(
                file_id=fields[1],
                onset=onset,
                duration=duration,
                speaker_label=fields[7],
            )
        )
    return records
