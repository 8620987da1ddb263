"""Flow-normalized sickness-score transformation over participant records.

Each participant's questionnaire total and subscores are rescaled by
their susceptibility weight within their condition group and divided by
the optical flow they were exposed to, yielding scores per unit of
flow.  Statistical testing is out of scope; the CLI emits the
transformed table as CSV for external tools.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from panoflow.errors import ValidationError

GROUPS = ("GR", "NR")
CSV_COLUMNS = ["id", "group", "K", "N", "O", "D", "MS", "OF"]
OUTPUT_COLUMNS = CSV_COLUMNS + ["K_OF", "N_OF", "O_OF", "D_OF"]
DEFAULT_MIN_OF = 1000.0


@dataclass(frozen=True)
class ParticipantRecord:
    """One participant's questionnaire scores and session flow exposure.

    OF is the participant's cumulative per-frame perceived flow over the
    session (`session_summary(...)["sum"]`); a mean-based exposure works
    too as long as the whole table uses one convention.
    """

    id: str
    group: str
    K: float
    N: float
    O: float
    D: float
    MS: float
    OF: float

    def __post_init__(self) -> None:
        if self.group not in GROUPS:
            raise ValidationError(f"group must be one of {GROUPS}, got {self.group!r}")
        for name in ("K", "N", "O", "D"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.MS <= 0:
            raise ValidationError("MS must be positive")
        if self.OF <= 0:
            raise ValidationError("OF must be positive")


@dataclass(frozen=True)
class TransformedScores:
    id: str
    K_OF: float
    N_OF: float
    O_OF: float
    D_OF: float


def transform_scores(records: Sequence[ParticipantRecord]) -> list[TransformedScores]:
    """Flow-normalized scores: score * MS / (OF * group MS sum) * 1000.

    The susceptibility sum is taken within each condition group
    separately, so groups transform independently of one another.
    """
    if not records:
        raise ValidationError("no participant records")
    ms_sums = {g: 0.0 for g in GROUPS}
    for rec in records:
        ms_sums[rec.group] += rec.MS

    out = []
    for rec in records:
        scale = rec.MS / (rec.OF * ms_sums[rec.group]) * 1000.0
        out.append(
            TransformedScores(
                id=rec.id,
                K_OF=rec.K * scale,
                N_OF=rec.N * scale,
                O_OF=rec.O * scale,
                D_OF=rec.D * scale,
            )
        )
    return out


def exclusion_filter(
    records: Iterable[ParticipantRecord], min_of: float = DEFAULT_MIN_OF
) -> tuple[list[ParticipantRecord], list[ParticipantRecord]]:
    """Partition records into (kept, excluded) by OF >= min_of.

    Sessions with unrealistically low flow exposure (the viewer barely
    moved) add noise to flow-normalized scores; the threshold makes
    their exclusion explicit and reproducible.
    """
    kept, excluded = [], []
    for rec in records:
        (kept if rec.OF >= min_of else excluded).append(rec)
    return kept, excluded


def read_participants_csv(path: str | Path) -> list[ParticipantRecord]:
    """Load records from a CSV with the exact header id,group,K,N,O,D,MS,OF."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty participants file") from None
        if [h.strip() for h in header] != CSV_COLUMNS:
            raise ValidationError(
                f"{path}: header must be exactly {','.join(CSV_COLUMNS)}"
            )
        records = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise ValidationError(f"{path}:{line_no}: expected {len(CSV_COLUMNS)} fields")
            try:
                records.append(
                    ParticipantRecord(
                        id=row[0].strip(),
                        group=row[1].strip(),
                        K=float(row[2]),
                        N=float(row[3]),
                        O=float(row[4]),
                        D=float(row[5]),
                        MS=float(row[6]),
                        OF=float(row[7]),
                    )
                )
            except ValueError as exc:
                raise ValidationError(f"{path}:{line_no}: {exc}") from exc
    return records


def write_transformed_csv(
    records: Sequence[ParticipantRecord],
    transformed: Sequence[TransformedScores],
    path: str | Path,
) -> None:
    """Write the input table with the four transformed columns appended."""
    by_id = {t.id: t for t in transformed}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OUTPUT_COLUMNS)
        for rec in records:
            t = by_id[rec.id]
            writer.writerow(
                [
                    rec.id,
                    rec.group,
                    rec.K,
                    rec.N,
                    rec.O,
                    rec.D,
                    rec.MS,
                    rec.OF,
                    f"{t.K_OF:.6f}",
                    f"{t.N_OF:.6f}",
                    f"{t.O_OF:.6f}",
                    f"{t.D_OF:.6f}",
                ]
            )
