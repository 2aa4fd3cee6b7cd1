"""Manifest and prediction CSV formats.

Manifest columns, exactly: id,audio_path,group,mmse,age,gender,language
(group and mmse may be empty on test manifests). Predictions: ``id,label``
for the classification task, ``id,mmse`` for regression.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError

MANIFEST_COLUMNS = ["id", "audio_path", "group", "mmse", "age", "gender", "language"]
GROUPS = ("CN", "AD")
GENDERS = ("M", "F")


@dataclass
class ManifestEntry:
    id: str
    audio_path: str
    group: str | None          # CN / AD
    mmse: int | None           # 0..30
    age: float
    gender: str                # M / F
    language: str = "en"

    @property
    def gender_code(self) -> int:
        return 1 if self.gender == "F" else 0


def _parse_entry(row: dict[str, str], line: int) -> ManifestEntry:
    rid = row["id"].strip()
    if not rid:
        raise ManifestError(f"line {line}: empty id")
    group = row["group"].strip() or None
    if group is not None and group not in GROUPS:
        raise ManifestError(f"line {line} ({rid}): group must be CN or AD, got {group!r}")
    mmse_raw = row["mmse"].strip()
    mmse = None
    if mmse_raw:
        try:
            mmse = int(mmse_raw)
        except ValueError:
            raise ManifestError(f"line {line} ({rid}): mmse not an integer: {mmse_raw!r}") from None
        if not 0 <= mmse <= 30:
            raise ManifestError(f"line {line} ({rid}): mmse {mmse} outside 0..30")
    try:
        age = float(row["age"])
    except ValueError:
        raise ManifestError(f"line {line} ({rid}): bad age {row['age']!r}") from None
    gender = row["gender"].strip().upper()
    if gender not in GENDERS:
        raise ManifestError(f"line {line} ({rid}): gender must be M or F, got {row['gender']!r}")
    return ManifestEntry(id=rid, audio_path=row["audio_path"].strip(), group=group,
                         mmse=mmse, age=age, gender=gender,
                         language=row["language"].strip() or "en")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}: header must be {','.join(MANIFEST_COLUMNS)}, "
                f"got {','.join(reader.fieldnames or [])}")
        entries = [_parse_entry(row, line) for line, row in enumerate(reader, start=2)]
    ids = [e.id for e in entries]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ManifestError(f"{path}: duplicate ids: {', '.join(dupes)}")
    return entries


def write_manifest(path: str | Path, entries: list[ManifestEntry]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for e in entries:
            writer.writerow([e.id, e.audio_path, e.group or "",
                             "" if e.mmse is None else e.mmse,
                             e.age, e.gender, e.language])


def read_predictions(path: str | Path, task: int) -> dict[str, str | float]:
    value_col = "label" if task == 1 else "mmse"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", value_col]:
            raise ManifestError(f"{path}: header must be id,{value_col}")
        out: dict[str, str | float] = {}
        for line, row in enumerate(reader, start=2):
            rid = row["id"].strip()
            if rid in out:
                raise ManifestError(f"{path} line {line}: duplicate id {rid}")
            if task == 1:
                label = row["label"].strip()
                if label not in GROUPS:
                    raise ManifestError(f"{path} line {line}: label must be CN or AD")
                out[rid] = label
            else:
                try:
                    out[rid] = float(row["mmse"])
                except ValueError:
                    raise ManifestError(f"{path} line {line}: bad mmse "
                                        f"{row['mmse']!r}") from None
    return out


def write_predictions(path: str | Path, rows: dict[str, str | float], task: int) -> None:
    value_col = "label" if task == 1 else "mmse"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", value_col])
        for rid in sorted(rows):
            writer.writerow([rid, rows[rid]])
