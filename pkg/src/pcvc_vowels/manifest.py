"""Corpus manifest: a ``path,speaker,consonant,vowel`` CSV plus a JSON sidecar.

Paths in the CSV are relative to the directory holding it.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IoFailure, ManifestError
from .phonemes import VowelLabel

COLUMNS = ("path", "speaker", "consonant", "vowel")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    speaker: str
    consonant: str
    vowel: VowelLabel


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    metadata: dict = field(default_factory=dict)
    root: Path = Path(".")

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise ManifestError(f"duplicate path in manifest: {e.path}")
            seen.add(e.path)
            if not isinstance(e.vowel, VowelLabel):
                raise ManifestError(f"entry {e.path} has invalid vowel {e.vowel!r}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def speakers(self) -> list[str]:
        return sorted({e.speaker for e in self.entries})

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def subset(self, entries) -> "Manifest":
        return Manifest(list(entries), dict(self.metadata), self.root)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for e in self.entries:
            w.writerow((e.path, e.speaker, e.consonant, e.vowel.value))
        return buf.getvalue()


def sidecar_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_suffix(".json")


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    try:
        path.write_text(manifest.to_csv(), encoding="utf-8")
        if manifest.metadata:
            sidecar_path(path).write_text(
                json.dumps(manifest.metadata, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path) -> Manifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != COLUMNS:
        raise ManifestError(f"{path}: header must be {','.join(COLUMNS)}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(COLUMNS):
            raise ManifestError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
        try:
            vowel = VowelLabel.parse(row[3])
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from None
        entries.append(ManifestEntry(row[0].strip(), row[1].strip(), row[2].strip(), vowel))
    metadata = {}
    side = sidecar_path(path)
    if side.exists():
        try:
            metadata = json.loads(side.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ManifestError(f"bad manifest sidecar {side}: {exc}") from exc
    return Manifest(entries, metadata, path.parent)
