"""Corpus records and their JSONL form.

One record per line::

    {"id": "r0001", "text": "...", "session_id": "s0001", "arrived_at": 1000,
     "policy": {"mode": "auto", ...},
     "attachments": [{"fixture": "images/img_003.png", "filename": "photo.png", "declared_mime": "image/png"}],
     "gold": {"category": "vision", "modality": "multimodal", "execution": "hybrid", "tier": "efficient",
              "route": "pipeline:image", "followup_target": null, "attachments": ["image"]},
     "annotators": ["vision", "vision"], "provenance": "template:vision/describe"}

Fixture paths are relative to the fixtures directory shipped with the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

from ..config import DATA_DIR
from ..core import Attachment, ExecutionCategory, Modality, Query, TaskCategory, UserPolicy
from ..errors import CorpusError, UnknownName

FIXTURE_DIR = DATA_DIR / "fixtures"
CORPUS_PATH = DATA_DIR / "corpus.jsonl"
VALIDATION_PATH = DATA_DIR / "validation.jsonl"
TIERS = ("efficient", "premium")


@dataclass(frozen=True)
class AttachmentRef:
    fixture: str
    filename: str
    declared_mime: str = ""

    def load(self, root: Path = FIXTURE_DIR) -> Attachment:
        return Attachment(self.filename, _read(str(root / self.fixture)), self.declared_mime)

    def to_dict(self) -> dict:
        return {"fixture": self.fixture, "filename": self.filename, "declared_mime": self.declared_mime}


@lru_cache(maxsize=None)
def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    text: str
    gold_category: TaskCategory
    gold_modality: Modality
    gold_execution: ExecutionCategory
    gold_tier: str
    gold_route: str
    attachments: tuple[AttachmentRef, ...] = ()
    gold_attachments: tuple[Modality, ...] = ()
    session_id: str = ""
    arrived_at: int = 0
    policy: UserPolicy = field(default_factory=UserPolicy)
    followup_target: str | None = None
    annotators: tuple[TaskCategory, TaskCategory] | None = None
    provenance: str = ""

    def query(self, root: Path = FIXTURE_DIR, policy: UserPolicy | None = None) -> Query:
        return Query(
            id=self.id, text=self.text, attachments=tuple(a.load(root) for a in self.attachments),
            session_id=self.session_id or self.id, policy=policy or self.policy, arrived_at=self.arrived_at,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id, "text": self.text, "session_id": self.session_id, "arrived_at": self.arrived_at,
            "policy": self.policy.to_dict(), "attachments": [a.to_dict() for a in self.attachments],
            "gold": {
                "category": self.gold_category.value, "modality": self.gold_modality.value,
                "execution": self.gold_execution.value, "tier": self.gold_tier, "route": self.gold_route,
                "followup_target": self.followup_target, "attachments": [m.value for m in self.gold_attachments],
            },
            "annotators": [a.value for a in self.annotators] if self.annotators else None,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict, index: int = 0, root: Path | None = FIXTURE_DIR) -> CorpusRecord:
        try:
            g = d["gold"]
            tier = g["tier"]
            if tier not in TIERS:
                raise CorpusError(index, f"gold tier {tier!r} not in {TIERS}")
            refs = tuple(AttachmentRef(a["fixture"], a.get("filename", Path(a["fixture"]).name),
                                       a.get("declared_mime", "")) for a in d.get("attachments", []))
            if root is not None:
                for ref in refs:
                    if not (root / ref.fixture).is_file():
                        raise CorpusError(index, f"fixture {ref.fixture} does not resolve")
            ann = d.get("annotators")
            rec = cls(
                id=str(d["id"]), text=d.get("text", ""),
                gold_category=TaskCategory.parse(g["category"]), gold_modality=Modality.parse(g["modality"]),
                gold_execution=ExecutionCategory.parse(g["execution"]), gold_tier=tier, gold_route=g["route"],
                attachments=refs, gold_attachments=tuple(Modality.parse(m) for m in g.get("attachments", [])),
                session_id=str(d.get("session_id") or d["id"]), arrived_at=int(d.get("arrived_at", 0)),
                policy=UserPolicy.from_dict(d.get("policy")), followup_target=g.get("followup_target"),
                annotators=tuple(TaskCategory.parse(a) for a in ann) if ann else None,
                provenance=d.get("provenance", ""),
            )
        except CorpusError:
            raise
        except (KeyError, TypeError, ValueError, UnknownName) as exc:
            raise CorpusError(index, f"malformed record: {exc}") from exc
        if not rec.text.strip() and not rec.attachments:
            raise CorpusError(index, "record has neither text nor attachments")
        if len(rec.gold_attachments) != len(rec.attachments):
            raise CorpusError(index, "gold attachment modalities do not match attachment count")
        return rec


def load_corpus(path: str | Path = CORPUS_PATH, root: Path | None = FIXTURE_DIR) -> list[CorpusRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(i, f"invalid JSON: {exc}") from exc
            records.append(CorpusRecord.from_dict(row, i, root))
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise CorpusError(len(records), "duplicate record ids")
    return records


def dump_corpus(records: Iterable[CorpusRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def validation_items(records: Iterable[CorpusRecord]) -> list[tuple[Query, TaskCategory, str]]:
    """(query, gold category, gold route label) triples for threshold calibration."""
    return [(r.query(), r.gold_category, r.gold_route) for r in records]
