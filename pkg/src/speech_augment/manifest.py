"""Dataset bookkeeping: utterance records, cross-validation folds, and the
2x augmentation plan.

Manifests are JSONL, one record per line; transcripts are space-separated
phone labels. Per-record augmentation parameters are hash-derived from
(seed, utterance id) so a plan is reproducible without storing it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .vtlp import sample_alpha

METHODS = ("vtlp", "reverb", "pitch", "rate", "cyclegan-features")


class Group(str, Enum):
    CLP = "CLP"
    NORMAL = "NORMAL"


class Gender(str, Enum):
    M = "M"
    F = "F"


class ManifestError(ValueError):
    """Malformed manifest content; message carries the line number."""


@dataclass(frozen=True)
class Origin:
    """ORIGINAL recording or AUGMENTED derivative with its provenance."""

    kind: str  # "ORIGINAL" | "AUGMENTED"
    method: str | None = None
    params: tuple = ()  # sorted (key, value) pairs, hashable
    source_id: str | None = None

    @staticmethod
    def original() -> "Origin":
        return Origin("ORIGINAL")

    @staticmethod
    def augmented(method: str, params: dict, source_id: str) -> "Origin":
        return Origin("AUGMENTED", method, tuple(sorted(params.items())), source_id)

    @property
    def params_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    path: str
    speaker: str
    group: Group
    gender: Gender
    age: int
    severity: int
    transcript: tuple
    origin: Origin = field(default_factory=Origin.original)

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.severity not in (0, 1, 2, 3):
            raise ValueError(f"severity must be 0..3, got {self.severity}")
        if self.origin.kind == "AUGMENTED" and not self.origin.source_id:
            raise ValueError(f"augmented record {self.id} lacks a source id")
        for label in self.transcript:
            if not label or any(c.isspace() for c in label):
                raise ValueError(f"bad phone label {label!r} in record {self.id}")


def _record_to_json(rec: UtteranceRecord) -> dict:
    origin: dict = {"kind": rec.origin.kind}
    if rec.origin.kind == "AUGMENTED":
        origin.update(
            method=rec.origin.method,
            params=rec.origin.params_dict,
            source_id=rec.origin.source_id,
        )
    return {
        "id": rec.id,
        "path": rec.path,
        "speaker": rec.speaker,
        "group": rec.group.value,
        "gender": rec.gender.value,
        "age": rec.age,
        "severity": rec.severity,
        "transcript": " ".join(rec.transcript),
        "origin": origin,
    }


def _record_from_json(obj: dict) -> UtteranceRecord:
    o = obj.get("origin", {"kind": "ORIGINAL"})
    if o.get("kind") == "AUGMENTED":
        origin = Origin.augmented(o["method"], o.get("params", {}), o["source_id"])
    else:
        origin = Origin.original()
    return UtteranceRecord(
        id=obj["id"],
        path=obj["path"],
        speaker=obj["speaker"],
        group=Group(obj["group"]),
        gender=Gender(obj["gender"]),
        age=int(obj["age"]),
        severity=int(obj["severity"]),
        transcript=tuple(obj["transcript"].split()),
        origin=origin,
    )


def load_manifest(path) -> list[UtteranceRecord]:
    """Read and validate a JSONL manifest; duplicate ids are rejected."""
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = _record_from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
            if rec.id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def save_manifest(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(_record_to_json(rec), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Folds


@dataclass(frozen=True)
class Fold:
    test_speakers: tuple
    genders: tuple  # parallel Gender pair


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple  # 3 Fold entries: (F,F), (M,M), (F,M)
    assignment: dict  # test speaker -> first fold index


FOLD_GENDER_COMBOS = (
    (Gender.F, Gender.F),
    (Gender.M, Gender.M),
    (Gender.F, Gender.M),
)


def make_folds(records, seed: int, group: Group = Group.CLP) -> FoldPlan:
    """Three test-speaker pairs covering the F-F, M-M and F-M combinations.

    Deterministic under the seed. Speakers are drawn without replacement
    while the gender pools last; with only two speakers of a gender the
    mixed fold reuses one (folds are independent train/test splits, so
    only within-fold disjointness matters).
    """
    by_gender: dict[Gender, list] = {Gender.M: [], Gender.F: []}
    speaker_gender: dict[str, Gender] = {}
    for rec in records:
        if rec.group != group:
            continue
        prev = speaker_gender.get(rec.speaker)
        if prev is not None and prev != rec.gender:
            raise ManifestError(f"speaker {rec.speaker!r} has conflicting genders")
        if prev is None:
            speaker_gender[rec.speaker] = rec.gender
            by_gender[rec.gender].append(rec.speaker)
    for g, speakers in by_gender.items():
        if len(speakers) < 2:
            raise ValueError(
                f"need at least 2 {g.value} speakers in group {group.value}, found {len(speakers)}"
            )

    rng = np.random.default_rng(seed)
    pools = {g: list(rng.permutation(sorted(sp))) for g, sp in by_gender.items()}
    cursor = {Gender.M: 0, Gender.F: 0}

    def take(g: Gender) -> str:
        pool = pools[g]
        if cursor[g] < len(pool):
            speaker = pool[cursor[g]]
            cursor[g] += 1
        else:  # pool exhausted: reuse from the start
            speaker = pool[cursor[g] % len(pool)]
            cursor[g] += 1
        return speaker

    folds = []
    for combo in FOLD_GENDER_COMBOS:
        picked = []
        for g in combo:
            speaker = take(g)
            while speaker in picked:  # within-fold disjointness
                speaker = take(g)
            picked.append(speaker)
        folds.append(Fold(tuple(picked), combo))

    assignment: dict[str, int] = {}
    for k, fold in enumerate(folds):
        for speaker in fold.test_speakers:
            assignment.setdefault(speaker, k)
    return FoldPlan(tuple(folds), assignment)


def fold_split(records, plan: FoldPlan, fold_index: int):
    """(train, test) record lists for one fold; speaker-disjoint by design."""
    test_speakers = set(plan.folds[fold_index].test_speakers)
    train = [r for r in records if r.speaker not in test_speakers]
    test = [r for r in records if r.speaker in test_speakers]
    return train, test


# ---------------------------------------------------------------------------
# Doubling plan


def derive_record_seed(seed: int, record_id: str) -> int:
    """Stable per-record RNG seed; independent of worker scheduling."""
    digest = hashlib.sha256(f"{seed}:{record_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _augment_params(method: str, derived_seed: int, base: dict) -> dict:
    if method == "vtlp":
        alpha = base.get("alpha")
        return {"alpha": float(alpha) if alpha is not None else sample_alpha(derived_seed)}
    if method == "reverb":
        if "rir" in base:
            return {"rir": base["rir"]}
        return {"room_seed": derived_seed % (1 << 32)}
    if method == "pitch":
        if "beta" not in base:
            raise ValueError("pitch augmentation needs a beta value")
        return {"beta": float(base["beta"])}
    if method == "rate":
        if "factor" in base:
            return {"factor": float(base["factor"])}
        if "pair" in base:
            return {"pair": base["pair"]}
        raise ValueError("rate augmentation needs a factor or a pairing")
    if method == "cyclegan-features":
        return {}
    raise ValueError(f"unknown method {method!r} (choose from {METHODS})")


def _suffix(method: str, params: dict) -> str:
    if method == "vtlp":
        return f"vtlp{params['alpha']:g}"
    if method == "reverb":
        return "reverb"
    if method == "pitch":
        return f"pitch{params['beta']:g}"
    if method == "rate":
        return f"rate{params['factor']:g}" if "factor" in params else "ratematched"
    return "cgfeat"


def plan_doubling(records, method: str, seed: int, base_params: dict | None = None):
    """Originals plus exactly one planned augmented record per original.

    The augmented record's path is a bare file name (the pipeline decides
    the directory); its parameters are derived from (seed, id) so reruns
    regenerate the identical plan.
    """
    base = dict(base_params or {})
    originals = list(records)
    for rec in originals:
        if rec.origin.kind != "ORIGINAL":
            raise ValueError(f"record {rec.id} is already augmented; plan from originals")
    planned = list(originals)
    for rec in originals:
        params = _augment_params(method, derive_record_seed(seed, rec.id), base)
        tag = _suffix(method, params)
        ext = ".mcp1" if method == "cyclegan-features" else ".wav"
        planned.append(
            UtteranceRecord(
                id=f"{rec.id}_{tag}",
                path=f"{Path(rec.path).stem}_{tag}{ext}",
                speaker=rec.speaker,
                group=rec.group,
                gender=rec.gender,
                age=rec.age,
                severity=rec.severity,
                transcript=rec.transcript,
                origin=Origin.augmented(method, params, rec.id),
            )
        )
    return planned
