"""Blinded, pseudo-randomized study construction.

Given paired original/reconstructed recordings, ``build_study`` draws a
deterministic (seeded) presentation plan: every record contributes one
presentation per arm, a chosen few contribute two per arm for
within-observer checks, and presentations are split into work-package
subsets under the separation constraint that the two arms of a record,
and the two copies of a duplicate, never share a subset.  Presentation
identifiers are random 128-bit tokens; the mapping back to record and
arm lives only in a separate sealed blinding key.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .signal_io import Record, extract_strip

__all__ = [
    "ORIGINAL",
    "RECONSTRUCTED",
    "StudyRecord",
    "StudyConfig",
    "QuestionnaireSchema",
    "Presentation",
    "StudyManifest",
    "KeyEntry",
    "BlindingKey",
    "build_study",
    "validate_study",
    "seal_entries",
    "manifest_to_dict",
    "manifest_from_dict",
    "key_to_dict",
    "key_from_dict",
]

ORIGINAL = "original"
RECONSTRUCTED = "reconstructed"
ARMS = (ORIGINAL, RECONSTRUCTED)

P_MORPHOLOGIES = ("insignificant", "positive", "negative", "biphasic")
QRS_MORPHOLOGIES = ("R", "Rs", "rS", "RS", "qR", "qRs", "QS", "Q", "rSr'",
                    "other")
T_MORPHOLOGIES = ("positive", "negative", "biphasic", "flattened")
ST_MORPHOLOGIES = ("normal", "ascending", "descending", "other")


@dataclass(frozen=True)
class StudyRecord:
    """One source record's role in the study: which leads are shown and
    which window (start, duration in seconds) is cut."""

    record_id: str
    leads: tuple[str, ...]
    window: tuple[float, float]

    def __post_init__(self):
        if not self.leads:
            raise ValueError(f"record {self.record_id!r} has no leads")
        if self.window[1] <= 0:
            raise ValueError(f"record {self.record_id!r} window not positive")


@dataclass(frozen=True)
class StudyConfig:
    records: tuple[StudyRecord, ...]
    n_duplicates: int = 6
    n_subsets: int = 4
    seed: int = 0
    raters: tuple[str, ...] = ("C1", "C2", "C3")

    def __post_init__(self):
        if not self.records:
            raise ValueError("study needs at least one record")
        ids = [r.record_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate record ids in config")
        if not 0 <= self.n_duplicates <= len(self.records):
            raise ValueError(
                f"n_duplicates {self.n_duplicates} outside 0..{len(ids)}")
        if self.n_subsets < 2:
            raise ValueError("n_subsets must be >= 2")
        if not self.raters:
            raise ValueError("study needs at least one rater")


@dataclass(frozen=True)
class QuestionnaireSchema:
    """Item definitions for one presented lead.

    Morphology items are mandatory single-choice; the two ST-level
    booleans are mandatory; pathology flags are optional booleans per
    wave; quality is an integer score; main diagnosis is optional free
    text per presentation.
    """

    p_morphologies: tuple[str, ...] = P_MORPHOLOGIES
    qrs_morphologies: tuple[str, ...] = QRS_MORPHOLOGIES
    t_morphologies: tuple[str, ...] = T_MORPHOLOGIES
    st_morphologies: tuple[str, ...] = ST_MORPHOLOGIES
    quality_range: tuple[int, int] = (1, 5)
    version: str = "1"

    def __post_init__(self):
        for name in ("p_morphologies", "qrs_morphologies", "t_morphologies",
                     "st_morphologies"):
            labels = getattr(self, name)
            if len(labels) < 2 or len(set(labels)) != len(labels):
                raise ValueError(f"{name} needs >= 2 distinct labels")
        lo, hi = self.quality_range
        if lo >= hi:
            raise ValueError("quality_range must be an increasing pair")

    @property
    def morphology_items(self) -> dict[str, tuple[str, ...]]:
        return {
            "p_morphology": self.p_morphologies,
            "qrs_morphology": self.qrs_morphologies,
            "t_morphology": self.t_morphologies,
            "st_morphology": self.st_morphologies,
        }

    # Optional boolean pathology flags accepted per lead.
    PATHOLOGY_FLAGS = ("p_pathologic", "qrs_pathologic", "t_pathologic",
                       "st_pathologic")
    BOOLEAN_ITEMS = ("st_depressed", "st_elevated")

    def validate_response(self, answers: dict,
                          leads: tuple[str, ...]) -> list[str]:
        """Item paths that are missing or invalid; empty when complete."""
        problems = []
        lead_answers = answers.get("leads")
        if not isinstance(lead_answers, dict):
            return ["leads"]
        for lead in leads:
            a = lead_answers.get(lead)
            if not isinstance(a, dict):
                problems.append(f"leads.{lead}")
                continue
            prefix = f"leads.{lead}."
            for item, labels in self.morphology_items.items():
                if item not in a:
                    problems.append(prefix + item)
                elif a[item] not in labels:
                    problems.append(prefix + item)
            for item in self.BOOLEAN_ITEMS:
                if not isinstance(a.get(item), bool):
                    problems.append(prefix + item)
            for item in self.PATHOLOGY_FLAGS:
                if item in a and not isinstance(a[item], bool):
                    problems.append(prefix + item)
            quality = a.get("quality")
            lo, hi = self.quality_range
            if not (isinstance(quality, int) and not isinstance(quality, bool)
                    and lo <= quality <= hi):
                problems.append(prefix + "quality")
        for lead in lead_answers:
            if lead not in leads:
                problems.append(f"leads.{lead} (not part of this strip)")
        diagnosis = answers.get("main_diagnosis")
        if diagnosis is not None and not isinstance(diagnosis, str):
            problems.append("main_diagnosis")
        return problems

    def to_dict(self) -> dict:
        return {
            "p_morphologies": list(self.p_morphologies),
            "qrs_morphologies": list(self.qrs_morphologies),
            "t_morphologies": list(self.t_morphologies),
            "st_morphologies": list(self.st_morphologies),
            "boolean_items": list(self.BOOLEAN_ITEMS),
            "pathology_flags": list(self.PATHOLOGY_FLAGS),
            "quality_range": list(self.quality_range),
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuestionnaireSchema":
        return cls(
            p_morphologies=tuple(d["p_morphologies"]),
            qrs_morphologies=tuple(d["qrs_morphologies"]),
            t_morphologies=tuple(d["t_morphologies"]),
            st_morphologies=tuple(d["st_morphologies"]),
            quality_range=tuple(d["quality_range"]),
            version=d.get("version", "1"),
        )


@dataclass(frozen=True)
class Presentation:
    """One blinded multi-lead presentation as served to raters."""

    strip_id: str
    subset: int
    position: int
    leads: tuple[str, ...]
    fs: float
    duration: float
    samples: dict[str, tuple[float, ...]]  # lead -> millivolt samples


@dataclass(frozen=True)
class StudyManifest:
    """Everything the session service needs: blinded presentations plus
    the per-rater bearer tokens.  Record identities stay in the key."""

    study_id: str
    n_subsets: int
    schema: QuestionnaireSchema
    presentations: tuple[Presentation, ...]
    raters: dict[str, str]  # rater id -> bearer token
    admin_token: str

    def presentation(self, strip_id: str) -> Presentation:
        for p in self.presentations:
            if p.strip_id == strip_id:
                return p
        raise KeyError(f"unknown strip id {strip_id!r}")

    def subset_ids(self, subset: int) -> list[str]:
        return [p.strip_id for p in self.presentations if p.subset == subset]


@dataclass(frozen=True)
class KeyEntry:
    record_id: str
    arm: str
    duplicate: bool
    occurrence: int
    subset: int
    position: int
    leads: tuple[str, ...]


@dataclass(frozen=True)
class BlindingKey:
    study_id: str
    seal: str
    entries: dict[str, KeyEntry]  # strip id -> provenance


def seal_entries(study_id: str, entries: dict[str, KeyEntry]) -> str:
    """Integrity seal: SHA-256 over the canonical key content."""
    canonical = json.dumps(
        {"study_id": study_id,
         "entries": {sid: _key_entry_dict(e)
                     for sid, e in sorted(entries.items())}},
        sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _key_entry_dict(e: KeyEntry) -> dict:
    return {"record_id": e.record_id, "arm": e.arm,
            "duplicate": e.duplicate, "occurrence": e.occurrence,
            "subset": e.subset, "position": e.position,
            "leads": list(e.leads)}


def _required_subsets(duplicate: bool) -> int:
    # Arms must be apart; duplicate copies of one arm must be apart;
    # together that makes all presentations of a record pairwise apart.
    return 4 if duplicate else 2


def build_study(config: StudyConfig, originals: dict[str, Record],
                reconstructions: dict[str, Record],
                schema: Optional[QuestionnaireSchema] = None,
                ) -> tuple[StudyManifest, BlindingKey]:
    """Draw the full presentation plan; see the module docstring.

    ``originals`` and ``reconstructions`` map record id to the loaded
    recordings.  The same strip window is cut from both arms, and both
    copies of a duplicate reuse identical samples.
    """
    schema = schema or QuestionnaireSchema()
    missing = [r.record_id for r in config.records
               if r.record_id not in originals
               or r.record_id not in reconstructions]
    if missing:
        raise ValueError(f"missing original or reconstruction for {missing}")
    if config.n_duplicates > 0 and config.n_subsets < 4:
        raise ValueError(
            "duplicate separation needs at least 4 subsets: the two arms "
            "and the two copies of a duplicated record must all land in "
            "different subsets"
        )

    # Cut all strips up front so window errors surface before any draw.
    strips: dict[tuple[str, str], dict[str, tuple[float, ...]]] = {}
    fs_dur: dict[str, tuple[float, float]] = {}
    for sr in config.records:
        if originals[sr.record_id].fs != reconstructions[sr.record_id].fs:
            raise ValueError(
                f"record {sr.record_id!r}: arms have different sampling "
                "rates"
            )
        for arm, source in ((ORIGINAL, originals), (RECONSTRUCTED,
                                                    reconstructions)):
            rec = source[sr.record_id]
            cut = {}
            for lead in sr.leads:
                strip = extract_strip(rec, lead, sr.window[0], sr.window[1])
                cut[lead] = tuple(float(v) for v in strip.samples)
            strips[(sr.record_id, arm)] = cut
            fs_dur[sr.record_id] = (rec.fs, sr.window[1])

    rng = np.random.default_rng(config.seed)
    study_id = rng.bytes(8).hex()
    rater_tokens = {rater: rng.bytes(16).hex() for rater in config.raters}
    admin_token = rng.bytes(16).hex()

    order = rng.permutation(len(config.records))
    duplicated = {config.records[i].record_id
                  for i in order[:config.n_duplicates]}

    # Greedy least-loaded assignment with seeded tie-breaks keeps subset
    # sizes within one of each other.
    loads = np.zeros(config.n_subsets, dtype=int)
    assignment: dict[tuple[str, str, int], int] = {}
    for i in order:
        sr = config.records[i]
        dup = sr.record_id in duplicated
        k = _required_subsets(dup)
        tie_break = rng.permutation(config.n_subsets)
        chosen = sorted(tie_break, key=lambda s: loads[s])[:k]
        roles = [(arm, occ) for arm in ARMS
                 for occ in range(2 if dup else 1)]
        for role_i, slot in enumerate(rng.permutation(k)):
            arm, occ = roles[role_i]
            assignment[(sr.record_id, arm, occ)] = int(chosen[slot])
        loads[chosen] += 1

    # Order within each subset is a fresh seeded permutation.
    per_subset: list[list[tuple[str, str, int]]] = [
        [] for _ in range(config.n_subsets)]
    for sr in config.records:
        dup = sr.record_id in duplicated
        for arm in ARMS:
            for occ in range(2 if dup else 1):
                per_subset[assignment[(sr.record_id, arm, occ)]].append(
                    (sr.record_id, arm, occ))
    by_record = {sr.record_id: sr for sr in config.records}

    presentations = []
    entries: dict[str, KeyEntry] = {}
    for subset, members in enumerate(per_subset):
        members.sort()  # insertion order is config order; fix it, then draw
        for position, j in enumerate(rng.permutation(len(members))):
            record_id, arm, occ = members[j]
            sr = by_record[record_id]
            fs, duration = fs_dur[record_id]
            strip_id = rng.bytes(16).hex()
            presentations.append(Presentation(
                strip_id=strip_id, subset=subset, position=position,
                leads=sr.leads, fs=fs, duration=duration,
                samples=strips[(record_id, arm)]))
            entries[strip_id] = KeyEntry(
                record_id=record_id, arm=arm,
                duplicate=record_id in duplicated, occurrence=occ,
                subset=subset, position=position, leads=sr.leads)

    presentations.sort(key=lambda p: (p.subset, p.position))
    manifest = StudyManifest(
        study_id=study_id, n_subsets=config.n_subsets, schema=schema,
        presentations=tuple(presentations), raters=rater_tokens,
        admin_token=admin_token)
    key = BlindingKey(study_id=study_id,
                      seal=seal_entries(study_id, entries), entries=entries)
    return manifest, key


def validate_study(manifest: StudyManifest, key: BlindingKey) -> list[str]:
    """Check every manifest/key invariant; returns violation messages,
    empty when the study is well formed."""
    if manifest.study_id != key.study_id:
        raise ValueError(
            f"key is for study {key.study_id}, manifest is "
            f"{manifest.study_id}"
        )
    violations = []
    if key.seal != seal_entries(key.study_id, key.entries):
        violations.append("blinding key seal does not match its content")

    manifest_ids = {p.strip_id for p in manifest.presentations}
    if len(manifest_ids) != len(manifest.presentations):
        violations.append("duplicate strip ids in manifest")
    for sid in manifest_ids - set(key.entries):
        violations.append(f"strip {sid} missing from blinding key")
    for sid in set(key.entries) - manifest_ids:
        violations.append(f"key entry {sid} missing from manifest")

    subsets: dict[tuple[str, str], list[int]] = {}
    for sid, e in key.entries.items():
        subsets.setdefault((e.record_id, e.arm), []).append(e.subset)
    for (record_id, arm), subs in subsets.items():
        other = subsets.get((record_id, _other_arm(arm)), [])
        for s in subs:
            if s in other:
                violations.append(
                    f"record {record_id}: both arms appear in subset {s}")
        if len(subs) != len(set(subs)):
            violations.append(
                f"record {record_id}: {arm} copies share a subset")
    # Report each two-arm clash once, not once per direction.
    violations = list(dict.fromkeys(violations))

    for p in manifest.presentations:
        e = key.entries.get(p.strip_id)
        if e and (e.subset != p.subset or e.position != p.position):
            violations.append(
                f"strip {p.strip_id}: key coordinates disagree with manifest")

    by_subset: dict[int, list[int]] = {}
    for p in manifest.presentations:
        if not 0 <= p.subset < manifest.n_subsets:
            violations.append(f"strip {p.strip_id}: subset out of range")
            continue
        by_subset.setdefault(p.subset, []).append(p.position)
    for subset, positions in by_subset.items():
        if sorted(positions) != list(range(len(positions))):
            violations.append(f"subset {subset}: positions not contiguous")
    if by_subset:
        sizes = [len(v) for v in by_subset.values()]
        if max(sizes) - min(sizes) > 1:
            violations.append("subset sizes differ by more than 1")
    return violations


def _other_arm(arm: str) -> str:
    return RECONSTRUCTED if arm == ORIGINAL else ORIGINAL


def manifest_to_dict(manifest: StudyManifest) -> dict:
    return {
        "study_id": manifest.study_id,
        "n_subsets": manifest.n_subsets,
        "schema": manifest.schema.to_dict(),
        "raters": dict(manifest.raters),
        "admin_token": manifest.admin_token,
        "presentations": [
            {"strip_id": p.strip_id, "subset": p.subset,
             "position": p.position, "leads": list(p.leads), "fs": p.fs,
             "duration": p.duration,
             "samples": {lead: list(v) for lead, v in p.samples.items()}}
            for p in manifest.presentations
        ],
    }


def manifest_from_dict(d: dict) -> StudyManifest:
    return StudyManifest(
        study_id=d["study_id"],
        n_subsets=int(d["n_subsets"]),
        schema=QuestionnaireSchema.from_dict(d["schema"]),
        raters=dict(d["raters"]),
        admin_token=d["admin_token"],
        presentations=tuple(
            Presentation(
                strip_id=p["strip_id"], subset=int(p["subset"]),
                position=int(p["position"]), leads=tuple(p["leads"]),
                fs=float(p["fs"]), duration=float(p["duration"]),
                samples={lead: tuple(v) for lead, v in p["samples"].items()})
            for p in d["presentations"]
        ),
    )


def key_to_dict(key: BlindingKey) -> dict:
    return {
        "study_id": key.study_id,
        "seal": key.seal,
        "entries": {sid: _key_entry_dict(e)
                    for sid, e in sorted(key.entries.items())},
    }


def key_from_dict(d: dict) -> BlindingKey:
    return BlindingKey(
        study_id=d["study_id"],
        seal=d["seal"],
        entries={sid: KeyEntry(
            record_id=e["record_id"], arm=e["arm"],
            duplicate=bool(e["duplicate"]), occurrence=int(e["occurrence"]),
            subset=int(e["subset"]), position=int(e["position"]),
            leads=tuple(e["leads"])) for sid, e in d["entries"].items()},
    )
