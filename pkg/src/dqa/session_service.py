"""HTTP service that runs a rating session.

Raters authenticate with per-rater bearer tokens from the manifest and
work through the subsets in order.  The service knows only the blinded
manifest; the blinding key is never loaded here, so no endpoint can
leak record identities or arm labels.  Responses go to an append-only
JSONL log (fsynced before the acknowledgment) with a periodically
compacted snapshot; restart replays the log.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Request

from .signal_io import Strip, render_params
from .study_builder import Presentation, StudyManifest

__all__ = ["ResponseStore", "StoredResponse", "create_app", "export_rows"]

LOG_NAME = "responses.jsonl"
SNAPSHOT_NAME = "snapshot.json"


@dataclass(frozen=True)
class StoredResponse:
    sequence: int
    rater_id: str
    strip_id: str
    answers: dict
    timestamp: str
    schema_version: str
    replaces: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "rater_id": self.rater_id,
            "strip_id": self.strip_id,
            "answers": self.answers,
            "timestamp": self.timestamp,
            "schema_version": self.schema_version,
            "replaces": self.replaces,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StoredResponse":
        return cls(sequence=int(d["sequence"]), rater_id=d["rater_id"],
                   strip_id=d["strip_id"], answers=d["answers"],
                   timestamp=d["timestamp"],
                   schema_version=d.get("schema_version", "1"),
                   replaces=d.get("replaces"))


class ResponseStore:
    """Append-only response log with snapshot compaction.

    All writes go through one lock; each append is flushed and fsynced
    before the caller gets the stored record back, so an acknowledged
    response survives a crash.  The live view keeps the latest response
    per (rater, strip); earlier submissions stay in the log as audit.
    """

    def __init__(self, root, snapshot_every: int = 50):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.snapshot_every = snapshot_every
        self._lock = threading.Lock()
        self._live: dict[tuple[str, str], StoredResponse] = {}
        self._sequence = 0
        self._appends_since_snapshot = 0
        self._replay()
        self._log = open(self.root / LOG_NAME, "a", encoding="utf-8")

    def _replay(self):
        snap_path = self.root / SNAPSHOT_NAME
        snap_seq = 0
        if snap_path.exists():
            snap = json.loads(snap_path.read_text())
            snap_seq = int(snap["sequence"])
            for d in snap["live"]:
                r = StoredResponse.from_dict(d)
                self._live[(r.rater_id, r.strip_id)] = r
            self._sequence = snap_seq
        log_path = self.root / LOG_NAME
        if log_path.exists():
            with open(log_path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    r = StoredResponse.from_dict(json.loads(line))
                    if r.sequence > snap_seq:
                        self._live[(r.rater_id, r.strip_id)] = r
                    self._sequence = max(self._sequence, r.sequence)

    def append(self, rater_id: str, strip_id: str, answers: dict,
               schema_version: str) -> StoredResponse:
        with self._lock:
            previous = self._live.get((rater_id, strip_id))
            record = StoredResponse(
                sequence=self._sequence + 1,
                rater_id=rater_id,
                strip_id=strip_id,
                answers=answers,
                timestamp=datetime.now(timezone.utc).isoformat(),
                schema_version=schema_version,
                replaces=previous.sequence if previous else None,
            )
            self._log.write(json.dumps(record.to_dict()) + "\n")
            self._log.flush()
            os.fsync(self._log.fileno())
            self._sequence = record.sequence
            self._live[(rater_id, strip_id)] = record
            self._appends_since_snapshot += 1
            if self._appends_since_snapshot >= self.snapshot_every:
                self._write_snapshot_locked()
            return record

    def _write_snapshot_locked(self):
        snapshot = {
            "sequence": self._sequence,
            "live": [r.to_dict() for r in sorted(
                self._live.values(), key=lambda r: r.sequence)],
        }
        tmp = self.root / (SNAPSHOT_NAME + ".tmp")
        tmp.write_text(json.dumps(snapshot))
        tmp.replace(self.root / SNAPSHOT_NAME)
        self._appends_since_snapshot = 0

    def snapshot(self):
        with self._lock:
            self._write_snapshot_locked()

    def live_responses(self) -> list[StoredResponse]:
        with self._lock:
            return sorted(self._live.values(), key=lambda r: r.sequence)

    def completed_ids(self, rater_id: str) -> set[str]:
        with self._lock:
            return {strip_id for (rid, strip_id) in self._live
                    if rid == rater_id}

    def audit_trail(self, rater_id: str, strip_id: str) -> list[StoredResponse]:
        """Every submission ever logged for this (rater, strip)."""
        out = []
        log_path = self.root / LOG_NAME
        with self._lock:
            self._log.flush()
            if log_path.exists():
                with open(log_path, encoding="utf-8") as f:
                    for line in f:
                        line = line.strip()
                        if not line:
                            continue
                        r = StoredResponse.from_dict(json.loads(line))
                        if r.rater_id == rater_id and r.strip_id == strip_id:
                            out.append(r)
        return out

    def close(self):
        with self._lock:
            self._write_snapshot_locked()
            self._log.close()


def export_rows(store: ResponseStore, manifest: StudyManifest) -> list[dict]:
    """One row per live response, ordered by (rater, subset, position)."""
    coords = {p.strip_id: (p.subset, p.position)
              for p in manifest.presentations}
    rows = []
    for r in store.live_responses():
        subset, position = coords[r.strip_id]
        rows.append({
            "rater_id": r.rater_id,
            "strip_id": r.strip_id,
            "subset": subset,
            "position": position,
            "answers": r.answers,
            "timestamp": r.timestamp,
            "sequence": r.sequence,
            "schema_version": r.schema_version,
        })
    rows.sort(key=lambda row: (row["rater_id"], row["subset"],
                               row["position"]))
    return rows


def _strip_payload(p: Presentation) -> dict:
    render = {}
    for lead in p.leads:
        strip = Strip(record_id="", lead=lead, t_start=0.0,
                      duration=p.duration,
                      samples=np.asarray(p.samples[lead]), fs=p.fs)
        render[lead] = render_params(strip).to_dict()
    return {
        "strip_id": p.strip_id,
        "subset": p.subset,
        "position": p.position,
        "leads": list(p.leads),
        "fs": p.fs,
        "duration": p.duration,
        "samples": {lead: list(v) for lead, v in p.samples.items()},
        "render": render,
    }


def create_app(manifest: StudyManifest, store_root,
               snapshot_every: int = 50) -> FastAPI:
    """Build the service around one manifest and one storage directory."""
    app = FastAPI(title="dqa session service")
    store = ResponseStore(store_root, snapshot_every=snapshot_every)
    app.state.store = store
    app.state.manifest = manifest

    by_id = {p.strip_id: p for p in manifest.presentations}
    subset_order: list[list[Presentation]] = [
        sorted((p for p in manifest.presentations if p.subset == s),
               key=lambda p: p.position)
        for s in range(manifest.n_subsets)
    ]
    token_to_rater = {token: rid for rid, token in manifest.raters.items()}

    def rater_from(request: Request) -> str:
        auth = request.headers.get("authorization", "")
        if not auth.lower().startswith("bearer "):
            raise HTTPException(status_code=401,
                                detail="bearer token required")
        rater = token_to_rater.get(auth[7:].strip())
        if rater is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return rater

    def admin_from(request: Request):
        auth = request.headers.get("authorization", "")
        if (not auth.lower().startswith("bearer ")
                or auth[7:].strip() != manifest.admin_token):
            raise HTTPException(status_code=401,
                                detail="admin token required")

    def current_subset(rater: str) -> int:
        done = store.completed_ids(rater)
        for s in range(manifest.n_subsets):
            if any(p.strip_id not in done for p in subset_order[s]):
                return s
        return manifest.n_subsets

    @app.get("/study/schema")
    def study_schema():
        return {
            "study_id": manifest.study_id,
            "n_subsets": manifest.n_subsets,
            "n_presentations": len(manifest.presentations),
            "schema": manifest.schema.to_dict(),
        }

    @app.get("/session/next-strip")
    def next_strip(rater: str = Depends(rater_from)):
        done = store.completed_ids(rater)
        subset = current_subset(rater)
        if subset >= manifest.n_subsets:
            return {"done": True, "completed": len(done)}
        pending = [p for p in subset_order[subset]
                   if p.strip_id not in done]
        p = pending[0]
        return {
            "done": False,
            "strip_id": p.strip_id,
            "subset": p.subset,
            "position": p.position,
            "remaining_in_subset": len(pending),
            "completed": len(done),
            "total": len(manifest.presentations),
        }

    @app.get("/strip/{strip_id}")
    def get_strip(strip_id: str, rater: str = Depends(rater_from)):
        p = by_id.get(strip_id)
        if p is None:
            raise HTTPException(status_code=404, detail="unknown strip")
        if p.subset > current_subset(rater):
            raise HTTPException(
                status_code=403,
                detail="strip belongs to a later work package")
        return _strip_payload(p)

    @app.post("/strip/{strip_id}/response")
    def post_response(strip_id: str, body: dict,
                      rater: str = Depends(rater_from)):
        p = by_id.get(strip_id)
        if p is None:
            raise HTTPException(status_code=404, detail="unknown strip")
        if p.subset > current_subset(rater):
            raise HTTPException(
                status_code=403,
                detail="strip belongs to a later work package")
        answers = body.get("answers")
        if not isinstance(answers, dict):
            raise HTTPException(status_code=422,
                                detail={"problems": ["answers"]})
        problems = manifest.schema.validate_response(answers, p.leads)
        if problems:
            raise HTTPException(status_code=422,
                                detail={"problems": problems})
        record = store.append(rater, strip_id, answers,
                              manifest.schema.version)
        return {
            "sequence": record.sequence,
            "replaced": record.replaces is not None,
            "timestamp": record.timestamp,
        }

    @app.get("/session/progress")
    def progress(rater: str = Depends(rater_from)):
        done = store.completed_ids(rater)
        per_subset = []
        for s in range(manifest.n_subsets):
            total = len(subset_order[s])
            completed = sum(1 for p in subset_order[s]
                            if p.strip_id in done)
            per_subset.append({"subset": s, "completed": completed,
                               "total": total})
        return {
            "rater_id": rater,
            "completed": len(done),
            "total": len(manifest.presentations),
            "current_subset": min(current_subset(rater),
                                  manifest.n_subsets - 1),
            "subsets": per_subset,
        }

    @app.get("/admin/export")
    def admin_export(_: None = Depends(admin_from)):
        return {"study_id": manifest.study_id,
                "rows": export_rows(store, manifest)}

    return app
