"""HTTP facade for interactive evolution.

A session walks an expert through the test images of a trained bundle: GET
/next serves the current proposal, POST /feedback takes the corrected mask,
evolves the rule base synchronously and persists the session before
acknowledging. Restarting the process restores every session to its last
acknowledged submission.

Persistence layout (root from --data-dir or SCEFIS_DATA_DIR):
    <root>/sessions/<id>/session.json   atomic state snapshot
    <root>/sessions/<id>/rulebase.txt   current rule base snapshot
    <root>/sessions/<id>/events.log     append-only feedback log (JSON lines)
"""

from __future__ import annotations

import base64
import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .data import Dataset, load_dataset
from .features import SeedPoint, SelfConfig, detect_seed_points, image_feature_block
from .fuzzy import RuleBase, aggregate, infer, load_rulebase, prune_and_evolve, save_rulebase
from .images import (
    BinaryMask,
    image_to_png_bytes,
    mask_from_png_bytes,
    mask_to_png_bytes,
)
from .metrics import jaccard
from .segmenters import SegmenterSpec, apply_segmenter, best_parameter_search


class CreateSessionRequest(BaseModel):
    dataset: str | None = None
    bundle: str | None = None


class FeedbackRequest(BaseModel):
    image_id: str
    mask_png: str  # base64 PNG


@dataclass
class BundleInfo:
    window_z: int
    selected_columns: tuple[int, ...]
    spec: SegmenterSpec
    polarity: str
    test_ids: tuple[str, ...]


def load_bundle(path: str | Path) -> tuple[BundleInfo, RuleBase]:
    root = Path(path)
    meta = root / "bundle.txt"
    rules = root / "rulebase.txt"
    if not meta.exists() or not rules.exists():
        raise FileNotFoundError(
            f"no trained bundle at {root} (expected bundle.txt and rulebase.txt; "
            f"create one with `scefis train --out {root}`)"
        )
    fields = {}
    for line in meta.read_text().splitlines()[1:]:
        key, _, rest = line.partition(" ")
        fields[key] = rest
    spec = SegmenterSpec(
        kind=fields["segmenter"],
        grid=tuple(float(v) for v in fields["grid"].split()),
        default=float(fields["default"]),
    )
    info = BundleInfo(
        window_z=int(fields["window_z"]),
        selected_columns=tuple(int(v) for v in fields["selected_columns"].split()),
        spec=spec,
        polarity=fields.get("polarity", "dark"),
        test_ids=tuple(fields.get("test_ids", "").split()),
    )
    return info, load_rulebase(rules)


@dataclass
class SessionState:
    session_id: str
    dataset_path: str
    bundle_path: str
    bundle: BundleInfo
    dataset: Dataset
    rulebase: RuleBase
    queue: list[str]
    history: list[dict]
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    seeds_cache: dict = field(default_factory=dict, repr=False)
    rows_cache: dict = field(default_factory=dict, repr=False)

    def selected_rows(self, image_id: str):
        if image_id not in self.rows_cache:
            img = self.dataset.images[image_id]
            z = min(self.bundle.window_z, img.height, img.width)
            seeds = detect_seed_points(img, z)
            block = image_feature_block(img, z, image_id=image_id, seeds=seeds)
            self.seeds_cache[image_id] = seeds
            self.rows_cache[image_id] = block.rows[:, list(self.bundle.selected_columns)]
        return self.rows_cache[image_id]

    def seeds(self, image_id: str) -> list[SeedPoint]:
        self.selected_rows(image_id)
        return self.seeds_cache[image_id]

    def propose(self, image_id: str) -> tuple[BinaryMask, float]:
        rows = self.selected_rows(image_id)
        spec = self.bundle.spec
        t_star = aggregate(infer(self.rulebase, rows), bounds=(spec.grid[0], spec.grid[-1]))
        mask = apply_segmenter(
            self.dataset.images[image_id],
            spec,
            t_star,
            polarity=self.bundle.polarity,
            seeds=self.seeds(image_id),
        )
        return mask, t_star


class ServiceStore:
    """Session registry plus on-disk persistence."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.sessions: dict[str, SessionState] = {}
        self._lock = threading.Lock()
        self.restore_all()

    def session_dir(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / session_id

    def create(self, dataset_path: str, bundle_path: str) -> SessionState:
        try:
            dataset = load_dataset(dataset_path)
        except (FileNotFoundError, ValueError) as exc:
            raise HTTPException(status_code=404, detail=f"dataset not found: {exc}")
        try:
            bundle, rulebase = load_bundle(bundle_path)
        except (FileNotFoundError, ValueError, KeyError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        queue = [i for i in bundle.test_ids if i in dataset.images]
        if not queue:
            queue = list(dataset.ids)
        session = SessionState(
            session_id=uuid.uuid4().hex,
            dataset_path=str(dataset_path),
            bundle_path=str(bundle_path),
            bundle=bundle,
            dataset=dataset,
            rulebase=rulebase,
            queue=queue,
            history=[],
        )
        with self._lock:
            self.sessions[session.session_id] = session
        self.persist(session)
        return session

    def get(self, session_id: str) -> SessionState:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    def persist(self, session: SessionState) -> None:
        root = self.session_dir(session.session_id)
        root.mkdir(parents=True, exist_ok=True)
        save_rulebase(session.rulebase, root / "rulebase.txt.tmp")
        os.replace(root / "rulebase.txt.tmp", root / "rulebase.txt")
        state = {
            "session_id": session.session_id,
            "dataset": session.dataset_path,
            "bundle": session.bundle_path,
            "queue": session.queue,
            "history": session.history,
        }
        tmp = root / "session.json.tmp"
        tmp.write_text(json.dumps(state, indent=1))
        os.replace(tmp, root / "session.json")

    def append_event(self, session: SessionState, event: dict) -> None:
        root = self.session_dir(session.session_id)
        with open(root / "events.log", "a") as fh:
            fh.write(json.dumps(event) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def restore_all(self) -> None:
        sess_root = self.data_dir / "sessions"
        if not sess_root.is_dir():
            return
        for path in sorted(sess_root.iterdir()):
            state_file = path / "session.json"
            if not state_file.exists():
                continue
            state = json.loads(state_file.read_text())
            try:
                dataset = load_dataset(state["dataset"])
                bundle, _ = load_bundle(state["bundle"])
            except (FileNotFoundError, ValueError, KeyError):
                continue
            session = SessionState(
                session_id=state["session_id"],
                dataset_path=state["dataset"],
                bundle_path=state["bundle"],
                bundle=bundle,
                dataset=dataset,
                rulebase=load_rulebase(path / "rulebase.txt"),
                queue=list(state["queue"]),
                history=list(state["history"]),
            )
            self.sessions[session.session_id] = session


def _b64(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def create_app(
    data_dir: str | None = None,
    default_dataset: str | None = None,
    default_config: str | None = None,
) -> FastAPI:
    root = Path(data_dir or os.environ.get("SCEFIS_DATA_DIR") or "scefis_data")
    default_bundle = None
    if default_config:
        from .config import parse_config

        default_bundle = parse_config(default_config).bundle_dir
    store = ServiceStore(root)
    app = FastAPI(title="scefis review service")
    app.state.store = store

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        dataset = req.dataset or default_dataset
        bundle = req.bundle or default_bundle
        if not dataset:
            raise HTTPException(status_code=404, detail="no dataset given and no server default")
        if not bundle:
            raise HTTPException(
                status_code=404,
                detail="no trained bundle given; train one with `scefis train --out <dir>` "
                "and pass it as 'bundle'",
            )
        session = store.create(dataset, bundle)
        return {"session_id": session.session_id, "queued": len(session.queue)}

    @app.get("/sessions/{session_id}/next")
    def next_proposal(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if not session.queue:
                return {"status": "complete", "processed": len(session.history)}
            image_id = session.queue[0]
            mask, t_star = session.propose(image_id)
            return {
                "status": "ok",
                "image_id": image_id,
                "image_png": _b64(image_to_png_bytes(session.dataset.images[image_id])),
                "proposal_png": _b64(mask_to_png_bytes(mask)),
                "inferred_param": t_star,
                "rule_count": session.rulebase.n_rules,
                "remaining": len(session.queue),
            }

    @app.post("/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, req: FeedbackRequest):
        session = store.get(session_id)
        with session.lock:
            if any(h["image_id"] == req.image_id for h in session.history):
                raise HTTPException(
                    status_code=409, detail=f"{req.image_id} was already processed"
                )
            if not session.queue or session.queue[0] != req.image_id:
                head = session.queue[0] if session.queue else None
                raise HTTPException(
                    status_code=409,
                    detail=f"out-of-order submission: expected {head}, got {req.image_id}",
                )
            try:
                corrected = mask_from_png_bytes(base64.b64decode(req.mask_png))
            except Exception:
                raise HTTPException(status_code=422, detail="mask_png is not a decodable PNG")
            img = session.dataset.images[req.image_id]
            if corrected.width != img.width or corrected.height != img.height:
                raise HTTPException(
                    status_code=422,
                    detail=f"mask is {corrected.width}x{corrected.height}, "
                    f"image is {img.width}x{img.height}",
                )
            proposal, t_star = session.propose(req.image_id)
            score = jaccard(proposal, corrected)
            rec = best_parameter_search(
                img,
                corrected,
                session.bundle.spec,
                image_id=req.image_id,
                polarity=session.bundle.polarity,
                seeds=session.seeds(req.image_id),
            )
            session.rulebase = prune_and_evolve(
                session.rulebase, session.selected_rows(req.image_id), rec.param
            )
            session.queue.pop(0)
            entry = {
                "image_id": req.image_id,
                "inferred": t_star,
                "proposal_jaccard": score,
                "accepted_param": rec.param,
                "rule_count": session.rulebase.n_rules,
            }
            session.history.append(entry)
            store.append_event(
                session, {"image_id": req.image_id, "mask_png": req.mask_png}
            )
            store.persist(session)
            return {
                "accepted_param": rec.param,
                "rule_count": session.rulebase.n_rules,
                "proposal_jaccard": score,
                "remaining": len(session.queue),
            }

    @app.get("/sessions/{session_id}/log")
    def session_log(session_id: str):
        session = store.get(session_id)
        return {"entries": session.history}

    @app.get("/sessions/{session_id}/rules/stats")
    def rule_stats(session_id: str):
        session = store.get(session_id)
        return {
            "current": session.rulebase.n_rules,
            "trajectory": [h["rule_count"] for h in session.history],
            "processed": len(session.history),
            "remaining": len(session.queue),
        }

    return app


def replay_session(session_dir: str | Path) -> RuleBase:
    """Re-run a session's event log against its bundle's initial rule base;
    the result must equal the persisted rule base."""
    root = Path(session_dir)
    state = json.loads((root / "session.json").read_text())
    dataset = load_dataset(state["dataset"])
    bundle, rulebase = load_bundle(state["bundle"])
    session = SessionState(
        session_id="replay",
        dataset_path=state["dataset"],
        bundle_path=state["bundle"],
        bundle=bundle,
        dataset=dataset,
        rulebase=rulebase,
        queue=[i for i in bundle.test_ids if i in dataset.images] or list(dataset.ids),
        history=[],
    )
    events_file = root / "events.log"
    if events_file.exists():
        for line in events_file.read_text().splitlines():
            event = json.loads(line)
            image_id = event["image_id"]
            corrected = mask_from_png_bytes(base64.b64decode(event["mask_png"]))
            rec = best_parameter_search(
                session.dataset.images[image_id],
                corrected,
                bundle.spec,
                image_id=image_id,
                polarity=bundle.polarity,
                seeds=session.seeds(image_id),
            )
            session.rulebase = prune_and_evolve(
                session.rulebase, session.selected_rows(image_id), rec.param
            )
    return session.rulebase
