"""HTTP service: live intelligent enrollment and verification.

The service loads a calibrated model once (immutable, shared read-only) and
keeps enrollment sessions in memory with an idle expiry; templates are
persisted as one JSON file per user, written atomically, so a crash or
restart loses at most the in-flight session and never a stored template.
Mutations are serialized per user; verification never writes anything.
"""

from __future__ import annotations

import dataclasses
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import signature_from_json
from .enrollment import (
    ATTEMPT_CAPS,
    EnrollmentMode,
    EnrollmentSession,
    SessionState,
    build_template,
    enroll_step,
    individual_threshold,
    load_template,
    save_template,
    verify,
)
from .errors import DegenerateCapture, SigverifyError
from .model_io import load_model

SESSION_IDLE_SECONDS = 15 * 60
USER_ID_PATTERN = re.compile(r"^[A-Za-z0-9._-]{1,64}$")


class EnrollStartRequest(BaseModel):
    user_id: str
    refs_count: int | None = None
    replace: bool = False


class VerifyRequest(BaseModel):
    user_id: str
    signature: dict
    threshold_mode: str | None = None


@dataclass
class SessionRecord:
    session_id: str
    user_id: str
    session: EnrollmentSession
    created_at: float = field(default_factory=time.time)
    last_seen: float = field(default_factory=time.time)

    @property
    def expired(self) -> bool:
        return time.time() - self.last_seen > SESSION_IDLE_SECONDS


class TemplateStore:
    """Directory of per-user template JSON files."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path_for(self, user_id: str) -> Path:
        return self.directory / f"{user_id}.json"

    def load(self, user_id: str):
        path = self.path_for(user_id)
        if not path.exists():
            return None
        return load_template(path)

    def save(self, template) -> None:
        save_template(template, self.path_for(template.user_id))


class ServiceEngine:
    """Shared service state: model, parameters, sessions, template store."""

    def __init__(self, model_path, templates_dir, threshold_mode="it", ratio=None,
                 relax_ranges=False):
        self.model = load_model(model_path)
        entry = self.model.entry_for_ratio(ratio)
        self.matcher = entry.matcher
        self.params = entry.calibration
        self.coefficient_count = self.model.coefficient_count
        self.store = TemplateStore(Path(templates_dir))
        self.default_threshold_mode = threshold_mode
        self.relax_ranges = relax_ranges
        self._lock = threading.Lock()
        self._user_locks: dict[str, threading.Lock] = {}
        self._sessions: dict[str, SessionRecord] = {}
        self._active_by_user: dict[str, str] = {}

    @property
    def calibrated(self) -> bool:
        return self.params is not None

    def user_lock(self, user_id: str) -> threading.Lock:
        with self._lock:
            return self._user_locks.setdefault(user_id, threading.Lock())

    def _drop_session(self, record: SessionRecord) -> None:
        self._sessions.pop(record.session_id, None)
        if self._active_by_user.get(record.user_id) == record.session_id:
            del self._active_by_user[record.user_id]

    def get_session(self, session_id: str) -> SessionRecord | None:
        with self._lock:
            record = self._sessions.get(session_id)
            if record is None:
                return None
            if record.expired:
                self._drop_session(record)
                return None
            record.last_seen = time.time()
            return record

    def active_session_for(self, user_id: str) -> SessionRecord | None:
        with self._lock:
            session_id = self._active_by_user.get(user_id)
            if session_id is None:
                return None
            record = self._sessions.get(session_id)
            if record is None or record.expired or record.session.state.terminal:
                if record is not None:
                    self._drop_session(record)
                return None
            return record

    def open_session(self, user_id: str, refs_count: int) -> SessionRecord:
        record = SessionRecord(
            session_id=uuid.uuid4().hex,
            user_id=user_id,
            session=EnrollmentSession(
                user_id, mode=EnrollmentMode.INTELLIGENT, refs_target=refs_count
            ),
        )
        with self._lock:
            self._sessions[record.session_id] = record
            self._active_by_user[user_id] = record.session_id
        return record


def parse_signature(doc: dict, relax_ranges: bool):
    try:
        sig, _ = signature_from_json(doc)
    except (SigverifyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=f"malformed signature: {exc}") from exc
    if not relax_ranges:
        try:
            sig.validate_ranges()
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
    return sig


def create_app(model_path, templates_dir, threshold_mode="it", ratio=None,
               relax_ranges=False, static_dir=None) -> FastAPI:
    engine = ServiceEngine(model_path, templates_dir, threshold_mode, ratio, relax_ranges)
    app = FastAPI(title="sigverify")
    app.state.engine = engine
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def require_calibration():
        if not engine.calibrated:
            raise HTTPException(status_code=503, detail="model is not calibrated")

    def check_user_id(user_id: str):
        if not USER_ID_PATTERN.match(user_id):
            raise HTTPException(
                status_code=422,
                detail="user_id must match [A-Za-z0-9._-]{1,64}",
            )

    @app.get("/api/health")
    def health():
        return {"model_loaded": True, "calibrated": engine.calibrated}

    @app.post("/api/enroll/start")
    def enroll_start(request: EnrollStartRequest):
        require_calibration()
        check_user_id(request.user_id)
        refs_count = request.refs_count or engine.params.refs_count
        if refs_count not in ATTEMPT_CAPS:
            raise HTTPException(status_code=422, detail="refs_count must be 3 or 5")
        with engine.user_lock(request.user_id):
            if engine.store.load(request.user_id) is not None and not request.replace:
                raise HTTPException(status_code=409, detail="user is already enrolled")
            if engine.active_session_for(request.user_id) is not None:
                raise HTTPException(
                    status_code=409, detail="an enrollment session is already active"
                )
            record = engine.open_session(request.user_id, refs_count)
        return {
            "session_id": record.session_id,
            "samples_needed": refs_count,
            "samples_cap": record.session.attempt_cap,
        }

    @app.post("/api/enroll/{session_id}/sample")
    def enroll_sample(session_id: str, signature: dict):
        require_calibration()
        record = engine.get_session(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown or expired session")
        with engine.user_lock(record.user_id):
            session = record.session
            if session.state.terminal:
                raise HTTPException(
                    status_code=409, detail=f"session already {session.state.value}"
                )
            sig = parse_signature(signature, engine.relax_ranges)
            try:
                enroll_step(
                    session,
                    sig,
                    engine.matcher,
                    engine.params.te,
                    engine.coefficient_count,
                )
            except DegenerateCapture as exc:
                # Failure to acquire: the sample is discarded and the
                # attempt counter is not touched.
                raise HTTPException(
                    status_code=422, detail=f"capture failure: {exc}"
                ) from exc
            if session.state is SessionState.ENROLLED:
                template = build_template(session, engine.matcher)
                it = individual_threshold(
                    engine.params.ct,
                    template.enrollment_scores,
                    engine.params.alpha1,
                    engine.params.alpha2,
                )
                engine.store.save(dataclasses.replace(template, individual_threshold=it))
        return {
            "state": session.state.value,
            "feedback": session.last_feedback,
            "samples_used": session.samples_used,
            "samples_remaining_cap": session.samples_remaining,
        }

    @app.post("/api/verify")
    def verify_endpoint(request: VerifyRequest):
        require_calibration()
        check_user_id(request.user_id)
        mode = request.threshold_mode or engine.default_threshold_mode
        if mode not in ("ct", "it"):
            raise HTTPException(status_code=422, detail="threshold_mode must be 'ct' or 'it'")
        template = engine.store.load(request.user_id)
        if template is None:
            raise HTTPException(status_code=404, detail="user is not enrolled")
        sig = parse_signature(request.signature, engine.relax_ranges)
        try:
            result = verify(
                template, sig, engine.matcher, engine.params, mode, engine.coefficient_count
            )
        except DegenerateCapture as exc:
            raise HTTPException(status_code=422, detail=f"capture failure: {exc}") from exc
        return {
            "decision": "accept" if result.accepted else "reject",
            "fused_score": result.fused_score,
            "per_reference_scores": [float(s) for s in result.reference_scores],
            "threshold_used": result.threshold_used,
            "threshold_mode": result.threshold_mode,
        }

    @app.get("/api/users/{user_id}/status")
    def user_status(user_id: str):
        check_user_id(user_id)
        template = engine.store.load(user_id)
        if template is None:
            raise HTTPException(status_code=404, detail="unknown user")
        return {
            "enrolled": True,
            "refs_count": template.refs_count,
            "it": template.individual_threshold,
            "enrollment_mode": template.enrollment_mode.value,
        }

    static = Path(static_dir) if static_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static.is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="pad")
    else:
        @app.get("/")
        def index_placeholder():
            return {"service": "sigverify", "note": "capture pad bundle not built"}

    return app


def run_server(model_path, templates_dir, host="127.0.0.1", port=8000, **kwargs) -> None:
    import uvicorn

    app = create_app(model_path, templates_dir, **kwargs)
    uvicorn.run(app, host=host, port=port, log_level="info")
