"""Intelligent enrollment and verification against stored templates.

Enrollment collects reference signatures one at a time. In intelligent mode,
once the target number of references is present they are matched pairwise
and checked for consistency; an outlier reference is dropped and the user is
asked for a replacement. The attempt budget is 6 samples for 3 references
and 10 for 5; running out of budget without a consistent set is a failure
to enroll. Normal mode accepts the first samples unchecked.

Verification scores a probe against every stored reference, fuses the scores
(max or mean) and accepts iff the fused score reaches the common or the
individual threshold, depending on the operation mode.
"""

from __future__ import annotations

import enum
import json
import os
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import (
    EmptyEnrollmentScores,
    EmptyScores,
    IncompleteScores,
    NotEnrolled,
    SessionTerminal,
)
from .features import DEFAULT_COEFFICIENT_COUNT, extract_features
from .matcher import TrainedMatcher, score
from .signals import RawSignature, derive_channels, normalize

ATTEMPT_CAPS = {3: 6, 5: 10}

FEEDBACK_REJECTED = "sample inconsistent with other references, please sign again"
FEEDBACK_ENROLLED = "enrollment complete"
FEEDBACK_FAILED = (
    "enrollment failed: no consistent reference set could be formed; "
    "this user must be verified by other biometrics or by human abilities"
)


class EnrollmentMode(str, enum.Enum):
    INTELLIGENT = "intelligent"
    NORMAL = "normal"


class SessionState(str, enum.Enum):
    COLLECTING = "collecting"
    NEEDS_REPLACEMENT = "needs_replacement"
    ENROLLED = "enrolled"
    FAILED_TO_ENROLL = "failed_to_enroll"

    @property
    def terminal(self) -> bool:
        return self in (SessionState.ENROLLED, SessionState.FAILED_TO_ENROLL)


def individual_threshold(ct: float, enrollment_scores, alpha1: float, alpha2: float) -> float:
    """Per-user threshold interpolated between CT and the user's weakest
    enrollment score.

    With m = min(ES): users whose m lies under CT get alpha1 (lowering the
    threshold mostly trims FRR), the rest get alpha2 (raising it mostly
    trims FAR); IT = (1 - alpha) * CT + alpha * m.
    """
    scores = np.asarray(enrollment_scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyEnrollmentScores("no enrollment scores to derive a threshold from")
    if not (0.0 <= alpha1 <= 1.0 and 0.0 <= alpha2 <= 1.0):
        raise ValueError("alphas must lie in [0, 1]")
    m = float(scores.min())
    alpha = alpha1 if m < ct else alpha2
    return (1.0 - alpha) * ct + alpha * m


@dataclass
class EnrollmentSession:
    """Mutable per-user enrollment state; single writer per session."""

    user_id: str
    mode: EnrollmentMode = EnrollmentMode.INTELLIGENT
    refs_target: int = 5
    samples_used: int = 0
    accepted_refs: list[np.ndarray] = field(default_factory=list)
    state: SessionState = SessionState.COLLECTING
    last_feedback: str = ""

    def __post_init__(self):
        if self.refs_target not in ATTEMPT_CAPS:
            raise ValueError(f"refs_target must be one of {sorted(ATTEMPT_CAPS)}")
        self.mode = EnrollmentMode(self.mode)

    @property
    def attempt_cap(self) -> int:
        return ATTEMPT_CAPS[self.refs_target]

    @property
    def samples_remaining(self) -> int:
        return self.attempt_cap - self.samples_used


@dataclass(frozen=True)
class EnrollmentTemplate:
    """Accepted references with their pairwise enrollment scores.

    enrollment_scores are stored so the individual threshold can be
    recomputed whenever the system parameters change; individual_threshold
    here is the value at template creation time.
    """

    user_id: str
    references: np.ndarray  # (refs_target, feature_length)
    enrollment_scores: np.ndarray  # C(refs_target, 2) pairwise scores
    individual_threshold: float | None
    enrollment_mode: EnrollmentMode
    created_at: float

    @property
    def refs_count(self) -> int:
        return self.references.shape[0]


def consistency_check(score_matrix: np.ndarray, te: float, refs_target: int) -> int | None:
    """Return the index of the reference to reject, or None if consistent.

    Reference i mismatches reference j iff their pair score is strictly
    below TE. With three references one is rejectable iff it mismatches both
    others; with five, iff it mismatches at least three of the other four.
    When several qualify, the one with the lowest total pairwise score goes
    (lowest index on ties); only one reference is rejected per round.
    """
    m = np.asarray(score_matrix, dtype=np.float64)
    if m.shape != (refs_target, refs_target):
        raise IncompleteScores(
            f"expected a {refs_target}x{refs_target} score matrix, got {m.shape}"
        )
    off_diagonal = ~np.eye(refs_target, dtype=bool)
    if np.isnan(m[off_diagonal]).any():
        raise IncompleteScores("score matrix has missing pairs")
    mismatches = ((m < te) & off_diagonal).sum(axis=1)
    needed = 2 if refs_target == 3 else 3
    rejectable = np.flatnonzero(mismatches >= needed)
    if rejectable.size == 0:
        return None
    sums = m[rejectable].sum(axis=1) - np.diag(m)[rejectable]
    return int(rejectable[np.argmin(sums)])  # argmin ties resolve to lowest index


def pairwise_score_matrix(refs: list[np.ndarray], scorer: Callable[[np.ndarray, np.ndarray], float]) -> np.ndarray:
    n = len(refs)
    m = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        s = scorer(refs[i], refs[j])
        m[i, j] = m[j, i] = s
    return m


def signature_features(raw: RawSignature, count: int = DEFAULT_COEFFICIENT_COUNT) -> np.ndarray:
    """Capture-to-features pipeline: normalize, derive channels, DCT."""
    return extract_features(derive_channels(normalize(raw)), count)


def advance_session(
    session: EnrollmentSession,
    features: np.ndarray,
    scorer: Callable[[np.ndarray, np.ndarray], float],
    te: float,
) -> EnrollmentSession:
    """Drive the enrollment state machine with one extracted sample.

    Separated from enroll_step so the consistency logic can be exercised
    with scripted scorers.
    """
    if session.state.terminal:
        raise SessionTerminal(f"session for {session.user_id} is {session.state.value}")
    session.samples_used += 1
    session.accepted_refs.append(features)
    if len(session.accepted_refs) < session.refs_target:
        session.state = SessionState.COLLECTING
        session.last_feedback = (
            f"sample {session.samples_used} accepted, "
            f"{session.refs_target - len(session.accepted_refs)} more needed"
        )
        return session
    if session.mode is EnrollmentMode.NORMAL:
        session.state = SessionState.ENROLLED
        session.last_feedback = FEEDBACK_ENROLLED
        return session
    matrix = pairwise_score_matrix(session.accepted_refs, scorer)
    reject = consistency_check(matrix, te, session.refs_target)
    if reject is None:
        session.state = SessionState.ENROLLED
        session.last_feedback = FEEDBACK_ENROLLED
    else:
        del session.accepted_refs[reject]
        if session.samples_used >= session.attempt_cap:
            session.state = SessionState.FAILED_TO_ENROLL
            session.last_feedback = FEEDBACK_FAILED
        else:
            session.state = SessionState.NEEDS_REPLACEMENT
            session.last_feedback = FEEDBACK_REJECTED
    return session


def enroll_step(
    session: EnrollmentSession,
    sample: RawSignature,
    matcher: TrainedMatcher,
    te: float,
    count: int = DEFAULT_COEFFICIENT_COUNT,
) -> EnrollmentSession:
    """Feed one captured signature into an enrollment session.

    DegenerateCapture from normalization propagates before the attempt
    counter moves: a failed acquisition never costs enrollment budget.
    """
    features = signature_features(sample, count)
    return advance_session(session, features, lambda a, b: score(matcher, a, b), te)


def enroll_from_pool(
    user_id: str,
    pool,
    matcher: TrainedMatcher,
    te: float,
    refs_target: int,
    mode: EnrollmentMode = EnrollmentMode.INTELLIGENT,
) -> EnrollmentSession:
    """Drive a session from a finite pool of pre-extracted feature vectors.

    Corpus simulation semantics: a None entry is a failed acquisition that
    consumed a corpus sample without costing an enrollment attempt; an
    exhausted pool without a consistent set is a failure to enroll.
    """
    session = EnrollmentSession(user_id, mode=mode, refs_target=refs_target)
    for features in pool:
        if session.state.terminal:
            break
        if features is None:
            continue
        advance_session(session, features, lambda a, b: score(matcher, a, b), te)
    if not session.state.terminal:
        session.state = SessionState.FAILED_TO_ENROLL
        session.last_feedback = FEEDBACK_FAILED
    return session


def build_template(
    session: EnrollmentSession,
    matcher: TrainedMatcher,
    individual_threshold_value: float | None = None,
    created_at: float | None = None,
) -> EnrollmentTemplate:
    """Freeze an enrolled session into a template with its pairwise scores."""
    if session.state is not SessionState.ENROLLED:
        raise NotEnrolled(f"session for {session.user_id} is {session.state.value}")
    refs = np.vstack(session.accepted_refs)
    es = enrollment_scores(refs, matcher)
    return EnrollmentTemplate(
        user_id=session.user_id,
        references=refs,
        enrollment_scores=es,
        individual_threshold=individual_threshold_value,
        enrollment_mode=session.mode,
        created_at=time.time() if created_at is None else created_at,
    )


def enrollment_scores(references: np.ndarray, matcher: TrainedMatcher) -> np.ndarray:
    """Pairwise reference scores in combination order (0,1), (0,2), ..."""
    n = references.shape[0]
    return np.array([score(matcher, references[i], references[j]) for i, j in combinations(range(n), 2)])


def fuse(reference_scores, method: str) -> float:
    """Combine per-reference scores into one decision score (max or mean)."""
    scores = np.asarray(reference_scores, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScores("cannot fuse an empty score list")
    if method == "max":
        return float(scores.max())
    if method == "mean":
        return float(scores.mean())
    raise ValueError(f"unknown fusion method {method!r}")


@dataclass(frozen=True)
class VerificationResult:
    accepted: bool
    fused_score: float
    reference_scores: np.ndarray
    threshold_used: float
    threshold_mode: str


def verify(
    template: EnrollmentTemplate,
    probe: RawSignature,
    matcher: TrainedMatcher,
    params,
    threshold_mode: str = "ct",
    count: int = DEFAULT_COEFFICIENT_COUNT,
) -> VerificationResult:
    """Score a probe against every reference and decide accept/reject.

    Accept iff the fused score >= the common threshold (mode "ct") or the
    user's individual threshold recomputed from the stored enrollment
    scores (mode "it"). A fused score exactly at the threshold is accepted.
    """
    if threshold_mode not in ("ct", "it"):
        raise ValueError(f"threshold_mode must be 'ct' or 'it', got {threshold_mode!r}")
    features = signature_features(probe, count)
    per_ref = np.array([score(matcher, features, ref) for ref in template.references])
    fused = fuse(per_ref, params.fusion)
    if threshold_mode == "ct":
        threshold = params.ct
    else:
        threshold = individual_threshold(
            params.ct, template.enrollment_scores, params.alpha1, params.alpha2
        )
    return VerificationResult(
        accepted=bool(fused >= threshold),
        fused_score=fused,
        reference_scores=per_ref,
        threshold_used=float(threshold),
        threshold_mode=threshold_mode,
    )


# Template persistence: one JSON document per user, written atomically.

def template_to_json(template: EnrollmentTemplate) -> dict:
    return {
        "user_id": template.user_id,
        "references": [list(map(float, row)) for row in template.references],
        "enrollment_scores": [float(s) for s in template.enrollment_scores],
        "individual_threshold": template.individual_threshold,
        "enrollment_mode": template.enrollment_mode.value,
        "created_at": template.created_at,
    }


def template_from_json(doc: dict) -> EnrollmentTemplate:
    return EnrollmentTemplate(
        user_id=doc["user_id"],
        references=np.asarray(doc["references"], dtype=np.float64),
        enrollment_scores=np.asarray(doc["enrollment_scores"], dtype=np.float64),
        individual_threshold=doc.get("individual_threshold"),
        enrollment_mode=EnrollmentMode(doc["enrollment_mode"]),
        created_at=doc.get("created_at", 0.0),
    )


def save_template(template: EnrollmentTemplate, path) -> None:
    """Write-temp-then-rename so a crash never leaves a partial template."""
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(template_to_json(template), fh)
    os.replace(tmp, path)


def load_template(path) -> EnrollmentTemplate:
    with open(path, encoding="utf-8") as fh:
        return template_from_json(json.load(fh))
