"""System adjustment: operating thresholds and individual-threshold parameters.

Adjustment happens on a validation set disjoint from the matcher's training
users. The initial threshold T0 comes from the training pair scores; each
validation user is then enrolled with consistency checking at T0, and the
remaining signatures yield the enrollment threshold TE (single-reference
scores), the common threshold CT (fused scores) and the per-type
interpolation weights alpha1/alpha2, all chosen to minimize the detection
cost function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .enrollment import (
    ATTEMPT_CAPS,
    EnrollmentMode,
    SessionState,
    enroll_from_pool,
    enrollment_scores,
    individual_threshold,  # noqa: F401  (re-export: it belongs to this surface)
)
from .errors import DataError, NoEnrollableUsers
from .matcher import TrainedMatcher, score_diffs, score_many
from .metrics import CostModel, ScoreSets, dcf, min_dcf

ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(11))

FUSION_METHODS = ("max", "mean")


@dataclass(frozen=True)
class SystemParameters:
    """Everything the operating system needs after training and adjustment."""

    ratio_threshold: float
    t0: float
    te: float
    ct: float
    alpha1: float
    alpha2: float
    fusion: str
    refs_count: int
    costs: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        if not (0.0 <= self.alpha1 <= 1.0 and 0.0 <= self.alpha2 <= 1.0):
            raise ValueError("alpha1 and alpha2 must lie in [0, 1]")
        if self.refs_count not in ATTEMPT_CAPS:
            raise ValueError(f"refs_count must be one of {sorted(ATTEMPT_CAPS)}")
        if self.fusion not in FUSION_METHODS:
            raise ValueError(f"fusion must be one of {FUSION_METHODS}")


def fuse_rows(matrix: np.ndarray, method: str) -> np.ndarray:
    """Fuse each row of a (probes x references) score matrix."""
    if method == "max":
        return matrix.max(axis=1)
    if method == "mean":
        return matrix.mean(axis=1)
    raise ValueError(f"unknown fusion method {method!r}")


@dataclass(frozen=True)
class UserScorePool:
    """Per-user fused test scores plus the minimum enrollment score."""

    genuine_sorted: np.ndarray
    forgery_sorted: np.ndarray
    es_min: float


def it_rates(
    pools: Sequence[UserScorePool], ct: float, alpha1: float, alpha2: float
) -> tuple[float, float]:
    """Pooled (FRR, FAR) when every user decides at their individual threshold."""
    rejected = accepted = 0
    total_genuine = total_forgery = 0
    for pool in pools:
        alpha = alpha1 if pool.es_min < ct else alpha2
        it = (1.0 - alpha) * ct + alpha * pool.es_min
        rejected += int(np.searchsorted(pool.genuine_sorted, it, side="left"))
        accepted += pool.forgery_sorted.size - int(
            np.searchsorted(pool.forgery_sorted, it, side="left")
        )
        total_genuine += pool.genuine_sorted.size
        total_forgery += pool.forgery_sorted.size
    if total_genuine == 0 or total_forgery == 0:
        raise DataError("individual-threshold rates need both genuine and forgery trials")
    return rejected / total_genuine, accepted / total_forgery


def grid_search_alphas(
    pools: Sequence[UserScorePool], ct: float, costs: CostModel
) -> tuple[float, float, float]:
    """Minimize DCF over the 11x11 alpha grid at a fixed common threshold.

    Ties break toward smaller (alpha1, alpha2), i.e. toward the plain
    common-threshold system.
    """
    best = None
    for a1 in ALPHA_GRID:
        for a2 in ALPHA_GRID:
            frr, far = it_rates(pools, ct, a1, a2)
            value = dcf(frr, far, costs)
            if best is None or value < best[2]:
                best = (a1, a2, value)
    return best


def build_user_pool(
    matcher: TrainedMatcher,
    references: np.ndarray,
    genuine_probes: np.ndarray,
    forgery_probes: np.ndarray,
    fusion: str,
) -> tuple[UserScorePool, np.ndarray, np.ndarray]:
    """Score a user's probes against their references.

    Returns the fused per-user pool plus the raw single-reference score
    matrices (genuine, forgery) for threshold work that matches with one
    reference at a time.
    """
    g_matrix = (
        score_many(matcher, genuine_probes, references)
        if len(genuine_probes)
        else np.empty((0, references.shape[0]))
    )
    f_matrix = (
        score_many(matcher, forgery_probes, references)
        if len(forgery_probes)
        else np.empty((0, references.shape[0]))
    )
    es = enrollment_scores(references, matcher)
    pool = UserScorePool(
        genuine_sorted=np.sort(fuse_rows(g_matrix, fusion)) if g_matrix.size else np.empty(0),
        forgery_sorted=np.sort(fuse_rows(f_matrix, fusion)) if f_matrix.size else np.empty(0),
        es_min=float(es.min()),
    )
    return pool, g_matrix, f_matrix


def initial_threshold(
    matcher: TrainedMatcher,
    train_client_diffs: np.ndarray,
    train_impostor_diffs: np.ndarray,
    costs: CostModel = CostModel(),
) -> float:
    """T0: the min-DCF threshold over the training set's own pair scores."""
    t0, _ = min_dcf(
        ScoreSets(
            score_diffs(matcher, train_client_diffs),
            score_diffs(matcher, train_impostor_diffs),
        ),
        costs,
    )
    return t0


def adjust_system(
    matcher: TrainedMatcher,
    train_client_diffs: np.ndarray | None,
    train_impostor_diffs: np.ndarray | None,
    validation_features: Mapping[str, tuple[Sequence, Sequence]],
    refs_count: int,
    fusion: str,
    costs: CostModel = CostModel(),
    t0: float | None = None,
) -> SystemParameters:
    """Derive T0, TE, CT and the alpha pair from the validation set.

    validation_features maps user id to (genuine feature list, forgery
    feature list); entries may contain None for failed acquisitions. The
    first 6 (3 refs) or 10 (5 refs) genuine signatures of each user are the
    enrollment pool, the rest are threshold-fitting probes. Users that fail
    to enroll at T0 are left out; if all of them fail the system cannot be
    adjusted. T0 may be passed directly (e.g. from a stored model) instead
    of the training difference matrices.
    """
    if t0 is None:
        t0 = initial_threshold(matcher, train_client_diffs, train_impostor_diffs, costs)
    reserved = ATTEMPT_CAPS[refs_count]
    pools: list[UserScorePool] = []
    genuine_singles: list[np.ndarray] = []
    impostor_singles: list[np.ndarray] = []
    genuine_fused: list[np.ndarray] = []
    impostor_fused: list[np.ndarray] = []
    enrolled = 0
    for user_id, (genuine, forgeries) in validation_features.items():
        if len(genuine) <= reserved:
            raise DataError(
                f"user {user_id} has only {len(genuine)} genuine signatures; "
                f"adjustment needs more than the {reserved} reserved for enrollment"
            )
        session = enroll_from_pool(
            user_id, genuine[:reserved], matcher, t0, refs_count, EnrollmentMode.INTELLIGENT
        )
        if session.state is not SessionState.ENROLLED:
            continue
        enrolled += 1
        references = np.vstack(session.accepted_refs)
        g_probes = np.array([v for v in genuine[reserved:] if v is not None])
        f_probes = np.array([v for v in forgeries if v is not None])
        pool, g_matrix, f_matrix = build_user_pool(
            matcher, references, g_probes, f_probes, fusion
        )
        pools.append(pool)
        genuine_singles.append(g_matrix.ravel())
        impostor_singles.append(f_matrix.ravel())
        genuine_fused.append(pool.genuine_sorted)
        impostor_fused.append(pool.forgery_sorted)
    if enrolled == 0:
        raise NoEnrollableUsers("every validation user failed to enroll at T0")
    te, _ = min_dcf(
        ScoreSets(np.concatenate(genuine_singles), np.concatenate(impostor_singles)), costs
    )
    ct, _ = min_dcf(
        ScoreSets(np.concatenate(genuine_fused), np.concatenate(impostor_fused)), costs
    )
    alpha1, alpha2, _ = grid_search_alphas(pools, ct, costs)
    return SystemParameters(
        ratio_threshold=matcher.ratio_threshold if matcher.ratio_threshold is not None else 0.0,
        t0=t0,
        te=te,
        ct=ct,
        alpha1=alpha1,
        alpha2=alpha2,
        fusion=fusion,
        refs_count=refs_count,
        costs=costs,
    )
