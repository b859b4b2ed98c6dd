"""Pairwise quadratic discriminant matcher.

The verification question "are these two signatures from the same person?"
is posed as a dichotomy on feature-difference vectors: client samples are
differences of two genuine signatures of one user, impostor samples are
differences between a genuine signature and a forgery of that user. Both
classes are symmetric around the origin by construction, so class second
moments are taken about zero. The discriminant is

    g(x) = 0.5 * x^T (Si^-1 - Sc^-1) x + 0.5 * ln(|Si|/|Sc|) + ln(P(C)/P(I))

which is larger for more-genuine-looking pairs. Features are selected by
thresholding the per-feature ratio sigma_client / sigma_impostor: a feature
helps when genuine pairs vary much less than impostor pairs along it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    EmptySelection,
    InsufficientData,
    SingularCovariance,
)

LABEL_CLIENT = "client"
LABEL_IMPOSTOR = "impostor"

DEFAULT_RIDGE_POLICY = "relative-1e-6"
_RELATIVE_RIDGE = 1e-6


@dataclass(frozen=True)
class PairSample:
    """One signature-difference vector with its pair label."""

    diff: np.ndarray
    label: str


def build_pairs(
    genuine_by_user: Mapping[str, Sequence[np.ndarray]],
    forgery_by_user: Mapping[str, Sequence[np.ndarray]],
) -> list[PairSample]:
    """Enumerate labeled difference vectors for matcher training.

    Client samples come from all unordered genuine-genuine pairs within each
    user, impostor samples from every genuine-forgery pair of the same user
    (the forger imitates that user). Each unordered pair contributes both
    orderings of the difference, which makes the sample mean of each class
    exactly zero.
    """
    client, impostor = build_pair_matrices(genuine_by_user, forgery_by_user)
    samples = [PairSample(d, LABEL_CLIENT) for d in client]
    samples.extend(PairSample(d, LABEL_IMPOSTOR) for d in impostor)
    return samples


def build_pair_matrices(
    genuine_by_user: Mapping[str, Sequence[np.ndarray]],
    forgery_by_user: Mapping[str, Sequence[np.ndarray]],
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked symmetrized difference matrices (client, impostor)."""
    client_rows = []
    impostor_rows = []
    for user in genuine_by_user:
        genuine = [np.asarray(v, dtype=np.float64) for v in genuine_by_user[user]]
        forgeries = [np.asarray(v, dtype=np.float64) for v in forgery_by_user.get(user, ())]
        for a, b in combinations(genuine, 2):
            d = a - b
            client_rows.append(d)
            client_rows.append(-d)
        for g in genuine:
            for f in forgeries:
                d = g - f
                impostor_rows.append(d)
                impostor_rows.append(-d)
    if not client_rows:
        raise InsufficientData("no user has two genuine signatures; cannot form client pairs")
    client = np.vstack(client_rows)
    impostor = np.vstack(impostor_rows) if impostor_rows else np.empty((0, client.shape[1]))
    return client, impostor


@dataclass(frozen=True)
class CovarianceStats:
    """Full-feature second-moment statistics of the two pair classes."""

    cov_client: np.ndarray
    cov_impostor: np.ndarray
    sigma_c_diag: np.ndarray
    sigma_i_diag: np.ndarray
    n_client: int
    n_impostor: int
    p_client: float = 0.5
    p_impostor: float = 0.5
    ridge_policy: str = DEFAULT_RIDGE_POLICY


def _second_moment(diffs: np.ndarray) -> np.ndarray:
    # Moments about zero, not about the sample mean: the classes are
    # symmetric around the origin by construction.
    return diffs.T @ diffs / diffs.shape[0]


def train(
    pairs: Iterable[PairSample] | tuple[np.ndarray, np.ndarray],
    p_client: float = 0.5,
    p_impostor: float = 0.5,
    ridge_policy: str = DEFAULT_RIDGE_POLICY,
) -> CovarianceStats:
    """Compute class covariances over the full feature set.

    Accepts either a PairSample collection or a pre-stacked
    (client_diffs, impostor_diffs) matrix pair. Needs at least two samples
    per class.
    """
    if isinstance(pairs, tuple):
        client, impostor = pairs
        client = np.atleast_2d(np.asarray(client, dtype=np.float64))
        impostor = np.atleast_2d(np.asarray(impostor, dtype=np.float64))
    else:
        samples = list(pairs)
        client_rows = [s.diff for s in samples if s.label == LABEL_CLIENT]
        impostor_rows = [s.diff for s in samples if s.label == LABEL_IMPOSTOR]
        client = np.vstack(client_rows) if client_rows else np.empty((0, 0))
        impostor = np.vstack(impostor_rows) if impostor_rows else np.empty((0, 0))
    if client.shape[0] < 2 or impostor.shape[0] < 2:
        raise InsufficientData(
            f"need >= 2 samples per class, got {client.shape[0]} client / "
            f"{impostor.shape[0]} impostor"
        )
    if client.shape[1] != impostor.shape[1]:
        raise DimensionMismatch("client and impostor diffs disagree on feature length")
    cov_c = _second_moment(client)
    cov_i = _second_moment(impostor)
    return CovarianceStats(
        cov_client=cov_c,
        cov_impostor=cov_i,
        sigma_c_diag=np.sqrt(np.diag(cov_c)),
        sigma_i_diag=np.sqrt(np.diag(cov_i)),
        n_client=client.shape[0],
        n_impostor=impostor.shape[0],
        p_client=p_client,
        p_impostor=p_impostor,
        ridge_policy=ridge_policy,
    )


def select_features(
    sigma_c_diag: np.ndarray,
    sigma_i_diag: np.ndarray,
    ratio_threshold: float,
) -> np.ndarray:
    """Boolean mask of features whose sigma_c / sigma_i ratio passes the threshold.

    sigma_i = 0 means the impostor class never varies along the feature: the
    ratio is +inf (never selected), unless sigma_c = 0 too, in which case the
    feature is perfectly stable for clients and the ratio is taken as 0.
    """
    if ratio_threshold <= 0:
        raise ValueError("ratio_threshold must be positive")
    sc = np.asarray(sigma_c_diag, dtype=np.float64)
    si = np.asarray(sigma_i_diag, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(si > 0, sc / np.where(si > 0, si, 1.0), np.where(sc == 0, 0.0, np.inf))
    mask = ratio <= ratio_threshold
    if not mask.any():
        raise EmptySelection(
            f"no feature has sigma_c/sigma_i <= {ratio_threshold}; raise the threshold"
        )
    return mask


@dataclass(frozen=True)
class TrainedMatcher:
    """Selected-feature quadratic discriminant, immutable and shareable.

    cov_client / cov_impostor are the regularized covariances actually
    inverted (kept for persistence and audits); sigma_*_diag cover the full
    feature set so selection can be re-examined later.
    """

    feature_mask: np.ndarray
    sigma_c_diag: np.ndarray
    sigma_i_diag: np.ndarray
    cov_client: np.ndarray
    cov_impostor: np.ndarray
    cov_c_inv: np.ndarray
    cov_i_inv: np.ndarray
    log_det_ratio: float
    prior_term: float
    ridge_client: float
    ridge_impostor: float
    ridge_policy: str
    p_client: float
    p_impostor: float
    ratio_threshold: float | None = None  # selection threshold used, for bookkeeping
    quad: np.ndarray = field(repr=False, default=None)  # 0.5 * (Si^-1 - Sc^-1), cached

    def __post_init__(self):
        if self.quad is None:
            object.__setattr__(self, "quad", 0.5 * (self.cov_i_inv - self.cov_c_inv))

    @property
    def constant_term(self) -> float:
        """Score of an identical pair (zero difference vector)."""
        return self.log_det_ratio + self.prior_term

    @property
    def selected_count(self) -> int:
        return int(self.feature_mask.sum())


def _cholesky_inverse(cov: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    """Inverse and log-determinant via Cholesky; raises SingularCovariance."""
    try:
        factor = scipy.linalg.cho_factor(cov, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularCovariance(f"{what} covariance is not positive definite") from exc
    inv = scipy.linalg.cho_solve(factor, np.eye(cov.shape[0]), check_finite=False)
    log_det = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return inv, log_det


def finalize(
    stats: CovarianceStats,
    feature_mask: np.ndarray,
    ridge_policy: str | None = None,
) -> TrainedMatcher:
    """Restrict covariances to the selected features and build the matcher.

    Under the default "relative-1e-6" policy each class covariance receives
    lambda*I with lambda = 1e-6 * trace(S)/d, which keeps near-singular
    moment matrices invertible without visibly distorting scores; the
    applied lambdas are recorded on the matcher. Policy "none" inverts the
    raw matrices and lets SingularCovariance surface.
    """
    mask = np.asarray(feature_mask, dtype=bool)
    if not mask.any():
        raise EmptySelection("feature mask selects nothing")
    policy = stats.ridge_policy if ridge_policy is None else ridge_policy
    cov_c = stats.cov_client[np.ix_(mask, mask)]
    cov_i = stats.cov_impostor[np.ix_(mask, mask)]
    d = cov_c.shape[0]
    if policy == "relative-1e-6":
        lam_c = _RELATIVE_RIDGE * float(np.trace(cov_c)) / d
        lam_i = _RELATIVE_RIDGE * float(np.trace(cov_i)) / d
    elif policy == "none":
        lam_c = lam_i = 0.0
    else:
        raise ValueError(f"unknown ridge policy {policy!r}")
    cov_c = cov_c + lam_c * np.eye(d)
    cov_i = cov_i + lam_i * np.eye(d)
    inv_c, log_det_c = _cholesky_inverse(cov_c, "client")
    inv_i, log_det_i = _cholesky_inverse(cov_i, "impostor")
    return TrainedMatcher(
        feature_mask=mask,
        sigma_c_diag=stats.sigma_c_diag.copy(),
        sigma_i_diag=stats.sigma_i_diag.copy(),
        cov_client=cov_c,
        cov_impostor=cov_i,
        cov_c_inv=inv_c,
        cov_i_inv=inv_i,
        log_det_ratio=0.5 * (log_det_i - log_det_c),
        prior_term=float(np.log(stats.p_client / stats.p_impostor)),
        ridge_client=lam_c,
        ridge_impostor=lam_i,
        ridge_policy=policy,
        p_client=stats.p_client,
        p_impostor=stats.p_impostor,
    )


def train_matcher(
    genuine_by_user: Mapping[str, Sequence[np.ndarray]],
    forgery_by_user: Mapping[str, Sequence[np.ndarray]],
    ratio_threshold: float,
    p_client: float = 0.5,
    p_impostor: float = 0.5,
    ridge_policy: str = DEFAULT_RIDGE_POLICY,
) -> tuple[TrainedMatcher, np.ndarray, np.ndarray]:
    """Full training pipeline: pairs -> moments -> selection -> matcher.

    Also returns the stacked (client, impostor) difference matrices so the
    caller can score the training set itself, e.g. for the initial
    threshold.
    """
    client, impostor = build_pair_matrices(genuine_by_user, forgery_by_user)
    stats = train(
        (client, impostor), p_client=p_client, p_impostor=p_impostor, ridge_policy=ridge_policy
    )
    mask = select_features(stats.sigma_c_diag, stats.sigma_i_diag, ratio_threshold)
    matcher = dataclasses.replace(finalize(stats, mask), ratio_threshold=ratio_threshold, quad=None)
    return matcher, client, impostor


def _masked(matcher: TrainedMatcher, vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if v.shape[-1] != matcher.feature_mask.shape[0]:
        raise DimensionMismatch(
            f"feature vector has length {v.shape[-1]}, matcher expects "
            f"{matcher.feature_mask.shape[0]}"
        )
    return v[..., matcher.feature_mask]


def score(matcher: TrainedMatcher, fa: np.ndarray, fb: np.ndarray) -> float:
    """Discriminant score of a signature pair; larger means more genuine.

    The quadratic form is even in the difference vector, so the score is
    symmetric in its arguments bit for bit.
    """
    x = _masked(matcher, fa) - _masked(matcher, fb)
    return float(x @ matcher.quad @ x) + matcher.constant_term


def score_many(matcher: TrainedMatcher, probes: np.ndarray, references: np.ndarray) -> np.ndarray:
    """Score matrix of shape (n_probes, n_references)."""
    p = _masked(matcher, np.atleast_2d(probes))
    r = _masked(matcher, np.atleast_2d(references))
    out = np.empty((p.shape[0], r.shape[0]))
    for j in range(r.shape[0]):
        x = p - r[j]
        out[:, j] = np.einsum("ij,jk,ik->i", x, matcher.quad, x)
    return out + matcher.constant_term


def score_diffs(matcher: TrainedMatcher, diffs: np.ndarray) -> np.ndarray:
    """Scores of pre-computed full-length difference vectors, one per row."""
    x = _masked(matcher, np.atleast_2d(diffs))
    return np.einsum("ij,jk,ik->i", x, matcher.quad, x) + matcher.constant_term
