"""Verification error rates and threshold sweeps.

Accept convention everywhere: a trial is accepted iff its score >= threshold.
The candidate threshold grid for any sweep is the set of midpoints between
consecutive distinct score values plus one value below the minimum and one
above the maximum; on finite data this grid reaches every achievable
(FAR, FRR) operating point. Ties are broken toward the smallest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyScores


@dataclass(frozen=True)
class ScoreSets:
    """Genuine-trial and impostor-trial score pools."""

    genuine: np.ndarray
    impostor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "genuine", np.asarray(self.genuine, dtype=np.float64))
        object.__setattr__(self, "impostor", np.asarray(self.impostor, dtype=np.float64))

    def require_nonempty(self) -> None:
        if self.genuine.size == 0 or self.impostor.size == 0:
            raise EmptyScores("both genuine and impostor score sets must be non-empty")


@dataclass(frozen=True)
class CostModel:
    """Costs and priors of the detection cost function."""

    c_fr: float = 1.0
    c_fa: float = 1.0
    p_client: float = 0.5
    p_impostor: float = 0.5

    def __post_init__(self):
        if self.c_fr <= 0 or self.c_fa <= 0:
            raise ValueError("costs must be positive")
        if self.p_client <= 0 or self.p_impostor <= 0:
            raise ValueError("priors must be positive")
        if abs(self.p_client + self.p_impostor - 1.0) > 1e-9:
            raise ValueError("priors must sum to 1")


def compute_rates(sets: ScoreSets, threshold: float) -> tuple[float, float]:
    """(FRR, FAR) at a threshold: genuine below it are rejected, impostors at
    or above it are accepted."""
    sets.require_nonempty()
    frr = float(np.count_nonzero(sets.genuine < threshold)) / sets.genuine.size
    far = float(np.count_nonzero(sets.impostor >= threshold)) / sets.impostor.size
    return frr, far


def dcf(frr: float, far: float, costs: CostModel = CostModel()) -> float:
    """Expected decision cost: C_FR * FRR * P(C) + C_FA * FAR * P(I)."""
    return costs.c_fr * frr * costs.p_client + costs.c_fa * far * costs.p_impostor


def candidate_thresholds(sets: ScoreSets) -> np.ndarray:
    """Midpoints of consecutive distinct scores, bracketed by one value below
    the minimum (accept everything) and one above the maximum (reject
    everything). Ascending."""
    sets.require_nonempty()
    values = np.unique(np.concatenate([sets.genuine, sets.impostor]))
    mids = (values[:-1] + values[1:]) / 2.0
    return np.concatenate([[values[0] - 1.0], mids, [values[-1] + 1.0]])


def _rates_at(sets: ScoreSets, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    genuine = np.sort(sets.genuine)
    impostor = np.sort(sets.impostor)
    frr = np.searchsorted(genuine, thresholds, side="left") / genuine.size
    far = (impostor.size - np.searchsorted(impostor, thresholds, side="left")) / impostor.size
    return frr, far


def min_dcf(sets: ScoreSets, costs: CostModel = CostModel()) -> tuple[float, float]:
    """Exhaustive sweep over the candidate grid; returns (threshold, dcf)."""
    thresholds = candidate_thresholds(sets)
    frr, far = _rates_at(sets, thresholds)
    values = costs.c_fr * frr * costs.p_client + costs.c_fa * far * costs.p_impostor
    i = int(np.argmin(values))  # argmin takes the first minimum: smallest threshold
    return float(thresholds[i]), float(values[i])


def eer(sets: ScoreSets) -> tuple[float, float]:
    """Threshold balancing FAR and FRR over the candidate grid.

    Returns (threshold, (FAR + FRR) / 2 at that threshold); no interpolation
    between grid points is applied.
    """
    thresholds = candidate_thresholds(sets)
    frr, far = _rates_at(sets, thresholds)
    i = int(np.argmin(np.abs(far - frr)))
    return float(thresholds[i]), float((far[i] + frr[i]) / 2.0)


def det_curve(sets: ScoreSets, normal_deviate: bool = False) -> list[tuple[float, float]]:
    """(FAR, FRR) at every candidate threshold, sorted by FAR ascending.

    Points are emitted raw by default, one per candidate threshold, with no
    deduplication. With normal_deviate=True both rates are mapped through
    the standard-normal quantile function for the classical DET axes (rates
    are clipped away from 0 and 1 to keep the deviates finite).
    """
    thresholds = candidate_thresholds(sets)
    frr, far = _rates_at(sets, thresholds)
    # Threshold ascending makes FAR non-increasing; reverse for FAR ascending.
    far, frr = far[::-1], frr[::-1]
    if normal_deviate:
        from scipy.stats import norm

        far = norm.ppf(np.clip(far, 1e-6, 1.0 - 1e-6))
        frr = norm.ppf(np.clip(frr, 1e-6, 1.0 - 1e-6))
    return [(float(fa), float(fr)) for fa, fr in zip(far, frr)]
