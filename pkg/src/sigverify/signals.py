"""Captured signature representation and derived pen channels.

A signature arrives as five synchronous tablet channels (position x/y,
pressure, azimuth, altitude). Normalization shifts the origin to the first
point and rescales positions by the vertical extent; two further channels
are derived from the normalized trajectory: per-step displacement and the
turning angle between consecutive steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCapture, TooShort

# Tablet unit ranges for MCYT-compatible hardware (100 Hz Wacom).
MCYT_RANGES = {
    "x": (0, 12700),
    "y": (0, 9700),
    "p": (0, 1024),
    "gamma": (0, 3600),
    "phi": (300, 900),
}


@dataclass(frozen=True)
class RawSignature:
    """Time-sampled pen channels in tablet units.

    All five sequences share the same length N_s >= 3; the minimum exists
    because the curvature channel needs N_s - 2 >= 1 points.
    """

    user_id: str
    sample_rate_hz: float
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "p", "gamma", "phi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        n = len(self.x)
        if any(len(getattr(self, name)) != n for name in ("y", "p", "gamma", "phi")):
            raise TooShort("channel sequences must share one length")
        if n < 3:
            raise TooShort(f"signature has {n} samples, need at least 3")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self) -> int:
        return len(self.x)

    def validate_ranges(self) -> None:
        """Check channel values against MCYT tablet unit ranges."""
        for name, (lo, hi) in MCYT_RANGES.items():
            values = getattr(self, name)
            if values.min() < lo or values.max() > hi:
                raise ValueError(
                    f"channel {name} outside [{lo}, {hi}]: "
                    f"saw [{values.min():g}, {values.max():g}]"
                )


@dataclass(frozen=True)
class NormalizedSignature:
    """Origin-shifted, scale-normalized positions plus untouched p/gamma/phi."""

    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray

    def __len__(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class ChannelSet:
    """The seven sequences fed to feature extraction.

    x_norm, y_norm, p, gamma, phi have length N_s; delta_s has N_s - 1 and
    theta has N_s - 2. theta values lie in (-pi, pi].
    """

    x_norm: np.ndarray
    y_norm: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    delta_s: np.ndarray
    theta: np.ndarray

    # Fixed channel order; feature vector layout depends on it.
    ORDER = ("x_norm", "y_norm", "p", "gamma", "phi", "delta_s", "theta")

    def as_sequences(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in self.ORDER]


def normalize(raw: RawSignature) -> NormalizedSignature:
    """Shift the origin to the first point and rescale by the vertical range.

    x'[n] = (x[n] - x[0]) / R and y'[n] = (y[n] - y[0]) / R with
    R = max(y) - min(y). A signature with zero vertical range falls back to
    the horizontal range; zero extent in both directions is a dot and raises
    DegenerateCapture. Pressure and pen angles pass through unchanged.
    """
    r = float(raw.y.max() - raw.y.min())
    if r == 0.0:
        r = float(raw.x.max() - raw.x.min())
        if r == 0.0:
            raise DegenerateCapture("signature has no spatial extent")
    return NormalizedSignature(
        x=(raw.x - raw.x[0]) / r,
        y=(raw.y - raw.y[0]) / r,
        p=raw.p,
        gamma=raw.gamma,
        phi=raw.phi,
    )


def _wrap_angle(delta: np.ndarray) -> np.ndarray:
    # Map angle differences into (-pi, pi]; pi stays pi, -pi maps to pi.
    return math.pi - np.mod(math.pi - delta, 2.0 * math.pi)


def step_angles(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Direction angle of each consecutive step, via the four-quadrant arctangent.

    Zero-length steps (repeated pen samples) reuse the previous angle; a
    zero-length first step takes angle 0. This keeps the angle defined and
    the curvature continuous without dropping samples.
    """
    dx = np.diff(x)
    dy = np.diff(y)
    alpha = np.arctan2(dy, dx)
    degenerate = (dx == 0.0) & (dy == 0.0)
    if degenerate.any():
        alpha = alpha.copy()
        previous = 0.0
        for i in range(len(alpha)):
            if degenerate[i]:
                alpha[i] = previous
            else:
                previous = alpha[i]
    return alpha


def derive_channels(sig: NormalizedSignature) -> ChannelSet:
    """Complete the five captured channels with displacement and curvature.

    delta_s[n] = sqrt(dx^2 + dy^2) over consecutive points (length N_s - 1);
    theta[n] is the wrapped difference of consecutive step angles
    (length N_s - 2).
    """
    n = len(sig)
    if n < 3:
        raise TooShort(f"need at least 3 points, got {n}")
    dx = np.diff(sig.x)
    dy = np.diff(sig.y)
    delta_s = np.hypot(dx, dy)
    alpha = step_angles(sig.x, sig.y)
    theta = _wrap_angle(np.diff(alpha))
    return ChannelSet(
        x_norm=sig.x,
        y_norm=sig.y,
        p=sig.p,
        gamma=sig.gamma,
        phi=sig.phi,
        delta_s=delta_s,
        theta=theta,
    )
