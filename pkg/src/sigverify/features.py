"""DCT feature extraction.

Each of the seven channels is summarized by the first K coefficients of its
orthonormal type-II DCT; concatenating the blocks in the fixed channel order
yields one feature vector per signature (7*K entries, 210 for the default
K = 30). Low-order coefficients capture the global shape of each channel,
so no resampling or smoothing is needed beforehand.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dct

from .errors import EmptySeries
from .signals import ChannelSet

DEFAULT_COEFFICIENT_COUNT = 30
CHANNEL_ORDER = ChannelSet.ORDER


def dct_coefficients(series, count: int) -> np.ndarray:
    """First `count` orthonormal DCT-II coefficients of a real series.

    c_0 = sqrt(1/N) * sum(s) and c_k = sqrt(2/N) * sum(s[n] cos(pi (n+0.5) k / N))
    for k >= 1. A series shorter than `count` is zero-filled past index N-1,
    which keeps feature vectors a fixed length for very short captures.
    """
    s = np.asarray(series, dtype=np.float64)
    n = len(s)
    if n == 0:
        raise EmptySeries("cannot transform an empty series")
    if count < 1:
        raise ValueError("count must be >= 1")
    coeffs = dct(s, type=2, norm="ortho")
    if n >= count:
        return coeffs[:count].copy()
    out = np.zeros(count)
    out[:n] = coeffs
    return out


def feature_length(count: int = DEFAULT_COEFFICIENT_COUNT) -> int:
    return len(CHANNEL_ORDER) * count


def feature_index(channel: str, coefficient: int, count: int = DEFAULT_COEFFICIENT_COUNT) -> int:
    """Flat index of (channel, coefficient) in the channel-major layout."""
    return CHANNEL_ORDER.index(channel) * count + coefficient


def extract_features(channels: ChannelSet, count: int = DEFAULT_COEFFICIENT_COUNT) -> np.ndarray:
    """Assemble the fixed-layout feature vector for one signature.

    Channel-major layout in ChannelSet.ORDER: entry i belongs to channel
    i // count, coefficient i % count.
    """
    blocks = [dct_coefficients(seq, count) for seq in channels.as_sequences()]
    return np.concatenate(blocks)
