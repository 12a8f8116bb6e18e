"""Cosine positional re-weighting and its exact two-branch decomposition.

The re-weight for query position i and key position j (both 1-based) is
cos(pi/2 * (i - j) / m), where the horizon m must be at least as large as
the longest sequence in play. Because cos(a - b) = cos a cos b + sin a sin b,
the weighted similarity phi(Q_i) phi(K_j)^T * w(i, j) factors exactly into
two plain inner products of position-scaled feature rows, which is what the
linear-time path exploits.

Angles are computed per position as (pi * pos) / (2 * m) in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError


def cos_weight(i: int, j: int, m: int) -> float:
    """Re-weight between query position i and key position j, horizon m."""
    return float(np.cos((np.pi * (i - j)) / (2.0 * m)))


def position_angles(n: int, m: int) -> np.ndarray:
    """Angles (pi * pos) / (2m) for 1-based positions 1..n, float64."""
    pos = np.arange(1, n + 1, dtype=np.float64)
    return (np.pi * pos) / (2.0 * m)


def position_factors(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """cos and sin of the position angles for 1-based positions 1..n.

    For positions within the horizon both vectors lie in [0, 1], which keeps
    the decomposed factors non-negative whenever the features are.
    """
    angles = position_angles(n, m)
    return np.cos(angles), np.sin(angles)


def build_reweight_matrix(n_q: int, n_k: int, m: int) -> np.ndarray:
    """Dense n_q x n_k matrix of cos_weight(i, j, m) values.

    Requires m >= max(n_q, n_k); every entry is then in (0, 1] because all
    position differences stay strictly inside the quarter period.
    """
    if n_q < 1 or n_k < 1:
        raise DimensionError(f"need n_q, n_k >= 1, got {n_q}, {n_k}")
    if m < max(n_q, n_k):
        raise ConfigurationError(
            f"cosine horizon m={m} is smaller than the longest sequence "
            f"({max(n_q, n_k)})")
    i = np.arange(1, n_q + 1, dtype=np.float64)[:, None]
    j = np.arange(1, n_k + 1, dtype=np.float64)[None, :]
    return np.cos((np.pi * (i - j)) / (2.0 * m))


@dataclass(frozen=True)
class DecomposedFactors:
    """Position-scaled feature matrices of the cosine decomposition."""

    q_cos: np.ndarray
    q_sin: np.ndarray
    k_cos: np.ndarray
    k_sin: np.ndarray


def _require_features(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def decompose(Q_feat, K_feat, m: int) -> DecomposedFactors:
    """Split feature rows into cos- and sin-scaled factors.

    Row i of q_cos is Q_feat_i * cos(pi * i / (2m)) and likewise for the
    other three outputs, so that

        q_cos @ k_cos.T + q_sin @ k_sin.T
            == (Q_feat @ K_feat.T) * reweight matrix

    holds exactly in real arithmetic.
    """
    Qf = _require_features(Q_feat, "Q_feat")
    Kf = _require_features(K_feat, "K_feat")
    if Qf.shape[1] != Kf.shape[1]:
        raise DimensionError(
            f"feature widths differ: {Qf.shape[1]} vs {Kf.shape[1]}")
    if m < max(Qf.shape[0], Kf.shape[0]):
        raise ConfigurationError(
            f"cosine horizon m={m} is smaller than the longest sequence "
            f"({max(Qf.shape[0], Kf.shape[0])})")
    q_cos_v, q_sin_v = position_factors(Qf.shape[0], m)
    k_cos_v, k_sin_v = position_factors(Kf.shape[0], m)
    return DecomposedFactors(
        q_cos=Qf * q_cos_v[:, None],
        q_sin=Qf * q_sin_v[:, None],
        k_cos=Kf * k_cos_v[:, None],
        k_sin=Kf * k_sin_v[:, None],
    )
