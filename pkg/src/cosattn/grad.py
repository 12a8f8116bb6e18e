"""Analytic backward passes and finite-difference checking.

The kernel backward never materializes an n x n matrix: query gradients
ride the same forward prefix scan, and key/value gradients use a mirrored
suffix scan, so cost stays Theta(n * d_k * d_v). Conventions at the
non-smooth points: the relu gate takes subgradient 0 at exactly 0 (leaky
takes its negative-side slope there), and a denominator at or below the
floor eps is treated as a constant, contributing zero gradient.

All gradients are computed and returned in float64.
"""

from __future__ import annotations

import math

import numpy as np

from .core import (
    AttentionConfig,
    AttentionDims,
    FeatureMapKind,
    RELU,
    _check_horizon,
    _require_kernel_config,
    _wide,
    apply_feature_map,
    require_matrix,
)
from .errors import ConfigurationError, DimensionError
from .linear import _BLOCK, _causal_keep, _scan
from .reweight import position_factors


def feature_map_derivative(x: np.ndarray, kind: FeatureMapKind) -> np.ndarray:
    """Elementwise derivative of the feature map at x, float64."""
    x = np.asarray(x, dtype=np.float64)
    if kind.name == "identity":
        return np.ones_like(x)
    if kind.name == "relu":
        return (x > 0.0).astype(np.float64)
    if kind.name == "leaky_relu":
        return np.where(x > 0.0, 1.0, kind.slope)
    return np.where(x < 0.0, np.exp(np.minimum(x, 0.0)), 1.0)


def _check_d_out(d_out, n_q: int, d_v: int) -> np.ndarray:
    d_out = require_matrix(d_out, "d_out")
    if d_out.shape != (n_q, d_v):
        raise DimensionError(
            f"d_out must have shape ({n_q}, {d_v}), got {d_out.shape}")
    return d_out


def _kernel_backward(Q, K, V, d_out, feature_map, causal, eps,
                     q_weights, k_weights):
    """Gradients of sum(d_out * forward) for the factored kernel forward.

    q_weights/k_weights are per-branch position vectors; a plain kernel
    passes a single all-ones branch, the cosine decomposition passes its
    cos and sin vectors.
    """
    Qw, Kw, Vw = _wide(Q), _wide(K), _wide(V)
    g = _wide(d_out)
    Qp = apply_feature_map(Qw, feature_map)
    Kp = apply_feature_map(Kw, feature_map)
    qfs = [Qp * a[:, None] for a in q_weights]
    kfs = [Kp * b[:, None] for b in k_weights]
    num, den = _scan(tuple(qfs), tuple(kfs), Vw, causal)

    dhat = np.maximum(den, eps)
    u = g / dhat[:, None]
    # Rows at or below the floor see a constant denominator: no gradient.
    active = (den > eps).astype(np.float64)
    w = active * (g * num).sum(axis=1) / (dhat * dhat)

    n_q, d_k = Qp.shape
    d_v = Vw.shape[1]
    dQp = np.zeros_like(Qp)
    dKp = np.zeros_like(Kp)
    dV = np.zeros_like(Vw)

    if not causal:
        for b in range(len(qfs)):
            S_b = kfs[b].T @ Vw
            t_b = kfs[b].sum(axis=0)
            dqf = u @ S_b.T - np.outer(w, t_b)
            dQp += q_weights[b][:, None] * dqf
            P_b = qfs[b].T @ u
            p_b = qfs[b].T @ w
            dV += kfs[b] @ P_b
            dKp += k_weights[b][:, None] * (Vw @ P_b.T - p_b[None, :])
    else:
        # Prefix chunks for dQ: within a chunk the j <= i part is a masked
        # product, earlier chunks enter through the carried aggregates.
        states = [np.zeros((d_k, d_v)) for _ in kfs]
        totals = [np.zeros(d_k) for _ in kfs]
        for start in range(0, n_q, _BLOCK):
            stop = min(start + _BLOCK, n_q)
            keep = _causal_keep(stop - start)
            keep_f = keep.astype(np.float64)
            uc, wc = u[start:stop], w[start:stop]
            vc = Vw[start:stop]
            for b in range(len(qfs)):
                qc, kc = qfs[b][start:stop], kfs[b][start:stop]
                uv = np.where(keep, uc @ vc.T, 0.0)
                kt = keep_f @ kc + totals[b]
                dqf = uv @ kc + uc @ states[b].T - wc[:, None] * kt
                dQp[start:stop] += q_weights[b][start:stop, None] * dqf
                states[b] += kc.T @ vc
                totals[b] += kc.sum(axis=0)
        # Suffix chunks for dK and dV: entry (j, i) of each masked product
        # pairs key row j with query rows i >= j.
        suf_P = [np.zeros((d_k, d_v)) for _ in qfs]
        suf_p = [np.zeros(d_k) for _ in qfs]
        for start in reversed(range(0, n_q, _BLOCK)):
            stop = min(start + _BLOCK, n_q)
            keep = _causal_keep(stop - start)
            keep_f = keep.astype(np.float64)
            uc, wc = u[start:stop], w[start:stop]
            vc = Vw[start:stop]
            for b in range(len(qfs)):
                qc, kc = qfs[b][start:stop], kfs[b][start:stop]
                vu = np.where(keep.T, vc @ uc.T, 0.0)
                wq = keep_f.T @ (wc[:, None] * qc) + suf_p[b]
                dKp[start:stop] += k_weights[b][start:stop, None] * (
                    vu @ qc + vc @ suf_P[b].T - wq)
                kq = np.where(keep.T, kc @ qc.T, 0.0)
                dV[start:stop] += kq @ uc + kc @ suf_P[b]
                suf_P[b] += qc.T @ uc
                suf_p[b] += qc.T @ wc

    dQ = dQp * feature_map_derivative(Qw, feature_map)
    dK = dKp * feature_map_derivative(Kw, feature_map)
    return dQ, dK, dV


def linear_attention_backward(Q, K, V, d_out, feature_map: FeatureMapKind = RELU,
                              causal: bool = False, eps: float = 1e-6):
    """Gradients of sum(d_out * linear_attention(Q, K, V))."""
    Q = require_matrix(Q, "Q")
    K = require_matrix(K, "K")
    V = require_matrix(V, "V")
    dims = AttentionDims.from_qkv(Q, K, V, causal)
    d_out = _check_d_out(d_out, dims.n_q, dims.d_v)
    ones_q = np.ones(dims.n_q)
    ones_k = np.ones(dims.n_k)
    return _kernel_backward(Q, K, V, d_out, feature_map, causal, eps,
                            (ones_q,), (ones_k,))


def cosformer_backward(Q, K, V, config: AttentionConfig, d_out):
    """Gradients of sum(d_out * cosformer_attention(Q, K, V, config)).

    The cos/sin position factors are constants of the positions, so they
    pass through the chain rule as fixed per-row scales.
    """
    _require_kernel_config(config)
    if config.reweight.kind != "cosine":
        raise ConfigurationError("cosformer_backward requires a cosine reweight scheme")
    Q = require_matrix(Q, "Q")
    K = require_matrix(K, "K")
    V = require_matrix(V, "V")
    dims = AttentionDims.from_qkv(Q, K, V, config.causal)
    _check_horizon(config, dims.n_q, dims.n_k)
    d_out = _check_d_out(d_out, dims.n_q, dims.d_v)
    cos_q, sin_q = position_factors(dims.n_q, config.reweight.m)
    cos_k, sin_k = position_factors(dims.n_k, config.reweight.m)
    return _kernel_backward(Q, K, V, d_out, config.feature_map, config.causal,
                            config.eps, (cos_q, sin_q), (cos_k, sin_k))


def softmax_attention_backward(Q, K, V, d_out, causal: bool = False,
                               scale: bool = True):
    """Gradients of sum(d_out * softmax_attention(Q, K, V))."""
    Q = require_matrix(Q, "Q")
    K = require_matrix(K, "K")
    V = require_matrix(V, "V")
    dims = AttentionDims.from_qkv(Q, K, V, causal)
    d_out = _check_d_out(d_out, dims.n_q, dims.d_v)

    Qw, Kw, Vw, g = _wide(Q), _wide(K), _wide(V), _wide(d_out)
    alpha = 1.0 / math.sqrt(dims.d_k) if scale else 1.0
    S = (Qw @ Kw.T) * alpha
    if causal:
        S[np.triu(np.ones(S.shape, dtype=bool), 1)] = -np.inf
    S -= S.max(axis=1, keepdims=True)
    np.exp(S, out=S)
    W = S / S.sum(axis=1, keepdims=True)

    dV = W.T @ g
    dW = g @ Vw.T
    dS = W * (dW - np.einsum("ij,ij->i", dW, W)[:, None])
    dQ = (dS @ Kw) * alpha
    dK = (dS.T @ Qw) * alpha
    return dQ, dK, dV


def finite_diff_grad(f, X, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix.

    Evaluates f at X +- h e_k for every coordinate, in float64. The
    callable must not retain the array it is handed; it is reused.
    """
    X = np.array(X, dtype=np.float64)
    if not (h > 0.0):
        raise ConfigurationError(f"h must be > 0, got {h!r}")
    grad = np.zeros_like(X)
    it = np.nditer(X, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = X[idx]
        X[idx] = orig + h
        f_plus = f(X)
        X[idx] = orig - h
        f_minus = f(X)
        X[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad
