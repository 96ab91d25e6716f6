"""Shared numerical kernels for AIR estimation and its gradient.

Everything here evaluates sums of the form

    total = sum_{i,l} w_l * ln S_il,
    S_il  = sum_j exp(a_ijl),
    a_ijl = -( ||x_i - x_j||^2 + 2*sqrt(2)*sigma*(x_i - x_j).xi_l ) / (2 sigma^2)

for a point set x (M, N), node set xi (L, N) and weights w (L,), plus the
gradient of `total` with respect to x.  These sums are the expensive inner
loop of every estimator in the package.

The exponent separates as a_ijl = c_ij + t_il - t_jl with

    c_ij = -||x_i - x_j||^2 / (2 sigma^2),
    t_il = -(sqrt(2) / sigma) * (x_i . xi_l),

so with a per-node shift T_l = max_j(-t_jl) the inner sum becomes a matrix
product:  S_il = exp(t_il + T_l) * [C @ E]_il  with  C = exp(c) and
E_jl = exp(-t_jl - T_l) <= 1.  That replaces M*M*L exponentials by
M*M + M*L of them plus BLAS matmuls.  The shift keeps every exponential in
(0, 1], but when the spread of t over points exceeds FAST_SPREAD_LIMIT the
factor E underflows and the code falls back to a chunked direct
log-sum-exp with per-(i, l) shifts, which is slow but stable at any SNR.

Gradient identities used by both paths, with the softmax
p_ijl = exp(a_ijl) / S_il and q_ijl = w_l * p_ijl:

    d total / dX = (1/sigma^2) [ (Q + Q^T) X - (rho + gamma) o X ]
                 + (sqrt(2)/sigma) (colsum - rowsum) @ xi

where Q_ij = sum_l q_ijl, rowsum_il = sum_j q_ijl (identically w_l),
colsum_jl = sum_i q_ijl, rho = Q 1, gamma = Q^T 1.  The j == i diagonal
cancels between the two roles of each point, so it is simply kept in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["PairPrep", "prepare", "weighted_log_sums", "mc_symbol_terms"]

#: Largest allowed spread of t over points per node column for the
#: factorised path; e^-600 is comfortably above the underflow threshold.
FAST_SPREAD_LIMIT = 600.0

#: Target element count of one (M, M, chunk) block in the direct path.
DIRECT_CHUNK_ELEMS = 4_000_000

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PairPrep:
    """Per-constellation precomputation reused across node sets.

    ``c2`` holds -||x_i - x_j||^2 / (2 sigma^2) with an exactly zero
    diagonal, ``cmat`` its elementwise exponential (so unit diagonal), and
    ``min_sq_dist`` the smallest off-diagonal squared distance as seen by
    the Gram expansion (useful as a collapse indicator; it is only
    accurate down to ~1e-15 absolute).
    """

    x: np.ndarray
    sigma: float
    c2: np.ndarray
    cmat: np.ndarray
    min_sq_dist: float

    def subset(self, idx: np.ndarray) -> "PairPrep":
        """Restriction to a subset of points (shares no computation cost)."""
        sel = np.ix_(idx, idx)
        return PairPrep(self.x[idx], self.sigma, self.c2[sel], self.cmat[sel],
                        self.min_sq_dist)


def prepare(x: np.ndarray, sigma: float) -> PairPrep:
    """Precompute the pairwise-distance factors for a point set."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    m = x.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    if m > 1:
        off = d2 + np.diag(np.full(m, np.inf))
        min_sq = float(off.min())
    else:
        min_sq = math.inf
    c2 = d2 * (-0.5 / (sigma * sigma))
    return PairPrep(x, float(sigma), c2, np.exp(c2), min_sq)


def weighted_log_sums(
    prep: PairPrep,
    nodes: np.ndarray,
    weights: np.ndarray,
    want_grad: bool = False,
) -> tuple[float, np.ndarray | None]:
    """Evaluate total = sum_{i,l} w_l ln S_il and optionally d total / dx.

    Returns (total, grad) with grad None unless requested.  ``total`` uses
    natural logarithms; callers convert to bits.
    """
    x = prep.x
    sigma = prep.sigma
    t = (-_SQRT2 / sigma) * (x @ nodes.T)  # (M, L)
    if t.shape[0] == 1:
        spread = 0.0
    else:
        spread = float((t.max(axis=0) - t.min(axis=0)).max())
    if spread <= FAST_SPREAD_LIMIT:
        return _eval_factorised(prep, t, nodes, weights, want_grad)
    return _eval_direct(prep, t, nodes, weights, want_grad)


def _eval_factorised(prep, t, nodes, weights, want_grad):
    sigma = prep.sigma
    cmat = prep.cmat
    shift = (-t).max(axis=0)  # (L,)
    e = np.exp(-t - shift[None, :])  # (M, L), entries in (0, 1]
    u = cmat @ e  # (M, L), strictly positive given the spread bound
    ln_s = t + shift[None, :] + np.log(u)
    total = float((ln_s @ weights).sum())
    if not want_grad:
        return total, None

    v = weights[None, :] / u  # (M, L)
    q = cmat * (v @ e.T)  # (M, M)
    colsum = e * (cmat @ v)  # (M, L); cmat is symmetric
    gamma = colsum.sum(axis=1)
    rho = float(weights.sum())
    grad = ((q + q.T) @ prep.x - (rho + gamma)[:, None] * prep.x) / (sigma * sigma)
    grad += (_SQRT2 / sigma) * ((colsum - weights[None, :]) @ nodes)
    return total, grad


def _eval_direct(prep, t, nodes, weights, want_grad):
    """Chunked log-sum-exp with per-(i, l) shifts; stable at any SNR."""
    sigma = prep.sigma
    m = prep.x.shape[0]
    n_nodes = t.shape[1]
    chunk = max(1, int(DIRECT_CHUNK_ELEMS // max(m * m, 1)))
    total = 0.0
    if want_grad:
        q_acc = np.zeros((m, m))
        gamma = np.zeros(m)
        rho = 0.0
        grad_nodes = np.zeros((m, prep.x.shape[1]))
    for start in range(0, n_nodes, chunk):
        stop = min(start + chunk, n_nodes)
        w = weights[start:stop]
        a = prep.c2[:, :, None] + t[:, None, start:stop] - t[None, :, start:stop]
        mx = a.max(axis=1)  # (M, cl)
        np.exp(a - mx[:, None, :], out=a)
        s = a.sum(axis=1)  # (M, cl)
        ln_s = mx + np.log(s)
        total += float((ln_s @ w).sum())
        if want_grad:
            a /= s[:, None, :]  # softmax over j
            a *= w[None, None, :]
            q_acc += a.sum(axis=2)
            row = a.sum(axis=1)  # (M, cl); equals w up to rounding
            col = a.sum(axis=0)  # (M, cl)
            gamma += col.sum(axis=1)
            rho += float(w.sum())
            grad_nodes += (col - row) @ nodes[start:stop]
    if not want_grad:
        return total, None
    grad = ((q_acc + q_acc.T) @ prep.x - (rho + gamma)[:, None] * prep.x)
    grad /= sigma * sigma
    grad += (_SQRT2 / sigma) * grad_nodes
    return total, grad


def mc_symbol_terms(
    x: np.ndarray,
    sigma: float,
    tx_idx: np.ndarray,
    noise: np.ndarray,
    bits: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-sample log-ratio terms for Monte Carlo AIR estimation.

    For sample s with transmitted point index tx_idx[s] and received noise
    realisation sigma * noise[s], returns

        f[s]     = log2 sum_j p(y_s | x_j) / p(y_s | x_tx)
        h_sum[s] = sum over bit positions k of
                   log2 sum_{j in own-bit group k} p(y_s | x_j) / p(y_s | x_tx)

    h_sum is None unless ``bits`` (the (M, m) labeling array) is given.
    Both group sums per bit are formed by separate matrix products against
    the bit mask and its complement, so no catastrophic cancellation
    occurs even when one group dominates.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    m_pts = x.shape[0]
    n_samples = tx_idx.shape[0]
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    c2 = d2 * (-0.5 / (sigma * sigma))

    if bits is not None:
        b1 = bits.astype(np.float64)
        b0 = 1.0 - b1
        h_sum = np.empty(n_samples)
    else:
        h_sum = None
    f = np.empty(n_samples)

    ln2 = math.log(2.0)
    chunk = max(1, int(DIRECT_CHUNK_ELEMS // max(m_pts, 1)))
    for start in range(0, n_samples, chunk):
        stop = min(start + chunk, n_samples)
        tx = tx_idx[start:stop]
        proj = (noise[start:stop] @ x.T) / sigma  # (cs, M): (x_j . g_s)/sigma
        a = c2[tx] + proj - proj[np.arange(stop - start), tx][:, None]
        mx = a.max(axis=1)
        ea = np.exp(a - mx[:, None])
        s_full = ea.sum(axis=1)
        f[start:stop] = (mx + np.log(s_full)) / ln2
        if bits is not None:
            own1 = ea @ b1  # (cs, m) sums over labels with bit k == 1
            own0 = ea @ b0
            tx_bits = b1[tx]  # (cs, m)
            own = np.where(tx_bits > 0.5, own1, own0)
            h_sum[start:stop] = (mx[:, None] + np.log(own)).sum(axis=1) / ln2
    return f, h_sum
