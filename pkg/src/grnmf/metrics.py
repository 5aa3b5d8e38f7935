"""Scoring of unmixing results against ground truth."""

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, DomainError


def _column_angles(X, Xhat):
    nx = np.linalg.norm(X, axis=0)
    ny = np.linalg.norm(Xhat, axis=0)
    if np.any(nx == 0) or np.any(ny == 0):
        raise DomainError("spectral angle is undefined for a zero column")
    cos = np.sum(X * Xhat, axis=0) / (nx * ny)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def asam(M_true, M_est):
    """Average spectral angle between matched endmember columns (radians)."""
    M_true = np.asarray(M_true, dtype=float)
    M_est = np.asarray(M_est, dtype=float)
    if M_true.shape != M_est.shape:
        raise DimensionMismatch(
            "endmember matrices differ in shape: %r vs %r" % (M_true.shape, M_est.shape)
        )
    return float(np.mean(_column_angles(M_true, M_est)))


def gmse_sq(A_true, A_est):
    """Mean squared abundance error over all endmembers and pixels."""
    A_true = np.asarray(A_true, dtype=float)
    A_est = np.asarray(A_est, dtype=float)
    if A_true.shape != A_est.shape:
        raise DimensionMismatch(
            "abundance matrices differ in shape: %r vs %r" % (A_true.shape, A_est.shape)
        )
    return float(np.mean((A_true - A_est) ** 2))


def angle_matrix(M_true, M_est):
    """All pairwise spectral angles, true columns x estimated columns."""
    M_true = np.asarray(M_true, dtype=float)
    M_est = np.asarray(M_est, dtype=float)
    nt = np.linalg.norm(M_true, axis=0)
    ne = np.linalg.norm(M_est, axis=0)
    if np.any(nt == 0) or np.any(ne == 0):
        raise DomainError("spectral angle is undefined for a zero column")
    cos = (M_true.T @ M_est) / np.outer(nt, ne)
    return np.arccos(np.clip(cos, -1.0, 1.0))


def align_endmembers(M_true, M_est, A_est=None):
    """Permute estimated columns to best match the true endmembers.

    Solves the optimal assignment on the pairwise angle matrix and
    applies the same permutation to the estimated abundances so the two
    stay consistent.  Returns ``(M_aligned, A_aligned)``; the abundance
    slot is None when not provided.
    """
    M_true = np.asarray(M_true, dtype=float)
    M_est = np.asarray(M_est, dtype=float)
    if M_true.shape[1] != M_est.shape[1]:
        raise DimensionMismatch("endmember counts differ")
    cost = angle_matrix(M_true, M_est)
    rows, cols = linear_sum_assignment(cost)
    perm = cols[np.argsort(rows)]
    M_out = M_est[:, perm]
    A_out = None
    if A_est is not None:
        A_est = np.asarray(A_est, dtype=float)
        if A_est.shape[0] != M_est.shape[1]:
            raise DimensionMismatch("abundance rows do not match the endmember count")
        A_out = A_est[perm, :]
    return M_out, A_out


def outlier_detection_scores(energy, mask_true, threshold):
    """Precision, recall and F1 of thresholded outlier energies.

    A pixel is flagged when its energy strictly exceeds the threshold.
    """
    energy = np.asarray(energy, dtype=float).ravel()
    mask_true = np.asarray(mask_true, dtype=bool).ravel()
    if energy.shape != mask_true.shape:
        raise DimensionMismatch("energy and mask lengths differ")
    detected = energy > threshold
    tp = int(np.count_nonzero(detected & mask_true))
    fp = int(np.count_nonzero(detected & ~mask_true))
    fn = int(np.count_nonzero(~detected & mask_true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1}


def otsu_threshold(values, nbins=256):
    """Histogram split maximizing the between-class variance.

    The standard parameter-free choice for separating a bimodal
    energy distribution into background and outlier pixels.
    """
    v = np.asarray(values, dtype=float).ravel()
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    hist, edges = np.histogram(v, bins=nbins, range=(lo, hi))
    w = hist.astype(float) / v.size
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(w)
    w1 = 1.0 - w0
    m = np.cumsum(w * centers)
    m_total = m[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m / w0
        mu1 = (m_total - m) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = 0.0
    return float(centers[int(np.argmax(between))])
