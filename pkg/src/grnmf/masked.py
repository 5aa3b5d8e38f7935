"""Low-rank factorization with missing entries, for divergence selection.

No outlier term here: with one free outlier per missing entry the
problem would not be identifiable.  Sums over entries are restricted to
the observed set by 0/1 weights in both multiplicative updates, so
completely unobserved rows or columns are exact fixed points.  The
abundance factor is unconstrained by default; an optional flag restores
the unit-sum normalization, in which case the run with a full mask
reproduces the main solver's trajectory with the outliers frozen at
zero.
"""

import math
import time

import numpy as np

from .divergence import (
    DEN_FLOOR,
    beta_divergence_array,
    factor_exponent,
    floored,
    model_powers,
)
from .errors import DimensionMismatch, DomainError, NumericalFailure
from .metrics import _column_angles
from .model import UnmixingState
from .solver import InitSpec, SolveReport, initialize
from .updates import _step


def check_mask(mask, shape):
    mask = np.asarray(mask)
    if mask.dtype != bool:
        raise DomainError("observation mask must be boolean")
    if mask.shape != shape:
        raise DimensionMismatch(
            "mask is %r but the data is %r" % (mask.shape, shape)
        )
    if not mask.any():
        raise DomainError("observation mask has no observed entries")
    return mask


def observed_fraction(mask):
    mask = np.asarray(mask, dtype=bool)
    return float(np.count_nonzero(mask)) / mask.size


def masked_objective(Y, mask, M, A, beta):
    """Sum of elementwise divergences over the observed entries only.

    Unobserved entries of ``Y`` are never read.
    """
    Yx = np.where(mask, Y, 1.0)
    d = beta_divergence_array(floored(Yx), floored(M @ A), beta)
    return max(float(np.sum(np.where(mask, d, 0.0))), 0.0)


def _safe_ratio(num, den):
    # Zero-weight blocks produce 0/0; those entries are fixed points.
    ratio = num / np.maximum(den, DEN_FLOOR)
    return np.where((num == 0) & (den == 0), 1.0, ratio)


def masked_solve(Y, mask, K, beta, tol=1e-5, max_iter=500, policy="table-one",
                 seed=0, init=None, simplex=False):
    """Fit a nonnegative low-rank model to the observed entries.

    Parameters
    ----------
    Y : ndarray
        Bands x pixels data; only entries selected by ``mask`` are used.
    mask : ndarray of bool
        True marks an observed entry.
    K : int
        Factorization rank.
    beta : float
        Divergence shape parameter.
    simplex : bool
        When set, renormalize abundance columns to unit sum after each
        update (heuristic step); otherwise both factors use the
        descent-guaranteed multiplicative update.

    Returns
    -------
    (M, A, SolveReport)
    """
    Y = np.asarray(Y, dtype=float)
    mask = check_mask(mask, Y.shape)
    W = mask.astype(float)
    Yw = np.where(mask, Y, 0.0)
    if np.any(Yw < 0) or not np.all(np.isfinite(Yw)):
        raise DomainError("observed entries must be finite and nonnegative")
    Yx = np.where(mask, Y, 1.0)

    t0 = time.perf_counter()
    state0 = initialize(Yw, K, init or InitSpec(), seed)
    M, A = state0.M, state0.A

    current = masked_objective(Y, mask, M, A, beta)
    if not math.isfinite(current):
        raise NumericalFailure("objective not finite at initialization", iteration=0)
    trace = [current]
    stop_reason = "max-iter"
    iterations = 0
    exponent = _step(policy, factor_exponent(beta))

    for it in range(1, max_iter + 1):
        # Abundance block.
        S = M @ A
        p1, p2 = model_powers(floored(S), beta)
        wyp2 = W * Yx * p2
        wp1 = W * p1
        if simplex:
            num = M.T @ wyp2 + np.sum(S * wp1, axis=0)[None, :]
            den = M.T @ wp1 + np.sum(S * wyp2, axis=0)[None, :]
            U = A * _safe_ratio(num, den)
            sums = U.sum(axis=0)
            A = np.where(sums > 0, U / np.where(sums > 0, sums, 1.0), A)
        else:
            A = A * _safe_ratio(M.T @ wyp2, M.T @ wp1) ** exponent

        # Endmember block.
        S = M @ A
        p1, p2 = model_powers(floored(S), beta)
        M = M * _safe_ratio((W * Yx * p2) @ A.T, (W * p1) @ A.T) ** exponent

        value = masked_objective(Y, mask, M, A, beta)
        if not math.isfinite(value):
            raise NumericalFailure("objective became non-finite", iteration=it)
        trace.append(value)
        iterations = it
        rel = 0.0 if current == 0 else abs(current - value) / abs(current)
        current = value
        if rel < tol:
            stop_reason = "converged"
            break

    report = SolveReport(
        state=UnmixingState(M, np.maximum(A, 0.0), np.zeros_like(Y)),
        objective_trace=np.asarray(trace),
        iterations=iterations,
        stop_reason=stop_reason,
        wall_time=time.perf_counter() - t0,
        lam=0.0,
    )
    return M, A, report


def reconstruct_and_score(Y_full, mask, M, A):
    """Held-out reconstruction angle.

    Rebuilds unobserved entries from the low-rank model, keeps observed
    entries from the data, and averages the per-column spectral angle
    over the columns that contain at least one held-out entry.
    """
    Y_full = np.asarray(Y_full, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != Y_full.shape:
        raise DimensionMismatch("mask and data shapes differ")
    recon = M @ A
    if recon.shape != Y_full.shape:
        raise DimensionMismatch("reconstruction and data shapes differ")
    heldout_cols = np.flatnonzero((~mask).any(axis=0))
    if heldout_cols.size == 0:
        raise DomainError("no held-out entries to score")
    Yhat = np.where(mask, Y_full, recon)
    return float(np.mean(_column_angles(Y_full[:, heldout_cols], Yhat[:, heldout_cols])))


def interpolation_sweep(Y, K, betas, fractions, restarts, seed=0, tol=1e-5,
                        max_iter=300, simplex=False):
    """Run the held-out prediction experiment over a grid.

    For every (observed fraction, restart) cell a fresh uniform entry
    mask and a fresh initialization seed are drawn from a per-cell
    substream, then every requested ``beta`` is fitted on the same mask.
    Returns a list of row dicts with keys ``beta``, ``restart``,
    ``fraction_observed``, ``heldout_asam`` plus trace diagnostics.
    """
    Y = np.asarray(Y, dtype=float)
    rows = []
    for fi, frac in enumerate(fractions):
        if not 0.0 < frac < 1.0:
            raise DomainError(
                "observed fraction must lie strictly between 0 and 1, got %r" % frac
            )
        for r in range(restarts):
            cell = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(fi, r))
            )
            n_obs = min(max(int(round(frac * Y.size)), 1), Y.size - 1)
            flat = np.zeros(Y.size, dtype=bool)
            flat[cell.permutation(Y.size)[:n_obs]] = True
            mask = flat.reshape(Y.shape)
            fit_seed = int(cell.integers(2**63))
            for beta in betas:
                M, A, report = masked_solve(
                    Y, mask, K, beta, tol=tol, max_iter=max_iter,
                    seed=fit_seed, simplex=simplex,
                )
                trace = report.objective_trace
                drops = np.diff(trace)
                denom = np.maximum(np.abs(trace[:-1]), 1e-30)
                rows.append(
                    {
                        "beta": float(beta),
                        "restart": r,
                        "fraction_observed": float(frac),
                        "heldout_asam": reconstruct_and_score(Y, mask, M, A),
                        "iterations": report.iterations,
                        "max_relative_increase": float(np.max(drops / denom, initial=0.0)),
                    }
                )
    return rows
