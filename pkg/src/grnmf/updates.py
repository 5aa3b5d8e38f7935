"""Conditional multiplicative updates for the three factor blocks.

Endmember and outlier updates are majorization-minimization steps: under
the table-derived step exponents each one can never increase the
penalized objective.  The abundance update is the usual ratio-of-gradient
heuristic on the sum-normalized variable; it preserves nonnegativity and
the simplex but carries no descent proof.

Every update is a pure function from the previous state to one new
block.  Entries that are exactly zero stay zero (multiplicative form),
and a whole-zero outlier column is a fixed point.
"""

import numpy as np

from .divergence import (
    DEN_FLOOR,
    concave_part_grad_array,
    concave_part_array,
    convex_part_array,
    divergence_total,
    factor_exponent,
    floored,
    model_powers,
    outlier_exponent,
    split_offset_array,
)
from .errors import ConfigurationError, DomainError
from .model import energy_vector

POLICIES = ("table-one", "over-relaxed")


def _step(policy, table_value):
    if policy == "table-one":
        return table_value
    if policy == "over-relaxed":
        return 1.0
    raise ConfigurationError(
        "unknown exponent policy %r, expected one of %r" % (policy, POLICIES)
    )


def update_endmembers(Y, state, beta, policy="table-one"):
    """One multiplicative update of the endmember matrix.

    Returns the new L x K matrix; the state is not modified.
    """
    ytil = floored(state.model)
    p1, p2 = model_powers(ytil, beta)
    num = (Y * p2) @ state.A.T
    den = p1 @ state.A.T
    if np.any(den == 0):
        k = int(np.argwhere(den == 0)[0, 1])
        raise DomainError(
            "endmember %d has a zero update denominator (dead abundance row)" % k
        )
    ratio = num / np.maximum(den, DEN_FLOOR)
    return state.M * ratio ** _step(policy, factor_exponent(beta))


def update_outliers(Y, state, beta, lam, policy="table-one", penalty_norm="l2"):
    """One multiplicative update of the outlier matrix.

    Columns whose current norm is zero are left identically zero: the
    group penalty majorizer is undefined there and zero is a fixed point
    of the multiplicative form.

    ``penalty_norm`` selects the column norm in the penalty ratio;
    only ``"l2"`` carries the descent guarantee.
    """
    if lam < 0:
        raise DomainError("penalty weight must be nonnegative, got %r" % lam)
    R = state.R
    ytil = floored(state.model)
    p1, p2 = model_powers(ytil, beta)
    if penalty_norm == "l2":
        norms = energy_vector(R)
    elif penalty_norm == "l1":
        norms = R.sum(axis=0)
    else:
        raise ConfigurationError("penalty_norm must be 'l2' or 'l1', got %r" % penalty_norm)
    safe = np.where(norms > 0, norms, 1.0)
    den = p1 + lam * (R / safe)
    ratio = (Y * p2) / np.maximum(den, DEN_FLOOR)
    return R * ratio ** _step(policy, outlier_exponent(beta))


def update_abundances(Y, state, beta):
    """One heuristic multiplicative update of the abundance matrix.

    Works on the sum-normalized change of variable, then renormalizes
    each column to sum exactly to one.
    """
    stil = state.low_rank
    ytil = floored(state.model)
    p1, p2 = model_powers(ytil, beta)
    yp2 = Y * p2
    num = state.M.T @ yp2 + np.sum(stil * p1, axis=0)[None, :]
    den = state.M.T @ p1 + np.sum(stil * yp2, axis=0)[None, :]
    U = state.A * (num / np.maximum(den, DEN_FLOOR))
    sums = U.sum(axis=0)
    collapsed = np.flatnonzero(sums == 0)
    if collapsed.size:
        raise DomainError("abundance column %d collapsed to all zeros" % collapsed[0])
    return U / sums


def objective_in_u(Y, M, R, U, beta):
    """Data-fitting objective as a function of the unnormalized abundances."""
    U = np.asarray(U, dtype=float)
    sums = U.sum(axis=0)
    if np.any(sums <= 0):
        raise DomainError("every column of U must have a positive sum")
    return divergence_total(Y, M @ (U / sums) + R, beta)


def gradient_split(Y, M, R, U, beta):
    """Positive and negative parts of the gradient of :func:`objective_in_u`.

    Returns ``(g_plus, g_minus)`` with ``g_plus - g_minus`` equal to the
    gradient; both parts are nonnegative for nonnegative inputs.  The
    abundance update moves each entry against the sign of the gradient
    via the ratio ``g_minus / g_plus``.
    """
    U = np.asarray(U, dtype=float)
    sums = U.sum(axis=0)
    if np.any(sums <= 0):
        raise DomainError("every column of U must have a positive sum")
    A = U / sums
    S = M @ A
    ytil = floored(S + R)
    p1, p2 = model_powers(ytil, beta)
    yp2 = Y * p2
    g_plus = (M.T @ p1 + np.sum(S * yp2, axis=0)[None, :]) / sums
    g_minus = (M.T @ yp2 + np.sum(S * p1, axis=0)[None, :]) / sums
    return g_plus, g_minus


def l21_quadratic_bound(R, R_ref):
    """Quadratic upper bound on the column-norm sum, tight at ``R_ref``.

    Columns of ``R_ref`` must have positive norm.
    """
    norms_ref = energy_vector(R_ref)
    if np.any(norms_ref <= 0):
        raise DomainError("quadratic penalty bound requires positive reference columns")
    sq = np.sum(np.asarray(R, dtype=float) ** 2, axis=0)
    return float(0.5 * np.sum(sq / norms_ref + norms_ref))


def aux_bound_M(Y, state, M_cand, beta):
    """Auxiliary upper bound on the data term as a function of the endmembers.

    Evaluates the separable bound built at the state's current endmember
    matrix: a convexity (weighted split) term plus a tangent term on the
    concave component, plus the split offset so the value is directly
    comparable with the objective.  Equals the objective at
    ``M_cand == state.M`` and dominates it elsewhere.
    """
    M_ref = state.M
    A = state.A
    yf = floored(np.asarray(Y, dtype=float))
    ytil = floored(state.model)

    conv = np.zeros_like(yf)
    for k in range(M_ref.shape[1]):
        w = (M_ref[:, k : k + 1] * A[k : k + 1, :]) / ytil
        arg = floored(ytil * (M_cand[:, k] / np.where(M_ref[:, k] > 0, M_ref[:, k], 1.0))[:, None])
        term = convex_part_array(yf, arg, beta)
        conv += np.where(w > 0, w * term, 0.0)
    w_out = state.R / ytil
    conv += np.where(w_out > 0, w_out * convex_part_array(yf, ytil, beta), 0.0)

    delta = (np.asarray(M_cand, dtype=float) - M_ref) @ A
    conc = concave_part_array(yf, ytil, beta) + concave_part_grad_array(yf, ytil, beta) * delta

    return float(np.sum(conv) + np.sum(conc) + np.sum(split_offset_array(yf, beta)))


def aux_bound_R(Y, state, R_cand, beta, lam):
    """Auxiliary upper bound on the full objective as a function of the outliers.

    Combines the convexity and tangent bounds on the data term with the
    quadratic bound on the group penalty, all anchored at the state's
    current outlier matrix (which must be strictly positive on the
    compared columns).  Tight at ``R_cand == state.R``.
    """
    R_ref = state.R
    S = state.low_rank
    yf = floored(np.asarray(Y, dtype=float))
    ytil = floored(state.model)
    R_cand = np.asarray(R_cand, dtype=float)

    w_r = R_ref / ytil
    ratio = np.where(R_ref > 0, R_cand / np.where(R_ref > 0, R_ref, 1.0), 1.0)
    arg = floored(ytil * ratio)
    conv = np.where(w_r > 0, w_r * convex_part_array(yf, arg, beta), 0.0)
    w_s = S / ytil
    conv += np.where(w_s > 0, w_s * convex_part_array(yf, ytil, beta), 0.0)

    conc = concave_part_array(yf, ytil, beta) + concave_part_grad_array(yf, ytil, beta) * (
        R_cand - R_ref
    )

    data_bound = float(np.sum(conv) + np.sum(conc) + np.sum(split_offset_array(yf, beta)))
    return data_bound + lam * l21_quadratic_bound(R_cand, R_ref)
