"""Matrix state for the factorization and the penalized objective.

Data layout convention: observations are bands x pixels, so each pixel
spectrum is a column.  All per-pixel quantities (outlier energies, the
group penalty, abundance columns) operate column-wise.
"""

from dataclasses import dataclass, field

import numpy as np

from .divergence import divergence_total
from .errors import DimensionMismatch, DomainError

# Tolerance on abundance column sums.
SIMPLEX_TOL = 1e-9

# Tolerance on cached products vs fresh recomputation.
CACHE_TOL = 1e-10


def check_nonnegative(arr, name):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch("%s must be a 2-D matrix, got ndim=%d" % (name, arr.ndim))
    if arr.size == 0:
        raise DimensionMismatch("%s must be nonempty" % name)
    if not np.all(np.isfinite(arr)):
        raise DomainError("%s contains non-finite entries" % name)
    if np.any(arr < 0):
        idx = np.argwhere(arr < 0)[0]
        raise DomainError(
            "%s has a negative entry at row %d, col %d" % (name, idx[0], idx[1])
        )
    return arr


def check_endmembers(M):
    M = check_nonnegative(M, "endmember matrix")
    dead = np.flatnonzero(M.sum(axis=0) == 0)
    if dead.size:
        raise DomainError("endmember column %d is identically zero" % dead[0])
    return M


def check_abundances(A, tol=SIMPLEX_TOL):
    A = check_nonnegative(A, "abundance matrix")
    sums = A.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise DomainError(
            "abundance column %d sums to %.12g, expected 1" % (bad[0], sums[bad[0]])
        )
    return A


def l21_norm(R):
    """Sum of the Euclidean norms of the columns of R."""
    R = np.asarray(R, dtype=float)
    return float(np.sum(np.sqrt(np.sum(R * R, axis=0))))


def energy_vector(R):
    """Per-pixel outlier energies: the Euclidean norm of each column."""
    R = np.asarray(R, dtype=float)
    return np.sqrt(np.sum(R * R, axis=0))


class UnmixingState:
    """Factor matrices plus cached low-rank and full reconstructions.

    The caches ``low_rank`` (= M A) and ``model`` (= M A + R) are
    refreshed by the ``replace_*`` methods; they must always agree with
    a fresh recomputation from the factors.
    """

    __slots__ = ("M", "A", "R", "low_rank", "model")

    def __init__(self, M, A, R):
        self.M = np.asarray(M, dtype=float)
        self.A = np.asarray(A, dtype=float)
        self.R = np.asarray(R, dtype=float)
        if self.M.shape[1] != self.A.shape[0]:
            raise DimensionMismatch(
                "endmembers are %dx%d but abundances are %dx%d"
                % (self.M.shape + self.A.shape)
            )
        if self.R.shape != (self.M.shape[0], self.A.shape[1]):
            raise DimensionMismatch(
                "outlier matrix is %dx%d, expected %dx%d"
                % (self.R.shape + (self.M.shape[0], self.A.shape[1]))
            )
        self.refresh()

    @property
    def shape(self):
        return self.R.shape

    @property
    def n_endmembers(self):
        return self.M.shape[1]

    def refresh(self):
        self.low_rank = self.M @ self.A
        self.model = self.low_rank + self.R

    def replace_M(self, M_new):
        self.M = np.asarray(M_new, dtype=float)
        self.refresh()

    def replace_A(self, A_new):
        self.A = np.asarray(A_new, dtype=float)
        self.refresh()

    def replace_R(self, R_new):
        self.R = np.asarray(R_new, dtype=float)
        self.model = self.low_rank + self.R

    def copy(self):
        return UnmixingState(self.M.copy(), self.A.copy(), self.R.copy())


def objective(Y, state, beta, lam):
    """Penalized objective: beta-divergence data term plus the group penalty.

    Parameters
    ----------
    Y : ndarray
        Bands x pixels data matrix.
    state : UnmixingState
        Current factorization with fresh caches.
    beta : float
        Divergence shape parameter.
    lam : float
        Nonnegative weight on the column-norm penalty of the outliers.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape != state.shape:
        raise DimensionMismatch(
            "data is %dx%d but the state is %dx%d" % (Y.shape + state.shape)
        )
    if lam < 0:
        raise DomainError("penalty weight must be nonnegative, got %r" % lam)
    return divergence_total(Y, state.model, beta) + lam * l21_norm(state.R)


@dataclass
class Violation:
    """One violated state invariant, locating the offending entries."""

    kind: str
    where: str
    value: float = field(default=0.0)

    def __str__(self):
        return "%s at %s (%.6g)" % (self.kind, self.where, self.value)


def validate(state, simplex_tol=SIMPLEX_TOL, cache_tol=CACHE_TOL):
    """Collect every violated invariant of an unmixing state.

    Returns an empty list when the state is valid.  Checks negativity of
    all three factors, abundance column sums, and staleness of the two
    cached products.
    """
    out = []
    for name, mat in (("M", state.M), ("A", state.A), ("R", state.R)):
        neg = np.argwhere(mat < 0)
        for i, j in neg:
            out.append(Violation("negativity", "%s[%d,%d]" % (name, i, j), mat[i, j]))
    sums = state.A.sum(axis=0)
    for p in np.flatnonzero(np.abs(sums - 1.0) > simplex_tol):
        out.append(Violation("sum_to_one", "A column %d" % p, sums[p]))
    dead = np.flatnonzero(state.M.sum(axis=0) == 0)
    for k in dead:
        out.append(Violation("zero_column", "M column %d" % k, 0.0))
    s_err = float(np.max(np.abs(state.low_rank - state.M @ state.A), initial=0.0))
    if s_err > cache_tol:
        out.append(Violation("stale_cache", "low_rank", s_err))
    y_err = float(
        np.max(np.abs(state.model - (state.M @ state.A + state.R)), initial=0.0)
    )
    if y_err > cache_tol:
        out.append(Violation("stale_cache", "model", y_err))
    return out
