"""Block-coordinate descent driver, initialization and the penalty rule.

One outer iteration updates the outliers, the abundances and the
endmembers in that order, refreshing the cached reconstruction after
each block, then evaluates the penalized objective once.  Convergence
is declared when the relative objective decrease falls under the
tolerance.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, DomainError, NumericalFailure
from .model import (
    UnmixingState,
    check_abundances,
    check_endmembers,
    check_nonnegative,
    energy_vector,
    objective,
)
from .updates import POLICIES, update_abundances, update_endmembers, update_outliers

INIT_KINDS = ("random-uniform", "dirichlet", "from-matrices")

LAMBDA_DIM_RULES = ("endmembers", "bands")

# Outlier matrices are seeded at this fraction of the data mean.
OUTLIER_INIT_SCALE = 1e-2

# Value written into zero outlier columns when re-seeding is enabled.
RESEED_VALUE = 1e-8
RESEED_PERIOD = 50


@dataclass
class InitSpec:
    """How to build the starting point of a solve."""

    kind: str = "random-uniform"
    M0: np.ndarray | None = None
    A0: np.ndarray | None = None
    R0: np.ndarray | None = None
    dirichlet_alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ConfigurationError(
                "unknown init kind %r, expected one of %r" % (self.kind, INIT_KINDS)
            )
        if self.kind == "from-matrices" and self.M0 is None:
            raise ConfigurationError("from-matrices init requires M0")


@dataclass
class SolverConfig:
    """All tunables of one solve.  ``lam=None`` resolves the penalty
    weight from the data via :func:`penalty_weight`."""

    beta: float = 2.0
    lam: float | None = None
    tol: float = 1e-5
    max_iter: int = 500
    policy: str = "table-one"
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    r_reseed: bool = False
    penalty_norm: str = "l2"
    rho: float = 0.0
    lambda_dim_rule: str = "endmembers"

    def validate(self):
        if not math.isfinite(self.beta):
            raise ConfigurationError("beta must be finite")
        if self.lam is not None and (not math.isfinite(self.lam) or self.lam < 0):
            raise ConfigurationError("lambda must be a nonnegative finite value")
        if self.tol <= 0:
            raise ConfigurationError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")
        if self.policy not in POLICIES:
            raise ConfigurationError("unknown exponent policy %r" % self.policy)
        if self.penalty_norm not in ("l2", "l1"):
            raise ConfigurationError("penalty_norm must be 'l2' or 'l1'")
        if self.lambda_dim_rule not in LAMBDA_DIM_RULES:
            raise ConfigurationError(
                "lambda_dim_rule must be one of %r" % (LAMBDA_DIM_RULES,)
            )
        if self.rho < 0:
            raise ConfigurationError("rho must be nonnegative")


@dataclass
class SolveReport:
    """Outcome of one solve: final state, trace and stop diagnostics."""

    state: UnmixingState
    objective_trace: np.ndarray
    iterations: int
    stop_reason: str
    wall_time: float
    lam: float

    def to_dict(self, include_timing=True):
        out = {
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "lambda": float(self.lam),
            "objective_trace": [float(v) for v in self.objective_trace],
            "final_objective": float(self.objective_trace[-1]),
            "outlier_l21": float(np.sum(energy_vector(self.state.R))),
        }
        if include_timing:
            out["wall_time_s"] = float(self.wall_time)
        return out

    def canonical_json(self):
        """Deterministic serialization: identical bytes for identical
        (data, config, seed) runs.  Excludes wall-clock timing."""
        return json.dumps(self.to_dict(include_timing=False), sort_keys=True)


def sparsity_constant(n):
    """Moment-matching constant of the column-norm prior for n-vectors."""
    if n < 1:
        raise DomainError("dimension must be at least 1")
    return float(2.0 / math.sqrt(math.pi) * math.exp(gammaln(n / 2.0 + 1.0) - gammaln(n / 2.0 + 0.5)))


def penalty_weight(Y, K, rho=0.0, dim_rule="endmembers"):
    """Method-of-moments estimate of the penalty weight.

    Matches the empirical data mean against the prior expectation of
    the reconstruction; ``rho`` is the assumed mean of the low-rank
    part and must stay below the data mean.  With ``rho=0`` this is the
    lower bound used as the default weight.
    """
    Y = np.asarray(Y, dtype=float)
    mu = float(Y.mean())
    if mu <= 0:
        raise DomainError("data mean must be positive to estimate the penalty weight")
    if rho >= mu:
        raise ConfigurationError(
            "rho=%g must be below the data mean %g" % (rho, mu)
        )
    n = int(K) if dim_rule == "endmembers" else Y.shape[0]
    if dim_rule not in LAMBDA_DIM_RULES:
        raise ConfigurationError("dim_rule must be one of %r" % (LAMBDA_DIM_RULES,))
    return sparsity_constant(n) / (mu - rho)


def estimate_lambda0(Y, K, dim_rule="endmembers"):
    """Lower bound of the penalty-weight estimate (zero low-rank prior mean)."""
    return penalty_weight(Y, K, rho=0.0, dim_rule=dim_rule)


def _simplex_columns(K, P, rng):
    # Sorted-uniform-gaps per column, vectorized over pixels.
    if K == 1:
        return np.ones((1, P))
    cuts = np.sort(rng.random((P, K - 1)), axis=1)
    return np.diff(cuts, prepend=0.0, append=1.0, axis=1).T


def initialize(Y, K, spec=None, seed=0):
    """Build a starting state for the block-coordinate loop.

    Random kinds draw endmembers uniformly on (0, max(Y)], abundances
    uniformly on the simplex (or from a Dirichlet), and seed the
    outliers at a small constant fraction of the data mean.
    Deterministic for a given seed.
    """
    if spec is None:
        spec = InitSpec()
    Y = np.asarray(Y, dtype=float)
    L, P = Y.shape
    rng = np.random.default_rng(seed)
    r_const = OUTLIER_INIT_SCALE * float(Y.mean())

    if spec.kind == "from-matrices":
        M = check_endmembers(spec.M0)
        if M.shape != (L, K):
            raise ConfigurationError(
                "M0 is %dx%d, expected %dx%d" % (M.shape + (L, K))
            )
        if spec.A0 is not None:
            A = check_abundances(spec.A0)
        else:
            A = _simplex_columns(K, P, rng)
        if spec.R0 is not None:
            R = check_nonnegative(spec.R0, "R0")
        else:
            R = np.zeros((L, P))
        return UnmixingState(M.copy(), A.copy(), R.copy())

    ymax = float(Y.max())
    if ymax <= 0:
        ymax = 1.0
    M = ymax * (1.0 - rng.random((L, K)))
    if spec.kind == "random-uniform":
        A = _simplex_columns(K, P, rng)
    else:
        A = rng.dirichlet(spec.dirichlet_alpha * np.ones(K), size=P).T
    R = np.full((L, P), r_const)
    return UnmixingState(M, A, R)


def solve(Y, K, config=None):
    """Run the full block-coordinate descent.

    Parameters
    ----------
    Y : ndarray
        Nonnegative bands x pixels data.
    K : int
        Number of endmembers.
    config : SolverConfig, optional
        Defaults to a squared-Euclidean fit with the automatic penalty
        weight.

    Returns
    -------
    SolveReport
    """
    if config is None:
        config = SolverConfig()
    config.validate()
    Y = check_nonnegative(Y, "data matrix")
    if K < 1:
        raise ConfigurationError("K must be at least 1")

    lam = config.lam
    if lam is None:
        lam = penalty_weight(Y, K, rho=config.rho, dim_rule=config.lambda_dim_rule)

    t0 = time.perf_counter()
    state = initialize(Y, K, config.init, config.seed)
    if state.shape != Y.shape or state.n_endmembers != K:
        raise ConfigurationError("initial state does not match the data dimensions")

    current = objective(Y, state, config.beta, lam)
    if not math.isfinite(current):
        raise NumericalFailure("objective not finite at initialization", iteration=0)
    trace = [current]
    stop_reason = "max-iter"
    iterations = 0

    for it in range(1, config.max_iter + 1):
        state.replace_R(
            update_outliers(
                Y, state, config.beta, lam,
                policy=config.policy, penalty_norm=config.penalty_norm,
            )
        )
        if config.r_reseed and it % RESEED_PERIOD == 0:
            dead = energy_vector(state.R) == 0
            if dead.any():
                R = state.R.copy()
                R[:, dead] = RESEED_VALUE
                state.replace_R(R)
        state.replace_A(update_abundances(Y, state, config.beta))
        state.replace_M(update_endmembers(Y, state, config.beta, policy=config.policy))

        value = objective(Y, state, config.beta, lam)
        if not math.isfinite(value):
            raise NumericalFailure("objective became non-finite", iteration=it)
        trace.append(value)
        iterations = it
        rel = 0.0 if current == 0 else abs(current - value) / abs(current)
        current = value
        if rel < config.tol:
            stop_reason = "converged"
            break

    return SolveReport(
        state=state,
        objective_trace=np.asarray(trace),
        iterations=iterations,
        stop_reason=stop_reason,
        wall_time=time.perf_counter() - t0,
        lam=lam,
    )
