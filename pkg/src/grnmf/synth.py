"""Synthetic hyperspectral scene generation.

Pixels follow one of four mixing models: a plain linear mixture, or a
linear mixture plus pairwise endmember interaction terms with three
different coefficient conventions (free simplex-coupled coefficients,
abundance products, or uniformly drawn attenuations of the products).
Only a configurable fraction of pixels receives the interaction term;
the rest stay linear.

Randomness is split into per-pixel counter-based substreams so that the
output is independent of any parallel evaluation order.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionMismatch, DomainError
from .matrixio import read_matrix
from .model import check_nonnegative

MODELS = ("lmm", "nm", "fm", "gbm")

TRUNCATION_CAP = 0.9


@dataclass
class SceneSpec:
    """Parameters of one synthetic scene."""

    model: str
    L: int
    K: int
    P: int = 0
    width: int = 0
    height: int = 0
    snr_db: float = 30.0
    pure_pixels: bool = True
    nonlinear_fraction: float = 0.25
    seed: int = 0
    nm_shared_b: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(
                "unknown mixing model %r, expected one of %r" % (self.model, MODELS)
            )
        if self.width and self.height:
            if self.P and self.P != self.width * self.height:
                raise ConfigurationError("P conflicts with width*height")
            self.P = self.width * self.height
        if self.L < 1 or self.K < 1 or self.P < 1:
            raise ConfigurationError("L, K and P must all be at least 1")
        if not math.isfinite(self.snr_db):
            raise ConfigurationError("snr_db must be finite")
        if not 0.0 <= self.nonlinear_fraction <= 1.0:
            raise ConfigurationError("nonlinear_fraction must lie in [0, 1]")


@dataclass
class GroundTruth:
    """Everything needed to score an unmixing of a generated scene."""

    M_true: np.ndarray
    A_true: np.ndarray
    nonlinear_mask: np.ndarray
    B_true: np.ndarray | None = None
    Gamma_true: np.ndarray | None = None
    noise_sigma: float = 0.0
    clamped_fraction: float = 0.0
    empirical_snr_db: float = field(default=float("nan"))


def _pixel_rng(seed, p):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, p)))


def _gaps(k, rng):
    # Sorted-uniform-gaps construction: k-1 uniforms cut [0,1] into k
    # exchangeable gaps that are uniform on the unit simplex.
    if k == 1:
        return np.ones(1)
    cuts = np.sort(rng.random(k - 1))
    return np.diff(cuts, prepend=0.0, append=1.0)


def sample_simplex(k, truncated=False, cap=TRUNCATION_CAP, rng=None):
    """Draw one abundance column, uniformly on the unit-sum simplex.

    With ``truncated`` the draw is conditioned on every coefficient
    staying at or below ``cap``, which excludes (near-)pure pixels while
    keeping the unit sum; achieved by rejection, which stays cheap for
    any cap comfortably above 1/k.
    """
    if k < 1:
        raise DomainError("simplex dimension must be at least 1")
    rng = np.random.default_rng(rng)
    if not truncated:
        return _gaps(k, rng)
    if k * cap < 1.0:
        raise DomainError(
            "cap %.3g is infeasible for %d coefficients summing to 1" % (cap, k)
        )
    if k == 1:
        raise DomainError("a one-coefficient simplex has only the pure pixel")
    while True:
        a = _gaps(k, rng)
        if a.max() <= cap:
            return a


def pair_indices(K):
    """Lexicographic (i, j) endmember pairs with i < j."""
    return [(i, j) for i in range(K - 1) for j in range(i + 1, K)]


def interaction_products(M):
    """L x n_pairs matrix of termwise endmember products, one per pair."""
    pairs = pair_indices(M.shape[1])
    if not pairs:
        return np.zeros((M.shape[0], 0))
    return np.column_stack([M[:, i] * M[:, j] for i, j in pairs])


def generate(spec, M_source):
    """Generate one scene: returns ``(Y, GroundTruth)``.

    ``M_source`` supplies the true endmember spectra (bands x K,
    nonnegative, values in [0, 1] recommended).  The noise level is
    calibrated so that the mean squared noise matches the requested
    signal-to-noise ratio against the mean squared noise-free signal;
    entries pushed below zero by the noise are clamped at zero.
    """
    M = check_nonnegative(M_source, "endmember matrix")
    if M.shape != (spec.L, spec.K):
        raise DimensionMismatch(
            "endmember matrix is %dx%d but the scene wants %dx%d"
            % (M.shape + (spec.L, spec.K))
        )
    L, K, P = spec.L, spec.K, spec.P
    pairs = pair_indices(K)
    n_pairs = len(pairs)
    n_b = (K - 1) if spec.nm_shared_b else n_pairs
    cross = interaction_products(M)

    mask = np.zeros(P, dtype=bool)
    if spec.model != "lmm":
        n_nl = int(round(spec.nonlinear_fraction * P))
        mask_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=spec.seed, spawn_key=(0,))
        )
        mask[mask_rng.choice(P, size=n_nl, replace=False)] = True

    A = np.zeros((K, P))
    B = np.zeros((n_b, P)) if spec.model == "nm" else None
    G = np.zeros((n_pairs, P)) if spec.model == "gbm" else None
    signal = np.zeros((L, P))
    noise = np.zeros((L, P))
    truncated = not spec.pure_pixels

    for p in range(P):
        rng = _pixel_rng(spec.seed, p)
        if spec.model == "nm" and mask[p]:
            ext = sample_simplex(K + n_b, truncated=truncated, rng=rng)
            a, b = ext[:K], ext[K:]
            B[:, p] = b
            if spec.nm_shared_b:
                coeff = np.array([b[i] for i, _ in pairs])
            else:
                coeff = b
            extra = cross @ coeff
        else:
            a = sample_simplex(K, truncated=truncated, rng=rng)
            if mask[p] and spec.model == "fm":
                extra = cross @ np.array([a[i] * a[j] for i, j in pairs])
            elif mask[p] and spec.model == "gbm":
                g = rng.uniform(0.0, 1.0, size=n_pairs)
                G[:, p] = g
                extra = cross @ (g * np.array([a[i] * a[j] for i, j in pairs]))
            else:
                extra = 0.0
        A[:, p] = a
        signal[:, p] = M @ a + extra
        noise[:, p] = rng.standard_normal(L)

    mean_sq = float(np.mean(signal**2))
    sigma = math.sqrt(mean_sq / 10.0 ** (spec.snr_db / 10.0))
    raw = signal + sigma * noise
    clamped = float(np.mean(raw < 0))
    Y = np.maximum(raw, 0.0)
    resid = Y - signal
    resid_power = float(np.sum(resid**2))
    if resid_power > 0:
        snr_emp = 10.0 * math.log10(np.sum(signal**2) / resid_power)
    else:
        snr_emp = float("inf")

    truth = GroundTruth(
        M_true=M.copy(),
        A_true=A,
        nonlinear_mask=mask,
        B_true=B,
        Gamma_true=G,
        noise_sigma=sigma,
        clamped_fraction=clamped,
        empirical_snr_db=snr_emp,
    )
    return Y, truth


def implied_outliers(spec, truth):
    """Noise-free nonlinear component of a generated scene (L x P).

    This is the residual the robust factorization is meant to absorb:
    zero on linear pixels, the interaction sum elsewhere.
    """
    M = truth.M_true
    pairs = pair_indices(M.shape[1])
    cross = interaction_products(M)
    P = truth.A_true.shape[1]
    R = np.zeros((M.shape[0], P))
    for p in np.flatnonzero(truth.nonlinear_mask):
        a = truth.A_true[:, p]
        if spec.model == "nm":
            b = truth.B_true[:, p]
            coeff = np.array([b[i] for i, _ in pairs]) if spec.nm_shared_b else b
        elif spec.model == "fm":
            coeff = np.array([a[i] * a[j] for i, j in pairs])
        elif spec.model == "gbm":
            coeff = truth.Gamma_true[:, p] * np.array([a[i] * a[j] for i, j in pairs])
        else:
            continue
        if coeff.size:
            R[:, p] = cross @ coeff
    return R


def synthetic_spectra(L, K, seed=0, baseline=0.15):
    """Smooth random endmember spectra in (0, 1], bands x K.

    Each spectrum is a small baseline plus a few Gaussian bumps with
    random centers and widths, peak-normalized to 1.  Useful wherever a
    measured spectral library is not available.
    """
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, L)
    M = np.zeros((L, K))
    for k in range(K):
        s = np.full(L, baseline)
        for _ in range(4):
            amp = rng.uniform(0.3, 1.0)
            center = rng.uniform(0.0, 1.0)
            width = rng.uniform(0.05, 0.25)
            s = s + amp * np.exp(-((x - center) ** 2) / (2.0 * width**2))
        M[:, k] = s / s.max()
    return M


def load_endmember_library(path):
    """Read and validate an endmember spectra file in either matrix format."""
    M = read_matrix(path)
    return check_nonnegative(M, "endmember matrix")
