"""Beta-divergence family, its convex-concave split and the MM step exponents.

The divergence is parametrized by a single shape value ``beta`` selecting
between three closed forms: a general power expression, the
Kullback-Leibler form at ``beta == 1`` and the Itakura-Saito form at
``beta == 0``.  Branch selection is by exact comparison on the stored
value, never by numeric proximity.
"""

import numpy as np

from .errors import DomainError

# Floor applied to model/data entries before powers and logs inside
# iterative code paths; the beta < 1 branches are singular at 0.
EPS = 1e-12

# Floor applied to denominators of multiplicative ratios.
DEN_FLOOR = 1e-300


def beta_divergence(x, y, beta):
    """Scalar beta-divergence between a data value x and a model value y.

    Parameters
    ----------
    x : float
        Nonnegative data value.
    y : float
        Positive model value.
    beta : float
        Shape parameter selecting the divergence.

    Returns
    -------
    float
        The divergence, nonnegative and zero iff ``x == y``.

    Raises
    ------
    DomainError
        If ``y <= 0``, if ``x < 0``, or if the selected branch is
        singular at ``x == 0`` (any ``beta <= 0``).
    """
    if not np.isfinite(beta):
        raise DomainError("beta must be finite, got %r" % beta)
    if y <= 0:
        raise DomainError("model value must be positive, got y=%r" % y)
    if x < 0:
        raise DomainError("data value must be nonnegative, got x=%r" % x)
    if x == 0 and beta <= 0:
        raise DomainError(
            "beta=%r branch is singular at x=0 (x**beta or log x diverges)" % beta
        )
    if x == y:
        return 0.0
    if beta == 1:
        # x*log(x/y) - x + y, with the x -> 0 limit equal to y.
        if x == 0:
            return float(y)
        d = x * np.log(x / y) - x + y
    elif beta == 0:
        r = x / y
        d = r - np.log(r) - 1.0
    else:
        d = (
            x**beta / (beta * (beta - 1.0))
            + y**beta / beta
            - x * y ** (beta - 1.0) / (beta - 1.0)
        )
    if not np.isfinite(d):
        raise DomainError(
            "beta=%r branch produced a non-finite value at x=%r, y=%r" % (beta, x, y)
        )
    # Clip tiny negative round-off near x == y.
    return float(max(d, 0.0)) if abs(d) < 1e-15 else float(d)


def beta_divergence_array(x, y, beta):
    """Elementwise beta-divergence of two arrays.

    The caller is responsible for the domain: ``y > 0`` everywhere and
    ``x > 0`` wherever ``beta <= 0``.  Iterative code paths achieve this
    with :func:`floored`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if beta == 2:
        d = x - y
        out = 0.5 * d * d
    elif beta == 1:
        out = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0) / y), 0.0) - x + y
    elif beta == 0:
        r = x / y
        out = r - np.log(r) - 1.0
    else:
        out = (
            x**beta / (beta * (beta - 1.0))
            + y**beta / beta
            - x * y ** (beta - 1.0) / (beta - 1.0)
        )
    return out


def floored(a, floor=EPS):
    """Clamp an array below at ``floor`` (protects powers and logs at 0)."""
    return np.maximum(a, floor)


def divergence_total(x, y, beta, floor=EPS):
    """Sum of elementwise beta-divergences with both arguments floored.

    This is the data-fitting term used by all iterative code paths.
    """
    total = float(np.sum(beta_divergence_array(floored(x, floor), floored(y, floor), beta)))
    return max(total, 0.0)


def _branch(beta):
    """Row selector for the four-way convex-concave split."""
    if beta == 0:
        return "is"
    if beta < 1:
        return "low"
    if beta <= 2:
        return "mid"
    return "high"


def convex_part(x, y, beta):
    """Convex-in-y component of the divergence split (scalar)."""
    return float(convex_part_array(x, y, beta))


def convex_part_array(x, y, beta):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    row = _branch(beta)
    if row == "low":
        return -x * y ** (beta - 1.0) / (beta - 1.0)
    if row == "is":
        return x / y
    if row == "mid":
        return beta_divergence_array(x, y, beta)
    return y**beta / beta


def concave_part(x, y, beta):
    """Concave-in-y component of the divergence split (scalar)."""
    return float(concave_part_array(x, y, beta))


def concave_part_array(x, y, beta):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    row = _branch(beta)
    if row == "low":
        return y**beta / beta + np.zeros_like(x)
    if row == "is":
        return np.log(y) + np.zeros_like(x)
    if row == "mid":
        return np.zeros_like(x * y)
    return -x * y ** (beta - 1.0) / (beta - 1.0)


def concave_part_grad(x, y, beta):
    """Derivative of the concave component with respect to y (scalar)."""
    if np.asarray(y).min() <= 0:
        raise DomainError("concave part derivative requires y > 0")
    return float(concave_part_grad_array(x, y, beta))


def concave_part_grad_array(x, y, beta):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    row = _branch(beta)
    if row == "low":
        return y ** (beta - 1.0) + np.zeros_like(x)
    if row == "is":
        return 1.0 / y + np.zeros_like(x)
    if row == "mid":
        return np.zeros_like(x * y)
    return -x * y ** (beta - 2.0)


def split_offset(x, beta):
    """Constant-in-y remainder of the split: divergence - convex - concave."""
    return float(split_offset_array(x, beta))


def split_offset_array(x, beta):
    x = np.asarray(x, dtype=float)
    row = _branch(beta)
    if row == "is":
        return -np.log(x) - 1.0
    if row == "mid":
        return np.zeros_like(x)
    return x**beta / (beta * (beta - 1.0))


def factor_exponent(beta):
    """MM step exponent for factor-matrix (endmember) updates."""
    row = _branch(beta)
    if row == "low":
        return 1.0 / (2.0 - beta)
    if row == "is":
        return 0.5
    if row == "mid":
        return 1.0
    return 1.0 / (beta - 1.0)


def outlier_exponent(beta):
    """MM step exponent for the outlier-matrix update."""
    row = _branch(beta)
    if row == "low":
        return 1.0 / (3.0 - beta)
    if row == "is":
        return 1.0 / 3.0
    if row == "mid":
        return 1.0 / (3.0 - beta)
    return 1.0 / (beta - 1.0)


def model_powers(yhat_floored, beta):
    """Precompute the two elementwise powers of the floored model matrix.

    Returns ``(yhat**(beta-1), yhat**(beta-2))``.  The common integer
    exponents are special-cased since they dominate solver run time.
    """
    e1 = beta - 1.0
    e2 = beta - 2.0

    def _pow(a, e):
        if e == 0.0:
            return np.ones_like(a)
        if e == 1.0:
            return a
        if e == -1.0:
            return 1.0 / a
        if e == -2.0:
            return 1.0 / (a * a)
        return a**e

    return _pow(yhat_floored, e1), _pow(yhat_floored, e2)
