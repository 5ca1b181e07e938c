"""Polylogarithm on the real segment ``z = exp(-eps)``, ``eps >= 0``.

Only the branch needed by power-law excursion tails is covered:
``Li_s(exp(-eps)) = sum_{n>=1} n**-s * exp(-eps*n)`` for real ``s``.
"""

import math
from functools import lru_cache

import numpy as np
from scipy.special import gamma, zeta

# below this distance from z = 1 the expansion in log z is used
_SWITCH = 1.0
_NTERMS = 48
_K = np.arange(_NTERMS, dtype=float)


def _is_positive_integer(s):
    return s >= 1 and abs(s - round(s)) < 1e-12


def _direct(s, eps):
    nmax = int(math.ceil((45.0 + 3.0 * max(0.0, -s)) / eps)) + 2
    n = np.arange(1, nmax + 1, dtype=float)
    terms = np.exp(-s * np.log(n) - eps * n)
    return float(math.fsum(terms[::-1]))


@lru_cache(maxsize=256)
def _expansion(s):
    # coefficients zeta(s-k)/k! and the singular part's constants for order s
    k = np.arange(_NTERMS, dtype=float)
    inv_fact = np.exp(-np.cumsum(np.log(np.maximum(k, 1.0))))
    if _is_positive_integer(s):
        m = int(round(s))
        args = m - k
        args[m - 1] = 0.0  # zeta(1) pole, replaced by the log term
        z = zeta(args)
        z[m - 1] = 0.0
        harmonic = sum(1.0 / j for j in range(1, m))
        return z * inv_fact, m, harmonic
    return zeta(s - k) * inv_fact, None, float(gamma(1.0 - s))


def _near_one(s, eps):
    # Li_s(e^mu) = Gamma(1-s)(-mu)^(s-1) + sum_k zeta(s-k) mu^k / k!,  |mu| < 2 pi
    coef, m, const = _expansion(s)
    powers = (-eps) ** _K
    if m is None:
        singular = const * eps ** (s - 1.0)
    else:
        singular = (-eps) ** (m - 1) / math.factorial(m - 1) * (const - math.log(eps))
    return float(singular + np.dot(coef, powers))


def polylog_exp(s, eps):
    """Return ``Li_s(exp(-eps))``; ``inf`` where the series diverges.

    Parameters
    ----------
    s : float
        Order of the polylogarithm (any real).
    eps : float
        Distance below the branch point in log scale, ``eps >= 0``.
    """
    s = float(s)
    eps = float(eps)
    if eps < 0 or math.isnan(eps):
        raise ValueError(f"eps must be >= 0, got {eps}")
    if eps == 0.0:
        return float(zeta(s)) if s > 1 else math.inf
    if math.isinf(eps):
        return 0.0
    if eps >= _SWITCH:
        return _direct(s, eps)
    return _near_one(s, eps)
