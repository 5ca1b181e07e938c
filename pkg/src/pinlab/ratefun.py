"""Large-deviation rate functions of the excursion law and the variational
functionals built from them.

For a law with conditional mgf ``M^f`` the rate function of the empirical
mean excursion length is the Legendre transform

    I^f(t) = sup_{x <= b_E} (t x - log M^f(x)),

and the contact-density versions are ``ghat_f(d) = d I^f(1/d)``,
``ghat(d) = ghat_f(d) + r d`` and ``g`` (which replaces ``ghat`` by the
escape line ``r d`` below ``1/m_E`` for transient laws). Everything is
evaluated lazily at the requested point; nothing is tabulated globally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._optim import golden_max, golden_min
from .errors import Unsupported
from .excursion import ExcursionLaw

__all__ = [
    "RateProfile",
    "rate_I_f",
    "rate_I",
    "rate_J",
    "g",
    "ghat",
    "ghat_f",
    "h",
    "x_star",
    "delta0",
    "variational_annealed",
    "quenched_upper_bound",
]

# relative slack for recognising the support endpoints t = a and t = A
_EDGE = 1e-13
_TOL = 1e-10


@dataclass(frozen=True)
class RateProfile:
    """Queryable rate functions of one excursion law.

    Parameters
    ----------
    law : ExcursionLaw

    Notes
    -----
    All functions of the contact density ``d`` are extended-real valued and
    equal ``+inf`` outside ``[0, 1/a]``. For recurrent laws ``g`` coincides
    with ``ghat`` (so ``g(0) = b_E``); the escape line ``g(d) = r d`` only
    exists when there is mass at infinity.
    """

    law: ExcursionLaw
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- scalars ------------------------------------------------------------

    @property
    def r(self) -> float:
        return self.law.r

    @property
    def b_E(self) -> float:
        return self.law.b_E

    @property
    def m_E(self) -> float:
        return self.law.m_E

    @property
    def b_e_prime(self) -> float:
        return self.law.b_e_prime

    @property
    def a(self) -> int:
        return self.law.a

    @property
    def A(self) -> float:
        return self.law.A

    @property
    def log_mgf_boundary(self) -> float:
        return self.law.log_mgf_boundary

    @property
    def _lo(self) -> float:
        # below 1/A every rate is infinite
        return 0.0 if math.isinf(self.A) else 1.0 / self.A

    @property
    def _hi(self) -> float:
        return 1.0 / self.a

    # -- Legendre transform -------------------------------------------------

    def _edge_rate(self, n) -> float:
        return -(self.law.log_pmf(n) - math.log(self.law.finite_mass))

    def _solve_gap(self, t: float) -> float:
        # mean_gap(eps) decreases from b_E' (eps = 0) to a (eps = inf)
        law = self.law

        def f(v):
            return law.mean_gap(math.exp(v)) - t

        v_hi = 0.0
        while f(v_hi) > 0.0:
            v_hi += 2.0
            if v_hi > 6.6:
                return math.exp(v_hi)
        v_lo = v_hi - 2.0
        while f(v_lo) < 0.0:
            v_lo -= 4.0
            if v_lo < -700.0:
                return 0.0
        v = brentq(f, v_lo, v_hi, xtol=1e-15, rtol=1e-15, maxiter=300)
        return math.exp(v)

    def _solve_x(self, t: float) -> float:
        # b_E = inf: (log M^f)' increases from a to A on the whole real line
        law = self.law

        def f(x):
            return law.tilted_mean(x) - t

        lo, hi = -1.0, 1.0
        while f(lo) > 0.0:
            lo *= 2.0
        while f(hi) < 0.0:
            hi *= 2.0
        return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=300)

    def legendre_point(self, t: float):
        """Maximizer and value of ``sup_x (t x - log M^f(x))``.

        Returns
        -------
        x_hat : float
            The maximizing ``x``; ``b_E`` on the affine branch, ``-inf`` /
            ``+inf`` at the support endpoints and ``nan`` where the rate is
            infinite.
        log_m : float
            ``log M^f(x_hat)`` (``nan`` when ``x_hat`` is not finite).
        value : float
            ``I^f(t)``.
        """
        t = float(t)
        if not t > 0.0:
            raise ValueError(f"mean excursion length must be positive, got {t}")
        a, A = self.a, self.A
        if t < a * (1.0 - _EDGE) or t > A * (1.0 + _EDGE):
            return math.nan, math.nan, math.inf
        if t <= a * (1.0 + _EDGE):
            return -math.inf, math.nan, self._edge_rate(a)
        if math.isfinite(A) and t >= A * (1.0 - _EDGE):
            return math.inf, math.nan, self._edge_rate(A)
        b = self.b_E
        if math.isinf(b):
            x = self._solve_x(t)
            lm = self.law.log_mgf_finite(x)
            return x, lm, t * x - lm
        if t >= self.b_e_prime:
            lm = self.log_mgf_boundary
            return b, lm, t * b - lm
        eps = self._solve_gap(t)
        lm = self.law.log_mgf_gap(eps)
        x = b - eps
        return x, lm, t * x - lm

    def rate_I_f(self, t: float) -> float:
        """``I^f(t)``: rate of the mean of finite excursions."""
        return self.legendre_point(t)[2]

    def rate_I(self, t: float) -> float:
        """``I(t) = I^f(t) + r``."""
        return self.rate_I_f(t) + self.r

    def rate_J(self, t: float) -> float:
        """Legendre transform of the unconditional ``log M``.

        Flat at ``r`` beyond ``m_E`` for transient laws, equal to ``I``
        otherwise.
        """
        if self.r > 0.0 and t >= self.m_E:
            return self.r
        return self.rate_I(t)

    # -- functions of the contact density ------------------------------------

    def ghat_f(self, d: float) -> float:
        """``d I^f(1/d)`` with value ``b_E`` at ``d = 0``."""
        d = float(d)
        if d < 0.0 or d > self._hi * (1.0 + _EDGE):
            return math.inf
        if d == 0.0:
            return self.b_E
        key = ("ghat_f", d)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        x, lm, val = self.legendre_point(1.0 / d)
        if math.isfinite(x):
            out = x - d * lm
        else:
            out = d * val
        if len(self._cache) < 200_000:
            self._cache[key] = out
        return out

    def ghat(self, d: float) -> float:
        """``ghat_f(d) + r d``."""
        return self.ghat_f(d) + self.r * float(d)

    def g(self, d: float) -> float:
        """``d J(1/d)``: the escape line ``r d`` on ``[0, 1/m_E]`` for transient
        laws, ``ghat`` elsewhere."""
        d = float(d)
        if self.r > 0.0 and 0.0 <= d <= 1.0 / self.m_E:
            return self.r * d
        return self.ghat(d)

    def h(self, d: float, beta: float, sigma: float = 1.0) -> float:
        """``ghat(d) + beta^2 sigma^2 d^2 / 2``."""
        d = float(d)
        return self.ghat(d) + 0.5 * (beta * sigma * d) ** 2

    # -- minimizers -----------------------------------------------------------

    @property
    def x_star(self) -> float:
        """Minimizer of ``ghat`` over ``[0, 1/a]``."""
        hit = self._cache.get("x_star")
        if hit is None:
            hit = golden_min(self.ghat, self._lo, self._hi, _TOL)[0]
            self._cache["x_star"] = hit
        return hit

    def delta0(self, beta: float, logMV: float, sigma: float = 1.0) -> float:
        """Largest ``d0`` below the cap ``min(b_E,1) / (4 (logMV + r))`` with
        ``h > min(b_E, 1)/2`` on ``[0, d0)``.

        Raises
        ------
        Unsupported
            For recurrent laws or laws without exponential tails.
        """
        if self.r <= 0.0:
            raise Unsupported("delta0 needs a transient law")
        if not self.b_E > 0.0:
            raise Unsupported("delta0 needs exponential excursion tails (b_E > 0)")
        bmin = min(self.b_E, 1.0)
        cap = bmin / (4.0 * (logMV + self.r))
        thr = 0.5 * bmin

        def hh(d):
            return self.h(d, beta, sigma)

        lo = self._lo
        if cap <= lo:
            return cap
        d_min, h_min = golden_min(hh, lo, cap, _TOL)
        if h_min > thr:
            return cap
        # h is convex, hence decreasing on [0, d_min]: bisect the first crossing
        left, right = 0.0, d_min
        while right - left > 1e-13:
            mid = 0.5 * (left + right)
            if hh(mid) > thr:
                left = mid
            else:
                right = mid
        return left

    # -- variational functionals ---------------------------------------------

    def variational_annealed(self, beta: float, u: float, logMV: float):
        """``sup_d ((beta u + logMV) d - g(d))`` over ``[0, 1]`` and its argmax.

        Returns
        -------
        (value, argmax) where ``value`` is ``beta * f^a``.
        """
        K = beta * u + logMV

        def obj(d):
            return K * d - self.ghat(d)

        if self.r > 0.0:
            edge = 1.0 / self.m_E
            cands = [(0.0, 0.0), (edge, (K - self.r) * edge)]
            if edge < self._hi:
                cands.append(golden_max(obj, max(edge, self._lo), self._hi, _TOL))
        else:
            cands = [golden_max(obj, self._lo, self._hi, _TOL)]
        best = cands[0]
        for c in cands[1:]:
            if c[1] > best[1]:
                best = c
        return best[1], best[0]

    def quenched_upper_bound(self, beta: float, u: float, logMV: float,
                             sigma: float = 1.0) -> float:
        """Upper bound on the Gaussian quenched free energy ``f^q``.

        ``max(sup_d ((beta u + logMV) d - ghat(d) - beta^2 sigma^2 d^2/2), 0) / beta``.
        """
        K = beta * u + logMV
        _, val = golden_max(lambda d: K * d - self.h(d, beta, sigma), self._lo, self._hi, _TOL)
        return max(val, 0.0) / beta

    # -- tabulation -----------------------------------------------------------

    def tabulate(self, deltas, beta: float, sigma: float = 1.0) -> dict:
        """Columns ``delta, g, ghat, ghat_f, h`` on the given grid."""
        deltas = np.asarray(deltas, dtype=float)
        return {
            "delta": deltas,
            "g": np.array([self.g(d) for d in deltas]),
            "ghat": np.array([self.ghat(d) for d in deltas]),
            "ghat_f": np.array([self.ghat_f(d) for d in deltas]),
            "h": np.array([self.h(d, beta, sigma) for d in deltas]),
        }


def _profile(obj) -> RateProfile:
    return obj if isinstance(obj, RateProfile) else RateProfile(obj)


def rate_I_f(profile, t):
    return _profile(profile).rate_I_f(t)


def rate_I(profile, t):
    return _profile(profile).rate_I(t)


def rate_J(profile, t):
    return _profile(profile).rate_J(t)


def g(profile, d):
    return _profile(profile).g(d)


def ghat(profile, d):
    return _profile(profile).ghat(d)


def ghat_f(profile, d):
    return _profile(profile).ghat_f(d)


def h(profile, d, beta, sigma=1.0):
    return _profile(profile).h(d, beta, sigma)


def x_star(profile):
    return _profile(profile).x_star


def delta0(profile, beta, logMV, sigma=1.0):
    return _profile(profile).delta0(beta, logMV, sigma)


def variational_annealed(profile, beta, u, logMV):
    return _profile(profile).variational_annealed(beta, u, logMV)


def quenched_upper_bound(profile, beta, u, logMV, sigma=1.0):
    return _profile(profile).quenched_upper_bound(beta, u, logMV, sigma)
