"""Excursion-length laws on ``{1, 2, ...} ∪ {∞}`` and their transforms.

A law is the only input the pinning model needs from the underlying chain:
the distribution of the time between consecutive visits to the pinning
site, with a possible atom at infinity (``mass_inf``) for transient chains.

Every law exposes the same analytic surface:

* ``pmf`` / ``log_pmf`` / ``survival`` / ``log_survival_table``
* the conditional moment generating function of the finite part,
  ``M^f(x) = E[exp(x E) | E < inf]``, through ``log_mgf_finite`` and its
  first two log-derivatives ``tilted_mean`` / ``tilted_var``
* tail analytics: ``b_E`` (exponential decay rate), ``r``, ``m_E``, ``a``,
  ``A`` and ``b_e_prime``

Laws with a finite decay rate additionally expose the same quantities as
functions of ``eps = b_E - x`` (``*_gap`` methods); root finders near the
boundary ``x = b_E`` work in that coordinate to keep relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Any, Mapping

import numpy as np
from scipy.special import logsumexp, zeta

from ._polylog import polylog_exp
from .errors import DivergentSum, NotRecurrent, NumericalFailure

__all__ = [
    "ExcursionLaw",
    "BiasedRW",
    "GeometricPrefactor",
    "PowerLaw",
    "FiniteSupport",
    "Dilated",
    "law_from_dict",
    "log_srw_first_return",
    "log_srw_no_return",
]

# decay rates this close to zero are snapped to exactly zero
_SNAP = 1e-13
# exponential tails are summed until exp(-b_E * n) drops below exp(-_TAIL_NATS)
_TAIL_NATS = 40.0
_MAX_TAIL_TERMS = 5_000_000


# ---------------------------------------------------------------------------
# simple random walk return probabilities
# ---------------------------------------------------------------------------

_EXACT_K = 512


@lru_cache(maxsize=1)
def _log_u_small():
    # log(C(2k,k) / 4**k), exact rational arithmetic then one rounding
    return np.array([math.log(math.comb(2 * k, k) / 4**k) for k in range(_EXACT_K + 1)])


def log_srw_no_return(k):
    """``log P(S_{2k} = 0)`` for simple random walk, i.e. ``log(C(2k,k)/4^k)``.

    This is also the probability that the first return happens after
    time ``2k``.
    """
    k = np.asarray(k, dtype=np.int64)
    out = np.empty(k.shape, dtype=float)
    small = k <= _EXACT_K
    out[small] = _log_u_small()[k[small]]
    kb = k[~small].astype(float)
    if kb.size:
        # log Gamma(k+1) - log Gamma(k+1/2), asymptotic series
        ratio = (
            0.5 * np.log(kb)
            + 1 / (8 * kb)
            - 1 / (192 * kb**3)
            + 1 / (640 * kb**5)
            - 17 / (14336 * kb**7)
            + 31 / (18432 * kb**9)
        )
        out[~small] = -0.5 * math.log(math.pi) - ratio
    return out if out.ndim else float(out)


def log_srw_first_return(k):
    """``log P(first return of simple random walk at time 2k)``, ``k >= 1``."""
    k = np.asarray(k, dtype=np.int64)
    if np.any(k < 1):
        raise ValueError("first return needs k >= 1")
    out = log_srw_no_return(k) - np.log(2.0 * k - 1.0)
    return out if np.ndim(out) else float(out)


def _as_index(n):
    arr = np.asarray(n)
    if arr.dtype.kind == "f":
        if np.any(arr != np.round(arr)):
            raise ValueError("excursion lengths must be integers")
        arr = arr.astype(np.int64)
    return arr.astype(np.int64)


def _snap(rate, scale=1.0):
    return 0.0 if abs(rate) <= _SNAP * max(1.0, abs(scale)) else rate


# ---------------------------------------------------------------------------
# base class
# ---------------------------------------------------------------------------


class ExcursionLaw:
    """Common analytics for excursion-length laws.

    Subclasses provide ``mass_inf``, ``b_E``, ``a``, ``A``, ``lattice``,
    ``_log_pmf_array``, ``_log_tail_table`` and the finite-part moment
    functions.
    """

    family: str = ""
    lattice: int = 1

    # -- family hooks -------------------------------------------------------

    def _log_pmf_array(self, n: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _log_tail_table(self, N: int) -> np.ndarray:
        raise NotImplementedError

    def log_mgf_gap(self, eps: float) -> float:
        """``log M^f(b_E - eps)``; ``inf`` when the series diverges."""
        raise NotImplementedError

    def mean_gap(self, eps: float) -> float:
        """``(log M^f)'(b_E - eps)``: mean of the law tilted to ``b_E - eps``."""
        raise NotImplementedError

    def var_gap(self, eps: float) -> float:
        raise NotImplementedError

    # -- derived scalars ----------------------------------------------------

    @property
    def finite_mass(self) -> float:
        return 1.0 - self.mass_inf

    @property
    def r(self) -> float:
        """``-log P(E < inf)``."""
        return -math.log1p(-self.mass_inf)

    @property
    def recurrent(self) -> bool:
        return self.mass_inf == 0.0

    @cached_property
    def m_E(self) -> float:
        """Mean excursion length given that it is finite."""
        return self.tilted_mean(0.0)

    @property
    def log_mgf_boundary(self) -> float:
        """``log M^f(b_E) = log sum_n gamma_n``; ``inf`` when divergent."""
        if math.isinf(self.b_E):
            return math.inf
        return self.log_mgf_gap(0.0)

    @property
    def b_e_prime(self) -> float:
        """``lim_{x -> b_E} (log M^f)'(x)``."""
        return self.mean_gap(0.0)

    # -- moment generating functions ---------------------------------------

    def log_mgf_finite(self, x: float) -> float:
        """``log E[exp(x E) | E < inf]``.

        Raises
        ------
        DivergentSum
            If ``x > b_E`` or the series diverges at ``x = b_E``.
        """
        x = float(x)
        if x > self.b_E:
            raise DivergentSum(f"x={x} exceeds the decay rate b_E={self.b_E}")
        val = self.log_mgf_gap(self.b_E - x)
        if math.isinf(val):
            raise DivergentSum(f"sum of prefactors diverges at x=b_E={self.b_E}")
        return val

    def mgf_finite(self, x: float) -> float:
        return math.exp(self.log_mgf_finite(x))

    def tilted_mean(self, x: float) -> float:
        """``(log M^f)'(x)``, possibly ``inf`` at ``x = b_E``."""
        x = float(x)
        if x > self.b_E:
            raise DivergentSum(f"x={x} exceeds b_E={self.b_E}")
        return self.mean_gap(self.b_E - x)

    def tilted_var(self, x: float) -> float:
        x = float(x)
        if x > self.b_E:
            raise DivergentSum(f"x={x} exceeds b_E={self.b_E}")
        return self.var_gap(self.b_E - x)

    def mgf(self, x: float) -> float:
        """Unconditional ``E[exp(x E)]`` with ``M_E(0) = P(E < inf)``."""
        x = float(x)
        if x == 0.0:
            return self.finite_mass
        if x > 0.0 and self.mass_inf > 0.0:
            return math.inf
        try:
            return self.finite_mass * self.mgf_finite(x)
        except DivergentSum:
            return math.inf

    # -- probabilities ------------------------------------------------------

    def log_pmf(self, n):
        """``log P(E = n)``; ``-inf`` off the support."""
        idx = _as_index(n)
        if np.any(idx < 1):
            raise ValueError("excursion lengths start at 1")
        out = self._log_pmf_array(np.atleast_1d(idx))
        return out.reshape(idx.shape) if idx.ndim else float(out[0])

    def pmf(self, n):
        lp = self.log_pmf(n)
        return np.exp(lp) if np.ndim(lp) else math.exp(lp)

    def log_survival_table(self, N: int) -> np.ndarray:
        """``log P(E > n)`` for ``n = 0..N`` (the atom at infinity included)."""
        return _cached_survival(self, int(N))

    def log_survival(self, n):
        idx = _as_index(n)
        if np.any(idx < 0):
            raise ValueError("survival needs n >= 0")
        table = self.log_survival_table(int(np.max(idx)) if idx.size else 0)
        out = table[idx]
        return out if idx.ndim else float(out)

    def survival(self, n):
        ls = self.log_survival(n)
        return np.exp(ls) if np.ndim(ls) else math.exp(ls)

    def _exp_tail_table(self, N: int) -> np.ndarray:
        # certified truncation: beyond n_hi the tail is below exp(-40) of the
        # last retained term, prefactors being nonincreasing
        extra = int(math.ceil(_TAIL_NATS / self.b_E)) + 2 * self.lattice
        if extra > _MAX_TAIL_TERMS:
            raise NumericalFailure(f"decay rate {self.b_E} too small for a certified tail")
        n = np.arange(1, N + extra + 1)
        lp = self._log_pmf_array(n)
        rev = np.logaddexp.accumulate(lp[::-1])[::-1]
        return rev[: N + 1]

    # -- transforms ---------------------------------------------------------

    def conditioned(self) -> "ExcursionLaw":
        """The law of ``E`` given ``E < inf`` (the recurrent restriction)."""
        return self.tilt(0.0)

    def tilt(self, alpha: float) -> "ExcursionLaw":
        """Exponentially tilted recurrent law ``pmf(n) e^{alpha n} / (P(E<inf) M^f(alpha))``."""
        raise NotImplementedError

    def partially_loosen(self, b: float) -> "ExcursionLaw":
        """Tilt the finite part by ``0 < b < b_E``, keeping ``mass_inf``."""
        raise NotImplementedError

    def loosen(self) -> "ExcursionLaw":
        """Law of the prefactors ``gamma_n / sum gamma`` of a recurrent law."""
        if not self.recurrent:
            raise NotRecurrent("loosening is defined for recurrent laws only")
        if math.isinf(self.log_mgf_boundary):
            raise DivergentSum("sum of prefactors diverges: no loosened law")
        return self.tilt(self.b_E)

    def _check_partial(self, b):
        if not 0.0 < b < self.b_E:
            raise ValueError(f"partial loosening needs 0 < b < b_E={self.b_E}, got {b}")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@lru_cache(maxsize=64)
def _cached_survival(law: ExcursionLaw, N: int) -> np.ndarray:
    tail = law._log_tail_table(N)
    log_inf = math.log(law.mass_inf) if law.mass_inf > 0 else -math.inf
    out = np.logaddexp(tail, log_inf)
    out[0] = 0.0
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# biased simple random walk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiasedRW(ExcursionLaw):
    """Excursions of a nearest-neighbour walk on Z with up-probability ``p``.

    ``pmf(2k) = (4p(1-p))^k s(2k)`` where ``s`` is the simple random walk
    first-return law; ``mass_inf = |2p - 1|``. The optional ``tilt`` and
    ``mass_inf`` fields describe the output of :meth:`tilt` and
    :meth:`partially_loosen`: the finite part becomes proportional to
    ``s(2k) exp(-2 k b_E)`` with ``b_E = b0(p) - tilt`` and total mass
    ``1 - mass_inf``. With a nonzero tilt ``mass_inf`` defaults to 0.
    """

    p: float
    applied_tilt: float = 0.0
    mass_inf: float | None = None

    family = "biased_rw"
    lattice = 2
    a = 2
    A = math.inf

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if self.mass_inf is None:
            default = abs(2.0 * self.p - 1.0) if self.applied_tilt == 0.0 else 0.0
            object.__setattr__(self, "mass_inf", default)
        if not 0.0 <= self.mass_inf < 1.0:
            raise ValueError(f"mass_inf must lie in [0, 1), got {self.mass_inf}")
        rate = _snap(self.base_rate - self.applied_tilt, self.base_rate)
        if rate < 0.0:
            raise DivergentSum(f"tilt {self.applied_tilt} exceeds the decay rate {self.base_rate}")
        object.__setattr__(self, "_rate", rate)

    @property
    def base_rate(self) -> float:
        """``-1/2 log(4p(1-p))`` of the untilted walk."""
        return -0.5 * math.log1p(-((2.0 * self.p - 1.0) ** 2))

    @property
    def b_E(self) -> float:
        return self._rate

    @staticmethod
    def _log_series(eps):
        # log sum_k s(2k) e^{-2 k eps} = log(1 - sqrt(1 - e^{-2 eps}))
        if math.isinf(eps):
            return -math.inf
        q = -math.expm1(-2.0 * eps)
        return -2.0 * eps - math.log1p(math.sqrt(q))

    def log_mgf_gap(self, eps):
        return self._log_series(eps) - self._log_series(self._rate)

    def mean_gap(self, eps):
        if eps == 0.0:
            return math.inf
        if math.isinf(eps):
            return 2.0
        return 1.0 + 1.0 / math.sqrt(-math.expm1(-2.0 * eps))

    def var_gap(self, eps):
        if eps == 0.0:
            return math.inf
        q = -math.expm1(-2.0 * eps)
        return math.exp(-2.0 * eps) * q**-1.5

    @cached_property
    def _log_prefactor(self):
        return math.log1p(-self.mass_inf) - self._log_series(self._rate)

    def _log_pmf_array(self, n):
        out = np.full(n.shape, -np.inf)
        even = (n % 2 == 0) & (n >= 2)
        k = n[even] // 2
        out[even] = self._log_prefactor + log_srw_first_return(k) - 2.0 * k * self._rate
        return out

    def _log_tail_table(self, N):
        if self._rate > 0.0:
            return self._exp_tail_table(N)
        k = np.arange(N + 1) // 2
        return math.log1p(-self.mass_inf) + log_srw_no_return(k)

    def tilt(self, alpha):
        alpha = float(alpha)
        if alpha > self._rate * (1 + _SNAP) + _SNAP:
            raise DivergentSum(f"tilt {alpha} exceeds b_E={self._rate}")
        return _biased(self.p, self.applied_tilt + alpha, 0.0)

    def partially_loosen(self, b):
        self._check_partial(b)
        return _biased(self.p, self.applied_tilt + b, self.mass_inf)

    def to_dict(self):
        out: dict[str, Any] = {"family": self.family, "p": self.p}
        if self.applied_tilt != 0.0:
            out["tilt"] = self.applied_tilt
        if self.applied_tilt != 0.0 or self.mass_inf != abs(2.0 * self.p - 1.0):
            out["mass_inf"] = self.mass_inf
        return out


def _biased(p, tilt, mass_inf):
    law = BiasedRW(p, tilt, mass_inf)
    if law.b_E == 0.0:
        # every fully tilted walk is the simple random walk
        return BiasedRW(0.5, 0.0, mass_inf)
    return law


# ---------------------------------------------------------------------------
# polynomial prefactors: kappa n^{-c} e^{-b n}
# ---------------------------------------------------------------------------


class _PolylogLaw(ExcursionLaw):
    lattice = 1
    a = 1
    A = math.inf

    def _setup(self):
        s_b = polylog_exp(self.c, self.b)
        if math.isinf(s_b):
            raise ValueError(f"prefactor exponent c={self.c} is not summable at b={self.b}")
        object.__setattr__(self, "_log_sb", math.log(s_b))
        total = self.kappa * s_b
        if self.mass_inf is None:
            m = 1.0 - total
            if -1e-12 < m < 0.0:
                m = 0.0
            object.__setattr__(self, "mass_inf", m)
        elif abs(total + self.mass_inf - 1.0) > 1e-12:
            raise ValueError(f"kappa * sum n^-c e^-bn + mass_inf = {total + self.mass_inf} != 1")
        if not 0.0 <= self.mass_inf < 1.0:
            raise ValueError(f"mass_inf={self.mass_inf} out of [0, 1); kappa too large?")

    @property
    def b_E(self):
        return self.b

    def log_mgf_gap(self, eps):
        val = polylog_exp(self.c, eps)
        return math.log(val) - self._log_sb if math.isfinite(val) else math.inf

    def mean_gap(self, eps):
        top = polylog_exp(self.c - 1.0, eps)
        if math.isinf(top):
            return math.inf
        return top / polylog_exp(self.c, eps)

    def var_gap(self, eps):
        s0 = polylog_exp(self.c, eps)
        s2 = polylog_exp(self.c - 2.0, eps)
        if math.isinf(s2):
            return math.inf
        mean = polylog_exp(self.c - 1.0, eps) / s0
        return s2 / s0 - mean * mean

    def _log_pmf_array(self, n):
        nf = n.astype(float)
        return math.log(self.kappa) - self.c * np.log(nf) - self.b * nf

    def _log_tail_table(self, N):
        if self.b > 0.0:
            return self._exp_tail_table(N)
        q = np.arange(1, N + 2, dtype=float)
        return math.log(self.kappa) + np.log(zeta(self.c, q))

    def tilt(self, alpha):
        alpha = float(alpha)
        new_b = _snap(self.b - alpha, self.b)
        if new_b < 0.0:
            raise DivergentSum(f"tilt {alpha} exceeds b_E={self.b}")
        if new_b == 0.0:
            if self.c <= 1.0:
                raise DivergentSum("prefactors n^-c are not summable for c <= 1")
            return PowerLaw.normalized(self.c)
        return GeometricPrefactor.normalized(new_b, self.c)

    def partially_loosen(self, b):
        self._check_partial(b)
        return GeometricPrefactor.normalized(self.b - b, self.c, self.mass_inf)


@dataclass(frozen=True)
class GeometricPrefactor(_PolylogLaw):
    """``pmf(n) = kappa n^{-c} e^{-b n}`` with ``b > 0`` and ``c >= 0``."""

    b: float
    c: float
    kappa: float
    mass_inf: float | None = None

    family = "geometric_prefactor"

    def __post_init__(self):
        if not self.b > 0.0:
            raise ValueError("GeometricPrefactor needs b > 0 (use PowerLaw for b = 0)")
        if self.c < 0.0:
            raise ValueError("prefactor exponent c must be >= 0")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        self._setup()

    @classmethod
    def normalized(cls, b, c, mass_inf=0.0):
        """Choose ``kappa`` so the finite part has mass ``1 - mass_inf``."""
        kappa = (1.0 - mass_inf) / polylog_exp(c, b)
        return cls(b, c, kappa, mass_inf)

    def to_dict(self):
        return {"family": self.family, "b": self.b, "c": self.c, "kappa": self.kappa,
                "mass_inf": self.mass_inf}


@dataclass(frozen=True)
class PowerLaw(_PolylogLaw):
    """``pmf(n) = kappa n^{-c}`` with ``c > 1``; no exponential decay."""

    c: float
    kappa: float
    mass_inf: float | None = None
    b: float = field(default=0.0, init=False)

    family = "power_law"

    def __post_init__(self):
        if not self.c > 1.0:
            raise ValueError("PowerLaw needs c > 1")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        self._setup()

    @classmethod
    def normalized(cls, c, mass_inf=0.0):
        return cls(c, (1.0 - mass_inf) / float(zeta(c)), mass_inf)

    def to_dict(self):
        return {"family": self.family, "c": self.c, "kappa": self.kappa,
                "mass_inf": self.mass_inf}


# ---------------------------------------------------------------------------
# finite support
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteSupport(ExcursionLaw):
    """Finitely many excursion lengths, plus an optional atom at infinity.

    ``weights`` maps lengths to probabilities; with ``mass_inf=None`` the
    atom is whatever mass the weights leave over.
    """

    weights: Any
    mass_inf: float | None = None

    family = "finite_support"
    b_E = math.inf

    def __post_init__(self):
        items = dict(self.weights).items() if isinstance(self.weights, Mapping) else self.weights
        pairs = tuple(sorted((int(n), float(w)) for n, w in items if float(w) != 0.0))
        if not pairs:
            raise ValueError("finite support law needs at least one positive weight")
        if any(n < 1 for n, _ in pairs) or any(w < 0 for _, w in pairs):
            raise ValueError("lengths must be >= 1 and weights nonnegative")
        object.__setattr__(self, "weights", pairs)
        total = math.fsum(w for _, w in pairs)
        if self.mass_inf is None:
            m = 1.0 - total
            object.__setattr__(self, "mass_inf", 0.0 if abs(m) < 1e-15 else m)
        elif abs(total + self.mass_inf - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, mass_inf={self.mass_inf}: total != 1")
        if not 0.0 <= self.mass_inf < 1.0:
            raise ValueError(f"mass_inf={self.mass_inf} out of [0, 1)")
        ns = np.array([n for n, _ in pairs])
        object.__setattr__(self, "_ns", ns)
        object.__setattr__(self, "_lw", np.log([w for _, w in pairs]))
        object.__setattr__(self, "_log_total", math.log(total))

    @property
    def lattice(self):
        return int(np.gcd.reduce(self._ns))

    @property
    def a(self):
        return int(self._ns[0])

    @property
    def A(self):
        return int(self._ns[-1])

    def _tilted_weights(self, x):
        z = self._lw + float(x) * self._ns
        zmax = z.max()
        w = np.exp(z - zmax)
        s = w.sum()
        return w / s, zmax + math.log(s)

    def log_mgf_finite(self, x):
        return self._tilted_weights(x)[1] - self._log_total

    def tilted_mean(self, x):
        w, _ = self._tilted_weights(x)
        return float(np.dot(w, self._ns))

    def tilted_var(self, x):
        w, _ = self._tilted_weights(x)
        mean = float(np.dot(w, self._ns))
        return float(np.dot(w, (self._ns - mean) ** 2))

    @property
    def log_mgf_boundary(self):
        return math.inf

    @property
    def b_e_prime(self):
        return float(self.A)

    def _log_pmf_array(self, n):
        out = np.full(n.shape, -np.inf)
        pos = np.searchsorted(self._ns, n)
        pos = np.minimum(pos, len(self._ns) - 1)
        hit = self._ns[pos] == n
        out[hit] = self._lw[pos[hit]]
        return out

    def _log_tail_table(self, N):
        n = np.arange(1, max(N, self.A) + 2)
        lp = self._log_pmf_array(n)
        rev = np.logaddexp.accumulate(lp[::-1])[::-1]
        return rev[: N + 1]

    def _reweighted(self, alpha, mass):
        lw = self._lw + alpha * self._ns
        lw = lw - logsumexp(lw) + math.log1p(-mass)
        return FiniteSupport(dict(zip(self._ns.tolist(), np.exp(lw).tolist())), mass)

    def tilt(self, alpha):
        return self._reweighted(float(alpha), 0.0)

    def partially_loosen(self, b):
        if not 0.0 < b < math.inf:
            raise ValueError("partial loosening needs 0 < b < inf")
        return self._reweighted(float(b), self.mass_inf)

    def loosen(self):
        if not self.recurrent:
            raise NotRecurrent("loosening is defined for recurrent laws only")
        raise DivergentSum("finite support has b_E = inf: no prefactor law")

    def to_dict(self):
        return {"family": self.family,
                "weights": {str(n): w for n, w in self.weights},
                "mass_inf": self.mass_inf}


# ---------------------------------------------------------------------------
# lattice dilation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dilated(ExcursionLaw):
    """The law of ``k E``: lengths stretched by an integer factor.

    ``pmf(k n) = base.pmf(n)``, ``b_E = base.b_E / k``, ``M^f(x) = base M^f(k x)``.
    """

    base: ExcursionLaw
    k: int

    family = "dilated"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"dilation factor must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def mass_inf(self):
        return self.base.mass_inf

    @property
    def b_E(self):
        return self.base.b_E / self.k

    @property
    def a(self):
        return self.k * self.base.a

    @property
    def A(self):
        return self.k * self.base.A

    @property
    def lattice(self):
        return self.k * self.base.lattice

    def log_mgf_gap(self, eps):
        return self.base.log_mgf_gap(self.k * eps)

    def mean_gap(self, eps):
        return self.k * self.base.mean_gap(self.k * eps)

    def var_gap(self, eps):
        return self.k**2 * self.base.var_gap(self.k * eps)

    def log_mgf_finite(self, x):
        return self.base.log_mgf_finite(self.k * float(x))

    def tilted_mean(self, x):
        return self.k * self.base.tilted_mean(self.k * float(x))

    def tilted_var(self, x):
        return self.k**2 * self.base.tilted_var(self.k * float(x))

    @property
    def log_mgf_boundary(self):
        return self.base.log_mgf_boundary

    @property
    def b_e_prime(self):
        return self.k * self.base.b_e_prime

    def _log_pmf_array(self, n):
        out = np.full(n.shape, -np.inf)
        hit = n % self.k == 0
        if np.any(hit):
            out[hit] = self.base._log_pmf_array(n[hit] // self.k)
        return out

    def _log_tail_table(self, N):
        base = self.base._log_tail_table(N // self.k + 1)
        return base[np.arange(N + 1) // self.k]

    def tilt(self, alpha):
        return Dilated(self.base.tilt(self.k * float(alpha)), self.k)

    def partially_loosen(self, b):
        return Dilated(self.base.partially_loosen(self.k * float(b)), self.k)

    def loosen(self):
        return Dilated(self.base.loosen(), self.k)

    def to_dict(self):
        return {"family": self.family, "k": self.k, "base": self.base.to_dict()}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def law_from_dict(block: Mapping[str, Any]) -> ExcursionLaw:
    """Build a law from its JSON block, e.g. ``{"family": "biased_rw", "p": 0.7}``.

    ``geometric_prefactor`` and ``power_law`` accept ``"normalize": true`` in
    place of ``kappa`` to get total mass ``1 - mass_inf``.
    """
    block = dict(block)
    family = block.pop("family", None)
    try:
        if family == "biased_rw":
            return BiasedRW(float(block["p"]), float(block.get("tilt", 0.0)), block.get("mass_inf"))
        if family == "geometric_prefactor":
            if block.get("normalize") or "kappa" not in block:
                return GeometricPrefactor.normalized(
                    float(block["b"]), float(block["c"]), float(block.get("mass_inf", 0.0)))
            return GeometricPrefactor(float(block["b"]), float(block["c"]), float(block["kappa"]),
                                      block.get("mass_inf"))
        if family == "power_law":
            if block.get("normalize") or "kappa" not in block:
                return PowerLaw.normalized(float(block["c"]), float(block.get("mass_inf", 0.0)))
            return PowerLaw(float(block["c"]), float(block["kappa"]), block.get("mass_inf"))
        if family == "dilated":
            return Dilated(law_from_dict(block["base"]), int(block["k"]))
        if family == "finite_support":
            return FiniteSupport({int(k): float(v) for k, v in block["weights"].items()},
                                 block.get("mass_inf"))
    except KeyError as exc:
        raise ValueError(f"law block for {family!r} is missing {exc}") from None
    raise ValueError(f"unknown law family {family!r}")
