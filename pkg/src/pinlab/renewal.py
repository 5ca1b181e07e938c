"""Exact finite-volume partition functions of the pinning model.

For a fixed disorder realization ``V_1..V_N`` a trajectory collects the
weight ``exp(beta (u + V_t))`` at every contact time ``t``. Splitting over
the last contact before ``N`` gives the renewal recursion

    Z^c_k = sum_n pmf(n) exp(beta (u + V_k)) Z^c_{k-n},    Z^c_0 = 1,
    Z_N   = sum_k Z^c_k P(E > N - k),

which is evaluated here in log space. All heavy loops are compiled with
numba.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import logsumexp, ndtri

from .errors import CapExceeded, ConfigError
from .excursion import ExcursionLaw

__all__ = [
    "DisorderField",
    "PinningModel",
    "PartitionResult",
    "sample_disorder",
    "replica_seed",
    "truncation_window",
    "constrained_logZ",
    "free_logZ",
    "contact_mean",
    "partition",
    "brute_force",
    "contact_count_dp",
]

log = logging.getLogger(__name__)

# neglected tail mass of the convolution window, relative to P(E < inf);
# under disorder long excursions skip unfavourable stretches and gain weight
# far beyond their bare probability, so the margin is generous
WINDOW_TAIL = 1e-30
BRUTE_FORCE_CAP = 20
DP_CAP = 8192


# ---------------------------------------------------------------------------
# disorder
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DisorderField:
    """One realization of i.i.d. centred Gaussian site variables.

    ``values[i]`` is ``V_{i+1}``. A field of length ``N`` is a prefix of
    every longer field drawn with the same seed and ``sigma``.
    """

    seed: int
    sigma: float
    values: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.values)


def sample_disorder(seed: int, N: int, sigma: float) -> DisorderField:
    """Gaussian field from a counter-based stream keyed by ``seed``.

    Site ``i`` uses the ``i``-th 64-bit output of Philox, mapped through the
    normal quantile function, so fields are reproducible bit for bit and
    random access by index is possible.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    seed = int(seed) % 2**64
    if sigma == 0.0:
        vals = np.zeros(N)
    else:
        raw = np.random.Philox(key=seed).random_raw(N)
        # 53 random bits, centred in their cell so U never hits 0 or 1
        unif = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        vals = sigma * ndtri(unif)
    vals.flags.writeable = False
    return DisorderField(seed, float(sigma), vals)


def replica_seed(master_seed: int, index: int) -> int:
    """Seed of replica ``index`` derived from the master seed."""
    ss = np.random.SeedSequence([int(master_seed) % 2**64, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# model and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PinningModel:
    """Excursion law, inverse temperature, pinning strength and disorder size.

    ``sigma = 0`` is the deterministic system.
    """

    law: ExcursionLaw
    beta: float
    u: float
    sigma: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def logMV(self) -> float:
        """``log E exp(beta V)`` for centred Gaussian ``V``."""
        return 0.5 * (self.beta * self.sigma) ** 2

    def with_u(self, u: float) -> "PinningModel":
        return PinningModel(self.law, self.beta, float(u), self.sigma)


@dataclass(frozen=True)
class PartitionResult:
    """Partition values of one realization.

    Attributes
    ----------
    logZc : ndarray
        ``log Z^c_k`` for ``k = 0..N`` (``-inf`` off the lattice).
    logZ_free : float
    mean_contacts : float
        Exact Gibbs mean of the number of contacts in ``(0, N]``.
    """

    N: int
    logZc: np.ndarray = field(repr=False)
    logZ_free: float
    mean_contacts: float
    seed: int | None = None

    @property
    def logZ_constrained(self) -> float:
        return float(self.logZc[self.N])

    @property
    def contact_fraction(self) -> float:
        return self.mean_contacts / self.N

    def free_energy(self, beta: float) -> float:
        return self.logZ_free / (beta * self.N)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _renewal_kernel(js, lps, bv, N):
    # lz[k] = log Z^c_k; ab[k] = mean contacts under the constrained measure
    lz = np.full(N + 1, -np.inf)
    ab = np.zeros(N + 1)
    lz[0] = 0.0
    m = js.size
    for k in range(1, N + 1):
        mx = -np.inf
        for i in range(m):
            j = js[i]
            if j > k:
                break
            v = lps[i] + lz[k - j]
            if v > mx:
                mx = v
        if mx == -np.inf:
            continue
        s = 0.0
        sa = 0.0
        for i in range(m):
            j = js[i]
            if j > k:
                break
            w = np.exp(lps[i] + lz[k - j] - mx)
            s += w
            sa += w * (1.0 + ab[k - j])
        lz[k] = mx + np.log(s) + bv[k]
        ab[k] = sa / s
    return lz, ab


@njit(cache=True, nogil=True)
def _count_kernel(lp, M, a):
    # lp[j] = log pmf of a j-step excursion (lattice units), lp[0] unused;
    # returns out[k] = log P(tau_k = M)
    out = np.full(M + 1, -np.inf)
    prev = np.full(M + 1, -np.inf)
    cur = np.full(M + 1, -np.inf)
    prev[0] = 0.0
    out[0] = prev[M]
    for k in range(1, M + 1):
        lo = k * a
        if lo > M:
            break
        for n in range(M + 1):
            cur[n] = -np.inf
        for n in range(lo, M + 1):
            jmax = n - (k - 1) * a
            mx = -np.inf
            for j in range(a, jmax + 1):
                v = lp[j] + prev[n - j]
                if v > mx:
                    mx = v
            if mx == -np.inf:
                continue
            s = 0.0
            for j in range(a, jmax + 1):
                s += np.exp(lp[j] + prev[n - j] - mx)
            cur[n] = mx + np.log(s)
        out[k] = cur[M]
        for n in range(M + 1):
            prev[n] = cur[n]
    return out


# ---------------------------------------------------------------------------
# recursions
# ---------------------------------------------------------------------------


def truncation_window(law: ExcursionLaw, tail: float = WINDOW_TAIL) -> int | None:
    """Smallest ``W`` with ``P(W < E < inf) <= tail * P(E < inf)``.

    Returns ``None`` when the recursion must not be truncated: heavy tails,
    and recurrent laws, whose subcritical partition functions are carried
    by single long excursions that a window would drop.
    """
    if law.recurrent or not 0.0 < law.b_E < math.inf:
        return None
    target = math.log(tail) + math.log(law.finite_mass)
    W = max(64, int(law.a))
    while W <= 50_000_000:
        # log P(n < E < inf), n = 0..W
        fin_tail = law._log_tail_table(W)
        ok = np.nonzero(fin_tail <= target)[0]
        if ok.size:
            return int(max(ok[0], law.a))
        W *= 4
    return None


def _support(law: ExcursionLaw, limit: int):
    n = np.arange(1, limit + 1)
    lp = law.log_pmf(n)
    keep = np.isfinite(lp)
    return n[keep].astype(np.int64), lp[keep].astype(np.float64)


def _beta_field(model: PinningModel, field_: DisorderField | None, N: int) -> np.ndarray:
    bv = np.empty(N + 1)
    bv[0] = 0.0
    if field_ is None:
        bv[1:] = model.beta * model.u
    else:
        if len(field_) < N:
            raise ValueError(f"disorder field has {len(field_)} sites, need {N}")
        bv[1:] = model.beta * (model.u + np.asarray(field_.values[:N], dtype=float))
    return bv


def _resolve_window(law, N, window):
    if window == "auto":
        window = truncation_window(law)
    if window is None:
        return N
    return int(min(max(window, 1), N))


def _run(model, field_, N, window="auto"):
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    W = _resolve_window(model.law, N, window)
    js, lps = _support(model.law, W)
    bv = _beta_field(model, field_, N)
    return _renewal_kernel(js, lps, bv, N)


def constrained_logZ(model: PinningModel, field: DisorderField | None, N: int,
                     window="auto") -> np.ndarray:
    """``log Z^c_k`` for ``k = 0..N``.

    Parameters
    ----------
    window : "auto", int or None
        Convolution window. ``"auto"`` truncates transient exponential-tail
        laws at neglected tail mass ``WINDOW_TAIL``; ``None`` runs the full
        recursion.
    """
    return _run(model, field, N, window)[0]


def free_logZ(model: PinningModel, field: DisorderField | None, N: int,
              constrained: np.ndarray) -> float:
    """``log sum_k Z^c_k P(E > N - k)``, the atom at infinity included."""
    ls = model.law.log_survival_table(N)
    return float(logsumexp(constrained[: N + 1] + ls[::-1]))


def _free_and_mean(law, lz, ab, N):
    ls = law.log_survival_table(N)
    terms = lz[: N + 1] + ls[::-1]
    lzf = float(logsumexp(terms))
    w = np.exp(terms - lzf)
    return lzf, float(np.dot(w, ab[: N + 1]))


def contact_mean(model: PinningModel, field: DisorderField | None, N: int,
                 window="auto") -> float:
    """Exact ``<L_N>`` under the free finite-volume Gibbs measure."""
    lz, ab = _run(model, field, N, window)
    return _free_and_mean(model.law, lz, ab, N)[1]


def partition(model: PinningModel, field: DisorderField | None, N: int,
              window="auto") -> PartitionResult:
    """Constrained and free partition values plus the mean contact number."""
    lz, ab = _run(model, field, N, window)
    lzf, mean = _free_and_mean(model.law, lz, ab, N)
    lz.flags.writeable = False
    seed = None if field is None else field.seed
    return PartitionResult(int(N), lz, lzf, mean, seed)


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------


def brute_force(model: PinningModel, field: DisorderField | None, N: int):
    """Sum over every contact set in ``{1..N}``.

    Returns
    -------
    (logZ_free, logZ_constrained, mean_contacts)

    Raises
    ------
    CapExceeded
        For ``N > 20``.
    """
    N = int(N)
    if N > BRUTE_FORCE_CAP:
        raise CapExceeded(f"brute force is limited to N <= {BRUTE_FORCE_CAP}")
    law = model.law
    lp = np.concatenate([[-np.inf], law.log_pmf(np.arange(1, N + 1))])
    ls = law.log_survival_table(N)
    bv = _beta_field(model, field, N)
    masks = np.arange(2**N, dtype=np.int64)
    last = np.zeros(masks.size, dtype=np.int64)
    logw = np.zeros(masks.size)
    count = np.zeros(masks.size)
    for t in range(1, N + 1):
        on = ((masks >> (t - 1)) & 1).astype(bool)
        logw[on] += lp[t - last[on]] + bv[t]
        last[on] = t
        count[on] += 1
    free = logw + ls[N - last]
    lzf = float(logsumexp(free))
    lzc = float(logsumexp(logw[last == N]))
    mean = float(np.dot(np.exp(free - lzf), count))
    return lzf, lzc, mean


# ---------------------------------------------------------------------------
# contact-count distribution
# ---------------------------------------------------------------------------


def contact_count_dp(law: ExcursionLaw, N: int, cap: int = DP_CAP) -> np.ndarray:
    """``log P(tau_k = N)`` for ``k = 0..N``, with ``tau_k`` the ``k``-th return.

    Exact convolution over ``k``. Only lattice-admissible lengths are
    stored, so a period-``d`` law costs ``(N/d)^3`` rather than ``N^3``.

    Raises
    ------
    CapExceeded
        For ``N > cap``.
    """
    N = int(N)
    if N > cap:
        raise CapExceeded(f"contact-count DP is limited to N <= {cap}")
    out = np.full(N + 1, -np.inf)
    d = law.lattice
    if N % d:
        return out
    M = N // d
    lp = np.full(M + 1, -np.inf)
    if M:
        lp[1:] = law.log_pmf(np.arange(1, M + 1) * d)
    a = max(1, law.a // d)
    res = _count_kernel(lp, M, a)
    out[: M + 1] = res
    return out
