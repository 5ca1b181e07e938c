"""Free energies, critical points and transition-order diagnostics.

Annealed quantities come from the root equation

    sum_n pmf(n) exp(-x n) = exp(-(beta u + logMV)),    beta f^a = x,

solved in the gap coordinate ``eps = b_E + x``. Quenched quantities are
replica averages of exact finite-volume partition functions.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from ._optim import golden_min
from .errors import AtCriticalPoint, NoBracket, Unsupported
from .excursion import BiasedRW, ExcursionLaw
from .ratefun import RateProfile
from .renewal import PinningModel, contact_count_dp, partition, replica_seed, sample_disorder

__all__ = [
    "PhaseReport",
    "CriticalEstimate",
    "annealed_free_energy",
    "annealed_contact_fraction",
    "annealed_critical_point",
    "classify_transition",
    "quenched_samples",
    "quenched_free_energy",
    "quenched_contact_fraction",
    "quenched_critical_point",
    "loosened_correspondence",
    "partial_loosening_residuals",
    "force_model",
    "contact_count_rate",
    "theorem1_report",
]

log = logging.getLogger(__name__)

CASES = ("Thm2_i", "Thm2_ii", "Thm2_iii", "Thm1_transient_exp", "heavy_tail_unsupported")


# ---------------------------------------------------------------------------
# annealed system
# ---------------------------------------------------------------------------


def _solve_decreasing_log(fun, target):
    # root of fun(eps) = target for fun decreasing on (0, inf), via v = log eps
    def f(v):
        return fun(math.exp(v)) - target

    v_hi = 0.0
    while f(v_hi) > 0.0:
        v_hi += 2.0
        if v_hi > 30.0:
            raise NoBracket("annealed root lies beyond eps = e^30")
    v_lo = v_hi - 2.0
    while f(v_lo) < 0.0:
        v_lo -= 4.0
        if v_lo < -700.0:
            return 0.0
    return math.exp(brentq(f, v_lo, v_hi, xtol=1e-15, rtol=1e-15, maxiter=300))


def _annealed_root(law: ExcursionLaw, K: float):
    """Unclamped ``beta f`` and the tilt at the root, or ``None`` if unsolvable.

    Returns
    -------
    (x, solved) where ``x`` solves ``P(E<inf) M^f(-x) = exp(-K)`` when
    ``solved`` and equals ``-b_E`` otherwise.
    """
    tau = law.r - K  # log M^f(-x) = tau
    b = law.b_E
    if math.isinf(b):
        def f(x):
            return law.log_mgf_finite(-x) - tau

        lo, hi = -1.0, 1.0
        while f(lo) < 0.0:
            lo *= 2.0
        while f(hi) > 0.0:
            hi *= 2.0
        return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=300), True
    if tau >= law.log_mgf_boundary:
        return -b, False
    eps = _solve_decreasing_log(law.log_mgf_gap, tau)
    return eps - b, True


def annealed_free_energy(law: ExcursionLaw, beta: float, u: float, logMV: float = 0.0) -> float:
    """Annealed free energy ``f^a(beta, u)`` from the root equation.

    Without a root in ``x > -b_E``, transient laws sit on the escape
    branch ``f = 0`` and recurrent laws on ``f = -b_E / beta``; transient
    roots below zero are likewise replaced by the escape value 0.
    """
    x, _ = _annealed_root(law, beta * u + logMV)
    if law.r > 0.0:
        x = max(x, 0.0)
    return x / beta


def annealed_critical_point(law: ExcursionLaw, beta: float, logMV: float = 0.0) -> float:
    """Pinning strength where the annealed root equation becomes solvable.

    ``(r - logMV)/beta`` for transient laws and recurrent laws without
    exponential tails; ``-(log M^f(b_E) + logMV)/beta`` for recurrent
    exponential tails (``-inf`` when the prefactors are not summable).
    """
    if law.r > 0.0 or law.b_E == 0.0:
        return (law.r - logMV) / beta
    lmb = law.log_mgf_boundary
    if math.isinf(lmb):
        return -math.inf
    return -(lmb + logMV) / beta


def annealed_contact_fraction(law: ExcursionLaw, beta: float, u: float,
                              logMV: float = 0.0) -> float:
    """``d f^a / du``: the inverse mean of the law tilted to the root.

    Raises
    ------
    AtCriticalPoint
        Within ``1e-12`` of the annealed critical point.
    """
    uc = annealed_critical_point(law, beta, logMV)
    if math.isfinite(uc) and abs(u - uc) <= 1e-12 * max(1.0, abs(uc)):
        raise AtCriticalPoint(f"u={u} is the annealed critical point")
    x, solved = _annealed_root(law, beta * u + logMV)
    if not solved or (law.r > 0.0 and x <= 0.0):
        return 0.0
    if math.isinf(law.b_E):
        return 1.0 / law.tilted_mean(-x)
    return 1.0 / law.mean_gap(x + law.b_E)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def _json_value(v):
    if isinstance(v, float):
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
    if isinstance(v, (np.floating, np.integer)):
        return _json_value(v.item())
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


@dataclass
class PhaseReport:
    """Transition classification, critical points, jump and gap bounds.

    ``checks`` maps a check name to ``{"passed": bool, "residual": float}``.
    """

    law: dict
    beta: float
    sigma: float
    transition_case: str
    u_c_annealed: float
    annealed_jump: float | None = None
    quenched_jump_lower_bound: float | None = None
    delta0: float | None = None
    gap_lower_bound: float = 0.0
    loosened_shift: float | None = None
    u_c_quenched_estimate: float | None = None
    u_c_quenched_stderr: float | None = None
    y: float | None = None
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add_check(self, name: str, passed: bool, residual: float, **extra):
        self.checks[name] = {"passed": bool(passed), "residual": float(residual), **extra}

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return _json_value(asdict(self))


def classify_transition(law: ExcursionLaw, beta: float, sigma: float = 0.0) -> PhaseReport:
    """Annealed part of the phase report: case label, ``u_c^a`` and jumps."""
    logmv = 0.5 * (beta * sigma) ** 2
    rep = PhaseReport(law=law.to_dict(), beta=float(beta), sigma=float(sigma),
                      transition_case="", u_c_annealed=annealed_critical_point(law, beta, logmv))
    b = law.b_E
    if b == 0.0:
        rep.transition_case = "heavy_tail_unsupported"
        return rep
    if not law.recurrent:
        rep.transition_case = "Thm1_transient_exp"
        rep.annealed_jump = 1.0 / law.m_E
        prof = RateProfile(law)
        rep.delta0 = prof.delta0(beta, logmv, sigma if sigma > 0 else 1.0)
        rep.quenched_jump_lower_bound = rep.delta0 if math.isinf(law.A) else 1.0 / law.A
        rep.gap_lower_bound = 0.5 * beta * rep.delta0**2
        rep.notes.append("annealed jump is 1/m_E, the limit of the contact fraction at u_c+")
        return rep
    lmb = law.log_mgf_boundary
    if math.isinf(lmb):
        rep.transition_case = "Thm2_i"
        rep.notes.append("prefactor sum diverges: no transition")
        return rep
    rep.loosened_shift = lmb / beta
    if math.isinf(law.b_e_prime):
        rep.transition_case = "Thm2_ii"
        rep.annealed_jump = 0.0
    else:
        rep.transition_case = "Thm2_iii"
        rep.annealed_jump = 1.0 / law.b_e_prime
        rep.notes.append("jump 1/b_E' is the right end of the affine piece of ghat_f")
    return rep


# ---------------------------------------------------------------------------
# quenched system
# ---------------------------------------------------------------------------


def _replica_fields(model, N, replicas, master_seed):
    return [sample_disorder(replica_seed(master_seed, i), N, model.sigma) for i in range(replicas)]


def _run_replicas(model, fields, N, workers=1, constrained=False):
    def one(f):
        res = partition(model, f, N)
        lz = res.logZ_constrained if constrained else res.logZ_free
        return lz / (model.beta * N), res.mean_contacts / N

    if workers > 1 and len(fields) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(one, fields))
    else:
        out = [one(f) for f in fields]
    arr = np.array(out)
    return arr[:, 0], arr[:, 1]


def _mean_se(x):
    x = np.asarray(x)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def quenched_samples(model: PinningModel, N: int, replicas: int, master_seed: int = 0,
                     workers: int = 1, constrained: bool = False):
    """Per-replica ``(log Z_N)/(beta N)`` and ``<L_N>/N``, in replica order.

    With ``constrained`` the pinned-endpoint ``Z^c_N`` replaces ``Z_N``.
    """
    if N < 1 or replicas < 1:
        raise ValueError("N and replicas must be >= 1")
    fields = _replica_fields(model, N, replicas, master_seed)
    return _run_replicas(model, fields, N, workers, constrained)


def quenched_free_energy(model: PinningModel, N: int, replicas: int, master_seed: int = 0,
                         workers: int = 1, constrained: bool = False):
    """Replica mean of the finite-volume free energy and its standard error.

    The constrained version ``E log Z^c_N / (beta N)`` never exceeds the
    limiting free energy (the sequence is superadditive), which makes it
    the right estimator to hold against an upper bound.
    """
    f, _ = quenched_samples(model, N, replicas, master_seed, workers, constrained)
    return _mean_se(f)


def quenched_contact_fraction(model: PinningModel, N: int, replicas: int, master_seed: int = 0,
                              workers: int = 1):
    """Replica mean of ``<L_N>/N`` and its standard error."""
    _, c = quenched_samples(model, N, replicas, master_seed, workers)
    return _mean_se(c)


@dataclass
class CriticalEstimate:
    """Extrapolated quenched critical point; unpacks as ``(estimate, uncertainty)``."""

    estimate: float
    uncertainty: float
    ladder: list
    u_N: list
    bisection_halfwidth: float
    extrapolation_residual: float
    statistical: float

    def __iter__(self):
        yield self.estimate
        yield self.uncertainty


def _criterion_threshold(se, beta, N):
    return max(5.0 * se, 10.0 / (beta * N))


def quenched_critical_point(law: ExcursionLaw, beta: float, sigma: float, N_ladder,
                            replicas: int, master_seed: int = 0, workers: int = 1,
                            bracket=None, tol: float = 2e-5) -> CriticalEstimate:
    """Estimate ``u_c^q`` from the positivity of the quenched free energy.

    For each ``N`` the same replica fields are used at every ``u`` and ``u``
    is bisected on ``mean f_N(u) - log(N)/(beta N) > max(5 stderr, 10/(beta N))``.
    The ``log N`` term removes the free-endpoint entropy, which otherwise
    adds a ``log(N)/N`` drift to the crossings; what remains is extrapolated
    linearly in ``1/N``.

    Raises
    ------
    Unsupported
        For recurrent laws (no escape floor at 0).
    NoBracket
        If the criterion does not change sign on the bracket.
    """
    if law.recurrent:
        raise Unsupported("the positivity criterion needs a transient law")
    ladder = [int(n) for n in N_ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("N_ladder must be strictly increasing")
    logmv = 0.5 * (beta * sigma) ** 2
    if bracket is None:
        bracket = (annealed_critical_point(law, beta, logmv) - 0.1, law.r / beta + 0.25)
    base = PinningModel(law, beta, 0.0, sigma)
    u_N, stat_N = [], []
    for N in ladder:
        fields = _replica_fields(base, N, replicas, master_seed)

        def crit(u):
            f, c = _run_replicas(base.with_u(u), fields, N, workers)
            m, se = _mean_se(f)
            excess = m - math.log(N) / (beta * N)
            return excess > _criterion_threshold(se, beta, N), se, float(c.mean())

        lo, hi = bracket
        if crit(lo)[0] or not crit(hi)[0]:
            raise NoBracket(f"criterion does not change sign on [{lo}, {hi}] at N={N}")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if crit(mid)[0]:
                hi = mid
            else:
                lo = mid
        _, se, c = crit(hi)
        u_N.append(0.5 * (lo + hi))
        # free-energy noise translated into a shift of the crossing
        stat_N.append(se / max(c, 1e-3))
        log.info("N=%d crossing at u=%.6f (se=%.2e, C=%.3f)", N, u_N[-1], se, c)
    inv = 1.0 / np.array(ladder, dtype=float)
    y = np.array(u_N)
    half = 0.5 * tol
    if len(ladder) == 1:
        est, resid, weights = y[0], 0.0, np.ones(1)
    else:
        A = np.vstack([np.ones_like(inv), inv]).T
        weights = np.linalg.pinv(A)[0]
        est = float(weights @ y)
        if len(ladder) == 2:
            resid = abs(est - y[-1])
        else:
            # drop the smallest system and refit
            A2 = A[1:]
            est2 = float(np.linalg.pinv(A2)[0] @ y[1:])
            resid = abs(est - est2)
    stat = float(math.sqrt(np.sum((weights * np.array(stat_N)) ** 2)))
    bis = float(np.sum(np.abs(weights)) * half)
    unc = float(math.sqrt(bis**2 + resid**2 + stat**2))
    return CriticalEstimate(float(est), unc, ladder, [float(v) for v in u_N], bis,
                            float(resid), stat)


# ---------------------------------------------------------------------------
# loosened systems
# ---------------------------------------------------------------------------


def loosened_correspondence(law: ExcursionLaw, beta: float, u, b: float | None = None) -> dict:
    """Deterministic translation identity between a law and its loosening.

    For a recurrent law with summable prefactors, compares ``beta f(u)``
    with ``beta f~(u + log M^f(b_E)/beta) - b_E``. For a transient law the
    partially loosened law at ``0 < b < b_E`` is used with shift
    ``log M^f(b)/beta``; the comparison is then made on the unclamped
    roots, since the escape branch is not translated.

    Returns
    -------
    dict with ``shift``, ``residual`` (max over ``u``) and per-point arrays.
    """
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if law.recurrent:
        loose = law.loosen()
        b = law.b_E
        shift = law.log_mgf_boundary / beta
        lhs = np.array([beta * annealed_free_energy(law, beta, v) for v in us])
        rhs = np.array([beta * annealed_free_energy(loose, beta, v + shift) - b for v in us])
    else:
        b = 0.5 * law.b_E if b is None else float(b)
        loose = law.partially_loosen(b)
        shift = law.log_mgf_finite(b) / beta
        lhs = np.array([_annealed_root(law, beta * v)[0] for v in us])
        rhs = np.array([_annealed_root(loose, beta * (v + shift))[0] - b for v in us])
    res = lhs - rhs
    return {"shift": shift, "b": b, "u": us, "lhs": lhs, "rhs": rhs,
            "residual": float(np.max(np.abs(res))), "loosened_law": loose.to_dict()}


def partial_loosening_residuals(law: ExcursionLaw, beta: float, u: float, sigma: float,
                                b: float, N: int, replicas: int, master_seed: int = 0):
    """Finite-volume identity ``Z^c_n(hat u) = e^{b n} Z^c_n(u)`` per replica.

    Both systems see the same disorder; ``hat u = u + log M^f(b)/beta``.
    Returns the per-replica maximum over ``n`` of the log residual.
    """
    loose = law.partially_loosen(b)
    shift = law.log_mgf_finite(b) / beta
    orig = PinningModel(law, beta, u, sigma)
    hat = PinningModel(loose, beta, u + shift, sigma)
    n = np.arange(N + 1)
    out = []
    for i in range(replicas):
        f = sample_disorder(replica_seed(master_seed, i), N, sigma)
        a = partition(orig, f, N, window=None).logZc
        c = partition(hat, f, N, window=None).logZc
        fin = np.isfinite(a)
        scale = np.maximum(1.0, np.abs(c[fin]))
        out.append(float(np.max(np.abs(c[fin] - a[fin] - b * n[fin]) / scale)))
    return np.array(out)


def force_model(p: float, beta: float, u: float, sigma: float = 0.0) -> PinningModel:
    """Polymer pulled by a force: a biased-walk pinning model at ``u - log 2 / beta``."""
    if not p > 0.5:
        raise ValueError("the force model needs p > 1/2")
    return PinningModel(BiasedRW(p), beta, u - math.log(2.0) / beta, sigma)


def contact_count_rate(law: ExcursionLaw, N: int, windows, dp=None) -> list[dict]:
    """Exact ``-(1/N) log P(lo N < L_N < hi N, N is a renewal)`` against ``inf ghat``.

    ``windows`` is a sequence of ``(lo, hi)`` pairs; ``dp`` may carry a
    precomputed :func:`contact_count_dp` table.
    """
    if dp is None:
        dp = contact_count_dp(law, N)
    prof = RateProfile(law)
    k = np.arange(N + 1)
    out = []
    for lo, hi in windows:
        sel = (k > lo * N) & (k < hi * N)
        rate = -float(logsumexp(dp[sel])) / N if sel.any() else math.inf
        # ghat is convex, so golden section finds the infimum on the window
        _, inf_g = golden_min(prof.ghat, float(lo), float(hi), 1e-12)
        out.append({"lo": float(lo), "hi": float(hi), "N": int(N), "rate_dp": rate,
                    "inf_ghat": inf_g, "rel_err": abs(rate - inf_g) / abs(inf_g)})
    return out


# ---------------------------------------------------------------------------
# full verification report
# ---------------------------------------------------------------------------

DEFAULT_BUDGET = {
    "N_ladder": [2**13, 2**14, 2**15],
    "replicas": 32,
    "master_seed": 0,
    "workers": 1,
    "margin": 0.05,
    "approach_points": 5,
    "bound_grid": 9,
    "loosen_N": 2**12,
    "loosen_replicas": 8,
}


def theorem1_report(law: ExcursionLaw, beta: float, sigma: float, budget: dict | None = None
                    ) -> PhaseReport:
    """Assemble every check of the transient exponential-tail theory.

    ``budget`` overrides entries of ``DEFAULT_BUDGET`` (system sizes,
    replicas, seed, workers, margins).

    Raises
    ------
    Unsupported
        Unless the law is transient with ``b_E > 0``.
    """
    cfg = dict(DEFAULT_BUDGET)
    cfg.update(budget or {})
    rep = classify_transition(law, beta, sigma)
    if rep.transition_case != "Thm1_transient_exp":
        raise Unsupported(f"law is {rep.transition_case}, not transient with exponential tails")
    logmv = 0.5 * (beta * sigma) ** 2
    prof = RateProfile(law)
    uca = rep.u_c_annealed

    # annealed critical point from solvability of the root equation
    def solvable(v):
        x, ok = _annealed_root(law, beta * v + logmv)
        return ok and x > 0.0

    lo, hi = uca - 1.0, uca + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if solvable(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13:
            break
    rep.add_check("annealed_critical_point_root", abs(hi - uca) < 1e-10, abs(hi - uca))

    ladder = cfg["N_ladder"]
    R, seed, W = int(cfg["replicas"]), int(cfg["master_seed"]), int(cfg["workers"])
    crit = quenched_critical_point(law, beta, sigma, ladder, R, seed, W)
    rep.u_c_quenched_estimate = crit.estimate
    rep.u_c_quenched_stderr = crit.uncertainty
    gap = crit.estimate - uca
    rep.add_check("critical_gap", gap >= rep.gap_lower_bound - 2 * crit.uncertainty,
                  gap - rep.gap_lower_bound, uncertainty=crit.uncertainty, u_N=crit.u_N)

    # contact fraction just above the quenched critical point
    Nmax = ladder[-1]
    margin = float(cfg["margin"])
    k = int(cfg["approach_points"])
    approach = [crit.estimate + margin * (k - i) / k for i in range(k)]
    cq = []
    for v in approach:
        c, se = quenched_contact_fraction(PinningModel(law, beta, v, sigma), Nmax, R, seed, W)
        cq.append(c)
    floor = rep.quenched_jump_lower_bound
    rep.add_check("quenched_jump", cq[0] >= floor - 2e-2, cq[0] - floor,
                  approach_u=approach, approach_C=cq)
    rep.add_check("jump_persists", min(cq) >= floor - 2e-2, min(cq) - floor)

    # quenched free energy against the upper bound: the pinned-endpoint
    # estimator is a lower bound on f^q at every N, so no allowance is needed;
    # the free-endpoint one carries a log(N)/N entropy term
    worst, worst_free = -math.inf, -math.inf
    us = np.linspace(uca, crit.estimate + 0.5, int(cfg["bound_grid"]))
    allowance = math.log(Nmax + 1) / (beta * Nmax)
    for v in us:
        model = PinningModel(law, beta, v, sigma)
        bound = prof.quenched_upper_bound(beta, v, logmv, sigma if sigma > 0 else 1.0)
        fc, sec = quenched_free_energy(model, Nmax, R, seed, W, constrained=True)
        fq, se = quenched_free_energy(model, Nmax, R, seed, W)
        worst = max(worst, fc - (bound + 3 * sec))
        worst_free = max(worst_free, fq - (bound + 3 * se + allowance))
    rep.add_check("quenched_bound", worst <= 0.0, worst, u_grid=us.tolist())
    rep.add_check("quenched_bound_free_endpoint", worst_free <= 0.0, worst_free,
                  finite_size_allowance=allowance)

    # partial loosening: exact finite-volume identity and the contact floor y
    b = 0.5 * law.b_E if math.isfinite(law.b_E) else 1.0
    res = partial_loosening_residuals(law, beta, crit.estimate, sigma, b,
                                      int(cfg["loosen_N"]), int(cfg["loosen_replicas"]), seed)
    rep.add_check("partial_loosening_identity", res.max() < 1e-6, float(res.max()))
    loose = law.partially_loosen(b)
    shift = law.log_mgf_finite(b) / beta
    y, _ = quenched_contact_fraction(PinningModel(loose, beta, crit.estimate + shift, sigma),
                                     Nmax, R, seed, W)
    rep.y = y
    fa = annealed_free_energy(law, beta, crit.estimate + margin, logmv)
    fq, se = quenched_free_energy(PinningModel(law, beta, crit.estimate + margin, sigma),
                                  Nmax, R, seed, W)
    rep.add_check("annealed_quenched_separation", fa - fq >= 0.5 * beta * y**2 - 3 * se,
                  fa - fq - 0.5 * beta * y**2)
    return rep
