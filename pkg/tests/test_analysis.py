import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinlab import (
    BiasedRW,
    FiniteSupport,
    GeometricPrefactor,
    PinningModel,
    PowerLaw,
    annealed_contact_fraction,
    annealed_critical_point,
    annealed_free_energy,
    classify_transition,
    force_model,
    loosened_correspondence,
    partition,
    quenched_contact_fraction,
    quenched_critical_point,
    quenched_free_energy,
    sample_disorder,
)
from pinlab.analysis import partial_loosening_residuals, theorem1_report
from pinlab.errors import AtCriticalPoint, NoBracket, Unsupported
from pinlab.excursion import Dilated
from pinlab.ratefun import RateProfile

CROSS_LAWS = [
    BiasedRW(0.5),
    BiasedRW(0.7),
    GeometricPrefactor.normalized(0.2, 3.0),
    GeometricPrefactor.normalized(0.3, 2.0, 0.2),
    FiniteSupport({1: 0.3, 2: 0.5, 5: 0.2}),
    FiniteSupport({2: 0.5, 3: 0.3}),
]


def _ids(law):
    return repr(law.to_dict())


# -- annealed free energy ------------------------------------------------------


def test_trivial_law():
    law = FiniteSupport({1: 1.0})
    for u in (-1.0, 0.0, 0.7):
        assert annealed_free_energy(law, 1.3, u) == pytest.approx(u, abs=1e-14)
        assert annealed_contact_fraction(law, 1.3, u) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("law", CROSS_LAWS, ids=_ids)
def test_root_matches_variational(law):
    beta, lmv = 1.0, 0.5
    uc = annealed_critical_point(law, beta, lmv)
    centre = uc if math.isfinite(uc) else 0.0
    prof = RateProfile(law)
    for u in np.linspace(centre - 1.0, centre + 1.5, 50):
        f = annealed_free_energy(law, beta, u, lmv)
        val, _ = prof.variational_annealed(beta, u, lmv)
        assert abs(beta * f - val) < 1e-6


def test_subcritical_branches():
    law = BiasedRW(0.7)
    assert annealed_free_energy(law, 1.0, -3.0, 0.5) == 0.0
    rec = GeometricPrefactor.normalized(0.2, 3.0)
    uc = annealed_critical_point(rec, 1.0)
    assert annealed_free_energy(rec, 1.0, uc - 0.5) == pytest.approx(-0.2, abs=1e-14)


@pytest.mark.parametrize("law", CROSS_LAWS, ids=_ids)
def test_contact_fraction_is_derivative(law):
    beta, lmv, h = 1.0, 0.5, 1e-6
    uc = annealed_critical_point(law, beta, lmv)
    centre = uc if math.isfinite(uc) else 0.0
    for u in centre + np.array([-0.7, -0.2, 0.05, 0.3, 1.0]):
        c = annealed_contact_fraction(law, beta, u, lmv)
        fd = (annealed_free_energy(law, beta, u + h, lmv)
              - annealed_free_energy(law, beta, u - h, lmv)) / (2 * h)
        assert c == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_contact_fraction_matches_argmax():
    law = BiasedRW(0.7)
    prof = RateProfile(law)
    for u in (0.1, 0.4, 1.0):
        _, arg = prof.variational_annealed(1.0, u, 0.5)
        assert annealed_contact_fraction(law, 1.0, u, 0.5) == pytest.approx(arg, abs=1e-6)


def test_transient_contact_floor():
    law = BiasedRW(0.7)
    uc = annealed_critical_point(law, 1.0, 0.5)
    assert annealed_contact_fraction(law, 1.0, uc - 0.01, 0.5) == 0.0
    for du in (1e-9, 1e-4, 0.1, 1.0):
        assert annealed_contact_fraction(law, 1.0, uc + du, 0.5) >= 1 / law.m_E - 1e-12


def test_at_critical_point_raises():
    law = BiasedRW(0.7)
    uc = annealed_critical_point(law, 1.0, 0.5)
    with pytest.raises(AtCriticalPoint):
        annealed_contact_fraction(law, 1.0, uc, 0.5)


def test_critical_point_closed_forms():
    assert annealed_critical_point(BiasedRW(0.7), 1.0, 0.5) == pytest.approx(
        -math.log(0.6) - 0.5, abs=1e-15)
    assert annealed_critical_point(PowerLaw.normalized(2.5), 1.7) == 0.0
    rec = GeometricPrefactor.normalized(0.2, 3.0)
    beta = 2.0
    expect = -rec.log_mgf_boundary / beta
    assert annealed_critical_point(rec, beta) == pytest.approx(expect, abs=1e-15)
    assert annealed_critical_point(GeometricPrefactor.normalized(0.2, 0.5), 1.0) == -math.inf


# -- classification ----------------------------------------------------------------


@pytest.mark.parametrize("c,case", [(0.5, "Thm2_i"), (1.5, "Thm2_ii"), (3.0, "Thm2_iii")])
def test_recurrent_case_labels(c, case):
    rep = classify_transition(GeometricPrefactor.normalized(0.2, c), 1.0)
    assert rep.transition_case == case
    assert rep.gap_lower_bound == 0.0


def _departure(prof, beta, lo, hi, thr=1e-9):
    # smallest u with variational argmax above thr, by bisection
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if prof.variational_annealed(beta, mid, 0.0)[1] > thr:
            hi = mid
        else:
            lo = mid
    return hi


@pytest.mark.parametrize("c", [1.5, 3.0])
def test_critical_point_is_argmax_departure(c):
    law = GeometricPrefactor.normalized(0.2, c)
    prof = RateProfile(law)
    uc = annealed_critical_point(law, 1.0)
    assert uc == pytest.approx(-law.log_mgf_boundary, abs=1e-15)
    assert abs(_departure(prof, 1.0, uc - 0.5, uc + 0.5) - uc) < 1e-6


def test_case_iii_jump_is_limiting_argmax():
    law = GeometricPrefactor.normalized(0.2, 3.0)
    rep = classify_transition(law, 1.0)
    n = np.arange(1, 2_000_001, dtype=float)
    s2, s3 = np.sum(n**-2.0), np.sum(n**-3.0)
    assert rep.annealed_jump == pytest.approx(1 / law.b_e_prime, rel=1e-14)
    _, arg = RateProfile(law).variational_annealed(1.0, rep.u_c_annealed + 1e-6, 0.0)
    assert abs(arg - rep.annealed_jump) < 1e-3
    # sum n gamma_n / sum gamma_n with gamma_n = n^-3; the n^-2 partial sum is off by 5e-7
    assert 1 / rep.annealed_jump == pytest.approx(s2 / s3, rel=1e-5)


def test_transient_and_heavy_cases():
    rep = classify_transition(BiasedRW(0.7), 1.0, 1.0)
    assert rep.transition_case == "Thm1_transient_exp"
    assert rep.gap_lower_bound == pytest.approx(0.5 * rep.delta0**2, rel=1e-15)
    assert rep.gap_lower_bound > 0
    assert rep.annealed_jump == pytest.approx(1 / BiasedRW(0.7).m_E)
    heavy = classify_transition(PowerLaw.normalized(2.5), 1.0)
    assert heavy.transition_case == "heavy_tail_unsupported"
    assert heavy.gap_lower_bound == 0.0
    fs = classify_transition(FiniteSupport({1: 0.3, 3: 0.5}), 1.0, 1.0)
    assert fs.quenched_jump_lower_bound == pytest.approx(1 / 3)


CLASS_LAWS = [
    GeometricPrefactor.normalized(0.2, 0.5),
    GeometricPrefactor.normalized(0.2, 1.5),
    GeometricPrefactor.normalized(0.2, 3.0),
    BiasedRW(0.7),
    FiniteSupport({1: 0.3, 3: 0.5}),
    FiniteSupport({1: 0.4, 2: 0.6}),
    PowerLaw.normalized(2.5),
]


@pytest.mark.parametrize("law", CLASS_LAWS, ids=_ids)
def test_classification_stable_under_dilation(law):
    a = classify_transition(law, 1.0, 1.0)
    b = classify_transition(Dilated(law, 2), 1.0, 1.0)
    assert a.transition_case == b.transition_case
    assert (a.gap_lower_bound > 0) == (b.gap_lower_bound > 0)
    assert a.u_c_annealed == pytest.approx(b.u_c_annealed, abs=1e-12)


@pytest.mark.parametrize("c", [0.5, 1.5, 3.0])
def test_classification_stable_under_perturbation(c):
    base = classify_transition(GeometricPrefactor.normalized(0.2, c), 1.0).transition_case
    for db, dc in [(1e-13, 0.0), (0.0, 1e-13), (-1e-13, 1e-13)]:
        law = GeometricPrefactor.normalized(0.2 + db, c + dc)
        n = np.arange(1, 2000)
        ref = GeometricPrefactor.normalized(0.2, c)
        assert np.max(np.abs(law.pmf(n) - ref.pmf(n))) < 1e-12
        assert classify_transition(law, 1.0).transition_case == base


def test_phase_report_json_roundtrip():
    rep = classify_transition(BiasedRW(0.7), 1.0, 1.0)
    rep.add_check("dummy", True, 0.0)
    d = json.loads(json.dumps(rep.to_dict()))
    for key in ("law", "beta", "u_c_annealed", "transition_case", "annealed_jump",
                "quenched_jump_lower_bound", "gap_lower_bound", "loosened_shift",
                "u_c_quenched_estimate", "u_c_quenched_stderr", "y", "checks"):
        assert key in d
    assert d["checks"]["dummy"]["passed"] is True
    inf_rep = classify_transition(GeometricPrefactor.normalized(0.2, 0.5), 1.0)
    assert json.loads(json.dumps(inf_rep.to_dict()))["u_c_annealed"] == "-inf"


# -- quenched system -----------------------------------------------------------------


def test_quenched_trivial_law():
    m = PinningModel(FiniteSupport({1: 1.0}), 1.0, 0.2, 1.0)
    c, _ = quenched_contact_fraction(m, 200, 4)
    assert c == pytest.approx(1.0, abs=1e-12)


def test_quenched_deterministic_matches_annealed():
    law = BiasedRW(0.7)
    N = 20000
    for u in (0.7, 1.0):
        m = PinningModel(law, 1.0, u, 0.0)
        f, se = quenched_free_energy(m, N, 2)
        fa = annealed_free_energy(law, 1.0, u)
        assert se == 0.0
        assert abs(f - fa) <= 2 * math.log(N) / N
        c, _ = quenched_contact_fraction(m, N, 1)
        assert c == pytest.approx(annealed_contact_fraction(law, 1.0, u), abs=2e-2)


def test_quenched_reproducible_and_parallel():
    m = PinningModel(BiasedRW(0.7), 1.0, 0.4, 1.0)
    a = quenched_free_energy(m, 1000, 6, master_seed=3)
    b = quenched_free_energy(m, 1000, 6, master_seed=3, workers=3)
    assert a == b
    assert quenched_free_energy(m, 1000, 6, master_seed=4) != a


def test_constrained_estimator_below_free():
    m = PinningModel(BiasedRW(0.7), 1.0, 0.5, 1.0)
    fc, _ = quenched_free_energy(m, 2000, 4, constrained=True)
    ff, _ = quenched_free_energy(m, 2000, 4)
    assert fc <= ff


def test_quenched_below_bound_and_annealed():
    law = BiasedRW(0.7)
    prof = RateProfile(law)
    for u in (0.3, 0.6, 1.0):
        m = PinningModel(law, 1.0, u, 1.0)
        fc, se = quenched_free_energy(m, 4096, 8, constrained=True)
        bound = prof.quenched_upper_bound(1.0, u, 0.5, 1.0)
        assert fc <= bound + 3 * se
        assert bound <= annealed_free_energy(law, 1.0, u, 0.5) + 1e-12


def test_stderr_shrinks_with_N():
    m = PinningModel(BiasedRW(0.7), 1.0, 0.8, 1.0)
    _, s1 = quenched_free_energy(m, 2**10, 64)
    _, s2 = quenched_free_energy(m, 2**12, 64)
    assert s2 < s1


def test_quenched_critical_point_deterministic():
    law = BiasedRW(0.7)
    est = quenched_critical_point(law, 1.0, 0.0, [2**11, 2**12, 2**13], 1)
    assert abs(est.estimate - law.r) <= 2 * est.uncertainty
    u, unc = est
    assert unc == est.uncertainty


def test_quenched_critical_gap_grows_with_disorder():
    law = BiasedRW(0.7)
    ladder = [2**10, 2**11, 2**12]
    gaps = []
    for sigma in (0.5, 1.0):
        est = quenched_critical_point(law, 1.0, sigma, ladder, 12)
        uca = annealed_critical_point(law, 1.0, 0.5 * sigma**2)
        gaps.append((est.estimate - uca, est.uncertainty))
    assert gaps[1][0] - gaps[0][0] > 2 * math.hypot(gaps[0][1], gaps[1][1])


def test_quenched_critical_point_errors():
    with pytest.raises(Unsupported):
        quenched_critical_point(BiasedRW(0.5), 1.0, 1.0, [256], 2)
    with pytest.raises(NoBracket):
        quenched_critical_point(BiasedRW(0.7), 1.0, 0.0, [256], 1, bracket=(2.0, 3.0))
    with pytest.raises(ValueError):
        quenched_critical_point(BiasedRW(0.7), 1.0, 0.0, [512, 256], 1)


# -- loosened systems ----------------------------------------------------------------


def test_recurrent_loosened_translation():
    law = BiasedRW(0.5).tilt(-0.3)
    uc = annealed_critical_point(law, 1.0)
    out = loosened_correspondence(law, 1.0, np.linspace(uc - 1, uc + 1, 41))
    assert out["residual"] < 1e-8
    assert out["shift"] == pytest.approx(law.log_mgf_boundary)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(2.2, 4.0), b=st.floats(0.05, 1.0), beta=st.floats(0.3, 2.0))
def test_loosened_translation_property(c, b, beta):
    law = GeometricPrefactor.normalized(b, c)
    uc = annealed_critical_point(law, beta)
    out = loosened_correspondence(law, beta, np.linspace(uc - 0.5, uc + 0.5, 7))
    assert out["residual"] < 1e-8


def test_partial_loosening_deterministic():
    law = BiasedRW(0.7)
    out = loosened_correspondence(law, 1.0, np.linspace(-0.5, 1.5, 21))
    assert out["residual"] < 1e-10


def test_partial_loosening_finite_volume_identity():
    law = BiasedRW(0.7)
    res = partial_loosening_residuals(law, 1.0, 0.3, 1.0, 0.5 * law.b_E, 512, 3, 1)
    assert res.shape == (3,)
    assert res.max() < 1e-10


# -- force ------------------------------------------------------------------------------


def test_force_model_mapping():
    beta = 1.3
    m = force_model(0.7, beta, math.log(2) / beta, 1.0)
    assert m.u == 0.0
    assert m.law == BiasedRW(0.7)
    with pytest.raises(ValueError):
        force_model(0.5, 1.0, 0.0)
    f = sample_disorder(2, 500, 1.0)
    for u in (0.2, 0.9):
        a = partition(force_model(0.7, beta, u, 1.0), f, 500)
        b = partition(PinningModel(BiasedRW(0.7), beta, u - math.log(2) / beta, 1.0), f, 500)
        assert abs(a.logZ_free - b.logZ_free) <= 1e-12


# -- full report ------------------------------------------------------------------------


def test_full_report_small_budget():
    budget = {"N_ladder": [2**10, 2**11, 2**12], "replicas": 8, "loosen_N": 512,
              "loosen_replicas": 2, "bound_grid": 4}
    rep = theorem1_report(BiasedRW(0.7), 1.0, 1.0, budget)
    assert rep.transition_case == "Thm1_transient_exp"
    for name in ("annealed_critical_point_root", "critical_gap", "quenched_jump",
                 "quenched_bound", "partial_loosening_identity"):
        assert rep.checks[name]["passed"], name
    assert rep.y > 0
    json.dumps(rep.to_dict())


def test_full_report_rejects_recurrent():
    with pytest.raises(Unsupported):
        theorem1_report(BiasedRW(0.5), 1.0, 1.0)
