"""Disordered polymer pinning: excursion laws, rate functions, exact partition functions."""

from .analysis import (
    PhaseReport,
    annealed_contact_fraction,
    annealed_critical_point,
    annealed_free_energy,
    classify_transition,
    force_model,
    loosened_correspondence,
    quenched_contact_fraction,
    quenched_critical_point,
    quenched_free_energy,
    theorem1_report,
)
from .excursion import (
    BiasedRW,
    Dilated,
    ExcursionLaw,
    FiniteSupport,
    GeometricPrefactor,
    PowerLaw,
    law_from_dict,
)
from .ratefun import RateProfile
from .renewal import (
    DisorderField,
    PartitionResult,
    PinningModel,
    brute_force,
    contact_count_dp,
    partition,
    sample_disorder,
)

__version__ = "0.1.0"

__all__ = [
    "BiasedRW",
    "Dilated",
    "ExcursionLaw",
    "FiniteSupport",
    "GeometricPrefactor",
    "PowerLaw",
    "law_from_dict",
    "RateProfile",
    "DisorderField",
    "PartitionResult",
    "PinningModel",
    "brute_force",
    "contact_count_dp",
    "partition",
    "sample_disorder",
    "PhaseReport",
    "annealed_contact_fraction",
    "annealed_critical_point",
    "annealed_free_energy",
    "classify_transition",
    "force_model",
    "loosened_correspondence",
    "quenched_contact_fraction",
    "quenched_critical_point",
    "quenched_free_energy",
    "theorem1_report",
]
