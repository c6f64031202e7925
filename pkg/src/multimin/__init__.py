"""Multimodal model-based optimization with Kriging surrogates.

Locates all local minima of expensive black-box functions, scores the found
set against known minima and runs benchmark grids that write CSV output.
"""

from multimin.core import BoxDomain, DomainError, RandomStream, lhs_sample
from multimin.infill import CriterionKind
from multimin.mbo import MboConfig, run
from multimin.minima import agglomerate, extract, sample_size
from multimin.objectives import lookup, registry
from multimin.surrogate import KrigingConfig, fit

__version__ = "0.1.0"

__all__ = [
    "BoxDomain",
    "CriterionKind",
    "DomainError",
    "KrigingConfig",
    "MboConfig",
    "RandomStream",
    "agglomerate",
    "extract",
    "fit",
    "lhs_sample",
    "lookup",
    "registry",
    "run",
    "sample_size",
]
