"""Generalizing randomized-trial treatment effects to target populations.

The package combines a randomized trial sample with an observational
sample of the target population to estimate the population average
treatment effect: inverse-odds-of-sampling weighting, selection-score
stratification, outcome regression, entropy-balancing calibration
weights and their augmented doubly robust combinations, plus
nested-design variants, a trial-grounded deconfounder for observational
CATE models, graphical transportability checks, and a replicated
simulation benchmark with stratified bootstrap intervals.
"""

from .datamodel import CombinedDataset, load_dataset, validate_overlap, write_dataset
from .dgp import ScenarioConfig, generate, true_ate
from .registry import estimate_many, estimate_one
from .variance import stratified_bootstrap

__all__ = [
    "CombinedDataset",
    "ScenarioConfig",
    "estimate_many",
    "estimate_one",
    "generate",
    "load_dataset",
    "stratified_bootstrap",
    "true_ate",
    "validate_overlap",
    "write_dataset",
]

__version__ = "0.1.0"
