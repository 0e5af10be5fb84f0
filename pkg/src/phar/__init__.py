"""Interval rules from feature attributions for time-series classifiers.

The pipeline: pick salient timesteps from an attribution tensor, perturb
around each explained instance to find the value ranges the classifier
tolerates, score the resulting rules, and optionally fuse rule sets obtained
from different explainers. ``phar.cli`` exposes the same steps as a command
line tool.
"""

__version__ = "0.1.0"

from .attrib import AttributionTensor, load_attributions, occlusion_attribution
from .core import Condition, Rule, RuleSet, load_rules, save_rules
from .data import Dataset, load_dataset, make_synthetic
from .extract import ExtractionConfig, extract_ruleset
from .fuse import FUSION_METHODS, FusionConfig, fuse_rulesets
from .metrics import MetricsReport, confidence, coverage, objective, report
from .predict import make_predictor
from .stats import PairedSample, friedman, nemenyi, rank_rows, wilcoxon
from .tune import TuneConfig, tune
from .viz import PlotSpec, render_svg

__all__ = [
    "AttributionTensor",
    "Condition",
    "Dataset",
    "ExtractionConfig",
    "FUSION_METHODS",
    "FusionConfig",
    "MetricsReport",
    "PairedSample",
    "PlotSpec",
    "Rule",
    "RuleSet",
    "TuneConfig",
    "__version__",
    "confidence",
    "coverage",
    "extract_ruleset",
    "friedman",
    "fuse_rulesets",
    "load_attributions",
    "load_dataset",
    "load_rules",
    "make_predictor",
    "make_synthetic",
    "nemenyi",
    "objective",
    "occlusion_attribution",
    "rank_rows",
    "report",
    "save_rules",
    "tune",
    "wilcoxon",
]
