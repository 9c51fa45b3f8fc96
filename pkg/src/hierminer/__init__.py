"""Subgroup discovery over hierarchical counter data.

Mines pairs of (conjunctive subgroup description, contrastive antichain of
hierarchy concepts) that are surprising under a maximum-entropy background
model, updating the model as patterns are communicated.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .background import BackgroundModel, geometric_bucket_distribution
from .evaluation import SyntheticSpec, contrast, generate_synthetic, redundancy, run_comparison
from .hierarchy import ConceptTree, build_tree, is_antichain, scale
from .ingestion import Dataset, PriorTable, parse_jmap
from .miner import MinerConfig, beam_search, greedy_antichain, jaccard_postprocess, sca_miner
from .patterns import Antichain, Pattern, Selector, SubgroupPattern, extent
from .scoring import MeasureParams, si_score

__version__ = "0.1.0"

__all__ = [
    "Antichain",
    "BackgroundModel",
    "ConceptTree",
    "Dataset",
    "KERNEL_BACKEND",
    "MeasureParams",
    "MinerConfig",
    "Pattern",
    "PriorTable",
    "Selector",
    "SubgroupPattern",
    "SyntheticSpec",
    "beam_search",
    "build_tree",
    "contrast",
    "extent",
    "generate_synthetic",
    "geometric_bucket_distribution",
    "greedy_antichain",
    "is_antichain",
    "jaccard_postprocess",
    "parse_jmap",
    "redundancy",
    "run_comparison",
    "sca_miner",
    "scale",
    "si_score",
]
