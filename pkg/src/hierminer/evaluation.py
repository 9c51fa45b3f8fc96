"""Comparative evaluation: contrast/redundancy metrics, a synthetic-data
generator with planted ground truth, and the multi-method comparison runner.

Both comparison metrics are reconstructions: the source formulas are
typographically corrupted, so contrast follows the prose "contrast between
the observed subgroup values and their expected values" normalized by the
observed mean, and redundancy weights extent overlap by the fraction of
hierarchically comparable antichain members; the anchors identical -> 1 and
disjoint -> 0 pin both down.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .hierarchy import (
    ConceptTree,
    aggregate_counters,
    build_tree,
    is_antichain,
    predecessors,
    successors,
)
from .ingestion import AttributeDescriptor, Dataset, PriorTable
from .miner import MinerConfig, jaccard, jaccard_postprocess, sca_miner
from .patterns import Pattern, Selector, SubgroupPattern, extent_mask
from .scoring import MEASURE_CWRACC, MEASURE_KL, MEASURE_SI, MEASURE_SI_NO_UPDATE

log = logging.getLogger(__name__)


class EvaluationError(ValueError):
    pass


def contrast(pattern: Pattern, dataset: Dataset, priors: PriorTable) -> float:
    """Summed relative excess of observed subgroup means over the priors."""
    rows = np.array(pattern.extent_indices, dtype=np.int64)
    if len(rows) == 0:
        raise EvaluationError("pattern extent is empty")
    means = priors.as_vector(dataset.tree)
    total = 0.0
    for cid in sorted(pattern.antichain.concept_ids):
        m = float(dataset.counter_matrix[rows, cid].mean())
        if m == 0.0:
            log.warning(
                "zero subgroup mean for concept %s; contrast term skipped",
                dataset.tree.name_of(cid),
            )
            continue
        total += (m - means[cid]) / m
    return total


def _comparable_fraction(
    tree: ConceptTree, a: frozenset[int], b: frozenset[int]
) -> float:
    """|members of a comparable to some member of b| / |a union b|."""
    union = len(a | b)
    if union == 0:
        return 0.0
    b_closure = predecessors(tree, b) | successors(tree, b)
    return sum(1 for e in a if e in b_closure) / union


def redundancy(patterns: Sequence[Pattern], tree: ConceptTree) -> float:
    """Mean over patterns of their worst overlap with any other pattern:
    extent Jaccard weighted by the comparable-antichain fraction."""
    if len(patterns) < 2:
        return 0.0
    scores = []
    for i, p in enumerate(patterns):
        worst = 0.0
        for j, q in enumerate(patterns):
            if i == j:
                continue
            jac = jaccard(p.extent_indices, q.extent_indices)
            if jac == 0.0 or math.isnan(jac):
                continue
            frac = _comparable_fraction(
                tree, p.antichain.concept_ids, q.antichain.concept_ids
            )
            worst = max(worst, jac * frac)
        scores.append(worst)
    return float(np.mean(scores))


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str  # categorical | numeric | boolean
    categories: tuple[str, ...] = ()
    low: float = 0.0
    high: float = 1.0


@dataclass(frozen=True)
class PlantedPattern:
    selectors: tuple[Selector, ...]
    target_concepts: tuple[str, ...]
    inflation: float

    def __post_init__(self):
        if self.inflation <= 1.0:
            raise EvaluationError("inflation factor must be > 1")


@dataclass(frozen=True)
class SyntheticSpec:
    object_count: int
    attributes: tuple[AttributeSpec, ...]
    tree_depth: int = 3
    branching: int = 4
    leaf_mean_low: float = 50.0
    leaf_mean_high: float = 5000.0
    leaf_means: Optional[dict] = None  # explicit per-leaf means override
    planted: tuple[PlantedPattern, ...] = ()
    noise: tuple[float, float] = (1.0, 1.0)  # multiplicative jitter bounds
    seed: int = 0


@dataclass
class GroundTruth:
    patterns: list[dict]  # description, extent indices, concept ids


def _synthetic_tree(depth: int, branching: int) -> ConceptTree:
    leaves = []

    def grow(prefix: str, level: int):
        for i in range(branching):
            name = f"{prefix}n{i}" if level == depth - 1 else f"{prefix}p{i}"
            if level == depth - 1:
                leaves.append(name)
            else:
                grow(name + ".", level + 1)

    grow("", 0)
    return build_tree(leaves)


def generate_synthetic(
    spec: SyntheticSpec,
) -> tuple[Dataset, PriorTable, GroundTruth]:
    """Seeded dataset with geometric counters and planted inflations.

    Every concept's counter is an independent geometric draw around its
    baseline mean (leaf means per spec, internal means the sum of their
    children's), so the null data matches the background priors exactly at
    every node and measurement behavior is isolated from model
    misspecification. Objects matching a planted description get the draws
    of the target concepts' subtrees inflated.
    """
    rng = np.random.default_rng(spec.seed)
    tree = _synthetic_tree(spec.tree_depth, spec.branching)
    leaf_ids = tree.leaves()
    leaf_names = [tree.name_of(c) for c in leaf_ids]

    if spec.leaf_means is not None:
        base = np.array([float(spec.leaf_means[n]) for n in leaf_names])
    else:
        base = np.exp(
            rng.uniform(
                math.log(spec.leaf_mean_low),
                math.log(spec.leaf_mean_high),
                size=len(leaf_ids),
            )
        )

    schema = []
    values: dict[str, np.ndarray] = {}
    n = spec.object_count
    for a in spec.attributes:
        schema.append(AttributeDescriptor(a.name, a.kind))
        if a.kind == "categorical":
            col = rng.choice(list(a.categories), size=n)
            values[a.name] = np.array([str(v) for v in col], dtype=object)
        elif a.kind == "boolean":
            values[a.name] = np.array(
                [bool(v) for v in rng.integers(0, 2, size=n)], dtype=object
            )
        else:
            values[a.name] = np.array(
                [float(v) for v in rng.uniform(a.low, a.high, size=n)],
                dtype=object,
            )

    dataset = Dataset(
        object_ids=[f"synth;{i}" for i in range(n)],
        schema=schema,
        values=values,
        counters=[{} for _ in range(n)],
        tree=tree,
    )

    # baseline means aggregate bottom-up so internal priors stay
    # hierarchy-consistent in expectation
    mean_counters = aggregate_counters(
        tree, {leaf_names[j]: base[j] for j in range(len(leaf_ids))}
    )
    concept_means = np.ones(len(tree))
    for cid, v in mean_counters.items():
        concept_means[cid] = max(float(v), 1.0)

    # per-object inflation multipliers over every concept
    inflation = np.ones((n, len(tree)))
    truth = GroundTruth(patterns=[])
    for planted in spec.planted:
        concept_ids = [tree.id_of(name) for name in planted.target_concepts]
        if not is_antichain(tree, concept_ids):
            raise EvaluationError("planted target concepts must form an antichain")
        pattern = SubgroupPattern(planted.selectors)
        mask = extent_mask(dataset, pattern)
        if not mask.any():
            raise EvaluationError(
                f"planted description {pattern} matches no object"
            )
        subtree = sorted(successors(tree, concept_ids))
        inflation[np.ix_(mask, subtree)] *= planted.inflation
        truth.patterns.append(
            {
                "description": str(pattern),
                "selectors": planted.selectors,
                "extent": set(np.flatnonzero(mask).tolist()),
                "concept_ids": set(concept_ids),
            }
        )

    lo, hi = spec.noise
    jitter = rng.uniform(lo, hi, size=(n, len(tree)))
    means = concept_means[np.newaxis, :] * jitter * inflation
    p = 1.0 / (1.0 + means)
    draws = rng.geometric(p) - 1  # support {0, 1, ...} with the wanted mean

    for i in range(n):
        dataset.counters[i] = {
            cid: int(draws[i, cid]) for cid in range(len(tree))
        }

    priors = PriorTable(
        means={cid: float(concept_means[cid]) for cid in range(len(tree))}
    )
    return dataset, priors, truth


DEFAULT_METHODS = (
    ("si", MEASURE_SI, False),
    ("si_no_update", MEASURE_SI_NO_UPDATE, False),
    ("cwracc", MEASURE_CWRACC, False),
    ("cwracc_pp", MEASURE_CWRACC, True),
    ("kl", MEASURE_KL, False),
    ("kl_pp", MEASURE_KL, True),
)


@dataclass
class MethodResult:
    label: str
    patterns: list[Pattern]
    mean_contrast: float
    redundancy: float


@dataclass
class ComparisonReport:
    results: list[MethodResult]

    def summary_rows(self) -> list[dict]:
        return [
            {
                "method": r.label,
                "patterns": len(r.patterns),
                "meanContrast": r.mean_contrast,
                "redundancy": r.redundancy,
            }
            for r in self.results
        ]

    def pattern_rows(self, tree: ConceptTree) -> list[dict]:
        rows = []
        for r in self.results:
            for rank, p in enumerate(r.patterns, start=1):
                rows.append(
                    {
                        "method": r.label,
                        "rank": rank,
                        "description": str(p.subgroup),
                        "antichain": p.antichain.render(tree),
                        "score": p.score,
                        "si": p.si,
                        "extentSize": p.extent_size,
                        "contrast": p.contrast if hasattr(p, "contrast") else "",
                    }
                )
        return rows

    def summary_csv(self) -> str:
        return _rows_to_csv(self.summary_rows())

    def patterns_csv(self, tree: ConceptTree) -> str:
        return _rows_to_csv(self.pattern_rows(tree))

    def markdown_table(self) -> str:
        lines = [
            "| method | patterns | mean contrast | redundancy |",
            "| --- | --- | --- | --- |",
        ]
        for r in self.results:
            lines.append(
                f"| {r.label} | {len(r.patterns)} | "
                f"{r.mean_contrast:.4f} | {r.redundancy:.4f} |"
            )
        return "\n".join(lines) + "\n"


def _rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_comparison(
    dataset: Dataset,
    priors: PriorTable,
    base_config: Optional[MinerConfig] = None,
    k: int = 20,
    methods: Sequence[tuple[str, str, bool]] = DEFAULT_METHODS,
) -> ComparisonReport:
    """Mine top-k with every method and compute the comparative metrics.

    Each method owns a fresh model; post-processed variants (``*_pp``) apply
    the Jaccard filter to their ranked output before the metrics.
    """
    if base_config is None:
        base_config = MinerConfig()
    results = []
    for label, measure, postprocess in methods:
        config = replace(base_config, measure=measure, threshold=k)
        patterns = sca_miner(dataset, priors, config)
        if postprocess:
            patterns = jaccard_postprocess(patterns, base_config.jaccard_threshold)
        for p in patterns:
            p.contrast = contrast(p, dataset, priors)  # type: ignore[attr-defined]
        mean_contrast = (
            float(np.mean([p.contrast for p in patterns])) if patterns else 0.0
        )
        results.append(
            MethodResult(
                label=label,
                patterns=patterns,
                mean_contrast=mean_contrast,
                redundancy=redundancy(patterns, dataset.tree),
            )
        )
    return ComparisonReport(results=results)
