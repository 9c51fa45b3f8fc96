"""Search for interesting patterns: beam over descriptions, greedy antichains,
and the iterative communicate-then-update loop.

Candidate scoring inside one beam level reads a frozen belief snapshot; the
model is only mutated between levels, after a pattern has been emitted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .background import DEFAULT_BUCKET_CAP, BackgroundModel
from .hierarchy import comparability_sets
from .ingestion import Dataset, PriorTable
from .patterns import Antichain, Pattern, PatternError, SubgroupPattern, extent_mask
from .scoring import (
    MEASURE_CWRACC,
    MEASURE_KL,
    MEASURE_SI,
    MEASURE_SI_NO_UPDATE,
    MEASURES,
    MeasureParams,
    ScoringContext,
    description_length,
)
from .patterns import generate_selectors

log = logging.getLogger(__name__)

SI_TOL = 1e-12


class MinerError(ValueError):
    pass


@dataclass(frozen=True)
class MinerConfig:
    width: int = 50
    depth: int = 4
    threshold: int = 20  # max patterns to emit
    measure: str = MEASURE_SI
    params: MeasureParams = field(default_factory=MeasureParams)
    bins: int = 5
    jaccard_threshold: float = 0.5
    bucket_cap: int = DEFAULT_BUCKET_CAP
    random_seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.depth < 1 or self.threshold < 1:
            raise MinerError("width, depth and threshold must all be >= 1")
        if self.measure not in MEASURES:
            raise MinerError(f"unknown measure: {self.measure!r}")


class _GreedyScorer:
    """Per-subgroup greedy antichain construction for one measure."""

    def __init__(self, ctx: ScoringContext, measure: str):
        self.ctx = ctx
        self.measure = measure
        self.comparable = np.array(comparability_sets(ctx.tree))

    def best_antichain(
        self, subgroup: SubgroupPattern, rows: np.ndarray
    ) -> tuple[list[int], np.ndarray, float]:
        """Grow an antichain while the measure strictly improves.

        Returns (members, per-concept quantiles, achieved score); members may
        be empty when no concept contributes a finite positive score.
        """
        ctx = self.ctx
        if self.measure in (MEASURE_SI, MEASURE_SI_NO_UPDATE):
            ic, q = ctx.concept_ic(rows)
            per_concept = ic
        elif self.measure == MEASURE_CWRACC:
            per_concept = ctx.concept_cwracc(rows)
            q = ctx.subgroup_quantiles(rows)
        else:
            per_concept = ctx.concept_kl(rows)
            q = ctx.subgroup_quantiles(rows)

        available = np.isfinite(per_concept)
        chosen: list[int] = []
        acc = 0.0  # summed per-concept contribution of the members
        dl_acc = 0.0
        subgroup_cost = (
            ctx.params.beta * math.log2(len(rows))
            + ctx.params.gamma * subgroup.norm
        )
        best_score = -math.inf
        while np.any(available):
            if self.measure in (MEASURE_SI, MEASURE_SI_NO_UPDATE):
                denom = np.maximum(
                    subgroup_cost * (dl_acc + ctx.dl_antichain_terms), 1e-9
                )
                cand = (acc + per_concept) / denom
            elif self.measure == MEASURE_CWRACC:
                cand = (acc + per_concept) / (len(chosen) + 1) ** ctx.params.theta
            else:
                cand = acc + per_concept
            cand = np.where(available, cand, -math.inf)
            pick = int(np.argmax(cand))
            score = float(cand[pick])
            if not math.isfinite(score) or score <= best_score + SI_TOL:
                break
            if not chosen and score <= 0.0:
                break
            chosen.append(pick)
            best_score = score
            acc += float(per_concept[pick])
            dl_acc += float(ctx.dl_antichain_terms[pick])
            available &= ~self.comparable[pick]
        return chosen, q, best_score


def greedy_antichain(
    model: BackgroundModel,
    dataset: Dataset,
    priors: PriorTable,
    subgroup: SubgroupPattern,
    params: MeasureParams,
) -> Antichain:
    """Best-effort antichain for one subgroup under the SI measure."""
    rows = np.flatnonzero(extent_mask(dataset, subgroup))
    if len(rows) == 0:
        raise MinerError("subgroup extent is empty")
    ctx = ScoringContext(dataset, model, priors, params)
    ctx.refresh()
    chosen, q, _ = _GreedyScorer(ctx, MEASURE_SI).best_antichain(subgroup, rows)
    return Antichain(frozenset(chosen), {c: int(q[c]) for c in chosen})


def _beam_key(item: tuple[float, Pattern]):
    score, pattern = item
    return (-score, pattern.subgroup.norm, str(pattern.subgroup))


def beam_search(
    ctx: ScoringContext,
    selectors: Sequence,
    config: MinerConfig,
    collect: Optional[list[Pattern]] = None,
) -> Optional[Pattern]:
    """Level-wise beam over selector conjunctions.

    Every candidate is paired with its greedy antichain and scored with the
    configured measure; the best finite-scored pattern with a non-empty
    antichain wins. ``collect`` (if given) receives every distinct scored
    candidate, for single-pass baselines.
    """
    scorer = _GreedyScorer(ctx, config.measure)
    n = len(ctx.dataset)

    def score_candidate(subgroup: SubgroupPattern, mask: np.ndarray):
        rows = np.flatnonzero(mask)
        if len(rows) == 0:
            return None
        chosen, q, score = scorer.best_antichain(subgroup, rows)
        if not chosen or not math.isfinite(score):
            return None
        pattern = ctx.build_pattern(subgroup, rows, chosen, q, score)
        return pattern

    seen: set[tuple] = set()
    beam: list[tuple[float, Pattern, np.ndarray]] = []
    best: Optional[Pattern] = None

    def consider(subgroup: SubgroupPattern, mask: np.ndarray, level_items: list):
        key = subgroup.selectors
        if key in seen:
            return
        seen.add(key)
        scored = score_candidate(subgroup, mask)
        if scored is None:
            return
        level_items.append((scored.score, scored, mask))
        if collect is not None:
            collect.append(scored)
        nonlocal best
        if best is None or (scored.score, -scored.subgroup.norm) > (
            best.score, -best.subgroup.norm
        ):
            best = scored

    sel_masks = [extent_mask(ctx.dataset, SubgroupPattern((s,))) for s in selectors]

    level_items: list = []
    for sel, mask in zip(selectors, sel_masks):
        consider(SubgroupPattern((sel,)), mask, level_items)
    level_items.sort(key=lambda t: (-t[0], t[1].subgroup.norm, str(t[1].subgroup)))
    beam = level_items[: config.width]

    for _ in range(1, config.depth):
        level_items = []
        for _, pattern, mask in beam:
            for sel, smask in zip(selectors, sel_masks):
                if sel in pattern.subgroup.selectors:
                    continue
                try:
                    refined = pattern.subgroup.with_selector(sel)
                except PatternError:
                    continue
                consider(refined, mask & smask, level_items)
        if not level_items:
            break
        level_items.sort(
            key=lambda t: (-t[0], t[1].subgroup.norm, str(t[1].subgroup))
        )
        beam = level_items[: config.width]
    return best


def jaccard(a: Sequence[int], b: Sequence[int]) -> float:
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return float("nan")
    return len(sa & sb) / len(union)


def jaccard_postprocess(
    patterns: Sequence[Pattern], threshold: float
) -> list[Pattern]:
    """Drop patterns whose extent overlaps a previously kept one too much."""
    kept: list[Pattern] = []
    for p in patterns:
        if all(
            jaccard(p.extent_indices, k.extent_indices) < threshold for k in kept
        ):
            kept.append(p)
    return kept


def _same_pattern(a: Pattern, b: Pattern) -> bool:
    """Same communicated content: description, anchors, and quantiles."""
    return (
        a.subgroup.selectors == b.subgroup.selectors
        and a.antichain.quantile_buckets == b.antichain.quantile_buckets
    )


def sca_miner(
    dataset: Dataset,
    priors: PriorTable,
    config: MinerConfig,
    model: Optional[BackgroundModel] = None,
) -> list[Pattern]:
    """The full mine-communicate-update loop.

    With the SI measure each emitted pattern conditions the beliefs of its
    extent on the communicated quantiles before the next search. The
    no-update variant runs the same loop but never conditions the model, so
    every iteration re-elects the same winner. CWRAcc and KL run a single
    beam pass and emit their top patterns by score.
    """
    if model is None:
        model = BackgroundModel.from_prior_means(
            priors.as_vector(dataset.tree), config.bucket_cap
        )
    ctx = ScoringContext(dataset, model, priors, config.params)
    selectors = generate_selectors(dataset, config.bins)
    if not selectors:
        return []

    if config.measure not in (MEASURE_SI, MEASURE_SI_NO_UPDATE):
        collected: list[Pattern] = []
        ctx.refresh()
        beam_search(ctx, selectors, config, collect=collected)
        collected.sort(key=lambda p: (-p.score, p.subgroup.norm, str(p.subgroup)))
        return collected[: config.threshold]

    if config.measure == MEASURE_SI_NO_UPDATE:
        # With no update the model is identical every iteration, so each
        # round of the loop re-discovers the same best pattern.
        ctx.refresh()
        best = beam_search(ctx, selectors, config)
        if best is None or best.score <= 0.0:
            return []
        return [best] * config.threshold

    emitted: list[Pattern] = []
    while len(emitted) < config.threshold:
        ctx.refresh()
        collected: list[Pattern] = []
        best = beam_search(ctx, selectors, config, collect=collected)
        if best is None or best.score <= 0.0:
            break
        if emitted and _same_pattern(best, emitted[-1]):
            # The update leaves a small irreducible score on the pattern
            # just communicated; prefer a fresh finding when one exists.
            alternatives = [
                p
                for p in collected
                if p.score > 0.0 and not _same_pattern(p, emitted[-1])
            ]
            if alternatives:
                alternatives.sort(
                    key=lambda p: (-p.score, p.subgroup.norm, str(p.subgroup))
                )
                best = alternatives[0]
        emitted.append(best)
        touched = set(best.extent_indices)
        model.apply_pattern_update(
            touched, best.antichain.quantile_buckets, config.params.alpha
        )
        model.propagate(dataset.tree, touched)
    return emitted
