"""Interestingness of (subgroup, antichain) candidates.

The headline measure divides the information carried by the communicated
buckets (negative log tail probability under the current beliefs) by the
cost of describing the pattern. CWRAcc and KL baselines live here too.

``ScoringContext`` is the vectorized face of the same formulas: it caches a
negative-log-tail tensor over (object, concept, bucket) and serves whole
per-concept score vectors to the search loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .background import BackgroundModel
from .hierarchy import ConceptTree, depth_counts
from .ingestion import Dataset, PriorTable
from .patterns import (
    Antichain,
    Pattern,
    PatternError,
    SubgroupPattern,
    extent_mask,
)

# Keeps the degenerate zero-cost description from dividing by zero.
DL_FLOOR = 1e-9

IC_TAIL = "tail"
IC_PRINTED = "printed"

MEASURE_SI = "si"
MEASURE_SI_NO_UPDATE = "si_no_update"
MEASURE_CWRACC = "cwracc"
MEASURE_KL = "kl"
MEASURES = (MEASURE_SI, MEASURE_SI_NO_UPDATE, MEASURE_CWRACC, MEASURE_KL)


@dataclass(frozen=True)
class MeasureParams:
    alpha: float = 0.2  # quantile order communicated to the analyst
    beta: float = 0.8  # weight of log subgroup size in the description cost
    gamma: float = 0.2  # weight of the selector count
    eta: float = 1.0  # weight of the antichain communication cost
    theta: float = 1.0  # antichain-size exponent of the CWRAcc baseline
    ic_mode: str = IC_TAIL

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise PatternError(f"alpha must be in (0, 1): {self.alpha}")
        if self.eta <= 0 or self.beta < 0 or self.gamma < 0:
            raise PatternError("DL weights must be non-negative with eta > 0")
        if self.ic_mode not in (IC_TAIL, IC_PRINTED):
            raise PatternError(f"unknown ic mode: {self.ic_mode!r}")


def quantile_bucket(values: Sequence[int], alpha: float) -> int:
    """Value at 1-based rank floor(alpha*n)+1 of the ascending sort.

    At least ceil((1-alpha)*n) of the values are >= the result.
    """
    vals = sorted(values)
    if not vals:
        raise PatternError("quantile of an empty multiset is undefined")
    return vals[int(math.floor(alpha * len(vals)))]


def information_content(
    model: BackgroundModel,
    dataset: Dataset,
    subgroup_objects: Iterable[int],
    antichain_ids: Iterable[int],
    alpha: float,
    ic_mode: str = IC_TAIL,
) -> tuple[float, dict[int, int]]:
    """Bits carried by communicating the subgroup's quantile buckets.

    Returns the total over objects and concepts together with the
    per-concept quantile map; infinite when some bucket has zero mass.
    """
    objects = sorted(set(subgroup_objects))
    if not objects:
        raise PatternError("subgroup must be non-empty")
    cap = model.bucket_cap
    quantiles: dict[int, int] = {}
    total = 0.0
    for cid in sorted(set(antichain_ids)):
        ys = [min(int(dataset.bucket_matrix[i, cid]), cap) for i in objects]
        q = quantile_bucket(ys, alpha)
        quantiles[cid] = q
        idx = model.bucket_index(q)
        for i in objects:
            row = model.object_matrix(i)[cid]
            prob = row[idx:].sum() if ic_mode == IC_TAIL else row[idx]
            if prob <= 0.0:
                return math.inf, quantiles
            total -= math.log2(prob)
    return total, quantiles


def description_length(
    subgroup: SubgroupPattern,
    extent_size: int,
    antichain_ids: Iterable[int],
    tree: ConceptTree,
    params: MeasureParams,
) -> float:
    """Communication cost: subgroup part times antichain part, floored."""
    ids = set(antichain_ids)
    if extent_size < 1 or not ids:
        raise PatternError("extent and antichain must be non-empty")
    depth = depth_counts(tree)
    subgroup_part = params.beta * math.log2(extent_size) + params.gamma * subgroup.norm
    antichain_part = params.eta * sum(1.0 + math.log2(depth[c]) for c in ids)
    return max(subgroup_part * antichain_part, DL_FLOOR)


def si_score(
    model: BackgroundModel,
    dataset: Dataset,
    subgroup: SubgroupPattern,
    antichain_ids: Iterable[int],
    params: MeasureParams,
) -> Pattern:
    """Score one candidate; empty extent or antichain yields the -inf marker."""
    ids = sorted(set(antichain_ids))
    rows = tuple(np.flatnonzero(extent_mask(dataset, subgroup)).tolist())
    if not rows or not ids:
        empty = Antichain(frozenset(), {})
        return Pattern(subgroup, empty, rows, 0.0, DL_FLOOR, -math.inf, -math.inf)
    ic, quantiles = information_content(
        model, dataset, rows, ids, params.alpha, params.ic_mode
    )
    dl = description_length(subgroup, len(rows), ids, dataset.tree, params)
    si = -math.inf if math.isinf(ic) else (0.0 if ic == 0.0 else ic / dl)
    antichain = Antichain(frozenset(ids), quantiles)
    return Pattern(subgroup, antichain, rows, ic, dl, si, si)


def cwracc(
    dataset: Dataset,
    priors: PriorTable,
    subgroup: SubgroupPattern,
    antichain_ids: Iterable[int],
    theta: float = 1.0,
) -> float:
    """Mean deviation of subgroup counters from the prior means, scaled by
    the antichain size to the -theta."""
    ids = sorted(set(antichain_ids))
    rows = np.flatnonzero(extent_mask(dataset, subgroup))
    if len(rows) == 0 or not ids:
        return -math.inf
    means = priors.as_vector(dataset.tree)
    devs = dataset.counter_matrix[np.ix_(rows, ids)].mean(axis=0) - means[ids]
    return float(devs.sum() / len(ids) ** theta)


def kl_score(
    dataset: Dataset,
    model: BackgroundModel,
    subgroup: SubgroupPattern,
    antichain_ids: Iterable[int],
) -> float:
    """Summed KL divergence of the subgroup's smoothed empirical bucket
    distributions from the shared priors."""
    ids = sorted(set(antichain_ids))
    rows = np.flatnonzero(extent_mask(dataset, subgroup))
    if len(rows) == 0 or not ids:
        return -math.inf
    nb = model.n_buckets
    total = 0.0
    for cid in ids:
        ys = np.clip(dataset.bucket_matrix[rows, cid], -1, model.bucket_cap) + 1
        counts = np.bincount(ys, minlength=nb).astype(np.float64)
        emp = (counts + 1.0) / (len(rows) + nb)
        prior = model.prior[cid]
        total += float(np.sum(emp * np.log2(emp / np.maximum(prior, 1e-300))))
    return total


class ScoringContext:
    """Vectorized per-concept scoring over a dataset/model pair.

    Caches the negative-log-tail tensor (objects x concepts x buckets) and
    per-concept description terms so one subgroup costs a sort plus a
    gather. Rows refresh lazily when the model revision of their object
    moves.
    """

    def __init__(
        self,
        dataset: Dataset,
        model: BackgroundModel,
        priors: PriorTable,
        params: MeasureParams,
    ):
        self.dataset = dataset
        self.model = model
        self.priors = priors
        self.params = params
        self.tree = dataset.tree
        n, k = len(dataset), len(self.tree)
        self.buckets = np.clip(dataset.bucket_matrix, -1, model.bucket_cap)
        self.bucket_idx = (self.buckets + 1).astype(np.int64)
        depth = depth_counts(self.tree).astype(np.float64)
        self.dl_antichain_terms = self.params.eta * (1.0 + np.log2(depth))
        self.prior_means = priors.as_vector(self.tree)
        self._neg_log_tail = np.empty((n, k, model.n_buckets), dtype=np.float64)
        self._row_revision = np.full(n, -1, dtype=np.int64)
        # CWRAcc deviations and KL terms only depend on static data
        self._counter_f = dataset.counter_matrix.astype(np.float64)
        self._log_prior = None

    def _tail_table(self, matrix: np.ndarray) -> np.ndarray:
        """neg log2 of suffix sums per row; index j is the tail at bucket j-1."""
        tails = np.cumsum(matrix[:, ::-1], axis=1)[:, ::-1]
        table = np.empty_like(tails)
        with np.errstate(divide="ignore"):
            np.log2(np.maximum(tails, 0.0), out=table)
        # index 0 is the full tail: force an exact zero cost
        table[:, 0] = 0.0
        return -table

    def refresh(self) -> None:
        """Pull rows whose object's belief changed since the last refresh."""
        prior_table = None
        for i in range(len(self.dataset)):
            rev = self.model.revision_of(i)
            if rev == self._row_revision[i]:
                continue
            mat = self.model.object_matrix(i)
            if mat is self.model.prior:
                if prior_table is None:
                    prior_table = self._tail_table(self.model.prior)
                self._neg_log_tail[i] = prior_table
            else:
                self._neg_log_tail[i] = self._tail_table(mat)
            self._row_revision[i] = rev

    def subgroup_quantiles(self, rows: np.ndarray) -> np.ndarray:
        """Per-concept quantile bucket of the subgroup's scale values."""
        sub = np.sort(self.buckets[rows], axis=0)
        rank = int(math.floor(self.params.alpha * len(rows)))
        return sub[rank]

    def concept_ic(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-concept information content and quantile for one subgroup."""
        q = self.subgroup_quantiles(rows)
        ic = _kernels.gather_bucket_sums(
            self._neg_log_tail[rows], (q + 1).astype(np.int64)
        )
        return ic, q

    def concept_cwracc(self, rows: np.ndarray) -> np.ndarray:
        """Per-concept deviation of the subgroup mean from the prior mean."""
        return self._counter_f[rows].mean(axis=0) - self.prior_means

    def concept_kl(self, rows: np.ndarray) -> np.ndarray:
        """Per-concept smoothed empirical-vs-prior KL over buckets."""
        nb = self.model.n_buckets
        k = len(self.tree)
        idx = self.bucket_idx[rows]
        counts = np.zeros((k, nb))
        for c in range(k):
            counts[c] = np.bincount(idx[:, c], minlength=nb)
        emp = (counts + 1.0) / (len(rows) + nb)
        if self._log_prior is None:
            self._log_prior = np.log2(np.maximum(self.model.prior, 1e-300))
        return np.sum(emp * (np.log2(emp) - self._log_prior), axis=1)

    def build_pattern(
        self,
        subgroup: SubgroupPattern,
        rows: np.ndarray,
        antichain_ids: Sequence[int],
        quantiles: np.ndarray,
        score: float,
    ) -> Pattern:
        ids = sorted(antichain_ids)
        q_map = {c: int(quantiles[c]) for c in ids}
        ic_vec, _ = self.concept_ic(rows)
        ic = float(ic_vec[ids].sum())
        dl = description_length(subgroup, len(rows), ids, self.tree, self.params)
        si = 0.0 if ic == 0.0 else ic / dl
        if math.isinf(ic):
            si = -math.inf
        return Pattern(
            subgroup,
            Antichain(frozenset(ids), q_map),
            tuple(int(i) for i in rows),
            ic,
            dl,
            si,
            score,
        )
