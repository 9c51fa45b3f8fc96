"""Per-(snapshot, concept) belief distributions over log2 buckets.

Beliefs start as maximum-entropy geometric distributions derived from
healthy-server mean sizes, get conditioned whenever a pattern is shown to
the analyst, and are kept consistent with the parent-at-least-child counter
ordering by exact message passing on the concept tree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .hierarchy import ConceptTree

log = logging.getLogger(__name__)

PropagationError = _kernels.PropagationError

DEFAULT_BUCKET_CAP = 50

PROB_TOL = 1e-9


class ModelError(ValueError):
    pass


def geometric_bucket_distribution(mean: float, bucket_cap: int) -> np.ndarray:
    """Bucket masses of a geometric counter with the given mean.

    Index 0 is the empty bucket (counter zero), index q+1 covers counters in
    [2^q, 2^(q+1)); the last bucket closes the tail. The vector telescopes
    to exactly 1.
    """
    if mean <= 0:
        raise ModelError(f"mean must be positive: {mean}")
    if bucket_cap < 1:
        raise ModelError(f"bucket cap must be >= 1: {bucket_cap}")
    p = 1.0 / (1.0 + mean)
    # (1-p)^(2^q) computed in log space to survive huge exponents
    log1mp = np.log1p(-p)
    exponents = 2.0 ** np.arange(bucket_cap + 1)
    surv = np.exp(exponents * log1mp)  # survivor at each bucket boundary
    probs = np.empty(bucket_cap + 2)
    probs[0] = p
    probs[1:-1] = surv[:-1] - surv[1:]
    probs[-1] = surv[-1]
    return probs


def geometric_matrix(means: np.ndarray, bucket_cap: int) -> np.ndarray:
    """Stack of geometric bucket distributions, one row per mean."""
    means = np.asarray(means, dtype=np.float64)
    if np.any(means <= 0):
        raise ModelError("all prior means must be positive")
    p = 1.0 / (1.0 + means)
    log1mp = np.log1p(-p)
    exponents = 2.0 ** np.arange(bucket_cap + 1)
    surv = np.exp(exponents[np.newaxis, :] * log1mp[:, np.newaxis])
    probs = np.empty((len(means), bucket_cap + 2))
    probs[:, 0] = p
    probs[:, 1:-1] = surv[:, :-1] - surv[:, 1:]
    probs[:, -1] = surv[:, -1]
    return probs


@dataclass
class BackgroundModel:
    """Belief state for every (object, concept) pair.

    Objects share the prior rows until a pattern update touches them; the
    first update copies the prior matrix into a per-object override.
    ``revision`` counters let scoring caches refresh only stale rows.
    """

    prior: np.ndarray  # (concepts, bucket_cap + 2)
    bucket_cap: int
    overrides: dict[int, np.ndarray] = field(default_factory=dict)
    revisions: dict[int, int] = field(default_factory=dict)
    _revision_counter: int = 0
    _dirty: set[int] = field(default_factory=set)

    @classmethod
    def from_prior_means(
        cls, means: np.ndarray, bucket_cap: int = DEFAULT_BUCKET_CAP
    ) -> "BackgroundModel":
        means = np.asarray(means, dtype=np.float64)
        prior = geometric_matrix(means, bucket_cap)
        # the closing bucket must already be negligible for every prior
        if np.any(prior[:, -1] >= 1e-12):
            raise ModelError(
                f"bucket cap {bucket_cap} too small for the largest prior mean"
            )
        return cls(prior=prior, bucket_cap=bucket_cap)

    @property
    def n_buckets(self) -> int:
        return self.bucket_cap + 2

    def bucket_index(self, bucket: int) -> int:
        """Array index of a bucket value (-1 maps to 0)."""
        if not -1 <= bucket <= self.bucket_cap:
            raise ModelError(f"bucket out of range: {bucket}")
        return bucket + 1

    def distribution(self, object_id: int, concept_id: int) -> np.ndarray:
        """Current belief for one (object, concept) pair."""
        mat = self.overrides.get(object_id)
        row = self.prior[concept_id] if mat is None else mat[concept_id]
        return row.copy()

    def object_matrix(self, object_id: int) -> np.ndarray:
        """Current belief rows for every concept of one object (read-only)."""
        mat = self.overrides.get(object_id)
        return self.prior if mat is None else mat

    def revision_of(self, object_id: int) -> int:
        return self.revisions.get(object_id, 0)

    def tail_probability(self, object_id: int, concept_id: int, bucket: int) -> float:
        """Pr(Y >= bucket) under the current belief; 1.0 at the empty bucket."""
        idx = self.bucket_index(bucket)
        row = self.object_matrix(object_id)[concept_id]
        return float(row[idx:].sum())

    def _touch(self, object_id: int) -> np.ndarray:
        mat = self.overrides.get(object_id)
        if mat is None:
            mat = self.prior.copy()
            self.overrides[object_id] = mat
        self._revision_counter += 1
        self.revisions[object_id] = self._revision_counter
        self._dirty.add(object_id)
        return mat

    def set_distribution(
        self, object_id: int, concept_id: int, probs: np.ndarray
    ) -> None:
        """Overwrite one belief row directly (evidence injection)."""
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (self.n_buckets,) or np.any(probs < 0):
            raise ModelError("invalid distribution vector")
        mat = self._touch(object_id)
        mat[concept_id] = probs

    def apply_pattern_update(
        self,
        subgroup_objects: set[int],
        quantiles: dict[int, int],
        alpha: float,
    ) -> None:
        """Condition beliefs so Pr(Y >= quantile) becomes exactly 1 - alpha.

        ``quantiles`` maps concept id to the communicated bucket. Pairs whose
        current tail is already 0 or 1 are skipped with a warning, since the
        conditioning is contradictory or vacuous there.
        """
        if not 0.0 < alpha < 1.0:
            raise ModelError(f"alpha must be in (0, 1): {alpha}")
        items = [(c, self.bucket_index(t)) for c, t in quantiles.items()]
        for obj in sorted(subgroup_objects):
            mat = self._touch(obj)
            for concept_id, idx in items:
                row = mat[concept_id]
                tail = row[idx:].sum()
                if tail <= 0.0 or tail >= 1.0:
                    log.warning(
                        "skipping degenerate update: object %s concept %s tail %.3g",
                        obj, concept_id, tail,
                    )
                    continue
                row[idx:] *= (1.0 - alpha) / tail
                row[:idx] *= alpha / (1.0 - tail)

    def propagate(self, tree: ConceptTree, touched_objects: set[int]) -> None:
        """Restore tree consistency for the touched objects.

        Replaces each touched object's beliefs with the exact marginals of
        the tree model whose node potentials are the current beliefs and
        whose edges force parent buckets >= child buckets. A second call
        with no intervening update is a no-op, so propagation is idempotent.
        """
        parents = tree.parent_ids
        for obj in sorted(touched_objects):
            if obj not in self._dirty:
                continue
            mat = self._touch(obj)
            try:
                marginals = _kernels.sum_product_tree(mat, parents)
            except PropagationError as exc:
                raise PropagationError(f"object {obj}: {exc}") from exc
            np.copyto(mat, marginals)
            self._dirty.discard(obj)

    def export_state(self, tree: ConceptTree) -> dict:
        """JSON-ready snapshot for resumable sessions."""
        names = [c.qualified_name for c in tree.concepts]
        return {
            "bucketCap": self.bucket_cap,
            "prior": {names[c]: self.prior[c].tolist() for c in range(len(names))},
            "overrides": {
                str(obj): {names[c]: mat[c].tolist() for c in range(len(names))}
                for obj, mat in sorted(self.overrides.items())
            },
        }

    @classmethod
    def import_state(cls, payload: dict, tree: ConceptTree) -> "BackgroundModel":
        bucket_cap = int(payload["bucketCap"])
        k = len(tree)
        prior = np.zeros((k, bucket_cap + 2))
        for name, probs in payload["prior"].items():
            prior[tree.id_of(name)] = probs
        model = cls(prior=prior, bucket_cap=bucket_cap)
        for obj_str, rows in payload.get("overrides", {}).items():
            mat = prior.copy()
            for name, probs in rows.items():
                mat[tree.id_of(name)] = probs
            obj = int(obj_str)
            model.overrides[obj] = mat
            model._revision_counter += 1
            model.revisions[obj] = model._revision_counter
        return model
