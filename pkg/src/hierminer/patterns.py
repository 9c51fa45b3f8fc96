"""Selectors, conjunctive subgroup descriptions and antichain patterns.

Descriptions are conjunctions of per-attribute restrictions ordered from
general to restrictive; the hierarchy side of a pattern is an antichain of
concepts with the communicated log2 buckets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Iterable, Optional, Sequence

import numpy as np

from .hierarchy import ConceptTree, is_antichain
from .ingestion import Dataset

log = logging.getLogger(__name__)


class PatternError(ValueError):
    pass


EQUALS = "equals"
IS_TRUE = "isTrue"
IS_FALSE = "isFalse"
AT_MOST = "atMost"
GREATER_THAN = "greaterThan"


@total_ordering
@dataclass(frozen=True)
class Selector:
    attribute: str
    form: str
    value: object = None  # category for equals, threshold for numeric forms

    def __str__(self) -> str:
        if self.form == EQUALS:
            return f"{self.attribute}={self.value}"
        if self.form == IS_TRUE:
            return f"{self.attribute}=True"
        if self.form == IS_FALSE:
            return f"{self.attribute}=False"
        if self.form == AT_MOST:
            return f"{self.attribute}≤{self.value:g}"
        return f"{self.attribute}>{self.value:g}"

    def _key(self):
        return (self.attribute, self.form, str(self.value))

    def __lt__(self, other: "Selector") -> bool:
        return self._key() < other._key()


def _numeric_column(dataset: Dataset, name: str) -> np.ndarray:
    col = dataset.values[name]
    return np.array(
        [math.nan if v is None else float(v) for v in col], dtype=np.float64
    )


def selector_mask(dataset: Dataset, sel: Selector) -> np.ndarray:
    """Boolean cover mask of one selector; missing values never match."""
    if sel.attribute not in dataset.values:
        raise PatternError(f"unknown attribute: {sel.attribute!r}")
    col = dataset.values[sel.attribute]
    if sel.form == EQUALS:
        return np.array([v is not None and v == sel.value for v in col], dtype=bool)
    if sel.form == IS_TRUE:
        return np.array([v is True for v in col], dtype=bool)
    if sel.form == IS_FALSE:
        return np.array([v is False for v in col], dtype=bool)
    num = _numeric_column(dataset, sel.attribute)
    with np.errstate(invalid="ignore"):
        if sel.form == AT_MOST:
            return num <= float(sel.value)
        if sel.form == GREATER_THAN:
            return num > float(sel.value)
    raise PatternError(f"unknown selector form: {sel.form!r}")


@dataclass(frozen=True)
class SubgroupPattern:
    """Conjunction of selectors, canonically ordered.

    Per attribute at most one equality / boolean form, one upper and one
    lower numeric bound; contradictory literals on the same attribute are
    rejected at construction.
    """

    selectors: tuple[Selector, ...]

    def __post_init__(self):
        object.__setattr__(self, "selectors", tuple(sorted(self.selectors)))
        seen: dict[tuple[str, str], Selector] = {}
        for sel in self.selectors:
            slot = sel.form if sel.form in (AT_MOST, GREATER_THAN) else "literal"
            key = (sel.attribute, slot)
            if key in seen and seen[key] != sel:
                raise PatternError(
                    f"conflicting selectors on {sel.attribute!r}: "
                    f"{seen[key]} vs {sel}"
                )
            seen[key] = sel

    @property
    def norm(self) -> int:
        """Number of listed selectors (an interval counts as two)."""
        return len(self.selectors)

    def with_selector(self, sel: Selector) -> "SubgroupPattern":
        return SubgroupPattern(self.selectors + (sel,))

    def restriction(self, attribute: str) -> dict:
        """The attribute's literal and numeric bounds within this pattern."""
        out: dict = {"literal": None, "upper": None, "lower": None}
        for sel in self.selectors:
            if sel.attribute != attribute:
                continue
            if sel.form == AT_MOST:
                out["upper"] = float(sel.value)
            elif sel.form == GREATER_THAN:
                out["lower"] = float(sel.value)
            else:
                out["literal"] = sel
        return out

    def attributes(self) -> set[str]:
        return {s.attribute for s in self.selectors}

    def __str__(self) -> str:
        if not self.selectors:
            return "(true)"
        return "(" + " ∧ ".join(str(s) for s in self.selectors) + ")"


EMPTY_PATTERN = SubgroupPattern(())


def extent_mask(dataset: Dataset, pattern: SubgroupPattern) -> np.ndarray:
    mask = np.ones(len(dataset), dtype=bool)
    for sel in pattern.selectors:
        mask &= selector_mask(dataset, sel)
    return mask


def extent(dataset: Dataset, pattern: SubgroupPattern) -> set[int]:
    """Indices of the objects covered by every selector of the pattern."""
    return set(np.flatnonzero(extent_mask(dataset, pattern)).tolist())


def refines(general: SubgroupPattern, specific: SubgroupPattern) -> bool:
    """True iff every restriction of ``general`` contains the corresponding
    restriction of ``specific`` (the general-to-restrictive order)."""
    for attr in general.attributes():
        g = general.restriction(attr)
        s = specific.restriction(attr)
        if g["literal"] is not None and s["literal"] != g["literal"]:
            return False
        if g["upper"] is not None and (s["upper"] is None or s["upper"] > g["upper"]):
            return False
        if g["lower"] is not None and (s["lower"] is None or s["lower"] < g["lower"]):
            return False
    return True


def generate_selectors(dataset: Dataset, bins: int = 5) -> list[Selector]:
    """The selector universe over the dataset's descriptive attributes.

    Categoricals get one equality per observed category, booleans both
    polarities, numerics threshold pairs at their equal-frequency cut
    points. Attributes with a single observed value yield nothing.
    """
    if bins < 2:
        raise PatternError(f"bins must be >= 2: {bins}")
    out: list[Selector] = []
    for desc in dataset.schema:
        col = dataset.values[desc.name]
        observed = [v for v in col if v is not None]
        if len(set(observed)) < 2:
            log.warning(
                "attribute %r has a single distinct value; no selectors", desc.name
            )
            continue
        if desc.kind == "categorical":
            out.extend(
                Selector(desc.name, EQUALS, v) for v in sorted(set(observed))
            )
        elif desc.kind == "boolean":
            out.append(Selector(desc.name, IS_TRUE))
            out.append(Selector(desc.name, IS_FALSE))
        else:
            vals = np.sort(np.array(observed, dtype=np.float64))
            qs = np.arange(1, bins) / bins
            cuts = sorted({float(np.quantile(vals, q, method="lower")) for q in qs})
            for c in cuts:
                out.append(Selector(desc.name, AT_MOST, c))
                out.append(Selector(desc.name, GREATER_THAN, c))
    return sorted(out)


def closure_delta(
    dataset: Dataset,
    objects: Iterable[int],
    selectors: Optional[Sequence[Selector]] = None,
) -> SubgroupPattern:
    """Most restrictive expressible pattern covering the given objects.

    Numeric bounds snap to the selector universe (tightest thresholds that
    still contain the objects' [min, max]); attributes with a missing value
    among the objects stay unrestricted.
    """
    objects = sorted(set(objects))
    if not objects:
        raise PatternError("closure of an empty object set is undefined")
    if selectors is None:
        selectors = generate_selectors(dataset)
    chosen: list[Selector] = []
    for desc in dataset.schema:
        vals = [dataset.values[desc.name][i] for i in objects]
        if any(v is None for v in vals):
            continue
        if desc.kind == "categorical":
            if len(set(vals)) == 1:
                chosen.append(Selector(desc.name, EQUALS, vals[0]))
        elif desc.kind == "boolean":
            if all(v is True for v in vals):
                chosen.append(Selector(desc.name, IS_TRUE))
            elif all(v is False for v in vals):
                chosen.append(Selector(desc.name, IS_FALSE))
        else:
            lo, hi = min(vals), max(vals)
            uppers = [
                float(s.value)
                for s in selectors
                if s.attribute == desc.name and s.form == AT_MOST
                and float(s.value) >= hi
            ]
            lowers = [
                float(s.value)
                for s in selectors
                if s.attribute == desc.name and s.form == GREATER_THAN
                and float(s.value) < lo
            ]
            if uppers:
                chosen.append(Selector(desc.name, AT_MOST, min(uppers)))
            if lowers:
                chosen.append(Selector(desc.name, GREATER_THAN, max(lowers)))
    return SubgroupPattern(tuple(chosen))


@dataclass(frozen=True)
class Antichain:
    """Pairwise incomparable concepts with their communicated buckets."""

    concept_ids: frozenset[int]
    quantile_buckets: dict[int, int] = field(hash=False, default_factory=dict)

    def __post_init__(self):
        if set(self.quantile_buckets) != set(self.concept_ids):
            raise PatternError("quantile buckets must cover exactly the members")

    def validate(self, tree: ConceptTree) -> None:
        if not is_antichain(tree, self.concept_ids):
            raise PatternError("concepts do not form an antichain")

    def __len__(self) -> int:
        return len(self.concept_ids)

    def render(self, tree: ConceptTree) -> str:
        parts = sorted(
            f"{tree.name_of(c)}@{self.quantile_buckets[c]}" for c in self.concept_ids
        )
        return "{" + ", ".join(parts) + "}"


@dataclass
class Pattern:
    """A mined (subgroup description, contrastive antichain) pair."""

    subgroup: SubgroupPattern
    antichain: Antichain
    extent_indices: tuple[int, ...]
    ic: float
    dl: float
    si: float
    score: float = math.nan  # measure used during mining (si for SI runs)

    @property
    def extent_size(self) -> int:
        return len(self.extent_indices)

    def render(self, tree: ConceptTree) -> str:
        return f"{self.subgroup} ⇒ {self.antichain.render(tree)}"
