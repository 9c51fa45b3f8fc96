"""Concept tree over package/class names and its order-theoretic helpers.

Internal nodes are packages, leaves are classes; a synthetic root sits above
all top-level packages so the tree stays connected. Node ids are assigned by
depth-first traversal of lexicographically sorted names, so identical inputs
always yield identical trees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ROOT_NAME = "<heap>"

# Bucket used for a zero counter; ordered below every log2 bucket.
EMPTY_BUCKET = -1


class HierarchyError(ValueError):
    """Raised for malformed names or ids outside the tree."""


def split_qualified_name(name: str) -> tuple[str, ...]:
    """Split a dotted name into segments.

    JVM array encodings ("[C", "[Ljava.lang.Object;") contain dots that are
    not package separators, so a segment starting with '[' absorbs the rest
    of the name.
    """
    if not name or name == ROOT_NAME:
        raise HierarchyError(f"invalid qualified name: {name!r}")
    raw = name.split(".")
    segments: list[str] = []
    for i, seg in enumerate(raw):
        if not seg:
            raise HierarchyError(f"empty segment in qualified name: {name!r}")
        if seg.startswith("["):
            segments.append(".".join(raw[i:]))
            return tuple(segments)
        segments.append(seg)
    return tuple(segments)


@dataclass(frozen=True)
class Concept:
    id: int
    qualified_name: str
    parent_id: int | None
    child_ids: tuple[int, ...]


@dataclass
class ConceptTree:
    """Global package/class hierarchy shared by every snapshot."""

    concepts: list[Concept]
    root_id: int = 0
    _by_name: dict[str, int] = field(default_factory=dict, repr=False)
    _parents: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    _depth_counts: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        self._by_name = {c.qualified_name: c.id for c in self.concepts}
        parents = np.full(len(self.concepts), -1, dtype=np.int64)
        for c in self.concepts:
            if c.parent_id is not None:
                parents[c.id] = c.parent_id
        self._parents = parents
        depths = np.zeros(len(self.concepts), dtype=np.int64)
        for c in self.concepts:  # ids are topological (DFS from root)
            depths[c.id] = 1 if c.parent_id is None else depths[c.parent_id] + 1
        self._depth_counts = depths

    def __len__(self) -> int:
        return len(self.concepts)

    @property
    def parent_ids(self) -> np.ndarray:
        """Parent id per node, -1 at the root; ids are parent-before-child."""
        return self._parents

    def id_of(self, qualified_name: str) -> int:
        try:
            return self._by_name[qualified_name]
        except KeyError:
            raise HierarchyError(f"unknown concept: {qualified_name!r}") from None

    def name_of(self, concept_id: int) -> str:
        return self.concepts[concept_id].qualified_name

    def __contains__(self, qualified_name: str) -> bool:
        return qualified_name in self._by_name

    def children(self, concept_id: int) -> tuple[int, ...]:
        return self.concepts[concept_id].child_ids

    def leaves(self) -> list[int]:
        return [c.id for c in self.concepts if not c.child_ids]

    def _check_ids(self, ids: Iterable[int]) -> None:
        n = len(self.concepts)
        for i in ids:
            if not 0 <= i < n:
                raise HierarchyError(f"concept id out of range: {i}")


def build_tree(qualified_names: Iterable[str]) -> ConceptTree:
    """Build the concept tree spanning every dotted prefix of the inputs.

    One node per distinct prefix plus the synthetic root; ids follow a
    depth-first traversal with lexicographically sorted siblings.
    """
    # name -> children mapping keyed by segment tuples
    children_of: dict[tuple[str, ...], set[str]] = {(): set()}
    for name in qualified_names:
        segs = split_qualified_name(name)
        for i in range(len(segs)):
            prefix = segs[:i]
            children_of.setdefault(prefix, set()).add(segs[i])
            children_of.setdefault(segs[: i + 1], set())

    concepts: list[Concept] = []
    child_lists: dict[int, list[int]] = {}

    def add(segs: tuple[str, ...], parent_id: int | None) -> int:
        cid = len(concepts)
        name = ROOT_NAME if not segs else ".".join(segs)
        concepts.append(Concept(cid, name, parent_id, ()))
        child_lists[cid] = []
        if parent_id is not None:
            child_lists[parent_id].append(cid)
        for seg in sorted(children_of[segs]):
            add(segs + (seg,), cid)
        return cid

    add((), None)
    finished = [
        Concept(c.id, c.qualified_name, c.parent_id, tuple(child_lists[c.id]))
        for c in concepts
    ]
    return ConceptTree(finished)


def aggregate_counters(
    tree: ConceptTree, leaf_counters: Mapping[str, int]
) -> dict[int, int]:
    """Sum counters bottom-up so each node holds its subtree total.

    Values attached to internal names count as a self-contribution on top of
    the children's sum. Returns a sparse id -> value mapping; zero-total
    nodes on untouched branches are still materialized along touched paths.
    """
    totals: dict[int, int] = {}
    for name, value in leaf_counters.items():
        if value < 0:
            raise HierarchyError(f"negative counter for {name!r}: {value}")
        cid: int | None = tree.id_of(name)
        while cid is not None:
            totals[cid] = totals.get(cid, 0) + int(value)
            parent = tree.concepts[cid].parent_id
            cid = parent
    return totals


def predecessors(tree: ConceptTree, concept_ids: Iterable[int]) -> set[int]:
    """All ancestors of the members, members included (the up-set)."""
    ids = set(concept_ids)
    tree._check_ids(ids)
    out: set[int] = set()
    for cid in ids:
        cur: int | None = cid
        while cur is not None and cur not in out:
            out.add(cur)
            cur = tree.concepts[cur].parent_id
    return out


def successors(tree: ConceptTree, concept_ids: Iterable[int]) -> set[int]:
    """Members plus all their descendants (the down-set)."""
    ids = set(concept_ids)
    tree._check_ids(ids)
    out: set[int] = set()
    stack = list(ids)
    while stack:
        cid = stack.pop()
        if cid in out:
            continue
        out.add(cid)
        stack.extend(tree.concepts[cid].child_ids)
    return out


def is_antichain(tree: ConceptTree, concept_ids: Iterable[int]) -> bool:
    """True iff no member lies on another member's root path."""
    ids = set(concept_ids)
    tree._check_ids(ids)
    for cid in ids:
        cur = tree.concepts[cid].parent_id
        while cur is not None:
            if cur in ids:
                return False
            cur = tree.concepts[cur].parent_id
    return True


def depth_count(tree: ConceptTree, concept_id: int) -> int:
    """Number of nodes on the root path, the node itself included."""
    tree._check_ids([concept_id])
    return int(tree._depth_counts[concept_id])


def depth_counts(tree: ConceptTree) -> np.ndarray:
    """Vector of depth_count over all nodes, indexed by id."""
    return tree._depth_counts.copy()


def scale(x: int) -> int:
    """Order-of-magnitude bucket of a counter: floor(log2 x), -1 for zero."""
    if x < 0:
        raise HierarchyError(f"counter must be non-negative: {x}")
    if x == 0:
        return EMPTY_BUCKET
    return int(x).bit_length() - 1


def scale_array(values: np.ndarray) -> np.ndarray:
    """Vectorized scale() for a non-negative integer array."""
    values = np.asarray(values)
    if np.any(values < 0):
        raise HierarchyError("counters must be non-negative")
    out = np.full(values.shape, EMPTY_BUCKET, dtype=np.int64)
    pos = values > 0
    out[pos] = np.floor(np.log2(values[pos].astype(np.float64))).astype(np.int64)
    # float log2 can misround near exact powers of two; fix up both ways
    too_high = pos & (2.0 ** out.clip(min=0) > values)
    out[too_high] -= 1
    too_low = pos & (2.0 ** (out + 1) <= values)
    out[too_low] += 1
    return out


def comparability_sets(tree: ConceptTree) -> list[np.ndarray]:
    """Per node: boolean mask over ids of everything comparable to it."""
    n = len(tree)
    masks = []
    for cid in range(n):
        mask = np.zeros(n, dtype=bool)
        for a in predecessors(tree, [cid]):
            mask[a] = True
        for d in successors(tree, [cid]):
            mask[d] = True
        masks.append(mask)
    return masks
