"""Parsing of jmap histograms and assembly of the unified dataset.

Brings together the three sources: per-snapshot ``jmap -histo`` text, a CSV
of descriptive attributes, and reference histograms from healthy servers
that seed the prior means.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hierarchy import (
    ConceptTree,
    aggregate_counters,
    build_tree,
    scale_array,
)

log = logging.getLogger(__name__)

ARRAYS_PACKAGE = "<arrays>"

# One unit of prior mean for concepts never seen healthy: the geometric
# parameter is undefined at mean zero, and an unseen concept should be
# maximally surprising at any positive size.
PRIOR_FLOOR = 1.0

ATTRIBUTE_KINDS = ("categorical", "numeric", "boolean")


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class ClassRecord:
    rank: int
    instances: int
    bytes: int
    class_name: str


@dataclass(frozen=True)
class AttributeDescriptor:
    name: str
    kind: str  # categorical | numeric | boolean


@dataclass
class PriorTable:
    """Mean healthy size per concept, floored at a positive minimum."""

    means: dict[int, float]

    def as_vector(self, tree: ConceptTree) -> np.ndarray:
        out = np.full(len(tree), PRIOR_FLOOR)
        for cid, mean in self.means.items():
            out[cid] = max(mean, PRIOR_FLOOR)
        return out

    def to_json(self, tree: ConceptTree) -> dict:
        return {tree.name_of(c): m for c, m in sorted(self.means.items())}

    @classmethod
    def from_json(cls, payload: Mapping[str, float], tree: ConceptTree) -> "PriorTable":
        means = {}
        for name, mean in payload.items():
            if name not in tree:
                log.warning("prior for unknown concept %r ignored", name)
                continue
            means[tree.id_of(name)] = float(mean)
        return cls(means=means)


@dataclass
class Dataset:
    """Snapshots with descriptive attributes and per-concept counters."""

    object_ids: list[str]
    schema: list[AttributeDescriptor]
    values: dict[str, np.ndarray]  # attribute name -> per-object values
    counters: list[dict[int, int]]  # sparse concept id -> value, aggregated
    tree: ConceptTree
    _counter_matrix: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    _bucket_matrix: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.object_ids)

    @property
    def counter_matrix(self) -> np.ndarray:
        """Dense (objects x concepts) counter values, missing = 0."""
        if self._counter_matrix is None:
            mat = np.zeros((len(self), len(self.tree)), dtype=np.int64)
            for i, sparse in enumerate(self.counters):
                for cid, value in sparse.items():
                    mat[i, cid] = value
            self._counter_matrix = mat
        return self._counter_matrix

    @property
    def bucket_matrix(self) -> np.ndarray:
        """Dense (objects x concepts) log2 buckets of the counters."""
        if self._bucket_matrix is None:
            self._bucket_matrix = scale_array(self.counter_matrix)
        return self._bucket_matrix

    def to_json(self) -> dict:
        objects = []
        for i, oid in enumerate(self.object_ids):
            attrs = {}
            for desc in self.schema:
                v = self.values[desc.name][i]
                if v is None or (isinstance(v, float) and math.isnan(v)):
                    attrs[desc.name] = None
                elif desc.kind == "numeric":
                    attrs[desc.name] = float(v)
                elif desc.kind == "boolean":
                    attrs[desc.name] = bool(v)
                else:
                    attrs[desc.name] = str(v)
            counters = {
                self.tree.name_of(cid): int(v)
                for cid, v in sorted(self.counters[i].items())
                if cid != self.tree.root_id
            }
            objects.append({"id": oid, "attrs": attrs, "counters": counters})
        return {
            "schema": [{"name": d.name, "kind": d.kind} for d in self.schema],
            "objects": objects,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "Dataset":
        schema = [
            AttributeDescriptor(d["name"], d["kind"]) for d in payload["schema"]
        ]
        for d in schema:
            if d.kind not in ATTRIBUTE_KINDS:
                raise IngestionError(f"unknown attribute kind: {d.kind!r}")
        objects = payload["objects"]
        names = sorted({n for o in objects for n in o["counters"]})
        tree = build_tree(names)
        object_ids, counters = [], []
        values: dict[str, list] = {d.name: [] for d in schema}
        for o in objects:
            object_ids.append(o["id"])
            for d in schema:
                values[d.name].append(o["attrs"].get(d.name))
            sparse = {tree.id_of(n): int(v) for n, v in o["counters"].items()}
            counters.append(_complete_counters(tree, sparse, o["id"]))
        return cls(
            object_ids=object_ids,
            schema=schema,
            values={k: _column_array(v) for k, v in values.items()},
            counters=counters,
            tree=tree,
        )


def _column_array(values: list) -> np.ndarray:
    return np.array(values, dtype=object)


def _complete_counters(
    tree: ConceptTree, sparse: dict[int, int], object_id: str
) -> dict[int, int]:
    """Fill ancestors of explicit entries and check parent >= children sums."""
    out = dict(sparse)
    under_reported: list[int] = []
    # bottom-up over id order (children have larger ids than parents)
    for cid in sorted(out, reverse=True):
        parent = tree.concepts[cid].parent_id
        if parent is None:
            continue
        child_sum = sum(out.get(c, 0) for c in tree.concepts[parent].child_ids)
        if parent in out:
            if out[parent] < child_sum:
                under_reported.append(parent)
        else:
            out[parent] = child_sum
    # ancestors above the highest explicit entries
    for cid in sorted(out):
        parent = tree.concepts[cid].parent_id
        while parent is not None and parent not in out:
            out[parent] = sum(
                out.get(c, 0) for c in tree.concepts[parent].child_ids
            )
            parent = tree.concepts[parent].parent_id
    if under_reported:
        # external tables occasionally under-report aggregates (rounding);
        # keep the values verbatim but flag them once per object
        first = under_reported[0]
        warnings.warn(
            f"object {object_id}: {len(under_reported)} counter(s) below "
            f"their children's sum (e.g. {tree.name_of(first)!r})"
        )
    return out


_JMAP_ROW = re.compile(
    r"^\s*(\d+):\s+(\S+)\s+(\S+)\s+(\S+)(?:\s+\((\S+)\))?\s*$"
)
_JMAP_HEADER = re.compile(r"^\s*num\s+#instances\s+#bytes\s+class name", re.I)
_JMAP_TOTAL = re.compile(r"^\s*Total\s+(\d+)\s+(\d+)\s*$", re.I)


def parse_jmap(text: str) -> list[ClassRecord]:
    """Parse the stdout of ``jmap -histo`` into class records.

    Handles both the classic column layout and the JDK 9+ variant with a
    trailing ``(module@version)`` annotation. Header and Total footer are
    skipped; rows are returned in file order.
    """
    records: list[ClassRecord] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if _JMAP_HEADER.match(line) or set(stripped) <= {"-"}:
            continue
        if _JMAP_TOTAL.match(line):
            continue
        m = _JMAP_ROW.match(line)
        if m is None:
            raise IngestionError(f"line {lineno}: unrecognized jmap row: {line!r}")
        rank, instances, nbytes, name = m.group(1, 2, 3, 4)
        try:
            records.append(
                ClassRecord(int(rank), int(instances), int(nbytes), name)
            )
        except ValueError:
            raise IngestionError(
                f"line {lineno}: non-numeric instance/byte field: {line!r}"
            ) from None
    return records


def render_jmap(records: Sequence[ClassRecord], total: bool = True) -> str:
    """Render records back into jmap text (round-trip counterpart)."""
    lines = [" num     #instances         #bytes  class name"]
    lines.append("-" * 54)
    for r in records:
        lines.append(f"{r.rank:4d}: {r.instances:15d} {r.bytes:14d}  {r.class_name}")
    if total:
        lines.append(
            f"Total {sum(r.instances for r in records):15d} "
            f"{sum(r.bytes for r in records):14d}"
        )
    return "\n".join(lines) + "\n"


def truncate_top_k(records: Sequence[ClassRecord], k: int) -> list[ClassRecord]:
    """Keep the k records with largest bytes, ties broken by class name."""
    if k < 1:
        raise IngestionError(f"top-k must be >= 1: {k}")
    return sorted(records, key=lambda r: (-r.bytes, r.class_name))[:k]


def leaf_name(class_name: str) -> str:
    """Tree position for a jmap class name; array encodings get their own
    reserved parent package."""
    if class_name.startswith("["):
        return f"{ARRAYS_PACKAGE}.{class_name}"
    return class_name


def read_attribute_table(path: str | Path) -> tuple[list[AttributeDescriptor], dict[str, dict]]:
    """Read the attributes CSV: first column objectId, then name:kind columns."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 1:
            raise IngestionError("empty attribute table")
        schema = []
        for cell in header[1:]:
            name, sep, kind = cell.partition(":")
            if not sep or kind not in ATTRIBUTE_KINDS:
                raise IngestionError(
                    f"attribute column {cell!r} is not of the form name:kind"
                )
            schema.append(AttributeDescriptor(name, kind))
        rows: dict[str, dict] = {}
        for row in reader:
            if not row:
                continue
            oid = row[0]
            if oid in rows:
                raise IngestionError(f"duplicate objectId in attribute table: {oid}")
            attrs = {}
            for desc, cell in zip(schema, row[1:]):
                attrs[desc.name] = _parse_attr(desc, cell)
            rows[oid] = attrs
    return schema, rows


def _parse_attr(desc: AttributeDescriptor, cell: str):
    cell = cell.strip()
    if cell == "":
        return None
    if desc.kind == "numeric":
        try:
            return float(cell)
        except ValueError:
            raise IngestionError(
                f"non-numeric value {cell!r} for attribute {desc.name}"
            ) from None
    if desc.kind == "boolean":
        low = cell.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise IngestionError(f"non-boolean value {cell!r} for attribute {desc.name}")
    return cell


def assemble_dataset(
    schema: list[AttributeDescriptor],
    attribute_rows: Mapping[str, Mapping],
    histograms: Mapping[str, Sequence[ClassRecord]],
    unit: int = 1,
) -> Dataset:
    """Unify attributes and histograms into one dataset.

    The tree spans the union of class names over all histograms; each
    object's counters are its leaf byte totals divided by ``unit`` and
    aggregated bottom-up. Histogram and attribute ids must match 1:1.
    """
    if unit < 1:
        raise IngestionError(f"unit must be >= 1: {unit}")
    missing_attrs = sorted(set(histograms) - set(attribute_rows))
    missing_histos = sorted(set(attribute_rows) - set(histograms))
    if missing_attrs or missing_histos:
        raise IngestionError(
            "objectId mismatch between sources; "
            f"histograms without attributes: {missing_attrs}; "
            f"attributes without histograms: {missing_histos}"
        )
    names = sorted(
        {leaf_name(r.class_name) for recs in histograms.values() for r in recs}
    )
    tree = build_tree(names)
    object_ids = sorted(histograms)
    counters = []
    for oid in object_ids:
        leaf_counters: dict[str, int] = {}
        for r in histograms[oid]:
            key = leaf_name(r.class_name)
            leaf_counters[key] = leaf_counters.get(key, 0) + r.bytes // unit
        counters.append(aggregate_counters(tree, leaf_counters))
    values = {
        d.name: _column_array([attribute_rows[oid].get(d.name) for oid in object_ids])
        for d in schema
    }
    return Dataset(
        object_ids=object_ids,
        schema=schema,
        values=values,
        counters=counters,
        tree=tree,
    )


def build_prior_table(
    reference_histograms: Sequence[tuple[str, Sequence[ClassRecord]]],
    tree: ConceptTree,
    unit: int = 1,
) -> PriorTable:
    """Arithmetic-mean healthy size per tree concept, missing = 0.

    Reference classes absent from the tree are skipped with a warning; the
    tree is expected to span the union of dataset and reference names.
    """
    if not reference_histograms:
        raise IngestionError("at least one reference histogram is required")
    sums = np.zeros(len(tree))
    for oid, records in reference_histograms:
        leaf_counters: dict[str, int] = {}
        for r in records:
            key = leaf_name(r.class_name)
            if key not in tree:
                log.warning("reference %s: class %r not in tree, skipped", oid, key)
                continue
            leaf_counters[key] = leaf_counters.get(key, 0) + r.bytes // unit
        for cid, value in aggregate_counters(tree, leaf_counters).items():
            sums[cid] += value
    means = sums / len(reference_histograms)
    return PriorTable(
        means={c: max(float(means[c]), PRIOR_FLOOR) for c in range(len(tree))}
    )


def load_dataset(path: str | Path) -> Dataset:
    with open(path) as fh:
        return Dataset.from_json(json.load(fh))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(dataset.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_priors(path: str | Path, tree: ConceptTree) -> PriorTable:
    with open(path) as fh:
        return PriorTable.from_json(json.load(fh), tree)


def save_priors(priors: PriorTable, tree: ConceptTree, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(priors.to_json(tree), fh, indent=1, sort_keys=True)
        fh.write("\n")
