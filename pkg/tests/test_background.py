import itertools
import json
import math

import numpy as np
import pytest

from hierminer._kernels import PropagationError
from hierminer.background import (
    BackgroundModel,
    geometric_bucket_distribution,
    geometric_matrix,
)
from hierminer.hierarchy import ConceptTree, build_tree, scale


def geometric_pmf(x: int, mean: float) -> float:
    p = 1.0 / (1.0 + mean)
    return (1.0 - p) ** x * p


def bucket_mass_oracle(bucket: int, mean: float) -> float:
    """Direct summation of the geometric pmf over the bucket's integer range."""
    if bucket == -1:
        return geometric_pmf(0, mean)
    return sum(geometric_pmf(x, mean) for x in range(2**bucket, 2 ** (bucket + 1)))


class TestGeometricBuckets:
    def test_mean_one_hand_values(self):
        probs = geometric_bucket_distribution(1.0, bucket_cap=10)
        assert probs[0] == pytest.approx(0.5)  # bucket -1
        assert probs[1] == pytest.approx(0.25)  # bucket 0
        assert probs[2] == pytest.approx(0.1875)  # bucket 1

    @pytest.mark.parametrize("mean", [0.3, 1.0, 7.5, 160.0, 1250.0, 9999.0])
    def test_matches_pmf_summation(self, mean):
        cap = 16
        probs = geometric_bucket_distribution(mean, bucket_cap=cap)
        for bucket in range(-1, cap):
            assert probs[bucket + 1] == pytest.approx(
                bucket_mass_oracle(bucket, mean), abs=1e-9
            )

    @pytest.mark.parametrize("mean", [1e-3, 1.0, 1250.0, 1e8])
    def test_sums_to_one(self, mean):
        probs = geometric_bucket_distribution(mean, bucket_cap=50)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(probs >= 0)

    def test_large_mean_zero_mass_vanishes(self):
        probs = geometric_bucket_distribution(1e12, bucket_cap=50)
        assert probs[0] < 1e-12

    def test_rejects_nonpositive_mean(self):
        with pytest.raises(ValueError):
            geometric_bucket_distribution(0.0, bucket_cap=50)
        with pytest.raises(ValueError):
            geometric_bucket_distribution(-3.0, bucket_cap=50)

    def test_matrix_matches_rows(self):
        means = np.array([1.0, 1250.0, 42.0])
        mat = geometric_matrix(means, bucket_cap=20)
        for i, m in enumerate(means):
            assert np.allclose(mat[i], geometric_bucket_distribution(m, 20))


def chain_tree() -> ConceptTree:
    return build_tree({"a.b"})  # root -> a -> a.b


def tiny_model(n_concepts: int, mean: float, bucket_cap: int) -> BackgroundModel:
    """Build a model with a small bucket cap, skipping the cap adequacy check."""
    prior = geometric_matrix(np.full(n_concepts, mean), bucket_cap)
    prior /= prior.sum(axis=1, keepdims=True)
    return BackgroundModel(prior=prior, bucket_cap=bucket_cap)


@pytest.fixture
def model():
    tree = build_tree({"java.lang.String"})
    means = np.full(len(tree.concepts), 1250.0)
    return BackgroundModel.from_prior_means(means, bucket_cap=50), tree


class TestTailProbability:
    def test_pristine_closed_form(self, model):
        m, tree = model
        cid = tree.id_of("java.lang.String")
        t = scale(2814)
        assert t == 11
        expected = (1250.0 / 1251.0) ** 2048
        assert m.tail_probability(0, cid, t) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.1944, abs=5e-4)

    def test_bottom_bucket_tail_is_one(self, model):
        m, tree = model
        assert m.tail_probability(2, tree.root_id, -1) == pytest.approx(1.0)

    def test_post_update_tail(self, model):
        m, tree = model
        cid = tree.id_of("java.lang.String")
        m.apply_pattern_update([0, 2], {cid: 11}, alpha=0.25)
        assert m.tail_probability(0, cid, 11) == pytest.approx(0.75, abs=1e-9)
        assert m.tail_probability(2, cid, 11) == pytest.approx(0.75, abs=1e-9)
        # untouched object keeps the prior tail
        assert m.tail_probability(1, cid, 11) == pytest.approx(
            (1250.0 / 1251.0) ** 2048
        )


class TestPatternUpdate:
    def test_scaling_factors(self):
        tree = chain_tree()
        m = BackgroundModel.from_prior_means(
            np.full(len(tree.concepts), 5.0), bucket_cap=8
        )
        cid = tree.id_of("a.b")
        before = m.object_matrix(0)[cid].copy()
        t = 2
        tail = before[t + 1 :].sum()
        m.apply_pattern_update([0], {cid: t}, alpha=0.25)
        after = m.object_matrix(0)[cid]
        assert np.allclose(after[t + 1 :], before[t + 1 :] * 0.75 / tail)
        assert np.allclose(after[: t + 1], before[: t + 1] * 0.25 / (1.0 - tail))
        assert after.sum() == pytest.approx(1.0, abs=1e-9)

    def test_alpha_matching_tail_is_noop(self):
        tree = chain_tree()
        m = BackgroundModel.from_prior_means(
            np.full(len(tree.concepts), 5.0), bucket_cap=8
        )
        cid = tree.id_of("a")
        tail = m.object_matrix(0)[cid][3:].sum()
        before = m.object_matrix(0)[cid].copy()
        m.apply_pattern_update([0], {cid: 2}, alpha=1.0 - tail)
        assert np.allclose(m.object_matrix(0)[cid], before, atol=1e-12)

    def test_idempotent_on_repeat(self):
        tree = chain_tree()
        m = tiny_model(len(tree.concepts), 9.0, bucket_cap=8)
        cid = tree.id_of("a.b")
        m.apply_pattern_update([0, 1], {cid: 1}, alpha=0.2)
        snap = m.object_matrix(1).copy()
        m.apply_pattern_update([0, 1], {cid: 1}, alpha=0.2)
        assert np.allclose(m.object_matrix(1), snap, atol=1e-12)

    def test_degenerate_tail_skipped_with_warning(self, caplog):
        tree = chain_tree()
        m = tiny_model(len(tree.concepts), 2.0, bucket_cap=6)
        cid = tree.id_of("a.b")
        # force all mass below bucket 3 so the tail at 3 is exactly 0
        dist = np.zeros(8)
        dist[0] = 1.0
        m.set_distribution(0, cid, dist)
        with caplog.at_level("WARNING", logger="hierminer.background"):
            m.apply_pattern_update([0], {cid: 3}, alpha=0.25)
        assert "degenerate" in caplog.text
        assert np.allclose(m.object_matrix(0)[cid], dist)
        # tail exactly 1: quantile at the bottom bucket
        caplog.clear()
        with caplog.at_level("WARNING", logger="hierminer.background"):
            m.apply_pattern_update([0], {tree.id_of("a"): -1}, alpha=0.25)
        assert "degenerate" in caplog.text


def brute_force_marginals(potentials: np.ndarray, tree: ConceptTree) -> np.ndarray:
    k, nb = potentials.shape
    out = np.zeros_like(potentials)
    total = 0.0
    for assignment in itertools.product(range(nb), repeat=k):
        w = 1.0
        for cid in range(k):
            w *= potentials[cid, assignment[cid]]
            pid = tree.concepts[cid].parent_id
            if pid is not None and assignment[pid] < assignment[cid]:
                w = 0.0
                break
        if w == 0.0:
            continue
        total += w
        for cid in range(k):
            out[cid, assignment[cid]] += w
    return out / total


class TestPropagate:
    def test_two_node_uniform_chain(self):
        tree = build_tree({"a"})  # root -> a
        m = tiny_model(2, 1.0, bucket_cap=3)
        uniform = np.zeros(5)
        uniform[1:3] = 0.5  # buckets {0, 1}
        m.set_distribution(0, 0, uniform)
        m.set_distribution(0, 1, uniform)
        m.propagate(tree, [0])
        parent = m.object_matrix(0)[0]
        child = m.object_matrix(0)[1]
        assert parent[2] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert child[1] == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_consistent_potentials_unchanged(self):
        tree = build_tree({"a"})
        m = tiny_model(2, 1.0, bucket_cap=3)
        parent = np.array([0.0, 0.0, 0.0, 0.3, 0.7])
        child = np.array([0.4, 0.6, 0.0, 0.0, 0.0])
        m.set_distribution(0, 0, parent)
        m.set_distribution(0, 1, child)
        m.propagate(tree, [0])
        assert np.allclose(m.object_matrix(0)[0], parent, atol=1e-12)
        assert np.allclose(m.object_matrix(0)[1], child, atol=1e-12)

    def test_matches_brute_force_random_trees(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 8))
            parents = {}
            names = []
            for i in range(1, n):
                parents[i] = int(rng.integers(0, i))
            # build qualified names encoding the random tree shape
            paths = {0: "n0"}
            for i in range(1, n):
                paths[i] = paths[parents[i]] + f".n{i}"
            tree = build_tree(set(paths.values()))
            k = len(tree.concepts)
            nb = int(rng.integers(2, 5))
            cap = nb - 2
            m = tiny_model(k, 1.0, bucket_cap=max(cap, 1))
            width = m.prior.shape[1]
            pots = rng.random((k, width)) + 1e-3
            pots /= pots.sum(axis=1, keepdims=True)
            for cid in range(k):
                m.set_distribution(0, cid, pots[cid])
            m.propagate(tree, [0])
            expected = brute_force_marginals(pots, tree)
            assert np.allclose(m.object_matrix(0), expected, atol=1e-9)

    def test_update_then_propagate_dominates(self):
        tree = build_tree({"a.b", "a.c"})
        m = tiny_model(len(tree.concepts), 20.0, bucket_cap=8)
        m.apply_pattern_update([0], {tree.id_of("a.b"): 4}, alpha=0.2)
        m.propagate(tree, [0])
        mat = m.object_matrix(0)
        for concept in tree.concepts:
            if concept.parent_id is None:
                continue
            pt = np.cumsum(mat[concept.parent_id][::-1])[::-1]
            ct = np.cumsum(mat[concept.id][::-1])[::-1]
            assert np.all(pt >= ct - 1e-9)

    def test_propagate_fixpoint(self):
        tree = build_tree({"a.b", "a.c", "d"})
        m = tiny_model(len(tree.concepts), 12.0, bucket_cap=8)
        m.apply_pattern_update([0, 1], {tree.id_of("a.b"): 3}, alpha=0.25)
        m.propagate(tree, [0, 1])
        snap = [m.object_matrix(i).copy() for i in range(2)]
        m.propagate(tree, [0, 1])
        for i in range(2):
            assert np.array_equal(m.object_matrix(i), snap[i])

    def test_contradictory_evidence_raises(self):
        tree = build_tree({"a"})
        m = tiny_model(2, 1.0, bucket_cap=3)
        m.set_distribution(0, 0, np.array([1.0, 0.0, 0.0, 0.0, 0.0]))  # parent at -1
        m.set_distribution(0, 1, np.array([0.0, 0.0, 0.0, 0.0, 1.0]))  # child at top
        with pytest.raises(PropagationError):
            m.propagate(tree, [0])


class TestStateRoundtrip:
    def test_export_import(self, model):
        m, tree = model
        cid = tree.id_of("java.lang.String")
        m.apply_pattern_update([1], {cid: 5}, alpha=0.3)
        payload = json.loads(json.dumps(m.export_state(tree)))
        again = BackgroundModel.import_state(payload, tree)
        assert np.allclose(again.prior, m.prior)
        assert set(again.overrides) == set(m.overrides)
        for oid in m.overrides:
            assert np.allclose(again.overrides[oid], m.overrides[oid])

    def test_distributions_stay_normalized(self, model):
        m, tree = model
        cid = tree.id_of("java.lang.String")
        for t, a in [(3, 0.2), (7, 0.4), (3, 0.2)]:
            m.apply_pattern_update([0, 1, 2, 3], {cid: t}, alpha=a)
            m.propagate(tree, [0, 1, 2, 3])
        for i in range(4):
            sums = m.object_matrix(i).sum(axis=1)
            assert np.allclose(sums, 1.0, atol=1e-9)
