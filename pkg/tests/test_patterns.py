import numpy as np
import pytest

from hierminer.hierarchy import build_tree
from hierminer.patterns import (
    AT_MOST,
    EMPTY_PATTERN,
    EQUALS,
    GREATER_THAN,
    IS_FALSE,
    IS_TRUE,
    Antichain,
    Pattern,
    PatternError,
    Selector,
    SubgroupPattern,
    closure_delta,
    extent,
    extent_mask,
    generate_selectors,
    refines,
    selector_mask,
)

SALES = Selector("softType", EQUALS, "Sales")
V3 = Selector("softVersion", EQUALS, "V_3")
XMX_SMALL = Selector("Xmx", AT_MOST, 2.5e9)


class TestSelectors:
    def test_rendering(self):
        assert str(SALES) == "softType=Sales"
        assert str(XMX_SMALL) == "Xmx≤2.5e+09"
        assert str(Selector("weekDay", IS_TRUE)) == "weekDay=True"
        assert str(Selector("Xmx", GREATER_THAN, 4.2e9)) == "Xmx>4.2e+09"

    def test_masks(self, toy_dataset):
        assert set(np.flatnonzero(selector_mask(toy_dataset, SALES))) == {
            0, 1, 6, 8, 9,
        }
        assert set(np.flatnonzero(selector_mask(toy_dataset, XMX_SMALL))) == {
            1, 3, 4, 6,
        }
        wd = selector_mask(toy_dataset, Selector("weekDay", IS_FALSE))
        assert set(np.flatnonzero(wd)) == {1, 3, 7}

    def test_unknown_attribute(self, toy_dataset):
        with pytest.raises(PatternError):
            selector_mask(toy_dataset, Selector("nope", EQUALS, "x"))


class TestSubgroupPattern:
    def test_worked_extents(self, toy_dataset):
        # the two worked subgroups of the toy dataset
        p1 = SubgroupPattern((SALES, V3))
        assert extent(toy_dataset, p1) == {0, 1, 6, 8}
        p2 = SubgroupPattern((XMX_SMALL,))
        assert extent(toy_dataset, p2) == {1, 3, 4, 6}

    def test_canonical_order(self):
        a = SubgroupPattern((V3, SALES))
        b = SubgroupPattern((SALES, V3))
        assert a == b
        assert a.selectors == tuple(sorted((SALES, V3)))
        assert str(b) == "(softType=Sales ∧ softVersion=V_3)"
        assert str(EMPTY_PATTERN) == "(true)"

    def test_norm_counts_interval_as_two(self):
        p = SubgroupPattern(
            (Selector("Xmx", AT_MOST, 5e9), Selector("Xmx", GREATER_THAN, 2e9))
        )
        assert p.norm == 2

    def test_conflicting_literals_rejected(self):
        with pytest.raises(PatternError):
            SubgroupPattern((SALES, Selector("softType", EQUALS, "EDI")))
        with pytest.raises(PatternError):
            SubgroupPattern(
                (Selector("weekDay", IS_TRUE), Selector("weekDay", IS_FALSE))
            )
        with pytest.raises(PatternError):
            SubgroupPattern(
                (Selector("Xmx", AT_MOST, 1.0), Selector("Xmx", AT_MOST, 2.0))
            )

    def test_duplicate_selector_collapses(self):
        p = SubgroupPattern((SALES, SALES))
        assert p.norm == 2  # duplicates kept in the tuple are identical, not conflicting
        assert p == SubgroupPattern((SALES, SALES))

    def test_empty_pattern_covers_all(self, toy_dataset):
        assert extent_mask(toy_dataset, EMPTY_PATTERN).all()

    def test_missing_values_never_match(self, toy_dataset):
        import copy

        ds = copy.copy(toy_dataset)
        ds.values = dict(toy_dataset.values)
        col = np.array(toy_dataset.values["softType"], dtype=object)
        col[0] = None
        ds.values["softType"] = col
        assert 0 not in extent(ds, SubgroupPattern((SALES,)))


class TestRefines:
    def test_adding_selector_refines(self, toy_dataset):
        g = SubgroupPattern((SALES,))
        s = SubgroupPattern((SALES, V3))
        assert refines(g, s)
        assert not refines(s, g)
        # extent shrinks accordingly
        assert extent(toy_dataset, s) <= extent(toy_dataset, g)

    def test_empty_refines_everything(self):
        assert refines(EMPTY_PATTERN, SubgroupPattern((SALES,)))

    def test_numeric_bound_tightening(self):
        g = SubgroupPattern((Selector("Xmx", AT_MOST, 5e9),))
        s = SubgroupPattern((Selector("Xmx", AT_MOST, 2.5e9),))
        assert refines(g, s)
        assert not refines(s, g)

    def test_reflexive(self):
        p = SubgroupPattern((SALES, XMX_SMALL))
        assert refines(p, p)


class TestGenerateSelectors:
    def test_toy_universe(self, toy_dataset):
        sels = generate_selectors(toy_dataset, bins=5)
        by_attr = {}
        for s in sels:
            by_attr.setdefault(s.attribute, []).append(s)
        assert len(by_attr["softType"]) == 4  # 4 observed categories
        assert len(by_attr["softVersion"]) == 3
        assert len(by_attr["weekDay"]) == 2
        # <= 2*(bins-1) numeric thresholds after dedup
        assert 2 <= len(by_attr["Xmx"]) <= 8
        assert all(
            s.form in (AT_MOST, GREATER_THAN) for s in by_attr["Xmx"]
        )
        assert sels == sorted(sels)

    def test_cut_points_are_observed_values(self, toy_dataset):
        sels = generate_selectors(toy_dataset, bins=5)
        xmx = sorted(set(toy_dataset.values["Xmx"]))
        for s in sels:
            if s.attribute == "Xmx":
                assert float(s.value) in xmx

    def test_constant_attribute_skipped(self, toy_dataset):
        import copy

        ds = copy.copy(toy_dataset)
        ds.values = dict(toy_dataset.values)
        ds.values["softVersion"] = np.array(["V_1"] * 10, dtype=object)
        sels = generate_selectors(ds, bins=5)
        assert not any(s.attribute == "softVersion" for s in sels)

    def test_bins_validation(self, toy_dataset):
        with pytest.raises(PatternError):
            generate_selectors(toy_dataset, bins=1)


class TestClosure:
    def test_singleton_pins_every_attribute(self, toy_dataset):
        p = closure_delta(toy_dataset, [0])
        assert p.restriction("softType")["literal"] == SALES
        assert p.restriction("softVersion")["literal"] == V3
        assert p.restriction("weekDay")["literal"] == Selector("weekDay", IS_TRUE)
        bounds = p.restriction("Xmx")
        assert bounds["upper"] is not None and bounds["upper"] >= 4.2e9
        assert 0 in extent(toy_dataset, p)

    def test_pair_o2_o7(self, toy_dataset):
        p = closure_delta(toy_dataset, [1, 6])
        assert p.restriction("softType")["literal"] == SALES
        assert p.restriction("softVersion")["literal"] == V3
        bounds = p.restriction("Xmx")
        assert bounds["upper"] is not None and bounds["upper"] >= 2.4e9
        assert extent(toy_dataset, p) >= {1, 6}

    def test_closure_is_extensive_and_idempotent(self, toy_dataset):
        sels = generate_selectors(toy_dataset)
        for objs in ([0], [1, 6], [2, 3, 5], list(range(10))):
            p = closure_delta(toy_dataset, objs, sels)
            ext = extent(toy_dataset, p)
            assert set(objs) <= ext
            again = closure_delta(toy_dataset, ext, sels)
            assert extent(toy_dataset, again) == ext

    def test_empty_set_rejected(self, toy_dataset):
        with pytest.raises(PatternError):
            closure_delta(toy_dataset, [])

    def test_mixed_attribute_left_unrestricted(self, toy_dataset):
        p = closure_delta(toy_dataset, [0, 2])  # Sales vs EDI
        assert p.restriction("softType")["literal"] is None


class TestAntichain:
    def test_buckets_must_cover_members(self, toy_dataset):
        tree = toy_dataset.tree
        with pytest.raises(PatternError):
            Antichain(frozenset({tree.id_of("java.lang")}), {})

    def test_validate_accepts_antichain(self, toy_dataset):
        tree = toy_dataset.tree
        members = {
            tree.id_of("java.lang.reflect.Field"),
            tree.id_of("java.lang.String"),
        }
        ac = Antichain(frozenset(members), {c: 8 for c in members})
        ac.validate(tree)

    def test_validate_rejects_comparable(self, toy_dataset):
        tree = toy_dataset.tree
        members = {tree.id_of("java.lang"), tree.id_of("java.lang.String")}
        ac = Antichain(frozenset(members), {c: 8 for c in members})
        with pytest.raises(PatternError):
            ac.validate(tree)

    def test_render(self, toy_dataset):
        tree = toy_dataset.tree
        cid = tree.id_of("java.lang.reflect")
        ac = Antichain(frozenset({cid}), quantile_buckets={cid: 11})
        assert ac.render(tree) == "{java.lang.reflect@11}"


class TestPattern:
    def test_render_and_extent_size(self, toy_dataset):
        tree = toy_dataset.tree
        cid = tree.id_of("java.lang.reflect")
        p = Pattern(
            subgroup=SubgroupPattern((SALES, V3)),
            antichain=Antichain(frozenset({cid}), {cid: 11}),
            extent_indices=(0, 1, 6, 8),
            ic=24.0,
            dl=6.0,
            si=4.0,
        )
        assert p.extent_size == 4
        text = p.render(tree)
        assert "softType=Sales" in text and "java.lang.reflect@11" in text
        assert "⇒" in text
