import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eimkit.measure import (
    DomainMismatchError, MeasureError, MeasureSpace, NodeKind,
    NodeScalarField, integrate, merge, partition,
)


def space_of(*triples):
    return MeasureSpace.from_triples(triples)


class TestIntegrate:
    def test_zero_field(self):
        sp = space_of(("a", 1.0, "atom"), ("b", 2.0, "nonatomic"))
        assert integrate(NodeScalarField.constant(sp, 0.0), sp) == 0.0

    def test_two_atoms(self):
        sp = space_of(("a", 1.0, "atom"), ("b", 1.0, "atom"))
        f = NodeScalarField({"a": 2.0, "b": 3.0})
        assert integrate(f, sp) == 5.0

    def test_constant_scales_with_mass(self):
        sp = space_of(("a", 0.5, "atom"), ("b", 1.7, "nonatomic"),
                      ("c", 0.3, "atom"))
        c = 4.25
        assert integrate(NodeScalarField.constant(sp, c), sp) == \
            pytest.approx(c * sp.total_mass, rel=1e-12)

    def test_missing_node_value(self):
        sp = space_of(("a", 1.0, "atom"), ("b", 1.0, "atom"))
        with pytest.raises(DomainMismatchError):
            integrate(NodeScalarField({"a": 1.0}), sp)

    @given(st.lists(st.tuples(
        st.floats(0.01, 10), st.floats(-50, 50), st.floats(-50, 50)),
        min_size=1, max_size=6),
        st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=200, deadline=None)
    def test_linearity(self, rows, a, b):
        sp = MeasureSpace.from_triples(
            [(f"n{i}", w, "atom") for i, (w, _, _) in enumerate(rows)])
        F = NodeScalarField({f"n{i}": f for i, (_, f, _) in enumerate(rows)})
        G = NodeScalarField({f"n{i}": g for i, (_, _, g) in enumerate(rows)})
        comb = NodeScalarField({nid: a * F.value(nid) + b * G.value(nid)
                                for nid in sp.node_ids})
        lhs = integrate(comb, sp)
        rhs = a * integrate(F, sp) + b * integrate(G, sp)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-8)


class TestPartition:
    def test_all_atoms(self):
        sp = space_of(("a", 1.0, "atom"), ("b", 2.0, "atom"))
        pa, na = partition(sp)
        assert na is None
        assert pa.node_ids == sp.node_ids

    def test_mixed_masses(self):
        sp = space_of(("a", 1.0, "atom"), ("b", 2.0, "nonatomic"))
        pa, na = partition(sp)
        assert pa.total_mass == 1.0
        assert na.total_mass == 2.0

    def test_round_trip_merge(self):
        sp = space_of(("a", 1.0, "atom"), ("b", 2.0, "atom"))
        pa, na = partition(sp)
        merged = merge(pa, na)
        assert merged.node_ids == sp.node_ids
        assert merged.total_mass == sp.total_mass

    @given(st.lists(st.tuples(st.floats(0.01, 10), st.booleans()),
                    min_size=1, max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_mass_conservation_exact(self, rows):
        sp = MeasureSpace.from_triples(
            [(f"n{i}", w, "atom" if atom else "nonatomic")
             for i, (w, atom) in enumerate(rows)])
        pa, na = partition(sp)
        total = (pa.total_mass if pa else 0.0) + \
            (na.total_mass if na else 0.0)
        # same floats summed in the same per-part order
        expect = sum(n.weight for n in sp.nodes
                     if n.kind is NodeKind.ATOM) + \
            sum(n.weight for n in sp.nodes
                if n.kind is NodeKind.NONATOMIC_SAMPLE)
        assert total == expect


class TestInvariants:
    def test_weight_positive(self):
        with pytest.raises(MeasureError):
            space_of(("a", 0.0, "atom"))

    def test_unique_ids(self):
        with pytest.raises(MeasureError):
            space_of(("a", 1.0, "atom"), ("a", 1.0, "atom"))

    def test_nonempty(self):
        with pytest.raises(MeasureError):
            MeasureSpace(())

    def test_nonnegative_fields(self):
        sp = space_of(("a", 1.0, "atom"))
        with pytest.raises(MeasureError):
            NodeScalarField({"a": -1.0}).require_nonnegative("modulus")
