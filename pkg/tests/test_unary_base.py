import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as orc
from typecsp import formula as fm
from typecsp.unary_base import (Block, MType, PartitionSpec, SpecError, bounds, enumerate_types,
                                expand_with_constants, restrict_type, stabilise, type_contains,
                                type_of, validate_type)

INF = None


@st.composite
def specs(draw, allow_finite=False):
    return orc.gen_spec(orc.DrawPick(draw), allow_finite=allow_finite)


def test_stabilise_examples():
    spec, rewrite = stabilise(PartitionSpec([Block("X", 2), Block("Y")]))
    assert spec == PartitionSpec([Block("X#1", 1), Block("X#2", 1), Block("Y")])
    assert set(rewrite["X"]) == {"X#1", "X#2"}
    already = PartitionSpec([Block("U"), Block("S", 1)])
    spec, rewrite = stabilise(already)
    assert spec == already and all(rewrite[n] == (n,) for n in already.names)
    spec, _ = stabilise(PartitionSpec([Block("X", 3)]))
    assert [b.size for b in spec.blocks] == [1, 1, 1]


def test_expand_with_constants_examples():
    ex = expand_with_constants(PartitionSpec([Block("I1")]))
    assert ex.spec == PartitionSpec([Block("I1'"), Block("cI1", 1)])
    assert ex.constants == {"I1": "cI1"}
    ex = expand_with_constants(PartitionSpec([Block("S", 1)]))
    assert ex.spec == PartitionSpec([Block("S", 1)]) and ex.constants == {"S": "S"}
    assert len(expand_with_constants(PartitionSpec([Block("I1"), Block("S", 1)])).spec.blocks) == 3
    with pytest.raises(SpecError):
        expand_with_constants(PartitionSpec([Block("X", 2)]))


def test_partition_json_round_trip():
    spec = PartitionSpec([Block("I1"), Block("S", 1)])
    assert spec.to_json() == {"blocks": [{"name": "I1", "size": "inf"}, {"name": "S", "size": 1}]}
    assert PartitionSpec.from_json(spec.to_json()) == spec
    with pytest.raises(SpecError):
        PartitionSpec([Block("A"), Block("A")])


def test_type_counts_examples():
    assert len(enumerate_types(PartitionSpec([Block("N")]), 3)) == 5
    for n in range(1, 4):
        assert len(enumerate_types(PartitionSpec([Block(f"B{k}") for k in range(n)]), 1)) == n
    assert len(enumerate_types(PartitionSpec([Block("A"), Block("B")]), 2)) == 6


@settings(max_examples=60, deadline=None)
@given(specs(), st.integers(1, 4))
def test_type_count_matches_concrete_orbits(spec, m):
    assert len(enumerate_types(spec, m)) == orc.brute_type_count(spec, m)


@given(specs(), st.integers(1, 4))
def test_types_are_canonical_and_respect_capacity(spec, m):
    types = enumerate_types(spec, m)
    assert len(set(types)) == len(types)
    for p in types:
        validate_type(p, spec)
        assert p.classes[0] == 0


def test_mtype_rejects_non_canonical():
    with pytest.raises(SpecError):
        MType((1, 0), ("U", "U"))
    with pytest.raises(SpecError):
        MType((0, 0), ("U", "U"))


def test_restrict_type_examples():
    p = type_of(["a", "a", "b"], lambda e: "N")
    assert restrict_type(p, (1, 2, 3)) == p
    assert restrict_type(p, (3, 1)) == MType((0, 1), ("N", "N"))
    const = MType((0, 0, 0), ("N",))
    assert restrict_type(const, (2, 3, 1, 1)) == MType((0, 0, 0, 0), ("N",))


@given(specs(), st.integers(1, 4), st.data())
def test_restriction_composes(spec, m, data):
    p = data.draw(st.sampled_from(enumerate_types(spec, m)))
    i = data.draw(st.lists(st.integers(1, m), min_size=1, max_size=4))
    j = data.draw(st.lists(st.integers(1, len(i)), min_size=1, max_size=4))
    assert restrict_type(restrict_type(p, i), j) == restrict_type(p, [i[k - 1] for k in j])


@given(specs(), st.integers(1, 4), st.data())
def test_restriction_matches_concrete_subtuple(spec, m, data):
    elems = orc.universe(spec, m + 1)
    t = data.draw(st.lists(st.sampled_from(elems), min_size=m, max_size=m))
    i = data.draw(st.lists(st.integers(1, m), min_size=1, max_size=4))
    sub = [t[k - 1] for k in i]
    assert restrict_type(type_of(t, lambda e: e[0]), i) == type_of(sub, lambda e: e[0])


def test_type_contains_examples():
    aac = type_of(["a", "a", "c"], lambda e: "N")
    abc = type_of(["a", "b", "c"], lambda e: "N")
    assert type_contains(aac, fm.Eq(1, 2))
    assert not type_contains(abc, fm.Eq(1, 2))
    s = MType((0, 1), ("S", "N"))
    assert type_contains(s, fm.InBlock("S", 1))


@settings(max_examples=100)
@given(specs(), st.integers(1, 3), st.data())
def test_type_contains_is_realisation_independent(spec, m, data):
    phi = orc.gen_formula(orc.DrawPick(data.draw), m, spec.names)
    elems = orc.universe(spec, m + 2)
    t = data.draw(st.lists(st.sampled_from(elems), min_size=m, max_size=m))
    assert type_contains(type_of(t, lambda e: e[0]), phi) == orc.eval_concrete(phi, t)


def test_bounds_examples():
    one = bounds(PartitionSpec([Block("I1")]))
    assert one.max_size == 1 and len(one) == 1
    two = bounds(PartitionSpec([Block("I1"), Block("S", 1)]))
    assert two.max_size == 2
    assert any(b.labels == (frozenset({"S"}), frozenset({"S"})) for b in two)


def _embeds(labels, spec, per_infinite):
    """Whether a labelled structure (one label set per element) embeds injectively."""
    elems = orc.universe(spec, per_infinite)
    for image in itertools.permutations(elems, len(labels)):
        if all(ls == {e[0]} for ls, e in zip(labels, image)):
            return True
    return False


@settings(max_examples=25, deadline=None)
@given(specs())
def test_bounds_characterise_embeddability(spec):
    bs = bounds(spec)
    assert bs.max_size <= 2
    for b in bs:
        assert not _embeds([set(ls) for ls in b.labels], spec, 4)
    label_sets = [frozenset(c) for k in range(len(spec.names) + 1)
                  for c in itertools.combinations(spec.names, k)]
    # element order does not matter, so multisets of label sets suffice
    for size in range(1, 5):
        for labels in itertools.combinations_with_replacement(label_sets, size):
            contains_bound = any(
                any(all(bl == labels[e] for bl, e in zip(b.labels, emb))
                    for emb in itertools.permutations(range(size), b.size))
                for b in bs)
            assert _embeds([set(ls) for ls in labels], spec, 4) == (not contains_bound)
