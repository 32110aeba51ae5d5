import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as orc
from typecsp import formula as fm
from typecsp.type_structure import (CLASSIFY, REDUCE, ReductSpec, RelationSymbol, TypeStructure,
                                    build, choose_m, export, index_maps, load)
from typecsp.unary_base import Block, MType, PartitionSpec, SpecError, type_of

N = orc.ONE_INFINITE


@st.composite
def cases(draw, max_m=4):
    pick = orc.DrawPick(draw)
    spec = orc.gen_spec(pick)
    reduct = orc.gen_reduct(pick, spec, max_rels=2, max_arity=2)
    m = draw(st.integers(max(2, reduct.max_arity), max_m))
    return build(spec, reduct, m)


def test_choose_m_examples():
    assert choose_m(N, orc.EQ_NEQ, REDUCE) == 3
    four = ReductSpec([RelationSymbol("R", 4, fm.Eq(1, 4))])
    assert choose_m(N, four, CLASSIFY) == 5
    unary = ReductSpec([RelationSymbol("P", 1, fm.InBlock("S", 1))])
    assert choose_m(PartitionSpec([Block("N"), Block("S", 1)]), unary) == 3


def test_worked_example_relations():
    T = build(N, orc.EQ_NEQ, 3)
    assert len(T) == 5
    by_text = {str(p): k for k, p in enumerate(T.domain)}
    aab = by_text[str(type_of("aab", lambda e: "N"))]
    abb = by_text[str(type_of("abb", lambda e: "N"))]
    aba = by_text[str(type_of("aba", lambda e: "N"))]
    aaa = by_text[str(type_of("aaa", lambda e: "N"))]
    abc = by_text[str(type_of("abc", lambda e: "N"))]
    assert T.unary("Eq", (2, 3)) == {aaa, abb}          # U_1
    assert T.unary("Eq", (1, 3)) == {aaa, aba}          # U_2
    assert T.unary("Eq", (1, 2)) == {aaa, aab}          # U_3
    assert T.unary("Neq", (2, 3)) == {aab, aba, abc}    # V_1
    assert T.unary("Neq", (1, 3)) == {aab, abb, abc}    # V_2
    assert T.unary("Neq", (1, 2)) == {aba, abb, abc}    # V_3
    assert T.unary("Eq", (1, 1)) == set(range(5))
    assert T.comp((1, 3), (1, 2), aab, abc)
    assert not T.comp((1, 2), (1, 2), aaa, abc)


def test_build_rejects_small_m_and_unknown_blocks():
    with pytest.raises(SpecError):
        build(N, orc.EQ_NEQ, 1)
    with pytest.raises(SpecError):
        build(N, ReductSpec([RelationSymbol("P", 1, fm.InBlock("Q", 1))]), 3)
    with pytest.raises(SpecError):
        RelationSymbol("R", 1, fm.Eq(1, 2))


def test_export_counts_and_round_trip(tmp_path):
    T = build(N, orc.EQ_NEQ, 3)
    path = tmp_path / "T.json"
    export(T, path, materialize_comp=True)
    obj = json.loads(path.read_text())
    assert len(obj["unary"]) == 18
    assert len(obj["comp"]) == 3 ** 2 + 9 ** 2 + 27 ** 2
    back = load(path)
    assert back == T
    for key in T.unary_keys():
        assert back.unary(*key) == T.unary(*key)


def test_reduct_json_round_trip():
    spec = PartitionSpec([Block("U"), Block("S", 1)])
    red = ReductSpec([RelationSymbol("R", 2, fm.parse_formula("U(z1) & !(z1 = z2) | S(z2)"))])
    assert ReductSpec.from_json(json.loads(json.dumps(red.to_json())), spec.names) == red


@settings(max_examples=40, deadline=None)
@given(cases())
def test_comp_identity_is_equality_and_symmetric(T):
    ident = tuple(range(1, T.m + 1))
    n = len(T)
    for p, q in itertools.product(range(n), repeat=2):
        assert T.comp(ident, ident, p, q) == (p == q)
    for r in (1, 2):
        maps = list(index_maps(r, T.m))
        for i, j in itertools.islice(itertools.product(maps, repeat=2), 30):
            for p, q in itertools.islice(itertools.product(range(n), repeat=2), 200):
                assert T.comp(i, j, p, q) == T.comp(j, i, q, p)


@settings(max_examples=40, deadline=None)
@given(cases(max_m=3), st.data())
def test_unary_relations_match_concrete_evaluation(T, data):
    elems = orc.universe(T.spec, T.m + 1)
    t = data.draw(st.lists(st.sampled_from(elems), min_size=T.m, max_size=T.m))
    p = T.index[type_of(t, lambda e: e[0])]
    for name, imap in T.unary_keys():
        sub = [t[k - 1] for k in imap]
        assert (p in T.unary(name, imap)) == orc.eval_concrete(T.reduct[name].definition, sub)


@settings(max_examples=40, deadline=None)
@given(cases(max_m=3), st.data())
def test_comp_matches_concrete_subtuples(T, data):
    elems = orc.universe(T.spec, T.m + 1)
    a = data.draw(st.lists(st.sampled_from(elems), min_size=T.m, max_size=T.m))
    b = data.draw(st.lists(st.sampled_from(elems), min_size=T.m, max_size=T.m))
    r = data.draw(st.integers(1, T.m))
    i = data.draw(st.lists(st.integers(1, T.m), min_size=r, max_size=r))
    j = data.draw(st.lists(st.integers(1, T.m), min_size=r, max_size=r))
    p, q = T.index[type_of(a, lambda e: e[0])], T.index[type_of(b, lambda e: e[0])]
    same = orc.pattern([a[k - 1] for k in i]) == orc.pattern([b[k - 1] for k in j])
    assert T.comp(i, j, p, q) == same


def test_comp_relation_supports_match_predicate():
    T = build(PartitionSpec([Block("U"), Block("S", 1)]), orc.EQ_NEQ, 3)
    rel = T.comp_relation((1, 2), (3, 1))
    for p, q in itertools.product(range(len(T)), repeat=2):
        assert rel.holds(p, q) == T.comp((1, 2), (3, 1), p, q)
