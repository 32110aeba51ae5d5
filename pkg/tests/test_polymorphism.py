import itertools

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as orc
from typecsp import formula as fm
from typecsp.finite_csp import ResourceLimitExceeded
from typecsp.polymorphism import (CYCLIC, SIGGERS, WNU, WNU_PAIR, FiniteStructure, IdentitySpec,
                                  Indicator, MinorOperation, OperationTable, Relation,
                                  check_identity, classify_reduct, has_polymorphism, preserves)
from typecsp.type_structure import ReductSpec, RelationSymbol, build, index_maps
from typecsp.unary_base import Block, PartitionSpec

IMPL = FiniteStructure(2, {"zero": Relation(1, [(0,)]), "one": Relation(1, [(1,)]),
                           "impl": Relation(2, [(0, 0), (0, 1), (1, 1)])})
ONE_IN_THREE = FiniteStructure(2, {"zero": Relation(1, [(0,)]), "one": Relation(1, [(1,)]),
                                   "R": Relation(3, [(0, 0, 1), (0, 1, 0), (1, 0, 0)])})
MAJORITY = OperationTable(2, 3, [int(a + b + c >= 2) for a, b, c in itertools.product((0, 1), repeat=3)])
PI1 = OperationTable(2, 3, [a for a, b, c in itertools.product((0, 1), repeat=3)])


def orbit_count(d, ident):
    """Connected components of the identification graph, computed by networkx."""
    g = nx.Graph()
    for sym, k in ident.symbols:
        g.add_nodes_from((sym, t) for t in itertools.product(range(d), repeat=k))
    g.add_edges_from(ident.identifications(d))
    return nx.number_connected_components(g)


def test_indicator_variable_counts():
    assert Indicator(FiniteStructure(2), IdentitySpec(CYCLIC, 2)).n_classes == 3
    siggers = Indicator(FiniteStructure(2), IdentitySpec(SIGGERS)).n_classes
    assert siggers == orbit_count(2, IdentitySpec(SIGGERS)) and siggers <= 64
    assert Indicator(FiniteStructure(5), IdentitySpec(CYCLIC, 3)).n_classes == (125 + 2 * 5) // 3


@pytest.mark.parametrize("text", ["cyclic:4", "wnu:3", "wnupair", "siggers"])
def test_indicator_classes_match_orbits(text):
    ident = IdentitySpec.parse(text)
    assert Indicator(FiniteStructure(3), ident).n_classes == orbit_count(3, ident)


def test_identity_parsing():
    assert IdentitySpec.parse("cyclic:3") == IdentitySpec(CYCLIC, 3)
    assert IdentitySpec.parse("siggers", idempotent=True).idempotent
    for bad in ("cyclic:7", "cyclic:1", "wnu", "foo", "siggers:2"):
        with pytest.raises(ValueError):
            IdentitySpec.parse(bad)


def test_impl_has_cyclic_ternary():
    res = has_polymorphism(IMPL, IdentitySpec(CYCLIC, 3))
    assert res.found and check_identity(res.tables, IdentitySpec(CYCLIC, 3), 2)
    assert preserves(MAJORITY, IMPL)


def test_one_in_three_has_no_idempotent_siggers():
    assert not has_polymorphism(ONE_IN_THREE, IdentitySpec(SIGGERS, idempotent=True)).found
    assert not has_polymorphism(ONE_IN_THREE, IdentitySpec(SIGGERS, idempotent=True),
                                shortcuts=False).found
    rels = [r.tuples for r in ONE_IN_THREE.relations.values()]
    assert not any(orc.op_is_cyclic(v, 2, 3) and orc.op_preserves(v, 2, 3, rels)
                   for v in orc.all_operations(2, 3))


@pytest.mark.parametrize("k", [2, 3, 4])
def test_wnu_on_relation_free_structure(k):
    res = has_polymorphism(FiniteStructure(3), IdentitySpec(WNU, k, idempotent=True))
    assert res.found


def test_wnu_pair():
    res = has_polymorphism(IMPL, IdentitySpec(WNU_PAIR))
    assert res.found and set(res.tables) == {"f", "g"}
    assert res.tables["f"].arity == 4 and res.tables["g"].arity == 3


def test_check_identity_examples():
    assert check_identity({"f": MAJORITY}, IdentitySpec(CYCLIC, 3), 2)
    assert not check_identity({"f": PI1}, IdentitySpec(CYCLIC, 3), 2)
    with pytest.raises(ValueError):
        check_identity({"f": MAJORITY}, IdentitySpec(CYCLIC, 2), 2)


def test_minor_operation_audit():
    comm = OperationTable(2, 2, [0, 0, 0, 1])
    s = MinorOperation(comm, 6, (1, 2))
    assert check_identity({"f": s}, IdentitySpec(SIGGERS), 2)
    assert s.materialize()(1, 1, 0, 0, 0, 0) == 1


def test_full_siggers_search_agrees_with_shortcut():
    for D in (IMPL, ONE_IN_THREE):
        ident = IdentitySpec(SIGGERS, idempotent=True)
        assert has_polymorphism(D, ident).found == has_polymorphism(D, ident, shortcuts=False).found


SHIFT6 = FiniteStructure(6, endomaps={"shift": tuple((x + 1) % 6 for x in range(6))})


def test_four_ary_siggers_minor_when_no_small_cyclic_exists():
    # x - y + z commutes with the shift, while differences 3 and (0, 2, 4) rule out cyclic:2 and cyclic:3
    ident = IdentitySpec(SIGGERS, idempotent=True)
    res = has_polymorphism(SHIFT6, ident)
    assert res.found and res.via.startswith("minor of siggers4")
    assert not has_polymorphism(SHIFT6, IdentitySpec(CYCLIC, 2, True)).found
    assert not has_polymorphism(SHIFT6, IdentitySpec(CYCLIC, 3, True)).found
    table = res.tables["f"].materialize()
    assert check_identity({"f": table}, ident, 6) and preserves(table, SHIFT6)


@settings(max_examples=25, deadline=None)
@given(st.data(), st.booleans())
def test_four_ary_and_six_ary_siggers_agree(data, idem):
    rels = orc.gen_small_structure(orc.DrawPick(data.draw))
    D = FiniteStructure(2, {f"R{k}": Relation(len(next(iter(r))), r) for k, r in enumerate(rels) if r})
    four = has_polymorphism(D, IdentitySpec.parse("siggers4", idem)).found
    assert four == has_polymorphism(D, IdentitySpec(SIGGERS, idempotent=idem), shortcuts=False).found


def test_resource_limit():
    with pytest.raises(ResourceLimitExceeded):
        has_polymorphism(IMPL, IdentitySpec(SIGGERS), shortcuts=False, max_constraints=10)


def graph(g):
    return Relation(2, [(v, g[v]) for v in range(len(g))])


def test_endomaps_equal_explicit_graphs():
    maps = {"g": (0, 0, 1), "h": (1, 2, 2)}
    explicit = FiniteStructure(3, {n: graph(g) for n, g in maps.items()})
    with_maps = FiniteStructure(3, endomaps=maps)
    for text in ("cyclic:2", "cyclic:3", "wnu:3"):
        ident = IdentitySpec.parse(text)
        assert has_polymorphism(explicit, ident).found == has_polymorphism(with_maps, ident).found
    for values in orc.all_operations(3, 2):
        op = OperationTable(3, 2, values)
        assert preserves(op, explicit) == preserves(op, with_maps)


def all_comp_relations(T):
    """Every Comp relation of T, written out as an explicit tuple set."""
    rels = set()
    for r in range(1, T.m + 1):
        for i in index_maps(r, T.m):
            for j in index_maps(r, T.m):
                rels.add(Relation(2, [(p, q) for p in range(len(T)) for q in range(len(T))
                                      if T.comp(i, j, p, q)]))
    return {f"comp{k}": rel for k, rel in enumerate(rels)}


TWO_BLOCKS = PartitionSpec([Block("U"), Block("c", 1)])


@pytest.mark.parametrize("spec,m", [(orc.ONE_INFINITE, 3), (TWO_BLOCKS, 2)])
def test_generator_restrictions_capture_every_comp_relation(spec, m):
    T = build(spec, orc.EQ_NEQ, m)
    compact = FiniteStructure.from_type_structure(T)
    explicit = FiniteStructure(len(T), all_comp_relations(T))
    d = len(T)
    rng = __import__("random").Random(7)
    for text in ("cyclic:2", "cyclic:3", "wnu:3"):
        ident = IdentitySpec.parse(text)
        res = has_polymorphism(compact, ident)
        assert res.found == has_polymorphism(explicit, ident).found
        if not res.found:
            continue
        op = res.tables["f"]
        assert preserves(op, explicit)
        # single-entry perturbations are judged alike by both encodings
        for _ in range(40):
            values = list(op.values)
            values[rng.randrange(len(values))] = rng.randrange(d)
            bent = OperationTable(d, op.arity, values)
            assert preserves(bent, compact) == preserves(bent, explicit)
    for _ in range(40):
        op = OperationTable(d, 2, [rng.randrange(d) for _ in range(d * d)])
        assert preserves(op, compact) == preserves(op, explicit)


def test_structure_json_round_trip():
    back = FiniteStructure.from_json(IMPL.to_json())
    assert back.d == 2 and back.relations == IMPL.relations


def test_classify_examples():
    eq_neq = classify_reduct(orc.ONE_INFINITE, orc.EQ_NEQ)
    assert eq_neq.verdict == "Tractable" and eq_neq.search.found
    unexpanded = classify_reduct(orc.ONE_INFINITE, orc.EQ_NEQ, expand=False)
    assert unexpanded.verdict == "Tractable" and unexpanded.structure_size == 5
    assert classify_reduct(orc.ONE_INFINITE, ReductSpec([])).verdict == "Tractable"


def test_classify_reports_hard_candidate_for_exactly_one_equality():
    # exactly one of z1 = z2, z2 = z3: preserved neither by constants nor by a binary injection
    text = "(z1 = z2 & !(z2 = z3)) | (!(z1 = z2) & z2 = z3)"
    reduct = ReductSpec([RelationSymbol("R", 3, fm.parse_formula(text))])
    out = classify_reduct(orc.ONE_INFINITE, reduct, assume_core_and_tame=True, expand=False)
    assert out.verdict == "HardCandidate" and not out.search.found


def test_classify_without_assertions_never_claims_hardness(monkeypatch):
    import typecsp.polymorphism as poly
    monkeypatch.setattr(poly, "has_polymorphism",
                        lambda *a, **k: poly.PolymorphismResult(False, {}, "indicator", {}))
    assert classify_reduct(orc.ONE_INFINITE, orc.EQ_NEQ).verdict == "NotApplicable"
    assert classify_reduct(orc.ONE_INFINITE, orc.EQ_NEQ, True).verdict == "HardCandidate"


def _structure(rels):
    return FiniteStructure(2, {f"R{k}": Relation(len(next(iter(r))), r) for k, r in enumerate(rels)})


@st.composite
def small_structures(draw):
    return [r for r in orc.gen_small_structure(orc.DrawPick(draw)) if r]


@settings(max_examples=60, deadline=None)
@given(small_structures(), st.sampled_from(["cyclic:2", "cyclic:3", "wnu:3"]),
       st.booleans())
def test_search_agrees_with_enumeration(rels, text, idem):
    ident = IdentitySpec.parse(text, idem)
    test = {CYCLIC: orc.op_is_cyclic, WNU: orc.op_is_wnu}[ident.kind]
    truth = any(test(v, 2, ident.k) and orc.op_preserves(v, 2, ident.k, rels)
                and (not idem or orc.op_is_idempotent(v, 2, ident.k))
                for v in orc.all_operations(2, ident.k))
    res = has_polymorphism(_structure(rels), ident)
    assert res.found == truth


@settings(max_examples=60, deadline=None)
@given(small_structures(), small_structures(), st.sampled_from(["cyclic:2", "cyclic:3", "wnu:3"]))
def test_adding_relations_is_monotone(rels, extra, text):
    ident = IdentitySpec.parse(text)
    if not has_polymorphism(_structure(rels), ident).found:
        assert not has_polymorphism(_structure(rels + extra), ident).found


def test_siggers_iff_cyclic_on_idempotent_two_element_binary_structures():
    for bits_ in itertools.product((0, 1), repeat=4):
        rel = frozenset(t for t, b in zip(itertools.product((0, 1), repeat=2), bits_) if b)
        if not rel:
            continue
        D = _structure([rel])
        ident = IdentitySpec(SIGGERS, idempotent=True)
        siggers = has_polymorphism(D, ident, shortcuts=False).found
        small = any(any(orc.op_is_cyclic(v, 2, k) and orc.op_is_idempotent(v, 2, k)
                        and orc.op_preserves(v, 2, k, [rel]) for v in orc.all_operations(2, k))
                    for k in (2, 3))
        assert siggers == small
