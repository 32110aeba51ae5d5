"""Polymorphism search on finite structures and tractability classification.

Existence of an operation satisfying a fixed height-1 identity (Siggers,
cyclic, weak near-unanimity, or the 4/3-ary wnu pair) is decided by solving
the indicator CSP: one variable per class of argument tuples identified by
the identity, constrained so that every relation is preserved.

Besides explicit tuple sets a structure may carry *endomaps*: unary
functions ``g: D -> D`` whose graphs are relations of the structure.  An
operation preserves the graph of ``g`` iff it commutes with ``g``, which is a
binary constraint per argument tuple.  The compatibility relations of a
type structure reduce to this form: restricting along ``i`` and then ``j``
is restricting along their composite, so commuting with the restrictions
along three generators of the full transformation monoid on ``[m]``
forces commuting with every restriction, and every ``Comp`` relation is
then preserved.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .finite_csp import (BinaryRelation, ResourceLimitExceeded, SolverConfig, SolverInstance,
                         solve)
from .type_structure import CLASSIFY, TypeStructure, build, choose_m, constant_relations
from .unary_base import PartitionSpec, SpecError, expand_with_constants, restrict_type

MAX_ARITY = 6
DEFAULT_MAX_CONSTRAINTS = 2_000_000


@dataclass(frozen=True)
class Relation:
    arity: int
    tuples: frozenset

    def __init__(self, arity: int, tuples):
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "tuples", frozenset(tuple(t) for t in tuples))
        if any(len(t) != arity for t in self.tuples):
            raise ValueError("tuple length does not match arity")


def monoid_generators(m: int) -> list:
    """Maps ``[m] -> [m]`` (1-based tuples) generating every map ``[m] -> [m]`` under composition."""
    if m < 2:
        return []
    swap = (2, 1) + tuple(range(3, m + 1))
    collapse = (1, 1) + tuple(range(3, m + 1))
    gens = [swap, collapse]
    if m > 2:
        gens.append(tuple(range(2, m + 1)) + (1,))
    return gens


class FiniteStructure:
    def __init__(self, d: int, relations: Optional[dict] = None, endomaps: Optional[dict] = None):
        if d < 1:
            raise ValueError("domain must be nonempty")
        self.d = d
        self.relations = dict(relations or {})
        self.endomaps = {n: tuple(g) for n, g in (endomaps or {}).items()}
        for name, rel in self.relations.items():
            for t in rel.tuples:
                if any(not 0 <= v < d for v in t):
                    raise ValueError(f"relation {name!r}: tuple {t} leaves the domain")
        for name, g in self.endomaps.items():
            if len(g) != d or any(not 0 <= v < d for v in g):
                raise ValueError(f"endomap {name!r} is not a map on [0, {d})")

    def with_relation(self, name: str, rel: Relation) -> "FiniteStructure":
        rels = dict(self.relations)
        rels[name] = rel
        return FiniteStructure(self.d, rels, self.endomaps)

    @classmethod
    def from_type_structure(cls, T: TypeStructure) -> "FiniteStructure":
        """Unary relations (deduplicated by extension) plus the generator restrictions as endomaps."""
        rels, seen = {}, set()
        for name, imap in T.unary_keys():
            members = T.unary(name, imap)
            if members in seen:
                continue
            seen.add(members)
            rels[f"{name}{list(imap)}"] = Relation(1, [(p,) for p in members])
        maps = {}
        for imap in monoid_generators(T.m):
            maps[f"restrict{list(imap)}"] = tuple(T.index[restrict_type(p, imap)] for p in T.domain)
        return cls(len(T), rels, maps)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "relations": {n: {"arity": r.arity, "tuples": sorted(list(t) for t in r.tuples)}
                          for n, r in self.relations.items()},
            "endomaps": {n: list(g) for n, g in self.endomaps.items()},
        }

    @classmethod
    def from_json(cls, obj) -> "FiniteStructure":
        if "domain" in obj and "m" in obj:
            return cls.from_type_structure(TypeStructure.from_json(obj))
        rels = {n: Relation(int(r["arity"]), r["tuples"]) for n, r in obj.get("relations", {}).items()}
        return cls(int(obj["d"]), rels, obj.get("endomaps", {}))


# -- identities ---------------------------------------------------------------

SIGGERS = "siggers"
SIGGERS4 = "siggers4"
CYCLIC = "cyclic"
WNU = "wnu"
WNU_PAIR = "wnupair"


@dataclass(frozen=True)
class IdentitySpec:
    kind: str
    k: int = 0
    idempotent: bool = False

    def __post_init__(self):
        if self.kind == SIGGERS:
            object.__setattr__(self, "k", 6)
        elif self.kind == SIGGERS4:
            object.__setattr__(self, "k", 4)
        elif self.kind == WNU_PAIR:
            object.__setattr__(self, "k", 4)
        elif self.kind in (CYCLIC, WNU):
            if not 2 <= self.k <= MAX_ARITY:
                raise ValueError(f"{self.kind} arity must be in [2, {MAX_ARITY}], got {self.k}")
        else:
            raise ValueError(f"unknown identity kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str, idempotent: bool = False) -> "IdentitySpec":
        kind, _, k = text.strip().lower().partition(":")
        if kind in (CYCLIC, WNU):
            if not k:
                raise ValueError(f"{kind} needs an arity, e.g. {kind}:3")
            return cls(kind, int(k), idempotent)
        if k:
            raise ValueError(f"{kind} takes no arity")
        return cls(kind, 0, idempotent)

    @property
    def symbols(self) -> list:
        if self.kind == WNU_PAIR:
            return [("f", 4), ("g", 3)]
        return [("f", self.k)]

    def __str__(self):
        base = self.kind if self.kind in (SIGGERS, SIGGERS4, WNU_PAIR) else f"{self.kind}:{self.k}"
        return base + (" (idempotent)" if self.idempotent else "")

    def identifications(self, d: int) -> Iterator[tuple]:
        """Pairs of ``(symbol, argument tuple)`` the identity forces to be equal."""
        if self.kind == SIGGERS:
            for x, y, z in itertools.product(range(d), repeat=3):
                yield ("f", (x, y, x, z, y, z)), ("f", (y, x, z, x, z, y))
        elif self.kind == SIGGERS4:
            for a, r, e in itertools.product(range(d), repeat=3):
                yield ("f", (a, r, e, a)), ("f", (r, a, r, e))
        elif self.kind == CYCLIC:
            for t in itertools.product(range(d), repeat=self.k):
                yield ("f", t), ("f", t[1:] + t[:1])
        elif self.kind == WNU:
            yield from _wnu_pairs("f", self.k, d)
        else:
            yield from _wnu_pairs("f", 4, d)
            yield from _wnu_pairs("g", 3, d)
            for x, y in itertools.product(range(d), repeat=2):
                yield ("f", (y, x, x, x)), ("g", (y, x, x))


def _wnu_pairs(sym: str, k: int, d: int):
    for x, y in itertools.product(range(d), repeat=2):
        first = (y,) + (x,) * (k - 1)
        for pos in range(1, k):
            other = (x,) * pos + (y,) + (x,) * (k - pos - 1)
            yield (sym, first), (sym, other)


# -- operations ---------------------------------------------------------------

class Operation:
    d: int
    arity: int

    def __call__(self, *args) -> int:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class OperationTable(Operation):
    """Full table of a ``k``-ary operation, row-major over ``[d]^k``."""

    def __init__(self, d: int, arity: int, values: Sequence[int]):
        if len(values) != d ** arity:
            raise ValueError(f"table needs {d ** arity} entries, got {len(values)}")
        self.d, self.arity, self.values = d, arity, tuple(values)

    def index(self, args) -> int:
        k = 0
        for a in args:
            k = k * self.d + a
        return k

    def __call__(self, *args) -> int:
        if len(args) != self.arity:
            raise ValueError(f"expected {self.arity} arguments")
        return self.values[self.index(args)]

    def __eq__(self, other):
        return (isinstance(other, OperationTable) and
                (self.d, self.arity, self.values) == (other.d, other.arity, other.values))

    def __hash__(self):
        return hash((self.d, self.arity, self.values))

    def __repr__(self):
        return f"OperationTable(d={self.d}, arity={self.arity}, values={list(self.values)})"

    def to_json(self) -> dict:
        return {"arity": self.arity, "d": self.d, "table": list(self.values)}


class MinorOperation(Operation):
    """``f(x_1, .., x_n) = base(x_{pos[0]}, .., x_{pos[k-1]})`` (positions 1-based)."""

    def __init__(self, base: Operation, arity: int, positions: Sequence[int]):
        if len(positions) != base.arity or any(not 1 <= p <= arity for p in positions):
            raise ValueError("bad minor positions")
        self.base, self.d, self.arity = base, base.d, arity
        self.positions = tuple(positions)

    def __call__(self, *args) -> int:
        if len(args) != self.arity:
            raise ValueError(f"expected {self.arity} arguments")
        return self.base(*(args[p - 1] for p in self.positions))

    def materialize(self) -> OperationTable:
        return OperationTable(self.d, self.arity,
                              [self(*t) for t in itertools.product(range(self.d), repeat=self.arity)])

    def to_json(self) -> dict:
        return {"arity": self.arity, "d": self.d, "minor_of": self.base.to_json(),
                "positions": list(self.positions)}


def check_identity(tables: dict, ident: IdentitySpec, d: int) -> bool:
    """Exhaustively check every instance of the identity (and idempotence if flagged)."""
    for sym, k in ident.symbols:
        if sym not in tables:
            raise ValueError(f"missing operation {sym!r}")
        if tables[sym].arity != k:
            raise ValueError(f"operation {sym!r} has arity {tables[sym].arity}, identity needs {k}")
    for (s1, t1), (s2, t2) in ident.identifications(d):
        if tables[s1](*t1) != tables[s2](*t2):
            return False
    if ident.idempotent:
        for sym, k in ident.symbols:
            if any(tables[sym](*((x,) * k)) != x for x in range(d)):
                return False
    return True


def preserves(op: Operation, D: FiniteStructure) -> bool:
    """Exhaustive check that ``op`` is a polymorphism of ``D``.

    A minor of an operation preserves whatever the operation preserves, so
    minors are audited through their base.
    """
    if isinstance(op, MinorOperation):
        return preserves(op.base, D)
    k = op.arity
    for rel in D.relations.values():
        tuples = list(rel.tuples)
        for cols in itertools.product(tuples, repeat=k):
            row = tuple(op(*(c[t] for c in cols)) for t in range(rel.arity))
            if row not in rel.tuples:
                return False
    for g in D.endomaps.values():
        for a in itertools.product(range(D.d), repeat=k):
            if g[op(*a)] != op(*(g[x] for x in a)):
                return False
    return True


# -- indicator ----------------------------------------------------------------

class Indicator:
    """Indicator CSP for ``ident`` over ``D``; solutions are the operation tables."""

    def __init__(self, D: FiniteStructure, ident: IdentitySpec,
                 max_constraints: int = DEFAULT_MAX_CONSTRAINTS):
        self.D, self.ident = D, ident
        d = D.d
        estimate = 0
        for _, k in ident.symbols:
            estimate += sum(len(r.tuples) ** k for r in D.relations.values() if r.arity > 1)
            estimate += len(D.endomaps) * d ** k
        if estimate > max_constraints:
            raise ResourceLimitExceeded(
                f"indicator for {ident} on a {d}-element structure needs ~{estimate} constraints"
                f" (limit {max_constraints})")

        # union-find over all (symbol, tuple) nodes
        self.offset = {}
        total = 0
        for sym, k in ident.symbols:
            self.offset[sym] = total
            total += d ** k
        parent = list(range(total))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in ident.identifications(d):
            ra, rb = find(self.node(*a)), find(self.node(*b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = {}
        self.var_of = [0] * total
        for x in range(total):
            r = find(x)
            if r not in roots:
                roots[r] = len(roots)
            self.var_of[x] = roots[r]

        inst = SolverInstance()
        for v in range(len(roots)):
            inst.add_variable(d, name=v)
        self.n_classes = len(roots)

        if ident.idempotent:
            for sym, k in ident.symbols:
                for x in range(d):
                    inst.add_unary(self.var_of[self.node(sym, (x,) * k)], [x])

        seen = set()
        for name, rel in D.relations.items():
            tuples = sorted(rel.tuples)
            if rel.arity == 2:
                brel = BinaryRelation.from_pairs(tuples, d, d)
            for sym, k in ident.symbols:
                for cols in itertools.product(tuples, repeat=k):
                    scope = tuple(self.var_of[self.node(sym, tuple(c[t] for c in cols))]
                                  for t in range(rel.arity))
                    key = (name, scope)
                    if key in seen:
                        continue
                    seen.add(key)
                    if rel.arity == 1:
                        inst.add_unary(scope[0], [t[0] for t in tuples])
                    elif rel.arity == 2:
                        inst.add_binary(scope[0], scope[1], brel)
                    else:
                        inst.add_nary(scope, tuples)

        for gname, g in D.endomaps.items():
            graph = BinaryRelation.from_pairs(((v, g[v]) for v in range(d)), d, d)
            for sym, k in ident.symbols:
                for t in itertools.product(range(d), repeat=k):
                    u = self.var_of[self.node(sym, t)]
                    w = self.var_of[self.node(sym, tuple(g[x] for x in t))]
                    key = (gname, u, w)
                    if key not in seen:
                        seen.add(key)
                        inst.add_binary(u, w, graph)
        self.instance = inst

    def node(self, sym: str, t: Sequence[int]) -> int:
        k = 0
        for a in t:
            k = k * self.D.d + a
        return self.offset[sym] + k

    def decode(self, assignment: Sequence[int]) -> dict:
        d = self.D.d
        out = {}
        for sym, k in self.ident.symbols:
            base = self.offset[sym]
            out[sym] = OperationTable(d, k, [assignment[self.var_of[base + x]] for x in range(d ** k)])
        return out


def indicator_instance(D: FiniteStructure, ident: IdentitySpec) -> SolverInstance:
    return Indicator(D, ident).instance


@dataclass
class PolymorphismResult:
    found: bool
    tables: dict = field(default_factory=dict)
    via: str = ""
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"found": self.found, "via": self.via, "stats": self.stats,
                "operations": {n: op.to_json() for n, op in self.tables.items()}}


# Siggers identities follow from lower-arity ones by taking minors:
# with c commutative, s(x1..x6) = c(x1, x2) gives s(x,y,x,z,y,z) = c(x,y) = c(y,x);
# with c cyclic ternary, s(x1..x6) = c(x1, x4, x5) gives c(x,z,y) vs c(y,x,z), a rotation;
# with t(a,r,e,a) = t(r,a,r,e), s(x1..x6) = t(x1, x2, x6, x3) gives t(x,y,z,x) vs t(y,x,y,z).
# A finite structure has a 6-ary Siggers polymorphism iff it has a 4-ary one, so the
# last search is decisive and its indicator has d^4 rather than d^6 argument tuples.
_SIGGERS_MINORS = ((IdentitySpec(CYCLIC, 2), (1, 2)), (IdentitySpec(CYCLIC, 3), (1, 4, 5)),
                   (IdentitySpec(SIGGERS4), (1, 2, 6, 3)))


def _search(D, ident, config, max_constraints):
    ind = Indicator(D, ident, max_constraints)
    res = solve(ind.instance, config)
    if res.status == "limit":
        raise ResourceLimitExceeded(f"solver limit reached searching for {ident}")
    stats = dict(res.stats, variables=ind.instance.n_vars, constraints=ind.instance.n_constraints())
    return (ind.decode(res.assignment) if res.sat else None), stats


def has_polymorphism(D: FiniteStructure, ident: IdentitySpec, config: Optional[SolverConfig] = None,
                     shortcuts: bool = True,
                     max_constraints: int = DEFAULT_MAX_CONSTRAINTS) -> PolymorphismResult:
    """Search for operations satisfying ``ident`` that preserve ``D``.

    For Siggers identities (when ``shortcuts``) commutative binary, cyclic
    ternary and 4-ary Siggers polymorphisms are tried in turn, since their
    minors are Siggers operations.  The 4-ary search settles the question;
    the 6-ary indicator is solved only if it exceeds the size limit.
    """
    tables, via, stats = None, "", {}
    if ident.kind == SIGGERS and shortcuts:
        for base, positions in _SIGGERS_MINORS:
            sub = IdentitySpec(base.kind, base.k, ident.idempotent)
            try:
                found, stats[str(sub)] = _search(D, sub, config, max_constraints)
            except ResourceLimitExceeded:
                if sub.kind == SIGGERS4:
                    raise  # the 6-ary search is strictly larger
                continue
            if found is not None:
                tables = {"f": MinorOperation(found["f"], 6, positions)}
                via = f"minor of {sub}"
                break
            if sub.kind == SIGGERS4:
                return PolymorphismResult(False, {}, f"no {sub} polymorphism", stats)
    if tables is None:
        found, stats[str(ident)] = _search(D, ident, config, max_constraints)
        if found is None:
            return PolymorphismResult(False, {}, "indicator", stats)
        tables, via = found, "indicator"
    if not check_identity(tables, ident, D.d):
        raise AssertionError(f"audit failed: returned operation does not satisfy {ident}")
    for name, op in tables.items():
        if not preserves(op, D):
            raise AssertionError(f"audit failed: operation {name!r} is not a polymorphism")
    return PolymorphismResult(True, tables, via, stats)


# -- classification -----------------------------------------------------------

TRACTABLE = "Tractable"
HARD_CANDIDATE = "HardCandidate"
NOT_APPLICABLE = "NotApplicable"


@dataclass
class Classification:
    verdict: str
    m: int
    structure_size: int
    expanded: bool
    search: PolymorphismResult
    explanation: str
    assumed: bool

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "m": self.m, "type_structure_size": self.structure_size,
                "constants_expanded": self.expanded, "hypotheses_user_asserted": self.assumed,
                "explanation": self.explanation, "search": self.search.to_json()}


def classify_reduct(spec: PartitionSpec, reduct, assume_core_and_tame: bool = False,
                    expand: bool = True, config: Optional[SolverConfig] = None,
                    max_constraints: int = DEFAULT_MAX_CONSTRAINTS) -> Classification:
    """Look for a Siggers polymorphism of the type structure of the (expanded) reduct."""
    if not spec.is_stabilised:
        raise SpecError("classify_reduct needs a stabilised spec")
    reduct.check_blocks(spec)
    if expand:
        ex = expand_with_constants(spec)
        spec, reduct = ex.spec, constant_relations(ex, reduct)
    m = choose_m(spec, reduct, CLASSIFY)
    T = build(spec, reduct, m)
    D = FiniteStructure.from_type_structure(T)
    res = has_polymorphism(D, IdentitySpec(SIGGERS), config, max_constraints=max_constraints)
    if res.found:
        verdict = TRACTABLE
        why = (f"the {len(T)}-element type structure (m = {m}) has a Siggers polymorphism "
               f"({res.via}), so the CSP reduces in polynomial time to a tractable finite CSP")
    elif assume_core_and_tame:
        verdict = HARD_CANDIDATE
        why = ("no Siggers polymorphism of the type structure exists; NP-complete provided the "
               "user-asserted hypotheses (model-complete core, endomorphisms exactly the "
               "block-preserving injections) hold")
    else:
        verdict = NOT_APPLICABLE
        why = ("no Siggers polymorphism of the type structure exists, but hardness is only claimed "
               "when the structure is asserted to be a model-complete core with tame endomorphisms")
    return Classification(verdict, m, len(T), expand, res, why, assume_core_and_tame)


def dumps(result) -> str:
    return json.dumps(result.to_json(), indent=2)
