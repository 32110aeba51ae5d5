"""The finite structure of m-types of a reduct of a unary structure.

Its domain is the set of m-types of the base structure.  For every relation
``R`` of the reduct (arity ``r``, definition ``chi``) and every index map
``i: [r] -> [m]`` there is a unary relation ``<R, i>`` holding the types
that contain ``chi(z_i(1), .., z_i(r))``.  The binary compatibility relation
``Comp_{i,j}`` holds of ``(p, q)`` when restricting ``p`` along ``i`` and
``q`` along ``j`` gives the same type; it is evaluated lazily.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import formula as fm
from .finite_csp import IntensionalRelation, bits, mask_of
from .unary_base import (MType, PartitionSpec, SpecError, bounds, enumerate_types,
                         restrict_type, type_contains)

REDUCE = "reduce"
CLASSIFY = "classify"


@dataclass(frozen=True)
class RelationSymbol:
    name: str
    arity: int
    definition: object  # a formula of width <= arity

    def __post_init__(self):
        if self.arity < 1:
            raise SpecError(f"relation {self.name!r}: arity must be >= 1")
        if fm.width(self.definition) > self.arity:
            raise SpecError(f"relation {self.name!r}: definition mentions z{fm.width(self.definition)}"
                            f" but arity is {self.arity}")


@dataclass(frozen=True)
class ReductSpec:
    relations: tuple

    def __init__(self, relations: Iterable[RelationSymbol]):
        relations = tuple(relations)
        names = [r.name for r in relations]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate relation names in {names}")
        object.__setattr__(self, "relations", relations)

    def __getitem__(self, name: str) -> RelationSymbol:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(name)

    def __contains__(self, name) -> bool:
        return any(r.name == name for r in self.relations)

    @property
    def max_arity(self) -> int:
        return max((r.arity for r in self.relations), default=0)

    def check_blocks(self, spec: PartitionSpec) -> None:
        known = set(spec.names)
        for r in self.relations:
            unknown = fm.blocks_used(r.definition) - known
            if unknown:
                raise SpecError(f"relation {r.name!r} mentions unknown blocks {sorted(unknown)}")

    def rename_blocks(self, rewrite: dict) -> "ReductSpec":
        return ReductSpec(RelationSymbol(r.name, r.arity, fm.rename_blocks(r.definition, rewrite))
                          for r in self.relations)

    def to_json(self) -> dict:
        return {"relations": [{"name": r.name, "arity": r.arity, "formula": fm.to_text(r.definition)}
                              for r in self.relations]}

    @classmethod
    def from_json(cls, obj, blocks: Optional[Iterable[str]] = None) -> "ReductSpec":
        rels = []
        try:
            for entry in obj["relations"]:
                src = entry.get("formula", entry.get("definition"))
                if src is None:
                    raise SpecError(f"relation {entry.get('name')!r} has no definition")
                phi = fm.parse_formula(src, blocks) if isinstance(src, str) else fm.from_json(src)
                rels.append(RelationSymbol(str(entry["name"]), int(entry["arity"]), phi))
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed reduct spec: {exc}") from exc
        return cls(rels)


def constant_relations(expansion, reduct: ReductSpec) -> ReductSpec:
    """Add one unary relation per named constant of an expansion."""
    taken = {r.name for r in reduct.relations}
    extra = []
    for orig, const in expansion.constants.items():
        name = f"const_{orig}"
        while name in taken:
            name += "_"
        taken.add(name)
        extra.append(RelationSymbol(name, 1, fm.InBlock(const, 1)))
    return ReductSpec(list(reduct.rename_blocks(expansion.rewrite).relations) + extra)


def choose_m(spec: PartitionSpec, reduct: ReductSpec, purpose: str = REDUCE) -> int:
    """Smallest m for which the reduction (or the type-polymorphism correspondence) applies.

    Both purposes give ``max(m_a + 1, m_b, 3)`` where ``m_a`` is the largest
    arity among the reduct and the unary block predicates, and ``m_b`` the
    largest bound size.
    """
    if purpose not in (REDUCE, CLASSIFY):
        raise ValueError(f"unknown purpose {purpose!r}")
    if not spec.is_stabilised:
        raise SpecError("choose_m needs a stabilised spec")
    m_a = max(reduct.max_arity, 1)
    m_b = bounds(spec).max_size
    return max(m_a + 1, m_b, 3)


def index_maps(r: int, m: int):
    return itertools.product(range(1, m + 1), repeat=r)


class TypeStructure:
    """``T_{B,m}(A)`` for a stabilised unary base ``B`` and a reduct ``A``."""

    def __init__(self, spec: PartitionSpec, reduct: ReductSpec, m: int,
                 domain: Optional[Sequence[MType]] = None):
        self.spec = spec
        self.reduct = reduct
        self.m = m
        self.domain = list(domain) if domain is not None else enumerate_types(spec, m)
        self.index = {p: k for k, p in enumerate(self.domain)}
        self._unary = {}
        self._rtypes = {}
        self._restrict = {}
        self._comp = {}

    def __len__(self):
        return len(self.domain)

    def __eq__(self, other):
        if not isinstance(other, TypeStructure):
            return NotImplemented
        return (self.m == other.m and self.domain == other.domain and self.spec == other.spec
                and self.reduct == other.reduct)

    def __hash__(self):
        return hash((self.m, tuple(self.domain)))

    # -- unary relations --------------------------------------------------------

    def unary_mask(self, name: str, imap: Sequence[int]) -> int:
        """Members of ``<name, imap>`` as a bitmask over domain indices."""
        key = (name, tuple(imap))
        got = self._unary.get(key)
        if got is None:
            rel = self.reduct[name]
            if len(key[1]) != rel.arity or any(not 1 <= k <= self.m for k in key[1]):
                raise SpecError(f"index map {key[1]} is not a map [{rel.arity}] -> [{self.m}]")
            phi = fm.reindex(rel.definition, key[1])
            got = mask_of(k for k, p in enumerate(self.domain) if type_contains(p, phi))
            self._unary[key] = got
        return got

    def unary(self, name: str, imap: Sequence[int]) -> frozenset:
        return frozenset(bits(self.unary_mask(name, imap)))

    def unary_keys(self):
        for rel in self.reduct.relations:
            for imap in index_maps(rel.arity, self.m):
                yield rel.name, imap

    @property
    def unary_relations(self) -> dict:
        return {key: self.unary(*key) for key in self.unary_keys()}

    # -- restrictions and Comp --------------------------------------------------

    def rtypes(self, r: int) -> tuple:
        got = self._rtypes.get(r)
        if got is None:
            types = enumerate_types(self.spec, r)
            got = (types, {p: k for k, p in enumerate(types)})
            self._rtypes[r] = got
        return got

    def restriction(self, imap: Sequence[int]) -> tuple:
        """For each domain index, the id of its restriction along ``imap`` among the r-types."""
        imap = tuple(imap)
        got = self._restrict.get(imap)
        if got is None:
            if not imap or any(not 1 <= k <= self.m for k in imap):
                raise SpecError(f"index map {imap} has image outside [1, {self.m}]")
            ids = self.rtypes(len(imap))[1]
            got = tuple(ids[restrict_type(p, imap)] for p in self.domain)
            self._restrict[imap] = got
        return got

    def comp(self, i: Sequence[int], j: Sequence[int], p: int, q: int) -> bool:
        if len(i) != len(j):
            raise SpecError("Comp needs index maps of equal length")
        return self.restriction(i)[p] == self.restriction(j)[q]

    def comp_relation(self, i: Sequence[int], j: Sequence[int]) -> IntensionalRelation:
        """``Comp_{i,j}`` as a solver relation; supports are built from restriction classes."""
        key = (tuple(i), tuple(j))
        got = self._comp.get(key)
        if got is None:
            if len(key[0]) != len(key[1]):
                raise SpecError("Comp needs index maps of equal length")
            ri, rj = self.restriction(key[0]), self.restriction(key[1])
            by_class = {}
            for q, c in enumerate(rj):
                by_class[c] = by_class.get(c, 0) | 1 << q
            d = len(self.domain)
            got = IntensionalRelation(lambda p, q, ri=ri, rj=rj: ri[p] == rj[q], d, d,
                                      supports=lambda p, ri=ri, bc=by_class: bc.get(ri[p], 0))
            self._comp[key] = got
        return got

    def comp_pairs(self, i: Sequence[int], j: Sequence[int]) -> list:
        return self.comp_relation(i, j).pairs()

    # -- serialisation ----------------------------------------------------------

    def to_json(self, materialize_comp: bool = False) -> dict:
        out = {
            "m": self.m,
            "partition": self.spec.to_json(),
            "reduct": self.reduct.to_json(),
            "domain": [p.to_json() for p in self.domain],
            "unary": [{"rel": name, "map": list(imap), "members": sorted(self.unary(name, imap))}
                      for name, imap in self.unary_keys()],
        }
        if materialize_comp:
            comp = []
            for r in range(1, self.m + 1):
                maps = list(index_maps(r, self.m))
                for i in maps:
                    for j in maps:
                        comp.append({"iu": list(i), "iv": list(j),
                                     "pairs": [list(pq) for pq in self.comp_pairs(i, j)]})
            out["comp"] = comp
        else:
            out["comp"] = "lazy"
        return out

    @classmethod
    def from_json(cls, obj) -> "TypeStructure":
        spec = PartitionSpec.from_json(obj["partition"])
        reduct = ReductSpec.from_json(obj["reduct"])
        domain = [MType.from_json(p) for p in obj["domain"]]
        T = cls(spec, reduct, int(obj["m"]), domain)
        for entry in obj.get("unary", []):
            T._unary[(entry["rel"], tuple(entry["map"]))] = mask_of(entry["members"])
        return T


def build(spec: PartitionSpec, reduct: ReductSpec, m: int) -> TypeStructure:
    if not spec.is_stabilised:
        raise SpecError("the type structure is built over a stabilised spec")
    if m < 1:
        raise SpecError("m must be positive")
    if m < reduct.max_arity:
        raise SpecError(f"m = {m} is below the largest relation arity {reduct.max_arity}")
    reduct.check_blocks(spec)
    return TypeStructure(spec, reduct, m)


def export(T: TypeStructure, path, materialize_comp: bool = False) -> None:
    with open(path, "w") as fh:
        json.dump(T.to_json(materialize_comp), fh)


def load(path) -> TypeStructure:
    with open(path) as fh:
        return TypeStructure.from_json(json.load(fh))
