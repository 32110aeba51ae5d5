"""Translate an instance over the reduct into a finite CSP over the type structure.

Each variable of the finite instance is an increasing map ``v: [m] -> V``
(a sorted m-subset of the instance variables) and stands for the type of the
m-tuple it selects.  A conjunct ``R(j)`` becomes the unary constraint
``<R, v^-1 j>(v)`` on maps covering ``Im(j)``; two maps sharing variables are
tied by ``Comp`` on the shared positions.  A solution is lifted back by
reading equalities and blocks off the chosen types.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional, Sequence

from . import formula as fm
from .finite_csp import SolveResult, SolverConfig, SolverInstance, solve
from .type_structure import ReductSpec, TypeStructure
from .unary_base import PartitionSpec, SpecError

ALL_COVERING = "all-covering"
SINGLE_CANONICAL = "single-canonical"
PAD_PREFIX = "_pad"


class InstanceError(ValueError):
    pass


class InconsistentSolution(AssertionError):
    """A finite solution could not be lifted; the solver or the construction is broken."""


@dataclass(frozen=True)
class Conjunct:
    rel: str
    args: tuple


@dataclass
class CspInstance:
    variables: list
    conjuncts: list

    def __post_init__(self):
        self.variables = list(self.variables)
        if len(set(self.variables)) != len(self.variables):
            raise InstanceError("duplicate variable names")
        self.conjuncts = [c if isinstance(c, Conjunct) else Conjunct(c[0], tuple(c[1]))
                          for c in self.conjuncts]

    def validate(self, reduct: ReductSpec) -> None:
        known = set(self.variables)
        for c in self.conjuncts:
            if c.rel not in reduct:
                raise InstanceError(f"unknown relation {c.rel!r}")
            if len(c.args) != reduct[c.rel].arity:
                raise InstanceError(f"{c.rel} has arity {reduct[c.rel].arity}, got {len(c.args)} arguments")
            for x in c.args:
                if x not in known:
                    raise InstanceError(f"unknown variable {x!r} in {c.rel}{c.args}")

    def to_json(self) -> dict:
        return {"vars": list(self.variables),
                "conjuncts": [{"rel": c.rel, "args": list(c.args)} for c in self.conjuncts]}

    @classmethod
    def from_json(cls, obj) -> "CspInstance":
        try:
            return cls(list(obj["vars"]),
                       [Conjunct(c["rel"], tuple(c["args"])) for c in obj.get("conjuncts", [])])
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"malformed instance: {exc}") from exc


@dataclass(frozen=True)
class UnaryConstraint:
    var: int           # index into FiniteCspInstance.variables
    rel: str
    imap: tuple        # map [r] -> [m]


@dataclass(frozen=True)
class CompConstraint:
    u: int
    v: int
    iu: tuple
    iv: tuple


@dataclass
class FiniteCspInstance:
    names: list        # padded instance variable names, in declared order
    variables: list    # sorted index tuples, i.e. increasing maps [m] -> names
    m: int
    unary: list = field(default_factory=list)
    comp: list = field(default_factory=list)
    n_original: int = 0

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "names": self.names,
            "variables": [[self.names[k] for k in v] for v in self.variables],
            "constraints": (
                [{"kind": "unary", "var": c.var, "rel": c.rel, "map": list(c.imap)} for c in self.unary]
                + [{"kind": "comp", "u": c.u, "v": c.v, "iu": list(c.iu), "iv": list(c.iv)}
                   for c in self.comp]),
        }

    def to_solver(self, T: TypeStructure) -> SolverInstance:
        inst = SolverInstance()
        d = len(T)
        for v in self.variables:
            inst.add_variable(d, name=tuple(self.names[k] for k in v))
        for c in self.unary:
            inst.add_unary(c.var, T.unary_mask(c.rel, c.imap))
        for c in self.comp:
            inst.add_binary(c.u, c.v, T.comp_relation(c.iu, c.iv))
        return inst


def _pad(names: list, m: int) -> list:
    out = list(names)
    taken = set(out)
    k = 0
    while len(out) < m:
        name = f"{PAD_PREFIX}{k}"
        k += 1
        if name not in taken:
            out.append(name)
    return out


def reduce(psi: CspInstance, T: TypeStructure, policy: str = ALL_COVERING) -> FiniteCspInstance:
    if policy not in (ALL_COVERING, SINGLE_CANONICAL):
        raise ValueError(f"unknown policy {policy!r}")
    if not psi.variables:
        raise InstanceError("instance has no variables")
    psi.validate(T.reduct)
    m = T.m
    names = _pad(psi.variables, m)
    pos = {x: k for k, x in enumerate(names)}
    variables = list(combinations(range(len(names)), m))
    var_index = {v: k for k, v in enumerate(variables)}
    out = FiniteCspInstance(names, variables, m, n_original=len(psi.variables))

    seen = set()
    for c in psi.conjuncts:
        img = sorted({pos[x] for x in c.args})
        if policy == ALL_COVERING:
            covering = [v for v in variables if set(img) <= set(v)]
        else:
            rest = [k for k in range(len(names)) if k not in img]
            covering = [tuple(sorted(img + rest[:m - len(img)]))]
        for v in covering:
            imap = tuple(v.index(pos[x]) + 1 for x in c.args)
            con = UnaryConstraint(var_index[v], c.rel, imap)
            if con not in seen:
                seen.add(con)
                out.unary.append(con)

    for a, b in combinations(range(len(variables)), 2):
        u, v = variables[a], variables[b]
        common = sorted(set(u) & set(v))
        if not common:
            continue
        out.comp.append(CompConstraint(a, b, tuple(u.index(x) + 1 for x in common),
                                       tuple(v.index(x) + 1 for x in common)))
    return out


def metrics(phi: FiniteCspInstance) -> dict:
    return {"variables": len(phi.variables), "unary": len(phi.unary), "comp": len(phi.comp),
            "constraints": len(phi.unary) + len(phi.comp)}


def expected_variable_count(n: int, m: int) -> int:
    return comb(max(n, m), m)


# -- lifting ------------------------------------------------------------------

@dataclass
class Witness:
    """Equivalence classes of instance variables with one block per class."""

    classes: list      # list of lists of variable names
    blocks: list       # block of each class

    def class_of(self) -> dict:
        return {x: k for k, cls in enumerate(self.classes) for x in cls}

    def to_json(self) -> dict:
        return {"classes": [list(c) for c in self.classes], "blocks": list(self.blocks)}

    @classmethod
    def from_json(cls, obj) -> "Witness":
        return cls([list(c) for c in obj["classes"]], list(obj["blocks"]))


def lift_solution(psi: CspInstance, phi: FiniteCspInstance, T: TypeStructure,
                  h: Sequence[int]) -> Witness:
    """Quotient the instance variables by the equalities the solution ``h`` asserts."""
    if len(h) != len(phi.variables) or any(x is None for x in h):
        raise InstanceError("assignment does not cover every variable of the finite instance")
    n = len(phi.names)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    block = [None] * n
    for v, t in zip(phi.variables, h):
        p = T.domain[t]
        for a in range(phi.m):
            b = p.block_at(a + 1)
            x = v[a]
            if block[x] is None:
                block[x] = b
            elif block[x] != b:
                raise InconsistentSolution(f"variable {phi.names[x]} read in blocks {block[x]} and {b}")
            for c in range(a + 1, phi.m):
                if p.classes[a] == p.classes[c]:
                    parent[find(v[a])] = find(v[c])
    for v, t in zip(phi.variables, h):
        p = T.domain[t]
        for a in range(phi.m):
            for c in range(a + 1, phi.m):
                if (find(v[a]) == find(v[c])) != (p.classes[a] == p.classes[c]):
                    raise InconsistentSolution(
                        f"{phi.names[v[a]]} ~ {phi.names[v[c]]} disagrees with the type chosen for {v}")

    groups = {}
    for x in range(phi.n_original):
        groups.setdefault(find(x), []).append(x)
    classes, blocks = [], []
    for members in groups.values():
        bs = {block[x] for x in members}
        if len(bs) != 1:
            raise InconsistentSolution(f"class {[phi.names[x] for x in members]} spans blocks {bs}")
        classes.append([phi.names[x] for x in members])
        blocks.append(bs.pop())
    return Witness(classes, blocks)


def verify_witness(psi: CspInstance, witness: Witness, spec: PartitionSpec,
                   reduct: ReductSpec) -> bool:
    """Whether the witness is realisable in the base structure and satisfies every conjunct."""
    cls = witness.class_of()
    if set(cls) != set(psi.variables) or len(cls) != sum(len(c) for c in witness.classes):
        return False
    used = {}
    for b in witness.blocks:
        try:
            blk = spec.block(b)
        except KeyError:
            return False
        used[b] = used.get(b, 0) + 1
        if blk.size is not None and used[b] > blk.size:
            return False
    for c in psi.conjuncts:
        assignment = [(witness.blocks[cls[x]], cls[x]) for x in c.args]
        if not fm.evaluate(reduct[c.rel].definition, assignment):
            return False
    return True


@dataclass
class Outcome:
    status: str                 # "sat", "unsat" or "limit"
    witness: Optional[Witness]
    metrics: dict
    stats: dict
    verified: Optional[bool] = None


def decide(psi: CspInstance, T: TypeStructure, policy: str = ALL_COVERING,
           config: Optional[SolverConfig] = None) -> Outcome:
    """Reduce, solve, and on success lift and verify."""
    if not T.spec.is_stabilised:
        raise SpecError("type structure must be built over a stabilised spec")
    if not psi.variables:
        if psi.conjuncts:
            raise InstanceError("conjuncts given but no variables declared")
        return Outcome("sat", Witness([], []), {"variables": 0, "unary": 0, "comp": 0, "constraints": 0},
                       {}, True)
    phi = reduce(psi, T, policy)
    res: SolveResult = solve(phi.to_solver(T), config)
    out = Outcome(res.status, None, metrics(phi), res.stats)
    if res.sat:
        out.witness = lift_solution(psi, phi, T, res.assignment)
        out.verified = verify_witness(psi, out.witness, T.spec, T.reduct)
        if not out.verified:
            raise InconsistentSolution("lifted witness fails verification")
    return out
