"""Small finite algebras: subalgebras, trivial two-element quotients, clones, mashups."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .polymorphism import OperationTable

SUBALGEBRA_MAX_D = 12
MASHUP_MAX_D = 8


class GuardExceeded(ValueError):
    """Input is larger than the exhaustive procedures are meant for."""


class FiniteAlgebra:
    def __init__(self, d: int, ops: dict):
        if d < 1:
            raise ValueError("domain must be nonempty")
        self.d = d
        self.ops = {}
        for name, op in ops.items():
            if not isinstance(op, OperationTable):
                op = OperationTable(d, op[0], op[1])
            if op.d != d:
                raise ValueError(f"operation {name!r} lives on a {op.d}-element set")
            if op.arity < 1:
                raise ValueError(f"operation {name!r}: nullary operations are not supported")
            if any(not 0 <= v < d for v in op.values):
                raise ValueError(f"operation {name!r} has values outside [0, {d})")
            self.ops[name] = op

    def to_json(self) -> dict:
        return {"d": self.d, "ops": {n: {"arity": op.arity, "table": list(op.values)}
                                     for n, op in self.ops.items()}}

    @classmethod
    def from_json(cls, obj) -> "FiniteAlgebra":
        try:
            d = int(obj["d"])
            return cls(d, {n: OperationTable(d, int(o["arity"]), o["table"])
                           for n, o in obj["ops"].items()})
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed algebra: {exc}") from exc


def projection(d: int, arity: int, i: int) -> OperationTable:
    """The ``i``-th (1-based) ``arity``-ary projection on ``[d]``."""
    return OperationTable(d, arity, [t[i - 1] for t in itertools.product(range(d), repeat=arity)])


def is_cyclic(op: OperationTable) -> bool:
    return all(op(*t) == op(*(t[1:] + t[:1])) for t in itertools.product(range(op.d), repeat=op.arity))


# -- subalgebras --------------------------------------------------------------

def closure(A: FiniteAlgebra, seed) -> frozenset:
    """Smallest subset containing ``seed`` and closed under every operation."""
    current = set(seed)
    frontier = set(current)
    while frontier:
        new = set()
        old = current - frontier
        for op in A.ops.values():
            # every tuple with at least one frontier entry, each exactly once
            for p in range(op.arity):
                pools = [old] * p + [frontier] + [current] * (op.arity - p - 1)
                for t in itertools.product(*pools):
                    v = op(*t)
                    if v not in current:
                        new.add(v)
        current |= new
        frontier = new
    return frozenset(current)


def subalgebras(A: FiniteAlgebra) -> list:
    """All nonempty subuniverses, sorted by size then elements."""
    if A.d > SUBALGEBRA_MAX_D:
        raise GuardExceeded(f"subalgebra enumeration is limited to d <= {SUBALGEBRA_MAX_D}")
    found = {closure(A, [x]) for x in range(A.d)}
    todo = list(found)
    while todo:
        S = todo.pop()
        for x in range(A.d):
            if x not in S:
                T = closure(A, S | {x})
                if T not in found:
                    found.add(T)
                    todo.append(T)
    return sorted(found, key=lambda S: (len(S), sorted(S)))


@dataclass(frozen=True)
class TrivialQuotient:
    subalgebra: tuple
    classes: tuple      # two tuples partitioning the subalgebra
    projections: dict   # operation name -> 1-based projection index on the quotient

    def to_json(self) -> dict:
        return {"subalgebra": list(self.subalgebra), "classes": [list(c) for c in self.classes],
                "projections": dict(self.projections)}


def _acting_projection(op: OperationTable, S: tuple, cls: dict) -> Optional[int]:
    candidates = set(range(op.arity))
    for t in itertools.product(S, repeat=op.arity):
        c = cls[op(*t)]
        candidates = {i for i in candidates if cls[t[i]] == c}
        if not candidates:
            return None
    return min(candidates) + 1


def trivial_two_quotients(A: FiniteAlgebra):
    """Yield every subalgebra with a two-class congruence on which all operations act as projections."""
    if A.d > SUBALGEBRA_MAX_D:
        raise GuardExceeded(f"quotient search is limited to d <= {SUBALGEBRA_MAX_D}")
    for S in subalgebras(A):
        S = tuple(sorted(S))
        if len(S) < 2:
            continue
        # the first element always sits in class 0
        for rest in itertools.product((0, 1), repeat=len(S) - 1):
            if 1 not in rest:
                continue
            cls = dict(zip(S, (0,) + rest))
            proj = {}
            for name, op in A.ops.items():
                i = _acting_projection(op, S, cls)
                if i is None:
                    break
                proj[name] = i
            else:
                classes = tuple(tuple(x for x in S if cls[x] == c) for c in (0, 1))
                yield TrivialQuotient(S, classes, proj)


def has_trivial_two_quotient(A: FiniteAlgebra) -> Optional[TrivialQuotient]:
    return next(trivial_two_quotients(A), None)


# -- clones -------------------------------------------------------------------

def _check_clone_guard(d: int, max_arity: int) -> None:
    if max_arity < 1 or not ((d <= 2 and max_arity <= 3) or (d == 3 and max_arity <= 2)):
        raise GuardExceeded(f"clone closure supports d = 2 with arity <= 3 or d = 3 with arity <= 2,"
                            f" got d = {d}, arity {max_arity}")


def _term_operations(A: FiniteAlgebra, n: int) -> list:
    """All n-ary term operations: the subpower of A^(d^n) generated by the projections.

    Each n-ary operation is coded by its table read as a base-d number, so
    membership is a lookup in a flat boolean array.
    """
    d = A.d
    L = d ** n
    weights = d ** np.arange(L, dtype=np.int64)
    digits = (np.arange(d ** L, dtype=np.int64)[:, None] // weights) % d
    seen = np.zeros(d ** L, dtype=bool)
    gens = [projection(d, n, i).values for i in range(1, n + 1)]
    codes = sorted({int(np.dot(g, weights)) for g in gens})
    seen[codes] = True
    rows = np.array([digits[c] for c in codes], dtype=np.int64)
    start = 0
    tables = [np.array(op.values, dtype=np.int64) for op in A.ops.values()]
    while start < len(rows):
        N = len(rows)
        fresh = []
        for op, table in zip(A.ops.values(), tables):
            k = op.arity
            for p in range(k):
                ranges = [range(start) if q < p else range(start, N) if q == p else range(N)
                          for q in range(k)]
                if any(len(rg) == 0 for rg in ranges):
                    continue
                last = rows[ranges[-1].start:ranges[-1].stop]
                # the last two argument positions are vectorised, in chunks of the second-last
                head = ranges[:-2]
                mid = ranges[-2] if k >= 2 else range(1)
                step = max(1, 4_000_000 // (len(last) * L))
                for combo in itertools.product(*head):
                    acc = np.zeros(L, dtype=np.int64)
                    for idx in combo:
                        acc = acc * d + rows[idx]
                    for lo in range(mid.start, mid.stop, step):
                        if k >= 2:
                            block = acc * d + rows[lo:min(lo + step, mid.stop)]
                        else:
                            block = acc[None, :]
                        out = table[block[:, None, :] * d + last[None, :, :]]
                        c = (out @ weights).ravel()
                        c = np.unique(c[~seen[c]])
                        if len(c):
                            seen[c] = True
                            fresh.append(c)
        start = N
        if fresh:
            rows = np.concatenate([rows, digits[np.concatenate(fresh)]])
    return [OperationTable(d, n, [int(v) for v in r]) for r in rows]


def clone_closure(A: FiniteAlgebra, max_arity: int) -> frozenset:
    """Term operations of A of every arity from 1 to ``max_arity``."""
    _check_clone_guard(A.d, max_arity)
    out = set()
    for n in range(1, max_arity + 1):
        out.update(_term_operations(A, n))
    return frozenset(out)


# -- mashups ------------------------------------------------------------------

def _odd_tuple(k: int, ell: int, base: int, odd: int) -> tuple:
    t = [base] * k
    t[ell - 1] = odd
    return tuple(t)


def is_mashup(omega, g, h, ell: int, r: int, s: int) -> bool:
    """Whether ``omega`` agrees with ``g`` on (r..s..r) and with ``h`` on (s..r..s), odd entry at ``ell``."""
    k = g.arity
    if omega.arity != k or h.arity != k:
        raise ValueError("omega, g and h must have the same arity")
    if not 1 <= ell <= k:
        raise ValueError(f"ell must lie in [1, {k}]")
    if r == s:
        raise ValueError("r and s must be distinct")
    t1 = _odd_tuple(k, ell, r, s)
    t2 = _odd_tuple(k, ell, s, r)
    return omega(*t1) == g(*t1) and omega(*t2) == h(*t2)


@dataclass(frozen=True)
class CounterexampleAt:
    ell: int
    r: int
    s: int


def _resolve(A: FiniteAlgebra, op: Union[str, OperationTable]) -> OperationTable:
    return A.ops[op] if isinstance(op, str) else op


def mashup_premise_holds(A: FiniteAlgebra, g, h, use_clone: bool = False):
    """``True`` if every (ell, r, s) has a mashup witness, else the first missing case.

    Witnesses are drawn from the operations of ``A``, or from its term
    operations of the same arity when ``use_clone`` is set.
    """
    if A.d > MASHUP_MAX_D:
        raise GuardExceeded(f"mashup search is limited to d <= {MASHUP_MAX_D}")
    g, h = _resolve(A, g), _resolve(A, h)
    k = g.arity
    if h.arity != k:
        raise ValueError("g and h must have the same arity")
    if use_clone:
        _check_clone_guard(A.d, k)
        candidates = _term_operations(A, k)
    else:
        candidates = [op for op in A.ops.values() if op.arity == k]
    for ell in range(1, k + 1):
        for r, s in itertools.permutations(range(A.d), 2):
            if not any(is_mashup(w, g, h, ell, r, s) for w in candidates):
                return CounterexampleAt(ell, r, s)
    return True


@dataclass
class MashupVerdict:
    premise: bool
    conclusion: bool
    counterexample: Optional[CounterexampleAt] = None
    separating_quotient: Optional[TrivialQuotient] = None

    @property
    def lemma_respected(self) -> bool:
        return not self.premise or self.conclusion

    def to_json(self) -> dict:
        out = {"premise": self.premise, "conclusion": self.conclusion,
               "lemma_respected": self.lemma_respected}
        if self.counterexample is not None:
            c = self.counterexample
            out["counterexample"] = {"ell": c.ell, "r": c.r, "s": c.s}
        if self.separating_quotient is not None:
            out["separating_quotient"] = self.separating_quotient.to_json()
        return out


def check_mashup_lemma(A: FiniteAlgebra, g: str, h: str, use_clone: bool = False) -> MashupVerdict:
    """Test the premise and check that g and h coincide on every trivial two-element quotient.

    Two-element quotients suffice: a larger trivial algebra in which g and h
    are different projections collapses onto a two-element one where they
    still differ.
    """
    if g not in A.ops or h not in A.ops:
        raise KeyError("g and h must name operations of the algebra")
    premise = mashup_premise_holds(A, g, h, use_clone)
    verdict = MashupVerdict(premise is True, True,
                            None if premise is True else premise)
    for q in trivial_two_quotients(A):
        if q.projections[g] != q.projections[h]:
            verdict.conclusion = False
            verdict.separating_quotient = q
            break
    return verdict
