"""Finite-domain CSP solver: arc consistency plus MAC backtracking.

Domains are bitmasks (Python ints) over per-variable value indices.  Binary
constraints carry support masks in both directions; n-ary constraints are
extensional tuple lists propagated by scanning for supports.
"""
from __future__ import annotations

import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence


class ResourceLimitExceeded(RuntimeError):
    """Raised by callers that turn a ``limit`` solver outcome into an error."""


def bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(values: Iterable[int]) -> int:
    out = 0
    for v in values:
        out |= 1 << v
    return out


class BinaryRelation:
    """Extensional binary relation between a value range of size ``dx`` and one of size ``dy``.

    ``fwd[a]`` is the mask of ``b`` with ``(a, b)`` in the relation, ``bwd[b]``
    the mask of ``a``.
    """

    def __init__(self, fwd: Sequence[int], bwd: Sequence[int]):
        self.fwd = list(fwd)
        self.bwd = list(bwd)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple], dx: int, dy: int) -> "BinaryRelation":
        fwd, bwd = [0] * dx, [0] * dy
        for a, b in pairs:
            fwd[a] |= 1 << b
            bwd[b] |= 1 << a
        return cls(fwd, bwd)

    @classmethod
    def from_fwd(cls, fwd: Sequence[int], dy: int) -> "BinaryRelation":
        bwd = [0] * dy
        for a, m in enumerate(fwd):
            for b in bits(m):
                bwd[b] |= 1 << a
        return cls(fwd, bwd)

    @property
    def dx(self) -> int:
        return len(self.fwd)

    @property
    def dy(self) -> int:
        return len(self.bwd)

    def holds(self, a: int, b: int) -> bool:
        return bool(self.fwd[a] >> b & 1)

    def pairs(self) -> list:
        return [(a, b) for a, m in enumerate(self.fwd) for b in bits(m)]


class IntensionalRelation(BinaryRelation):
    """Binary relation given by a predicate; supports are computed on first use."""

    def __init__(self, pred: Callable[[int, int], bool], dx: int, dy: int,
                 supports: Optional[Callable[[int], int]] = None):
        self.pred = pred
        self._dx, self._dy = dx, dy
        self._supports = supports
        self._fwd = None
        self._bwd = None

    def support(self, a: int) -> int:
        if self._supports is not None:
            return self._supports(a)
        return mask_of(b for b in range(self._dy) if self.pred(a, b))

    @property
    def fwd(self):
        if self._fwd is None:
            self._fwd = [self.support(a) for a in range(self._dx)]
        return self._fwd

    @property
    def bwd(self):
        if self._bwd is None:
            bwd = [0] * self._dy
            for a, m in enumerate(self.fwd):
                for b in bits(m):
                    bwd[b] |= 1 << a
            self._bwd = bwd
        return self._bwd

    @property
    def dx(self) -> int:
        return self._dx

    @property
    def dy(self) -> int:
        return self._dy

    def holds(self, a: int, b: int) -> bool:
        return bool(self.pred(a, b))


@dataclass
class NaryConstraint:
    scope: tuple
    tuples: list


class SolverInstance:
    """Variables with finite domains and unary / binary / n-ary constraints."""

    def __init__(self):
        self.names: list = []
        self.sizes: list = []
        self.domains: list = []
        self.unary: list = []      # (var, mask)
        self.binary: list = []     # (x, y, relation)
        self.nary: list = []       # NaryConstraint

    def add_variable(self, size: int, name=None, values: Optional[Iterable[int]] = None) -> int:
        if size < 1:
            raise ValueError("variable domains must be nonempty")
        idx = len(self.names)
        self.names.append(name if name is not None else idx)
        self.sizes.append(size)
        dom = (1 << size) - 1 if values is None else mask_of(values)
        if not dom or dom >> size:
            raise ValueError(f"bad initial domain for variable {name!r}")
        self.domains.append(dom)
        return idx

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def _check(self, x: int):
        if not 0 <= x < len(self.names):
            raise IndexError(f"unknown variable {x}")

    def add_unary(self, x: int, allowed) -> None:
        self._check(x)
        mask = allowed if isinstance(allowed, int) else mask_of(allowed)
        if mask >> self.sizes[x]:
            raise ValueError("allowed set exceeds the variable's domain")
        self.unary.append((x, mask))

    def add_binary(self, x: int, y: int, rel: BinaryRelation) -> None:
        self._check(x)
        self._check(y)
        if rel.dx != self.sizes[x] or rel.dy != self.sizes[y]:
            raise ValueError("relation shape does not match variable domains")
        if x == y:
            self.unary.append((x, mask_of(a for a in range(rel.dx) if rel.holds(a, a))))
        else:
            self.binary.append((x, y, rel))

    def add_nary(self, scope: Sequence[int], tuples: Iterable[Sequence[int]]) -> None:
        for x in scope:
            self._check(x)
        scope = tuple(scope)
        distinct = tuple(dict.fromkeys(scope))
        where = [distinct.index(x) for x in scope]
        kept = set()
        for t in tuples:
            vals = [None] * len(distinct)
            ok = True
            for pos, v in zip(where, t):
                if vals[pos] is None:
                    vals[pos] = v
                elif vals[pos] != v:
                    ok = False
                    break
            if ok:
                kept.add(tuple(vals))
        if len(distinct) == 1:
            self.add_unary(distinct[0], mask_of(t[0] for t in kept))
            return
        self.nary.append(NaryConstraint(distinct, sorted(kept)))

    def n_constraints(self) -> int:
        return len(self.unary) + len(self.binary) + len(self.nary)

    def check(self, assignment: Sequence[int]) -> bool:
        """Whether a complete assignment satisfies every constraint."""
        for x, v in enumerate(assignment):
            if not self.domains[x] >> v & 1:
                return False
        for x, mask in self.unary:
            if not mask >> assignment[x] & 1:
                return False
        for x, y, rel in self.binary:
            if not rel.holds(assignment[x], assignment[y]):
                return False
        for c in self.nary:
            if tuple(assignment[x] for x in c.scope) not in set(c.tuples):
                return False
        return True

    def to_json(self) -> dict:
        cons = [{"kind": "unary", "var": x, "allowed": list(bits(m))} for x, m in self.unary]
        cons += [{"kind": "binary", "scope": [x, y], "pairs": [list(p) for p in rel.pairs()]}
                 for x, y, rel in self.binary]
        cons += [{"kind": "nary", "scope": list(c.scope), "tuples": [list(t) for t in c.tuples]}
                 for c in self.nary]
        return {
            "variables": [{"name": n, "size": s, "domain": list(bits(d))}
                          for n, s, d in zip(self.names, self.sizes, self.domains)],
            "constraints": cons,
        }

    @classmethod
    def from_json(cls, obj) -> "SolverInstance":
        inst = cls()
        for v in obj["variables"]:
            inst.add_variable(int(v["size"]), v.get("name"), v.get("domain"))
        for c in obj["constraints"]:
            kind = c["kind"]
            if kind == "unary":
                inst.add_unary(c["var"], c["allowed"])
            elif kind == "binary":
                x, y = c["scope"]
                inst.add_binary(x, y, BinaryRelation.from_pairs(
                    (tuple(p) for p in c["pairs"]), inst.sizes[x], inst.sizes[y]))
            elif kind == "nary":
                inst.add_nary(c["scope"], c["tuples"])
            else:
                raise ValueError(f"unknown constraint kind {kind!r}")
        return inst


@dataclass
class SolverConfig:
    var_order: str = "mrv"           # "mrv" or "lex"
    seed: Optional[int] = None
    shuffle_ties: bool = False
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None

    def __post_init__(self):
        if self.var_order not in ("mrv", "lex"):
            raise ValueError(f"unknown variable order {self.var_order!r}")
        for lim in (self.node_limit, self.time_limit):
            if lim is not None and lim <= 0:
                raise ValueError("limits must be positive")


@dataclass
class SolveResult:
    status: str                       # "sat", "unsat" or "limit"
    assignment: Optional[list] = None
    stats: dict = field(default_factory=dict)

    @property
    def sat(self) -> bool:
        return self.status == "sat"


class _Limit(Exception):
    pass


def _merge_parallel(binary) -> list:
    """Intersect constraints sharing a scope, so contradictions between them surface in AC."""
    merged = {}
    for x, y, rel in binary:
        key, fwd, bwd = ((x, y), rel.fwd, rel.bwd) if x < y else ((y, x), rel.bwd, rel.fwd)
        got = merged.get(key)
        if got is None:
            merged[key] = (fwd, bwd)
        else:
            merged[key] = ([p & q for p, q in zip(got[0], fwd)], [p & q for p, q in zip(got[1], bwd)])
    return [(x, y, fwd, bwd) for (x, y), (fwd, bwd) in merged.items()]


class _Propagator:
    def __init__(self, inst: SolverInstance):
        n = inst.n_vars
        self.n = n
        # arc k revises arc_x[k] against arc_y[k] through support list arc_sup[k]
        self.arc_x, self.arc_y, self.arc_sup = [], [], []
        self.watch_bin = [[] for _ in range(n)]   # arcs to revisit when var changes
        self.watch_nary = [[] for _ in range(n)]
        for x, y, fwd, bwd in _merge_parallel(inst.binary):
            for a, b, sup in ((x, y, fwd), (y, x, bwd)):
                k = len(self.arc_x)
                self.arc_x.append(a)
                self.arc_y.append(b)
                self.arc_sup.append(sup)
                self.watch_bin[b].append(k)
        self.nary = inst.nary
        for ci, c in enumerate(inst.nary):
            for x in c.scope:
                self.watch_nary[x].append(ci)
        self.revisions = 0

    def initial_work(self, rng: Optional[random.Random] = None) -> list:
        work = [(0, k) for k in range(len(self.arc_x))] + [(1, c) for c in range(len(self.nary))]
        if rng is not None:
            rng.shuffle(work)
        return work

    def propagate(self, dom: list, work: Iterable[tuple]) -> bool:
        queue = deque()
        queued = set()
        for item in work:
            if item not in queued:
                queued.add(item)
                queue.append(item)
        arc_x, arc_y, arc_sup = self.arc_x, self.arc_y, self.arc_sup
        watch_bin, watch_nary = self.watch_bin, self.watch_nary
        while queue:
            item = queue.popleft()
            queued.discard(item)
            self.revisions += 1
            if item[0] == 0:
                k = item[1]
                x = arc_x[k]
                dx = dom[x]
                dy = dom[arc_y[k]]
                sup = arc_sup[k]
                new = 0
                m = dx
                while m:
                    low = m & -m
                    if sup[low.bit_length() - 1] & dy:
                        new |= low
                    m ^= low
                if new == dx:
                    continue
                if not new:
                    return False
                dom[x] = new
                changed = (x,)
            else:
                c = self.nary[item[1]]
                scope = c.scope
                cur = [dom[x] for x in scope]
                supp = [0] * len(scope)
                for t in c.tuples:
                    for pos, v in enumerate(t):
                        if not cur[pos] >> v & 1:
                            break
                    else:
                        for pos, v in enumerate(t):
                            supp[pos] |= 1 << v
                changed = []
                for pos, x in enumerate(scope):
                    if supp[pos] != cur[pos]:
                        if not supp[pos]:
                            return False
                        dom[x] = supp[pos]
                        changed.append(x)
                if not changed:
                    continue
            for x in changed:
                for k2 in watch_bin[x]:
                    it = (0, k2)
                    if it not in queued:
                        queued.add(it)
                        queue.append(it)
                for c2 in watch_nary[x]:
                    it = (1, c2)
                    if it not in queued and (item[0] == 0 or c2 != item[1]):
                        queued.add(it)
                        queue.append(it)
        return True

    def work_for(self, x: int) -> list:
        return [(0, k) for k in self.watch_bin[x]] + [(1, c) for c in self.watch_nary[x]]


def _initial_domains(inst: SolverInstance) -> Optional[list]:
    dom = list(inst.domains)
    for x, mask in inst.unary:
        dom[x] &= mask
        if not dom[x]:
            return None
    return dom


def enforce_arc_consistency(inst: SolverInstance, order_seed: Optional[int] = None) -> Optional[list]:
    """Arc-consistent domains (list of bitmasks), or ``None`` if a domain wipes out.

    ``order_seed`` shuffles the initial revision order; the fixpoint does not
    depend on it.
    """
    dom = _initial_domains(inst)
    if dom is None:
        return None
    prop = _Propagator(inst)
    rng = random.Random(order_seed) if order_seed is not None else None
    if not prop.propagate(dom, prop.initial_work(rng)):
        return None
    return dom


def solve(inst: SolverInstance, config: Optional[SolverConfig] = None) -> SolveResult:
    """MAC backtracking search.  Sound and complete within the configured limits."""
    config = config or SolverConfig()
    start = time.perf_counter()
    stats = {"nodes": 0, "backtracks": 0, "propagations": 0}

    def finish(status, assignment=None):
        stats["propagations"] = prop.revisions
        stats["time"] = round(time.perf_counter() - start, 6)
        return SolveResult(status, assignment, stats)

    prop = _Propagator(inst)
    dom = _initial_domains(inst)
    if dom is None or not prop.propagate(dom, prop.initial_work()):
        return finish("unsat")

    n = inst.n_vars
    if config.shuffle_ties and config.seed is not None:
        prio = list(range(n))
        random.Random(config.seed).shuffle(prio)
    else:
        prio = None
    order = sorted(range(n), key=prio.__getitem__) if prio else list(range(n))

    def pick(d):
        if config.var_order == "lex":
            for x in order:
                if d[x] & (d[x] - 1):
                    return x
            return None
        best, best_size = None, None
        for x in order:
            s = d[x].bit_count()
            if s > 1 and (best is None or s < best_size):
                best, best_size = x, s
                if s == 2:
                    break
        return best

    # explicit stack: (domains, var, untried values mask)
    stack = []
    x = pick(dom)
    if x is None:
        return finish("sat", [d.bit_length() - 1 for d in dom])
    stack.append((dom, x, dom[x]))
    try:
        while stack:
            d, x, untried = stack.pop()
            if not untried:
                stats["backtracks"] += 1
                continue
            low = untried & -untried
            stack.append((d, x, untried ^ low))
            stats["nodes"] += 1
            if config.node_limit is not None and stats["nodes"] > config.node_limit:
                raise _Limit
            if config.time_limit is not None and time.perf_counter() - start > config.time_limit:
                raise _Limit
            nd = list(d)
            nd[x] = low
            if not prop.propagate(nd, prop.work_for(x)):
                continue
            y = pick(nd)
            if y is None:
                return finish("sat", [v.bit_length() - 1 for v in nd])
            stack.append((nd, y, nd[y]))
    except _Limit:
        return finish("limit")
    return finish("unsat")
