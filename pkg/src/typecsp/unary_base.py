"""Partitions into blocks, m-types of the unary base structure, and bounds.

A base structure here is a set partitioned into named blocks, each either
infinite or finite.  An m-type of such a structure is fully described by
which positions of an m-tuple hold equal elements and which block each
element lies in; :class:`MType` stores exactly that in a canonical form.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from . import formula as fm

INF = None  # block size marker for infinite blocks


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class Block:
    name: str
    size: Optional[int] = INF  # None means infinite

    def __post_init__(self):
        if self.size is not None and self.size < 1:
            raise SpecError(f"block {self.name!r}: finite size must be >= 1")

    @property
    def infinite(self) -> bool:
        return self.size is None

    @property
    def singleton(self) -> bool:
        return self.size == 1


@dataclass(frozen=True)
class PartitionSpec:
    blocks: tuple

    def __init__(self, blocks: Sequence[Block]):
        blocks = tuple(blocks)
        names = [b.name for b in blocks]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate block names in {names}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def names(self) -> list:
        return [b.name for b in self.blocks]

    @property
    def is_stabilised(self) -> bool:
        return all(b.infinite or b.singleton for b in self.blocks)

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_json(self) -> dict:
        return {"blocks": [{"name": b.name, "size": "inf" if b.infinite else b.size}
                           for b in self.blocks]}

    @classmethod
    def from_json(cls, obj) -> "PartitionSpec":
        try:
            raw = obj["blocks"]
            blocks = []
            for entry in raw:
                size = entry.get("size", "inf")
                if size in ("inf", "infinite", None):
                    size = INF
                elif not isinstance(size, int) or isinstance(size, bool):
                    raise SpecError(f"block size must be 'inf' or a positive integer, got {size!r}")
                blocks.append(Block(str(entry["name"]), size))
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed partition spec: {exc}") from exc
        if not blocks:
            raise SpecError("partition spec needs at least one block")
        return cls(blocks)


def _fresh(name: str, taken: set) -> str:
    out = name
    while out in taken:
        out += "_"
    taken.add(out)
    return out


def stabilise(spec: PartitionSpec):
    """Split every finite block of size k >= 2 into k singleton blocks.

    Returns the new spec and a rewrite map ``old name -> tuple of new names``
    suitable for :func:`typecsp.formula.rename_blocks`.
    """
    taken = set(spec.names)
    blocks, rewrite = [], {}
    for b in spec.blocks:
        if b.infinite or b.singleton:
            blocks.append(b)
            rewrite[b.name] = (b.name,)
            continue
        taken.discard(b.name)
        parts = tuple(_fresh(f"{b.name}#{t}", taken) for t in range(1, b.size + 1))
        blocks.extend(Block(p, 1) for p in parts)
        rewrite[b.name] = parts
    return PartitionSpec(blocks), rewrite


@dataclass(frozen=True)
class Expansion:
    spec: PartitionSpec
    constants: dict  # original block -> singleton block holding its constant
    rewrite: dict    # original block -> new blocks covering it


def expand_with_constants(spec: PartitionSpec) -> Expansion:
    """Name one constant in each block.

    Every infinite block ``U`` becomes ``U'`` (infinite) plus a singleton
    ``cU`` holding the constant; singleton blocks are their own constant.
    """
    if not spec.is_stabilised:
        raise SpecError("expand_with_constants needs a stabilised spec")
    taken = set(spec.names)
    blocks, constants, rewrite = [], {}, {}
    for b in spec.blocks:
        if b.singleton:
            blocks.append(b)
            constants[b.name] = b.name
            rewrite[b.name] = (b.name,)
            continue
        taken.discard(b.name)
        rest = _fresh(b.name + "'", taken)
        const = _fresh("c" + b.name, taken)
        blocks += [Block(rest, INF), Block(const, 1)]
        constants[b.name] = const
        rewrite[b.name] = (rest, const)
    return Expansion(PartitionSpec(blocks), constants, rewrite)


# -- types --------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class MType:
    """Canonical m-type: ``classes[k]`` is the class id of position k+1
    (first-occurrence order) and ``blocks[c]`` the block of class ``c``."""

    classes: tuple
    blocks: tuple

    def __post_init__(self):
        seen = -1
        for c in self.classes:
            if c > seen + 1 or c < 0:
                raise SpecError(f"class ids {self.classes} are not in first-occurrence order")
            seen = max(seen, c)
        if len(self.blocks) != seen + 1:
            raise SpecError(f"need one block per class, got {self.blocks} for {self.classes}")

    @property
    def m(self) -> int:
        return len(self.classes)

    @property
    def n_classes(self) -> int:
        return len(self.blocks)

    def block_at(self, pos: int) -> str:
        return self.blocks[self.classes[pos - 1]]

    def canonical_assignment(self) -> list:
        return [(self.blocks[c], c) for c in self.classes]

    def to_json(self) -> dict:
        return {"classes": list(self.classes), "blocks": list(self.blocks)}

    @classmethod
    def from_json(cls, obj) -> "MType":
        return cls(tuple(int(c) for c in obj["classes"]), tuple(str(b) for b in obj["blocks"]))

    def __str__(self):
        return " ".join(f"{self.blocks[c]}/{c}" for c in self.classes)


def type_of(elements: Sequence, block_of) -> MType:
    """Normalised type of a concrete tuple; ``block_of`` maps element -> block."""
    ids, classes, blocks = {}, [], []
    for e in elements:
        if e not in ids:
            ids[e] = len(ids)
            blocks.append(block_of(e))
        classes.append(ids[e])
    return MType(tuple(classes), tuple(blocks))


def validate_type(p: MType, spec: PartitionSpec) -> None:
    names = set(spec.names)
    used = {}
    for c, b in enumerate(p.blocks):
        if b not in names:
            raise SpecError(f"unknown block {b!r} in type {p}")
        used[b] = used.get(b, 0) + 1
    for b in spec.blocks:
        if b.size is not None and used.get(b.name, 0) > b.size:
            raise SpecError(f"type {p} puts {used[b.name]} elements into block {b.name!r} of size {b.size}")


def _restricted_growth(m: int) -> Iterator[tuple]:
    def rec(prefix, top):
        if len(prefix) == m:
            yield tuple(prefix)
            return
        for c in range(top + 2):
            prefix.append(c)
            yield from rec(prefix, max(top, c))
            prefix.pop()
    yield from rec([0], 0)


def _labelings(n_classes: int, spec: PartitionSpec) -> Iterator[tuple]:
    names = spec.names
    cap = [b.size for b in spec.blocks]

    def rec(prefix, used):
        if len(prefix) == n_classes:
            yield tuple(names[i] for i in prefix)
            return
        for i in range(len(names)):
            if cap[i] is not None and used[i] >= cap[i]:
                continue
            used[i] += 1
            prefix.append(i)
            yield from rec(prefix, used)
            prefix.pop()
            used[i] -= 1
    yield from rec([], [0] * len(names))


def enumerate_types(spec: PartitionSpec, m: int) -> list:
    """All m-types of the base structure, ordered by (classes, block indices)."""
    if m < 1:
        raise SpecError("m must be positive")
    out = []
    for classes in _restricted_growth(m):
        for labels in _labelings(max(classes) + 1, spec):
            out.append(MType(classes, labels))
    return out


def restrict_type(p: MType, imap: Sequence[int]) -> MType:
    """Type of the subtuple ``(a_{i(1)}, .., a_{i(r)})`` of a tuple of type ``p``."""
    ids, classes, blocks = {}, [], []
    for k in imap:
        if not 1 <= k <= p.m:
            raise SpecError(f"index {k} outside [1, {p.m}]")
        c = p.classes[k - 1]
        if c not in ids:
            ids[c] = len(ids)
            blocks.append(p.blocks[c])
        classes.append(ids[c])
    return MType(tuple(classes), tuple(blocks))


def type_contains(p: MType, phi) -> bool:
    """Whether the formula ``phi`` belongs to the type ``p``."""
    if fm.width(phi) > p.m:
        raise SpecError(f"formula width {fm.width(phi)} exceeds m = {p.m}")
    return fm.evaluate(phi, p.canonical_assignment())


# -- bounds -------------------------------------------------------------------

@dataclass(frozen=True)
class Bound:
    """A finite structure in the block signature: one label set per element."""

    labels: tuple  # tuple of frozensets

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class BoundSet:
    bounds: tuple = field(default_factory=tuple)

    @property
    def max_size(self) -> int:
        return max((b.size for b in self.bounds), default=0)

    def __iter__(self):
        return iter(self.bounds)

    def __len__(self):
        return len(self.bounds)


def bounds(spec: PartitionSpec) -> BoundSet:
    """Minimal finite structures that do not embed into the base structure."""
    if not spec.is_stabilised:
        raise SpecError("bounds are only computed for stabilised specs")
    names = spec.names
    out = [Bound((frozenset(),))]
    for size in range(2, len(names) + 1):
        for combo in itertools.combinations(names, size):
            out.append(Bound((frozenset(combo),)))
    for b in spec.blocks:
        if b.singleton:
            out.append(Bound((frozenset([b.name]), frozenset([b.name]))))
    return BoundSet(tuple(out))
