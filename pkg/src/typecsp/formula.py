"""Quantifier-free formulas over equality atoms and block-membership atoms.

Formulas speak about a tuple of positions ``z1 .. zr``.  Atoms are
``zi = zj`` and ``Name(zi)`` (position ``i`` lies in block ``Name``).

Text grammar (``!`` binds tighter than ``&``, which binds tighter than ``|``)::

    expr   := conj ('|' conj)*
    conj   := unary ('&' unary)*
    unary  := '!' unary | atom
    atom   := '(' expr ')' | 'true' | 'false' | var '=' var | Name '(' var ')'
    var    := 'z' K          (K >= 1)
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union


class FormulaError(ValueError):
    pass


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class TrueConst:
    pass


@dataclass(frozen=True)
class FalseConst:
    pass


@dataclass(frozen=True)
class Eq:
    left: int
    right: int

    def __post_init__(self):
        if self.left < 1 or self.right < 1:
            raise FormulaError("positions are 1-based")


@dataclass(frozen=True)
class InBlock:
    block: str
    pos: int

    def __post_init__(self):
        if self.pos < 1:
            raise FormulaError("positions are 1-based")


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple

    def __init__(self, children: Iterable["Formula"]):
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Or:
    children: tuple

    def __init__(self, children: Iterable["Formula"]):
        object.__setattr__(self, "children", tuple(children))


Formula = Union[TrueConst, FalseConst, Eq, InBlock, Not, And, Or]

TRUE = TrueConst()
FALSE = FalseConst()


def width(phi: Formula) -> int:
    """Largest position mentioned in ``phi`` (0 for constant formulas)."""
    if isinstance(phi, Eq):
        return max(phi.left, phi.right)
    if isinstance(phi, InBlock):
        return phi.pos
    if isinstance(phi, Not):
        return width(phi.child)
    if isinstance(phi, (And, Or)):
        return max((width(c) for c in phi.children), default=0)
    return 0


def blocks_used(phi: Formula) -> set:
    if isinstance(phi, InBlock):
        return {phi.block}
    if isinstance(phi, Not):
        return blocks_used(phi.child)
    if isinstance(phi, (And, Or)):
        out = set()
        for c in phi.children:
            out |= blocks_used(c)
        return out
    return set()


# -- evaluation ---------------------------------------------------------------

def evaluate(phi: Formula, assignment: Sequence[tuple]) -> bool:
    """Truth value of ``phi`` under ``assignment``.

    ``assignment[k-1]`` is a ``(block, class_id)`` pair describing position
    ``k``: equality atoms compare class ids, block atoms compare blocks.
    """
    if len(assignment) < width(phi):
        raise FormulaError(
            f"assignment of length {len(assignment)} is shorter than formula width {width(phi)}")
    return _eval(phi, assignment)


def _eval(phi, a) -> bool:
    if isinstance(phi, Eq):
        return a[phi.left - 1][1] == a[phi.right - 1][1]
    if isinstance(phi, InBlock):
        return a[phi.pos - 1][0] == phi.block
    if isinstance(phi, Not):
        return not _eval(phi.child, a)
    if isinstance(phi, And):
        return all(_eval(c, a) for c in phi.children)
    if isinstance(phi, Or):
        return any(_eval(c, a) for c in phi.children)
    if isinstance(phi, TrueConst):
        return True
    if isinstance(phi, FalseConst):
        return False
    raise TypeError(f"not a formula: {phi!r}")


# -- rewriting ----------------------------------------------------------------

def reindex(phi: Formula, imap: Sequence[int]) -> Formula:
    """Substitute position ``p`` by ``imap[p-1]`` throughout ``phi``."""
    if width(phi) > len(imap):
        raise FormulaError(f"index map of length {len(imap)} is not total on [{width(phi)}]")
    if any(k < 1 for k in imap):
        raise FormulaError("index map values are 1-based")
    return _reindex(phi, tuple(imap))


def _reindex(phi, imap):
    if isinstance(phi, Eq):
        return Eq(imap[phi.left - 1], imap[phi.right - 1])
    if isinstance(phi, InBlock):
        return InBlock(phi.block, imap[phi.pos - 1])
    if isinstance(phi, Not):
        return Not(_reindex(phi.child, imap))
    if isinstance(phi, And):
        return And(_reindex(c, imap) for c in phi.children)
    if isinstance(phi, Or):
        return Or(_reindex(c, imap) for c in phi.children)
    return phi


def rename_blocks(phi: Formula, rewrite: dict) -> Formula:
    """Replace ``InBlock(old, p)`` by the disjunction over ``rewrite[old]``.

    Blocks missing from ``rewrite`` are kept unchanged.
    """
    if isinstance(phi, InBlock):
        targets = rewrite.get(phi.block)
        if targets is None:
            return phi
        targets = list(targets)
        if len(targets) == 1:
            return InBlock(targets[0], phi.pos)
        if not targets:
            return FALSE
        return Or(InBlock(b, phi.pos) for b in targets)
    if isinstance(phi, Not):
        return Not(rename_blocks(phi.child, rewrite))
    if isinstance(phi, And):
        return And(rename_blocks(c, rewrite) for c in phi.children)
    if isinstance(phi, Or):
        return Or(rename_blocks(c, rewrite) for c in phi.children)
    return phi


# -- printing -----------------------------------------------------------------

_PREC = {Or: 0, And: 1}


def to_text(phi: Formula) -> str:
    return _show(phi, 0)


def _show(phi, ctx: int) -> str:
    if isinstance(phi, TrueConst):
        return "true"
    if isinstance(phi, FalseConst):
        return "false"
    if isinstance(phi, Eq):
        return f"z{phi.left} = z{phi.right}"
    if isinstance(phi, InBlock):
        return f"{phi.block}(z{phi.pos})"
    if isinstance(phi, Not):
        if _is_atomic(phi.child) or isinstance(phi.child, Not):
            return "!" + _show(phi.child, 2)
        return f"!({_show(phi.child, 0)})"
    prec = _PREC[type(phi)]
    if not phi.children:
        # empty conjunction/disjunction has no surface syntax of its own
        return "true" if isinstance(phi, And) else "false"
    sep = " & " if isinstance(phi, And) else " | "
    # nested nodes of the same kind are parenthesised so the tree shape survives a round trip
    body = sep.join(_show(c, prec + 1) for c in phi.children)
    if len(phi.children) == 1 or ctx > prec:
        return f"({body})"
    return body


def _is_atomic(phi) -> bool:
    return isinstance(phi, (TrueConst, FalseConst, Eq, InBlock))


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<sym>[&|!=()])|(?P<name>[A-Za-z_][A-Za-z0-9_#'.\-]*))")
_VAR = re.compile(r"z([1-9][0-9]*)$")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = "sym" if m.group("sym") else "name"
        val = m.group(kind)
        tokens.append((kind, val, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, blocks):
        self.tokens = _tokenize(text)
        self.i = 0
        self.blocks = blocks

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, val):
        kind, v, off = self.take()
        if v != val or kind == "end":
            raise FormulaSyntaxError(f"expected {val!r}", off)

    def expr(self):
        parts = [self.conj()]
        while self.peek()[1] == "|" and self.peek()[0] == "sym":
            self.take()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(parts)

    def conj(self):
        parts = [self.unary()]
        while self.peek()[1] == "&" and self.peek()[0] == "sym":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(parts)

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "sym" and v == "!":
            self.take()
            return Not(self.unary())
        return self.atom()

    def var(self) -> int:
        kind, v, off = self.take()
        m = _VAR.match(v) if kind == "name" else None
        if m is None:
            raise FormulaSyntaxError("expected a variable zK", off)
        return int(m.group(1))

    def atom(self):
        kind, v, off = self.peek()
        if kind == "sym" and v == "(":
            self.take()
            inner = self.expr()
            kind2, v2, off2 = self.take()
            if v2 != ")" or kind2 != "sym":
                raise FormulaSyntaxError("expected ')'", off2)
            return inner
        if kind != "name":
            raise FormulaSyntaxError("expected an atom", off)
        if v == "true":
            self.take()
            return TRUE
        if v == "false":
            self.take()
            return FALSE
        nxt = self.tokens[self.i + 1]
        if nxt[0] == "sym" and nxt[1] == "(":
            self.take()
            self.take()
            if self.blocks is not None and v not in self.blocks:
                raise FormulaSyntaxError(f"unknown block name {v!r}", off)
            p = self.var()
            self.expect(")")
            return InBlock(v, p)
        left = self.var()
        kind2, v2, off2 = self.take()
        if v2 != "=" or kind2 != "sym":
            raise FormulaSyntaxError("expected '='", off2)
        right = self.var()
        return Eq(left, right)


def parse_formula(text: str, blocks: Iterable[str] | None = None) -> Formula:
    """Parse formula source text.

    If ``blocks`` is given, block atoms must name one of them.

    >>> parse_formula("z1 = z2 & !(z2 = z3)")
    And(children=(Eq(left=1, right=2), Not(child=Eq(left=2, right=3))))
    """
    p = _Parser(text, None if blocks is None else set(blocks))
    phi = p.expr()
    kind, v, off = p.peek()
    if kind != "end":
        raise FormulaSyntaxError(f"unexpected token {v!r}", off)
    return phi


# -- JSON ---------------------------------------------------------------------

def to_json(phi: Formula) -> dict:
    if isinstance(phi, TrueConst):
        return {"op": "true"}
    if isinstance(phi, FalseConst):
        return {"op": "false"}
    if isinstance(phi, Eq):
        return {"op": "eq", "args": [phi.left, phi.right]}
    if isinstance(phi, InBlock):
        return {"op": "in", "block": phi.block, "pos": phi.pos}
    if isinstance(phi, Not):
        return {"op": "not", "arg": to_json(phi.child)}
    if isinstance(phi, And):
        return {"op": "and", "args": [to_json(c) for c in phi.children]}
    if isinstance(phi, Or):
        return {"op": "or", "args": [to_json(c) for c in phi.children]}
    raise TypeError(f"not a formula: {phi!r}")


def from_json(obj) -> Formula:
    """Decode a node-tagged JSON object; plain strings are parsed as text."""
    if isinstance(obj, str):
        return parse_formula(obj)
    try:
        op = obj["op"]
        if op == "true":
            return TRUE
        if op == "false":
            return FALSE
        if op == "eq":
            a, b = obj["args"]
            return Eq(int(a), int(b))
        if op == "in":
            return InBlock(str(obj["block"]), int(obj["pos"]))
        if op == "not":
            return Not(from_json(obj["arg"]))
        if op == "and":
            return And(from_json(c) for c in obj["args"])
        if op == "or":
            return Or(from_json(c) for c in obj["args"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormulaError(f"malformed formula JSON: {obj!r}") from exc
    raise FormulaError(f"unknown formula node {op!r}")
