"""Activation functions as balanced operator trees.

A candidate activation is built from *core units*, ``binary(unary1(.), unary2(.))``.
A tree of depth ``d`` nests core units ``d`` levels deep with both branches of
every binary node at equal depth, so the family ``S_d`` has
``(|U|^2 |B|)^(2^d - 1)`` members.

Text form (canonical, produced by :func:`to_string`)::

    tree  := binop "(" utree ", " utree ")"
    utree := unop "(" arg ")"
    arg   := "x" | tree

for example ``mul(tanh(x), nmin(x))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Union

from .rng import Rng

UNARY_OPS: tuple[str, ...] = (
    "zero", "one", "id", "neg", "abs", "square", "cube", "sqrt",
    "exp", "gauss", "softplus", "logeps", "sin", "sinh", "asinh", "cos",
    "cosh", "tanh", "atanh", "relu", "nmin", "sigmoid", "erf", "sinc",
)
EXTENDED_UNARY_OPS: tuple[str, ...] = ("atan",)
BINARY_OPS: tuple[str, ...] = ("add", "sub", "mul", "diveps", "max", "min")


def unary_alphabet(extended: bool = False) -> tuple[str, ...]:
    return UNARY_OPS + EXTENDED_UNARY_OPS if extended else UNARY_OPS


class ParseError(ValueError):
    def __init__(self, message: str, position: int, expected: frozenset[str] = frozenset()):
        self.position = position
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class StructureError(ValueError):
    """Tree is well-formed text but not a balanced core-unit tree."""


class DepthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Leaf:
    def __str__(self) -> str:
        return "x"


@dataclass(frozen=True)
class Unary:
    op: str
    child: Node

    def __str__(self) -> str:
        return f"{self.op}({self.child})"


@dataclass(frozen=True)
class Binary:
    op: str
    left: Node
    right: Node

    def __str__(self) -> str:
        return f"{self.op}({self.left}, {self.right})"


Node = Union[Leaf, Unary, Binary]
X = Leaf()


def core_unit(op: str, u1: str, u2: str, a: Node = X, b: Node = X) -> Binary:
    """``op(u1(a), u2(b))``; with defaults, a depth-1 tree."""
    return Binary(op, Unary(u1, a), Unary(u2, b))


def to_string(tree: Node) -> str:
    return str(tree)


def canonical_id(tree: Node) -> str:
    """Deduplication key. Purely syntactic: ``add(a, b)`` and ``add(b, a)`` differ."""
    return str(tree)


def height(node: Node) -> int:
    """Structural height: 0 for a leaf, +1 per unary or binary level."""
    if isinstance(node, Leaf):
        return 0
    if isinstance(node, Unary):
        return height(node.child) + 1
    return max(height(node.left), height(node.right)) + 1


def depth(tree: Node) -> int:
    """Number of nested core-unit layers (a single core unit has depth 1)."""
    return height(tree) // 2


def check_structure(tree: Node) -> None:
    """Raise StructureError unless ``tree`` is a balanced core-unit tree."""
    if not isinstance(tree, Binary):
        raise StructureError(f"root must be a binary operator, got {tree}")

    def visit(node: Node) -> int:
        if isinstance(node, Binary):
            for side in (node.left, node.right):
                if not isinstance(side, Unary):
                    raise StructureError(f"children of {node.op!r} must be unary operators")
            hl, hr = visit(node.left), visit(node.right)
            if hl != hr:
                raise StructureError(f"unbalanced subtrees under {node.op!r}")
            return hl + 1
        if isinstance(node, Unary):
            if isinstance(node.child, Unary):
                raise StructureError(
                    f"unary {node.op!r} applied directly to unary {node.child.op!r}")
            return visit(node.child) + 1
        return 0

    visit(tree)


def nodes(tree: Node) -> list[tuple[tuple[int, ...], Node]]:
    """All nodes in preorder as ``(path, node)``; a path lists child indices from the root."""
    out: list[tuple[tuple[int, ...], Node]] = []

    def walk(node: Node, path: tuple[int, ...]) -> None:
        out.append((path, node))
        if isinstance(node, Unary):
            walk(node.child, path + (0,))
        elif isinstance(node, Binary):
            walk(node.left, path + (0,))
            walk(node.right, path + (1,))

    walk(tree, ())
    return out


def operator_nodes(tree: Node) -> list[tuple[tuple[int, ...], Node]]:
    return [(p, n) for p, n in nodes(tree) if not isinstance(n, Leaf)]


def replace_at(tree: Node, path: tuple[int, ...], new: Node) -> Node:
    if not path:
        return new
    head, rest = path[0], path[1:]
    if isinstance(tree, Unary):
        return Unary(tree.op, replace_at(tree.child, rest, new))
    if isinstance(tree, Binary):
        if head == 0:
            return Binary(tree.op, replace_at(tree.left, rest, new), tree.right)
        return Binary(tree.op, tree.left, replace_at(tree.right, rest, new))
    raise IndexError(f"path {path} descends below a leaf")


def subtree_at(tree: Node, path: tuple[int, ...]) -> Node:
    node = tree
    for i in path:
        if isinstance(node, Unary):
            node = node.child
        elif isinstance(node, Binary):
            node = node.right if i else node.left
        else:
            raise IndexError(f"path {path} descends below a leaf")
    return node


# -- parsing -----------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, extended: bool):
        self.text = text
        self.pos = 0
        self.unary = set(unary_alphabet(True))
        self.allowed_unary = set(unary_alphabet(extended))
        self.binary = set(BINARY_OPS)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.text[self.pos:self.pos + 1] != ch:
            found = self.text[self.pos:self.pos + 1] or "end of input"
            raise ParseError(f"unexpected {found!r}", self.pos, frozenset({ch}))
        self.pos += 1

    def ident(self) -> tuple[str, int]:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos], start

    def node(self) -> Node:
        name, start = self.ident()
        if name == "x":
            return X
        if name in self.binary:
            self.expect("(")
            left = self.node()
            self.expect(",")
            right = self.node()
            self.expect(")")
            return Binary(name, left, right)
        if name in self.unary:
            if name not in self.allowed_unary:
                raise ParseError(f"operator {name!r} requires the extended alphabet", start)
            self.expect("(")
            child = self.node()
            self.expect(")")
            return Unary(name, child)
        expected = frozenset(self.allowed_unary | self.binary | {"x"})
        found = name or self.text[start:start + 1] or "end of input"
        raise ParseError(f"unknown token {found!r}", start, expected)

    def parse(self) -> Node:
        tree = self.node()
        self.skip_ws()
        if self.pos != len(self.text):
            raise ParseError("trailing input", self.pos, frozenset({"end of input"}))
        return tree


def parse(text: str, extended_alphabet: bool = False) -> Binary:
    """Parse a grammar string or a preset name into a balanced tree."""
    from .presets import PRESETS, resolve

    name = text.strip()
    if name in PRESETS:
        return resolve(name, extended_alphabet)
    tree = _Parser(text, extended_alphabet).parse()
    check_structure(tree)
    return tree  # type: ignore[return-value]


# -- the search space ---------------------------------------------------------

def count_space(d: int, extended: bool = False) -> int:
    if d < 1:
        raise ValueError("depth must be >= 1")
    per_unit = len(unary_alphabet(extended)) ** 2 * len(BINARY_OPS)
    return per_unit ** (2 ** d - 1)


def iter_s1(extended: bool = False) -> Iterator[Binary]:
    unary = sorted(unary_alphabet(extended))
    for b, u1, u2 in itertools.product(sorted(BINARY_OPS), unary, unary):
        yield core_unit(b, u1, u2)


def enumerate_s1(extended: bool = False) -> list[Binary]:
    """Every depth-1 tree, ordered by (binary, unary1, unary2) token."""
    return list(iter_s1(extended))


def sample_random(d: int, rng: Rng, extended: bool = False) -> Binary:
    """Uniform draw from S_d: every operator slot filled independently."""
    if d < 1:
        raise ValueError("depth must be >= 1")
    unary = unary_alphabet(extended)

    def build(level: int) -> Binary:
        op = BINARY_OPS[rng.integers(len(BINARY_OPS))]
        if level == 1:
            u1 = unary[rng.integers(len(unary))]
            u2 = unary[rng.integers(len(unary))]
            return core_unit(op, u1, u2)
        u1 = unary[rng.integers(len(unary))]
        left = build(level - 1)
        u2 = unary[rng.integers(len(unary))]
        right = build(level - 1)
        return Binary(op, Unary(u1, left), Unary(u2, right))

    return build(d)


def mutate_at(tree: Binary, path: tuple[int, ...], new_op: str) -> Binary:
    node = subtree_at(tree, path)
    if isinstance(node, Unary):
        return replace_at(tree, path, Unary(new_op, node.child))  # type: ignore[return-value]
    if isinstance(node, Binary):
        return replace_at(tree, path, Binary(new_op, node.left, node.right))  # type: ignore[return-value]
    raise ValueError("cannot mutate a leaf")


def mutate(tree: Binary, rng: Rng, extended: bool = False) -> Binary:
    """Replace one uniformly chosen operator with a different one of the same arity."""
    ops = operator_nodes(tree)
    path, node = ops[rng.integers(len(ops))]
    alphabet = unary_alphabet(extended) if isinstance(node, Unary) else BINARY_OPS
    choices = [op for op in alphabet if op != node.op]
    return mutate_at(tree, path, choices[rng.integers(len(choices))])


def crossover_at(parent1: Binary, path1: tuple[int, ...],
                 parent2: Binary, path2: tuple[int, ...]) -> Binary:
    donor = subtree_at(parent2, path2)
    if height(subtree_at(parent1, path1)) != height(donor):
        raise DepthMismatch("swapped subtrees must have equal height")
    return replace_at(parent1, path1, donor)  # type: ignore[return-value]


def crossover(parent1: Binary, parent2: Binary, rng: Rng) -> Binary:
    """One child: a uniformly chosen subtree of ``parent1`` replaced by an
    equal-height subtree of ``parent2``."""
    if depth(parent1) != depth(parent2):
        raise DepthMismatch(
            f"parents have depths {depth(parent1)} and {depth(parent2)}")
    all1 = nodes(parent1)
    path1, node1 = all1[rng.integers(len(all1))]
    h = height(node1)
    matches = [p for p, n in nodes(parent2) if height(n) == h]
    path2 = matches[rng.integers(len(matches))]
    return crossover_at(parent1, path1, parent2, path2)
