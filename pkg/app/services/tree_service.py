"""Tree service module."""

from functools import lru_cache
from math import factorial, prod
from typing import Any, Callable, Iterator, Optional

import sympy as sp
from loguru import logger

from app.config import ANALYSIS_DEFAULTS
from app.exceptions import (
    InvalidVertexError,
    SingleVertexTreeError,
    TreeEncodingError,
    TreeOrderOutOfRangeError,
)
from app.models.domain.tree import TAU0, RootedTree

VertexPath = tuple[int, ...]


@lru_cache(maxsize=None)
def _forests(total: int, bound: tuple[int, str]) -> tuple[tuple[RootedTree, ...], ...]:
    """Multisets of trees with ``total`` vertices, as non-increasing tuples with keys <= bound."""
    if total == 0:
        return ((),)
    forests = []
    for size in range(min(total, bound[0]), 0, -1):
        for tree in reversed(_trees(size)):
            if tree.sort_key > bound:
                continue
            for rest in _forests(total - size, tree.sort_key):
                forests.append((tree,) + rest)
    return tuple(forests)


@lru_cache(maxsize=None)
def _trees(order: int) -> tuple[RootedTree, ...]:
    """Trees of the given order sorted by descending encoding."""
    if order == 1:
        return (TAU0,)
    trees = {RootedTree.join(forest) for forest in _forests(order - 1, (order, "~"))}
    return tuple(sorted(trees, key=lambda t: t.encoding, reverse=True))


def default_weight(ell: int, k: int) -> sp.Rational:
    """(-1)^(k+1) / (k! ell!), the weight produced by the truncation-error recursion."""
    return sp.Rational((-1) ** (k + 1), factorial(k) * factorial(ell))


class TreeService:
    """Rooted-tree combinatorics for order conditions."""

    def __init__(self, max_order: int = ANALYSIS_DEFAULTS.max_tree_order) -> None:
        """Initialize the service with the largest supported order."""
        self.max_order = max_order

    def enumerate_trees(self, order: int) -> list[RootedTree]:
        """All rooted trees with exactly ``order`` vertices in deterministic order."""
        if not 1 <= order <= self.max_order:
            raise TreeOrderOutOfRangeError(order, 1, self.max_order)
        trees = list(_trees(order))
        logger.debug("Enumerated rooted trees", order=order, count=len(trees))
        return trees

    def trees_up_to(self, max_order: int, slca_only: bool = False) -> list[RootedTree]:
        if not 1 <= max_order <= self.max_order:
            raise TreeOrderOutOfRangeError(max_order, 1, self.max_order)
        trees = [t for n in range(1, max_order + 1) for t in self.enumerate_trees(n)]
        if slca_only:
            trees = [t for t in trees if self.is_semi_lone_child_avoiding(t)]
        return trees

    @staticmethod
    def parse(text: str) -> RootedTree:
        """Parse nested-bracket notation, e.g. ``[[[]][]]``."""
        stack: list[list[RootedTree]] = []
        result: Optional[RootedTree] = None
        for position, char in enumerate(text):
            if char.isspace():
                continue
            if result is not None:
                raise TreeEncodingError(text, position, "trailing characters after the root")
            if char == "[":
                stack.append([])
            elif char == "]":
                if not stack:
                    raise TreeEncodingError(text, position, "unbalanced ']'")
                tree = RootedTree.join(stack.pop())
                if stack:
                    stack[-1].append(tree)
                else:
                    result = tree
            else:
                raise TreeEncodingError(text, position, f"unexpected character {char!r}")
        if result is None:
            raise TreeEncodingError(text, len(text), "unterminated or empty encoding")
        return result

    @staticmethod
    def vertex(tree: RootedTree, path: VertexPath) -> RootedTree:
        """Subtree rooted at the vertex reached by following printed child indices."""
        node = tree
        for depth, index in enumerate(path):
            children = node.printed_children
            if not 0 <= index < len(children):
                raise InvalidVertexError(tree.encoding, path, f"no child {index} at depth {depth}")
            node = children[index]
        return node

    @staticmethod
    def is_suppressible(node: RootedTree) -> bool:
        """Exactly one child, and that child is not a leaf."""
        return node.ell == 0 and len(node.children) == 1

    def eligible_vertices(self, tree: RootedTree) -> list[VertexPath]:
        """Paths of all vertices that may be suppressed."""
        found: list[VertexPath] = []

        def walk(node: RootedTree, path: VertexPath) -> None:
            if self.is_suppressible(node):
                found.append(path)
            for index, child in enumerate(node.children):
                walk(child, path + (index,))

        walk(tree, ())
        return found

    def is_semi_lone_child_avoiding(self, tree: RootedTree) -> bool:
        return not self.eligible_vertices(tree)

    def suppress_vertex(self, tree: RootedTree, path: VertexPath) -> RootedTree:
        """Remove the vertex at ``path`` and attach its only child to its parent."""
        target = self.vertex(tree, path)
        if not self.is_suppressible(target):
            raise InvalidVertexError(tree.encoding, path, "vertex must have exactly one non-leaf child")

        def rebuild(node: RootedTree, rest: VertexPath) -> RootedTree:
            if not rest:
                return node.children[0]
            head = rest[0]
            children = list(node.children)
            children[head] = rebuild(children[head], rest[1:])
            return RootedTree(ell=node.ell, children=tuple(children))

        reduced = rebuild(tree, path)
        logger.debug("Suppressed vertex", tree=tree.encoding, path=list(path), result=reduced.encoding)
        return reduced

    def reduce_to_slca(self, tree: RootedTree) -> RootedTree:
        """Suppress eligible vertices (first found) until none remain."""
        while True:
            eligible = self.eligible_vertices(tree)
            if not eligible:
                return tree
            tree = self.suppress_vertex(tree, eligible[0])

    @staticmethod
    def combinatorial_factor(tree: RootedTree, weight: Callable[[int, int], Any] = default_weight) -> Any:
        """zeta([tau0^ell]) = 1, zeta([tau0^ell t_1..t_k]) = w(ell,k) k!/prod(mu!) prod zeta(t_i)."""
        if tree.is_bushy:
            return sp.Integer(1) if weight is default_weight else 1
        multiplicity = factorial(tree.k) // prod(factorial(m) for m in tree.multiplicities())
        factor = weight(tree.ell, tree.k) * multiplicity
        for child in tree.children:
            factor = factor * TreeService.combinatorial_factor(child, weight)
        return factor

    def zeta(self, tree: RootedTree) -> sp.Rational:
        """Exact combinatorial factor of the truncation-error expansion."""
        return sp.Rational(self.combinatorial_factor(tree))

    @staticmethod
    def density(tree: RootedTree) -> int:
        """Classical tree density gamma."""
        return tree.order * prod(TreeService.density(child) for child in tree.children)

    def require_non_trivial(self, tree: RootedTree, operation: str) -> None:
        if tree.is_leaf:
            raise SingleVertexTreeError(operation)

    @staticmethod
    def walk_paths(tree: RootedTree) -> Iterator[tuple[VertexPath, RootedTree]]:
        """Every vertex with its path, in depth-first printed order."""
        stack: list[tuple[VertexPath, RootedTree]] = [((), tree)]
        while stack:
            path, node = stack.pop()
            yield path, node
            children = node.printed_children
            for index in range(len(children) - 1, -1, -1):
                stack.append((path + (index,), children[index]))
