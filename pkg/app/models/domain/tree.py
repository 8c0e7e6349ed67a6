"""Rooted trees in standardized form."""

from functools import cached_property
from typing import Any, Iterable

from pydantic import BaseModel, ConfigDict, Field, model_validator


class RootedTree(BaseModel):
    """Rooted tree ``[tau0^ell tau_1 ... tau_k]``.

    ``ell`` counts the leaf children of the root, ``children`` holds the remaining subtrees
    (each with at least two vertices) sorted by descending ``(order, encoding)``.
    Any input is canonicalized on construction: leaf children are absorbed into ``ell``.
    """

    model_config = ConfigDict(frozen=True)

    ell: int = Field(0, ge=0)
    children: tuple["RootedTree", ...] = ()

    @model_validator(mode="before")
    @classmethod
    def canonicalize(cls, data: Any) -> Any:
        """Absorb single-vertex children into ell and sort the rest."""
        if not isinstance(data, dict):
            return data
        ell = int(data.get("ell", 0))
        subtrees = []
        for child in data.get("children", ()):
            tree = child if isinstance(child, RootedTree) else RootedTree.model_validate(child)
            if tree.is_leaf:
                ell += 1
            else:
                subtrees.append(tree)
        subtrees.sort(key=lambda t: t.sort_key, reverse=True)
        return {"ell": ell, "children": tuple(subtrees)}

    @classmethod
    def join(cls, subtrees: Iterable["RootedTree"]) -> "RootedTree":
        """Attach the given subtrees to a new root."""
        return cls(children=tuple(subtrees))

    @classmethod
    def bushy(cls, ell: int) -> "RootedTree":
        """The tree [tau0^ell]; ell = 0 gives the single vertex."""
        return cls(ell=ell)

    @property
    def is_leaf(self) -> bool:
        return self.ell == 0 and not self.children

    @property
    def is_bushy(self) -> bool:
        return not self.children

    @property
    def k(self) -> int:
        """Number of non-leaf children of the root."""
        return len(self.children)

    @cached_property
    def order(self) -> int:
        """Number of vertices."""
        return 1 + self.ell + sum(child.order for child in self.children)

    @cached_property
    def encoding(self) -> str:
        """Nested-bracket text; non-leaf children first, leaves last."""
        return "[" + "".join(child.encoding for child in self.children) + "[]" * self.ell + "]"

    @property
    def sort_key(self) -> tuple[int, str]:
        return self.order, self.encoding

    @property
    def printed_children(self) -> tuple["RootedTree", ...]:
        """All children in printed order, leaves included."""
        return self.children + (TAU0,) * self.ell

    def multiplicities(self) -> list[int]:
        """Multiplicities of the distinct non-leaf children."""
        counts: dict[str, int] = {}
        for child in self.children:
            counts[child.encoding] = counts.get(child.encoding, 0) + 1
        return list(counts.values())

    def __str__(self) -> str:
        return self.encoding

    def __repr__(self) -> str:
        return f"RootedTree({self.encoding})"


TAU0 = RootedTree()
