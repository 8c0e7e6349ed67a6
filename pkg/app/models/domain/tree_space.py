"""Basis of the stage-space subspace attached to a rooted tree."""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.models.domain.tree import RootedTree
from app.models.enums import ScalarMode


class TreeSpaceBasis(BaseModel):
    """Columns spanning V_tau in R^s.

    Rational mode keeps the pivot generators chosen by exact elimination, float mode keeps
    orthonormal columns.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tree: RootedTree
    basis: tuple[Any, ...]
    mode: ScalarMode
    generators_tried: int = Field(0, ge=0)

    @property
    def rank(self) -> int:
        return len(self.basis)

    def matrix(self) -> np.ndarray:
        """Float s x rank matrix of the basis columns."""
        if not self.basis:
            return np.zeros((0, 0))
        return np.column_stack([np.array([float(x) for x in v], dtype=float) for v in self.basis])
