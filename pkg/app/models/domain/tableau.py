"""Butcher tableau value object."""

from functools import cached_property
from typing import Any, Optional, Sequence, Union

import numpy as np
import sympy as sp
from pydantic import BaseModel, ConfigDict, model_validator

from app.exceptions import StageSumMismatchError, TableauParseError
from app.models.enums import MethodStructure, ScalarMode

Scalar = Union[sp.Rational, float]

C_FLOAT_TOLERANCE = 1e-14


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class ButcherTableau(BaseModel):
    """Coefficients (A, b, c) of an s-stage Runge-Kutta method.

    In rational mode ``A``, ``b`` and ``c`` are sympy ``ImmutableMatrix`` objects (b and c as columns);
    in float mode they are read-only numpy arrays. ``c`` always equals the row sums of ``A``.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    mode: ScalarMode
    A: Any
    b: Any
    c: Any
    source: Optional[str] = None

    @model_validator(mode="after")
    def check_shapes(self) -> "ButcherTableau":
        """Validate that A is square and b, c have one entry per stage."""
        rows, cols = self.A.shape
        if rows != cols or rows == 0:
            raise TableauParseError(f"A must be a non-empty square matrix, got {rows}x{cols}")
        if len(self.b) != rows:
            raise TableauParseError(f"b has {len(self.b)} entries, expected {rows}", field="b")
        if len(self.c) != rows:
            raise TableauParseError(f"c has {len(self.c)} entries, expected {rows}", field="c")
        return self

    @classmethod
    def build(
        cls,
        name: str,
        A: Sequence[Sequence[Scalar]],
        b: Sequence[Scalar],
        c: Optional[Sequence[Scalar]] = None,
        source: Optional[str] = None,
    ) -> "ButcherTableau":
        """Build a tableau from parsed scalars, deriving c from A and cross-checking a supplied c.

        The tableau is rational iff every entry is a sympy rational; otherwise all entries are floats.
        """
        s = len(A)
        for i, row in enumerate(A):
            if len(row) != s:
                raise TableauParseError(f"row has {len(row)} entries, expected {s}", row=i)
        if len(b) != s:
            raise TableauParseError(f"b has {len(b)} entries, expected {s}", field="b")
        if c is not None and len(c) != s:
            raise TableauParseError(f"c has {len(c)} entries, expected {s}", field="c")

        entries = [x for row in A for x in row] + list(b) + list(c or [])
        rational = all(isinstance(x, sp.Rational) for x in entries)

        if rational:
            a_matrix = sp.ImmutableMatrix(A)
            b_vector = sp.ImmutableMatrix(list(b))
            c_vector = sp.ImmutableMatrix([sum(row, sp.Integer(0)) for row in A])
            if c is not None:
                for i, (supplied, expected) in enumerate(zip(c, c_vector)):
                    if supplied != expected:
                        raise StageSumMismatchError(i, str(supplied), str(expected))
            return cls(name=name, mode=ScalarMode.RATIONAL, A=a_matrix, b=b_vector, c=c_vector, source=source)

        a_array = _read_only(np.array([[float(x) for x in row] for row in A], dtype=float))
        b_array = _read_only(np.array([float(x) for x in b], dtype=float))
        c_array = _read_only(a_array.sum(axis=1))
        if c is not None:
            for i, (supplied, expected) in enumerate(zip(c, c_array)):
                if abs(float(supplied) - expected) > C_FLOAT_TOLERANCE:
                    raise StageSumMismatchError(i, repr(float(supplied)), repr(float(expected)))
        return cls(name=name, mode=ScalarMode.FLOAT, A=a_array, b=b_array, c=c_array, source=source)

    @property
    def s(self) -> int:
        """Number of stages."""
        return int(self.A.shape[0])

    @property
    def is_rational(self) -> bool:
        return self.mode == ScalarMode.RATIONAL

    @cached_property
    def A_float(self) -> np.ndarray:
        return _read_only(np.array(self.A, dtype=float).reshape(self.s, self.s))

    @cached_property
    def b_float(self) -> np.ndarray:
        return _read_only(np.array(self.b, dtype=float).reshape(self.s))

    @cached_property
    def c_float(self) -> np.ndarray:
        return _read_only(np.array(self.c, dtype=float).reshape(self.s))

    @cached_property
    def structure(self) -> MethodStructure:
        """Sparsity class of A: strictly lower triangular, lower triangular or full."""
        upper_zero = all(self.A[i, j] == 0 for i in range(self.s) for j in range(i + 1, self.s))
        if not upper_zero:
            return MethodStructure.FULLY_IMPLICIT
        if all(self.A[i, i] == 0 for i in range(self.s)):
            return MethodStructure.EXPLICIT
        return MethodStructure.DIRK

    @cached_property
    def stiffly_accurate(self) -> bool:
        """True when b equals the last row of A."""
        if self.is_rational:
            return all(self.b[j] == self.A[self.s - 1, j] for j in range(self.s))
        return bool(np.allclose(self.b_float, self.A_float[-1], rtol=0.0, atol=C_FLOAT_TOLERANCE))

    def to_float(self) -> "ButcherTableau":
        """Return the float-mode copy of this tableau."""
        if not self.is_rational:
            return self
        return ButcherTableau(
            name=self.name,
            mode=ScalarMode.FLOAT,
            A=self.A_float,
            b=self.b_float,
            c=self.c_float,
            source=self.source,
        )

    def with_name(self, name: str) -> "ButcherTableau":
        return self.model_copy(update={"name": name})

    def entry_strings(self) -> dict[str, Any]:
        """Entries as text: "p/q" strings in rational mode, repr of floats otherwise."""

        def to_text(value: Any) -> str:
            return str(value) if self.is_rational else repr(float(value))

        return {
            "A": [[to_text(self.A[i, j]) for j in range(self.s)] for i in range(self.s)],
            "b": [to_text(self.b[i]) for i in range(self.s)],
            "c": [to_text(self.c[i]) for i in range(self.s)],
        }


class DefectPair(BaseModel):
    """Scaled residuals of the quadrature and stage simplifying assumptions for one ``ell``.

    ``q_hat = 1/ell! - b^T c^(ell-1)/(ell-1)!`` and ``s_hat = c^ell/ell! - A c^(ell-1)/(ell-1)!``,
    in the scalar mode of the tableau they were computed from.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ell: int
    q_hat: Any
    s_hat: Any
