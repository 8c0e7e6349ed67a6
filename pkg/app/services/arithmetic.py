"""Dual-mode vector arithmetic over tableau coefficients.

``RationalAlgebra`` works on sympy column matrices and is exact; ``FloatAlgebra`` works on numpy
vectors and decides rank with a pivoted QR factorization.
"""

from typing import Any, Sequence

import numpy as np
import scipy.linalg
import sympy as sp

from app.models.domain.tableau import ButcherTableau


class RationalAlgebra:
    """Exact arithmetic; spans are represented by pivot generators."""

    exact = True

    def __init__(self, tableau: ButcherTableau, tol: float = 0.0) -> None:
        self.tableau = tableau
        self.s = tableau.s
        self.A = tableau.A
        self.b = tableau.b
        self.c = tableau.c
        self.tol = tol

    def ones(self) -> sp.ImmutableMatrix:
        return sp.ImmutableMatrix.ones(self.s, 1)

    def factorial(self, n: int) -> sp.Integer:
        return sp.factorial(n)

    def fraction(self, p: int, q: int) -> sp.Rational:
        return sp.Rational(p, q)

    def matvec(self, v: Any) -> sp.ImmutableMatrix:
        return sp.ImmutableMatrix(self.A * v)

    def hadamard(self, u: Any, v: Any) -> sp.ImmutableMatrix:
        return sp.ImmutableMatrix(u.multiply_elementwise(v))

    def c_power(self, power: int) -> sp.ImmutableMatrix:
        return sp.ImmutableMatrix(self.c.applyfunc(lambda x: x**power))

    def scale(self, alpha: Any, v: Any) -> sp.ImmutableMatrix:
        return sp.ImmutableMatrix(alpha * v)

    def subtract(self, u: Any, v: Any) -> sp.ImmutableMatrix:
        return sp.ImmutableMatrix(u - v)

    def dot_b(self, v: Any) -> sp.Rational:
        return (self.b.T * v)[0, 0]

    def magnitude(self, x: Any) -> float:
        return abs(float(x))

    def is_zero(self, x: Any) -> bool:
        return x == 0

    def vector_magnitude(self, v: Any) -> float:
        return max((abs(float(x)) for x in v), default=0.0)

    def to_float(self, v: Any) -> np.ndarray:
        return np.array([float(x) for x in v], dtype=float)

    def basis(self, vectors: Sequence[Any]) -> list[sp.ImmutableMatrix]:
        """Maximal independent subset, earliest vectors first (exact row reduction)."""
        if not vectors:
            return []
        _, pivots = sp.Matrix.hstack(*vectors).rref()
        return [sp.ImmutableMatrix(vectors[i]) for i in pivots]

    def residual_outside(self, basis: Sequence[Any], v: Any) -> float:
        """Largest entry of the component of v orthogonal to span(basis)."""
        if not basis:
            return self.vector_magnitude(v)
        B = sp.Matrix.hstack(*basis)
        coefficients = (B.T * B).LUsolve(B.T * v)
        return self.vector_magnitude(v - B * coefficients)


class FloatAlgebra:
    """Binary64 arithmetic; spans are represented by orthonormal columns."""

    exact = False

    def __init__(self, tableau: ButcherTableau, tol: float = 1e-10) -> None:
        self.tableau = tableau
        self.s = tableau.s
        self.A = tableau.A_float
        self.b = tableau.b_float
        self.c = tableau.c_float
        self.tol = tol

    def ones(self) -> np.ndarray:
        return np.ones(self.s)

    def factorial(self, n: int) -> float:
        return float(sp.factorial(n))

    def fraction(self, p: int, q: int) -> float:
        return p / q

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.A @ v

    def hadamard(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return u * v

    def c_power(self, power: int) -> np.ndarray:
        return self.c**power

    def scale(self, alpha: float, v: np.ndarray) -> np.ndarray:
        return float(alpha) * v

    def subtract(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return u - v

    def dot_b(self, v: np.ndarray) -> float:
        return float(self.b @ v)

    def magnitude(self, x: float) -> float:
        return abs(float(x))

    def is_zero(self, x: float) -> bool:
        return abs(float(x)) <= self.tol

    def vector_magnitude(self, v: np.ndarray) -> float:
        return float(np.max(np.abs(v))) if len(v) else 0.0

    def to_float(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float)

    def rank_tolerance(self, matrix: np.ndarray) -> float:
        """max(s * eps * largest column norm, tol)."""
        largest = float(np.max(np.linalg.norm(matrix, axis=0))) if matrix.size else 0.0
        return max(self.s * np.finfo(float).eps * largest, self.tol)

    def basis(self, vectors: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Orthonormal basis of the span via column-pivoted QR."""
        if not vectors:
            return []
        matrix = np.column_stack(vectors)
        Q, R, _ = scipy.linalg.qr(matrix, mode="economic", pivoting=True)
        diagonal = np.abs(np.diag(R))
        rank = int(np.sum(diagonal > self.rank_tolerance(matrix)))
        return [Q[:, i].copy() for i in range(rank)]

    def residual_outside(self, basis: Sequence[np.ndarray], v: np.ndarray) -> float:
        if not basis:
            return self.vector_magnitude(v)
        Q = np.column_stack(basis)
        return self.vector_magnitude(v - Q @ (Q.T @ v))


Algebra = RationalAlgebra | FloatAlgebra


def algebra_for(tableau: ButcherTableau, tol: float = 1e-10) -> Algebra:
    """Exact algebra for rational tableaux, floating otherwise."""
    if tableau.is_rational:
        return RationalAlgebra(tableau, tol)
    return FloatAlgebra(tableau, tol)


def krylov_basis(algebra: Algebra, generators: Sequence[Any], start_power: int = 0) -> tuple[list[Any], int]:
    """Basis of span{A^j g : g in generators, j >= start_power}.

    Powers are added one pass at a time and the loop stops at the first pass that leaves the
    rank unchanged (the span is then A-invariant). Returns the basis and the number of generator
    vectors examined.
    """
    frontier = list(generators)
    for _ in range(start_power):
        frontier = [algebra.matvec(g) for g in frontier]
    basis = algebra.basis(frontier)
    tried = len(frontier)
    for _ in range(algebra.s - 1):
        if not basis:
            break
        images = [algebra.matvec(v) for v in basis]
        tried += len(images)
        extended = algebra.basis(basis + images)
        if len(extended) == len(basis):
            break
        basis = extended
    return basis, tried
