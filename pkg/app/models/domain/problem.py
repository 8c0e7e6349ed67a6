"""Semilinear test problems y' = J y + g(y) + r(t)."""

from functools import cached_property, lru_cache
from math import prod
from typing import Any, Callable, Optional

import numpy as np
import sympy as sp
from pydantic import BaseModel, ConfigDict, Field

from app.exceptions import UnavailableDerivativeError

Y = sp.Symbol("Y", real=True)
T = sp.Symbol("t", real=True)


@lru_cache(maxsize=None)
def state_derivative(expr: sp.Expr, k: int) -> Callable[[np.ndarray], Any]:
    return sp.lambdify(Y, sp.diff(expr, Y, k) if k else expr, modules="numpy")


@lru_cache(maxsize=None)
def time_derivative(expr: sp.Expr, k: int) -> Callable[[float], Any]:
    return sp.lambdify(T, sp.diff(expr, T, k) if k else expr, modules="numpy")


def log_norm(matrix: np.ndarray) -> float:
    """Logarithmic 2-norm: largest eigenvalue of the symmetric part."""
    matrix = np.asarray(matrix, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (matrix + matrix.T))[-1])


class SolutionTerm(BaseModel):
    """One separable term ``vector * f(t)`` of a manufactured solution."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    vector: np.ndarray
    profile: Any


class SemilinearProblem(BaseModel):
    """Problem with constant J, componentwise nonlinearity and a manufactured exact solution.

    Component ``m`` of g is ``nonlinearity[m](Y_m)`` (a sympy expression in ``Y``), so every
    derivative g^(k)(y)(u_1, ..., u_k) is diagonal: ``phi_m^(k)(y_m) * u_1m * ... * u_km``.
    The forcing is derived from the exact solution unless ``forcing_override`` is given.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    J: np.ndarray
    nonlinearity: tuple[Any, ...]
    solution: tuple[SolutionTerm, ...]
    lipschitz: float = Field(..., ge=0)
    smoothness: int = Field(6, ge=1)
    stiffness: Optional[float] = None
    forcing_override: Optional[Callable[[float], np.ndarray]] = None

    def replace(self, **changes: Any) -> "SemilinearProblem":
        """New problem with some fields changed; cached quantities are recomputed."""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        return type(self)(**{**fields, **changes})

    @property
    def N(self) -> int:
        return int(self.J.shape[0])

    @cached_property
    def mu(self) -> float:
        return log_norm(self.J)

    @cached_property
    def component_groups(self) -> list[tuple[Any, np.ndarray]]:
        indices: dict[Any, list[int]] = {}
        for m, expr in enumerate(self.nonlinearity):
            indices.setdefault(expr, []).append(m)
        return [(expr, np.array(idx, dtype=int)) for expr, idx in indices.items()]

    def _phi(self, k: int, y: np.ndarray) -> np.ndarray:
        """Componentwise k-th derivative of the nonlinearity at y."""
        if k > self.smoothness:
            raise UnavailableDerivativeError("g derivative", k, self.smoothness)
        y = np.asarray(y, dtype=float)
        out = np.empty(self.N, dtype=float)
        with np.errstate(all="ignore"):
            for expr, idx in self.component_groups:
                values = np.asarray(state_derivative(expr, k)(y[idx]), dtype=float)
                out[idx] = np.broadcast_to(values, idx.shape)
        return out

    def g(self, y: np.ndarray) -> np.ndarray:
        return self._phi(0, y)

    def g_derivative(self, k: int, y: np.ndarray, *directions: np.ndarray) -> np.ndarray:
        """k-linear derivative g^(k)(y)(u_1, ..., u_k)."""
        if len(directions) != k:
            raise ValueError(f"g_derivative of order {k} needs {k} directions, got {len(directions)}")
        return self._phi(k, y) * prod(directions, start=np.ones(self.N))

    def jacobian_g(self, y: np.ndarray) -> np.ndarray:
        return np.diag(self._phi(1, y))

    def exact(self, t: float, k: int = 0) -> np.ndarray:
        """k-th time derivative of the manufactured solution."""
        if k > self.smoothness + 1:
            raise UnavailableDerivativeError("solution derivative", k, self.smoothness + 1)
        out = np.zeros(self.N, dtype=float)
        for term in self.solution:
            out += term.vector * float(time_derivative(term.profile, k)(t))
        return out

    def forcing(self, t: float) -> np.ndarray:
        if self.forcing_override is not None:
            return np.asarray(self.forcing_override(t), dtype=float)
        y = self.exact(t)
        return self.exact(t, 1) - self.J @ y - self.g(y)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.J @ y + self.g(y) + self.forcing(t)


class ProblemInstance(BaseModel):
    """Descriptor addressing a builtin problem by name and stiffness."""

    name: str
    stiffness: float = Field(..., lt=0)
    dimension: int = Field(..., ge=1)
    t0: float = 0.0
    tf: float = 1.0
