"""Rational functions of one complex variable."""

from typing import Any, Literal, Union

import numpy as np
import sympy as sp
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, model_validator

from app.models.enums import ScalarMode

TRIM_RELATIVE = 1e-14


def _trim(coefficients: tuple[Any, ...], mode: ScalarMode) -> tuple[Any, ...]:
    """Drop trailing (highest-degree) zero coefficients, keeping at least one."""
    coefficients = tuple(coefficients)
    if mode == ScalarMode.RATIONAL:
        is_zero = [c == 0 for c in coefficients]
    else:
        scale = max((abs(float(c)) for c in coefficients), default=0.0)
        is_zero = [abs(float(c)) <= TRIM_RELATIVE * scale for c in coefficients]
    end = len(coefficients)
    while end > 1 and is_zero[end - 1]:
        end -= 1
    return coefficients[:end]


class RationalFunction(BaseModel):
    """``numerator(z) / denominator(z)`` with coefficient lists in ascending powers of z."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    numerator: tuple[Any, ...]
    denominator: tuple[Any, ...]
    mode: ScalarMode

    @model_validator(mode="before")
    @classmethod
    def reduce(cls, data: Any) -> Any:
        """Strip vanishing leading coefficients; reject a zero denominator."""
        if not isinstance(data, dict):
            return data
        mode = ScalarMode(data["mode"])
        numerator = _trim(tuple(data["numerator"]), mode)
        denominator = _trim(tuple(data["denominator"]), mode)
        if all(float(c) == 0.0 for c in denominator):
            raise ValueError("denominator polynomial is identically zero")
        return {"numerator": numerator, "denominator": denominator, "mode": mode}

    @property
    def numerator_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.numerator], dtype=float)

    @property
    def denominator_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.denominator], dtype=float)

    @property
    def degrees(self) -> tuple[int, int]:
        return len(self.numerator) - 1, len(self.denominator) - 1

    def __call__(self, z: Any) -> Any:
        """Evaluate at a complex scalar or array."""
        z = np.asarray(z, dtype=complex)
        return P.polyval(z, self.numerator_float) / P.polyval(z, self.denominator_float)

    def value_at_infinity(self) -> Union[float, Literal["infinite"]]:
        """Limit of the function as |z| grows without bound."""
        deg_num, deg_den = self.degrees
        if deg_num > deg_den:
            return "infinite"
        if deg_num < deg_den:
            return 0.0
        return float(self.numerator[-1]) / float(self.denominator[-1])

    def exact_value_at_infinity(self) -> Any:
        """Exact limit in rational mode (sympy Rational, ``sympy.oo`` when unbounded)."""
        deg_num, deg_den = self.degrees
        if deg_num > deg_den:
            return sp.oo
        if deg_num < deg_den:
            return sp.Integer(0)
        return sp.Rational(self.numerator[-1]) / sp.Rational(self.denominator[-1])

    def describe(self) -> str:
        """Human-readable form in z."""
        z = sp.Symbol("z")

        def poly(coefficients: tuple[Any, ...]) -> Any:
            return sum((sp.nsimplify(c) if self.mode == ScalarMode.RATIONAL else sp.Float(float(c), 6)) * z**i
                       for i, c in enumerate(coefficients))

        return f"({poly(self.numerator)}) / ({poly(self.denominator)})"
