"""Linear stability report schemas."""

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from app.models.enums import Verdict


class Witness(BaseModel):
    """Point of the closed left half-plane where a bound is violated."""

    z_real: Optional[float] = None
    z_imag: Optional[float] = None
    at_infinity: bool = False
    value: Optional[float] = Field(None, description="Violating value; None at a pole")
    note: str = ""

    @classmethod
    def at(cls, z: complex, value: Optional[float], note: str = "") -> "Witness":
        return cls(z_real=float(z.real), z_imag=float(z.imag), value=value, note=note)

    def describe(self) -> str:
        where = "z = inf" if self.at_infinity else f"z = {complex(self.z_real or 0.0, self.z_imag or 0.0):.6g}"
        value = "unbounded" if self.value is None else f"{self.value:.6g}"
        return f"{where}: {value}" + (f" ({self.note})" if self.note else "")


class CheckResult(BaseModel):
    """Verdict of one sampled check with its supremum estimate."""

    verdict: Verdict
    sup_estimate: Optional[float] = Field(None, description="Sampled supremum on the boundary, None if unbounded")
    witness: Optional[Witness] = None


class NevanlinnaProbe(BaseModel):
    """Comparison of ||(I - A (x) Z)^-1|| with the scalar boundary supremum."""

    log_norm: float
    kron_norm: float
    boundary_sup: float
    slack: float
    holds: bool


class StabilityReport(BaseModel):
    """Stability function facts and tri-state verdicts."""

    tableau: str
    stability_function: str
    numerator: list[float]
    denominator: list[float]
    r_at_infinity: Union[float, Literal["infinite"]]
    a_stable: Verdict
    as_stable: Verdict
    asi_stable: Verdict
    r_condition: Verdict
    asi_sup: Optional[float] = None
    as_sup: Optional[float] = None
    a_boundary_max: Optional[float] = None
    witnesses: dict[str, Witness] = Field(default_factory=dict)
    samples: int
    stiffly_accurate: bool
    dirk_shortcut: bool = Field(..., description="Structural sufficient condition for AS and ASI stability")
