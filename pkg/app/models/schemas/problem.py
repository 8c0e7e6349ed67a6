"""Problem diagnostics schemas."""

from pydantic import BaseModel, Field


class DerivativeCheck(BaseModel):
    """Finite-difference check of one derivative order."""

    order: int = Field(..., ge=1)
    max_error: float = Field(..., ge=0, description="Largest error relative to 1 + |exact|")
    ok: bool


class ProblemDiagnostics(BaseModel):
    """Outcome of the invariants of a semilinear test problem."""

    problem: str
    dimension: int
    stiffness: float | None = None
    mu: float = Field(..., description="Logarithmic 2-norm of J")
    mu_ok: bool
    lipschitz: float
    consistency_residual: float = Field(..., ge=0, description="Largest scaled residual of y' = Jy + g(y) + r")
    consistency_ok: bool
    g_derivatives: list[DerivativeCheck] = Field(default_factory=list)
    solution_derivatives: list[DerivativeCheck] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        checks = self.g_derivatives + self.solution_derivatives
        return self.mu_ok and self.consistency_ok and all(check.ok for check in checks)

    def failures(self) -> list[str]:
        failed = []
        if not self.mu_ok:
            failed.append(f"log norm {self.mu:.3e} > 0")
        if not self.consistency_ok:
            failed.append(f"consistency residual {self.consistency_residual:.3e}")
        failed.extend(f"g derivative {c.order} error {c.max_error:.3e}" for c in self.g_derivatives if not c.ok)
        failed.extend(f"y derivative {c.order} error {c.max_error:.3e}" for c in self.solution_derivatives if not c.ok)
        return failed
