"""Unit tests for StabilityService."""

import numpy as np
import pytest
import sympy as sp

from app.models.domain.tableau import ButcherTableau
from app.models.enums import ScalarMode, Verdict
from app.repositories.tableau_repository import TableauRepository
from app.services.stability_service import StabilityService

ASI_STABLE = ["backward-euler", "implicit-midpoint", "trapezoid", "gauss-2", "radau-iia-2", "radau-iia-3"]


class TestStabilityFunction:
    """Test suite for R(z)."""

    def test_backward_euler(self, stability_service: StabilityService, backward_euler: ButcherTableau) -> None:
        """Test R(z) = 1 / (1 - z)."""
        R = stability_service.stability_function(backward_euler)

        assert R.mode == ScalarMode.RATIONAL
        assert R.numerator == (sp.Integer(1),)
        assert R.denominator == (sp.Integer(1), sp.Integer(-1))
        assert R.value_at_infinity() == 0.0

    def test_trapezoid_matches_midpoint(
        self,
        stability_service: StabilityService,
        trapezoid: ButcherTableau,
        implicit_midpoint: ButcherTableau,
    ) -> None:
        """Test that both methods share (1 + z/2) / (1 - z/2)."""
        first = stability_service.stability_function(trapezoid)
        second = stability_service.stability_function(implicit_midpoint)

        assert first.numerator == second.numerator
        assert first.denominator == second.denominator
        assert first.value_at_infinity() == -1.0

    def test_rk4_is_a_polynomial(self, stability_service: StabilityService, rk4: ButcherTableau) -> None:
        """Test the Taylor polynomial of degree four."""
        R = stability_service.stability_function(rk4)

        assert R.degrees == (4, 0)
        assert R.numerator[-1] == sp.Rational(1, 24)
        assert R.value_at_infinity() == "infinite"

    def test_float_mode_agrees_with_exponential(self, stability_service: StabilityService, gauss2: ButcherTableau) -> None:
        """Test that the order-4 Gauss method approximates exp(z) near zero."""
        R = stability_service.stability_function(gauss2)

        assert R.mode == ScalarMode.FLOAT
        assert abs(R(0.01) - np.exp(0.01)) < 1e-11

    @pytest.mark.parametrize("name", TableauRepository().names())
    def test_matches_resolvent_formula(
        self, stability_service: StabilityService, tableau_repository: TableauRepository, name: str
    ) -> None:
        """Test P/Q against 1 + z b^T (I - zA)^-1 1 at 50 random points of the left half-plane."""
        tableau = tableau_repository.get(name)
        R = stability_service.stability_function(tableau)
        rng = np.random.default_rng(7)
        points = rng.uniform(-5.0, -0.1, 50) + 1j * rng.uniform(-5.0, 5.0, 50)
        identity, ones = np.eye(tableau.s), np.ones(tableau.s)

        direct = np.array(
            [1 + z * tableau.b_float @ np.linalg.solve(identity - z * tableau.A_float, ones) for z in points]
        )

        assert np.allclose(R(points), direct, rtol=1e-10, atol=1e-14)


class TestVerdicts:
    """Test suite for A, AS, ASI stability and the R-condition."""

    @pytest.mark.parametrize(
        "name, a, asi, as_",
        [
            ("backward-euler", Verdict.HOLDS, Verdict.HOLDS, Verdict.HOLDS),
            ("implicit-midpoint", Verdict.HOLDS, Verdict.HOLDS, Verdict.HOLDS),
            ("trapezoid", Verdict.HOLDS, Verdict.HOLDS, Verdict.HOLDS),
            ("gauss-2", Verdict.HOLDS, Verdict.HOLDS, Verdict.HOLDS),
            ("radau-iia-2", Verdict.HOLDS, Verdict.HOLDS, Verdict.HOLDS),
            ("classical-rk4", Verdict.FAILS, Verdict.FAILS, Verdict.FAILS),
        ],
    )
    def test_catalog_verdicts(
        self,
        stability_service: StabilityService,
        tableau_repository: TableauRepository,
        name: str,
        a: Verdict,
        asi: Verdict,
        as_: Verdict,
    ) -> None:
        """Test the three boundedness verdicts."""
        report = stability_service.report(tableau_repository.get(name))

        assert (report.a_stable, report.asi_stable, report.as_stable) == (a, asi, as_)

    @pytest.mark.parametrize(
        "name, expected",
        [
            ("backward-euler", Verdict.HOLDS),
            ("implicit-midpoint", Verdict.HOLDS),
            ("trapezoid", Verdict.HOLDS),
            ("gauss-2", Verdict.FAILS),
        ],
    )
    def test_r_condition(
        self, stability_service: StabilityService, tableau_repository: TableauRepository, name: str, expected: Verdict
    ) -> None:
        """Test the R-condition verdicts."""
        assert stability_service.check_R_condition(tableau_repository.get(name)).verdict == expected

    def test_gauss_r_condition_witness(self, stability_service: StabilityService, gauss2: ButcherTableau) -> None:
        """Test that R(infinity) = 1 is reported as the witness."""
        result = stability_service.check_R_condition(gauss2)

        assert result.witness is not None
        assert result.witness.at_infinity

    def test_rk4_has_witness(self, stability_service: StabilityService, rk4: ButcherTableau) -> None:
        """Test that failed A-stability carries a violating point."""
        report = stability_service.report(rk4)

        assert "A" in report.witnesses
        witness = report.witnesses["A"]
        assert witness.at_infinity or (witness.value is not None and witness.value > 1.0)

    def test_midpoint_boundary_maximum(
        self, stability_service: StabilityService, implicit_midpoint: ButcherTableau
    ) -> None:
        """Test that |R(iy)| = 1 on the whole axis is accepted."""
        report = stability_service.report(implicit_midpoint)

        assert report.a_boundary_max == pytest.approx(1.0, abs=1e-12)

    def test_structural_facts(self, stability_service: StabilityService, tableau_repository: TableauRepository) -> None:
        """Test stiff accuracy and the DIRK shortcut."""
        backward_euler = stability_service.report(tableau_repository.get("backward-euler"))
        trapezoid = stability_service.report(tableau_repository.get("trapezoid"))
        gauss = stability_service.report(tableau_repository.get("gauss-2"))

        assert backward_euler.stiffly_accurate and backward_euler.dirk_shortcut
        assert trapezoid.stiffly_accurate and trapezoid.dirk_shortcut
        assert not gauss.stiffly_accurate and not gauss.dirk_shortcut


class TestNevanlinnaProbe:
    """Test suite for the resolvent bound with matrix arguments."""

    def test_random_dissipative_is_dissipative(self, stability_service: StabilityService) -> None:
        """Test that generated probe matrices have a nonpositive log norm."""
        rng = np.random.default_rng(7)
        for dimension in range(1, 6):
            Z = stability_service.random_dissipative(dimension, rng)
            assert stability_service.log_norm(Z) <= 1e-10 * max(1.0, float(np.max(np.abs(Z))))

    def test_backward_euler_resolvent_sup(
        self, stability_service: StabilityService, backward_euler: ButcherTableau
    ) -> None:
        """Test that sup |1 / (1 - z)| on the axis is attained at z = 0."""
        assert stability_service.resolvent_sup(backward_euler) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("name", ASI_STABLE)
    def test_bound_holds(self, stability_service: StabilityService, tableau_repository: TableauRepository, name: str) -> None:
        """Test ||(I - A (x) Z)^-1|| <= boundary sup for random dissipative Z."""
        tableau = tableau_repository.get(name)
        rng = np.random.default_rng(11)

        for _ in range(40):
            Z = stability_service.random_dissipative(int(rng.integers(1, 6)), rng)
            probe = stability_service.nevanlinna_probe(tableau, Z)
            assert probe.holds, (probe.kron_norm, probe.boundary_sup)
