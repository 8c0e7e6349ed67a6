"""Repository for Butcher tableaux: the builtin catalog and tableau files."""

import re
from pathlib import Path
from typing import Any, Optional, Union

import sympy as sp
import yaml
from loguru import logger

from app.exceptions import TableauFileNotFoundError, TableauParseError, UnknownCatalogEntryError
from app.models.domain.tableau import ButcherTableau

R = sp.Rational
_RATIONAL = re.compile(r"^[+-]?\d+(/[+-]?\d+)?$")

_SQRT3 = sp.sqrt(3)
_SQRT6 = sp.sqrt(6)
_SQRT15 = sp.sqrt(15)
_GAMMA = R(1, 2) + sp.cos(sp.pi / 18) / _SQRT3
_DELTA = 1 / (6 * (2 * _GAMMA - 1) ** 2)

# name -> (A, b, source). Entries are sympy numbers; irrational entries give a float tableau.
CATALOG: dict[str, tuple[list[list[Any]], list[Any], str]] = {
    "backward-euler": (
        [[R(1)]],
        [R(1)],
        "Hairer & Wanner, Solving ODEs II, Sec. IV.3 (Radau IIA, s = 1)",
    ),
    "implicit-midpoint": (
        [[R(1, 2)]],
        [R(1)],
        "Hairer & Wanner, Solving ODEs II, Sec. IV.5 (Gauss, s = 1)",
    ),
    "trapezoid": (
        [[R(0), R(0)], [R(1, 2), R(1, 2)]],
        [R(1, 2), R(1, 2)],
        "Hairer & Wanner, Solving ODEs II, Sec. IV.5 (Lobatto IIIA, s = 2)",
    ),
    "gauss-2": (
        [[R(1, 4), R(1, 4) - _SQRT3 / 6], [R(1, 4) + _SQRT3 / 6, R(1, 4)]],
        [R(1, 2), R(1, 2)],
        "Butcher, Implicit Runge-Kutta processes, Math. Comp. 18 (1964)",
    ),
    "gauss-3": (
        [
            [R(5, 36), R(2, 9) - _SQRT15 / 15, R(5, 36) - _SQRT15 / 30],
            [R(5, 36) + _SQRT15 / 24, R(2, 9), R(5, 36) - _SQRT15 / 24],
            [R(5, 36) + _SQRT15 / 30, R(2, 9) + _SQRT15 / 15, R(5, 36)],
        ],
        [R(5, 18), R(4, 9), R(5, 18)],
        "Butcher, Implicit Runge-Kutta processes, Math. Comp. 18 (1964)",
    ),
    "radau-iia-2": (
        [[R(5, 12), R(-1, 12)], [R(3, 4), R(1, 4)]],
        [R(3, 4), R(1, 4)],
        "Ehle, On Pade approximations to the exponential function (1969); Hairer & Wanner II, Table IV.5.5",
    ),
    "radau-iia-3": (
        [
            [(88 - 7 * _SQRT6) / 360, (296 - 169 * _SQRT6) / 1800, (-2 + 3 * _SQRT6) / 225],
            [(296 + 169 * _SQRT6) / 1800, (88 + 7 * _SQRT6) / 360, (-2 - 3 * _SQRT6) / 225],
            [(16 - _SQRT6) / 36, (16 + _SQRT6) / 36, R(1, 9)],
        ],
        [(16 - _SQRT6) / 36, (16 + _SQRT6) / 36, R(1, 9)],
        "Ehle (1969); Hairer & Wanner, Solving ODEs II, Table IV.5.6",
    ),
    "sdirk-norsett-3": (
        [
            [_GAMMA, R(0), R(0)],
            [R(1, 2) - _GAMMA, _GAMMA, R(0)],
            [2 * _GAMMA, 1 - 4 * _GAMMA, _GAMMA],
        ],
        [_DELTA, 1 - 2 * _DELTA, _DELTA],
        "Norsett (1974); Hairer & Wanner, Solving ODEs II, Table IV.6.4 (gamma = 1/2 + cos(pi/18)/sqrt(3))",
    ),
    "classical-rk4": (
        [
            [R(0), R(0), R(0), R(0)],
            [R(1, 2), R(0), R(0), R(0)],
            [R(0), R(1, 2), R(0), R(0)],
            [R(0), R(0), R(1), R(0)],
        ],
        [R(1, 6), R(1, 3), R(1, 3), R(1, 6)],
        "Kutta (1901); Hairer, Norsett & Wanner, Solving ODEs I, Table II.1.2",
    ),
}


def _entry(value: Any) -> Union[sp.Rational, float, Any]:
    """Sympy rationals pass through; any other exact number is evaluated to binary64."""
    if isinstance(value, sp.Rational):
        return value
    return float(sp.N(value, 30))


def parse_scalar(value: Any, field: str, row: Optional[int] = None, column: Optional[int] = None) -> Any:
    """Parse one entry: integers and "p/q" strings are exact, decimals become floats."""
    if isinstance(value, bool):
        raise TableauParseError(f"boolean entry {value!r}", row, column, field)
    if isinstance(value, int):
        return sp.Integer(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        text = value.strip()
        if _RATIONAL.match(text):
            numerator, _, denominator = text.partition("/")
            if denominator and int(denominator) == 0:
                raise TableauParseError(f"zero denominator in {value!r}", row, column, field)
            return sp.Rational(int(numerator), int(denominator or 1))
        try:
            return float(text)
        except ValueError:
            pass
    raise TableauParseError(f"unparseable entry {value!r}", row, column, field)


class TableauRepository:
    """Builtin catalog lookup plus reading and writing tableau documents."""

    def names(self) -> list[str]:
        return list(CATALOG)

    def get(self, name: str) -> ButcherTableau:
        """Look up a catalog tableau by name."""
        if name not in CATALOG:
            raise UnknownCatalogEntryError(name, self.names())
        A, b, source = CATALOG[name]
        tableau = ButcherTableau.build(
            name=name,
            A=[[_entry(x) for x in row] for row in A],
            b=[_entry(x) for x in b],
            source=source,
        )
        logger.debug("Loaded catalog tableau", tableau=name, stages=tableau.s, mode=tableau.mode.value)
        return tableau

    def from_document(self, document: Any) -> ButcherTableau:
        """Validate an already-decoded mapping with ``name``, ``A``, ``b`` and optional ``c``."""
        if not isinstance(document, dict):
            raise TableauParseError("document must be a mapping with fields name, A, b", field="document")
        for field in ("A", "b"):
            if field not in document:
                raise TableauParseError("missing field", field=field)
        rows = document["A"]
        if not isinstance(rows, list) or not all(isinstance(row, list) for row in rows):
            raise TableauParseError("A must be a list of rows")
        A = [[parse_scalar(x, "A", i, j) for j, x in enumerate(row)] for i, row in enumerate(rows)]
        b = [parse_scalar(x, "b", i) for i, x in enumerate(self._as_list(document["b"], "b"))]
        c = None
        if document.get("c") is not None:
            c = [parse_scalar(x, "c", i) for i, x in enumerate(self._as_list(document["c"], "c"))]
        return ButcherTableau.build(
            name=str(document.get("name", "unnamed")),
            A=A,
            b=b,
            c=c,
            source=document.get("source"),
        )

    def parse(self, text: str) -> ButcherTableau:
        """Parse a YAML or JSON tableau document."""
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise TableauParseError(f"not a YAML/JSON document ({exc})", field="document") from exc
        return self.from_document(document)

    def load(self, path: Union[str, Path]) -> ButcherTableau:
        """Read a tableau file."""
        path = Path(path)
        if not path.is_file():
            raise TableauFileNotFoundError(str(path))
        tableau = self.parse(path.read_text(encoding="utf-8"))
        logger.info("Loaded tableau file", path=str(path), tableau=tableau.name, stages=tableau.s)
        return tableau

    def dump(self, tableau: ButcherTableau) -> str:
        """Serialize to the tableau file format. Rational entries are written as "p/q" strings."""
        if tableau.is_rational:
            entries = tableau.entry_strings()
        else:
            entries = {
                "A": tableau.A_float.tolist(),
                "b": tableau.b_float.tolist(),
                "c": tableau.c_float.tolist(),
            }
        document = {"name": tableau.name, **entries}
        if tableau.source:
            document["source"] = tableau.source
        return yaml.safe_dump(document, sort_keys=False, default_flow_style=None)

    def save(self, tableau: ButcherTableau, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dump(tableau), encoding="utf-8")
        logger.info("Saved tableau file", path=str(path), tableau=tableau.name)

    @staticmethod
    def _as_list(value: Any, field: str) -> list[Any]:
        if not isinstance(value, list):
            raise TableauParseError("must be a list", field=field)
        return value
