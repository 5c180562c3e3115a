"""Crystal material data: Sellmeier sets, thermo-optic corrections, d_eff tables.

Data lives in a YAML document (``data/crystals.yaml``); nothing numeric about a
material is hard-coded here.  A loaded :class:`CrystalSet` is immutable.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping

import yaml

FORMAT_TAG = "qpmdesign-crystals/1"
CRYSTAL_NAMES = ("KTP", "CTA", "KTA", "RTA", "RTP")
DEFAULT_DATA_PATH = Path(__file__).parent / "data" / "crystals.yaml"

# form tag -> number of coefficients
SELLMEIER_FORMS = {
    "two_pole": 4,
    "two_pole_l0": 4,
    "two_pole_ir": 6,
    "kato": 5,
}
THERMO_FORMS = ("inverse_poly",)
AXES = ("o", "e")
_AXIS_KEY = {"o": "y", "e": "z"}

DEFF_ROWS = ("o->o+o", "e->e+e", "o->e+e", "e->o+o", "o->o+e", "e->o+e")


class CrystalDataError(ValueError):
    """Base class for problems with crystal data files."""


class CrystalParseError(CrystalDataError):
    """The data file is not a well-formed crystal document."""


class CrystalValidationError(CrystalDataError):
    """A crystal entry violates one of the data invariants."""


@dataclass(frozen=True)
class PolarizationConfig:
    """Pump, signal and idler polarization axes (``"o"`` = y, ``"e"`` = z)."""

    pump: str
    signal: str
    idler: str

    def __post_init__(self):
        for role in ("pump", "signal", "idler"):
            if getattr(self, role) not in AXES:
                raise ValueError(f"{role} axis must be 'o' or 'e', got {getattr(self, role)!r}")

    @classmethod
    def parse(cls, text: str) -> "PolarizationConfig":
        """Parse ``"o:oe"``, ``"o->o+e"`` or ``"o→o+e"``."""
        s = text.strip().replace("→", "->").replace(" ", "")
        if ":" in s:
            pump, rest = s.split(":", 1)
            if len(pump) != 1 or len(rest) != 2:
                raise ValueError(f"bad polarization string {text!r}")
            return cls(pump, rest[0], rest[1])
        if "->" in s and "+" in s:
            pump, rest = s.split("->", 1)
            signal, idler = rest.split("+", 1)
            return cls(pump, signal, idler)
        raise ValueError(f"bad polarization string {text!r}")

    @property
    def key(self) -> str:
        """Row key of the d_eff table; signal/idler order does not matter."""
        pair = sorted((self.signal, self.idler), key=AXES.index)
        return f"{self.pump}->{pair[0]}+{pair[1]}"

    @property
    def spdc_type(self) -> str:
        if self.signal != self.idler:
            return "II"
        return "0" if self.signal == self.pump else "I"

    def swapped(self) -> "PolarizationConfig":
        return PolarizationConfig(self.pump, self.idler, self.signal)

    def __str__(self):
        return f"{self.pump}:{self.signal}{self.idler}"


@dataclass(frozen=True)
class SellmeierSet:
    form: str
    coefficients: tuple[float, ...]
    source: str = ""


@dataclass(frozen=True)
class ThermoOptic:
    """Additive correction dn = sum a_m/l^m dT + sum b_m/l^m dT^2."""

    form: str
    linear: tuple[float, ...]
    quadratic: tuple[float, ...]
    source: str = ""


@dataclass(frozen=True)
class Crystal:
    name: str
    formula: str
    sellmeier_y: SellmeierSet
    sellmeier_z: SellmeierSet
    transparency: tuple[float, float]
    deff_table: Mapping[str, float]
    reference_temperature: float = 25.0
    default_temperature: float = 25.0
    thermo_optic: Mapping[str, ThermoOptic] | None = None
    verified: bool = False
    source_citations: tuple[str, ...] = ()

    def sellmeier(self, axis: str) -> SellmeierSet:
        if axis == "o":
            return self.sellmeier_y
        if axis == "e":
            return self.sellmeier_z
        raise ValueError(f"axis must be 'o' or 'e', got {axis!r}")

    def thermo(self, axis: str) -> ThermoOptic | None:
        if not self.thermo_optic:
            return None
        return self.thermo_optic.get(_AXIS_KEY[axis])

    @property
    def has_thermo_optic(self) -> bool:
        return bool(self.thermo_optic)

    def __hash__(self):
        return hash((self.name, self.sellmeier_y, self.sellmeier_z, self.transparency))


@dataclass(frozen=True)
class CrystalSet:
    crystals: tuple[Crystal, ...]
    digest: str = field(default="", compare=False)
    path: str = field(default="", compare=False)

    def __getitem__(self, name: str) -> Crystal:
        for c in self.crystals:
            if c.name == name.upper():
                return c
        raise KeyError(f"unknown crystal {name!r}; available: {', '.join(self.names)}")

    def __iter__(self) -> Iterator[Crystal]:
        return iter(self.crystals)

    def __len__(self):
        return len(self.crystals)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.crystals)


def _require(entry: Mapping, key: str, where: str):
    if key not in entry:
        raise CrystalValidationError(f"{where}: missing field '{key}'")
    return entry[key]


def _parse_sellmeier(raw, where: str) -> SellmeierSet:
    form = _require(raw, "form", where)
    if form not in SELLMEIER_FORMS:
        raise CrystalValidationError(f"{where}.form: unknown Sellmeier form {form!r}")
    coeffs = tuple(float(v) for v in _require(raw, "coefficients", where))
    if len(coeffs) != SELLMEIER_FORMS[form]:
        raise CrystalValidationError(
            f"{where}.coefficients: form {form} takes {SELLMEIER_FORMS[form]} values, got {len(coeffs)}"
        )
    return SellmeierSet(form, coeffs, str(raw.get("source", "")))


def _parse_thermo(raw, where: str) -> ThermoOptic:
    form = _require(raw, "form", where)
    if form not in THERMO_FORMS:
        raise CrystalValidationError(f"{where}.form: unknown thermo-optic form {form!r}")
    lin = tuple(float(v) for v in _require(raw, "linear", where))
    quad = tuple(float(v) for v in raw.get("quadratic", [0.0] * len(lin)))
    if len(lin) != 4 or len(quad) != 4:
        raise CrystalValidationError(f"{where}: inverse_poly needs 4 linear and 4 quadratic terms")
    return ThermoOptic(form, lin, quad, str(raw.get("source", "")))


def _parse_crystal(entry, index: int) -> Crystal:
    if not isinstance(entry, Mapping):
        raise CrystalParseError(f"crystals[{index}] is not a mapping")
    name = str(_require(entry, "name", f"crystals[{index}]"))
    where = f"crystal {name}"
    if name not in CRYSTAL_NAMES:
        raise CrystalValidationError(f"{where}.name: must be one of {', '.join(CRYSTAL_NAMES)}")

    trans = _require(entry, "transparency", where)
    try:
        lo, hi = (float(v) for v in trans)
    except (TypeError, ValueError):
        raise CrystalValidationError(f"{where}.transparency: expected [lower, upper]") from None
    if not (0 < lo < hi):
        raise CrystalValidationError(f"{where}.transparency: need 0 < lower < upper, got [{lo}, {hi}]")

    sell = _require(entry, "sellmeier", where)
    sy = _parse_sellmeier(_require(sell, "y", f"{where}.sellmeier"), f"{where}.sellmeier.y")
    sz = _parse_sellmeier(_require(sell, "z", f"{where}.sellmeier"), f"{where}.sellmeier.z")

    thermo = None
    if entry.get("thermo_optic"):
        thermo = MappingProxyType({
            ax: _parse_thermo(raw, f"{where}.thermo_optic.{ax}")
            for ax, raw in entry["thermo_optic"].items()
        })
        unknown = set(thermo) - {"y", "z"}
        if unknown:
            raise CrystalValidationError(f"{where}.thermo_optic: unknown axis {sorted(unknown)}")

    raw_deff = _require(entry, "deff", where)
    deff: dict[str, float] = {}
    for key, value in raw_deff.items():
        try:
            canon = PolarizationConfig.parse(str(key)).key
        except ValueError:
            raise CrystalValidationError(f"{where}.deff: bad polarization key {key!r}") from None
        if canon in deff:
            raise CrystalValidationError(f"{where}.deff: polarization configuration {canon} listed twice")
        deff[canon] = float(value)
    missing = [row for row in DEFF_ROWS if row not in deff]
    if missing:
        raise CrystalValidationError(f"{where}.deff: missing rows {missing}")

    t_ref = float(entry.get("reference_temperature", 25.0))
    return Crystal(
        name=name,
        formula=str(entry.get("formula", "")),
        sellmeier_y=sy,
        sellmeier_z=sz,
        transparency=(lo, hi),
        deff_table=MappingProxyType(deff),
        reference_temperature=t_ref,
        default_temperature=float(entry.get("default_temperature", t_ref)),
        thermo_optic=thermo,
        verified=bool(entry.get("verified", False)),
        source_citations=tuple(str(c) for c in entry.get("citations", []) or []),
    )


def parse_crystal_set(text: str, *, path: str = "") -> CrystalSet:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CrystalParseError(f"malformed crystal file: {exc}") from None
    if not isinstance(doc, Mapping):
        raise CrystalParseError("malformed crystal file: expected a mapping document")
    if doc.get("format") != FORMAT_TAG:
        raise CrystalParseError(f"malformed crystal file: format must be {FORMAT_TAG!r}")
    entries = doc.get("crystals")
    if not isinstance(entries, list) or not entries:
        raise CrystalParseError("malformed crystal file: 'crystals' must be a non-empty list")

    crystals = []
    seen = set()
    for i, entry in enumerate(entries):
        c = _parse_crystal(entry, i)
        if c.name in seen:
            raise CrystalValidationError(f"duplicate crystal {c.name}")
        seen.add(c.name)
        crystals.append(c)
    digest = hashlib.sha256(text.encode()).hexdigest()
    return CrystalSet(tuple(crystals), digest=digest, path=path)


def load_crystal_set(path: str | Path | None = None) -> CrystalSet:
    """Load and validate a crystal data file (the shipped one by default)."""
    p = Path(path) if path is not None else DEFAULT_DATA_PATH
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise CrystalParseError(f"cannot read {p}: {exc.strerror}") from None
    return parse_crystal_set(text, path=str(p))


_DEFAULT_SET: CrystalSet | None = None


def default_crystals() -> CrystalSet:
    global _DEFAULT_SET
    if _DEFAULT_SET is None:
        _DEFAULT_SET = load_crystal_set()
    return _DEFAULT_SET


def get_crystal(name: str | Crystal) -> Crystal:
    if isinstance(name, Crystal):
        return name
    return default_crystals()[name]


def _sellmeier_doc(s: SellmeierSet) -> dict:
    return {"form": s.form, "coefficients": list(s.coefficients), "source": s.source}


def crystal_to_dict(c: Crystal) -> dict:
    doc = {
        "name": c.name,
        "formula": c.formula,
        "reference_temperature": c.reference_temperature,
        "default_temperature": c.default_temperature,
        "transparency": list(c.transparency),
        "verified": c.verified,
        "sellmeier": {"y": _sellmeier_doc(c.sellmeier_y), "z": _sellmeier_doc(c.sellmeier_z)},
        "deff": {row: c.deff_table[row] for row in DEFF_ROWS},
        "citations": list(c.source_citations),
    }
    if c.thermo_optic:
        doc["thermo_optic"] = {
            ax: {"form": t.form, "linear": list(t.linear), "quadratic": list(t.quadratic), "source": t.source}
            for ax, t in c.thermo_optic.items()
        }
    return doc


def dump_crystal_set(cset: CrystalSet) -> str:
    doc = {"format": FORMAT_TAG, "crystals": [crystal_to_dict(c) for c in cset]}
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def save_crystal_set(cset: CrystalSet, path: str | Path) -> None:
    Path(path).write_text(dump_crystal_set(cset), encoding="utf-8")


def effective_nonlinearity(crystal: Crystal | str, pols: PolarizationConfig | str) -> float:
    """Tabulated |d_eff| in pm/V for a polarization configuration."""
    crystal = get_crystal(crystal)
    if isinstance(pols, str):
        pols = PolarizationConfig.parse(pols)
    return crystal.deff_table[pols.key]


def in_transparency(crystal: Crystal | str, wavelength: float) -> bool:
    """True iff ``wavelength`` (um) lies inside the transparency window."""
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    lo, hi = get_crystal(crystal).transparency
    return lo <= wavelength <= hi


def deff_table_csv(cset: CrystalSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["configuration", *cset.names])
    for row in DEFF_ROWS:
        writer.writerow([row, *(repr(c.deff_table[row]) for c in cset)])
    return buf.getvalue()
