"""Bell functionals: CHSH correlators and probability-coefficient functionals.

A probability functional in an (nA, nB, 2, 2) scenario reads::

    I = sum_ij joint[i, j] Pr(a_i=1, b_j=1) + sum_i marg_a[i] Pr(a_i=1)
        + sum_j marg_b[j] Pr(b_j=1) + constant

where outcome 1 is the first row/column of each binarized 2x2 table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from .apparatus import AnalyzerSettings, OutcomeMode, binarize_outcomes, detector_basis, outcome_table

REGISTRY_SCHEMA_VERSION = 1

REGISTRY_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Bell functional (probability form)",
    "type": "object",
    "required": ["name", "nA", "nB", "joint", "margA", "margB"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": REGISTRY_SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "nA": {"type": "integer", "minimum": 1},
        "nB": {"type": "integer", "minimum": 1},
        "joint": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "margA": {"type": "array", "items": {"type": "number"}},
        "margB": {"type": "array", "items": {"type": "number"}},
        "constant": {"type": "number"},
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                k: {"type": ["number", "null"]} for k in ("local", "qubit", "apparatus_max", "quantum")
            },
        },
    },
}


class RegistryError(ValueError):
    """A functional file does not match the registry schema."""


@dataclass(frozen=True)
class Bounds:
    local: float | None = None
    qubit: float | None = None
    apparatus_max: float | None = None
    quantum: float | None = None

    def __post_init__(self) -> None:
        chain = [b for b in (self.local, self.qubit, self.quantum) if b is not None]
        if any(x > y + 1e-12 for x, y in zip(chain, chain[1:])):
            raise ValueError("bounds must satisfy local <= qubit <= quantum")

    def as_dict(self) -> dict[str, float | None]:
        return {"local": self.local, "qubit": self.qubit, "apparatus_max": self.apparatus_max, "quantum": self.quantum}


@dataclass(frozen=True)
class BellFunctional:
    name: str
    joint: np.ndarray
    marg_a: np.ndarray
    marg_b: np.ndarray
    constant: float = 0.0
    bounds: Bounds = field(default_factory=Bounds)

    def __post_init__(self) -> None:
        joint = np.asarray(self.joint, dtype=float)
        marg_a = np.asarray(self.marg_a, dtype=float).reshape(-1)
        marg_b = np.asarray(self.marg_b, dtype=float).reshape(-1)
        if joint.ndim != 2 or joint.shape != (marg_a.size, marg_b.size):
            raise ValueError(
                f"joint shape {joint.shape} inconsistent with marginals ({marg_a.size}, {marg_b.size})"
            )
        if not (np.isfinite(joint).all() and np.isfinite(marg_a).all() and np.isfinite(marg_b).all()):
            raise ValueError("coefficients must be finite")
        for name, arr in (("joint", joint), ("marg_a", marg_a), ("marg_b", marg_b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def scenario(self) -> tuple[int, int]:
        return self.joint.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BellFunctional):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.joint, other.joint)
            and np.array_equal(self.marg_a, other.marg_a)
            and np.array_equal(self.marg_b, other.marg_b)
            and self.constant == other.constant
            and self.bounds == other.bounds
        )

    __hash__ = None  # type: ignore[assignment]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "schema_version": REGISTRY_SCHEMA_VERSION,
            "name": self.name,
            "nA": self.scenario[0],
            "nB": self.scenario[1],
            "joint": [[_num(x) for x in row] for row in self.joint],
            "margA": [_num(x) for x in self.marg_a],
            "margB": [_num(x) for x in self.marg_b],
        }
        if self.constant:
            d["constant"] = _num(self.constant)
        bounds = {k: v for k, v in self.bounds.as_dict().items() if v is not None}
        if bounds:
            d["bounds"] = bounds
        return d


def _num(x: float) -> int | float:
    x = float(x)
    return int(x) if x.is_integer() else x


def builtin_i18() -> BellFunctional:
    """The 18th (4,4,2,2) inequality; local bound 0."""
    joint = [
        [2, 2, 2, -1],
        [2, 1, -2, 2],
        [2, -2, -2, -2],
        [-1, 2, -2, -1],
    ]
    return BellFunctional(
        name="i18",
        joint=np.array(joint, dtype=float),
        marg_a=np.array([-2, -2, 0, 0], dtype=float),
        marg_b=np.array([-2, -2, 0, 0], dtype=float),
        bounds=Bounds(local=0.0, qubit=0.18, apparatus_max=0.46, quantum=0.64),
    )


def builtin_chsh() -> BellFunctional:
    """CHSH in probability form, S = E00 + E01 + E10 - E11.

    With outcome 1 <-> +1, E_xy = 4 P(1,1) - 2 P_A(1) - 2 P_B(1) + 1.
    """
    signs = np.array([[1, 1], [1, -1]], dtype=float)
    return BellFunctional(
        name="chsh",
        joint=4 * signs,
        marg_a=-2 * signs.sum(axis=1),
        marg_b=-2 * signs.sum(axis=0),
        constant=float(signs.sum()),
        bounds=Bounds(local=2.0, qubit=2 * math.sqrt(2), apparatus_max=2 * math.sqrt(2), quantum=2 * math.sqrt(2)),
    )


BUILTIN_FUNCTIONALS = {"i18": builtin_i18, "chsh": builtin_chsh}


def functional_from_dict(data: Any) -> BellFunctional:
    try:
        jsonschema.validate(data, REGISTRY_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise RegistryError(f"field {where}: {exc.message}") from None
    n_a, n_b = data["nA"], data["nB"]
    joint = data["joint"]
    if len(joint) != n_a or any(len(row) != n_b for row in joint):
        raise RegistryError(f"field joint: expected a {n_a}x{n_b} array")
    if len(data["margA"]) != n_a:
        raise RegistryError(f"field margA: expected {n_a} entries")
    if len(data["margB"]) != n_b:
        raise RegistryError(f"field margB: expected {n_b} entries")
    try:
        bounds = Bounds(**data.get("bounds", {}))
    except ValueError as exc:
        raise RegistryError(f"field bounds: {exc}") from None
    return BellFunctional(
        name=data["name"],
        joint=np.array(joint, dtype=float),
        marg_a=np.array(data["margA"], dtype=float),
        marg_b=np.array(data["margB"], dtype=float),
        constant=float(data.get("constant", 0.0)),
        bounds=bounds,
    )


def load_functional(path: str | Path) -> BellFunctional:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RegistryError(f"{path}: not valid JSON ({exc})") from None
    return functional_from_dict(data)


def save_functional(f: BellFunctional, path: str | Path) -> None:
    Path(path).write_text(json.dumps(f.to_dict(), indent=2) + "\n")


def resolve_functional(name_or_path: str, registry: str | Path | None = None) -> BellFunctional:
    """Builtin name, path to a JSON file, or ``<name>.json`` inside ``registry``."""
    if name_or_path in BUILTIN_FUNCTIONALS:
        return BUILTIN_FUNCTIONALS[name_or_path]()
    candidate = Path(name_or_path)
    if candidate.suffix == ".json" and candidate.exists():
        return load_functional(candidate)
    if registry is not None:
        candidate = Path(registry) / f"{name_or_path}.json"
        if candidate.exists():
            return load_functional(candidate)
    raise KeyError(f"unknown inequality {name_or_path!r}")


# --- correlators -----------------------------------------------------------


def correlator_from_counts(n11: float, n12: float, n21: float, n22: float) -> float:
    total = n11 + n12 + n21 + n22
    if total <= 0:
        raise ValueError("correlator needs a positive number of events")
    return (n11 + n22 - n12 - n21) / total


def correlator_from_table(table: np.ndarray) -> float:
    """E from a 2x2 table indexed (Alice outcome, Bob outcome)."""
    t = np.asarray(table, dtype=float)
    return correlator_from_counts(t[0, 0], t[0, 1], t[1, 0], t[1, 1])


def chsh_value(e: np.ndarray) -> float:
    """S = E(a,b) + E(a,b') + E(a',b) - E(a',b') for E indexed [alice][bob]."""
    e = np.asarray(e, dtype=float)
    if e.shape != (2, 2):
        raise ValueError(f"expected a 2x2 correlator table, got {e.shape}")
    return float(e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1])


# --- probability tables ------------------------------------------------------


def marginals_from_tables(tables: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pr(a_i=1), Pr(b_j=1) averaged over the partner's bases."""
    t = np.asarray(tables, dtype=float)
    p_a = t[:, :, 0, :].sum(axis=-1).mean(axis=1)
    p_b = t[:, :, :, 0].sum(axis=-1).mean(axis=0)
    return p_a, p_b


def evaluate_functional(
    f: BellFunctional,
    tables: np.ndarray,
    marg_a: np.ndarray | None = None,
    marg_b: np.ndarray | None = None,
) -> float:
    """Evaluate ``f`` on binarized tables of shape (nA, nB, 2, 2).

    Marginals default to partner-averaged sums of the joint tables.
    """
    t = np.asarray(tables, dtype=float)
    if t.shape != (*f.scenario, 2, 2):
        raise ValueError(f"tables shape {t.shape} does not match scenario {f.scenario}")
    p_a, p_b = marginals_from_tables(t)
    if marg_a is not None:
        p_a = np.asarray(marg_a, dtype=float)
    if marg_b is not None:
        p_b = np.asarray(marg_b, dtype=float)
    if p_a.shape != f.marg_a.shape or p_b.shape != f.marg_b.shape:
        raise ValueError("marginal arrays do not match the scenario")
    return float((f.joint * t[:, :, 0, 0]).sum() + f.marg_a @ p_a + f.marg_b @ p_b + f.constant)


# --- measurement plans ------------------------------------------------------


@dataclass(frozen=True)
class MeasurementPlan:
    settings_a: tuple[AnalyzerSettings, ...]
    settings_b: tuple[AnalyzerSettings, ...]
    mode_a: OutcomeMode = OutcomeMode.DETECTOR1_VS_REST
    mode_b: OutcomeMode = OutcomeMode.DETECTOR1_VS_REST

    def __post_init__(self) -> None:
        object.__setattr__(self, "settings_a", tuple(self.settings_a))
        object.__setattr__(self, "settings_b", tuple(self.settings_b))
        object.__setattr__(self, "mode_a", OutcomeMode(self.mode_a))
        object.__setattr__(self, "mode_b", OutcomeMode(self.mode_b))
        if not self.settings_a or not self.settings_b:
            raise ValueError("a plan needs at least one basis per party")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.settings_a), len(self.settings_b)

    def check_matches(self, f: BellFunctional) -> None:
        if self.shape != f.scenario:
            raise ValueError(f"plan shape {self.shape} does not match functional scenario {f.scenario}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode_a": self.mode_a.value,
            "mode_b": self.mode_b.value,
            "alice": [s.to_degrees() for s in self.settings_a],
            "bob": [s.to_degrees() for s in self.settings_b],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MeasurementPlan":
        def conv(items: Sequence[dict[str, Any]]) -> tuple[AnalyzerSettings, ...]:
            return tuple(AnalyzerSettings.from_degrees(**item) for item in items)

        return cls(
            conv(data["alice"]),
            conv(data["bob"]),
            data.get("mode_a", OutcomeMode.DETECTOR1_VS_REST.value),
            data.get("mode_b", OutcomeMode.DETECTOR1_VS_REST.value),
        )


def plan_outcome_tables(rho: np.ndarray, plan: MeasurementPlan) -> np.ndarray:
    """Full 4x4 detector tables for every basis pair, shape (nA, nB, 4, 4)."""
    bases_a = [detector_basis(s) for s in plan.settings_a]
    bases_b = [detector_basis(s) for s in plan.settings_b]
    return np.array([[outcome_table(rho, ba, bb) for bb in bases_b] for ba in bases_a])


def binarize_plan_tables(tables: np.ndarray, plan: MeasurementPlan) -> np.ndarray:
    t = np.asarray(tables)
    return np.array(
        [[binarize_outcomes(t[x, y], plan.mode_a, plan.mode_b) for y in range(t.shape[1])] for x in range(t.shape[0])]
    )


def evaluate_plan(rho: np.ndarray, f: BellFunctional, plan: MeasurementPlan) -> float:
    plan.check_matches(f)
    return evaluate_functional(f, binarize_plan_tables(plan_outcome_tables(rho, plan), plan))


def correlator_table(rho: np.ndarray, plan: MeasurementPlan) -> np.ndarray:
    """E(x, y) for each basis pair of a binary-outcome plan."""
    bins = binarize_plan_tables(plan_outcome_tables(rho, plan), plan)
    return np.array([[correlator_from_table(bins[x, y]) for y in range(bins.shape[1])] for x in range(bins.shape[0])])


# Reference I18 settings (degrees), HWP1/HWP2 per basis, all QWPs at 0.
REFERENCE_DEG = {
    "alice": [(45, 12), (24, 43), (58, 22), (8, 15)],
    "bob": [(12, 20), (42, 49), (7, 22), (-33, 15)],
}

# Optimum of I18 on Psi4 within this package's analyzer conventions with all
# QWPs fixed at 0 (HWP1, HWP2 in degrees), shifted so Alice's first basis is
# (0, 0); reaches 0.502926. Values depend only on angle differences.
I18_OPTIMAL_DEG = {
    "alice": [(0.0, 0.0), (65.2216, 5.6209), (65.3334, 67.957), (1.8457, 26.9068)],
    "bob": [(72.998, 83.0973), (87.5763, 14.818), (13.9172, 80.5887), (55.7918, 14.4835)],
}


def _hwp_plan(table: dict[str, list[tuple[float, float]]]) -> MeasurementPlan:
    def party(rows: list[tuple[float, float]]) -> tuple[AnalyzerSettings, ...]:
        return tuple(AnalyzerSettings.from_degrees(hwp1=h1, hwp2=h2) for h1, h2 in rows)

    return MeasurementPlan(party(table["alice"]), party(table["bob"]))


def reference_plan() -> MeasurementPlan:
    """The reference settings read verbatim in this package's conventions."""
    return _hwp_plan(REFERENCE_DEG)


def i18_optimal_plan() -> MeasurementPlan:
    """Apparatus-optimal I18 settings for Psi4."""
    return _hwp_plan(I18_OPTIMAL_DEG)


# Polarization-analysis angles (degrees). Alice's rows are (45, 0) so that the
# standard form E00 + E01 + E10 - E11 is the maximal one for phi+.
CHSH_ANGLES_DEG = {"alice": (45.0, 0.0), "bob": (22.5, 67.5)}


def chsh_polarization_plan() -> MeasurementPlan:
    """CHSH on the polarization DOF: HWP1 at half the analysis angle, ports as outcomes."""

    def party(angles: Sequence[float]) -> tuple[AnalyzerSettings, ...]:
        return tuple(AnalyzerSettings.from_degrees(hwp1=a / 2) for a in angles)

    return MeasurementPlan(
        party(CHSH_ANGLES_DEG["alice"]),
        party(CHSH_ANGLES_DEG["bob"]),
        OutcomeMode.PORTA_VS_PORTB,
        OutcomeMode.PORTA_VS_PORTB,
    )


def chsh_time_bin_plan() -> MeasurementPlan:
    """CHSH on the time-bin DOF of H-polarized pairs.

    A diagonal polarizer in front of each analyzer leaves the photon in
    ``|D>``; D1 then analyzes the time bin along angle ``theta`` when HWP2 is
    at ``theta/2``, and D4 along ``theta + 90`` when HWP3 is at
    ``45 - theta/2``. Only D1/D4 events are kept.
    """

    def party(angles: Sequence[float]) -> tuple[AnalyzerSettings, ...]:
        return tuple(
            AnalyzerSettings.from_degrees(hwp2=a / 2, hwp3=45.0 - a / 2, input_polarizer=45.0) for a in angles
        )

    return MeasurementPlan(
        party(CHSH_ANGLES_DEG["alice"]),
        party(CHSH_ANGLES_DEG["bob"]),
        OutcomeMode.PAIR_D1_D4,
        OutcomeMode.PAIR_D1_D4,
    )
