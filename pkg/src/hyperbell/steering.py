"""Two-setting EPR steering on the polarization x time-bin ququart.

The ququart splits into two qubit subspaces::

    subspace 1 = span{|0>, |3>} = span{|H t1>, |V t2>}   (seen by port A)
    subspace 2 = span{|1>, |2>} = span{|H t2>, |V t1>}   (seen by port B)

The trusted party (A) measures X = X1 + X2 and Z = Z1 + Z2 (direct sums of
the Pauli operators of each subspace). The untrusted party (B) makes two
binary measurements, y=0 of X type and y=1 of Z type, and the functional is

    S = 1/2 (Tr[F_0 X] + Tr[F_1 Z]),    F_y = rho_{+1|y} - rho_{-1|y}.

A local-hidden-state model cannot exceed 1/sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .apparatus import DETECTORS, AnalyzerSettings, detector_basis, outcome_table
from .quantum_core import PAIR_DIM, PHOTON_DIM, density, partial_trace, random_pure_state

STEERING_BOUND = float(1 / np.sqrt(2))
NORMALIZATION_TOL = 1e-6
PSD_TOL = 1e-10

# y=0 is the X-type setting, y=1 the Z-type setting
X_SETTINGS = AnalyzerSettings(hwp2=np.pi / 8, hwp3=np.pi / 8)
Z_SETTINGS = AnalyzerSettings()
SETTINGS = (X_SETTINGS, Z_SETTINGS)

SignMap = Mapping[str, int]


def _check_sign_map(signs: SignMap) -> dict[str, int]:
    missing = [d for d in DETECTORS if d not in signs]
    if missing:
        raise ValueError(f"sign map is missing detectors {missing}")
    bad = {d: signs[d] for d in DETECTORS if signs[d] not in (1, -1)}
    if bad:
        raise ValueError(f"signs must be +1 or -1, got {bad}")
    return {d: int(signs[d]) for d in DETECTORS}


@dataclass(frozen=True)
class SteeringObservables:
    """Subspace projectors, trusted-side observables and detector sign maps.

    ``trusted_signs[y]`` and ``untrusted_signs[y]`` map D1..D4 to +/-1 for
    setting y (0 = X type, 1 = Z type).
    """

    pi1: np.ndarray
    pi2: np.ndarray
    x: np.ndarray
    z: np.ndarray
    trusted_signs: tuple[dict[str, int], dict[str, int]]
    untrusted_signs: tuple[dict[str, int], dict[str, int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trusted_signs", tuple(_check_sign_map(s) for s in self.trusted_signs))
        object.__setattr__(self, "untrusted_signs", tuple(_check_sign_map(s) for s in self.untrusted_signs))

    @property
    def observables(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x, self.z

    def sign_vector(self, party: str, y: int) -> np.ndarray:
        maps = self.trusted_signs if party == "trusted" else self.untrusted_signs
        return np.array([maps[y][d] for d in DETECTORS], dtype=float)


def _pauli_pair(i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.zeros((PHOTON_DIM, PHOTON_DIM), dtype=complex)
    x[i, j] = x[j, i] = 1.0
    z = np.zeros((PHOTON_DIM, PHOTON_DIM), dtype=complex)
    z[i, i], z[j, j] = 1.0, -1.0
    return x, z


def default_observables() -> SteeringObservables:
    """Observables with the default sign maps.

    The trusted side reads +1 on {D1, D3} in both bases, which is exactly
    X1 + X2 (or Z1 + Z2) at the protocol settings. The untrusted side swaps
    the port-A labels of its X measurement, i.e. measures -X1 + X2; this
    relabeling matches the minus sign on |33> of the target state.
    """
    x1, z1 = _pauli_pair(0, 3)
    x2, z2 = _pauli_pair(1, 2)
    pi1 = np.diag([1, 0, 0, 1]).astype(complex)
    pi2 = np.diag([0, 1, 1, 0]).astype(complex)
    standard = {"D1": 1, "D2": -1, "D3": 1, "D4": -1}
    swapped_a = {"D1": -1, "D2": 1, "D3": 1, "D4": -1}
    return SteeringObservables(
        pi1=pi1,
        pi2=pi2,
        x=x1 + x2,
        z=z1 + z2,
        trusted_signs=(standard, dict(standard)),
        untrusted_signs=(swapped_a, dict(standard)),
    )


def subspace_projector(obs: SteeringObservables, i: int) -> np.ndarray:
    if i not in (1, 2):
        raise ValueError("subspace index must be 1 or 2")
    return obs.pi1 if i == 1 else obs.pi2


# --- assemblages -------------------------------------------------------------


@dataclass(frozen=True)
class Assemblage:
    """Unnormalized conditional states ``operators[y, k]`` with k=0 for +1, k=1 for -1."""

    operators: np.ndarray

    def __post_init__(self) -> None:
        ops = np.asarray(self.operators, dtype=complex)
        if ops.shape != (2, 2, PHOTON_DIM, PHOTON_DIM):
            raise ValueError(f"assemblage must have shape (2, 2, 4, 4), got {ops.shape}")
        for y in range(2):
            for k in range(2):
                op = ops[y, k]
                if not np.allclose(op, op.conj().T, atol=1e-10):
                    raise ValueError(f"rho_({k}|{y}) is not Hermitian")
                if np.linalg.eigvalsh((op + op.conj().T) / 2).min() < -PSD_TOL:
                    raise ValueError(f"rho_({k}|{y}) is not positive semidefinite")
            total = np.trace(ops[y].sum(axis=0)).real
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"assemblage for setting {y} has total trace {total:.6g}, expected 1")
        ops.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    def f(self, y: int) -> np.ndarray:
        """F_y = rho_{+1|y} - rho_{-1|y}."""
        return self.operators[y, 0] - self.operators[y, 1]

    def reduced_state(self, y: int = 0) -> np.ndarray:
        return self.operators[y].sum(axis=0)


def _check_projective(meas: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    meas = np.asarray(meas, dtype=complex)
    if meas.shape != (2, 2, PHOTON_DIM, PHOTON_DIM):
        raise ValueError(f"measurements must have shape (2, 2, 4, 4), got {meas.shape}")
    eye = np.eye(PHOTON_DIM)
    for y in range(2):
        for k in range(2):
            p = meas[y, k]
            if not (np.allclose(p, p.conj().T, atol=tol) and np.allclose(p @ p, p, atol=tol)):
                raise ValueError(f"measurement operator ({y}, {k}) is not a projector")
        if not np.allclose(meas[y].sum(axis=0), eye, atol=tol):
            raise ValueError(f"measurement {y} does not sum to the identity")
    return meas


def build_assemblage(rho: np.ndarray, bob_meas: np.ndarray) -> Assemblage:
    """rho_{b|y} = Tr_B[(I x B_{b|y}) rho] for two binary projective measurements."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (PAIR_DIM, PAIR_DIM):
        raise ValueError(f"expected a {PAIR_DIM}x{PAIR_DIM} state, got {rho.shape}")
    meas = _check_projective(bob_meas)
    eye = np.eye(PHOTON_DIM)
    ops = np.empty((2, 2, PHOTON_DIM, PHOTON_DIM), dtype=complex)
    for y in range(2):
        for k in range(2):
            ops[y, k] = partial_trace(np.kron(eye, meas[y, k]) @ rho, 0, (PHOTON_DIM, PHOTON_DIM))
    return Assemblage(ops)


def _measurement_from_detectors(s: AnalyzerSettings, signs: Mapping[str, int]) -> np.ndarray:
    kets = detector_basis(s).effective_kets()
    plus = sum(
        (density(kets[i]) for i, d in enumerate(DETECTORS) if signs[d] == 1),
        np.zeros((PHOTON_DIM, PHOTON_DIM), dtype=complex),
    )
    return np.array([plus, np.eye(PHOTON_DIM) - plus])


def protocol_measurements(obs: SteeringObservables | None = None) -> np.ndarray:
    """Untrusted-side projectors realized by the analyzer at the X and Z settings."""
    obs = default_observables() if obs is None else obs
    return np.array([_measurement_from_detectors(s, obs.untrusted_signs[y]) for y, s in enumerate(SETTINGS)])


def optimal_measurements(rho: np.ndarray, obs: SteeringObservables | None = None) -> np.ndarray:
    """Untrusted-side projectors maximizing S for this state.

    For each y the best choice is the positive eigenspace of
    Tr_A[(O_y x I) rho]; zero eigenvalues go to the -1 outcome.
    """
    obs = default_observables() if obs is None else obs
    rho = np.asarray(rho, dtype=complex)
    eye = np.eye(PHOTON_DIM)
    out = np.empty((2, 2, PHOTON_DIM, PHOTON_DIM), dtype=complex)
    for y, o in enumerate(obs.observables):
        m = partial_trace(np.kron(o, eye) @ rho, 1, (PHOTON_DIM, PHOTON_DIM))
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        pos = v[:, w > 1e-12]
        plus = pos @ pos.conj().T
        out[y] = [plus, eye - plus]
    return out


def steering_value(asm: Assemblage, obs: SteeringObservables | None = None) -> float:
    obs = default_observables() if obs is None else obs
    return float(0.5 * (np.trace(asm.f(0) @ obs.x) + np.trace(asm.f(1) @ obs.z)).real)


def steering_of_state(rho: np.ndarray, obs: SteeringObservables | None = None, measurements: str = "protocol") -> float:
    """S of a state with ``measurements`` either ``protocol`` or ``optimal``."""
    obs = default_observables() if obs is None else obs
    if measurements == "protocol":
        meas = protocol_measurements(obs)
    elif measurements == "optimal":
        meas = optimal_measurements(rho, obs)
    else:
        raise ValueError(f"measurements must be 'protocol' or 'optimal', got {measurements!r}")
    return steering_value(build_assemblage(rho, meas), obs)


# --- probability form ---------------------------------------------------------


def steering_tables(rho: np.ndarray) -> np.ndarray:
    """Outcome tables (trusted detector, untrusted detector) at the X and Z settings, shape (2, 4, 4)."""
    return np.array([outcome_table(rho, s, s) for s in SETTINGS])


def _check_tables(tables: np.ndarray) -> np.ndarray:
    t = np.asarray(tables, dtype=float)
    if t.shape != (2, 4, 4):
        raise ValueError(f"expected X and Z tables of shape (2, 4, 4), got {t.shape}")
    return t


def correlators_from_tables(tables: np.ndarray, obs: SteeringObservables | None = None) -> np.ndarray:
    """E_y = sum_ij signA_i signB_j P_y(i, j) for y = X, Z."""
    obs = default_observables() if obs is None else obs
    t = _check_tables(tables)
    return np.array(
        [obs.sign_vector("trusted", y) @ t[y] @ obs.sign_vector("untrusted", y) for y in range(2)]
    )


def steering_from_probabilities(tables: np.ndarray, obs: SteeringObservables | None = None) -> float:
    e = correlators_from_tables(tables, obs)
    return float(0.5 * e.sum())


def port_a_steering(tables: np.ndarray, obs: SteeringObservables | None = None) -> float:
    """S from coincidences with both photons at port A (subspace 1 only).

    The port-A block is renormalized, so the value does not depend on the
    phases living in subspace 2.
    """
    obs = default_observables() if obs is None else obs
    t = _check_tables(tables)[:, :2, :2]
    total = t.sum(axis=(1, 2))
    if np.any(total <= 0):
        raise ValueError("no port-A coincidences")
    e = [
        obs.sign_vector("trusted", y)[:2] @ (t[y] / total[y]) @ obs.sign_vector("untrusted", y)[:2]
        for y in range(2)
    ]
    return float(0.5 * sum(e))


# --- phase extraction ---------------------------------------------------------


def phase_probabilities(rho_or_tables: np.ndarray) -> tuple[float, float]:
    """(p1, p2) from the X-setting table with plain port-A labels.

    p1 = P(trusted D2, untrusted D1), p2 = P(trusted D2, untrusted D2), so
    -1 means D2 and +1 means D1 on both sides.
    """
    arr = np.asarray(rho_or_tables)
    if arr.shape == (PAIR_DIM, PAIR_DIM):
        x_table = outcome_table(arr, X_SETTINGS, X_SETTINGS)
    elif arr.shape == (2, 4, 4):
        x_table = arr[0]
    elif arr.shape == (4, 4):
        x_table = arr
    else:
        raise ValueError(f"expected a state or X-setting table, got shape {arr.shape}")
    return float(x_table[1, 0]), float(x_table[1, 1])


def extract_phase(p1: float, p2: float, tol: float = 1e-12) -> float:
    """Entanglement phase arccos(4 (p2 - p1)) of subspace 1."""
    arg = 4.0 * (p2 - p1)
    if abs(arg) > 1.0 + tol:
        raise ValueError(f"4 (p2 - p1) = {arg:.6g} lies outside [-1, 1]; inconsistent probabilities")
    return float(np.arccos(np.clip(arg, -1.0, 1.0)))


# --- subspace decomposition ----------------------------------------------------


@dataclass(frozen=True)
class SubspaceTerm:
    index: int
    weight: float
    f: tuple[np.ndarray, np.ndarray]


def subspace_decomposition(
    rho: np.ndarray, bob_meas: np.ndarray, obs: SteeringObservables | None = None
) -> tuple[SubspaceTerm, SubspaceTerm]:
    """Weights p_i = Tr[(Pi_i x I) rho] and the F_y of the conditional states.

    The conditional state is (Pi_i x I) rho (Pi_i x I) / p_i; its assemblage
    should satisfy Pi_i F_y Pi_i = p_i F_{i,y}.
    """
    obs = default_observables() if obs is None else obs
    rho = np.asarray(rho, dtype=complex)
    terms = []
    for i in (1, 2):
        proj = np.kron(subspace_projector(obs, i), np.eye(PHOTON_DIM))
        block = proj @ rho @ proj
        p = float(np.trace(block).real)
        if p <= 1e-14:
            zero = np.zeros((PHOTON_DIM, PHOTON_DIM), dtype=complex)
            terms.append(SubspaceTerm(i, 0.0, (zero, zero.copy())))
            continue
        asm = build_assemblage(block / p, bob_meas)
        terms.append(SubspaceTerm(i, p, (asm.f(0), asm.f(1))))
    return terms[0], terms[1]


# --- separable models -----------------------------------------------------------


@dataclass(frozen=True)
class SeparableEnsemble:
    """sum_k p_k |a_k><a_k| x |b_k><b_k|."""

    weights: np.ndarray
    kets_a: np.ndarray
    kets_b: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        ka = np.atleast_2d(np.asarray(self.kets_a, dtype=complex))
        kb = np.atleast_2d(np.asarray(self.kets_b, dtype=complex))
        if not (len(w) == len(ka) == len(kb)):
            raise ValueError("weights and kets must have the same number of components")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        ka = ka / np.linalg.norm(ka, axis=1, keepdims=True)
        kb = kb / np.linalg.norm(kb, axis=1, keepdims=True)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "kets_a", ka)
        object.__setattr__(self, "kets_b", kb)

    def density(self) -> np.ndarray:
        return sum(p * density(np.kron(a, b)) for p, a, b in zip(self.weights, self.kets_a, self.kets_b))


def random_separable(rng: np.random.Generator, components: int = 3) -> SeparableEnsemble:
    w = rng.dirichlet(np.ones(components))
    ka = np.array([random_pure_state(PHOTON_DIM, rng) for _ in range(components)])
    kb = np.array([random_pure_state(PHOTON_DIM, rng) for _ in range(components)])
    return SeparableEnsemble(w, ka, kb)


@dataclass
class LHSReport:
    trials: int
    max_value: float
    violations: int
    bound: float = STEERING_BOUND
    values: list[float] = field(default_factory=list, repr=False)


def lhs_witness_check(
    obs: SteeringObservables | None = None,
    trials: int = 1000,
    seed: int = 0,
    ensembles: Sequence[SeparableEnsemble] | None = None,
    measurements: str = "optimal",
    max_components: int = 4,
) -> LHSReport:
    """Largest S over separable states and how many exceed 1/sqrt(2).

    Without ``ensembles``, ``trials`` random separable states are drawn,
    each from its own stream spawned from ``seed``.
    """
    if trials < 1 and ensembles is None:
        raise ValueError("trials must be at least 1")
    obs = default_observables() if obs is None else obs
    if ensembles is None:
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]
        ensembles = [random_separable(r, int(r.integers(1, max_components + 1))) for r in streams]
    values = [steering_of_state(ens.density(), obs, measurements) for ens in ensembles]
    return LHSReport(
        trials=len(values),
        max_value=max(values),
        violations=sum(v > STEERING_BOUND + 1e-9 for v in values),
        values=values,
    )
