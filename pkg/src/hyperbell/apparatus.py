"""Wave-plate + unbalanced-interferometer analyzer as a 4-outcome measurement.

Light path for one photon::

    HWP1, QWP1 -> NPBS -> short/long arms -> PBS -+-> port A -> HWP2, QWP2 -> PBS -> D1 (H), D2 (V)
                                                  +-> port B -> HWP3, QWP3 -> PBS -> D3 (H), D4 (V)

In the middle time bin port A collects the H light that took the long arm
(early photons) and the V light that took the short arm (late photons), so it
couples ``|H t1>`` with ``|V t2>``; port B couples ``|H t2>`` with ``|V t1>``.
Each photon reaches the middle bin with probability 1/2 whatever its state,
so conditioning a coincidence on the middle bin just rescales by 1/4.

Angles are radians. Each wave-plate pair is referenced to its zero-angle
retardance (the stabilized interferometer phase absorbs it), so a pair at
(0, 0) acts as the identity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from .quantum_core import PAIR_DIM, PHOTON_DIM, partial_trace

ORTHONORMAL_TOL = 1e-10
MIDDLE_BIN_AMPLITUDE = 1 / np.sqrt(2)
DETECTORS = ("D1", "D2", "D3", "D4")
PORT_OF_DETECTOR = ("A", "A", "B", "B")


def hwp_jones(angle: float) -> np.ndarray:
    c, s = np.cos(2 * angle), np.sin(2 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_jones(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    off = (1 - 1j) * s * c
    return np.array([[c * c + 1j * s * s, off], [off, s * s + 1j * c * c]], dtype=complex)


@dataclass(frozen=True)
class WavePlate:
    kind: str
    angle: float

    def __post_init__(self) -> None:
        if self.kind not in ("HWP", "QWP"):
            raise ValueError(f"wave plate kind must be 'HWP' or 'QWP', got {self.kind!r}")
        if not np.isfinite(self.angle):
            raise ValueError("wave plate angle must be finite")


def waveplate_jones(wp: WavePlate) -> np.ndarray:
    """Jones matrix of a wave plate with its fast axis at ``wp.angle`` from horizontal."""
    return hwp_jones(wp.angle) if wp.kind == "HWP" else qwp_jones(wp.angle)


_ZERO_PAIR_INV = np.linalg.inv(qwp_jones(0.0) @ hwp_jones(0.0))


def pair_jones(hwp: float, qwp: float) -> np.ndarray:
    """HWP followed by QWP, referenced so that ``pair_jones(0, 0)`` is the identity."""
    return _ZERO_PAIR_INV @ qwp_jones(qwp) @ hwp_jones(hwp)


@dataclass(frozen=True)
class AnalyzerSettings:
    """Angles of the six analyzer plates plus the two port phases.

    ``input_polarizer`` optionally places a polarizer (transmission axis at
    that angle) in front of the analyzer.
    """

    hwp1: float = 0.0
    qwp1: float = 0.0
    hwp2: float = 0.0
    qwp2: float = 0.0
    hwp3: float = 0.0
    qwp3: float = 0.0
    phi_a: float = 0.0
    phi_b: float = 0.0
    input_polarizer: float | None = None

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None and f.name == "input_polarizer":
                continue
            if not np.isfinite(value):
                raise ValueError(f"{f.name} must be finite")

    @classmethod
    def from_degrees(cls, *angles: float, **named: float | None) -> "AnalyzerSettings":
        """Build from degrees: positional angles fill hwp1, qwp1, hwp2, qwp2, hwp3, qwp3."""
        order = ("hwp1", "qwp1", "hwp2", "qwp2", "hwp3", "qwp3")
        if len(angles) > len(order):
            raise ValueError(f"at most {len(order)} positional angles")
        values = dict(zip(order, angles))
        values.update(named)
        rad = {k: (None if v is None else float(np.deg2rad(v))) for k, v in values.items()}
        return cls(**rad)

    def to_degrees(self) -> dict[str, float | None]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = None if v is None else float(np.rad2deg(v))
        return out

    def with_angles(self, **changes: float) -> "AnalyzerSettings":
        return replace(self, **changes)


def port_couplings(phi_a: float = 0.0, phi_b: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Middle-bin maps (2x4) from the photon space onto the polarization of ports A and B.

    These are the normalized partial isometries; the physical middle-bin
    amplitude carries an extra factor ``MIDDLE_BIN_AMPLITUDE``.
    """
    k_a = np.zeros((2, PHOTON_DIM), dtype=complex)
    k_a[0, 0] = 1.0  # H t1
    k_a[1, 3] = np.exp(1j * phi_a)  # V t2
    k_b = np.zeros((2, PHOTON_DIM), dtype=complex)
    k_b[0, 1] = 1.0  # H t2
    k_b[1, 2] = np.exp(1j * phi_b)  # V t1
    return k_a, k_b


def polarizer_projector(angle: float) -> np.ndarray:
    """Projector (4x4) onto linear polarization ``angle``, identity on time."""
    v = np.array([np.cos(angle), np.sin(angle)], dtype=complex)
    return np.kron(np.outer(v, v.conj()), np.eye(2))


@dataclass(frozen=True)
class DetectorBasis:
    """Measurement kets for D1..D4 (rows of ``kets``).

    Without an input polarizer the kets are orthonormal. With one, ``filter``
    is the polarizer projector and detector i fires on ``filter @ kets[i]``.
    """

    kets: np.ndarray
    filter: np.ndarray | None = None

    @property
    def ports(self) -> tuple[str, ...]:
        return PORT_OF_DETECTOR

    def gram(self) -> np.ndarray:
        return self.kets.conj() @ self.kets.T

    def effective_kets(self) -> np.ndarray:
        """Unnormalized vectors whose squared overlaps give detection weights."""
        if self.filter is None:
            return self.kets
        return (self.filter @ self.kets.T).T

    def effects(self) -> np.ndarray:
        """POVM elements, shape (4, 4, 4)."""
        k = self.effective_kets()
        return np.einsum("ia,ib->iab", k, k.conj())

    def is_orthonormal(self, tol: float = ORTHONORMAL_TOL) -> bool:
        return bool(np.allclose(self.gram(), np.eye(PHOTON_DIM), atol=tol, rtol=0))


def detector_basis(s: AnalyzerSettings) -> DetectorBasis:
    u1 = np.kron(pair_jones(s.hwp1, s.qwp1), np.eye(2))
    u2 = pair_jones(s.hwp2, s.qwp2)
    u3 = pair_jones(s.hwp3, s.qwp3)
    k_a, k_b = port_couplings(s.phi_a, s.phi_b)
    # detector i projects onto the bra <pol_out| U_port K_port U1; kets are the conjugates
    bras = np.stack([(u2 @ k_a @ u1)[0], (u2 @ k_a @ u1)[1], (u3 @ k_b @ u1)[0], (u3 @ k_b @ u1)[1]])
    filt = None if s.input_polarizer is None else polarizer_projector(s.input_polarizer)
    return DetectorBasis(kets=bras.conj(), filter=filt)


def _effective_kets(b: DetectorBasis | AnalyzerSettings) -> np.ndarray:
    basis = detector_basis(b) if isinstance(b, AnalyzerSettings) else b
    return basis.effective_kets()


def unnormalized_outcome_table(rho: np.ndarray, ka: np.ndarray, kb: np.ndarray) -> np.ndarray:
    """Weights <ka_i kb_j| rho |ka_i kb_j> for all detector pairs."""
    r = np.asarray(rho).reshape(PHOTON_DIM, PHOTON_DIM, PHOTON_DIM, PHOTON_DIM)
    t = np.einsum("ia,jb,abcd,ic,jd->ij", ka.conj(), kb.conj(), r, ka, kb, optimize=True)
    return t.real


def outcome_table(
    rho: np.ndarray,
    s_a: AnalyzerSettings | DetectorBasis,
    s_b: AnalyzerSettings | DetectorBasis,
) -> np.ndarray:
    """4x4 coincidence probabilities (D_i for A, D_j for B) given middle-bin post-selection."""
    rho = np.asarray(rho)
    if rho.shape != (PAIR_DIM, PAIR_DIM):
        raise ValueError(f"outcome_table needs a {PAIR_DIM}x{PAIR_DIM} state, got {rho.shape}")
    t = unnormalized_outcome_table(rho, _effective_kets(s_a), _effective_kets(s_b))
    total = t.sum()
    if total <= 1e-14:
        raise ValueError("no coincidences survive the input polarizers")
    return t / total


def middle_bin_coincidence_probability(
    rho: np.ndarray, s_a: AnalyzerSettings, s_b: AnalyzerSettings
) -> float:
    """Probability that both photons land in the middle bin (before conditioning)."""
    amp2 = MIDDLE_BIN_AMPLITUDE**4
    t = unnormalized_outcome_table(rho, detector_basis(s_a).kets, detector_basis(s_b).kets)
    return float(amp2 * t.sum())


def single_party_marginal(rho: np.ndarray, s: AnalyzerSettings, party: int = 0) -> np.ndarray:
    """Detection probabilities of one photon's four detectors."""
    r = partial_trace(rho, party, (PHOTON_DIM, PHOTON_DIM))
    k = _effective_kets(s)
    p = np.einsum("ia,ab,ib->i", k.conj(), r, k).real
    return p / p.sum()


class OutcomeMode(str, enum.Enum):
    """How four detectors are grouped into a binary outcome (outcome 1 first)."""

    DETECTOR1_VS_REST = "detector1_vs_rest"
    PORTA_VS_PORTB = "portA_vs_portB"
    PAIR_D1_D4 = "pair_D1_D4"


_GROUPING = {
    OutcomeMode.DETECTOR1_VS_REST: np.array([[1, 0, 0, 0], [0, 1, 1, 1]], dtype=float),
    OutcomeMode.PORTA_VS_PORTB: np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=float),
    OutcomeMode.PAIR_D1_D4: np.array([[1, 0, 0, 0], [0, 0, 0, 1]], dtype=float),
}


def grouping_matrix(mode: OutcomeMode | str) -> np.ndarray:
    return _GROUPING[OutcomeMode(mode)]


def binarize_outcomes(
    table: np.ndarray, mode_a: OutcomeMode | str, mode_b: OutcomeMode | str
) -> np.ndarray:
    """Collapse a 4x4 detector table to a 2x2 table of (outcome 1, outcome 2).

    ``pair_D1_D4`` discards D2/D3 events and renormalizes what is left.
    """
    table = np.asarray(table, dtype=float)
    if table.shape != (4, 4):
        raise ValueError(f"expected a 4x4 table, got {table.shape}")
    mode_a, mode_b = OutcomeMode(mode_a), OutcomeMode(mode_b)
    out = grouping_matrix(mode_a) @ table @ grouping_matrix(mode_b).T
    if OutcomeMode.PAIR_D1_D4 in (mode_a, mode_b):
        total = out.sum()
        if total <= 0:
            raise ValueError("no D1/D4 events to renormalize")
        out = out / total
    return out


def random_settings(rng: np.random.Generator, phases: bool = True) -> AnalyzerSettings:
    angles = rng.uniform(0, np.pi, 6)
    ph = rng.uniform(0, 2 * np.pi, 2) if phases else np.zeros(2)
    return AnalyzerSettings(*angles, phi_a=ph[0], phi_b=ph[1])


def settings_from_vector(x: Sequence[float], names: Sequence[str], base: AnalyzerSettings | None = None) -> AnalyzerSettings:
    """Overwrite the named angles of ``base`` (angles folded into [0, pi))."""
    base = AnalyzerSettings() if base is None else base
    return replace(base, **{n: float(np.mod(v, np.pi)) for n, v in zip(names, x)})
