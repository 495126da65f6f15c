"""Dense linear algebra and state families for polarization x time-bin photon pairs.

Single-photon basis (pol ⊗ time, H/V outer, t1/t2 inner)::

    |0> = |H t1>,  |1> = |H t2>,  |2> = |V t1>,  |3> = |V t2>

Two-photon index is ``4 * a + b`` with party A first. States are plain
numpy arrays: kets are 1-D complex vectors, density matrices square complex
matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ATOL = 1e-12
POSITIVITY_TOL = 1e-10

PHOTON_DIM = 4
PAIR_DIM = PHOTON_DIM * PHOTON_DIM
BASIS_LABELS = ("Ht1", "Ht2", "Vt1", "Vt2")

FAMILIES = ("pol_only", "time_only", "hyper", "psi4", "phi4", "phi4_phased")
NOISE_MODELS = ("product_dephase", "rho4")

_H = np.array([1.0, 0.0], dtype=complex)
_V = np.array([0.0, 1.0], dtype=complex)


def basis_ket(index: int, dim: int = PHOTON_DIM) -> np.ndarray:
    """Computational basis vector ``|index>`` of dimension ``dim``."""
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def photon_ket(label: str) -> np.ndarray:
    """Single-photon ket from a label such as ``"Vt2"``."""
    try:
        return basis_ket(BASIS_LABELS.index(label))
    except ValueError:
        raise ValueError(f"unknown basis label {label!r}; expected one of {BASIS_LABELS}") from None


def ket_to_str(ket: np.ndarray, tol: float = 1e-9) -> str:
    """Render a single-photon ket in the labelled basis, e.g. ``0.7071|Ht1> + 0.7071|Vt2>``."""
    ket = np.asarray(ket, dtype=complex)
    # fix the global phase on the largest component so output is readable
    k = int(np.argmax(np.abs(ket)))
    if abs(ket[k]) > tol:
        ket = ket * np.exp(-1j * np.angle(ket[k]))
    text = ""
    for amp, label in zip(ket, BASIS_LABELS):
        if abs(amp) <= tol:
            continue
        if abs(amp.imag) > tol:
            sign, body = "+", f"({amp.real:.4f}{amp.imag:+.4f}j)"
        else:
            sign = "-" if amp.real < 0 else "+"
            body = "" if abs(abs(amp.real) - 1) <= tol else f"{abs(amp.real):.4f}"
        if text:
            text += f" {sign} "
        elif sign == "-":
            text = "-"
        text += f"{body}|{label}>"
    return text or "0"


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two kets or two operators (``a`` is the outer factor)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise TypeError("tensor_product needs two kets or two square matrices")
    if a.size == 0 or b.size == 0:
        raise ValueError("tensor_product needs non-empty factors")
    return np.kron(a, b)


def density(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def partial_trace(rho: np.ndarray, keep: int | Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Reduced state on the subsystems listed in ``keep``.

    ``dims`` gives the factor dimensions in Kronecker order; subsystems are
    numbered from 0 (party A of a pair is 0).
    """
    rho = np.asarray(rho)
    dims = [int(d) for d in dims]
    n = len(dims)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise ValueError(f"rho has shape {rho.shape}, inconsistent with dims {dims}")
    keep = [keep] if isinstance(keep, (int, np.integer)) else list(keep)
    if any(not 0 <= k < n for k in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid subsystems {keep} for {n} factors")
    keep = sorted(keep)
    traced = [k for k in range(n) if k not in keep]

    t = rho.reshape(dims + dims)
    # contract traced subsystems pairwise, highest index first so axis numbers stay valid
    for k in sorted(traced, reverse=True):
        nk = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + nk)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def is_density_matrix(rho: np.ndarray, atol: float = ATOL, psd_tol: float = POSITIVITY_TOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        return False
    if abs(np.trace(rho) - 1.0) > atol:
        return False
    return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -psd_tol)


def check_density_matrix(rho: np.ndarray, atol: float = ATOL, psd_tol: float = POSITIVITY_TOL) -> np.ndarray:
    if not is_density_matrix(rho, atol, psd_tol):
        raise ValueError("matrix is not a valid density matrix (Hermitian, unit trace, PSD)")
    return np.asarray(rho, dtype=complex)


@dataclass(frozen=True)
class StateSpec:
    """A member of one of the pure two-photon state families.

    ``phi_p``/``phi_t`` are the polarization and time-bin phases of the
    hyperentangled product state; ``phi_e1``, ``phi_e2`` and ``phi_r`` belong
    to the phased steering state. Each family reads only its own phases.
    """

    family: str = "psi4"
    phi_p: float = 0.0
    phi_t: float = 0.0
    phi_e1: float = 0.0
    phi_e2: float = 0.0
    phi_r: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown state family {self.family!r}; expected one of {FAMILIES}")
        for name in ("phi_p", "phi_t", "phi_e1", "phi_e2", "phi_r"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class NoiseSpec:
    """Mixing parameters; values outside [0, 1] are clamped.

    ``lambda_time`` is identified with the temporal interference visibility.
    """

    lambda_pol: float = 1.0
    lambda_time: float = 1.0
    lam: float = 1.0

    def __post_init__(self) -> None:
        for name in ("lambda_pol", "lambda_time", "lam"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, min(1.0, max(0.0, value)))


def _pair_from_quarts(amps: Sequence[complex]) -> np.ndarray:
    """Two-photon ket sum_i amps[i] |i i>."""
    psi = np.zeros(PAIR_DIM, dtype=complex)
    for i, a in enumerate(amps):
        psi[PHOTON_DIM * i + i] = a
    return psi


def make_state(spec: StateSpec) -> np.ndarray:
    """Two-photon ket (length 16) for ``spec``."""
    f = spec.family
    e = np.exp
    if f == "psi4":
        return _pair_from_quarts([0.5, 0.5, 0.5, 0.5])
    if f == "hyper":
        return 0.5 * _pair_from_quarts(
            [1.0, e(1j * spec.phi_t), e(1j * spec.phi_p), e(1j * (spec.phi_t + spec.phi_p))]
        )
    if f == "phi4_phased":
        return 0.5 * _pair_from_quarts(
            [1.0, e(1j * (spec.phi_e1 + spec.phi_r)), e(1j * spec.phi_r), e(1j * spec.phi_e2)]
        )
    if f == "phi4":
        return 0.5 * _pair_from_quarts([1.0, e(1j * spec.phi_r), e(1j * spec.phi_r), -1.0])
    psi = np.zeros(PAIR_DIM, dtype=complex)
    r = 1 / np.sqrt(2)
    if f == "pol_only":
        # |H t1, H t1> + e^{i phi_p} |V t1, V t1>
        psi[PHOTON_DIM * 0 + 0] = r
        psi[PHOTON_DIM * 2 + 2] = r * e(1j * spec.phi_p)
    else:  # time_only
        # |H t1, H t1> + e^{i phi_t} |H t2, H t2>
        psi[PHOTON_DIM * 0 + 0] = r
        psi[PHOTON_DIM * 1 + 1] = r * e(1j * spec.phi_t)
    return psi


def _dephased_bell_pair(lam: float, phase: float) -> np.ndarray:
    """lam |phi+><phi+| + (1-lam)/2 (|00><00| + |11><11|) on a two-qubit DOF."""
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    phi[3] *= np.exp(1j * phase)
    classical = np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)
    return lam * density(phi) + (1.0 - lam) * classical


def _reorder_dof_to_parties(rho_pol: np.ndarray, rho_time: np.ndarray) -> np.ndarray:
    # rho_pol ⊗ rho_time lives on (polA, polB, timeA, timeB); photons need (polA, timeA, polB, timeB)
    t = np.kron(rho_pol, rho_time).reshape([2] * 8)
    t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7)
    return t.reshape(PAIR_DIM, PAIR_DIM)


def apply_noise(spec: StateSpec, noise: NoiseSpec, model: str = "product_dephase") -> np.ndarray:
    """Mixed two-photon state from a pure family plus a noise model.

    ``product_dephase`` dephases the polarization and time-bin Bell pairs
    independently (families ``hyper``/``psi4``); ``rho4`` mixes the steering
    state with its own diagonal (families ``phi4``/``phi4_phased``).
    """
    if model not in NOISE_MODELS:
        raise ValueError(f"unknown noise model {model!r}; expected one of {NOISE_MODELS}")
    if model == "product_dephase":
        if spec.family not in ("hyper", "psi4"):
            raise ValueError(f"product_dephase applies to hyper/psi4 states, not {spec.family!r}")
        phi_p = spec.phi_p if spec.family == "hyper" else 0.0
        phi_t = spec.phi_t if spec.family == "hyper" else 0.0
        return _reorder_dof_to_parties(
            _dephased_bell_pair(noise.lambda_pol, phi_p),
            _dephased_bell_pair(noise.lambda_time, phi_t),
        )
    if spec.family not in ("phi4", "phi4_phased"):
        raise ValueError(f"rho4 applies to phi4/phi4_phased states, not {spec.family!r}")
    pure = density(make_state(spec))
    classical = np.zeros((PAIR_DIM, PAIR_DIM), dtype=complex)
    for i in range(PHOTON_DIM):
        classical[(PHOTON_DIM + 1) * i, (PHOTON_DIM + 1) * i] = 0.25
    return noise.lam * pure + (1.0 - noise.lam) * classical


def joint_probability(rho: np.ndarray, ket_a: np.ndarray, ket_b: np.ndarray) -> float:
    """Born-rule probability <a b| rho |a b>."""
    rho = np.asarray(rho)
    ket = np.kron(np.asarray(ket_a, dtype=complex), np.asarray(ket_b, dtype=complex))
    if rho.shape != (ket.size, ket.size):
        raise ValueError(f"kets of total dim {ket.size} do not match rho of shape {rho.shape}")
    return float(np.real(ket.conj() @ rho @ ket))


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ket."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from the induced (Ginibre) measure."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
