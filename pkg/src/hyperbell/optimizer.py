"""Maximizing Bell functionals.

Three searches with different meanings:

* ``optimize_settings``: the best value the constrained analyzer reaches on a
  given state (multistart Nelder-Mead; a lower bound, not a certificate);
* ``local_bound_bruteforce``: the exact local maximum over deterministic boxes;
* ``seesaw_bound``: a lower bound on the quantum maximum in local dimension d.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize

from .apparatus import AnalyzerSettings, OutcomeMode, grouping_matrix, polarizer_projector
from .nonlocality import BellFunctional, MeasurementPlan, evaluate_plan
from .quantum_core import PAIR_DIM, PHOTON_DIM

ANGLE_NAMES = ("hwp1", "qwp1", "hwp2", "qwp2", "hwp3", "qwp3")

# Plates that can change the binarized statistics of each outcome mode.
_FREE_ANGLES = {
    OutcomeMode.DETECTOR1_VS_REST: ("hwp1", "qwp1", "hwp2", "qwp2"),
    OutcomeMode.PORTA_VS_PORTB: ("hwp1", "qwp1"),
    OutcomeMode.PAIR_D1_D4: ANGLE_NAMES,
}


@dataclass(frozen=True)
class OptimizerConfig:
    """Search controls. Angles live on [0, pi) (folded after every step)."""

    starts: int = 64
    max_iters: int = 500
    tol: float = 1e-9
    seed: int = 0
    max_fev: int = 20000
    polish_rounds: int = 3
    workers: int = 1

    def __post_init__(self) -> None:
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1 or self.max_fev < 1:
            raise ValueError("iteration limits must be positive")


def free_angles(mode: OutcomeMode | str, fix_qwp: bool = False) -> tuple[str, ...]:
    names = _FREE_ANGLES[OutcomeMode(mode)]
    return tuple(n for n in names if not (fix_qwp and n.startswith("qwp")))


# --- fast batched evaluation ----------------------------------------------------


def _pair_batch(h: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Batched ``apparatus.pair_jones``.

    Multiplying out diag(1, i) QWP(q) HWP(h) gives [[A+iB, C+iD], [-C+iD, A-iB]].
    """
    c2, s2 = np.cos(2 * h), np.sin(2 * h)
    cc, ss, sc = np.cos(q) ** 2, np.sin(q) ** 2, np.sin(q) * np.cos(q)
    a = cc * c2 + sc * s2
    b = ss * c2 - sc * s2
    c = cc * s2 - sc * c2
    d = ss * s2 + sc * c2
    out = np.empty(h.shape + (2, 2, 2))
    out[..., 0, 0, 0], out[..., 0, 0, 1] = a, b
    out[..., 0, 1, 0], out[..., 0, 1, 1] = c, d
    out[..., 1, 0, 0], out[..., 1, 0, 1] = -c, d
    out[..., 1, 1, 0], out[..., 1, 1, 1] = a, -b
    return out.view(complex)[..., 0]


def analyzer_bras(angles: np.ndarray, phases: np.ndarray | None = None) -> np.ndarray:
    """Detector bras for many analyzers at once.

    ``angles`` has shape (n, 6) in ``ANGLE_NAMES`` order; the result has shape
    (n, 4, 4) with rows D1..D4. Matches ``apparatus.detector_basis`` (bras
    are the conjugated kets).
    """
    a = np.asarray(angles, dtype=float)
    n = a.shape[0]
    ph = np.zeros((n, 2)) if phases is None else np.asarray(phases, dtype=float)
    u = _pair_batch(a[:, 0::2].T, a[:, 1::2].T)  # (3, n, 2, 2): U1, U2, U3
    u1 = u[0]
    k = np.zeros((2, n, 2, PHOTON_DIM), dtype=complex)
    k[0, :, 0, 0::2] = u1[:, 0]  # <H t1| (U1 x I)
    k[0, :, 1, 1::2] = np.exp(1j * ph[:, :1]) * u1[:, 1]  # e^{i phi_a} <V t2| (U1 x I)
    k[1, :, 0, 1::2] = u1[:, 0]  # <H t2| (U1 x I)
    k[1, :, 1, 0::2] = np.exp(1j * ph[:, 1:]) * u1[:, 1]  # e^{i phi_b} <V t1| (U1 x I)
    out = u[1:] @ k
    return np.concatenate([out[0], out[1]], axis=1)


def _settings_array(settings: Sequence[AnalyzerSettings]) -> tuple[np.ndarray, np.ndarray, list]:
    angles = np.array([[getattr(s, n) for n in ANGLE_NAMES] for s in settings], dtype=float)
    phases = np.array([[s.phi_a, s.phi_b] for s in settings], dtype=float)
    filters = [None if s.input_polarizer is None else polarizer_projector(s.input_polarizer) for s in settings]
    return angles, phases, filters


class _FastObjective:
    """I(plan) for a fixed state, functional and plan template."""

    def __init__(self, rho: np.ndarray, f: BellFunctional, plan: MeasurementPlan, names: Sequence[str]):
        plan.check_matches(f)
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (PAIR_DIM, PAIR_DIM):
            raise ValueError(f"expected a {PAIR_DIM}x{PAIR_DIM} state, got {rho.shape}")
        w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
        keep = w > 1e-14
        self.weights = w[keep]
        self.mats = v[:, keep].T.reshape(-1, PHOTON_DIM, PHOTON_DIM)
        self.f = f
        self.plan = plan
        self.n_a, self.n_b = plan.shape
        self.names = tuple(names)
        self.idx = [ANGLE_NAMES.index(n) for n in self.names]
        self.base_angles, self.phases, self.filters = _settings_array(plan.settings_a + plan.settings_b)
        self.g_a = grouping_matrix(plan.mode_a)
        self.g_b = grouping_matrix(plan.mode_b)
        self.pair = OutcomeMode.PAIR_D1_D4 in (plan.mode_a, plan.mode_b)

    @property
    def dim(self) -> int:
        return (self.n_a + self.n_b) * len(self.names)

    def angles(self, x: np.ndarray) -> np.ndarray:
        a = self.base_angles.copy()
        a[:, self.idx] = np.mod(np.asarray(x, dtype=float).reshape(len(a), len(self.idx)), np.pi)
        return a

    def tables(self, x: np.ndarray) -> np.ndarray:
        bras = analyzer_bras(self.angles(x), self.phases)
        for k, filt in enumerate(self.filters):
            if filt is not None:
                bras[k] = bras[k] @ filt
        ba = bras[: self.n_a].reshape(-1, PHOTON_DIM)
        bb = bras[self.n_a :].reshape(-1, PHOTON_DIM)
        bbt = bb.T
        p = 0.0
        for w, m in zip(self.weights, self.mats):
            amp = ba @ m @ bbt
            p = p + w * (amp.real**2 + amp.imag**2)
        t = p.reshape(self.n_a, 4, self.n_b, 4).transpose(0, 2, 1, 3)
        return t / t.sum(axis=(2, 3), keepdims=True)

    def binarized(self, x: np.ndarray) -> np.ndarray:
        b = self.g_a @ self.tables(x) @ self.g_b.T
        if self.pair:
            b = b / b.sum(axis=(2, 3), keepdims=True)
        return b

    def __call__(self, x: np.ndarray) -> float:
        b = self.binarized(x)
        p11 = b[:, :, 0, 0]
        p_a = b[:, :, 0, :].sum(axis=-1).mean(axis=1)
        p_b = b[:, :, :, 0].sum(axis=-1).mean(axis=0)
        f = self.f
        return float((f.joint * p11).sum() + f.marg_a @ p_a + f.marg_b @ p_b + f.constant)

    def plan_at(self, x: np.ndarray) -> MeasurementPlan:
        a = self.angles(x)
        settings = [
            replace(s, **{n: float(a[k, j]) for j, n in enumerate(ANGLE_NAMES)})
            for k, s in enumerate(self.plan.settings_a + self.plan.settings_b)
        ]
        return replace(self.plan, settings_a=tuple(settings[: self.n_a]), settings_b=tuple(settings[self.n_a :]))


# --- settings optimization ------------------------------------------------


@dataclass(frozen=True)
class SettingsTable:
    """Optimized analyzer settings with the value they reach."""

    plan: MeasurementPlan
    value: float
    functional: str = ""
    starts: int = 0
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "functional": self.functional,
            "value": self.value,
            "starts": self.starts,
            "seed": self.seed,
            "plan": self.plan.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SettingsTable":
        return cls(
            plan=MeasurementPlan.from_dict(data["plan"]),
            value=float(data["value"]),
            functional=data.get("functional", ""),
            starts=int(data.get("starts", 0)),
            seed=int(data.get("seed", 0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SettingsTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _nelder_mead(obj: _FastObjective, x0: np.ndarray, cfg: OptimizerConfig) -> tuple[np.ndarray, float]:
    opts = dict(maxfev=cfg.max_fev, maxiter=cfg.max_fev, xatol=1e-10, fatol=cfg.tol * 1e-3, adaptive=True)
    res = minimize(lambda x: -obj(x), x0, method="Nelder-Mead", options=opts)
    x, best = res.x, -res.fun
    # restart from the best point with a fresh simplex until the gain is below tol
    for _ in range(cfg.polish_rounds):
        res = minimize(lambda x: -obj(x), x, method="Nelder-Mead", options=opts)
        if -res.fun <= best + cfg.tol:
            if -res.fun > best:
                x, best = res.x, -res.fun
            break
        x, best = res.x, -res.fun
    return np.mod(x, np.pi), best


def _run_start(args: tuple) -> tuple[float, np.ndarray]:
    obj, x0, cfg = args
    x, v = _nelder_mead(obj, x0, cfg)
    return v, x


def default_plan_template(f: BellFunctional, mode: OutcomeMode | str = OutcomeMode.DETECTOR1_VS_REST) -> MeasurementPlan:
    n_a, n_b = f.scenario
    return MeasurementPlan((AnalyzerSettings(),) * n_a, (AnalyzerSettings(),) * n_b, mode, mode)


def optimize_settings(
    rho: np.ndarray,
    f: BellFunctional,
    cfg: OptimizerConfig | None = None,
    mode: OutcomeMode | str = OutcomeMode.DETECTOR1_VS_REST,
    fix_qwp: bool = False,
    template: MeasurementPlan | None = None,
) -> SettingsTable:
    """Multistart Nelder-Mead over the angles that matter for ``mode``.

    Every start draws its initial point from its own stream spawned from
    ``cfg.seed``; the best start wins (ties go to the lowest start index), so
    the result does not depend on ``cfg.workers``. The reported value is
    recomputed with ``evaluate_plan``.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    template = default_plan_template(f, mode) if template is None else template
    names = free_angles(template.mode_a, fix_qwp)
    if set(names) != set(free_angles(template.mode_b, fix_qwp)):
        names = tuple(n for n in ANGLE_NAMES if n in set(free_angles(template.mode_a, fix_qwp)) | set(free_angles(template.mode_b, fix_qwp)))
    obj = _FastObjective(rho, f, template, names)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.starts)]
    jobs = [(obj, r.uniform(0, np.pi, obj.dim), cfg) for r in streams]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_start, jobs))
    else:
        results = [_run_start(j) for j in jobs]
    best = max(range(len(results)), key=lambda k: (results[k][0], -k))
    plan = obj.plan_at(results[best][1])
    return SettingsTable(plan=plan, value=evaluate_plan(rho, f, plan), functional=f.name, starts=cfg.starts, seed=cfg.seed)


# --- local bound ------------------------------------------------------------------


def _exact(x: float) -> Fraction:
    return Fraction(float(x))


def local_boxes(n_a: int, n_b: int):
    """All deterministic assignments (a, b) with 1 meaning outcome 1."""
    for a in itertools.product((0, 1), repeat=n_a):
        for b in itertools.product((0, 1), repeat=n_b):
            yield a, b


def box_value(f: BellFunctional, a: Sequence[int], b: Sequence[int]) -> Fraction:
    """Exact value of ``f`` on the deterministic box (a, b)."""
    total = _exact(f.constant)
    for i, ai in enumerate(a):
        if ai:
            total += _exact(f.marg_a[i])
            total += sum((_exact(f.joint[i, j]) for j, bj in enumerate(b) if bj), Fraction(0))
    for j, bj in enumerate(b):
        if bj:
            total += _exact(f.marg_b[j])
    return total


def local_bound_bruteforce(f: BellFunctional) -> float:
    """Exact maximum over all deterministic local strategies."""
    if f.scenario not in ((4, 4), (2, 2)):
        raise ValueError(f"unsupported scenario {f.scenario}; expected (4, 4) or (2, 2)")
    return float(max(box_value(f, a, b) for a, b in local_boxes(*f.scenario)))


# --- seesaw -----------------------------------------------------------------------


@dataclass
class SeesawResult:
    value: float
    dim: int
    history: list[float] = field(default_factory=list)
    state: np.ndarray | None = None
    alice: np.ndarray | None = None
    bob: np.ndarray | None = None


def _best_projector(c: np.ndarray) -> np.ndarray:
    """Projector P maximizing Tr[P c] with 1 <= rank P <= d-1.

    Keeping both outcomes non-trivial is what makes the d=2 value a genuine
    qubit strategy; rank ties go to the lower rank.
    """
    d = c.shape[0]
    w, v = np.linalg.eigh((c + c.conj().T) / 2)
    order = np.argsort(w)[::-1]
    rank = int(np.clip((w > 1e-12).sum(), 1, d - 1))
    top = v[:, order[:rank]]
    return top @ top.conj().T


def bell_operator(f: BellFunctional, alice: np.ndarray, bob: np.ndarray) -> np.ndarray:
    d = alice.shape[-1]
    eye = np.eye(d)
    op = f.constant * np.eye(d * d, dtype=complex)
    for i in range(f.scenario[0]):
        op += f.marg_a[i] * np.kron(alice[i], eye)
        for j in range(f.scenario[1]):
            op += f.joint[i, j] * np.kron(alice[i], bob[j])
    for j in range(f.scenario[1]):
        op += f.marg_b[j] * np.kron(eye, bob[j])
    return op


def _conditional(f: BellFunctional, rho: np.ndarray, other: np.ndarray, side: str) -> np.ndarray:
    """Operators c_i with I = sum_i Tr[P_i c_i] + const-terms for the chosen side."""
    d = other.shape[-1]
    r = rho.reshape(d, d, d, d)
    if side == "alice":
        # c_i = Tr_B[(I x (sum_j J_ij B_j + m_i I)) rho]
        red = [np.einsum("abcd,db->ac", r, b) for b in other]
        red_id = np.einsum("abcb->ac", r)
        return np.array(
            [sum(f.joint[i, j] * red[j] for j in range(len(other))) + f.marg_a[i] * red_id for i in range(f.scenario[0])]
        )
    red = [np.einsum("abcd,ca->bd", r, a) for a in other]
    red_id = np.einsum("abad->bd", r)
    return np.array(
        [sum(f.joint[i, j] * red[i] for i in range(len(other))) + f.marg_b[j] * red_id for j in range(f.scenario[1])]
    )


def _random_projector(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(z)
    rank = int(rng.integers(1, d))
    top = q[:, :rank]
    return top @ top.conj().T


def _top_state(op: np.ndarray) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh((op + op.conj().T) / 2)
    psi = v[:, -1]
    return float(w[-1]), np.outer(psi, psi.conj())


def _seesaw_start(f: BellFunctional, dim: int, cfg: OptimizerConfig, rng: np.random.Generator) -> SeesawResult:
    n_a, n_b = f.scenario
    alice = np.array([_random_projector(dim, rng) for _ in range(n_a)])
    bob = np.array([_random_projector(dim, rng) for _ in range(n_b)])
    value, rho = _top_state(bell_operator(f, alice, bob))
    history = [value]
    for _ in range(cfg.max_iters):
        alice = np.array([_best_projector(c) for c in _conditional(f, rho, bob, "alice")])
        bob = np.array([_best_projector(c) for c in _conditional(f, rho, alice, "bob")])
        value, rho = _top_state(bell_operator(f, alice, bob))
        gain = value - history[-1]
        history.append(value)
        if gain < cfg.tol:
            break
    return SeesawResult(value=value, dim=dim, history=history, state=rho, alice=alice, bob=bob)


def seesaw_optimize(f: BellFunctional, dim: int, cfg: OptimizerConfig | None = None) -> SeesawResult:
    """Best seesaw run over ``cfg.starts`` random starts.

    Each run alternates Alice's projectors, Bob's projectors and the state
    (top eigenvector of the Bell operator); every step can only raise the
    value. The result is a lower bound on the dimension-``dim`` maximum.
    """
    if dim not in (2, 3, 4):
        raise ValueError("dim must be 2, 3 or 4")
    cfg = OptimizerConfig() if cfg is None else cfg
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.starts)]
    runs = [_seesaw_start(f, dim, cfg, r) for r in streams]
    best = max(range(len(runs)), key=lambda k: (runs[k].value, -k))
    return runs[best]


def seesaw_bound(f: BellFunctional, dim: int, cfg: OptimizerConfig | None = None) -> float:
    return seesaw_optimize(f, dim, cfg).value
