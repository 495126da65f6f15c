"""Parameter scans: Bell value against temporal visibility, steering against mixing."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nonlocality import BellFunctional, MeasurementPlan, builtin_i18, evaluate_plan, i18_optimal_plan
from .quantum_core import NoiseSpec, StateSpec, apply_noise
from .steering import STEERING_BOUND, port_a_steering, steering_of_state, steering_tables

VISIBILITY_COLUMNS = ("visibility", "lambda_pol", "bell_value", "local_bound", "qubit_bound")
STEERING_COLUMNS = ("lambda", "phi_e2", "steering_value", "threshold")


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive stop), or a comma list, or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise ValueError("grid step must be positive")
        if stop < start:
            raise ValueError("grid stop must not be below start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return np.round(start + step * np.arange(n), 12)
    return np.array([float(p) for p in text.split(",") if p.strip()])


def _check_unit(values: np.ndarray, name: str) -> None:
    if np.any(values < 0) or np.any(values > 1):
        raise ValueError(f"{name} grid must lie in [0, 1]")


@dataclass(frozen=True)
class _VisibilityPoint:
    f: BellFunctional
    plan: MeasurementPlan
    lambda_pol: float

    def __call__(self, v: float) -> dict:
        rho = apply_noise(StateSpec("psi4"), NoiseSpec(lambda_pol=self.lambda_pol, lambda_time=v), "product_dephase")
        return {
            "visibility": float(v),
            "lambda_pol": self.lambda_pol,
            "bell_value": evaluate_plan(rho, self.f, self.plan),
            "local_bound": self.f.bounds.local,
            "qubit_bound": self.f.bounds.qubit,
        }


def _map(fn, items: Sequence[float], workers: int) -> list:
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def scan_visibility(
    visibilities: Sequence[float],
    lambda_pol: float = 0.9,
    f: BellFunctional | None = None,
    plan: MeasurementPlan | None = None,
    workers: int = 1,
) -> list[dict]:
    """Bell value of the dephased hyperentangled state at fixed settings, per visibility."""
    v = np.asarray(visibilities, dtype=float)
    _check_unit(v, "visibility")
    f = builtin_i18() if f is None else f
    plan = i18_optimal_plan() if plan is None else plan
    rows = _map(_VisibilityPoint(f, plan, float(lambda_pol)), list(v), workers)
    return sorted(rows, key=lambda r: r["visibility"])


@dataclass(frozen=True)
class _SteeringPoint:
    phi_e2: float
    estimator: str

    def __call__(self, lam: float) -> dict:
        rho = apply_noise(StateSpec("phi4_phased", phi_e2=self.phi_e2), NoiseSpec(lam=lam), "rho4")
        if self.estimator == "port_a":
            value = port_a_steering(steering_tables(rho))
        else:
            value = steering_of_state(rho)
        return {"lambda": float(lam), "phi_e2": self.phi_e2, "steering_value": value, "threshold": STEERING_BOUND}


def scan_steering(
    lambdas: Sequence[float], phi_e2: float = np.pi, estimator: str = "full", workers: int = 1
) -> list[dict]:
    """Steering value of rho4 built on the phased state, per mixing parameter."""
    lam = np.asarray(lambdas, dtype=float)
    _check_unit(lam, "lambda")
    if estimator not in ("full", "port_a"):
        raise ValueError("estimator must be 'full' or 'port_a'")
    rows = _map(_SteeringPoint(float(phi_e2), estimator), list(lam), workers)
    return sorted(rows, key=lambda r: r["lambda"])


def crossing(x: Sequence[float], y: Sequence[float], level: float) -> float | None:
    """First x where y rises through ``level`` (linear interpolation); None if it never does inside the grid."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    above = y >= level
    for k in range(1, len(x)):
        if above[k] and not above[k - 1]:
            return float(x[k - 1] + (level - y[k - 1]) * (x[k] - x[k - 1]) / (y[k] - y[k - 1]))
    return None
