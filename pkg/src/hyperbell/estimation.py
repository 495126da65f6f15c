"""Finite counting statistics: Poisson coincidence counts and estimators with errors.

Every estimator handled here has the form

    value = sum_k  (sum_c w_kc N_kc) / (sum_c m_kc N_kc)

over basis pairs k and detector cells c, i.e. a sum of frequency ratios.
First-order propagation with Var N = N gives

    sigma^2 = sum_kc N_kc ((w_kc - m_kc r_k) / D_k)^2,   r_k = num_k / D_k.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .apparatus import grouping_matrix
from .nonlocality import BellFunctional, MeasurementPlan
from .steering import SteeringObservables, default_observables

CSV_COLUMNS = ("basis_a", "basis_b", "det_a", "det_b", "count")


@dataclass(frozen=True)
class CountTable:
    """Coincidence counts ``counts[k, i, j]`` for basis pair ``pairs[k]``.

    ``planned`` holds the intended number of coincidences per pair. Sampled
    tables are integral; ``expected=True`` allows the fractional mean counts.
    """

    counts: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    planned: np.ndarray | None = None
    expected: bool = False

    def __post_init__(self) -> None:
        c = np.asarray(self.counts, dtype=float if self.expected else np.int64)
        if c.ndim != 3 or c.shape[1:] != (4, 4):
            raise ValueError(f"counts must have shape (K, 4, 4), got {c.shape}")
        pairs = tuple((int(x), int(y)) for x, y in self.pairs)
        if len(pairs) != c.shape[0]:
            raise ValueError("one basis pair label per count block is required")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        if not self.expected and not np.array_equal(c, np.asarray(self.counts, dtype=float)):
            raise ValueError("sampled counts must be integers")
        planned = None if self.planned is None else np.asarray(self.planned, dtype=float).reshape(len(pairs))
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "planned", planned)

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 2))

    def block(self, x: int, y: int) -> np.ndarray:
        return self.counts[self.pairs.index((x, y))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for (x, y), block in zip(self.pairs, self.counts):
            for i in range(4):
                for j in range(4):
                    v = block[i, j]
                    w.writerow([x, y, i + 1, j + 1, repr(float(v)) if self.expected else int(v)])
        return buf.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "CountTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or tuple(rows[0].keys()) != CSV_COLUMNS:
            raise ValueError(f"count CSV must have columns {CSV_COLUMNS}")
        pairs: list[tuple[int, int]] = []
        for r in rows:
            p = (int(r["basis_a"]), int(r["basis_b"]))
            if p not in pairs:
                pairs.append(p)
        expected = any("." in r["count"] or "e" in r["count"].lower() for r in rows)
        counts = np.zeros((len(pairs), 4, 4))
        for r in rows:
            k = pairs.index((int(r["basis_a"]), int(r["basis_b"])))
            counts[k, int(r["det_a"]) - 1, int(r["det_b"]) - 1] = float(r["count"])
        return cls(counts, tuple(pairs), expected=expected)

    @classmethod
    def load_csv(cls, path: str | Path) -> "CountTable":
        return cls.from_csv(Path(path).read_text())


def _flatten_tables(tables: np.ndarray) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    t = np.asarray(tables, dtype=float)
    if t.ndim == 4 and t.shape[2:] == (4, 4):
        n_a, n_b = t.shape[:2]
        pairs = tuple((x, y) for x in range(n_a) for y in range(n_b))
        return t.reshape(-1, 4, 4), pairs
    raise ValueError(f"tables must have shape (nA, nB, 4, 4), got {t.shape}")


def _check_probabilities(p: np.ndarray) -> None:
    if not np.isfinite(p).all() or np.any(p < -1e-12):
        raise ValueError("probability tables must be finite and nonnegative")
    sums = p.sum(axis=(1, 2))
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ValueError(f"each probability table must sum to 1, got sums {sums}")


def _per_pair(n: float | Sequence[float], k: int) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(n, dtype=float), (k,)).copy()
    if np.any(arr < 0):
        raise ValueError("planned coincidences must be nonnegative")
    return arr


def simulate_counts(
    probs: np.ndarray,
    n_per_basis: float | Sequence[float],
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    pairs: Sequence[tuple[int, int]] | None = None,
) -> CountTable:
    """Independent Poisson counts with means ``n_per_basis * probs``.

    ``probs`` is either (nA, nB, 4, 4) or (K, 4, 4) together with ``pairs``.
    """
    p = np.asarray(probs, dtype=float)
    if pairs is None:
        p, pairs = _flatten_tables(p)
    _check_probabilities(p)
    n = _per_pair(n_per_basis, len(p))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.poisson(n[:, None, None] * np.clip(p, 0, None))
    return CountTable(counts, tuple(pairs), planned=n)


def expected_counts(
    probs: np.ndarray, n_per_basis: float | Sequence[float], pairs: Sequence[tuple[int, int]] | None = None
) -> CountTable:
    p = np.asarray(probs, dtype=float)
    if pairs is None:
        p, pairs = _flatten_tables(p)
    _check_probabilities(p)
    n = _per_pair(n_per_basis, len(p))
    return CountTable(n[:, None, None] * np.clip(p, 0, None), tuple(pairs), planned=n, expected=True)


# --- estimators -----------------------------------------------------------------


@dataclass(frozen=True)
class RatioEstimator:
    """Cell weights ``w`` and denominator masks ``m`` for each basis pair."""

    name: str
    pairs: tuple[tuple[int, int], ...]
    weights: np.ndarray
    masks: np.ndarray
    constant: float = 0.0

    def _aligned(self, counts: CountTable) -> np.ndarray:
        missing = [p for p in self.pairs if p not in counts.pairs]
        if missing:
            raise ValueError(f"count table lacks basis pairs {missing}")
        return np.array([counts.block(*p) for p in self.pairs], dtype=float)

    def ratios(self, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        den = (self.masks * n).sum(axis=(1, 2))
        num = (self.weights * n).sum(axis=(1, 2))
        return num, den

    def _check_denominators(self, den: np.ndarray) -> None:
        if np.any(den <= 0):
            bad = [self.pairs[k] for k in np.nonzero(den <= 0)[0]]
            raise ValueError(f"zero counts in the cells required for basis pairs {bad}")

    def value_of(self, n: np.ndarray) -> float:
        num, den = self.ratios(n)
        self._check_denominators(den)
        return float((num / den).sum() + self.constant)

    def value(self, counts: CountTable) -> float:
        return self.value_of(self._aligned(counts))

    def propagated_sigma(self, counts: CountTable) -> float:
        n = self._aligned(counts)
        num, den = self.ratios(n)
        self._check_denominators(den)
        r = num / den
        grad = (self.weights - self.masks * r[:, None, None]) / den[:, None, None]
        return float(np.sqrt((grad**2 * n).sum()))


def functional_estimator(f: BellFunctional, plan: MeasurementPlan) -> RatioEstimator:
    """Plug-in estimator of ``f`` from detector counts binarized as in ``plan``.

    Marginals are averaged over the partner's bases, as in the exact evaluation.
    """
    plan.check_matches(f)
    n_a, n_b = plan.shape
    ga, gb = grouping_matrix(plan.mode_a), grouping_matrix(plan.mode_b)
    keep_a, keep_b = ga.sum(axis=0), gb.sum(axis=0)
    pairs, weights, masks = [], [], []
    for x in range(n_a):
        for y in range(n_b):
            w = (
                f.joint[x, y] * np.outer(ga[0], gb[0])
                + f.marg_a[x] / n_b * np.outer(ga[0], keep_b)
                + f.marg_b[y] / n_a * np.outer(keep_a, gb[0])
            )
            pairs.append((x, y))
            weights.append(w)
            masks.append(np.outer(keep_a, keep_b))
    return RatioEstimator(f.name, tuple(pairs), np.array(weights), np.array(masks), f.constant)


def steering_estimator(obs: SteeringObservables | None = None) -> RatioEstimator:
    """S = (E_X + E_Z)/2 from the (X, X) and (Z, Z) count blocks, pairs (0, 0) and (1, 1)."""
    obs = default_observables() if obs is None else obs
    weights = [0.5 * np.outer(obs.sign_vector("trusted", y), obs.sign_vector("untrusted", y)) for y in range(2)]
    return RatioEstimator("steering", ((0, 0), (1, 1)), np.array(weights), np.ones((2, 4, 4)))


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    sigma: float
    method: str

    def __post_init__(self) -> None:
        if self.method not in ("propagation", "bootstrap"):
            raise ValueError(f"unknown method {self.method!r}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError("sigma must be finite and nonnegative")


def bootstrap_sigma(counts: CountTable, est: RatioEstimator, resamples: int = 200, seed: int = 0) -> float:
    """Spread of the estimator over parametric Poisson resamples of the observed counts."""
    if resamples < 2:
        raise ValueError("need at least 2 bootstrap resamples")
    n = est._aligned(counts)
    est.value_of(n)
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(resamples):
        try:
            values.append(est.value_of(rng.poisson(n).astype(float)))
        except ValueError:
            continue
    if len(values) < 2:
        raise ValueError("bootstrap resamples were all degenerate")
    return float(np.std(values, ddof=1))


def estimate_with_uncertainty(
    counts: CountTable,
    target: RatioEstimator,
    method: str = "propagation",
    resamples: int = 200,
    seed: int = 0,
) -> EstimateWithError:
    value = target.value(counts)
    if method == "propagation":
        sigma = target.propagated_sigma(counts)
    elif method == "bootstrap":
        sigma = bootstrap_sigma(counts, target, resamples, seed)
    else:
        raise ValueError(f"method must be 'propagation' or 'bootstrap', got {method!r}")
    return EstimateWithError(value, sigma, method)


# --- Monte Carlo ------------------------------------------------------------------


def even_split(n_total: float, n_pairs: int) -> np.ndarray:
    return np.full(n_pairs, n_total / n_pairs)


@dataclass
class MonteCarloResult:
    values: np.ndarray
    sigmas: np.ndarray
    n_per_basis: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def std(self) -> float:
        return float(self.values.std(ddof=1))

    @property
    def mean_sigma(self) -> float:
        return float(self.sigmas.mean())


def monte_carlo(
    probs: np.ndarray,
    target: RatioEstimator,
    n_total: float,
    reps: int,
    seed: int = 0,
    n_per_basis: Sequence[float] | None = None,
    pairs: Sequence[tuple[int, int]] | None = None,
) -> MonteCarloResult:
    """Repeat count simulation + estimation; repetition r uses the r-th spawned seed.

    Totals default to ``n_total`` split evenly over the basis pairs.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    p = np.asarray(probs, dtype=float)
    if pairs is None:
        p, pairs = _flatten_tables(p)
    per = even_split(n_total, len(p)) if n_per_basis is None else _per_pair(n_per_basis, len(p))
    values, sigmas = [], []
    for child in np.random.SeedSequence(seed).spawn(reps):
        counts = simulate_counts(p, per, child, pairs)
        values.append(target.value(counts))
        sigmas.append(target.propagated_sigma(counts))
    return MonteCarloResult(np.array(values), np.array(sigmas), per, seed)


def plan_pairs(plan: MeasurementPlan) -> tuple[tuple[int, int], ...]:
    n_a, n_b = plan.shape
    return tuple((x, y) for x in range(n_a) for y in range(n_b))

