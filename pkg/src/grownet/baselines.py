"""Comparison baselines: polynomial least squares, fixed-architecture
sweeps, and the lower (complexity, error) envelope used to compare them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .activations import ActivationKind
from .network import ArchSpec, standard_net
from .training import TrainConfig, TrainingMatrix, derive_seed, train

_U64 = (1 << 64) - 1
_TAG_SWEEP_INIT = 16
_TAG_SWEEP_TRAIN = 17


def error_original_units(mean_sq_error: float) -> float:
    """Back out the error scale before the /100 normalization: 100*sqrt(S)."""
    return 100.0 * math.sqrt(mean_sq_error)


# ---------------------------------------------------------------------------
# polynomial regression


def poly_feature_count(n_inputs: int, degree: int) -> int:
    """Number of monomials of total degree <= degree in n_inputs variables."""
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    return math.comb(n_inputs + degree, degree)


def monomial_exponents(n_inputs: int, degree: int) -> np.ndarray:
    """Exponent rows for all monomials of total degree <= degree, graded
    lexicographic: all degree-0 terms, then degree-1, and so on."""
    rows = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_inputs), total):
            e = [0] * n_inputs
            for var in combo:
                e[var] += 1
            rows.append(e)
    return np.asarray(rows, dtype=np.int64)


@dataclass
class PolyModel:
    n_inputs: int
    degree: int
    exponents: np.ndarray     # (terms, n_inputs)
    coefficients: np.ndarray  # (terms,)
    rank_deficient: bool = False

    def design_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        cols = np.empty((x.shape[0], len(self.exponents)))
        for j, exp in enumerate(self.exponents):
            col = np.ones(x.shape[0])
            for var, p in enumerate(exp):
                if p:
                    col = col * x[:, var] ** p
            cols[:, j] = col
        return cols

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.design_matrix(x) @ self.coefficients

    def complexity(self) -> int:
        return len(self.coefficients)


def poly_fit(data: TrainingMatrix, degree: int) -> tuple[PolyModel, float]:
    """Least-squares fit of all monomials up to ``degree``.

    Solved by SVD (minimum-norm when rank deficient, which the returned
    model flags). The error is the mean squared residual.
    """
    n = data.n_inputs
    count = poly_feature_count(n, degree)
    if data.n_rows < count:
        raise ValueError(
            f"need at least {count} rows for degree {degree} in {n} inputs, "
            f"got {data.n_rows}"
        )
    model = PolyModel(n, degree, monomial_exponents(n, degree), np.zeros(count))
    a = model.design_matrix(data.x)
    coef, _, rank, _ = np.linalg.lstsq(a, data.y, rcond=None)
    model.coefficients = coef
    model.rank_deficient = rank < count
    residual = a @ coef - data.y
    return model, float(np.mean(residual * residual))


# ---------------------------------------------------------------------------
# standard-architecture sweep


@dataclass
class SweepResult:
    spec: ArchSpec
    complexity: int
    error: float


def sweep_standard(
    data: TrainingMatrix,
    specs: list[ArchSpec],
    repeats: int,
    cfg: TrainConfig,
    budget_multiplier: int = 5,
    jobs: int = 1,
    activation: ActivationKind = ActivationKind.SOFTSQUARE,
) -> list[SweepResult]:
    """Train each architecture ``repeats`` times from fresh seeded
    initializations and keep the best error per architecture."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    tasks = [(si, r) for si in range(len(specs)) for r in range(repeats)]

    def run(task):
        si, r = task
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed & _U64, _TAG_SWEEP_INIT, si, r])
        )
        net = standard_net(specs[si], default_activation=activation, rng=rng)
        tcfg = replace(cfg, seed=derive_seed(cfg.seed, _TAG_SWEEP_TRAIN, si, r))
        _, report = train(net, data, tcfg, budget_multiplier)
        return report.final_loss

    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(run, tasks))
    else:
        errors = [run(t) for t in tasks]

    results = []
    for si, spec in enumerate(specs):
        best = min(errors[si * repeats : (si + 1) * repeats])
        results.append(SweepResult(spec, standard_net(spec).complexity(), best))
    return results


# ---------------------------------------------------------------------------
# lower envelope


@dataclass
class EnvelopeCurve:
    """Non-dominated (complexity, error) points, complexity ascending."""

    points: list[tuple[float, float]]


def envelope(points) -> EnvelopeCurve:
    """Non-dominated subset: keep a point only if nothing has both lower or
    equal complexity and lower or equal error (one strictly)."""
    pts = sorted(set((float(c), float(e)) for c, e in points))
    if not pts:
        raise ValueError("envelope needs at least one point")
    kept: list[tuple[float, float]] = []
    best = math.inf
    for c, e in pts:
        if e < best:
            kept.append((c, e))
            best = e
    return EnvelopeCurve(kept)


def envelope_best_complexity(curve: EnvelopeCurve, target_error: float) -> float:
    """Complexity where the piecewise-linear envelope first reaches
    ``target_error``.

    Above every observed error this clamps to the smallest complexity;
    below every observed error the target is unreachable and the result is
    +inf.
    """
    pts = curve.points
    if not pts:
        raise ValueError("empty envelope")
    if target_error >= pts[0][1]:
        return pts[0][0]
    if target_error < pts[-1][1]:
        return math.inf
    for (c0, e0), (c1, e1) in zip(pts, pts[1:]):
        if e1 <= target_error <= e0:
            if target_error == e1:
                return c1
            return c0 + (c1 - c0) * (e0 - target_error) / (e0 - e1)
    return math.inf  # unreachable; loop always brackets
