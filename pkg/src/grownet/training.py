"""Loss, gradients, and budgeted training.

The loss everywhere in this package is the MEAN of squared residuals over
the dataset rows, which keeps errors comparable across dataset sizes.
Training budgets are counted in optimizer steps: a budget unit of
``budget_unit`` steps times a small integer multiplier, so runs are exactly
reproducible. The trainer tracks the best parameter vector seen (by
full-data loss) and returns the network restored to it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _engine
from .network import DagNetwork, Flat, apply_params, flatten

_U64 = (1 << 64) - 1


def derive_seed(root: int, *key: int) -> int:
    """Stable child seed for a task identified by ``key`` under ``root``."""
    entropy = [root & _U64] + [k & _U64 for k in key]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


@dataclass
class TrainingMatrix:
    """Supervised rows: targets ``y`` (rows,) and inputs ``x`` (rows, n)."""

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 1:
            raise ValueError("x must be 2-d and y 1-d")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x and y row counts differ")
        if self.x.shape[0] == 0:
            raise ValueError("training matrix has no rows")
        if self.x.shape[1] == 0:
            raise ValueError("training matrix has no input columns")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("training matrix contains non-finite values")

    @property
    def n_inputs(self) -> int:
        return self.x.shape[1]

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_rows(cls, rows) -> "TrainingMatrix":
        ys, xs = zip(*rows)
        return cls(np.asarray(ys, dtype=np.float64), np.asarray(xs, dtype=np.float64))

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("y," + ",".join(f"x{i}" for i in range(self.n_inputs)) + "\n")
            for r in range(self.n_rows):
                cells = [repr(float(self.y[r]))]
                cells += [repr(float(v)) for v in self.x[r]]
                fh.write(",".join(cells) + "\n")

    @classmethod
    def load_csv(cls, path) -> "TrainingMatrix":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty training file") from None
            header = [h.strip() for h in header]
            n = len(header) - 1
            if n < 1 or header[0] != "y" or header[1:] != [f"x{i}" for i in range(n)]:
                raise ValueError(f"{path}: bad header {header!r}")
            ys, xs = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != n + 1:
                    raise ValueError(f"{path}:{lineno}: expected {n + 1} columns")
                try:
                    vals = [float(v) for v in row]
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric cell") from None
                ys.append(vals[0])
                xs.append(vals[1:])
        if not ys:
            raise ValueError(f"{path}: no data rows")
        return cls(np.asarray(ys), np.asarray(xs))


@dataclass
class TrainConfig:
    optimizer: str = "adam"  # "adam" | "sgd_momentum"
    learning_rate: float = 1e-3
    batch_size: int | None = None  # None: full batch below 4096 rows, else 1024
    seed: int = 0
    budget_unit: int = 1000  # optimizer steps per budget unit

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd_momentum"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.budget_unit < 1:
            raise ValueError("budget_unit must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class TrainReport:
    final_loss: float
    steps_run: int
    best_loss_seen: float
    diverged: bool = False


def _check_arity(net: DagNetwork, data: TrainingMatrix) -> None:
    if data.n_inputs != net.input_count:
        raise ValueError(
            f"network expects {net.input_count} inputs, data has {data.n_inputs}"
        )


def loss(net: DagNetwork, data: TrainingMatrix) -> float:
    """Mean squared residual of the network over the rows."""
    _check_arity(net, data)
    flat = flatten(net)
    return float(_engine.mean_sq_loss(*flat.kernel_args(), flat.params, data.x, data.y))


def gradient(net: DagNetwork, data: TrainingMatrix) -> np.ndarray:
    """Partials of the loss, one per parameter in canonical order.

    Canonical order: neurons in topological order, each contributing its
    bias first and then its incoming-edge weights in stored order.
    """
    _check_arity(net, data)
    flat = flatten(net)
    _, grad = _engine.loss_and_gradient(
        *flat.kernel_args(), flat.params, data.x, data.y
    )
    return grad


def get_params(net: DagNetwork) -> np.ndarray:
    return flatten(net).params


class _Adam:
    def __init__(self, n: int, lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def update(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mh = self.m / (1 - self.b1**self.t)
        vh = self.v / (1 - self.b2**self.t)
        params -= self.lr * mh / (np.sqrt(vh) + self.eps)


class _Momentum:
    def __init__(self, n: int, lr: float, mu=0.9):
        self.lr, self.mu = lr, mu
        self.vel = np.zeros(n)

    def update(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.vel = self.mu * self.vel - self.lr * grad
        params += self.vel


def _make_optimizer(cfg: TrainConfig, n: int):
    if cfg.optimizer == "adam":
        return _Adam(n, cfg.learning_rate)
    return _Momentum(n, cfg.learning_rate)


def init_weights(net: DagNetwork, rng: np.random.Generator) -> DagNetwork:
    """Fresh start: biases 0, weights uniform in +-1/sqrt(fan_in)."""
    out = net.clone()
    for n in out.neurons:
        n.bias = 0.0
        if n.incoming:
            bound = 1.0 / math.sqrt(len(n.incoming))
            ws = rng.uniform(-bound, bound, len(n.incoming))
            n.incoming = [(s, float(w)) for (s, _), w in zip(n.incoming, ws)]
    return out


def train(
    net: DagNetwork,
    data: TrainingMatrix,
    cfg: TrainConfig,
    budget_multiplier: int = 1,
) -> tuple[DagNetwork, TrainReport]:
    """Run ``budget_multiplier * cfg.budget_unit`` optimizer steps.

    Optimizer state starts fresh. The input network is left untouched; the
    returned copy holds the best parameters seen, judged by full-data
    loss. A non-finite loss aborts the run early and the report is flagged
    as diverged.
    """
    _check_arity(net, data)
    if budget_multiplier < 1:
        raise ValueError("budget_multiplier must be >= 1")
    flat = flatten(net)
    args = flat.kernel_args()
    params = flat.params.copy()
    steps = budget_multiplier * cfg.budget_unit

    rows = data.n_rows
    batch = cfg.batch_size if cfg.batch_size is not None else (rows if rows < 4096 else 1024)
    batch = min(batch, rows)
    full_batch = batch == rows

    opt = _make_optimizer(cfg, len(params))
    best = params.copy()
    best_loss = math.inf
    diverged = False
    steps_run = 0

    if full_batch:
        for _ in range(steps):
            cur, grad = _engine.loss_and_gradient(*args, params, data.x, data.y)
            if not math.isfinite(cur):
                diverged = True
                break
            if cur < best_loss:
                best_loss = cur
                best[:] = params
            opt.update(params, grad)
            steps_run += 1
    else:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & _U64]))
        cur = float(_engine.mean_sq_loss(*args, params, data.x, data.y))
        if math.isfinite(cur):
            best_loss = cur
            best[:] = params
        perm = rng.permutation(rows)
        pos = 0
        for _ in range(steps):
            if pos + batch > rows:
                perm = rng.permutation(rows)
                pos = 0
            idx = perm[pos : pos + batch]
            pos += batch
            bx = np.ascontiguousarray(data.x[idx])
            by = np.ascontiguousarray(data.y[idx])
            _, grad = _engine.loss_and_gradient(*args, params, bx, by)
            opt.update(params, grad)
            steps_run += 1
            cur = float(_engine.mean_sq_loss(*args, params, data.x, data.y))
            if not math.isfinite(cur):
                diverged = True
                break
            if cur < best_loss:
                best_loss = cur
                best[:] = params

    if full_batch and not diverged:
        cur = float(_engine.mean_sq_loss(*args, params, data.x, data.y))
        if math.isfinite(cur) and cur < best_loss:
            best_loss = cur
            best[:] = params

    trained = apply_params(net, best)
    report = TrainReport(
        final_loss=best_loss,
        steps_run=steps_run,
        best_loss_seen=best_loss,
        diverged=diverged,
    )
    return trained, report
