"""Architecture search: prune connections while the error guard holds, then
insert a neuron at the head and retrain, alternating until a stop condition.

One prune step removes one of the k smallest-magnitude edges. Each of the k
resulting candidates is simplified (single-input neurons are replaced by
their best affine approximation over the observed input interval; neurons
feeding nothing are dropped), trained for one budget unit, and the lowest
error candidate is retrained with three units. A step is accepted while its
error stays within (1 + epsilon) of the error at the start of the current
removal loop.

Inserting a neuron wires it from every input to every existing neuron with
zero weights, which leaves the network function unchanged; tiny seeded noise
on its incoming weights only (outgoing stay zero) lets gradients reach the
otherwise saddle-locked new parameters.

All randomness is derived per task from the run seed, so results do not
depend on scheduling or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson

from .activations import ActivationKind, activation_eval
from .network import DagNetwork, Neuron, batch_values
from .training import TrainConfig, TrainingMatrix, derive_seed, loss, train

_U64 = (1 << 64) - 1

# seed-derivation tags; (tag, a, b) identifies every stochastic task of a run
_TAG_INIT = 0
_TAG_CANDIDATE = 1
_TAG_WINNER = 2
_TAG_ADD_NOISE = 3
_TAG_ADD_TRAIN = 4

EVENT_INITIAL = "initial"
EVENT_PRUNE_ACCEPTED = "prune_accepted"
EVENT_PRUNE_REJECTED = "prune_rejected"
EVENT_LINEARIZED = "linearized"
EVENT_NEURON_ADDED = "neuron_added"
EVENT_SWEPT = "swept"


@dataclass
class SearchConfig:
    train_cfg: TrainConfig
    epsilon: float = 0.006
    candidates_k: int = 3
    budget_ratios: tuple[int, int, int] = (1, 3, 5)  # candidate, winner, after add
    complexity_limit: int | None = None
    max_neurons_added: int = 0
    target_error: float | None = None
    init_noise_sigma: float = 1e-4
    quadrature_nodes: int = 257
    jobs: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.candidates_k < 1:
            raise ValueError("candidates_k must be >= 1")
        if len(self.budget_ratios) != 3 or min(self.budget_ratios) < 1:
            raise ValueError("budget_ratios must be three positive integers")
        if self.init_noise_sigma < 0:
            raise ValueError("init_noise_sigma must be >= 0")
        if self.quadrature_nodes < 3 or self.quadrature_nodes % 2 == 0:
            raise ValueError("quadrature_nodes must be an odd integer >= 3")
        if self.max_neurons_added < 0:
            raise ValueError("max_neurons_added must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class TrajectoryPoint:
    step: int
    event: str
    complexity: int
    error: float


@dataclass
class AcceptedState:
    """A network state the search actually held (not a discarded candidate)."""

    complexity: int
    error: float
    network: DagNetwork
    event: str


@dataclass
class GrowResult:
    best_network: DagNetwork
    trajectory: list[TrajectoryPoint]
    pareto: list[tuple[int, float, int]]  # (complexity, error, snapshot id)
    accepted: list[AcceptedState] = field(default_factory=list)


def trajectory_to_csv(points: list[TrajectoryPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("step,event,complexity,error\n")
        for p in points:
            fh.write(f"{p.step},{p.event},{p.complexity},{p.error!r}\n")


# ---------------------------------------------------------------------------
# edge selection


def least_weight_edges(net: DagNetwork, k: int) -> list[tuple[int, int]]:
    """The min(k, edge count) edges with smallest |weight|, as (target, source).

    Ties break by target id then source id, ascending. Biases are not
    connections and are never candidates.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted((abs(w), t, s) for t, s, w in net.edges())
    if not ranked:
        raise ValueError("network has no edges")
    return [(t, s) for _, t, s in ranked[:k]]


# ---------------------------------------------------------------------------
# affine replacement of a single-input neuron


def _affine_fit(
    kind: ActivationKind, w0: float, w1: float, t0: float, t1: float, nodes: int
) -> tuple[float, float]:
    """Best v0 + v1*t approximation of g(w0 + w1*t) on [t0, t1].

    Minimizes the integral of the squared deviation; interval means are
    taken with composite Simpson quadrature on ``nodes`` points. A
    degenerate interval pins the constant value at t0.
    """
    if t0 == t1:
        return float(activation_eval(kind, w0 + w1 * t0)), 0.0
    t = np.linspace(t0, t1, nodes)
    f = activation_eval(kind, w0 + w1 * t)
    span = t1 - t0
    m_t = simpson(t, x=t) / span
    m_tt = simpson(t * t, x=t) / span
    m_f = simpson(f, x=t) / span
    m_tf = simpson(t * f, x=t) / span
    denom = m_tt - m_t * m_t
    if denom <= 0.0:  # interval too narrow for the normal equations
        return float(m_f), 0.0
    v1 = (m_tf - m_t * m_f) / denom
    return float(m_f - v1 * m_t), float(v1)


class _Editor:
    """Mutable, id-stable editing view used during candidate construction.

    Keeps original ids while edges and neurons disappear, then compacts to
    a dense network at the end. Records a (event, complexity) stage after
    every structural change so the trajectory can show intermediate drops.
    """

    def __init__(self, net: DagNetwork):
        self.n_inputs = net.input_count
        self.default_activation = net.default_activation
        self.order = [n.id for n in net.neurons]
        self.alive = set(self.order)
        self.bias = {n.id: n.bias for n in net.neurons}
        self.act = {n.id: n.activation for n in net.neurons}
        self.w = {n.id: dict(n.incoming) for n in net.neurons}
        self.consumers: dict[int, set[int]] = {i: set() for i in range(self.n_inputs)}
        for nid in self.order:
            self.consumers[nid] = set()
        for nid in self.order:
            for s in self.w[nid]:
                self.consumers[s].add(nid)
        self.output = self.order[-1]
        self.complexity = net.complexity()
        self.stages: list[tuple[str, int]] = []

    def remove_edge(self, target: int, source: int) -> set[int]:
        if target not in self.alive or source not in self.w[target]:
            raise ValueError(f"no edge {source}->{target}")
        del self.w[target][source]
        self.consumers[source].discard(target)
        self.complexity -= 1
        pending = {target}
        if source >= self.n_inputs:
            pending.add(source)
        return pending

    def values(self, x: np.ndarray) -> np.ndarray:
        """Forward pass over the current (mid-edit) graph; rows per id."""
        vals = np.empty((self.n_inputs + len(self.order), x.shape[0]))
        for i in range(self.n_inputs):
            vals[i] = x[:, i]
        for nid in self.order:
            if nid not in self.alive:
                continue
            acc = np.full(x.shape[0], self.bias[nid])
            for s, wv in self.w[nid].items():
                acc += wv * vals[s]
            vals[nid] = activation_eval(self.act[nid], acc)
        return vals

    def _delete(self, nid: int) -> None:
        for s in self.w[nid]:
            self.consumers[s].discard(nid)
        del self.w[nid], self.bias[nid], self.act[nid]
        del self.consumers[nid]
        self.alive.discard(nid)

    def fold_affine(self, nid: int, source: int | None, v0: float, v1: float) -> None:
        """Replace neuron ``nid`` by v0 + v1 * value(source) inside consumers."""
        removed = 1 + len(self.w[nid]) + len(self.consumers[nid])
        created = 0
        for c in sorted(self.consumers[nid]):
            u = self.w[c].pop(nid)
            self.bias[c] += u * v0
            if source is not None:
                if source in self.w[c]:
                    self.w[c][source] += u * v1
                else:
                    self.w[c][source] = u * v1
                    self.consumers[source].add(c)
                    created += 1
        self.consumers[nid] = set()
        self._delete(nid)
        self.complexity += created - removed

    def simplify(self, x: np.ndarray, quadrature_nodes: int, pending: set[int]) -> None:
        """Fold or drop affected neurons to a fixpoint (deterministic order)."""
        while pending:
            nid = min(pending)
            pending.discard(nid)
            if nid not in self.alive or nid == self.output:
                continue
            if not self.consumers[nid]:
                # feeds nothing: drop it and re-examine its sources
                self.complexity -= 1 + len(self.w[nid])
                for s in self.w[nid]:
                    if s >= self.n_inputs:
                        pending.add(s)
                self._delete(nid)
                self.stages.append((EVENT_SWEPT, self.complexity))
            elif len(self.w[nid]) == 1:
                ((s, w1),) = self.w[nid].items()
                vals = self.values(x)
                t0 = float(vals[s].min())
                t1 = float(vals[s].max())
                v0, v1 = _affine_fit(
                    self.act[nid], self.bias[nid], w1, t0, t1, quadrature_nodes
                )
                touched = set(self.consumers[nid])
                self.fold_affine(nid, s, v0, v1)
                pending |= touched
                self.stages.append((EVENT_LINEARIZED, self.complexity))
            elif not self.w[nid]:
                # constant neuron: fold its fixed output into consumer biases
                v0 = float(activation_eval(self.act[nid], self.bias[nid]))
                touched = set(self.consumers[nid])
                self.fold_affine(nid, None, v0, 0.0)
                pending |= touched
                self.stages.append((EVENT_LINEARIZED, self.complexity))

    def finish(self) -> DagNetwork:
        kept = [nid for nid in self.order if nid in self.alive]
        remap = {i: i for i in range(self.n_inputs)}
        for pos, nid in enumerate(kept):
            remap[nid] = self.n_inputs + pos
        neurons = [
            Neuron(
                remap[nid],
                self.bias[nid],
                [(remap[s], wv) for s, wv in self.w[nid].items()],
                self.act[nid],
            )
            for nid in kept
        ]
        net = DagNetwork(self.n_inputs, neurons, self.default_activation)
        net.validate()
        return net

    def compressed_stages(self) -> list[tuple[str, int]]:
        out: list[tuple[str, int]] = []
        for kind, c in self.stages:
            if out and out[-1][0] == kind:
                out[-1] = (kind, c)
            else:
                out.append((kind, c))
        return out


def linearize_single_input_neuron(
    net: DagNetwork, neuron_id: int, data: TrainingMatrix, quadrature_nodes: int = 257
) -> DagNetwork:
    """Delete a one-input neuron, folding its best affine stand-in into
    every consumer's weights and bias.

    The fit interval is the range the source value takes over the training
    matrix. Raises if the neuron does not have exactly one incoming edge or
    is the output.
    """
    ed = _Editor(net)
    if neuron_id not in ed.alive:
        raise ValueError(f"no neuron with id {neuron_id}")
    if neuron_id == ed.output:
        raise ValueError("cannot linearize the output neuron")
    if len(ed.w[neuron_id]) != 1:
        raise ValueError(
            f"neuron {neuron_id} has indegree {len(ed.w[neuron_id])}, expected 1"
        )
    ((s, w1),) = ed.w[neuron_id].items()
    vals = ed.values(data.x)
    t0 = float(vals[s].min())
    t1 = float(vals[s].max())
    v0, v1 = _affine_fit(ed.act[neuron_id], ed.bias[neuron_id], w1, t0, t1, quadrature_nodes)
    ed.fold_affine(neuron_id, s, v0, v1)
    return ed.finish()


# ---------------------------------------------------------------------------
# prune step


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _prune_step_staged(
    net: DagNetwork, data: TrainingMatrix, cfg: SearchConfig, phase: int
) -> tuple[DagNetwork, float, list[tuple[str, int]]]:
    edges = least_weight_edges(net, cfg.candidates_k)
    root = cfg.train_cfg.seed

    def build_and_train(task):
        i, (target, source) = task
        ed = _Editor(net)
        pending = ed.remove_edge(target, source)
        ed.simplify(data.x, cfg.quadrature_nodes, pending)
        candidate = ed.finish()
        tcfg = replace(cfg.train_cfg, seed=derive_seed(root, _TAG_CANDIDATE, phase, i))
        trained, report = train(candidate, data, tcfg, cfg.budget_ratios[0])
        return trained, report.final_loss, ed.compressed_stages()

    results = _map_jobs(build_and_train, list(enumerate(edges)), cfg.jobs)

    def rank(i: int):
        err = results[i][1]
        return (err if math.isfinite(err) else math.inf, i)

    best = min(range(len(results)), key=rank)
    winner, _, stages = results[best]
    wcfg = replace(cfg.train_cfg, seed=derive_seed(root, _TAG_WINNER, phase, 0))
    winner, report = train(winner, data, wcfg, cfg.budget_ratios[1])
    return winner, report.final_loss, stages


def prune_step(
    net: DagNetwork, data: TrainingMatrix, cfg: SearchConfig, *, phase: int = 0
) -> tuple[DagNetwork, float]:
    """One guarded-removal round: try the k least-weight edges, train each
    candidate one budget unit, keep the best and retrain it three units."""
    winner, error, _ = _prune_step_staged(net, data, cfg, phase)
    return winner, error


# ---------------------------------------------------------------------------
# removal loop


def _log(log: list[TrajectoryPoint], event: str, complexity: int, error: float) -> None:
    log.append(TrajectoryPoint(len(log), event, complexity, error))


def _removal_loop(
    net: DagNetwork,
    data: TrainingMatrix,
    cfg: SearchConfig,
    log: list[TrajectoryPoint],
    phase: int,
    on_accept=None,
) -> tuple[DagNetwork, float, int]:
    s_ref = loss(net, data)
    guard = (1.0 + cfg.epsilon) * s_ref
    current, current_error = net, s_ref
    while current.edge_count() > 0:
        winner, winner_error, stages = _prune_step_staged(current, data, cfg, phase)
        phase += 1
        if winner_error <= guard:
            _log(log, EVENT_PRUNE_ACCEPTED, current.complexity() - 1, winner_error)
            for kind, c in stages:
                _log(log, kind, c, winner_error)
            current, current_error = winner, winner_error
            if on_accept is not None:
                on_accept(winner, winner_error)
        else:
            _log(log, EVENT_PRUNE_REJECTED, winner.complexity(), winner_error)
            break
    return current, current_error, phase


def removal_loop(
    net: DagNetwork,
    data: TrainingMatrix,
    cfg: SearchConfig,
    log: list[TrajectoryPoint] | None = None,
) -> tuple[DagNetwork, float]:
    """Prune until the first step whose error exceeds (1 + epsilon) times
    the error this loop started from, or until no edges remain.

    Returns the last accepted network and its error. Accepted and rejected
    steps are appended to ``log`` when given.
    """
    if log is None:
        log = []
    current, error, _ = _removal_loop(net, data, cfg, log, phase=0)
    return current, error


# ---------------------------------------------------------------------------
# neuron insertion


def add_neuron(
    net: DagNetwork, cfg: SearchConfig, rng: np.random.Generator | None = None
) -> DagNetwork:
    """Insert a neuron before all others, wired from every input and into
    every existing neuron with zero weights.

    With zero weights the network output is unchanged. Seeded uniform noise
    of magnitude ``cfg.init_noise_sigma`` is then added to the new neuron's
    incoming weights only; its outgoing weights stay zero, so the output is
    still exactly unchanged.
    """
    n = net.input_count
    sigma = cfg.init_noise_sigma
    if sigma > 0:
        if rng is None:
            rng = np.random.default_rng(
                np.random.SeedSequence([cfg.train_cfg.seed & _U64, _TAG_ADD_NOISE])
            )
        incoming_w = rng.uniform(-sigma, sigma, n)
    else:
        incoming_w = np.zeros(n)
    new = Neuron(
        n, 0.0, [(i, float(incoming_w[i])) for i in range(n)], net.default_activation
    )
    neurons = [new]
    for old in net.neurons:
        shifted = [(s if s < n else s + 1, w) for s, w in old.incoming]
        shifted.append((n, 0.0))
        neurons.append(Neuron(old.id + 1, old.bias, shifted, old.activation))
    out = DagNetwork(n, neurons, net.default_activation)
    out.validate()
    return out


# ---------------------------------------------------------------------------
# outer growth loop


def _pareto(accepted: list[AcceptedState]) -> list[tuple[int, float, int]]:
    order = sorted(range(len(accepted)), key=lambda i: (accepted[i].complexity, accepted[i].error, i))
    out: list[tuple[int, float, int]] = []
    best = math.inf
    for i in order:
        st = accepted[i]
        if st.error < best:
            out.append((st.complexity, st.error, i))
            best = st.error
    return out


def grow(net: DagNetwork, data: TrainingMatrix, cfg: SearchConfig) -> GrowResult:
    """Run the full search from ``net``: train, prune to the guard, then
    repeatedly insert a neuron, retrain, and prune again.

    Stops after a removal loop once the running network meets
    ``target_error``, ``max_neurons_added`` insertions have been spent, or
    complexity is at/above ``complexity_limit``. Returns the trajectory,
    every state actually held, the non-dominated (complexity, error)
    frontier over those states, and the best network: the least complex
    state meeting ``target_error`` if one exists, otherwise the state with
    the smallest error.
    """
    log: list[TrajectoryPoint] = []
    accepted: list[AcceptedState] = []
    root = cfg.train_cfg.seed

    tcfg = replace(cfg.train_cfg, seed=derive_seed(root, _TAG_INIT, 0, 0))
    current, report = train(net, data, tcfg, cfg.budget_ratios[2])
    error = report.final_loss
    _log(log, EVENT_INITIAL, current.complexity(), error)
    accepted.append(AcceptedState(current.complexity(), error, current, EVENT_INITIAL))

    def on_accept(winner: DagNetwork, winner_error: float) -> None:
        accepted.append(
            AcceptedState(winner.complexity(), winner_error, winner, EVENT_PRUNE_ACCEPTED)
        )

    phase = 0
    adds = 0
    while True:
        current, error, phase = _removal_loop(current, data, cfg, log, phase, on_accept)
        if cfg.target_error is not None and error <= cfg.target_error:
            break
        if adds >= cfg.max_neurons_added:
            break
        if cfg.complexity_limit is not None and current.complexity() >= cfg.complexity_limit:
            break
        rng = np.random.default_rng(
            np.random.SeedSequence([root & _U64, _TAG_ADD_NOISE, adds])
        )
        grown = add_neuron(current, cfg, rng)
        tcfg = replace(cfg.train_cfg, seed=derive_seed(root, _TAG_ADD_TRAIN, adds, 0))
        current, report = train(grown, data, tcfg, cfg.budget_ratios[2])
        error = report.final_loss
        adds += 1
        _log(log, EVENT_NEURON_ADDED, current.complexity(), error)
        accepted.append(
            AcceptedState(current.complexity(), error, current, EVENT_NEURON_ADDED)
        )

    pareto = _pareto(accepted)
    if cfg.target_error is not None:
        hits = [i for i, st in enumerate(accepted) if st.error <= cfg.target_error]
    else:
        hits = []
    if hits:
        best_i = min(hits, key=lambda i: (accepted[i].complexity, accepted[i].error, i))
    else:
        best_i = min(
            range(len(accepted)), key=lambda i: (accepted[i].error, accepted[i].complexity, i)
        )
    return GrowResult(
        best_network=accepted[best_i].network,
        trajectory=log,
        pareto=pareto,
        accepted=accepted,
    )
