"""DAG feedforward network model.

A network is an ordered list of neurons over a fixed input vector. Ids
0..input_count-1 name the inputs; computing neurons continue from
input_count, in topological order, and every incoming edge points to an
input or an earlier neuron. The last neuron is the output. A network's
complexity is its learnable-parameter count: one bias per neuron plus one
weight per edge.

Structural operations (remove_edge, dead_neuron_sweep, add at the head)
return new networks; the trainer mutates weights only on its own copy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .activations import ActivationKind


@dataclass
class Neuron:
    id: int
    bias: float
    incoming: list[tuple[int, float]]  # (source id, weight)
    activation: ActivationKind

    def clone(self) -> "Neuron":
        return Neuron(self.id, self.bias, list(self.incoming), self.activation)


@dataclass
class DagNetwork:
    input_count: int
    neurons: list[Neuron]
    default_activation: ActivationKind = ActivationKind.SOFTSQUARE

    @property
    def output_id(self) -> int:
        return self.neurons[-1].id

    def clone(self) -> "DagNetwork":
        return DagNetwork(
            self.input_count,
            [n.clone() for n in self.neurons],
            self.default_activation,
        )

    def neuron(self, neuron_id: int) -> Neuron:
        idx = neuron_id - self.input_count
        if not 0 <= idx < len(self.neurons):
            raise KeyError(f"no neuron with id {neuron_id}")
        return self.neurons[idx]

    def edges(self):
        """Yield (target id, source id, weight) over all edges."""
        for n in self.neurons:
            for src, w in n.incoming:
                yield n.id, src, w

    def edge_count(self) -> int:
        return sum(len(n.incoming) for n in self.neurons)

    def complexity(self) -> int:
        return sum(1 + len(n.incoming) for n in self.neurons)

    def validate(self) -> None:
        """Check the structural invariants; raise ValueError on violation."""
        if self.input_count < 1:
            raise ValueError("input_count must be positive")
        if not self.neurons:
            raise ValueError("network needs at least one neuron")
        for pos, n in enumerate(self.neurons):
            expect = self.input_count + pos
            if n.id != expect:
                raise ValueError(f"neuron at position {pos} has id {n.id}, expected {expect}")
            seen = set()
            for src, w in n.incoming:
                if src in seen:
                    raise ValueError(f"neuron {n.id} has duplicate source {src}")
                seen.add(src)
                if not 0 <= src < n.id:
                    raise ValueError(f"neuron {n.id} has non-causal source {src}")
                if not math.isfinite(w):
                    raise ValueError(f"non-finite weight on edge {src}->{n.id}")
            if not math.isfinite(n.bias):
                raise ValueError(f"non-finite bias on neuron {n.id}")

    def forward(self, x) -> tuple[float, np.ndarray]:
        """Evaluate on one input vector.

        Returns (output value, per-id values) where the values array is
        indexed by id: inputs first, then every neuron's activation.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_count,):
            raise ValueError(f"expected {self.input_count} inputs, got shape {x.shape}")
        vals = batch_values(self, x[None, :])
        return float(vals[-1, 0]), vals[:, 0].copy()


# ---------------------------------------------------------------------------
# flattened view used by the compiled kernels


@dataclass
class Flat:
    n_inputs: int
    act: np.ndarray      # int64 (n_neurons,)
    src: np.ndarray      # int64 (total edges,)
    src_off: np.ndarray  # int64 (n_neurons + 1,)
    par_off: np.ndarray  # int64 (n_neurons + 1,)
    params: np.ndarray   # float64, bias then weights per neuron

    def kernel_args(self):
        return self.n_inputs, self.act, self.src, self.src_off, self.par_off


def flatten(net: DagNetwork) -> Flat:
    n = len(net.neurons)
    act = np.empty(n, dtype=np.int64)
    src_off = np.zeros(n + 1, dtype=np.int64)
    par_off = np.zeros(n + 1, dtype=np.int64)
    srcs: list[int] = []
    params: list[float] = []
    for j, neuron in enumerate(net.neurons):
        act[j] = int(neuron.activation)
        params.append(neuron.bias)
        for s, w in neuron.incoming:
            srcs.append(s)
            params.append(w)
        src_off[j + 1] = len(srcs)
        par_off[j + 1] = len(params)
    return Flat(
        net.input_count,
        act,
        np.asarray(srcs, dtype=np.int64),
        src_off,
        par_off,
        np.asarray(params, dtype=np.float64),
    )


def apply_params(net: DagNetwork, params: np.ndarray) -> DagNetwork:
    """Return a copy of ``net`` with the flat parameter vector written back."""
    out = net.clone()
    pos = 0
    for neuron in out.neurons:
        neuron.bias = float(params[pos])
        pos += 1
        neuron.incoming = [
            (src, float(params[pos + i])) for i, (src, _) in enumerate(neuron.incoming)
        ]
        pos += len(neuron.incoming)
    if pos != len(params):
        raise ValueError("parameter vector length mismatch")
    return out


def batch_values(net: DagNetwork, x: np.ndarray) -> np.ndarray:
    """All per-id values over a batch; shape (ids, rows)."""
    flat = flatten(net)
    x = np.ascontiguousarray(x, dtype=np.float64)
    vals, _ = _engine.forward_batch(*flat.kernel_args(), flat.params, x)
    return vals


def batch_outputs(net: DagNetwork, x: np.ndarray) -> np.ndarray:
    return batch_values(net, x)[-1]


# ---------------------------------------------------------------------------
# structural edits


def remove_edge(net: DagNetwork, target: int, source: int) -> DagNetwork:
    """Copy of the network without the edge source->target."""
    out = net.clone()
    neuron = out.neuron(target)
    kept = [(s, w) for s, w in neuron.incoming if s != source]
    if len(kept) == len(neuron.incoming):
        raise ValueError(f"no edge {source}->{target}")
    neuron.incoming = kept
    return out


def dead_neuron_sweep(net: DagNetwork) -> DagNetwork:
    """Drop computing neurons (except the output) that feed nothing.

    Repeats until no such neuron remains, then renumbers ids densely.
    The network function is unchanged.
    """
    neurons = [n.clone() for n in net.neurons]
    out_id = neurons[-1].id
    while True:
        consumed = {src for n in neurons for src, _ in n.incoming}
        dead = [n.id for n in neurons if n.id != out_id and n.id not in consumed]
        if not dead:
            break
        gone = set(dead)
        neurons = [n for n in neurons if n.id not in gone]
    # renumber densely, preserving order
    remap = {net_input: net_input for net_input in range(net.input_count)}
    for pos, n in enumerate(neurons):
        remap[n.id] = net.input_count + pos
    for n in neurons:
        n.id = remap[n.id]
        n.incoming = [(remap[s], w) for s, w in n.incoming]
    return DagNetwork(net.input_count, neurons, net.default_activation)


# ---------------------------------------------------------------------------
# standard architectures


@dataclass(frozen=True)
class ThreeLayer:
    """Fully connected n -> n1 -> n2 -> 1 topology."""

    n_inputs: int
    n1: int
    n2: int

    def __str__(self) -> str:
        return f"three-layer:{self.n_inputs},{self.n1},{self.n2}"


@dataclass(frozen=True)
class MaxFullyConnected:
    """Every neuron wired to all inputs and all earlier neurons."""

    n_inputs: int
    n_neurons: int

    def __str__(self) -> str:
        return f"max-full:{self.n_inputs},{self.n_neurons}"


ArchSpec = ThreeLayer | MaxFullyConnected


def parse_arch(text: str) -> ArchSpec:
    kind, _, rest = text.partition(":")
    try:
        nums = [int(v) for v in rest.split(",")]
    except ValueError:
        raise ValueError(f"bad architecture spec {text!r}") from None
    if kind == "three-layer" and len(nums) == 3:
        return ThreeLayer(*nums)
    if kind == "max-full" and len(nums) == 2:
        return MaxFullyConnected(*nums)
    raise ValueError(f"bad architecture spec {text!r}")


def standard_net(
    spec: ArchSpec | str,
    default_activation: ActivationKind = ActivationKind.SOFTSQUARE,
    rng: np.random.Generator | None = None,
) -> DagNetwork:
    """Build a standard architecture.

    Hidden neurons use ``default_activation``; the output neuron is
    identity (regression head). Weights are drawn uniformly from
    [-1/sqrt(fan_in), 1/sqrt(fan_in)] per neuron, biases start at 0; with
    ``rng=None`` all weights start at 0.
    """
    if isinstance(spec, str):
        spec = parse_arch(spec)
    if isinstance(spec, ThreeLayer):
        if min(spec.n_inputs, spec.n1, spec.n2) < 1:
            raise ValueError("layer sizes must be positive")
        n = spec.n_inputs
        sources: list[list[int]] = []
        first = list(range(n))
        second = [n + i for i in range(spec.n1)]
        third = [n + spec.n1 + i for i in range(spec.n2)]
        sources += [first] * spec.n1
        sources += [second] * spec.n2
        sources += [third]
    else:
        if min(spec.n_inputs, spec.n_neurons) < 1:
            raise ValueError("sizes must be positive")
        n = spec.n_inputs
        sources = [list(range(n + i)) for i in range(spec.n_neurons)]

    neurons = []
    for i, srcs in enumerate(sources):
        last = i == len(sources) - 1
        act = ActivationKind.IDENTITY if last else default_activation
        if rng is None:
            weights = np.zeros(len(srcs))
        else:
            bound = 1.0 / math.sqrt(len(srcs))
            weights = rng.uniform(-bound, bound, len(srcs))
        neurons.append(
            Neuron(n + i, 0.0, [(s, float(w)) for s, w in zip(srcs, weights)], act)
        )
    net = DagNetwork(n, neurons, default_activation)
    net.validate()
    return net


# ---------------------------------------------------------------------------
# serialization


def to_json_dict(net: DagNetwork) -> dict:
    return {
        "input_count": net.input_count,
        "default_activation": net.default_activation.name.lower(),
        "neurons": [
            {
                "id": n.id,
                "bias": n.bias,
                "activation": n.activation.name.lower(),
                "incoming": [{"src": s, "weight": w} for s, w in n.incoming],
            }
            for n in net.neurons
        ],
    }


def from_json_dict(doc: dict) -> DagNetwork:
    try:
        neurons = [
            Neuron(
                int(nd["id"]),
                float(nd["bias"]),
                [(int(e["src"]), float(e["weight"])) for e in nd["incoming"]],
                ActivationKind.from_name(nd["activation"]),
            )
            for nd in doc["neurons"]
        ]
        net = DagNetwork(
            int(doc["input_count"]),
            neurons,
            ActivationKind.from_name(doc["default_activation"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed network document: {exc}") from None
    net.validate()
    return net


def save_network(net: DagNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(net), fh, indent=1)
        fh.write("\n")


def load_network(path) -> DagNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# DOT export


def to_dot(net: DagNetwork, hide_inputs: bool = False, precision: int = 3) -> str:
    """Render the topology as a DOT digraph.

    Inputs appear as boxes unless ``hide_inputs`` is set, in which case
    both the input nodes and their outgoing edges are omitted. Edge labels
    are weights rounded to ``precision`` digits.
    """
    lines = ["digraph network {", "  rankdir=LR;"]
    if not hide_inputs:
        for i in range(net.input_count):
            lines.append(f'  i{i} [label="x{i}", shape=box];')
    out_id = net.output_id
    for n in net.neurons:
        shape = ", shape=doublecircle" if n.id == out_id else ""
        lines.append(f'  n{n.id} [label="{n.id}"{shape}];')
    for tgt, src, w in net.edges():
        if src < net.input_count:
            if hide_inputs:
                continue
            head = f"i{src}"
        else:
            head = f"n{src}"
        lines.append(f'  {head} -> n{tgt} [label="{w:.{precision}g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
