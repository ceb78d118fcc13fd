"""Finite dynamical Bayesian networks with constant-width time slices.

Nodes are ``NodeId(time, site)``.  Every node outside slice 0 carries a
conditional probability table over parents in the previous slice, and
slice 0 carries a joint initial distribution.  Distributions over joint
slice states are sparse dicts ``{state tuple: probability}``.

Network documents are JSON::

    {
      "format": "stpatterns-dbn", "version": 1,
      "horizon": 3, "slice_width": 2, "state_space_size": 2,
      "initial_distribution": [[[0, 0], 0.25], [[0, 1], 0.75]],
      "mechanisms": [
        {"node": [1, 0], "parents": [[0, 0], [0, 1]],
         "table": [[[0, 0], [0.9, 0.1]], [[0, 1], [0.5, 0.5]], ...]},
        ...
      ]
    }

``table`` lists one row per parent-value tuple (every tuple must appear),
giving the probability of each of the node's states.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple

from .errors import ContractViolation
from .pattern import SpatioTemporalPattern

ROW_TOL = 1e-12
DIST_TOL = 1e-9
FORMAT = "stpatterns-dbn"


class NodeId(NamedTuple):
    time: int
    site: int


State = tuple[int, ...]
Distribution = dict[State, float]


@dataclass(frozen=True)
class Mechanism:
    parents: tuple[NodeId, ...]
    table: Mapping[State, tuple[float, ...]]

    def row(self, parent_values: State) -> tuple[float, ...]:
        return self.table[parent_values]


@dataclass(frozen=True)
class DynBayesNet:
    horizon: int
    slice_width: int
    state_space_size: int
    mechanisms: Mapping[NodeId, Mechanism]
    initial_distribution: Mapping[State, float]

    def __post_init__(self):
        object.__setattr__(self, "mechanisms", {NodeId(*k): v for k, v in self.mechanisms.items()})
        self._validate()

    def _validate(self) -> None:
        if self.horizon < 1 or self.slice_width < 1 or self.state_space_size < 1:
            raise ContractViolation("horizon, slice_width and state_space_size must be positive")
        nx, w = self.state_space_size, self.slice_width
        expected = {NodeId(t, s) for t in range(1, self.horizon) for s in range(w)}
        if set(self.mechanisms) != expected:
            raise ContractViolation("mechanisms must be given for exactly the nodes outside slice 0")

        for t in range(1, self.horizon):
            used = set()
            for s in range(w):
                node = NodeId(t, s)
                mech = self.mechanisms[node]
                if len(set(mech.parents)) != len(mech.parents):
                    raise ContractViolation(f"{node}: duplicate parents")
                for p in mech.parents:
                    if p.time != t - 1 or not 0 <= p.site < w:
                        raise ContractViolation(f"{node}: parent {p} is not in slice {t - 1}")
                    used.add(p.site)
                keys = set(itertools.product(range(nx), repeat=len(mech.parents)))
                if set(mech.table) != keys:
                    raise ContractViolation(f"{node}: table must have one row per parent-value tuple")
                for key, row in mech.table.items():
                    if len(row) != nx or any(not 0.0 <= p <= 1.0 for p in row):
                        raise ContractViolation(f"{node}: invalid row {key} -> {row}")
                    if abs(math.fsum(row) - 1.0) > ROW_TOL:
                        raise ContractViolation(f"{node}: row {key} sums to {math.fsum(row)}")
            if used != set(range(w)):
                # only the case where every slice-t node has a child is supported
                raise ContractViolation(f"parents of slice {t} do not cover slice {t - 1}")

        for state, p in self.initial_distribution.items():
            if len(state) != w or any(not 0 <= v < nx for v in state) or not 0.0 <= p <= 1.0:
                raise ContractViolation(f"invalid initial distribution entry {state} -> {p}")
        if abs(math.fsum(self.initial_distribution.values()) - 1.0) > DIST_TOL:
            raise ContractViolation("initial distribution does not sum to 1")

    @property
    def nodes(self) -> list[NodeId]:
        return [NodeId(t, s) for t in range(self.horizon) for s in range(self.slice_width)]

    def pattern_probability(self, pattern: SpatioTemporalPattern) -> float:
        return pattern_probability(self, pattern)


def joint_probability(net: DynBayesNet, assignment: Mapping[tuple[int, int], int]) -> float:
    """Product of the initial probability and every node's mechanism."""
    values = {NodeId(*k): v for k, v in assignment.items()}
    if set(values) != set(net.nodes):
        raise ContractViolation("assignment must cover every node exactly once")
    if any(not 0 <= v < net.state_space_size for v in values.values()):
        raise ContractViolation("assignment value outside the state space")
    x0 = tuple(values[NodeId(0, s)] for s in range(net.slice_width))
    p = net.initial_distribution.get(x0, 0.0)
    for node, mech in net.mechanisms.items():
        if p == 0.0:
            break
        p *= mech.row(tuple(values[q] for q in mech.parents))[values[node]]
    return p


def _check_step(net: DynBayesNet, t: int) -> None:
    if not 0 <= t or t + 1 >= net.horizon:
        raise ContractViolation(f"no transition from slice {t} in a network of horizon {net.horizon}")


def markov_matrix_row(net: DynBayesNet, x_t: State, t: int) -> Distribution:
    """``p(x_{t+1} | x_t)`` as a sparse distribution over slice ``t+1`` states."""
    _check_step(net, t)
    row: Distribution = {(): 1.0}
    for s in range(net.slice_width):
        mech = net.mechanisms[NodeId(t + 1, s)]
        probs = mech.row(tuple(x_t[q.site] for q in mech.parents))
        row = {
            prefix + (v,): pp * pv for prefix, pp in row.items() for v, pv in enumerate(probs) if pv > 0.0
        }
    return row


def propagate(net: DynBayesNet, dist: Mapping[State, float], t: int) -> Distribution:
    """Push a slice-``t`` distribution through the mechanisms to slice ``t+1``."""
    _check_step(net, t)
    if abs(math.fsum(dist.values()) - 1.0) > DIST_TOL:
        raise ContractViolation("input distribution does not sum to 1")
    out: Distribution = {}
    for x_t, p in dist.items():
        if p == 0.0:
            continue
        for y, q in markov_matrix_row(net, x_t, t).items():
            out[y] = out.get(y, 0.0) + p * q
    return out


def slice_distribution(net: DynBayesNet, t: int) -> Distribution:
    dist = dict(net.initial_distribution)
    for u in range(t):
        dist = propagate(net, dist, u)
    return dist


def pattern_probability(net: DynBayesNet, pattern: SpatioTemporalPattern) -> float:
    """Exact probability that a trajectory agrees with ``pattern``.

    Forward pass: propagate the joint mass of slice states consistent with the
    pattern so far, dropping states that contradict it.
    """
    fixed: dict[int, dict[int, int]] = {}
    for (t, s), v in pattern:
        if not (0 <= t < net.horizon and 0 <= s < net.slice_width):
            raise ContractViolation(f"node {(t, s)} is not part of the network")
        fixed.setdefault(t, {})[s] = v
    last = max(fixed, default=0)

    def consistent(dist, t):
        want = fixed.get(t)
        if not want:
            return dist
        return {x: p for x, p in dist.items() if all(x[s] == v for s, v in want.items())}

    mass = consistent(dict(net.initial_distribution), 0)
    for t in range(last):
        nxt: Distribution = {}
        for x_t, p in mass.items():
            if p == 0.0:
                continue
            for y, q in markov_matrix_row(net, x_t, t).items():
                nxt[y] = nxt.get(y, 0.0) + p * q
        mass = consistent(nxt, t + 1)
    return math.fsum(mass.values())


def life_network(width: int, height: int, horizon: int) -> DynBayesNet:
    """Game of Life (B3/S23) on a torus as a deterministic network with uniform initial states."""
    n = width * height
    mechanisms = {}
    for s in range(n):
        r, c = divmod(s, width)
        # on narrow tori a cell can be its own neighbour or appear twice
        hood = [((r + dr) % height) * width + (c + dc) % width for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc]
        parents = sorted(set(hood) | {s})
        table = {}
        for vals in itertools.product((0, 1), repeat=len(parents)):
            value = dict(zip(parents, vals))
            live = sum(value[q] for q in hood)
            alive = live == 3 or (value[s] == 1 and live == 2)
            table[vals] = (0.0, 1.0) if alive else (1.0, 0.0)
        for t in range(1, horizon):
            mechanisms[NodeId(t, s)] = Mechanism(tuple(NodeId(t - 1, q) for q in parents), table)
    p0 = 1.0 / (1 << n)
    initial = {x: p0 for x in itertools.product((0, 1), repeat=n)}
    return DynBayesNet(horizon, n, 2, mechanisms, initial)


def state_to_bits(state: State) -> int:
    return sum(v << i for i, v in enumerate(state))


def to_json(net: DynBayesNet) -> str:
    doc = {
        "format": FORMAT,
        "version": 1,
        "horizon": net.horizon,
        "slice_width": net.slice_width,
        "state_space_size": net.state_space_size,
        "initial_distribution": [[list(x), p] for x, p in sorted(net.initial_distribution.items())],
        "mechanisms": [
            {
                "node": list(node),
                "parents": [list(p) for p in mech.parents],
                "table": [[list(k), list(row)] for k, row in sorted(mech.table.items())],
            }
            for node, mech in sorted(net.mechanisms.items())
        ],
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> DynBayesNet:
    doc = json.loads(text)
    if doc.get("format") != FORMAT or doc.get("version") != 1:
        raise ContractViolation("not a version-1 network document")
    mechanisms = {
        NodeId(*m["node"]): Mechanism(
            tuple(NodeId(*p) for p in m["parents"]),
            {tuple(k): tuple(float(v) for v in row) for k, row in m["table"]},
        )
        for m in doc["mechanisms"]
    }
    initial = {tuple(x): float(p) for x, p in doc["initial_distribution"]}
    return DynBayesNet(doc["horizon"], doc["slice_width"], doc["state_space_size"], mechanisms, initial)


def save_network(net: DynBayesNet, path) -> None:
    Path(path).write_text(to_json(net))


def load_network(path) -> DynBayesNet:
    return from_json(Path(path).read_text())
