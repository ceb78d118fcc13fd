import numpy as np
import pytest

from stpatterns import build_ensemble

# The published window t=8,9,10 labels the initial state t=1: 7 generations.
WINDOW_STEPS = 7


def roll_step(grids):
    """Reference Game of Life step on a (M, h, w) 0/1 array using np.roll."""
    n = sum(
        np.roll(np.roll(grids, dr, axis=1), dc, axis=2)
        for dr in (-1, 0, 1)
        for dc in (-1, 0, 1)
        if (dr, dc) != (0, 0)
    )
    return ((n == 3) | ((grids == 1) & (n == 2))).astype(np.uint8)


def naive_step(bits, width, height):
    """Per-cell reference rule on a single packed state."""
    out = 0
    for r in range(height):
        for c in range(width):
            live = sum(
                bits >> (((r + dr) % height) * width + (c + dc) % width) & 1
                for dr in (-1, 0, 1)
                for dc in (-1, 0, 1)
                if dr or dc
            )
            if live == 3 or (bits >> (r * width + c) & 1 and live == 2):
                out |= 1 << (r * width + c)
    return out


def brute_node_values(width, height, start, length):
    """(2**cells, length*cells) array: value of node (start+i, site) for every initial state."""
    cells = width * height
    states = np.arange(1 << cells)
    grids = ((states[:, None] >> np.arange(cells)) & 1).astype(np.uint8).reshape(-1, height, width)
    for _ in range(start):
        grids = roll_step(grids)
    out = []
    for _ in range(length):
        out.append(grids.reshape(len(states), cells))
        grids = roll_step(grids)
    return np.concatenate(out, axis=1)


@pytest.fixture(scope="session")
def tab():
    return build_ensemble(4, 4, WINDOW_STEPS, 3)


@pytest.fixture(scope="session")
def brute():
    """Independent per-initial-state node values for the default window."""
    return brute_node_values(4, 4, WINDOW_STEPS, 3)


def brute_count(brute, pattern, start=WINDOW_STEPS, cells=16):
    if not len(pattern):
        return brute.shape[0]
    cols = [(t - start) * cells + s for (t, s), _ in pattern]
    vals = np.array([v for _, v in pattern], dtype=np.uint8)
    return int(np.all(brute[:, cols] == vals, axis=1).sum())


def random_pattern(rng, brute, size, start=WINDOW_STEPS, cells=16, occurring=True):
    """Random pattern of ``size`` nodes; values read off a random trajectory when ``occurring``."""
    from stpatterns import SpatioTemporalPattern

    cols = rng.choice(brute.shape[1], size=size, replace=False)
    if occurring:
        row = brute[rng.integers(brute.shape[0])]
        vals = row[cols]
    else:
        vals = rng.integers(0, 2, size=size)
    return SpatioTemporalPattern.from_mapping(
        {(start + int(c) // cells, int(c) % cells): int(v) for c, v in zip(cols, vals)}
    )


def random_partition(rng, nodes):
    from stpatterns.integration import Partition

    nodes = list(nodes)
    labels = rng.integers(0, max(1, len(nodes)), size=len(nodes))
    return Partition.from_labels(nodes, labels)


def random_net(rng, slice_width, horizon, states=2, sparse_initial=False):
    """Random network; each node keeps its own site as a parent so slices stay covered."""
    import itertools

    from stpatterns.dbn import DynBayesNet, Mechanism, NodeId

    mechanisms = {}
    for t in range(1, horizon):
        for s in range(slice_width):
            extra = [q for q in range(slice_width) if q != s and rng.random() < 0.5]
            parents = tuple(NodeId(t - 1, q) for q in sorted([s, *extra]))
            table = {
                key: tuple(rng.dirichlet(np.ones(states)).tolist())
                for key in itertools.product(range(states), repeat=len(parents))
            }
            mechanisms[NodeId(t, s)] = Mechanism(parents, table)
    keys = list(itertools.product(range(states), repeat=slice_width))
    weights = rng.dirichlet(np.ones(len(keys)))
    if sparse_initial:
        weights[rng.random(len(keys)) < 0.5] = 0.0
        weights[0] += 1e-3
        weights /= weights.sum()
    initial = {k: float(p) for k, p in zip(keys, weights) if p > 0}
    return DynBayesNet(horizon, slice_width, states, mechanisms, initial)


def brute_net_probability(net, pattern):
    """Sum of joint probabilities of every full assignment consistent with ``pattern``."""
    import itertools
    import math

    from stpatterns.dbn import joint_probability

    nodes = net.nodes
    want = pattern.as_dict()
    total = []
    for values in itertools.product(range(net.state_space_size), repeat=len(nodes)):
        a = dict(zip(nodes, values))
        if all(a[n] == v for n, v in want.items()):
            total.append(joint_probability(net, a))
    return math.fsum(total)


@pytest.fixture(scope="session")
def default_run(tab, tmp_path_factory):
    """Full three-experiment run on the default configuration, files written to a temp dir."""
    from stpatterns.experiments import ExperimentConfig, run_all

    out = tmp_path_factory.mktemp("results")
    cfg = ExperimentConfig(output_dir=out, cache_dir=tmp_path_factory.mktemp("cache"))
    return cfg, run_all(cfg, tab)
