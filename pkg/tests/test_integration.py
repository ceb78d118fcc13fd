import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import WINDOW_STEPS, brute_count, random_net, random_partition, random_pattern
from stpatterns import (
    CapacityError,
    ContractViolation,
    Evidence,
    Partition,
    SpatioTemporalPattern,
    build_ensemble,
    enumerate_partitions,
    evidence,
    evifpp,
    is_integrated,
)
from stpatterns.dbn import DynBayesNet, Mechanism, NodeId
from stpatterns.integration import write_evidence_csv

BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140]


def _nodes(n):
    return [(0, i) for i in range(n)]


@pytest.mark.parametrize("n", range(len(BELL)))
def test_partition_counts_are_bell_numbers(n):
    parts = list(enumerate_partitions(_nodes(n)))
    assert len(parts) == BELL[n]
    assert len(set(parts)) == BELL[n]
    assert all(p.nodes == frozenset(_nodes(n)) for p in parts)


@pytest.mark.parametrize("n", range(1, 10))
def test_bipartition_counts(n):
    parts = list(enumerate_partitions(_nodes(n), "bipartitions"))
    assert len(parts) == 2 ** (n - 1) - 1
    assert len(set(parts)) == len(parts)
    assert all(len(p) == 2 for p in parts)


def test_full_enumeration_capped():
    with pytest.raises(CapacityError):
        next(enumerate_partitions(_nodes(13)))
    with pytest.raises(ContractViolation):
        next(enumerate_partitions(_nodes(3), "pairs"))
    # bipartitions stream lazily past the cap
    assert len(next(enumerate_partitions(_nodes(40), "bipartitions"))) == 2


def test_partition_validation_and_descriptor():
    with pytest.raises(ContractViolation):
        Partition((((0, 0),), ((0, 0), (0, 1))))
    with pytest.raises(ContractViolation):
        Partition(((),))
    p = Partition((((0, 2),), ((0, 0), (0, 1))))
    assert p.descriptor() == "0.0.1"
    assert p.descriptor([(0, 2), (0, 0), (0, 1)]) == "0.1.1"
    assert Partition.trivial(_nodes(3)).is_trivial
    assert len(Partition.finest(_nodes(3))) == 3


def test_finest_evidence_matches_brute_force(tab, brute):
    rng = np.random.default_rng(4)
    for size in (2, 3, 8, 16, 30):
        pat = random_pattern(rng, brute, size)
        joint = math.log2(brute_count(brute, pat) / 65536)
        singles = sum(math.log2(brute_count(brute, pat.restrict([n])) / 65536) for n in pat.nodes)
        want = joint - singles
        assert evifpp(tab, pat).value == pytest.approx(want, abs=1e-9)
        assert evidence(tab, pat, Partition.finest(pat.nodes)).value == pytest.approx(want, abs=1e-9)


def test_base_conversion(tab, brute):
    pat = random_pattern(np.random.default_rng(1), brute, 6)
    bits = evifpp(tab, pat).value
    assert evifpp(tab, pat, math.e).value == pytest.approx(bits * math.log(2), rel=1e-12)
    assert evifpp(tab, pat, 10).value == pytest.approx(bits * math.log10(2), rel=1e-12)


def test_trivial_partition_scores_zero(tab, brute):
    pat = random_pattern(np.random.default_rng(2), brute, 7)
    assert evidence(tab, pat, Partition.trivial(pat.nodes)).value == 0.0


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), size=st.integers(2, 12))
def test_refinement_identity(tab, brute, seed, size):
    # evidence(finest) = evidence(coarse) + sum over blocks of their own finest evidence
    rng = np.random.default_rng(seed)
    pat = random_pattern(rng, brute, size)
    part = random_partition(rng, pat.nodes)
    inner = math.fsum(evifpp(tab, pat.restrict(b)).value for b in part.blocks)
    assert evifpp(tab, pat).value == pytest.approx(evidence(tab, pat, part).value + inner, abs=1e-9)


def test_non_occurring_pattern_scores_zero(tab):
    # a cell that is alive, dead, alive on consecutive steps while its neighbours stay dead cannot happen
    pat = SpatioTemporalPattern.from_mapping(
        {(WINDOW_STEPS, 0): 1, (WINDOW_STEPS + 1, 0): 1, (WINDOW_STEPS, 1): 0, (WINDOW_STEPS, 4): 0,
         (WINDOW_STEPS, 5): 0, (WINDOW_STEPS, 3): 0, (WINDOW_STEPS, 12): 0, (WINDOW_STEPS, 13): 0,
         (WINDOW_STEPS, 15): 0, (WINDOW_STEPS, 7): 0}
    )
    assert tab.pattern_count(pat) == 0
    ev = evifpp(tab, pat)
    assert ev == Evidence(0.0, 2.0, occurred=False)
    assert evidence(tab, pat, Partition.finest(pat.nodes)).occurred is False
    with pytest.raises(ContractViolation):
        is_integrated(tab, pat)
    with pytest.raises(ContractViolation):
        Evidence(1.0, occurred=False)


def test_region_dead_in_all_windows_is_not_integrated():
    # on a 1x1 torus every trajectory is dead from t=1 on, so both nodes are certain
    tab = build_ensemble(1, 1, 1, 2)
    pat = SpatioTemporalPattern.from_mapping({(1, 0): 0, (2, 0): 0})
    assert tab.pattern_probability(pat) == 1
    assert evifpp(tab, pat).value == 0.0
    decision = is_integrated(tab, pat)
    assert not decision.integrated
    assert decision.min_evidence == 0.0
    assert decision.witness == Partition.finest(pat.nodes)


def _two_cell_net(copy):
    if copy:
        table = {(0,): (1.0, 0.0), (1,): (0.0, 1.0)}
    else:
        table = {(0,): (0.5, 0.5), (1,): (0.5, 0.5)}
    mechs = {NodeId(1, s): Mechanism((NodeId(0, s),), table) for s in range(2)}
    uniform = {(a, b): 0.25 for a in (0, 1) for b in (0, 1)}
    return DynBayesNet(2, 2, 2, mechs, uniform)


def test_perfectly_correlated_nodes_are_integrated():
    net = _two_cell_net(copy=True)
    pat = SpatioTemporalPattern.from_mapping({(0, 0): 1, (1, 0): 1})
    assert evifpp(net, pat).value == pytest.approx(1.0)
    decision = is_integrated(net, pat)
    assert decision.integrated and decision.witness is None
    assert decision.min_evidence == pytest.approx(1.0)


def test_independent_nodes_are_not_integrated():
    net = _two_cell_net(copy=False)
    pat = SpatioTemporalPattern.from_mapping({(0, 0): 1, (1, 0): 1, (0, 1): 0})
    assert evifpp(net, pat).value == pytest.approx(0.0, abs=1e-12)
    decision = is_integrated(net, pat)
    assert not decision.integrated
    assert decision.partitions_checked == BELL[3] - 1


def test_single_node_is_integrated(tab):
    pat = SpatioTemporalPattern.from_mapping({(WINDOW_STEPS, 3): 0})
    decision = is_integrated(tab, pat)
    assert decision.integrated and decision.min_evidence == math.inf and decision.partitions_checked == 0


def test_full_and_bipartition_modes_agree_on_small_patterns(tab, brute):
    rng = np.random.default_rng(8)
    for size in (2, 3, 4, 5):
        pat = random_pattern(rng, brute, size)
        full = is_integrated(tab, pat, "all")
        bi = is_integrated(tab, pat, "bipartitions")
        # bipartitions are a subset of all partitions
        assert bi.min_evidence >= full.min_evidence - 1e-12
        if full.integrated:
            assert bi.integrated


def test_dbn_and_ensemble_sources_agree():
    from stpatterns.dbn import life_network

    tab = build_ensemble(2, 2, 0, 3)
    net = life_network(2, 2, 3)
    rng = np.random.default_rng(3)
    for _ in range(10):
        nodes = [(t, s) for t in range(3) for s in range(4)]
        chosen = rng.choice(len(nodes), size=4, replace=False)
        pat = SpatioTemporalPattern.from_mapping({nodes[i]: int(rng.integers(2)) for i in chosen})
        a, b = evifpp(tab, pat), evifpp(net, pat)
        assert a.occurred == b.occurred
        assert a.value == pytest.approx(b.value, abs=1e-9)


def test_random_dbn_evidence_refinement():
    net = random_net(np.random.default_rng(12), 2, 3)
    rng = np.random.default_rng(13)
    pat = SpatioTemporalPattern.from_mapping({tuple(n): int(rng.integers(2)) for n in net.nodes})
    part = random_partition(rng, pat.nodes)
    inner = math.fsum(evifpp(net, pat.restrict(b)).value for b in part.blocks)
    assert evifpp(net, pat).value == pytest.approx(evidence(net, pat, part).value + inner, abs=1e-9)


def test_partition_must_cover_pattern(tab):
    pat = SpatioTemporalPattern.from_mapping({(WINDOW_STEPS, 0): 0, (WINDOW_STEPS, 1): 0})
    with pytest.raises(ContractViolation):
        evidence(tab, pat, Partition((((WINDOW_STEPS, 0),),)))


def test_evidence_csv(tmp_path, tab):
    pat = SpatioTemporalPattern.from_mapping({(WINDOW_STEPS, 0): 0, (WINDOW_STEPS, 1): 0})
    part = Partition.finest(pat.nodes)
    write_evidence_csv(tmp_path / "ev.csv", [("p0", pat, part, evidence(tab, pat, part))])
    lines = (tmp_path / "ev.csv").read_text().splitlines()
    assert lines[0] == "pattern_id,partition,evidence,base,occurred"
    assert lines[1].startswith("p0,0.1,")
